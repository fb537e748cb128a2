import logging
import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from bohmflow.entanglement import (concurrence, separability_threshold, sudden_death_report,
                                   sudden_death_time, x_state_concurrence, x_state_sudden_death)
from bohmflow.errors import DomainError, ValidationError
from bohmflow.werner import WernerParams, damped_state, werner_initial

S = math.sqrt(0.5)


def random_density(rng, rank=4):
    m = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def test_bell_and_mixed(bell):
    assert concurrence(werner_initial(bell)).value == pytest.approx(1.0, abs=1e-12)
    assert concurrence(np.eye(4) / 4).value == 0.0


def test_partial_werner(werner04):
    assert concurrence(werner_initial(werner04)).value == pytest.approx(0.1, abs=1e-12)


def test_werner_line_matches_closed_form():
    for eps in np.linspace(0, 1, 101):
        c = concurrence(werner_initial(WernerParams.from_a(S, float(eps)))).value
        assert abs(c - max(0.0, (3 * eps - 1) / 2)) < 1e-10


def test_sqrt_eigenvalues_sorted(rng):
    r = concurrence(random_density(rng))
    assert list(r.sqrt_eigenvalues) == sorted(r.sqrt_eigenvalues, reverse=True)
    assert r.value == max(0.0, r.margin)


def test_bounds_on_random_states(rng):
    for rank in (1, 2, 4):
        for _ in range(20):
            c = concurrence(random_density(rng, rank)).value
            assert 0.0 <= c <= 1.0 + 1e-12


def test_pure_state_formula(rng):
    for _ in range(10):
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        expected = 2 * abs(psi[0] * psi[3] - psi[1] * psi[2])
        assert concurrence(np.outer(psi, psi.conj())).value == pytest.approx(expected, abs=1e-8)


def test_local_unitary_invariance(rng):
    rho = random_density(rng, rank=2)
    base = concurrence(rho).value
    for seed in range(20):
        u = np.kron(unitary_group.rvs(2, random_state=seed), unitary_group.rvs(2, random_state=100 + seed))
        rotated = u @ rho @ u.conj().T
        rotated = 0.5 * (rotated + rotated.conj().T)
        assert abs(concurrence(rotated).value - base) < 1e-9


def test_x_state_oracle_on_damped_family():
    for a in (0.2, 0.5, S, 0.9):
        for eps in np.linspace(0, 1, 11):
            for gt in np.linspace(0, 2, 11):
                rho = damped_state(WernerParams.from_a(a, float(eps)), float(gt), 1.3)
                assert abs(concurrence(rho).value - x_state_concurrence(rho)) < 1e-10


def test_monotone_under_damping():
    for a in (0.2, S):
        for eps in (0.4, 0.7, 1.0):
            p = WernerParams.from_a(a, eps)
            vals = [concurrence(damped_state(p, float(gt))).value for gt in np.linspace(0, 3, 61)]
            assert all(v2 <= v1 + 1e-10 for v1, v2 in zip(vals, vals[1:]))


def test_rejects_invalid_matrix():
    with pytest.raises(ValidationError):
        concurrence(np.eye(4) / 3)


def test_thresholds():
    assert separability_threshold(S, S) == pytest.approx(1 / 3, abs=1e-9)
    b = math.sqrt(0.96)
    assert separability_threshold(0.2, b) == pytest.approx(1 / (0.8 * b + 1), abs=1e-9)
    assert separability_threshold(1.0, 0.0) is None
    assert separability_threshold(0.0, 1.0) is None


def test_threshold_sign_independent():
    assert separability_threshold(S, S, -1) == pytest.approx(1 / 3, abs=1e-9)


def test_sudden_death_examples():
    assert sudden_death_time(WernerParams.from_a(S, 0.4)) == pytest.approx(math.log(7 / 6), abs=1e-8)
    assert sudden_death_time(WernerParams.from_a(0.2, 1.0)) == pytest.approx(-math.log1p(-0.2 / math.sqrt(0.96)), abs=1e-10)
    assert sudden_death_time(WernerParams.from_a(0.2, 1.0)) == pytest.approx(0.2283121, abs=1e-7)
    assert sudden_death_time(WernerParams.from_a(S, 1.0)) == math.inf


def test_sudden_death_matches_closed_form(rng):
    for _ in range(20):
        p = WernerParams.from_a(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.5, 1.0)))
        if concurrence(werner_initial(p)).value == 0:
            continue
        t, oracle = sudden_death_time(p), x_state_sudden_death(p)
        if math.isinf(oracle) or oracle > 19:
            continue
        assert t == pytest.approx(oracle, abs=1e-8)


def test_separable_start_is_domain_error():
    with pytest.raises(DomainError):
        sudden_death_time(WernerParams.from_a(S, 0.2))


def test_report_flags_only_disagreement(caplog):
    with caplog.at_level(logging.WARNING, logger="bohmflow.entanglement"):
        rows = sudden_death_report()
    assert [r["agrees"] for r in rows] == [True, True, False]
    assert rows[2]["computed_gamma_t"] == pytest.approx(0.0869, abs=1e-4)
    assert "0.026" in rows[2]["note"]
    assert any("0.026" in rec.message for rec in caplog.records)
