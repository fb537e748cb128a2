import numpy as np
import pytest

from bohmflow.integrate import A_MATRIX, B4, B5, C_NODES, integrate_batch


def linear(t, y):
    return np.column_stack([y[:, 1], -y[:, 0]]), np.ones(len(y), dtype=bool)


def test_tableau_consistency():
    for s in range(1, 6):
        assert sum(A_MATRIX[s]) == pytest.approx(C_NODES[s], abs=1e-15)
    assert sum(B5) == pytest.approx(1.0, abs=1e-15)
    assert sum(B4) == pytest.approx(1.0, abs=1e-15)


def test_harmonic_oscillator_accuracy():
    ts = np.linspace(0, 10, 41)
    res = integrate_batch(linear, 0.0, [[1.0, 0.0], [0.0, 2.0]], ts, rtol=1e-11, atol=1e-11)
    exact0 = np.column_stack([np.cos(ts), -np.sin(ts)])
    exact1 = 2 * np.column_stack([np.sin(ts), np.cos(ts)])
    assert np.max(np.abs(res.y[0] - exact0)) < 1e-9
    assert np.max(np.abs(res.y[1] - exact1)) < 1e-9
    assert not res.truncated.any()


def test_fixed_step_order():
    errs = []
    for h in (0.1, 0.05, 0.025):
        res = integrate_batch(linear, 0.0, [[1.0, 0.0]], [2.0], fixed_step=h)
        errs.append(np.hypot(res.y[0, -1, 0] - np.cos(2.0), res.y[0, -1, 1] + np.sin(2.0)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 4.0)


def test_dense_output_between_steps():
    ts = np.linspace(0, 3, 301)
    res = integrate_batch(linear, 0.0, [[1.0, 0.0]], ts, rtol=1e-10, atol=1e-10)
    assert res.accepted[0] < 300
    assert np.max(np.abs(res.y[0, :, 0] - np.cos(ts))) < 1e-8


def test_tolerance_convergence():
    def rhs(t, y):
        return np.column_stack([np.cos(t) * y[:, 0] - y[:, 1] ** 3, y[:, 0]]), np.ones(len(y), dtype=bool)

    ref = integrate_batch(rhs, 0.0, [[0.5, 0.2]], [8.0], rtol=1e-13, atol=1e-13).y[0, -1]
    errs = [np.abs(integrate_batch(rhs, 0.0, [[0.5, 0.2]], [8.0], rtol=tol, atol=tol).y[0, -1] - ref).max()
            for tol in (1e-6, 1e-8, 1e-10)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-8


def test_nodal_region_truncates_with_last_point():
    def rhs(t, y):
        return np.ones_like(y), y[:, 0] < 1.0

    res = integrate_batch(rhs, 0.0, [[0.0], [-5.0]], [0.5, 2.0], rtol=1e-8)
    assert res.truncated.tolist() == [True, False]
    assert res.last_state[0, 0] < 1.0
    assert res.last_state[0, 0] > 1.0 - 1e-6
    assert res.y[0, 0, 0] == pytest.approx(0.5)
    assert np.isnan(res.y[0, 1, 0])
    assert res.y[1, 1, 0] == pytest.approx(-3.0)


def test_rows_are_independent():
    ts = np.linspace(0, 5, 11)
    both = integrate_batch(linear, 0.0, [[1.0, 0.0], [0.3, 0.7]], ts, rtol=1e-9)
    alone = integrate_batch(linear, 0.0, [[0.3, 0.7]], ts, rtol=1e-9)
    assert np.allclose(both.y[1], alone.y[0], rtol=0, atol=1e-13)
    assert both.accepted[1] == alone.accepted[0]


def test_bad_sample_times():
    with pytest.raises(ValueError):
        integrate_batch(linear, 0.0, [[1.0, 0.0]], [1.0, 0.5])
