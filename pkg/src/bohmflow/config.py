"""Run configuration: JSON (canonical) or ``key = value`` lines with dotted sections."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ValidationError


class ConfigError(ValidationError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class LatticeConfig:
    h: float = 0.1
    half_extent: int = 40
    dt: float | None = None


@dataclass
class IntegratorConfig:
    tol: float = 1e-10


@dataclass
class AmplitudeConfig:
    epsilons: list = field(default_factory=lambda: [0.0, 0.1, 1.0 / 3.0, 0.4, 0.7, 1.0])
    initial_condition: list = field(default_factory=lambda: [0.5, 0.75])


@dataclass
class ConcurrenceConfig:
    gamma_t_max: float = 2.0
    points: int = 201


@dataclass
class BeablesConfig:
    drift_site: list = field(default_factory=lambda: [0.0, 0.5])
    drift_omega_t: float = math.pi / 4
    drift_samples: int = 1_000_000
    block: int = 9


@dataclass
class ValidateConfig:
    n_ensemble: int = 10_000
    omega_t_check: float = 5.0
    bins: int = 40


@dataclass
class RunConfig:
    a: float = math.sqrt(0.5)
    epsilon: float = 0.4
    sign: str = "+"
    gamma_over_omega: float = 0.1
    nbar: float = 0.0
    t_max_omega: float = 10.0
    output_dt_omega: float = 0.05
    n_traj: int = 1000
    seed: int = 0
    initial_conditions: object = "default-grid"
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    amplitude: AmplitudeConfig = field(default_factory=AmplitudeConfig)
    concurrence: ConcurrenceConfig = field(default_factory=ConcurrenceConfig)
    beables: BeablesConfig = field(default_factory=BeablesConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)

    @property
    def b(self) -> float:
        return math.sqrt(1.0 - self.a * self.a)

    @property
    def sign_int(self) -> int:
        return 1 if self.sign == "+" else -1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["b"] = self.b
        return d

    def check(self) -> "RunConfig":
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(name, msg)

        need(_real(self.a) and 0.0 <= self.a <= 1.0, "a", "must be a real number in [0, 1]")
        need(_real(self.epsilon) and 0.0 <= self.epsilon <= 1.0, "epsilon", "must lie in [0, 1]")
        need(self.sign in ("+", "-"), "sign", "must be '+' or '-'")
        need(_real(self.gamma_over_omega) and self.gamma_over_omega >= 0, "gamma_over_omega", "must be >= 0")
        need(_real(self.nbar) and self.nbar >= 0, "nbar", "must be >= 0")
        need(_real(self.t_max_omega) and self.t_max_omega > 0, "t_max_omega", "must be > 0")
        need(_real(self.output_dt_omega) and self.output_dt_omega > 0, "output_dt_omega", "must be > 0")
        need(isinstance(self.n_traj, int) and self.n_traj >= 1, "n_traj", "must be a positive integer")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed", "must be an unsigned 64-bit integer")
        ic = self.initial_conditions
        if isinstance(ic, str):
            need(ic in ("default-grid", "sampled"), "initial_conditions",
                 "must be 'default-grid', 'sampled' or a list of [x1, x2] pairs")
        else:
            need(isinstance(ic, list) and len(ic) > 0 and all(
                isinstance(r, (list, tuple)) and len(r) == 2 and all(_real(v) for v in r) for r in ic),
                "initial_conditions", "must be a non-empty list of [x1, x2] pairs")
        need(_real(self.lattice.h) and self.lattice.h > 0, "lattice.h", "must be > 0")
        need(isinstance(self.lattice.half_extent, int) and self.lattice.half_extent >= 4, "lattice.half_extent",
             "must be an integer >= 4")
        need(self.lattice.half_extent * self.lattice.h >= 4.0 - 1e-9, "lattice.half_extent",
             "lattice must cover [-4, 4]: half_extent * h >= 4")
        need(self.lattice.dt is None or (_real(self.lattice.dt) and self.lattice.dt > 0), "lattice.dt",
             "must be > 0 or null")
        need(_real(self.integrator.tol) and 0 < self.integrator.tol < 1, "integrator.tol", "must lie in (0, 1)")
        need(isinstance(self.amplitude.epsilons, list) and all(
            _real(e) and 0 <= e <= 1 for e in self.amplitude.epsilons) and self.amplitude.epsilons,
            "amplitude.epsilons", "must be a non-empty list of values in [0, 1]")
        need(isinstance(self.amplitude.initial_condition, list) and len(self.amplitude.initial_condition) == 2,
             "amplitude.initial_condition", "must be an [x1, x2] pair")
        need(_real(self.concurrence.gamma_t_max) and self.concurrence.gamma_t_max > 0,
             "concurrence.gamma_t_max", "must be > 0")
        need(isinstance(self.concurrence.points, int) and self.concurrence.points >= 2,
             "concurrence.points", "must be an integer >= 2")
        need(isinstance(self.beables.drift_samples, int) and self.beables.drift_samples >= 1,
             "beables.drift_samples", "must be a positive integer")
        need(isinstance(self.beables.block, int) and self.beables.block >= 1, "beables.block",
             "must be a positive integer")
        need(isinstance(self.validate.n_ensemble, int) and self.validate.n_ensemble >= 1000,
             "validate.n_ensemble", "must be an integer >= 1000")
        need(isinstance(self.validate.bins, int) and self.validate.bins >= 1, "validate.bins",
             "must be a positive integer")
        return self


def _real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


_SECTIONS = {
    "lattice": LatticeConfig,
    "integrator": IntegratorConfig,
    "amplitude": AmplitudeConfig,
    "concurrence": ConcurrenceConfig,
    "beables": BeablesConfig,
    "validate": ValidateConfig,
}


_TOP_FIELDS = {f.name for f in fields(RunConfig)} - set(_SECTIONS)


def _parse_value(text: str):
    text = text.strip()
    if text in ("−", "-"):
        return "-"
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip("\"'")


def parse_key_value(text: str) -> dict:
    """``key = value`` lines; ``[section]`` headers or dotted keys for nesting; ``#`` comments."""
    out: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if section and "." not in key:
            key = f"{section}.{key}"
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _parse_value(value)
    return out


def config_from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    for key, value in data.items():
        if key == "b":
            continue  # derived from a
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a section/object")
            sub = getattr(cfg, key)
            for k, v in value.items():
                if not hasattr(sub, k):
                    raise ConfigError(f"{key}.{k}", "unknown field")
                setattr(sub, k, v)
        elif key in _TOP_FIELDS:
            if key == "sign" and value == "−":
                value = "-"
            setattr(cfg, key, value)
        else:
            raise ConfigError(key, "unknown field")
    # ints written as floats in key=value files
    for name in ("gamma_over_omega", "nbar", "t_max_omega", "output_dt_omega", "a", "epsilon"):
        v = getattr(cfg, name)
        if isinstance(v, int) and not isinstance(v, bool):
            setattr(cfg, name, float(v))
    if isinstance(cfg.lattice.h, int) and not isinstance(cfg.lattice.h, bool):
        cfg.lattice.h = float(cfg.lattice.h)
    return cfg.check()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().check()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
    else:
        data = parse_key_value(text)
    return config_from_dict(data)
