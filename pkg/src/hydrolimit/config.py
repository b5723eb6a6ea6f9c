"""YAML run configuration with range checks on the limit exponents."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .norms import check_exponents


class ConfigError(ValueError):
    pass


BACKENDS = ("bgk", "maxwell", "synthetic")
REQUIRED = ("eps", "alpha", "beta", "ell")


@dataclass
class BackendSpec:
    kind: str = "bgk"
    nu: float = 1.0
    angular_quad_order: int = 16
    seed: int = 0
    scale: float = 1.0


@dataclass
class RunConfig:
    eps: float
    alpha: float
    beta: float
    ell: float
    eps_list: list[float] = field(default_factory=list)
    backend: BackendSpec = field(default_factory=BackendSpec)
    max_degree: int = 6
    d_x: int = 2
    K: int = 8
    s: int = 0
    gamma: float = 0.0
    T: float = 0.5
    dt: float = 0.01
    seed: int = 0
    amplitude: float = 0.1
    kmax: float = 2.0
    micro_amplitude: float = 0.0
    psi_radius: float = 4.0
    sweep_K: int = 16
    hypo_eps: list[float] = field(default_factory=lambda: [1.0, 0.1, 0.01])
    hypo_kmax: float = 8.0
    tolerances: dict = field(default_factory=lambda: {
        "conservation": 1e-12, "kernel": 1e-10, "scaling": 1e-10, "projector": 1e-8,
        "transport": 0.02, "speed": 0.01, "duhamel": 1e-6, "invariants": 1e-8, "slope": 0.35,
        "plateau": 0.01, "cross_check_factor": 5.0,
    })

    def validate(self) -> "RunConfig":
        try:
            check_exponents(self.alpha, self.beta, self.ell)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.backend.kind not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend.kind!r}; choose from {BACKENDS}")
        if self.backend.kind == "bgk" and not self.backend.nu > 0:
            raise ConfigError("BGK rate nu must be positive")
        for eps in [self.eps, *self.eps_list, *self.hypo_eps]:
            if not 0 < eps <= 1:
                raise ConfigError(f"eps must lie in (0, 1], got {eps}")
        if self.s not in (0, 1):
            raise ConfigError("s must be 0 or 1")
        if self.d_x not in (2, 3):
            raise ConfigError("d_x must be 2 or 3")
        if self.K < 1 or self.sweep_K < 1 or self.max_degree < 4:
            raise ConfigError("K >= 1 and max_degree >= 4 required")
        if not (self.T > 0 and self.dt > 0):
            raise ConfigError("T and dt must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def from_dict(raw: dict[str, Any]) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    missing = [key for key in REQUIRED if key not in raw]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    raw = dict(raw)
    backend = raw.pop("backend", {}) or {}
    if isinstance(backend, str):
        backend = {"kind": backend}
    tolerances = raw.pop("tolerances", {}) or {}
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    try:
        cfg = RunConfig(**raw, backend=BackendSpec(**backend))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.tolerances.update(tolerances)
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return from_dict(raw)
