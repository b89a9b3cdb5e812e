"""Pipeline configuration: one flat record, loadable from TOML or JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .errors import InvalidParameter

METHODS = ("qc-spharm", "qc", "spharm", "volume")


@dataclass
class PipelineConfig:
    # expansion and template
    degree: int = 30
    template_points: int = 8000
    # mesh improvement (0 skips a step)
    smooth_iterations: int = 5
    smooth_step: float = 0.5
    simplify_target: int = 0
    refine_passes: int = 0
    # spherical parametrization
    param_max_iterations: int = 300
    param_step: float = 0.5
    param_tol: float = 1e-10
    # alignment search
    align_points: int = 512
    align_degree: int = 10
    align_depth: int = 3
    # mean template iteration
    mean_max_iterations: int = 20
    mean_tol: float = 1e-6
    # shape index weights
    alpha: float = 0.1
    beta: float = 0.1
    gamma: float = 1.0
    # selection and classifier
    p_cut: float = 0.01
    eta: float = 1.0
    C: float = 1.0
    # evaluation protocol
    method: str = "qc-spharm"
    repetitions: int = 100
    train_per_class: int = 15
    test_per_class: int = 5
    seed: int = 0

    def validate(self):
        if self.degree < 1:
            raise InvalidParameter("degree must be >= 1")
        if self.template_points < 4:
            raise InvalidParameter("template_points must be >= 4")
        if not 0.0 < self.p_cut < 1.0:
            raise InvalidParameter("p_cut must be in (0, 1)")
        if self.eta <= 0 or self.C <= 0:
            raise InvalidParameter("eta and C must be positive")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise InvalidParameter("shape index weights must be >= 0")
        if self.method not in METHODS:
            raise InvalidParameter(
                f"method {self.method!r} not one of {METHODS}"
            )
        if self.repetitions < 1:
            raise InvalidParameter("repetitions must be >= 1")
        if self.train_per_class < 3:
            raise InvalidParameter("train_per_class must be >= 3 (bagging)")
        if self.test_per_class < 1:
            raise InvalidParameter("test_per_class must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)


def config_from_dict(data):
    """Build a validated config; unknown keys are rejected."""
    known = {f.name: f.type for f in fields(PipelineConfig)}
    unknown = set(data) - set(known)
    if unknown:
        raise InvalidParameter(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**data).validate()


def load_config(path):
    """Read TOML (.toml) or JSON (.json) into a PipelineConfig."""
    path = Path(path)
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    elif path.suffix == ".json":
        with open(path) as fh:
            data = json.load(fh)
    else:
        raise InvalidParameter(f"config must be .toml or .json, got {path.name}")
    return config_from_dict(data)
