"""Feature vectors (shape index | expansion coefficients | volume) and the
bagged min-p two-sample t-test used for feature selection."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import (
    IndexOutOfRange,
    InvalidParameter,
    LengthMismatch,
    SchemaMismatch,
    TooFewSubjects,
)


@dataclass(frozen=True)
class FeatureSchema:
    """Column layout: n_vertices shape entries, then 6*(L+1)^2 coefficient
    entries (per (l, m) row: x re, x im, y re, y im, z re, z im), then the
    relative volume difference."""

    n_vertices: int
    L: int

    @property
    def n_shape(self):
        return self.n_vertices

    @property
    def n_spharm(self):
        return 6 * (self.L + 1) ** 2

    @property
    def total(self):
        return self.n_shape + self.n_spharm + 1

    def block_slice(self, name):
        if name == "shape":
            return slice(0, self.n_shape)
        if name == "spharm":
            return slice(self.n_shape, self.n_shape + self.n_spharm)
        if name == "volume":
            return slice(self.n_shape + self.n_spharm, self.total)
        raise SchemaMismatch(f"unknown feature block {name!r}")

    def feature_names(self):
        return (
            [f"e{i}" for i in range(self.n_shape)]
            + [f"r{i}" for i in range(self.n_spharm)]
            + ["vol"]
        )


def assemble_feature_vector(shape_values, coeffs, volume_value, schema=None):
    """Concatenate one subject's blocks in schema order."""
    shape_values = np.asarray(shape_values, dtype=np.float64)
    spharm = coeffs.flatten_real()
    if schema is not None:
        if len(shape_values) != schema.n_shape or len(spharm) != schema.n_spharm:
            raise SchemaMismatch(
                f"blocks ({len(shape_values)}, {len(spharm)}) do not fit "
                f"schema ({schema.n_shape}, {schema.n_spharm})"
            )
    return np.concatenate([shape_values, spharm, [float(volume_value)]])


@dataclass
class FeatureMatrix:
    """Subjects-by-features matrix with class labels +1 / -1."""

    X: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[1] != self.schema.total:
            raise SchemaMismatch(
                f"matrix width {self.X.shape} does not match schema "
                f"total {self.schema.total}"
            )
        if len(self.labels) != len(self.X):
            raise LengthMismatch("one label per row required")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise SchemaMismatch("labels must be +1 or -1")

    def to_csv(self):
        header = ",".join(self.schema.feature_names() + ["label"])
        lines = [header]
        for row, lab in zip(self.X, self.labels):
            lines.append(
                ",".join(repr(float(x)) for x in row) + f",{int(lab)}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise SchemaMismatch("empty feature CSV")
        cols = lines[0].split(",")
        if cols[-1] != "label" or cols[-2] != "vol":
            raise SchemaMismatch("feature CSV must end with vol,label")
        n_shape = sum(1 for c in cols if c.startswith("e"))
        n_spharm = sum(1 for c in cols if c.startswith("r"))
        if n_spharm % 6 != 0:
            raise SchemaMismatch(f"{n_spharm} coefficient columns not div by 6")
        side = int(round(np.sqrt(n_spharm // 6)))
        if 6 * side * side != n_spharm:
            raise SchemaMismatch(f"{n_spharm} coefficient columns not a square")
        schema = FeatureSchema(n_vertices=n_shape, L=side - 1)
        expected = schema.feature_names() + ["label"]
        if cols != expected:
            raise SchemaMismatch("feature CSV columns out of order")
        X = np.empty((len(lines) - 1, schema.total))
        labels = np.empty(len(lines) - 1, dtype=np.int64)
        for i, ln in enumerate(lines[1:]):
            parts = ln.split(",")
            if len(parts) != schema.total + 1:
                raise SchemaMismatch(f"row {i} has {len(parts)} fields")
            X[i] = [float(x) for x in parts[:-1]]
            labels[i] = int(parts[-1])
        return cls(X, labels, schema)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_csv(fh.read())


# ---------------------------------------------------------------------------
# pooled two-sample t-test and leave-one-out bagging

class TtestResult(NamedTuple):
    t: np.ndarray
    p: np.ndarray
    degenerate: np.ndarray  # per-column zero-pooled-variance flag


def _t_from_sums(s1a, s2a, na, s1b, s2b, nb):
    """Column-wise pooled t statistics and two-sided p from group sums."""
    ma = s1a / na
    mb = s1b / nb
    ssa = np.maximum(s2a - s1a * s1a / na, 0.0)
    ssb = np.maximum(s2b - s1b * s1b / nb, 0.0)
    nu = na + nb - 2
    sp2 = (ssa + ssb) / nu
    scale = np.abs(ma) + np.abs(mb) + 1e-300
    degenerate = sp2 <= (1e-12 * scale) ** 2
    denom = np.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(degenerate, 0.0, (ma - mb) / np.where(denom > 0, denom, 1.0))
        p = special.betainc(nu / 2.0, 0.5, nu / (nu + t * t))
    equal_means = np.abs(ma - mb) <= 1e-8 * scale
    signed_inf = np.where(ma >= mb, np.inf, -np.inf)
    t = np.where(degenerate & ~equal_means, signed_inf, t)
    p = np.where(degenerate, np.where(equal_means, 1.0, 0.0), p)
    return TtestResult(t, p, degenerate)


def two_sample_ttest(group_a, group_b):
    """Pooled-variance Student t-test per column.

    Returns (t, p, degenerate).  Columns with zero pooled variance are
    flagged degenerate and get p = 1 when the group means agree and p = 0
    when they differ.
    """
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]  # observations of a single variable
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[1] != b.shape[1]:
        raise LengthMismatch("groups must share the feature dimension")
    if len(a) < 2 or len(b) < 2:
        raise TooFewSubjects("t-test needs at least two rows per group")
    return _t_from_sums(
        a.sum(axis=0), (a * a).sum(axis=0), len(a),
        b.sum(axis=0), (b * b).sum(axis=0), len(b),
    )


def bagged_ttest(X, labels):
    """Leave-one-out bagged t-test: per column, the minimum p over all
    single-subject exclusions.  Needs at least three rows per class.

    Each exclusion recomputes the test from the reduced subsets rather than
    downdating running sums, so the result is bit-identical to recomputing
    every leave-one-out test from scratch.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    a = X[labels == 1]
    b = X[labels == -1]
    if len(a) < 3 or len(b) < 3:
        raise TooFewSubjects(
            f"bagging needs >= 3 rows per class, got {len(a)} and {len(b)}"
        )
    best = np.ones(X.shape[1])
    for r in range(len(a)):
        best = np.minimum(best, two_sample_ttest(np.delete(a, r, axis=0), b).p)
    for r in range(len(b)):
        best = np.minimum(best, two_sample_ttest(a, np.delete(b, r, axis=0)).p)
    return best


@dataclass
class SelectionResult:
    """Per-column p-values with the surviving set omega = {j : p_j <= p_cut}."""

    p: np.ndarray
    omega: np.ndarray
    p_cut: float

    def to_json(self):
        return json.dumps(
            {
                "omega": [int(i) for i in self.omega],
                "p": [float(x) for x in self.p],
                "p_cut": float(self.p_cut),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(
            p=np.array(obj["p"], dtype=np.float64),
            omega=np.array(obj["omega"], dtype=np.int64),
            p_cut=float(obj["p_cut"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def select_features(p, p_cut):
    """Threshold per-column p-values: keep columns with p <= p_cut."""
    p = np.asarray(p, dtype=np.float64)
    if not 0.0 < p_cut < 1.0:
        raise InvalidParameter(f"p_cut must lie in (0, 1), got {p_cut}")
    omega = np.flatnonzero(p <= p_cut)
    return SelectionResult(p=p, omega=omega, p_cut=float(p_cut))


def restrict(X, omega):
    """Column restriction of a feature matrix to the selected set."""
    X = np.asarray(X)
    omega = np.asarray(omega, dtype=np.int64)
    if omega.size and (omega.min() < 0 or omega.max() >= X.shape[1]):
        raise IndexOutOfRange(
            f"selection index outside 0..{X.shape[1] - 1}"
        )
    return X[:, omega]
