"""Soft-margin RBF-kernel SVM: column standardization, an SMO dual solver
with maximal-violating-pair working sets, and model persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateData, LengthMismatch, SchemaMismatch

DUAL_TOL = 1e-4
MAX_PAIR_UPDATES = 1_000_000


@dataclass
class Scaler:
    """Per-column z-score parameters; constant columns keep divisor 1."""

    means: np.ndarray
    stds: np.ndarray


def standardize(X):
    """Fit-and-apply z-scoring; returns (standardized copy, Scaler)."""
    X = np.asarray(X, dtype=np.float64)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds == 0.0, 1.0, stds)
    return (X - means) / stds, Scaler(means, stds)


def apply_scaler(X, scaler):
    return (np.asarray(X, dtype=np.float64) - scaler.means) / scaler.stds


def rbf_kernel(A, B, eta):
    """Gaussian kernel exp(-eta * squared distance), shape (len A, len B)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise LengthMismatch(
            f"vectors of length {A.shape[1]} and {B.shape[1]}"
        )
    return np.exp(-eta * cdist(A, B, "sqeuclidean"))


def smo_solve(K, y, C, tol=DUAL_TOL, max_pair_updates=MAX_PAIR_UPDATES):
    """Dual SMO on a precomputed kernel with maximal-violating-pair steps.

    Each step moves the pair (i, j) maximizing the KKT violation m - M and
    conserves sum(alpha * y) exactly (the paired deltas cancel by
    construction).  Returns (alpha, bias, converged, n_updates).
    """
    n = len(y)
    y = np.asarray(y, dtype=np.float64)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # d/d alpha of the dual objective, alpha = 0
    converged = False
    updates = 0
    while updates < max_pair_updates:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True  # one side empty: no violating pair exists
            break
        m = np.max(yg[up])
        M = np.min(yg[low])
        if m - M <= tol:
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])

        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0.0:
            quad = 1e-12
        delta = y[i] * (m - M) / quad  # unconstrained change of alpha_i
        if y[i] == y[j]:
            lo = max(-alpha[i], alpha[j] - C)
            hi = min(C - alpha[i], alpha[j])
        else:
            lo = max(-alpha[i], -alpha[j])
            hi = min(C - alpha[i], C - alpha[j])
        delta = min(max(delta, lo), hi)
        if delta == 0.0:
            break
        alpha[i] += delta
        alpha[j] -= y[i] * y[j] * delta  # keeps sum(alpha * y) exact
        grad += (y[i] * delta) * (y * K[:, i]) - (y[i] * delta) * (y * K[:, j])
        updates += 1

    # bias from free vectors, else the midpoint of the violation interval
    yg = -y * grad  # equals y - raw decision value
    free = (alpha > 0.0) & (alpha < C)
    if free.any():
        bias = float(np.mean(yg[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if up.any() and low.any():
            bias = float((np.max(yg[up]) + np.min(yg[low])) / 2.0)
        else:
            bias = 0.0
    return alpha, bias, converged, updates


@dataclass
class SvmModel:
    """Trained classifier: kernel settings, selection, scaler and the dual."""

    eta: float
    C: float
    bias: float
    scaler: Scaler
    omega: np.ndarray
    support_rows: np.ndarray
    dual_coeffs: np.ndarray
    schema_tag: str = ""
    converged: bool = True

    def to_json(self):
        return json.dumps(
            {
                "C": float(self.C),
                "bias": float(self.bias),
                "converged": bool(self.converged),
                "dual_coeffs": [float(x) for x in self.dual_coeffs],
                "eta": float(self.eta),
                "omega": [int(i) for i in self.omega],
                "scaler": {
                    "means": [float(x) for x in self.scaler.means],
                    "stds": [float(x) for x in self.scaler.stds],
                },
                "schema_tag": self.schema_tag,
                "support_rows": [
                    [float(x) for x in row] for row in self.support_rows
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        required = (
            "C", "bias", "dual_coeffs", "eta", "omega",
            "scaler", "schema_tag", "support_rows",
        )
        for key in required:
            if key not in obj:
                raise SchemaMismatch(f"model JSON lacks {key!r}")
        scaler = Scaler(
            np.array(obj["scaler"]["means"], dtype=np.float64),
            np.array(obj["scaler"]["stds"], dtype=np.float64),
        )
        support = np.array(obj["support_rows"], dtype=np.float64)
        if support.size == 0:
            support = support.reshape(0, len(scaler.means))
        return cls(
            eta=float(obj["eta"]),
            C=float(obj["C"]),
            bias=float(obj["bias"]),
            scaler=scaler,
            omega=np.array(obj["omega"], dtype=np.int64),
            support_rows=support,
            dual_coeffs=np.array(obj["dual_coeffs"], dtype=np.float64),
            schema_tag=obj["schema_tag"],
            converged=bool(obj.get("converged", True)),
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def train_svm(X, labels, omega=None, eta=1.0, C=1.0, tol=DUAL_TOL,
              max_pair_updates=MAX_PAIR_UPDATES, schema_tag=""):
    """Fit the classifier on full-width rows: restrict to omega, z-score,
    then solve the dual.  Raises DegenerateData when no columns survive
    selection or a class is missing."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if omega is None:
        omega = np.arange(X.shape[1])
    omega = np.asarray(omega, dtype=np.int64)
    if omega.size == 0:
        raise DegenerateData("no features selected")
    if not ((labels == 1).any() and (labels == -1).any()):
        raise DegenerateData("training needs both classes")
    Xr = X[:, omega]
    Xs, scaler = standardize(Xr)
    K = rbf_kernel(Xs, Xs, eta)
    alpha, bias, converged, _ = smo_solve(
        K, labels, C, tol=tol, max_pair_updates=max_pair_updates
    )
    sv = alpha > 0.0
    return SvmModel(
        eta=eta,
        C=C,
        bias=bias,
        scaler=scaler,
        omega=omega,
        support_rows=Xs[sv],
        dual_coeffs=alpha[sv] * labels[sv],
        schema_tag=schema_tag,
        converged=converged,
    )


def decision_function(model, X):
    """Raw decision values for full-width feature rows."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.omega.size and X.shape[1] <= int(model.omega.max()):
        raise SchemaMismatch(
            f"rows have {X.shape[1]} columns, selection needs "
            f"{int(model.omega.max()) + 1}"
        )
    Xs = apply_scaler(X[:, model.omega], model.scaler)
    if len(model.support_rows) == 0:
        return np.full(len(Xs), model.bias)
    K = rbf_kernel(Xs, model.support_rows, model.eta)
    return K @ model.dual_coeffs + model.bias


def predict(model, X):
    """Class labels with sign(0) = +1."""
    f = decision_function(model, X)
    return np.where(f >= 0.0, 1, -1).astype(np.int64)
