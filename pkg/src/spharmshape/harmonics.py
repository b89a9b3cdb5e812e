"""Complex spherical harmonics: orthonormal basis evaluation, least-squares
coefficient fitting and surface reconstruction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IllConditioned,
    InvalidParameter,
    RealityViolation,
    SchemaMismatch,
)

CONDITION_LIMIT = 1e8


def lm_index(l, m):
    """Column of (l, m) in l-major ordering: l*l + l + m."""
    return l * l + l + m


def n_coefficients(L):
    return (L + 1) ** 2


def _legendre_normalized(x, L):
    """Fully normalized associated Legendre values for all 0 <= m <= l <= L.

    Returns (L+1, L+1, n); entry [l, m] is
    sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(x) with the Condon-Shortley
    phase, computed by the stable m-diagonal upward recurrence.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    P = np.zeros((L + 1, L + 1, x.shape[0]))
    sx = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, L + 1):
        P[m, m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sx * P[m - 1, m - 1]
    for m in range(L):
        P[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * P[m, m]
    for m in range(L + 1):
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(
                ((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0)
            )
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def _angles(directions):
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    r = np.linalg.norm(d, axis=1)
    r[r == 0] = 1.0
    ct = np.clip(d[:, 2] / r, -1.0, 1.0)
    phi = np.arctan2(d[:, 1], d[:, 0])
    return ct, phi


def basis_matrix(directions, L):
    """Orthonormal complex basis values, (n, (L+1)^2), l-major columns."""
    ct, phi = _angles(directions)
    P = _legendre_normalized(ct, L)
    e = np.exp(1j * np.outer(phi, np.arange(L + 1)))
    B = np.zeros((len(ct), (L + 1) ** 2), dtype=np.complex128)
    for l in range(L + 1):
        for m in range(l + 1):
            col = P[l, m] * e[:, m]
            B[:, lm_index(l, m)] = col
            if m > 0:
                B[:, lm_index(l, -m)] = (-1.0) ** m * np.conjugate(col)
    return B


def eval_basis(theta, phi, L):
    """All Y_l^m up to degree L at colatitude theta, azimuth phi.

    Returns a complex ((L+1)^2,) row in l-major order.  theta must lie in
    [0, pi] and phi in [0, 2*pi).
    """
    theta = float(theta)
    phi = float(phi)
    if not 0.0 <= theta <= np.pi:
        raise InvalidParameter(f"theta {theta} outside [0, pi]")
    if not 0.0 <= phi < 2.0 * np.pi:
        raise InvalidParameter(f"phi {phi} outside [0, 2*pi)")
    if L < 0:
        raise InvalidParameter(f"degree cap {L} must be >= 0")
    st = np.sin(theta)
    d = np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])
    return basis_matrix(d, L)[0]


def eval_harmonic(directions, l, m):
    """Single basis function Y_l^m at unit directions, complex (n,)."""
    ct, phi = _angles(directions)
    am = abs(m)
    P = _legendre_normalized(ct, l)[l, am]
    col = P * np.exp(1j * am * phi)
    if m < 0:
        col = (-1.0) ** am * np.conjugate(col)
    return col


@dataclass
class SpharmCoefficients:
    """Complex expansion coefficients, one column per coordinate x, y, z.

    Rows follow l-major ordering (all m of degree 0, then degree 1, ...).
    """

    L: int
    coeffs: np.ndarray  # complex, ((L+1)^2, 3)
    residual_rms: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (n_coefficients(self.L), 3):
            raise SchemaMismatch(
                f"coefficient array {c.shape} does not match degree {self.L}"
            )
        self.coeffs = c

    def get(self, l, m):
        return self.coeffs[lm_index(l, m)]

    def truncated(self, L_red):
        """Copy restricted to degrees <= L_red."""
        if L_red > self.L:
            raise SchemaMismatch(f"cannot truncate degree {self.L} to {L_red}")
        return SpharmCoefficients(L_red, self.coeffs[: n_coefficients(L_red)].copy())

    def reality_violation(self):
        """Max deviation from r_l^{-m} = (-1)^m conj(r_l^m)."""
        worst = 0.0
        for l in range(self.L + 1):
            for m in range(1, l + 1):
                diff = self.coeffs[lm_index(l, -m)] - (-1.0) ** m * np.conjugate(
                    self.coeffs[lm_index(l, m)]
                )
                worst = max(worst, float(np.abs(diff).max()))
        return worst

    def flatten_real(self):
        """Real feature layout: per (l, m) row, per coordinate, re then im."""
        out = np.empty(self.coeffs.shape[0] * 6)
        out[0::2] = self.coeffs.real.ravel()
        out[1::2] = self.coeffs.imag.ravel()
        return out

    def to_json(self):
        data = [
            [
                float(row[0].real), float(row[0].imag),
                float(row[1].real), float(row[1].imag),
                float(row[2].real), float(row[2].imag),
            ]
            for row in self.coeffs
        ]
        return json.dumps(
            {"L": self.L, "ordering": "l-major", "data": data}, sort_keys=True
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        for key in ("L", "ordering", "data"):
            if key not in obj:
                raise SchemaMismatch(f"coefficient JSON lacks {key!r}")
        if obj["ordering"] != "l-major":
            raise SchemaMismatch(f"unknown ordering {obj['ordering']!r}")
        L = int(obj["L"])
        data = obj["data"]
        if len(data) != n_coefficients(L):
            raise SchemaMismatch(
                f"{len(data)} rows for degree {L}, expected {n_coefficients(L)}"
            )
        c = np.empty((len(data), 3), dtype=np.complex128)
        for i, row in enumerate(data):
            if len(row) != 6:
                raise SchemaMismatch(f"row {i} has {len(row)} entries, expected 6")
            c[i, 0] = complex(row[0], row[1])
            c[i, 1] = complex(row[2], row[3])
            c[i, 2] = complex(row[4], row[5])
        return cls(L, c)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def fit_coefficients(directions, values, L):
    """Least-squares expansion of per-vertex values over the basis.

    directions are the parametrization's unit vectors, values the matching
    vertex positions (n, 3).  Raises IllConditioned when the system is
    underdetermined or its condition number exceeds 1e8.
    """
    values = np.asarray(values, dtype=np.float64)
    B = basis_matrix(directions, L)
    n, K = B.shape
    if n < K:
        raise IllConditioned(
            f"{n} samples cannot determine {K} coefficients (degree {L})"
        )
    sol, _, rank, sv = np.linalg.lstsq(B, values.astype(np.complex128), rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if rank < K or cond > CONDITION_LIMIT:
        raise IllConditioned(f"condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    resid = B @ sol - values
    rms = tuple(float(v) for v in np.sqrt(np.mean(np.abs(resid) ** 2, axis=0)))
    return SpharmCoefficients(L, sol, residual_rms=rms)


def reconstruct(coeffs, directions, imag_tol=1e-8):
    """Evaluate the expansion at unit directions; returns real (n, 3).

    The imaginary residue must stay below imag_tol relative to the largest
    coordinate magnitude (the reality constraint), else RealityViolation.
    """
    B = basis_matrix(directions, coeffs.L)
    w = B @ coeffs.coeffs
    scale = max(1.0, float(np.abs(w).max()))
    worst = float(np.abs(w.imag).max())
    if worst > imag_tol * scale:
        raise RealityViolation(
            f"imaginary residue {worst:.3e} exceeds {imag_tol:.1e} * {scale:.3e}"
        )
    return np.ascontiguousarray(w.real)
