"""Per-vertex registration distortion: quasi-conformal (Beltrami) magnitude,
discrete curvature differences and their weighted shape index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTriangle, LengthMismatch, ZeroVolume
from .mesh import signed_volume


def _flatten_faces(mesh):
    """Isometric per-face chart: corner0 at 0, corner1 on +x, corner2 above.

    Returns (z1, z2, area): z1 real positive, z2 complex with Im > 0.
    """
    p0, p1, p2 = mesh.face_corners()
    e1 = p1 - p0
    e2 = p2 - p0
    l1 = np.linalg.norm(e1, axis=1)
    cr = np.linalg.norm(np.cross(e1, e2), axis=1)
    if np.any(l1 < 1e-30) or np.any(cr < 1e-30):
        raise DegenerateTriangle("zero-area face in chart flattening")
    x2 = np.einsum("ij,ij->i", e2, e1) / l1
    y2 = cr / l1
    return l1, x2 + 1j * y2, 0.5 * cr


def face_beltrami(source, target):
    """|mu| of the per-face affine map from source to target charts."""
    if source.n_faces != target.n_faces or not np.array_equal(
        source.faces, target.faces
    ):
        raise LengthMismatch("source and target must share connectivity")
    z1, z2, _ = _flatten_faces(source)
    w1, w2, _ = _flatten_faces(target)
    # f(z) = a z + b conj(z) through the three corners (corner0 fixed at 0)
    det = z1 * np.conj(z2) - z2 * np.conj(z1)
    a = (w1 * np.conj(z2) - w2 * np.conj(z1)) / det
    b = (z1 * w2 - z2 * w1) / det
    return np.abs(b) / np.maximum(np.abs(a), 1e-30)


def beltrami_magnitude(source, target):
    """Per-vertex |mu|: source-area-weighted mean over incident faces."""
    mu = face_beltrami(source, target)
    areas = source.face_areas()
    num = np.zeros(source.n_vertices)
    den = np.zeros(source.n_vertices)
    for k in range(3):
        np.add.at(num, source.faces[:, k], areas * mu)
        np.add.at(den, source.faces[:, k], areas)
    den[den == 0] = 1.0
    return num / den


def _corner_cotangents(mesh):
    """Cotangent of the interior angle at each face corner, shape (3, F)."""
    p0, p1, p2 = mesh.face_corners()
    p = (p0, p1, p2)
    cots = np.empty((3, mesh.n_faces))
    for c in range(3):
        a = p[(c + 1) % 3] - p[c]
        b = p[(c + 2) % 3] - p[c]
        dots = np.einsum("ij,ij->i", a, b)
        crs = np.linalg.norm(np.cross(a, b), axis=1)
        if np.any(crs < 1e-30):
            raise DegenerateTriangle("zero-area face in curvature")
        cots[c] = dots / crs
    return cots


def mixed_vertex_areas(mesh):
    """Mixed Voronoi vertex areas: circumcentric cells clamped on obtuse faces.

    Non-obtuse faces split into exact Voronoi pieces; an obtuse face gives
    half its area to the obtuse corner and a quarter to each other corner.
    The pieces partition every face, so the areas sum to the surface area
    and sum(K * area) telescopes under the angle-deficit K below.
    """
    p0, p1, p2 = mesh.face_corners()
    p = (p0, p1, p2)
    cots = _corner_cotangents(mesh)
    areas = mesh.face_areas()
    # squared edge length opposite each corner
    l2 = np.stack([np.sum((p[(c + 1) % 3] - p[(c + 2) % 3]) ** 2, axis=1)
                   for c in range(3)])
    obtuse = cots < 0.0
    any_obtuse = obtuse.any(axis=0)
    out = np.zeros(mesh.n_vertices)
    for c in range(3):
        j, k = (c + 1) % 3, (c + 2) % 3
        voronoi = 0.125 * (l2[j] * cots[j] + l2[k] * cots[k])
        piece = np.where(any_obtuse,
                         np.where(obtuse[c], areas / 2.0, areas / 4.0),
                         voronoi)
        np.add.at(out, mesh.faces[:, c], piece)
    return out


def curvatures(mesh):
    """Discrete Gaussian and mean curvature per vertex, returned as (K, H).

    K is the angle deficit over the mixed Voronoi vertex area, so
    sum(K * mixed_vertex_areas(mesh)) telescopes to 4 pi on closed genus-0
    meshes.  H is the cotangent mean-curvature-vector magnitude over
    4 * area, signed by the outward vertex normal; the unit sphere gets
    H = +1.
    """
    v, f = mesh.vertices, mesh.faces
    p = [v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]]
    n = mesh.n_vertices
    angle_sum = np.zeros(n)
    hvec = np.zeros((n, 3))
    cots = _corner_cotangents(mesh)
    for c in range(3):
        i, j, k = c, (c + 1) % 3, (c + 2) % 3
        a = p[j] - p[c]
        b = p[k] - p[c]
        dots = np.einsum("ij,ij->i", a, b)
        crs = np.linalg.norm(np.cross(a, b), axis=1)
        np.add.at(angle_sum, f[:, i], np.arctan2(crs, dots))
        np.add.at(hvec, f[:, j], cots[c][:, None] * (p[j] - p[k]))
        np.add.at(hvec, f[:, k], cots[c][:, None] * (p[k] - p[j]))
    areas = mixed_vertex_areas(mesh)
    K = (2.0 * np.pi - angle_sum) / areas
    normals = mesh.vertex_normals()
    mag = np.linalg.norm(hvec, axis=1) / (4.0 * areas)
    sign = np.where(np.einsum("ij,ij->i", hvec, normals) < 0.0, -1.0, 1.0)
    return K, sign * mag


def shape_index(mu_abs, dH, dK, alpha=0.1, beta=0.1, gamma=1.0):
    """Weighted distortion index gamma*|mu| + alpha*|dH| + beta*|dK|."""
    return gamma * np.asarray(mu_abs) + alpha * np.abs(dH) + beta * np.abs(dK)


def volume_distortion(subject, template_surface):
    """Relative enclosed-volume difference (subject - template) / template."""
    vt = signed_volume(template_surface)
    if abs(vt) < 1e-30:
        raise ZeroVolume("template surface encloses no volume")
    return (signed_volume(subject) - vt) / vt


@dataclass
class DistortionFeatures:
    """Per-vertex distortion of a registered subject against the template.

    H and K are the subject's own curvatures (so sum(K * mixed area) over
    the registered mesh still closes to 4 pi); the index E folds in the
    differences against the template.
    """

    mu_abs: np.ndarray
    H: np.ndarray
    K: np.ndarray
    shape: np.ndarray

    def to_csv(self):
        lines = ["vertex_id,mu_abs,H,K,E"]
        for i in range(len(self.mu_abs)):
            lines.append(
                f"{i},{float(self.mu_abs[i])!r},{float(self.H[i])!r},"
                f"{float(self.K[i])!r},{float(self.shape[i])!r}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "vertex_id,mu_abs,H,K,E":
            raise LengthMismatch("unexpected distortion CSV header")
        rows = [ln.split(",") for ln in lines[1:]]
        mu = np.array([float(r[1]) for r in rows])
        h = np.array([float(r[2]) for r in rows])
        k = np.array([float(r[3]) for r in rows])
        e = np.array([float(r[4]) for r in rows])
        return cls(mu, h, k, e)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_csv(fh.read())


def compute_distortion(template_surface, registered, alpha=0.1, beta=0.1,
                       gamma=1.0):
    """Full distortion feature set for one registered subject."""
    mu = beltrami_magnitude(template_surface, registered)
    Kt, Ht = curvatures(template_surface)
    Ks, Hs = curvatures(registered)
    e = shape_index(mu, Hs - Ht, Ks - Kt, alpha, beta, gamma)
    return DistortionFeatures(mu, Hs, Ks, e)


def distortion_colors(values, threshold=None):
    """Gray-to-red vertex colors for a scalar field; binary when a threshold
    is given (at or above threshold -> red)."""
    v = np.asarray(values, dtype=np.float64)
    colors = np.full((len(v), 3), 180, dtype=np.int64)
    if threshold is None:
        lo, hi = float(v.min()), float(v.max())
        t = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
        colors[:, 0] = np.round(180 + 75 * t).astype(np.int64)
        colors[:, 1] = np.round(180 * (1.0 - t)).astype(np.int64)
        colors[:, 2] = np.round(180 * (1.0 - t)).astype(np.int64)
    else:
        hot = v >= threshold
        colors[hot] = (220, 30, 30)
    return colors
