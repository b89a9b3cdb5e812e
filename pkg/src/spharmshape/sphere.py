"""Bijective spherical parametrization of genus-0 meshes by radial projection
plus iterative tangential relaxation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, ParamFailure


def _normalized(x):
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    n[n == 0] = 1.0
    return x / n


def fold_count(directions, faces):
    """Number of spherical triangles with non-positive orientation.

    A bijective orientation-preserving map onto the sphere has
    det(a, b, c) > 0 for every face (a, b, c) of unit directions.
    """
    a = directions[faces[:, 0]]
    b = directions[faces[:, 1]]
    c = directions[faces[:, 2]]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    return int(np.count_nonzero(det <= 0.0))


def spherical_face_areas(directions, faces):
    """Signed spherical triangle areas (van Oosterom-Strackee)."""
    a = directions[faces[:, 0]]
    b = directions[faces[:, 1]]
    c = directions[faces[:, 2]]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    denom = (
        1.0
        + np.einsum("ij,ij->i", a, b)
        + np.einsum("ij,ij->i", b, c)
        + np.einsum("ij,ij->i", c, a)
    )
    return 2.0 * np.arctan2(det, denom)


def _area_distortion(directions, mesh):
    sph = np.abs(spherical_face_areas(directions, mesh.faces))
    flat = mesh.face_areas()
    ratio = np.maximum(sph, 1e-300) / np.maximum(flat, 1e-300)
    return float(np.log(ratio).std())


@dataclass
class SphericalParam:
    """Per-vertex unit directions mapping a mesh onto the unit sphere."""

    directions: np.ndarray
    fold_count: int
    iterations: int
    area_distortion_history: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(
            {
                "directions": [[float(c) for c in d] for d in self.directions],
                "fold_count": self.fold_count,
                "iterations": self.iterations,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(
            directions=np.array(obj["directions"], dtype=np.float64),
            fold_count=int(obj["fold_count"]),
            iterations=int(obj["iterations"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def parametrize_sphere(mesh, max_iterations=300, step=0.5, tol=1e-10):
    """Map a genus-0 mesh onto the unit sphere without fold-overs.

    Starts from centroid-radial projection, then relaxes each vertex toward
    the tangential component of its one-ring mean, renormalizing after every
    update.  An update that increases the fold count is rolled back and the
    step halved.  Raises ParamFailure when folds survive the iteration
    budget.
    """
    if not 0.0 < step <= 1.0:
        raise InvalidParameter(f"step must be in (0, 1], got {step}")
    if max_iterations < 0:
        raise InvalidParameter("max_iterations must be >= 0")

    centered = mesh.vertices - mesh.vertices.mean(axis=0)
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms == 0.0):
        # a vertex at the centroid has no radial image; nudge it off center
        bad = norms == 0.0
        centered[bad] = 1e-12 * np.random.default_rng(0).normal(size=(bad.sum(), 3))
    s = _normalized(centered)

    avg = mesh.averaging_matrix
    folds = fold_count(s, mesh.faces)
    history = [_area_distortion(s, mesh)]
    iterations = 0
    for _ in range(max_iterations):
        ring = avg @ s
        radial = np.einsum("ij,ij->i", s, ring)[:, None] * s
        tangent = ring - radial
        s_new = _normalized(s + step * tangent)
        new_folds = fold_count(s_new, mesh.faces)
        if new_folds > folds:
            step *= 0.5
            if step < 1e-8:
                break
            continue
        move = float(np.abs(s_new - s).max())
        s = s_new
        folds = new_folds
        iterations += 1
        history.append(_area_distortion(s, mesh))
        if move < tol and folds == 0:
            break

    if folds > 0:
        raise ParamFailure(
            f"{folds} folded triangles remain after {iterations} iterations",
            fold_count=folds,
        )
    return SphericalParam(
        directions=s,
        fold_count=folds,
        iterations=iterations,
        area_distortion_history=history,
    )


def check_bijectivity(param, mesh):
    """Recount folds of a parametrization against the mesh connectivity."""
    return fold_count(param.directions, mesh.faces)
