"""Synthetic genus-0 cohorts: ellipsoid-based subjects with band-limited
shape noise, and a localized bump plus volume change for the affected class."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .errors import InvalidParameter, SchemaMismatch
from .harmonics import basis_matrix, n_coefficients
from .mesh import TriangleMesh, load_mesh, save_off
from .template import fibonacci_directions


@dataclass
class CohortSpec:
    """Generation parameters.  Class +1 subjects are the unaffected base
    shape; class -1 subjects additionally carry the bump and the volume
    factor.  The cubic asymmetry term breaks the ellipsoid's flip symmetry
    so the pose search has a unique optimum."""

    n_positive: int = 10
    n_negative: int = 10
    n_points: int = 1600
    radii: tuple = (1.15, 1.0, 0.85)
    asym: float = 0.1
    noise_amplitude: float = 0.01
    noise_degree: int = 10
    bump_amplitude: float = 0.08
    bump_radius: float = 0.6
    bump_center: tuple = (0.7427813527082074, 0.5199469468957452, 0.4213083351047148)
    volume_scale: float = 0.92
    seed: int = 0

    def __post_init__(self):
        c = np.asarray(self.bump_center, dtype=np.float64)
        n = np.linalg.norm(c)
        if n == 0:
            raise InvalidParameter("bump_center must be a nonzero direction")
        self.bump_center = tuple(float(x) for x in c / n)
        self.radii = tuple(float(x) for x in self.radii)
        if min(self.radii) <= 0:
            raise InvalidParameter("radii must be positive")
        if not 0 < self.bump_radius < np.pi:
            raise InvalidParameter("bump_radius must be in (0, pi)")
        if self.bump_amplitude < 0 or self.noise_amplitude < 0:
            raise InvalidParameter("amplitudes must be >= 0")
        if self.volume_scale <= 0:
            raise InvalidParameter("volume_scale must be positive")
        if self.n_positive < 1 or self.n_negative < 1:
            raise InvalidParameter("need at least one subject per class")

    def to_dict(self):
        d = asdict(self)
        d["radii"] = list(self.radii)
        d["bump_center"] = list(self.bump_center)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["radii"] = tuple(d["radii"])
        d["bump_center"] = tuple(d["bump_center"])
        return cls(**d)


def _random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _ellipsoid_radius(dirs, radii):
    a, b, c = radii
    q = (dirs[:, 0] / a) ** 2 + (dirs[:, 1] / b) ** 2 + (dirs[:, 2] / c) ** 2
    return 1.0 / np.sqrt(q)


def _asym_term(dirs, strength):
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    return strength * (x * x * z + x * y * y)


def _band_noise(dirs, rng, amplitude, degree):
    """Real band-limited field over degrees 2..degree with exact rms."""
    if amplitude == 0.0 or degree < 2:
        return np.zeros(len(dirs))
    B = basis_matrix(dirs, degree)
    c = np.zeros(n_coefficients(degree), dtype=np.complex128)
    for l in range(2, degree + 1):
        base = l * l + l
        c[base] = rng.normal()
        for m in range(1, l + 1):
            v = (rng.normal() + 1j * rng.normal()) / np.sqrt(2.0)
            c[base + m] = v
            c[base - m] = (-1.0) ** m * np.conj(v)
    f = (B @ c).real
    rms = float(np.sqrt(np.mean(f * f)))
    if rms == 0.0:
        return np.zeros(len(dirs))
    return f * (amplitude / rms)


def bump_profile(dirs, center, radius, amplitude):
    """Cosine-tapered cap: amplitude at the center, zero at angle >= radius."""
    d = np.arccos(np.clip(np.asarray(dirs) @ np.asarray(center), -1.0, 1.0))
    return np.where(
        d < radius, amplitude * (0.5 + 0.5 * np.cos(np.pi * d / radius)), 0.0
    )


@dataclass
class GroundTruth:
    """Affected region in the generation frame; empty at zero amplitude."""

    bump_center: np.ndarray
    bump_radius: float
    bump_amplitude: float = 1.0

    def vertex_mask(self, directions):
        directions = np.asarray(directions)
        if self.bump_amplitude == 0.0:
            return np.zeros(len(directions), dtype=bool)
        d = np.arccos(np.clip(directions @ self.bump_center, -1.0, 1.0))
        return d <= self.bump_radius


def _direction_hull_faces(dirs):
    hull = ConvexHull(dirs)
    faces = hull.simplices.astype(np.int64)
    a, b, c = dirs[faces[:, 0]], dirs[faces[:, 1]], dirs[faces[:, 2]]
    flip = np.einsum("ij,ij->i", a, np.cross(b, c)) < 0.0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def generate_subject(spec, index, label):
    """One subject mesh: star-shaped radius field sampled on a randomly
    rotated lattice, then posed by a random world rotation and offset."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    r_sample = _random_rotation(rng)
    dirs = fibonacci_directions(spec.n_points) @ r_sample.T
    rel = _asym_term(dirs, spec.asym)
    rel += _band_noise(dirs, rng, spec.noise_amplitude, spec.noise_degree)
    if label == -1:
        rel += bump_profile(
            dirs, spec.bump_center, spec.bump_radius, spec.bump_amplitude
        )
    radius = _ellipsoid_radius(dirs, spec.radii) * (1.0 + rel)
    if np.any(radius <= 0):
        raise InvalidParameter("relative perturbation exceeds the base radius")
    if label == -1:
        radius = radius * spec.volume_scale ** (1.0 / 3.0)
    verts = radius[:, None] * dirs
    faces = _direction_hull_faces(dirs)
    r_world = _random_rotation(rng)
    t_world = rng.normal(0.0, 0.1, size=3)
    return TriangleMesh(verts @ r_world.T + t_world, faces)


def clean_base_mesh(spec):
    """Unposed, noise-free, bump-free base shape on the unrotated lattice.

    Shares the generation frame with the ground truth, so registering this
    mesh maps that frame onto a template's."""
    dirs = fibonacci_directions(spec.n_points)
    radius = _ellipsoid_radius(dirs, spec.radii) * (1.0 + _asym_term(dirs, spec.asym))
    return TriangleMesh(radius[:, None] * dirs, _direction_hull_faces(dirs))


@dataclass
class Cohort:
    meshes: list
    labels: np.ndarray
    spec: CohortSpec

    @property
    def ground_truth(self):
        return GroundTruth(
            np.asarray(self.spec.bump_center),
            self.spec.bump_radius,
            self.spec.bump_amplitude,
        )


def generate_cohort(spec):
    """All subjects of both classes; class +1 first, then class -1."""
    labels = np.concatenate(
        [np.ones(spec.n_positive, np.int64), -np.ones(spec.n_negative, np.int64)]
    )
    meshes = [
        generate_subject(spec, i, int(lab)) for i, lab in enumerate(labels)
    ]
    return Cohort(meshes, labels, spec)


def save_cohort(cohort, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for i, mesh in enumerate(cohort.meshes):
        name = f"subject_{i:03d}.off"
        save_off(mesh, d / name)
        names.append(name)
    manifest = {
        "files": names,
        "ground_truth": {
            "bump_amplitude": float(cohort.spec.bump_amplitude),
            "bump_center": list(cohort.spec.bump_center),
            "bump_radius": float(cohort.spec.bump_radius),
        },
        "labels": [int(x) for x in cohort.labels],
        "seeds": [[cohort.spec.seed, i] for i in range(len(cohort.meshes))],
        "spec": cohort.spec.to_dict(),
    }
    with open(d / "manifest.json", "w") as fh:
        fh.write(json.dumps(manifest, sort_keys=True))


def load_cohort(directory):
    d = Path(directory)
    try:
        with open(d / "manifest.json") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaMismatch(f"{d}: no manifest.json") from exc
    for key in ("files", "labels", "spec"):
        if key not in manifest:
            raise SchemaMismatch(f"{d}: manifest lacks {key!r}")
    spec = CohortSpec.from_dict(manifest["spec"])
    meshes = [load_mesh(d / name) for name in manifest["files"]]
    labels = np.array(manifest["labels"], dtype=np.int64)
    if len(labels) != len(meshes):
        raise SchemaMismatch(f"{d}: label count differs from file count")
    return Cohort(meshes, labels, spec)
