"""Surface registration: template sphere construction, first-order ellipsoid
pose normalization, rotation-search alignment and mean-template building."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .errors import TooFewSubjects, TopologyError
from .harmonics import SpharmCoefficients, fit_coefficients, lm_index, reconstruct
from .mesh import TriangleMesh, load_mesh, save_off, validate_topology

_EYE3 = np.eye(3)


def fibonacci_directions(n):
    """n nearly uniform unit vectors from the golden-angle lattice."""
    i = np.arange(n, dtype=np.float64)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    theta = 2.0 * np.pi * i / golden
    z = 1.0 - 2.0 * (i + 0.5) / n
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([s * np.cos(theta), s * np.sin(theta), z])


def build_template_sphere(n):
    """Unit sphere mesh with exactly n vertices (Fibonacci lattice + hull)."""
    pts = fibonacci_directions(n)
    hull = ConvexHull(pts)
    if len(hull.vertices) != n:
        raise TopologyError(
            f"hull dropped {n - len(hull.vertices)} lattice points"
        )
    faces = hull.simplices.astype(np.int64)
    # orient every face outward (positive determinant about the origin)
    a, b, c = pts[faces[:, 0]], pts[faces[:, 1]], pts[faces[:, 2]]
    flip = np.einsum("ij,ij->i", a, np.cross(b, c)) < 0.0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    mesh = TriangleMesh(pts, faces)
    validate_topology(mesh)
    return mesh


def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix for a (not necessarily unit) axis."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    K = np.array(
        [[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]]
    )
    return _EYE3 + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def _icosahedron_axes():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            [0.0, 1.0, phi],
            [0.0, -1.0, phi],
            [1.0, phi, 0.0],
            [-1.0, phi, 0.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, 1.0],
        ]
    )
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def base_rotations():
    """Coarse SO(3) grid: six icosahedral vertex axes x twelve 30-deg steps."""
    out = []
    for axis in _icosahedron_axes():
        for k in range(12):
            out.append(rotation_about_axis(axis, k * np.pi / 6.0))
    return out


# ---------------------------------------------------------------------------
# first-order ellipsoid pose normalization

@dataclass
class FoeTransform:
    """Object-space normalization: v -> rotation @ v - translation."""

    rotation: np.ndarray
    translation: np.ndarray
    singular_values: np.ndarray
    degenerate: bool


def foe_matrix(coeffs):
    """Real 3x3 map of the degree-1 part: surface ~ A @ direction."""
    c = np.sqrt(3.0 / (4.0 * np.pi))
    cp = c / np.sqrt(2.0)
    r_m1 = coeffs.get(1, -1)
    r_0 = coeffs.get(1, 0)
    r_p1 = coeffs.get(1, 1)
    A = np.empty((3, 3))
    A[:, 0] = cp * (r_m1 - r_p1).real
    A[:, 1] = cp * (r_p1 + r_m1).imag
    A[:, 2] = c * r_0.real
    return A


def _canonical_signs(U):
    U = U.copy()
    for j in range(3):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0.0:
            U[:, j] = -U[:, j]
    if np.linalg.det(U) < 0.0:
        U[:, 2] = -U[:, 2]
    return U


def foe_normalize(coeffs):
    """Rotate the first-order ellipsoid onto the coordinate axes and drop the
    degree-0 offset.  Returns (normalized coefficients, FoeTransform).

    Non-distinct ellipsoid axes leave the rotation undefined; the transform
    is then flagged degenerate and only the translation is removed.
    Already-normalized input is returned unchanged (idempotent).
    """
    A = foe_matrix(coeffs)
    U, S, _ = np.linalg.svd(A)
    gap = 1e-8 * max(S[0], 1e-30)
    degenerate = bool(S[0] - S[1] <= gap or S[1] - S[2] <= gap)
    R = _EYE3 if degenerate else _canonical_signs(U).T

    rotated = coeffs.coeffs @ R.T
    offset = rotated[lm_index(0, 0)].real / np.sqrt(4.0 * np.pi)

    scale = max(1.0, float(np.abs(coeffs.coeffs).max()))
    if (
        np.abs(R - _EYE3).max() <= 1e-9
        and np.linalg.norm(offset) <= 1e-12 * scale
    ):
        return coeffs, FoeTransform(_EYE3.copy(), np.zeros(3), S, degenerate)

    rotated[lm_index(0, 0)] = 0.0
    return (
        SpharmCoefficients(coeffs.L, rotated),
        FoeTransform(R, offset, S, degenerate),
    )


# ---------------------------------------------------------------------------
# rotation-search alignment

@dataclass
class AlignmentResult:
    aligned: SpharmCoefficients
    param_rotation: np.ndarray
    object_rotation: np.ndarray
    translation: np.ndarray
    rmsd: float


def _kabsch(w, u):
    """Best proper rotation Q and translation t with Q w + t ~ u."""
    wc = w.mean(axis=0)
    uc = u.mean(axis=0)
    H = (w - wc).T @ (u - uc)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    if d == 0.0:
        d = 1.0
    Q = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = uc - Q @ wc
    res = w @ Q.T + t - u
    return Q, t, float(np.sqrt(np.mean(np.einsum("ij,ij->i", res, res))))


def _quadrupole_axes(dirs, points):
    """Eigenbasis of the radial second-moment pattern, largest axis first,
    as a proper rotation, or None when the pattern is near-degenerate."""
    rho = np.linalg.norm(points, axis=1)
    Q = 3.0 * (dirs * rho[:, None]).T @ dirs / len(dirs)
    Q -= np.trace(Q) / 3.0 * _EYE3
    lam, E = np.linalg.eigh(Q)
    gap = 1e-6 * max(abs(lam[0]), abs(lam[2]), 1.0)
    if lam[2] - lam[1] <= gap or lam[1] - lam[0] <= gap:
        return None
    E = E[:, ::-1]
    if np.linalg.det(E) < 0.0:
        E[:, 2] = -E[:, 2]
    return E


def _quadrupole_frame_maps(dirs, subject_points, reference_points):
    """Rotations mapping the subject's quadrupole frame onto the
    reference's, one per axis-preserving flip (the near-tied basins)."""
    E_s = _quadrupole_axes(dirs, subject_points)
    E_r = _quadrupole_axes(dirs, reference_points)
    if E_s is None or E_r is None:
        return []
    flips = (
        np.diag([1.0, 1.0, 1.0]),
        np.diag([1.0, -1.0, -1.0]),
        np.diag([-1.0, 1.0, -1.0]),
        np.diag([-1.0, -1.0, 1.0]),
    )
    return [E_s @ F @ E_r.T for F in flips]


def align_to_reference(subject, reference, score_points=512, score_degree=10,
                       depth=3):
    """Align subject coefficients to a reference by parametrization rotation.

    A coarse grid of rotations is scored by the Procrustes rmsd between the
    rotated subject and the reference on a small sample set at reduced
    degree, then hill-climbed with halving angular steps.  The winning
    rotation is applied by refitting the full-degree expansion on rotated
    sample directions, followed by the closed-form object-space rotation
    and translation.
    """
    L = subject.L
    red = min(score_degree, L)
    subj_red = subject.truncated(red)
    ref_red = reference.truncated(min(score_degree, reference.L))
    s_dirs = fibonacci_directions(score_points)
    u = reconstruct(ref_red, s_dirs)

    def score(R):
        w = reconstruct(subj_red, s_dirs @ R.T)
        _, _, r = _kabsch(w, u)
        return r

    best_R = _EYE3
    best = score(best_R)

    # identical surfaces need no resampling; keep them bit-stable
    scale = max(1.0, float(np.sqrt(np.mean(np.einsum("ij,ij->i", u, u)))))
    if subject.L == reference.L and best <= 1e-12 * scale:
        w_full = reconstruct(subject, s_dirs)
        u_full = reconstruct(reference, s_dirs)
        if float(np.abs(w_full - u_full).max()) <= 1e-10 * scale:
            return AlignmentResult(
                subject, _EYE3.copy(), _EYE3.copy(), np.zeros(3), best
            )

    coarse = [(best, best_R)]
    for R in base_rotations():
        coarse.append((score(R), R))
    coarse.sort(key=lambda sr: sr[0])

    def climb(start_r, start_R):
        cur, cur_R = start_r, start_R
        for d in range(1, depth + 1):
            delta = (np.pi / 6.0) / 2.0**d
            for _ in range(20):  # bounded hill climb per level
                improved = False
                for i in range(3):
                    for sgn in (1.0, -1.0):
                        cand = cur_R @ rotation_about_axis(
                            _EYE3[i], sgn * delta
                        )
                        r = score(cand)
                        if r < cur:
                            cur, cur_R = r, cand
                            improved = True
                if not improved:
                    break
        return cur, cur_R

    # Near-ellipsoidal shapes leave the four axis-preserving flips almost
    # tied at grid resolution; climbing only the single best coarse rotation
    # picks a wrong flip often enough to scramble correspondence.  Refine
    # several starts: the best coarse rotations plus the analytic candidates
    # that map the subject's radial quadrupole axes onto the reference's.
    starts = coarse[:4]
    if depth >= 1:
        w_red = reconstruct(subj_red, s_dirs)
        for F in _quadrupole_frame_maps(s_dirs, w_red, u):
            starts.append((score(F), F))

    best, best_R = np.inf, _EYE3
    for start in starts:
        r, R = climb(*start)
        if r < best:
            best, best_R = r, R

    # apply at full degree: refit on rotated directions, then object pose
    n_fit = max(2 * (L + 1) ** 2, score_points)
    f_dirs = fibonacci_directions(n_fit)
    w_full = reconstruct(subject, f_dirs @ best_R.T)
    u_full = reconstruct(reference.truncated(min(L, reference.L)), f_dirs)
    Q, t, rmsd = _kabsch(w_full, u_full)
    aligned = fit_coefficients(f_dirs, w_full @ Q.T + t, L)
    aligned.residual_rms = None
    return AlignmentResult(aligned, best_R, Q, t, rmsd)


# ---------------------------------------------------------------------------
# mean template

@dataclass
class MeanTemplate:
    """Cohort mean expansion plus the sampling sphere and per-subject poses."""

    coeffs: SpharmCoefficients
    sphere: TriangleMesh
    alignments: list

    def surface(self):
        """Mean surface sampled at the sphere vertices."""
        return TriangleMesh(
            reconstruct(self.coeffs, self.sphere.vertices), self.sphere.faces
        )

    def save(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.coeffs.save(d / "mean_coefficients.json")
        save_off(self.sphere, d / "template_sphere.off")
        rows = [
            {
                "object_rotation": [[float(x) for x in row] for row in a.object_rotation],
                "param_rotation": [[float(x) for x in row] for row in a.param_rotation],
                "rmsd": float(a.rmsd),
                "translation": [float(x) for x in a.translation],
            }
            for a in self.alignments
        ]
        with open(d / "rotations.json", "w") as fh:
            fh.write(json.dumps({"subjects": rows}, sort_keys=True))

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        coeffs = SpharmCoefficients.load(d / "mean_coefficients.json")
        sphere = load_mesh(d / "template_sphere.off")
        with open(d / "rotations.json") as fh:
            rows = json.load(fh)["subjects"]
        alignments = [
            AlignmentResult(
                aligned=None,
                param_rotation=np.array(r["param_rotation"]),
                object_rotation=np.array(r["object_rotation"]),
                translation=np.array(r["translation"]),
                rmsd=float(r["rmsd"]),
            )
            for r in rows
        ]
        return cls(coeffs, sphere, alignments)


def build_mean_surface(cohort, sphere, max_iterations=20, tol=1e-6,
                       score_points=512, score_degree=10, depth=3):
    """Iterative align-and-average mean of pose-normalized expansions.

    Every iteration re-aligns each subject to the current mean and averages
    the aligned coefficients; stops when the mean's movement (surface rms
    via Parseval) drops below tol.  A one-subject cohort returns that
    subject unchanged.
    """
    if not cohort:
        raise TooFewSubjects("mean template needs at least one subject")
    L = cohort[0].L
    for c in cohort:
        if c.L != L:
            raise TooFewSubjects("cohort degrees differ")

    kw = dict(score_points=score_points, score_degree=score_degree, depth=depth)
    mean = cohort[0]
    alignments = [None] * len(cohort)
    for _ in range(max_iterations):
        for i, c in enumerate(cohort):
            alignments[i] = align_to_reference(c, mean, **kw)
        stacked = np.stack([a.aligned.coeffs for a in alignments])
        new_mean = SpharmCoefficients(L, stacked.mean(axis=0))
        move = float(
            np.sqrt(np.sum(np.abs(new_mean.coeffs - mean.coeffs) ** 2) / (4.0 * np.pi))
        )
        mean = new_mean
        if move < tol:
            break

    mean, _ = foe_normalize(mean)
    for i, c in enumerate(cohort):
        alignments[i] = align_to_reference(c, mean, **kw)
    return MeanTemplate(mean, sphere, alignments)


@dataclass
class RegisteredSurface:
    """Subject expansion aligned to a template, sampled on its sphere."""

    coeffs: SpharmCoefficients
    mesh: TriangleMesh
    alignment: AlignmentResult
    foe: FoeTransform


def register_subject(coeffs, template, score_points=512, score_degree=10,
                     depth=3):
    """Pose-normalize and align subject coefficients to the mean template,
    then sample the aligned surface at the template sphere vertices."""
    normalized, foe = foe_normalize(coeffs)
    result = align_to_reference(
        normalized,
        template.coeffs,
        score_points=score_points,
        score_degree=score_degree,
        depth=depth,
    )
    positions = reconstruct(result.aligned, template.sphere.vertices)
    mesh = TriangleMesh(positions, template.sphere.faces)
    return RegisteredSurface(result.aligned, mesh, result, foe)
