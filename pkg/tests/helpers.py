"""Fixture geometry and numeric oracles built independently of the library.

Meshes here come from golden-ratio tables, midpoint subdivision and
parametric grids written out by hand; reference values come from
quadrature, scipy.special and closed forms, never from the code under
test, so a broken implementation cannot vouch for itself.
"""

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, sph_harm_y

from spharmshape.mesh import TriangleMesh

PHI = (1.0 + np.sqrt(5.0)) / 2.0


# ---------------------------------------------------------------------------
# reference meshes

def tetrahedron():
    """Regular tetrahedron, outward orientation, volume 8/3."""
    v = np.array(
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
    )
    f = np.array([[0, 1, 2], [1, 3, 2], [0, 2, 3], [0, 3, 1]])
    return TriangleMesh(v, f)


def cube():
    """Unit cube as 12 outward triangles, volume exactly 1."""
    v = np.array(
        [
            [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0],
        ]
    )
    f = np.array(
        [
            [0, 3, 2], [0, 2, 1],
            [4, 5, 6], [4, 6, 7],
            [0, 1, 5], [0, 5, 4],
            [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6],
            [3, 0, 4], [3, 4, 7],
        ]
    )
    return TriangleMesh(v, f)


_ICO_VERTS = np.array(
    [
        [-1.0, PHI, 0.0], [1.0, PHI, 0.0], [-1.0, -PHI, 0.0], [1.0, -PHI, 0.0],
        [0.0, -1.0, PHI], [0.0, 1.0, PHI], [0.0, -1.0, -PHI], [0.0, 1.0, -PHI],
        [PHI, 0.0, -1.0], [PHI, 0.0, 1.0], [-PHI, 0.0, -1.0], [-PHI, 0.0, 1.0],
    ]
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


def icosahedron(radius=1.0):
    v = _ICO_VERTS / np.linalg.norm(_ICO_VERTS[0])
    return TriangleMesh(radius * v, _ICO_FACES)


def icosphere(level, radius=1.0):
    """Midpoint-subdivided icosahedron reprojected onto the sphere.

    Level k has 10 * 4**k + 2 vertices.
    """
    verts = [tuple(p) for p in _ICO_VERTS / np.linalg.norm(_ICO_VERTS[0])]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(level):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = 0.5 * (np.array(verts[a]) + np.array(verts[b]))
                verts.append(tuple(p / np.linalg.norm(p)))
                cache[key] = len(verts) - 1
            return cache[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces
    return TriangleMesh(radius * np.array(verts), np.array(faces))


def ellipsoid(level, radii):
    m = icosphere(level)
    return TriangleMesh(m.vertices * np.asarray(radii, dtype=np.float64), m.faces)


def noisy_icosphere(level, sigma, seed=0):
    """Icosphere with radial jitter, the smoothing test subject."""
    m = icosphere(level)
    rng = np.random.default_rng(seed)
    r = 1.0 + sigma * rng.normal(size=m.n_vertices)
    return TriangleMesh(m.vertices * r[:, None], m.faces)


def torus(n_major=24, n_minor=12, R=2.0, r=0.7):
    """Closed genus-1 grid torus (Euler characteristic 0)."""
    i = np.repeat(np.arange(n_major), n_minor)
    j = np.tile(np.arange(n_minor), n_major)
    u = 2.0 * np.pi * i / n_major
    v = 2.0 * np.pi * j / n_minor
    verts = np.stack(
        [
            (R + r * np.cos(v)) * np.cos(u),
            (R + r * np.cos(v)) * np.sin(u),
            r * np.sin(v),
        ],
        axis=1,
    )

    def vid(a, b):
        return (a % n_major) * n_minor + (b % n_minor)

    faces = []
    for a in range(n_major):
        for b in range(n_minor):
            faces.append((vid(a, b), vid(a + 1, b), vid(a + 1, b + 1)))
            faces.append((vid(a, b), vid(a + 1, b + 1), vid(a, b + 1)))
    return TriangleMesh(verts, np.array(faces))


def fibonacci_sphere(n):
    """Offset Fibonacci lattice, near-uniform on the sphere."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = 2.0 * np.pi * i * (1.0 - 1.0 / PHI)
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0.0:
        q[:, 2] = -q[:, 2]
    return q


# ---------------------------------------------------------------------------
# spherical-harmonics oracles

def sphere_quadrature(n_theta=48):
    """Gauss-Legendre in cos(theta) times trapezoid in phi.

    Exact for spherical polynomials well past the degrees used in tests;
    weights sum to 4 pi.
    """
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    n_phi = 2 * n_theta + 1
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    ct = np.repeat(x, n_phi)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    ph = np.tile(phi, n_theta)
    dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    w = np.repeat(wx, n_phi) * (2.0 * np.pi / n_phi)
    return dirs, w


def angles_of(directions):
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2.0 * np.pi)
    return theta, phi


def basis_oracle(directions, L):
    """l-major complex basis values from scipy's spherical harmonics."""
    theta, phi = angles_of(directions)
    cols = [
        sph_harm_y(l, m, theta, phi)
        for l in range(L + 1)
        for m in range(-l, l + 1)
    ]
    return np.stack(cols, axis=1)


def random_real_coeffs(rng, L):
    """Random expansion of a real 3-vector field: coefficient moduli in
    [0.5, 1.5] so per-coefficient relative errors are well defined, with
    the conjugate symmetry that makes the reconstruction real."""
    K = (L + 1) ** 2
    c = np.zeros((K, 3), dtype=np.complex128)
    for l in range(L + 1):
        base = l * l + l
        c[base] = rng.uniform(0.5, 1.5, 3) * rng.choice([-1.0, 1.0], 3)
        for m in range(1, l + 1):
            v = rng.uniform(0.5, 1.5, 3) * np.exp(2j * np.pi * rng.uniform(size=3))
            c[base + m] = v
            c[base - m] = (-1.0) ** m * np.conjugate(v)
    return c


# ---------------------------------------------------------------------------
# statistics oracles

def pooled_t(a, b):
    """Pooled-variance two-sample t statistic and degrees of freedom."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    var = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    t = (a.mean() - b.mean()) / np.sqrt(var * (1.0 / na + 1.0 / nb))
    return float(t), na + nb - 2


def t_two_sided_p(t, df):
    """Two-sided Student p by direct numeric integration of the density."""
    t = abs(float(t))
    c = np.exp(gammaln((df + 1) / 2.0) - gammaln(df / 2.0)
               - 0.5 * np.log(df * np.pi))

    def density(s):
        return c * (1.0 + s * s / df) ** (-(df + 1) / 2.0)

    tail = quad(density, t, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    return min(1.0, 2.0 * tail)


# ---------------------------------------------------------------------------
# file snippets

def off_text(vertices, faces):
    lines = ["OFF", f"{len(vertices)} {len(faces)} 0"]
    lines += [
        f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}"
        for p in np.asarray(vertices, dtype=np.float64)
    ]
    lines += [f"3 {a} {b} {c}" for a, b, c in np.asarray(faces)]
    return "\n".join(lines) + "\n"
