"""Triangle meshes: representation, OFF/PLY/OBJ I/O, topology checks and the
quality-improvement chain (smoothing, simplification, refinement)."""

from __future__ import annotations

import heapq
import json
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    InvalidParameter,
    ParseError,
    SimplificationError,
    TopologyError,
)


class TriangleMesh:
    """Indexed triangle surface with immutable vertex/face arrays.

    Faces are vertex-index triples with counter-clockwise orientation
    (outward normals for closed surfaces). Construction checks only cheap
    local properties; use :func:`load_mesh` or :func:`validate_genus0` for
    full topology validation.
    """

    def __init__(self, vertices, faces):
        v = np.array(vertices, dtype=np.float64)
        f = np.array(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise TopologyError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise TopologyError(f"faces must be (m, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise TopologyError("face index out of range")
        if f.size and (
            np.any(f[:, 0] == f[:, 1])
            or np.any(f[:, 1] == f[:, 2])
            or np.any(f[:, 0] == f[:, 2])
        ):
            raise TopologyError("degenerate face (repeated vertex index)")
        v.setflags(write=False)
        f.setflags(write=False)
        self.vertices = v
        self.faces = f

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def edges(self):
        """Unique undirected edges as a sorted (E, 2) int array."""
        he = np.sort(self.halfedges, axis=1)
        return np.unique(he, axis=0)

    @cached_property
    def halfedges(self):
        """Directed edges, three per face, as a (3F, 2) array."""
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def face_corners(self):
        """Per-face corner positions as three (F, 3) arrays."""
        v, f = self.vertices, self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_cross(self):
        p0, p1, p2 = self.face_corners()
        return np.cross(p1 - p0, p2 - p0)

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self):
        c = self.face_cross()
        n = np.linalg.norm(c, axis=1, keepdims=True)
        n[n == 0] = 1.0
        return c / n

    def vertex_areas(self):
        """Barycentric vertex areas (one third of incident face areas)."""
        a = np.repeat(self.face_areas() / 3.0, 3)
        out = np.zeros(self.n_vertices)
        np.add.at(out, self.faces.ravel(), a)
        return out

    def vertex_normals(self):
        """Area-weighted average of incident face normals, unit length."""
        c = self.face_cross()
        out = np.zeros((self.n_vertices, 3))
        for k in range(3):
            np.add.at(out, self.faces[:, k], c)
        n = np.linalg.norm(out, axis=1, keepdims=True)
        n[n == 0] = 1.0
        return out / n

    @cached_property
    def adjacency(self):
        """Symmetric vertex adjacency as a CSR boolean matrix."""
        e = self.edges
        n = self.n_vertices
        i = np.concatenate([e[:, 0], e[:, 1]])
        j = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix(
            (np.ones(len(i)), (i, j)), shape=(n, n)
        )

    @cached_property
    def averaging_matrix(self):
        """Row-normalized adjacency: (A x)_i = mean of i's neighbors."""
        a = self.adjacency
        deg = np.asarray(a.sum(axis=1)).ravel()
        deg[deg == 0] = 1.0
        return sparse.diags(1.0 / deg) @ a

    def with_vertices(self, vertices):
        return TriangleMesh(vertices, self.faces)


@dataclass
class MeshQualityReport:
    vertex_count: int
    edge_count: int
    face_count: int
    euler_characteristic: int
    edge_length_cv: float
    min_face_area: float

    @property
    def is_genus0(self):
        return self.euler_characteristic == 2

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# topology validation

def _directed_edge_check(faces):
    """Each directed edge must appear exactly once, and its reverse too."""
    he = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    keys = he[:, 0].astype(np.int64) * (he.max() + 1) + he[:, 1]
    uniq, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 1):
        raise TopologyError("orientation inconsistent (duplicated directed edge)")
    rev = he[:, 1].astype(np.int64) * (he.max() + 1) + he[:, 0]
    if not np.isin(rev, uniq).all():
        raise TopologyError("open boundary (directed edge without its reverse)")


def _vertex_manifold_check(mesh):
    """Incident faces of each vertex must form a single closed fan."""
    n = mesh.n_vertices
    succ = [dict() for _ in range(n)]
    for a, b, c in mesh.faces:
        succ[a][b] = c
        succ[b][c] = a
        succ[c][a] = b
    for v in range(n):
        ring = succ[v]
        if not ring:
            raise TopologyError(f"unreferenced vertex {v}")
        start = next(iter(ring))
        cur = ring[start]
        seen = 1
        while cur != start:
            if cur not in ring or seen > len(ring):
                raise TopologyError(f"non-manifold vertex {v}")
            cur = ring[cur]
            seen += 1
        if seen != len(ring):
            raise TopologyError(f"non-manifold vertex {v}")


def validate_topology(mesh):
    """Raise TopologyError unless mesh is closed, oriented, manifold, genus-0."""
    if mesh.n_faces < 4:
        raise TopologyError("too few faces for a closed surface")
    _directed_edge_check(mesh.faces)
    _vertex_manifold_check(mesh)
    ncomp = csgraph.connected_components(
        mesh.adjacency, directed=False, return_labels=False
    )
    if ncomp != 1:
        raise TopologyError(f"{ncomp} connected components")
    chi = mesh.euler_characteristic
    if chi != 2:
        raise TopologyError(f"Euler characteristic {chi}, expected 2 (genus 0)")


def validate_genus0(mesh):
    """Read-only quality report; findings are reported, not thrown."""
    lengths = mesh.edge_lengths()
    mean = lengths.mean()
    cv = float(lengths.std() / mean) if mean > 0 else 0.0
    return MeshQualityReport(
        vertex_count=mesh.n_vertices,
        edge_count=mesh.n_edges,
        face_count=mesh.n_faces,
        euler_characteristic=int(mesh.euler_characteristic),
        edge_length_cv=cv,
        min_face_area=float(mesh.face_areas().min()),
    )


def signed_volume(mesh):
    """Sum over faces of det(p0, p1, p2) / 6; positive for outward orientation."""
    p0, p1, p2 = mesh.face_corners()
    return float(np.einsum("ij,ij->i", p0, np.cross(p1, p2)).sum() / 6.0)


# ---------------------------------------------------------------------------
# file I/O

def _tokens(path):
    out = []
    with open(path) as fh:
        for line in fh:
            body = line.split("#", 1)[0].strip()
            if body:
                out.append(body.split())
    return out


def _parse_off(path):
    rows = _tokens(path)
    if not rows:
        raise ParseError(f"{path}: empty file")
    head = rows[0]
    if head[0].upper() != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    if len(head) >= 4:
        counts = head[1:4]
        body = rows[1:]
    else:
        if len(rows) < 2:
            raise ParseError(f"{path}: missing counts line")
        counts = rows[1][:3]
        body = rows[2:]
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: bad counts line") from exc
    if len(body) < nv + nf:
        raise ParseError(f"{path}: truncated file")
    try:
        verts = [[float(x) for x in body[i][:3]] for i in range(nv)]
    except ValueError as exc:
        raise ParseError(f"{path}: bad vertex line") from exc
    faces = []
    for i in range(nv, nv + nf):
        row = body[i]
        try:
            cnt = int(row[0])
            idx = [int(x) for x in row[1 : 1 + cnt]]
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}: bad face line") from exc
        if cnt != 3 or len(idx) != 3:
            raise ParseError(f"{path}: only triangular faces are supported")
        faces.append(idx)
    return verts, faces


def _parse_ply(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing ply header")
    elements = []  # (name, count, properties)
    i = 1
    fmt_seen = False
    while i < len(lines):
        tok = lines[i].split()
        i += 1
        if not tok or tok[0] == "comment":
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise ParseError(f"{path}: only ascii PLY is supported")
            fmt_seen = True
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element")
            elements[-1][2].append(tok[1:])
        elif tok[0] == "end_header":
            break
    else:
        raise ParseError(f"{path}: unterminated header")
    if not fmt_seen:
        raise ParseError(f"{path}: missing format line")

    data = [ln.split() for ln in lines[i:] if ln.strip()]
    verts, faces = [], []
    cursor = 0
    for name, count, props in elements:
        if cursor + count > len(data):
            raise ParseError(f"{path}: truncated element {name}")
        rows = data[cursor : cursor + count]
        cursor += count
        if name == "vertex":
            names = [p[-1] for p in props]
            try:
                ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
            except ValueError as exc:
                raise ParseError(f"{path}: vertex element lacks x/y/z") from exc
            try:
                verts = [[float(r[ix]), float(r[iy]), float(r[iz])] for r in rows]
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: bad vertex line") from exc
        elif name == "face":
            for r in rows:
                try:
                    cnt = int(r[0])
                    idx = [int(x) for x in r[1 : 1 + cnt]]
                except (ValueError, IndexError) as exc:
                    raise ParseError(f"{path}: bad face line") from exc
                if cnt != 3:
                    raise ParseError(f"{path}: only triangular faces are supported")
                faces.append(idx)
    return verts, faces


def _parse_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            tok = line.split("#", 1)[0].split()
            if not tok:
                continue
            if tok[0] == "v":
                try:
                    verts.append([float(x) for x in tok[1:4]])
                except ValueError as exc:
                    raise ParseError(f"{path}:{ln}: bad vertex") from exc
            elif tok[0] == "f":
                refs = tok[1:]
                if len(refs) != 3:
                    raise ParseError(
                        f"{path}:{ln}: only triangular faces are supported"
                    )
                idx = []
                for ref in refs:
                    try:
                        k = int(ref.split("/", 1)[0])
                    except ValueError as exc:
                        raise ParseError(f"{path}:{ln}: bad face index") from exc
                    idx.append(k - 1 if k > 0 else len(verts) + k)
                faces.append(idx)
    return verts, faces


_PARSERS = {"off": _parse_off, "ply": _parse_ply, "obj": _parse_obj}


def load_mesh(path, format=None):
    """Load and validate a closed genus-0 mesh from OFF, ascii-PLY or OBJ.

    Orientation is normalized to outward (positive signed volume).
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt not in _PARSERS:
        raise ParseError(f"unsupported format {fmt!r}")
    verts, faces = _PARSERS[fmt](path)
    try:
        mesh = TriangleMesh(verts, faces)
    except TopologyError as exc:
        raise TopologyError(f"{path}: {exc}") from exc
    validate_topology(mesh)
    if signed_volume(mesh) < 0:
        mesh = TriangleMesh(mesh.vertices, mesh.faces[:, [0, 2, 1]])
    return mesh


def save_off(mesh, path):
    """Write canonical ASCII OFF; numbers use shortest round-trip repr."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")


def save_ply_colored(mesh, colors, path):
    """Write ascii PLY with per-vertex uchar RGB colors (n, 3) in 0..255."""
    colors = np.asarray(colors, dtype=np.int64)
    if colors.shape != (mesh.n_vertices, 3):
        raise InvalidParameter("colors must be (n_vertices, 3)")
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write(
            "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        )
        fh.write(f"element face {mesh.n_faces}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for (x, y, z), (r, g, b) in zip(mesh.vertices, colors):
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r} {r} {g} {b}\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")


# ---------------------------------------------------------------------------
# quality improvement chain

def laplacian_smooth(mesh, iterations, step):
    """Uniform Laplacian smoothing: v += step * (one-ring mean - v)."""
    if not 0.0 < step <= 1.0:
        raise InvalidParameter(f"step must be in (0, 1], got {step}")
    if iterations < 1:
        raise InvalidParameter("iterations must be >= 1")
    avg = mesh.averaging_matrix
    v = mesh.vertices.copy()
    for _ in range(iterations):
        v += step * (avg @ v - v)
    return mesh.with_vertices(v)


def refine(mesh):
    """One pass of 1-to-4 midpoint subdivision: V' = V + E, F' = 4F."""
    v = mesh.vertices
    f = mesh.faces
    edges = mesh.edges
    mid_index = {}
    for k, (a, b) in enumerate(edges):
        mid_index[(int(a), int(b))] = mesh.n_vertices + k
    midpoints = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])

    def mid(a, b):
        return mid_index[(a, b) if a < b else (b, a)]

    new_faces = np.empty((4 * len(f), 3), dtype=np.int64)
    for i, (a, b, c) in enumerate(f):
        a, b, c = int(a), int(b), int(c)
        mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
        new_faces[4 * i + 0] = (a, mab, mca)
        new_faces[4 * i + 1] = (b, mbc, mab)
        new_faces[4 * i + 2] = (c, mca, mbc)
        new_faces[4 * i + 3] = (mab, mbc, mca)
    return TriangleMesh(np.vstack([v, midpoints]), new_faces)


def _face_area_normal(p0, p1, p2):
    c = np.cross(p1 - p0, p2 - p0)
    return 0.5 * np.linalg.norm(c), c


def simplify(mesh, target_vertex_count):
    """Shortest-edge-first edge collapse to midpoint, with link-condition,
    area and normal-flip guards. Output stays closed genus-0."""
    n = mesh.n_vertices
    if target_vertex_count < 4:
        raise InvalidParameter("target_vertex_count must be >= 4")
    if target_vertex_count > n:
        raise InvalidParameter("target exceeds current vertex count")
    if target_vertex_count == n:
        return mesh

    pos = mesh.vertices.copy()
    faces = [list(map(int, f)) for f in mesh.faces]
    alive_f = [True] * len(faces)
    v_faces = [set() for _ in range(n)]
    neighbors = [set() for _ in range(n)]
    for fid, (a, b, c) in enumerate(faces):
        v_faces[a].add(fid)
        v_faces[b].add(fid)
        v_faces[c].add(fid)
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))
    alive_v = [True] * n
    version = [0] * n
    extent = float(np.ptp(pos, axis=0).max())
    area_eps = 1e-12 * extent * extent

    heap = []

    def push(u, w):
        d = float(np.linalg.norm(pos[u] - pos[w]))
        a, b = (u, w) if u < w else (w, u)
        heapq.heappush(heap, (d, a, b, version[a], version[b]))

    for a, b in mesh.edges:
        push(int(a), int(b))

    alive_count = n
    while alive_count > target_vertex_count and heap:
        _, u, v, ver_u, ver_v = heapq.heappop(heap)
        if not (alive_v[u] and alive_v[v]):
            continue
        if version[u] != ver_u or version[v] != ver_v:
            continue
        if v not in neighbors[u]:
            continue
        shared = v_faces[u] & v_faces[v]
        if len(shared) != 2:
            continue
        opposite = set()
        for fid in shared:
            opposite.update(faces[fid])
        opposite -= {u, v}
        if (neighbors[u] & neighbors[v]) != opposite:
            continue  # link condition
        mid = 0.5 * (pos[u] + pos[v])
        affected = (v_faces[u] | v_faces[v]) - shared
        ok = True
        for fid in affected:
            tri = faces[fid]
            old = [pos[k] for k in tri]
            new = [mid if k in (u, v) else pos[k] for k in tri]
            old_area, old_n = _face_area_normal(*old)
            new_area, new_n = _face_area_normal(*new)
            if new_area <= area_eps or np.dot(old_n, new_n) <= 0.0:
                ok = False
                break
        if not ok:
            continue

        # commit: merge v into u at the midpoint
        pos[u] = mid
        for fid in shared:
            alive_f[fid] = False
            for k in faces[fid]:
                v_faces[k].discard(fid)
        for fid in list(v_faces[v]):
            faces[fid] = [u if k == v else k for k in faces[fid]]
            v_faces[u].add(fid)
        v_faces[v].clear()
        for w in list(neighbors[v]):
            neighbors[w].discard(v)
            if w != u:
                neighbors[w].add(u)
                neighbors[u].add(w)
        neighbors[u].discard(v)
        neighbors[v].clear()
        alive_v[v] = False
        alive_count -= 1
        version[u] += 1
        version[v] += 1
        for w in neighbors[u]:
            push(u, w)

    if alive_count > target_vertex_count:
        raise SimplificationError(
            f"no legal collapse left at {alive_count} vertices "
            f"(target {target_vertex_count})"
        )

    remap = -np.ones(n, dtype=np.int64)
    keep = [i for i in range(n) if alive_v[i]]
    remap[keep] = np.arange(len(keep))
    new_v = pos[keep]
    new_f = np.array(
        [[remap[k] for k in faces[fid]] for fid in range(len(faces)) if alive_f[fid]],
        dtype=np.int64,
    )
    out = TriangleMesh(new_v, new_f)
    try:
        validate_topology(out)
    except TopologyError as exc:
        raise SimplificationError(f"collapse broke topology: {exc}") from exc
    return out


def improve_mesh(mesh, smooth_iterations=10, smooth_step=0.5,
                 simplify_target=2000, refine_passes=1):
    """Quality-improvement chain: smooth, simplify, refine.

    Steps with a falsy parameter are skipped (e.g. simplify_target=None, or a
    target at or above the current count).
    """
    out = mesh
    if smooth_iterations:
        out = laplacian_smooth(out, smooth_iterations, smooth_step)
    if simplify_target and simplify_target < out.n_vertices:
        out = simplify(out, simplify_target)
    for _ in range(refine_passes):
        out = refine(out)
    return out
