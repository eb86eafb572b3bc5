"""Structured polar triangulations of star-shaped domains and a plain-text mesh format.

File format, one record per line, 0-based indices::

    v x y
    t i j k
    b i j
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshError, MeshParseError
from .geometry import Domain2D

MIN_QUALITY = 1e-3


def signed_areas(points, triangles):
    p = points[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def triangle_quality(points, triangles):
    """``4 sqrt(3) A / sum(l^2)``; 1 for equilateral, 0 for degenerate."""
    p = points[triangles]
    l2 = sum(np.sum((p[:, (i + 1) % 3] - p[:, i]) ** 2, axis=1) for i in range(3))
    return 4.0 * np.sqrt(3.0) * signed_areas(points, triangles) / l2


def circumdiameters(points, triangles):
    p = points[triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    return a * b * c / (2.0 * np.abs(signed_areas(points, triangles)))


def _boundary_cycle(edges: np.ndarray) -> np.ndarray:
    """Vertex order along the boundary; raises unless the edges form one closed cycle."""
    if len(edges) < 3:
        raise MeshError("boundary has fewer than three edges")
    nxt = {}
    for i, j in edges:
        if i in nxt:
            raise MeshError(f"boundary vertex {i} starts two edges")
        nxt[int(i)] = int(j)
    ends = set(int(j) for j in edges[:, 1])
    if ends != set(nxt):
        raise MeshError("boundary edges do not form a closed cycle")
    start = int(edges[0, 0])
    order = [start]
    v = nxt[start]
    while v != start:
        order.append(v)
        v = nxt[v]
        if len(order) > len(edges):
            break
    if len(order) != len(edges):
        raise MeshError("boundary is not a single closed cycle")
    return np.array(order)


@dataclass(frozen=True, eq=False)
class Mesh:
    points: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    domain: Domain2D | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_edges", np.asarray(self.boundary_edges, dtype=np.int64))
        self.validate()

    def validate(self):
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=0) >= len(self.points):
            raise MeshError("triangle references a missing vertex")
        bad = np.flatnonzero(self.areas <= 0.0)
        if bad.size:
            raise MeshError(f"triangle {bad[0]} has non-positive signed area")
        _boundary_cycle(self.boundary_edges)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.points, self.triangles)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @property
    def h(self) -> float:
        return float(circumdiameters(self.points, self.triangles).max())

    @property
    def boundary_vertices(self) -> np.ndarray:
        """Boundary vertices in counterclockwise cycle order."""
        return _boundary_cycle(self.boundary_edges)

    @property
    def is_boundary(self) -> np.ndarray:
        flag = np.zeros(self.n_vertices, dtype=bool)
        flag[self.boundary_edges.ravel()] = True
        return flag

    @property
    def edges(self) -> np.ndarray:
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def edge_normals(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward unit normals and lengths of the boundary edges."""
        p = self.points[self.boundary_edges]
        d = p[:, 1] - p[:, 0]
        length = np.hypot(d[:, 0], d[:, 1])
        return np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None], length


def mesh_polar(d: Domain2D, nr: int, ntheta: int) -> Mesh:
    """Polar grid: a fan around the origin plus ``nr - 1`` rings of split quads.

    Ring ``k`` sits at ``(k/nr) r(theta)``; the outer ring lies on the curve.
    """
    if nr < 2 or ntheta < 8:
        raise ValueError("mesh_polar needs nr >= 2 and ntheta >= 8")
    th = 2 * np.pi * np.arange(ntheta) / ntheta
    boundary = d.point(th)
    pts = [np.zeros((1, 2))]
    for k in range(1, nr + 1):
        pts.append(boundary * (k / nr) if k < nr else boundary)
    points = np.vstack(pts)

    def vid(k, j):
        return 1 + (k - 1) * ntheta + (j % ntheta)

    j = np.arange(ntheta)
    tris = [np.stack([np.zeros(ntheta, dtype=np.int64), vid(1, j), vid(1, j + 1)], axis=1)]
    for k in range(1, nr):
        a, b, c, dd = vid(k, j), vid(k + 1, j), vid(k + 1, j + 1), vid(k, j + 1)
        tris.append(np.stack([a, b, c], axis=1))
        tris.append(np.stack([a, c, dd], axis=1))
    triangles = np.vstack(tris)
    bedges = np.stack([vid(nr, j), vid(nr, j + 1)], axis=1)
    q = triangle_quality(points, triangles)
    if q.min() < MIN_QUALITY:
        i = int(np.argmin(q))
        raise MeshError(f"degenerate triangle {i} (quality {q[i]:.2e}, vertices {triangles[i].tolist()})")
    return Mesh(points, triangles, bedges, domain=d)


def refine(m: Mesh) -> Mesh:
    """Uniform red refinement; boundary midpoints are projected onto the curve when known."""
    V = m.n_vertices
    edges = m.edges
    index = {(int(a), int(b)): V + i for i, (a, b) in enumerate(edges)}
    mids = 0.5 * (m.points[edges[:, 0]] + m.points[edges[:, 1]])

    def mid(a, b):
        return np.array([index[(min(x, y), max(x, y))] for x, y in zip(a.tolist(), b.tolist())])

    bmid = mid(m.boundary_edges[:, 0], m.boundary_edges[:, 1])
    if m.domain is not None:
        mids[bmid - V] = m.domain.project(mids[bmid - V])
    points = np.vstack([m.points, mids])

    t = m.triangles
    ab, bc, ca = mid(t[:, 0], t[:, 1]), mid(t[:, 1], t[:, 2]), mid(t[:, 2], t[:, 0])
    triangles = np.vstack([
        np.stack([t[:, 0], ab, ca], axis=1),
        np.stack([ab, t[:, 1], bc], axis=1),
        np.stack([ca, bc, t[:, 2]], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])
    be = m.boundary_edges
    bedges = np.vstack([np.stack([be[:, 0], bmid], axis=1), np.stack([bmid, be[:, 1]], axis=1)])
    return Mesh(points, triangles, bedges, domain=m.domain)


def write_mesh(m: Mesh, path) -> None:
    lines = [f"v {x:.17g} {y:.17g}" for x, y in m.points]
    lines += [f"t {i} {j} {k}" for i, j, k in m.triangles]
    lines += [f"b {i} {j}" for i, j in m.boundary_edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, domain: Domain2D | None = None) -> Mesh:
    points, tris, bedges = [], [], []
    tri_lines = []
    nfields = {"v": 2, "t": 3, "b": 2}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        tag = tok[0]
        if tag not in nfields:
            raise MeshParseError(f"unknown record type {tag!r}", lineno)
        if len(tok) != nfields[tag] + 1:
            raise MeshParseError(f"'{tag}' record needs {nfields[tag]} fields", lineno)
        try:
            if tag == "v":
                points.append([float(tok[1]), float(tok[2])])
            else:
                idx = [int(x) for x in tok[1:]]
                if min(idx) < 0:
                    raise MeshParseError("negative vertex index", lineno)
                if tag == "t":
                    tris.append(idx)
                    tri_lines.append(lineno)
                else:
                    bedges.append(idx)
        except ValueError:
            raise MeshParseError(f"malformed number in {raw.strip()!r}", lineno) from None
    if not points or not tris:
        raise MeshParseError("mesh has no vertices or no triangles")
    points = np.array(points)
    tris = np.array(tris, dtype=np.int64)
    if tris.max() >= len(points):
        k = int(np.flatnonzero(tris.max(axis=1) >= len(points))[0])
        raise MeshParseError(f"triangle {k} references a missing vertex", tri_lines[k])
    areas = signed_areas(points, tris)
    bad = np.flatnonzero(areas <= 0.0)
    if bad.size:
        k = int(bad[0])
        raise MeshParseError(f"triangle {k} has non-positive signed area {areas[k]:.3e}", tri_lines[k])
    try:
        return Mesh(points, tris, np.array(bedges, dtype=np.int64).reshape(-1, 2), domain=domain)
    except MeshError as exc:
        raise MeshParseError(str(exc)) from None


def io_mesh(mode: str, path, mesh: Mesh | None = None, domain: Domain2D | None = None):
    if mode == "write":
        write_mesh(mesh, path)
        return mesh
    if mode == "read":
        return read_mesh(path, domain)
    raise ValueError("mode must be 'read' or 'write'")
