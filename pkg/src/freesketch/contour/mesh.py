"""Triangle mesh container and STL / OBJ readers."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..errors import InputError

log = logging.getLogger(__name__)

MIN_TRIANGLE_AREA = 1e-12
WELD_TOLERANCE = 1e-6  # relative to the bounding-box diagonal


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.vertices) < 4:
            raise InputError(f"mesh needs at least 4 vertices, got {len(self.vertices)}")
        if len(self.triangles) == 0:
            raise InputError("empty mesh")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise InputError("triangle index out of range")
        areas = triangle_areas(self.vertices, self.triangles)
        if np.any(areas <= MIN_TRIANGLE_AREA):
            raise InputError("mesh contains degenerate triangles; build it with from_soup()")
        if self.normals is None:
            self.normals = face_normals(self.vertices, self.triangles)
        else:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    def scaled(self, factor: float) -> TriangleMesh:
        return TriangleMesh(self.vertices * factor, self.triangles.copy())

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles))

    @classmethod
    def from_soup(cls, vertices, triangles, weld: bool = True) -> TriangleMesh:
        """Weld coincident vertices, drop degenerate triangles, validate.

        The number of dropped triangles is logged and kept on ``dropped``.
        """
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(vertices) == 0 or len(triangles) == 0:
            raise InputError("empty mesh")
        if weld:
            vertices, triangles = weld_vertices(vertices, triangles)
        keep = (
            (triangles[:, 0] != triangles[:, 1])
            & (triangles[:, 1] != triangles[:, 2])
            & (triangles[:, 0] != triangles[:, 2])
        )
        keep &= triangle_areas(vertices, triangles) > MIN_TRIANGLE_AREA
        dropped = int((~keep).sum())
        triangles = triangles[keep]
        if dropped:
            log.warning("dropped %d degenerate triangle(s)", dropped)
        if len(triangles) == 0:
            raise InputError("empty mesh after dropping degenerate triangles")
        # compact away vertices no triangle references
        used, inverse = np.unique(triangles, return_inverse=True)
        mesh = cls(vertices[used], inverse.reshape(-1, 3))
        mesh.dropped = dropped
        return mesh


def triangle_areas(vertices, triangles):
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def face_normals(vertices, triangles):
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.where(norm > 0, norm, 1.0)


def weld_vertices(vertices, triangles, tolerance=WELD_TOLERANCE):
    """Merge vertices closer than ``tolerance`` x bbox diagonal.

    Clusters are connected components of the "within tolerance" graph; each
    cluster is represented by its lowest-index member so output order is
    a deterministic function of input order.
    """
    diag = np.linalg.norm(vertices.max(0) - vertices.min(0))
    radius = tolerance * diag if diag > 0 else 0.0
    n = len(vertices)
    pairs = cKDTree(vertices).query_pairs(radius, output_type="ndarray") if radius > 0 else None
    if pairs is None or len(pairs) == 0:
        # exact duplicates still need merging
        _, first, labels = np.unique(vertices, axis=0, return_index=True, return_inverse=True)
        rep = first[labels.ravel()]
    else:
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
        rep = np.full(labels.max() + 1, n, dtype=np.int64)
        np.minimum.at(rep, labels, np.arange(n))
        rep = rep[labels]
    keep = np.unique(rep)
    remap = np.full(n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    return vertices[keep], remap[rep][triangles]


def load_mesh(path) -> TriangleMesh:
    """Read a binary/ASCII STL or an OBJ file into a welded, validated mesh."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"cannot read mesh file: {path}")
    suffix = path.suffix.lower()
    data = path.read_bytes()
    if suffix == ".stl":
        vertices, triangles = _parse_stl(data)
    elif suffix == ".obj":
        vertices, triangles = _parse_obj(data.decode("utf-8", errors="replace"))
    else:
        raise InputError(f"unsupported mesh format: {suffix or path.name}")
    return TriangleMesh.from_soup(vertices, triangles)


def _parse_stl(data: bytes):
    if _looks_binary_stl(data):
        count = struct.unpack_from("<I", data, 80)[0]
        record = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        facets = np.frombuffer(data, dtype=record, count=count, offset=84)
        vertices = facets["v"].reshape(-1, 3).astype(float)
    else:
        text = data.decode("ascii", errors="replace")
        coords = [line.split()[1:4] for line in text.splitlines()
                  if line.strip().startswith("vertex")]
        try:
            vertices = np.array(coords, dtype=float).reshape(-1, 3)
        except ValueError as exc:
            raise InputError(f"malformed ASCII STL: {exc}") from None
        if len(vertices) % 3:
            raise InputError("malformed ASCII STL: vertex count not a multiple of 3")
    return vertices, np.arange(len(vertices)).reshape(-1, 3)


def _looks_binary_stl(data: bytes) -> bool:
    if len(data) < 84:
        return False
    count = struct.unpack_from("<I", data, 80)[0]
    if len(data) == 84 + 50 * count:
        return True
    return not data.lstrip()[:5].lower().startswith(b"solid")


def _parse_obj(text: str):
    vertices, triangles = [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            vertices.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = []
            for token in parts[1:]:
                i = int(token.split("/")[0])
                idx.append(i - 1 if i > 0 else len(vertices) + i)
            # fan-triangulate polygons
            for k in range(1, len(idx) - 1):
                triangles.append([idx[0], idx[k], idx[k + 1]])
    if not vertices or not triangles:
        raise InputError("empty mesh")
    return np.array(vertices, dtype=float), np.array(triangles, dtype=np.int64)


def write_stl(mesh: TriangleMesh, path, binary: bool = True) -> None:
    """Write ``mesh`` as STL. Used by fixtures and round-trip tests."""
    tris = mesh.vertices[mesh.triangles]
    normals = face_normals(mesh.vertices, mesh.triangles)
    path = Path(path)
    if binary:
        record = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        out = np.zeros(len(tris), dtype=record)
        out["normal"] = normals
        out["v"] = tris
        with path.open("wb") as fh:
            fh.write(b"freesketch".ljust(80, b" "))
            fh.write(struct.pack("<I", len(tris)))
            fh.write(out.tobytes())
        return
    lines = ["solid mesh"]
    for n, tri in zip(normals, tris):
        lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        lines.append("    outer loop")
        for v in tri:
            lines.append(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid mesh")
    path.write_text("\n".join(lines) + "\n")


def unit_cube() -> TriangleMesh:
    """Axis-aligned cube of side 1 centred at the origin, outward winding."""
    v = np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)])
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # -x, +x
        (0, 4, 5, 1), (2, 3, 7, 6),  # -y, +y
        (0, 2, 6, 4), (1, 5, 7, 3),  # -z, +z
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(tris))


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh(np.array(verts) * radius, np.array(faces))
