"""Mesh feature-line extraction with depth-buffer hidden-line removal.

Candidate edges are silhouettes, open boundaries and sharp creases. Each is
sampled and every sample is tested against a z-buffer rendered from the same
view; runs of visible samples become polylines in view-plane coordinates
(x to the right, y up).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter

from ..errors import InputError
from .mesh import TriangleMesh
from .views import Viewpoint


@dataclass(frozen=True)
class HLRConfig:
    depth_resolution: int = 1024
    samples_per_edge: int = 64
    depth_bias: float = 1e-4  # x scene diagonal
    sharp_angle_deg: float = 30.0
    facing_tolerance: float = 1e-9


def edge_adjacency(mesh: TriangleMesh):
    """Unique undirected edges and, per edge, the list of incident faces."""
    tris = mesh.triangles
    half = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    face_of = np.tile(np.arange(len(tris)), 3)
    half.sort(axis=1)
    edges, inverse = np.unique(half, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    faces = [[] for _ in range(len(edges))]
    for e, f in zip(inverse.tolist(), face_of.tolist()):
        faces[e].append(f)
    return edges, faces


def classify_edges(mesh: TriangleMesh, view: Viewpoint, config: HLRConfig = HLRConfig()):
    """Return ``(edges, kinds)`` for candidate edges.

    ``kinds`` holds a subset of {"silhouette", "boundary", "sharp"} per edge.
    A face is front-facing iff ``normal . direction > tol``.
    """
    edges, faces = edge_adjacency(mesh)
    normals = mesh.normals
    front = normals @ view.direction > config.facing_tolerance
    cos_sharp = np.cos(np.radians(config.sharp_angle_deg))
    out_edges, kinds = [], []
    for e, fs in zip(edges, faces):
        k = set()
        if len(fs) == 1:
            k.add("boundary")
        elif len(fs) == 2:
            a, b = fs
            if front[a] != front[b]:
                k.add("silhouette")
            if np.dot(normals[a], normals[b]) < cos_sharp:
                k.add("sharp")
        else:
            # non-manifold junctions are always drawn
            k.add("sharp")
        if k:
            out_edges.append(e)
            kinds.append(frozenset(k))
    return np.array(out_edges, dtype=np.int64).reshape(-1, 2), kinds


def project(points, view: Viewpoint):
    """Map 3D points to (x, y, depth); larger depth is nearer the camera."""
    basis = np.stack([view.right, view.up, view.direction], axis=1)
    return np.asarray(points, float) @ basis


class DepthBuffer:
    """Max-depth z-buffer over the projected mesh on a square pixel grid."""

    def __init__(self, projected, triangles, resolution):
        xy = projected[:, :2]
        lo, hi = xy.min(0), xy.max(0)
        extent = float(max(hi - lo))
        pad = 2.0 * extent / resolution
        self.origin = lo - pad
        self.scale = (resolution - 1) / (extent + 2 * pad)
        self.resolution = resolution
        self.depth = np.full((resolution, resolution), -np.inf)
        self._rasterize(self.to_pixels(xy), projected[:, 2], triangles)
        # A sample on an edge is compared with its 3x3 neighbourhood so the
        # faces it bounds never hide it through sub-pixel depth slope.
        self.visible_floor = minimum_filter(self.depth, size=3, mode="constant", cval=-np.inf)

    def to_pixels(self, xy):
        return (np.asarray(xy) - self.origin) * self.scale

    def _rasterize(self, pix, z, triangles):
        res = self.resolution
        depth = self.depth
        for tri in triangles:
            p = pix[tri]
            x0, y0 = np.floor(p.min(0)).astype(int)
            x1, y1 = np.ceil(p.max(0)).astype(int)
            x0, y0 = max(x0, 0), max(y0, 0)
            x1, y1 = min(x1, res - 1), min(y1, res - 1)
            if x1 < x0 or y1 < y0:
                continue
            (ax, ay), (bx, by), (cx, cy) = p
            det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
            if abs(det) < 1e-12:
                continue  # edge-on triangle covers no area
            xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
            w1 = ((xs - ax) * (cy - ay) - (cx - ax) * (ys - ay)) / det
            w2 = ((bx - ax) * (ys - ay) - (xs - ax) * (by - ay)) / det
            w0 = 1.0 - w1 - w2
            eps = -1e-9
            inside = (w0 >= eps) & (w1 >= eps) & (w2 >= eps)
            if not inside.any():
                continue
            zz = w0 * z[tri[0]] + w1 * z[tri[1]] + w2 * z[tri[2]]
            region = depth[y0:y1 + 1, x0:x1 + 1]
            np.maximum(region, np.where(inside, zz, -np.inf), out=region)

    def visible(self, xy, z, bias):
        pix = np.rint(self.to_pixels(xy)).astype(int)
        pix = np.clip(pix, 0, self.resolution - 1)
        floor = self.visible_floor[pix[:, 1], pix[:, 0]]
        return z >= floor - bias


def extract_contours(mesh: TriangleMesh, view: Viewpoint, config: HLRConfig = HLRConfig()):
    """Visible feature lines of ``mesh`` seen from ``view``.

    Returns a list of ``(k, 2)`` float arrays in view-plane units. Runs that
    share endpoints are chained, so a closed silhouette comes back as one
    loop whose first and last points coincide.
    """
    edges, _ = classify_edges(mesh, view, config)
    if len(edges) == 0:
        raise InputError(f"no candidate edges from view {view.name}; mesh is not a valid solid")
    projected = project(mesh.vertices, view)
    zbuf = DepthBuffer(projected, mesh.triangles, config.depth_resolution)
    bias = config.depth_bias * mesh.diagonal
    min_len = 1e-9 * max(mesh.diagonal, 1e-300)

    t = np.linspace(0.0, 1.0, config.samples_per_edge)[:, None]
    runs = []
    for a, b in edges:
        pa, pb = projected[a], projected[b]
        if np.linalg.norm(pb[:2] - pa[:2]) <= min_len:
            continue  # edge seen end-on
        samples = pa + t * (pb - pa)
        samples[-1] = pb
        vis = zbuf.visible(samples[:, :2], samples[:, 2], bias)
        runs.extend(_visible_runs(samples[:, :2], vis))
    return chain_polylines(runs, tol=1e-9 * mesh.diagonal)


def _visible_runs(points, visible):
    out = []
    start = None
    for i, v in enumerate(list(visible) + [False]):
        if v and start is None:
            start = i
        elif not v and start is not None:
            if i - start >= 2:
                out.append(points[start:i])
            start = None
    return out


def chain_polylines(polylines, tol=1e-9):
    """Join polylines end-to-end wherever exactly two of them meet at a point.

    Endpoints are matched after snapping to a grid of size ``tol``. Joining
    stops at junctions (three or more ends at a point) so the topology of the
    line drawing is preserved.
    """
    polylines = [np.asarray(p, float) for p in polylines if len(p) >= 2]
    if not polylines:
        return []
    q = max(tol, 1e-15)

    def key(pt):
        return tuple(np.round(pt / q).astype(np.int64).tolist())

    ends = {}
    for i, p in enumerate(polylines):
        for side, pt in ((0, p[0]), (1, p[-1])):
            ends.setdefault(key(pt), []).append((i, side))

    used = [False] * len(polylines)
    out = []

    def extend(chain, tail_key, start_key):
        # walk forward from tail_key while the joint is a simple degree-2 pass
        while True:
            if tail_key == start_key:
                return chain
            members = ends.get(tail_key, [])
            if len(members) != 2:
                return chain
            nxt = [(i, s) for i, s in members if not used[i]]
            if not nxt:
                return chain
            i, side = nxt[0]
            used[i] = True
            seg = polylines[i] if side == 0 else polylines[i][::-1]
            chain.append(seg[1:])
            tail_key = key(seg[-1])

    for i, p in enumerate(polylines):
        if used[i]:
            continue
        used[i] = True
        head_key, tail_key = key(p[0]), key(p[-1])
        forward = extend([p], tail_key, head_key)
        line = np.concatenate(forward)
        if key(line[-1]) != head_key:
            back = extend([line[::-1]], head_key, key(line[-1]))
            line = np.concatenate(back)[::-1]
        out.append(line)
    return out
