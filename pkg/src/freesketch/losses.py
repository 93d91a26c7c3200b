"""Perceptual, assignment-guidance and Hausdorff losses.

``L_percept  = L_geometric + beta_s * L_semantic``
``L_guidance = L_JV + beta_h * sum_k hausdorff(G_k, P_k)``
``L_total    = L_percept + L_guidance``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from .backends import Embedding, default_backend
from .errors import InputError, NumericError
from .strokes import Sketch

SNAPSHOT_COUNT = 8


@dataclass(frozen=True)
class LossWeights:
    beta_s: float = 0.1
    beta_h: float = 0.8

    def __post_init__(self):
        if self.beta_s < 0 or self.beta_h < 0:
            raise InputError("loss weights must be non-negative")


@dataclass(eq=False)
class GuidanceTrace:
    """Sketches captured during one optimization run, oldest first."""

    snapshots: list
    step_indices: list

    def __post_init__(self):
        self.snapshots = list(self.snapshots)
        self.step_indices = [int(s) for s in self.step_indices]
        if not self.snapshots:
            raise InputError("a trace needs at least one snapshot")
        if len(self.snapshots) != len(self.step_indices):
            raise InputError("one step index per snapshot")
        if any(b <= a for a, b in zip(self.step_indices, self.step_indices[1:])):
            raise InputError("step indices must be strictly increasing")
        if len({len(s) for s in self.snapshots}) != 1:
            raise InputError("all snapshots must have the same stroke count")

    def __len__(self):
        return len(self.snapshots)

    def __eq__(self, other):
        if not isinstance(other, GuidanceTrace):
            return NotImplemented
        return self.step_indices == other.step_indices and self.snapshots == other.snapshots

    def stack(self) -> np.ndarray:
        """``(K, n, 8)`` stroke vectors."""
        return np.stack([s.control_points.reshape(len(s), 8) for s in self.snapshots])


def as_stroke_stack(trace) -> np.ndarray:
    """Accept a trace, a list of sketches or a ``(K, n, 8)`` array."""
    if isinstance(trace, GuidanceTrace):
        return trace.stack()
    if isinstance(trace, Sketch):
        return trace.control_points.reshape(1, len(trace), 8)
    if isinstance(trace, (list, tuple)) and trace and isinstance(trace[0], Sketch):
        return np.stack([s.control_points.reshape(len(s), 8) for s in trace])
    arr = np.asarray(trace, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[2] != 8:
        raise InputError(f"expected (K, n, 8) stroke vectors, got shape {arr.shape}")
    return arr


# -- perceptual -----------------------------------------------------------------

def _is_unit(v, tol=1e-4):
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


def semantic_loss(e_c, e_s) -> float:
    """``1 - cos`` for unit vectors; 1 when either side is the zero embedding."""
    e_c, e_s = np.asarray(e_c, float).ravel(), np.asarray(e_s, float).ravel()
    if e_c.shape != e_s.shape:
        raise InputError("embeddings differ in size")
    if not np.any(e_c) or not np.any(e_s):
        return 1.0
    if not (_is_unit(e_c) and _is_unit(e_s)):
        raise InputError("semantic_loss expects unit-norm embeddings")
    return float(np.clip(1.0 - np.dot(e_c, e_s), 0.0, 2.0))


def geometric_loss(feats_c, feats_s) -> float:
    """Sum over layers of the squared L2 distance between feature maps."""
    if len(feats_c) != len(feats_s):
        raise InputError("feature lists differ in length")
    total = 0.0
    for a, b in zip(feats_c, feats_s):
        a, b = np.asarray(a, float), np.asarray(b, float)
        if a.shape != b.shape:
            raise InputError(f"layer shapes differ: {a.shape} vs {b.shape}")
        total += float(np.sum((a - b) ** 2))
    return total


class PerceptualTerms(NamedTuple):
    geometric: float
    semantic: float
    total: float


def _contour_array(contour):
    pixels = getattr(contour, "pixels", contour)
    return np.asarray(pixels, dtype=float)


def perceptual_terms(contour, raster, backend=None, weights: LossWeights = LossWeights(),
                     with_grad: bool = False, contour_embedding: Embedding | None = None):
    """Perceptual loss terms, optionally with the gradient w.r.t. ``raster``.

    ``contour_embedding`` lets callers embed the fixed target once.
    Returns ``terms`` or ``(terms, grad)``.
    """
    backend = backend or default_backend()
    raster = np.asarray(raster, dtype=float)
    e_c = contour_embedding or backend.embed(_contour_array(contour))
    e_s = backend.embed(raster)
    geo = geometric_loss(e_c.layers, e_s.layers)
    sem = semantic_loss(e_c.global_, e_s.global_)
    terms = PerceptualTerms(geo, sem, geo + weights.beta_s * sem)
    if not with_grad:
        return terms
    if not backend.differentiable:
        raise InputError(f"{backend!r} cannot provide gradients")
    d_layers = [2.0 * (s - c) for c, s in zip(e_c.layers, e_s.layers)]
    if np.any(e_c.global_) and np.any(e_s.global_):
        d_global = -weights.beta_s * e_c.global_
    else:
        d_global = None
    return terms, backend.vjp(raster, d_global, d_layers)


def perceptual_loss(contour, raster, backend=None, weights: LossWeights = LossWeights()) -> float:
    return perceptual_terms(contour, raster, backend, weights).total


# -- assignment -------------------------------------------------------------------

def linear_assignment(cost):
    """Exact minimum-cost perfect matching of a square cost matrix.

    Shortest augmenting paths with row/column potentials (the
    Jonker-Volgenant / Kuhn-Munkres family), O(n^3). Returns
    ``(assignment, total)`` where row ``i`` is matched to column
    ``assignment[i]``.
    """
    a = np.asarray(cost, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"cost matrix must be square, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("cost matrix must be finite")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    # 1-based columns; column 0 is the virtual root of each search
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # match[j] = row (1-based) in column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assignment = np.empty(n, dtype=np.int64)
    assignment[match[1:] - 1] = np.arange(n)
    return assignment, float(a[np.arange(n), assignment].sum())


def l1_cost_matrix(g, p) -> np.ndarray:
    return cdist(np.asarray(g, float), np.asarray(p, float), metric="cityblock")


def jv_assignments(trace_g, trace_p):
    """Assignment guidance loss and the optimal permutation per snapshot.

    ``assignments[k][i]`` is the process stroke matched to guidance stroke i.
    """
    g, p = as_stroke_stack(trace_g), as_stroke_stack(trace_p)
    if g.shape != p.shape:
        raise InputError(f"trace shapes differ: {g.shape} vs {p.shape}")
    total, perms = 0.0, []
    for gk, pk in zip(g, p):
        perm, cost = linear_assignment(l1_cost_matrix(gk, pk))
        total += cost
        perms.append(perm)
    return total, perms


def jv_guidance_loss(trace_g, trace_p) -> float:
    return jv_assignments(trace_g, trace_p)[0]


# -- Hausdorff ----------------------------------------------------------------------

@dataclass(frozen=True)
class HausdorffResult:
    """Distance plus the pair ``(g_index, p_index)`` that realises it."""

    distance: float
    pair: tuple

    def __float__(self):
        return self.distance


def directed_hausdorff(a, b) -> float:
    """``max_a min_b ||a - b||``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if len(a) == 0 or len(b) == 0:
        raise InputError("Hausdorff distance needs non-empty sets")
    return float(cdist(a, b).min(1).max())


def hausdorff(g, p) -> HausdorffResult:
    """Symmetric Hausdorff distance between two sets of vectors.

    Ties resolve to the lowest index; the forward side (from ``g``) wins a
    tie between the two directions.
    """
    g, p = np.asarray(g, float), np.asarray(p, float)
    if g.ndim == 1:
        g = g[None]
    if p.ndim == 1:
        p = p[None]
    if len(g) == 0 or len(p) == 0:
        raise InputError("Hausdorff distance needs non-empty sets")
    d = cdist(g, p)
    near_p = d.argmin(1)  # nearest p for each g
    near_g = d.argmin(0)  # nearest g for each p
    fwd = d[np.arange(len(g)), near_p]
    rev = d[near_g, np.arange(len(p))]
    i, j = int(fwd.argmax()), int(rev.argmax())
    if fwd[i] >= rev[j]:
        return HausdorffResult(float(fwd[i]), (i, int(near_p[i])))
    return HausdorffResult(float(rev[j]), (int(near_g[j]), j))


# -- guidance / total -------------------------------------------------------------

def guidance_loss(trace_g, trace_p, weights: LossWeights = LossWeights()) -> float:
    return guidance_loss_grad(trace_g, trace_p, weights)[0]


def guidance_loss_grad(trace_g, trace_p, weights: LossWeights = LossWeights()):
    """Guidance loss and its subgradient w.r.t. the process strokes.

    The guidance trace is treated as constant. The assignment term
    contributes ``sign(p - g)`` on matched pairs; each Hausdorff term
    contributes the unit vector of its realising pair.
    """
    g, p = as_stroke_stack(trace_g), as_stroke_stack(trace_p)
    jv, perms = jv_assignments(g, p)
    grad = np.zeros_like(p)
    haus_total = 0.0
    for k, perm in enumerate(perms):
        grad[k, perm] += np.sign(p[k, perm] - g[k])
        h = hausdorff(g[k], p[k])
        haus_total += h.distance
        if h.distance > 0:
            gi, pj = h.pair
            grad[k, pj] += weights.beta_h * (p[k, pj] - g[k, gi]) / h.distance
    return jv + weights.beta_h * haus_total, grad


def total_loss(percept: float, guidance: float) -> float:
    if not (math.isfinite(percept) and math.isfinite(guidance)):
        raise NumericError(f"non-finite loss component: percept={percept}, guidance={guidance}")
    return percept + guidance
