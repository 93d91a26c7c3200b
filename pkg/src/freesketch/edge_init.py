"""Edge-constraint stroke initialization.

Seeds go on the traced boundary of every connected contour feature (four per
feature), are thinned evenly when fewer strokes are requested, and surplus
seeds are picked greedily from a saliency map.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .contour.image import CANVAS, ContourImage
from .errors import InputError
from .strokes import DEFAULT_WIDTH, Sketch, Stroke

SEEDS_PER_FEATURE = 4
INIT_RADIUS = 0.05
SALIENCY_SIGMA = 3.0
SUPPRESS_RADIUS = 8.0
MIN_SEGMENT_PIXELS = 4

_NEIGHBOURS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(eq=False)
class FeatureSegment:
    """One traced contour feature: pixels as ``(row, col)`` in walk order."""

    pixels: np.ndarray
    closed: bool

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if len(self.pixels) < MIN_SEGMENT_PIXELS:
            raise InputError("a feature segment needs at least 4 pixels")
        steps = np.abs(np.diff(self.pixels, axis=0)).max(1)
        if np.any(steps != 1):
            raise InputError("segment pixels must be 8-connected and distinct in sequence")

    @property
    def cumulative(self) -> np.ndarray:
        """Arc length at each pixel, starting from 0."""
        steps = np.linalg.norm(np.diff(self.pixels, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def length(self) -> float:
        total = float(self.cumulative[-1])
        if self.closed:
            total += float(np.linalg.norm(self.pixels[-1] - self.pixels[0]))
        return total

    def point_at(self, fraction: float) -> np.ndarray:
        """The traced pixel whose arc length is nearest ``fraction * length``."""
        target = fraction * self.length
        i = int(np.argmin(np.abs(self.cumulative - target)))
        return self.pixels[i]

    def seed_fractions(self, k: int):
        if k <= 0:
            return []
        if self.closed:
            return [i / k for i in range(k)]
        if k == 1:
            return [0.5]
        return [i / (k - 1) for i in range(k)]


def _pixel_graph(mask):
    """Adjacency of ink pixels with redundant diagonal links removed.

    A diagonal step is dropped when the two pixels already share a 4-neighbour
    in the mask, which turns a 1-px staircase into a simple chain.
    """
    coords = [tuple(p) for p in np.argwhere(mask)]
    present = set(coords)
    adj = {p: [] for p in coords}
    for r, c in coords:
        for dr, dc in _NEIGHBOURS:
            q = (r + dr, c + dc)
            if q not in present:
                continue
            if dr and dc and ((r + dr, c) in present or (r, c + dc) in present):
                continue
            adj[(r, c)].append(q)
    return adj


def _trace(adj):
    """Order one component's pixels into a walk; returns (pixels, closed)."""
    nodes = sorted(adj)
    degrees = {p: len(adj[p]) for p in nodes}
    if all(d == 2 for d in degrees.values()):
        start = nodes[0]
        walk, prev, cur = [start], None, start
        while True:
            nxt = [q for q in sorted(adj[cur]) if q != prev]
            if not nxt or nxt[0] == start:
                break
            prev, cur = cur, nxt[0]
            walk.append(cur)
        if len(walk) == len(nodes):
            return walk, True
    # open path or branched feature: depth-first walk from an end pixel,
    # stepping back over visited pixels so consecutive entries stay adjacent
    ends = [p for p in nodes if degrees[p] <= 1]
    start = ends[0] if ends else nodes[0]
    walk, seen, stack = [start], {start}, [start]
    while stack:
        cur = stack[-1]
        nxt = next((q for q in sorted(adj[cur]) if q not in seen), None)
        if nxt is None:
            stack.pop()
            if stack and len(seen) < len(nodes):
                walk.append(stack[-1])
            continue
        seen.add(nxt)
        stack.append(nxt)
        walk.append(nxt)
    return walk, False


def segment_features(image: ContourImage) -> list[FeatureSegment]:
    """8-connected ink components traced into polylines, longest first."""
    if image.ink_count == 0:
        raise InputError("blank contour image")
    labels, count = ndimage.label(image.pixels, structure=np.ones((3, 3), bool))
    segments = []
    for lab in range(1, count + 1):
        mask = labels == lab
        if mask.sum() < MIN_SEGMENT_PIXELS:
            continue
        walk, closed = _trace(_pixel_graph(mask))
        segments.append(FeatureSegment(np.array(walk), closed))
    if not segments:
        raise InputError("no contour feature has at least 4 pixels")
    segments.sort(key=lambda s: (-s.length, tuple(s.pixels[0])))
    return segments


def saliency_map(image: ContourImage, sigma: float = SALIENCY_SIGMA) -> np.ndarray:
    """Gaussian-blurred ink density scaled to a maximum of 1."""
    if image.ink_count == 0:
        raise InputError("blank contour image")
    blurred = ndimage.gaussian_filter(image.as_float(), sigma, mode="constant")
    return blurred / blurred.max()


def _discard_evenly(segments, n):
    counts = [SEEDS_PER_FEATURE] * len(segments)
    lengths = [s.length for s in segments]
    while sum(counts) > n:
        top = max(counts)
        if top == 1:
            break
        # most-loaded segment first; among those the shortest, then the last
        i = min((j for j in range(len(counts)) if counts[j] == top),
                key=lambda j: (lengths[j], -j))
        counts[i] -= 1
    dropped = []
    while sum(counts) > n:
        # every feature is down to one seed: sacrifice the shortest ones
        i = min((j for j in range(len(counts)) if counts[j]), key=lambda j: (lengths[j], -j))
        counts[i] = 0
        dropped.append(i)
    return counts, dropped


def greedy_saliency_points(saliency, count: int, radius: float = SUPPRESS_RADIUS):
    """Pick ``count`` maxima, blanking a disk of ``radius`` px after each."""
    sal = np.array(saliency, dtype=float)
    rows, cols = np.indices(sal.shape)
    picks = []
    for _ in range(count):
        r, c = np.unravel_index(int(np.argmax(sal)), sal.shape)
        if not np.isfinite(sal[r, c]):
            raise InputError("saliency map exhausted before placing all seeds")
        picks.append((r, c))
        sal[(rows - r) ** 2 + (cols - c) ** 2 <= radius ** 2] = -np.inf
    return picks


@dataclass
class SeedPlacement:
    """Seeds as ``(row, col)`` pixels plus where each came from.

    ``owner[i]`` is the segment index for edge seeds and ``-1`` for greedy
    saliency seeds. ``dropped`` lists segments that received no seed.
    """

    pixels: np.ndarray
    owner: np.ndarray
    dropped: list

    def __len__(self):
        return len(self.pixels)

    def normalized(self) -> np.ndarray:
        """Seed positions as normalised ``(x, y)`` at pixel centres."""
        return (self.pixels[:, ::-1] + 0.5) / CANVAS


def place_seed_points(segments, saliency, n: int) -> SeedPlacement:
    """Distribute ``n`` stroke seeds over the features.

    ``n == 4F`` keeps four seeds per feature. Fewer strokes remove seeds one
    at a time from the most-loaded feature (shorter first on ties) and
    re-space the remaining seeds evenly along it. More strokes add greedy
    saliency maxima. When ``n`` is below the feature count the shortest
    features lose coverage and a warning names them.
    """
    if n < 1:
        raise InputError("need at least one seed")
    if not segments:
        raise InputError("need at least one segment")
    total = SEEDS_PER_FEATURE * len(segments)
    counts, dropped = _discard_evenly(segments, n) if n < total else (
        [SEEDS_PER_FEATURE] * len(segments), [])
    if dropped:
        warnings.warn(f"features {sorted(dropped)} lost coverage: {n} strokes for "
                      f"{len(segments)} features", UserWarning, stacklevel=2)
    pixels, owner = [], []
    for i, (seg, k) in enumerate(zip(segments, counts)):
        for f in seg.seed_fractions(k):
            pixels.append(seg.point_at(f))
            owner.append(i)
    if n > total:
        for p in greedy_saliency_points(saliency, n - total):
            pixels.append(p)
            owner.append(-1)
    return SeedPlacement(np.array(pixels, dtype=np.int64).reshape(-1, 2),
                         np.array(owner, dtype=np.int64), sorted(dropped))


def init_strokes(seeds, rng_seed: int = 0, width: float = DEFAULT_WIDTH,
                 radius: float = INIT_RADIUS) -> Sketch:
    """One stroke per seed; the other three control points fall in a disk.

    ``seeds`` are normalised ``(x, y)`` points or a :class:`SeedPlacement`.
    Points are drawn uniformly by area within ``radius`` of the seed.
    """
    if isinstance(seeds, SeedPlacement):
        seeds = seeds.normalized()
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    if len(seeds) == 0:
        raise InputError("need at least one seed")
    rng = np.random.default_rng(rng_seed)
    strokes = []
    for p in seeds:
        r = radius * np.sqrt(rng.uniform(size=3))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=3)
        others = p + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        strokes.append(Stroke(np.vstack([p, others]), width))
    return Sketch(strokes)


def initialize(image: ContourImage, n: int, rng_seed: int = 0,
               width: float = DEFAULT_WIDTH) -> tuple[Sketch, SeedPlacement]:
    """Segment, place seeds and build the initial sketch in one call."""
    placement = place_seed_points(segment_features(image), saliency_map(image), n)
    return init_strokes(placement, rng_seed, width), placement


def seed_overlay(image: ContourImage, placement: SeedPlacement) -> Image.Image:
    """Contour in black on white with a red 3x3 mark on every seed."""
    rgb = np.full(image.pixels.shape + (3,), 255, dtype=np.uint8)
    rgb[image.pixels] = 0
    h, w = image.pixels.shape
    for r, c in placement.pixels:
        rgb[max(r - 1, 0):min(r + 2, h), max(c - 1, 0):min(c + 2, w)] = (255, 0, 0)
    return Image.fromarray(rgb, mode="RGB")
