"""Cubic Bezier strokes, a soft differentiable rasterizer and SVG export.

Coordinates are normalised to the unit square (origin top-left, y down);
the canvas maps them to pixels by multiplying by 224. Pixel ``(r, c)`` has
its centre at ``((c + 0.5) / 224, (r + 0.5) / 224)``.

Rasterization model, per stroke: sample the curve at ``S`` uniform ``t``,
take a softmin-weighted squared distance ``d2`` from each pixel centre to
those samples (weights ``softmax(-d2 / (2 * tau**2))``), and convert it to
coverage ``exp(-d2 / (2 * sigma**2))`` with ``sigma = tau + width / 2``.
Strokes are composited with ``ink = 1 - prod(1 - coverage)`` (or a hard
max). Every step is closed-form, so :func:`rasterize_backward` is the exact
chain rule.
"""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import InputError

CANVAS = 224
DEFAULT_WIDTH = 1.5
COORD_MIN, COORD_MAX = -0.25, 1.25
MAX_WIDTH = 8.0
MAX_STROKES = 64
COMPOSITES = ("soft_over", "max")

# coverage below exp(-40) is treated as exactly zero outside a stroke's window
_TAIL = math.sqrt(80.0)


@dataclass(eq=False)
class Stroke:
    points: np.ndarray
    width: float = DEFAULT_WIDTH

    def __post_init__(self):
        self.points = np.array(self.points, dtype=float).reshape(4, 2)
        self.width = float(self.width)
        if not np.all(np.isfinite(self.points)):
            raise InputError("stroke control points must be finite")
        if self.points.min() < COORD_MIN or self.points.max() > COORD_MAX:
            raise InputError(f"stroke coordinates must lie in [{COORD_MIN}, {COORD_MAX}]")
        if not 0 < self.width <= MAX_WIDTH:
            raise InputError(f"stroke width must be in (0, {MAX_WIDTH}]")

    def __eq__(self, other):
        if not isinstance(other, Stroke):
            return NotImplemented
        return self.width == other.width and np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"Stroke({self.points.tolist()}, width={self.width})"


@dataclass(eq=False)
class Sketch:
    strokes: list[Stroke]
    canvas: int = CANVAS

    def __post_init__(self):
        self.strokes = list(self.strokes)
        if not 1 <= len(self.strokes) <= MAX_STROKES:
            raise InputError(f"a sketch holds 1..{MAX_STROKES} strokes, got {len(self.strokes)}")
        if self.canvas != CANVAS:
            raise InputError(f"canvas must be {CANVAS}")

    def __len__(self):
        return len(self.strokes)

    def __eq__(self, other):
        if not isinstance(other, Sketch):
            return NotImplemented
        return self.canvas == other.canvas and self.strokes == other.strokes

    @property
    def control_points(self) -> np.ndarray:
        return np.stack([s.points for s in self.strokes])

    @property
    def widths(self) -> np.ndarray:
        return np.array([s.width for s in self.strokes])

    @classmethod
    def from_arrays(cls, points, widths=DEFAULT_WIDTH) -> Sketch:
        points = np.asarray(points, dtype=float).reshape(-1, 4, 2)
        widths = np.broadcast_to(np.asarray(widths, dtype=float), (len(points),))
        return cls([Stroke(p, w) for p, w in zip(points, widths)])

    def to_dict(self) -> dict:
        return {"canvas": self.canvas,
                "strokes": [{"points": s.points.tolist(), "width": s.width} for s in self.strokes]}

    @classmethod
    def from_dict(cls, data) -> Sketch:
        return cls([Stroke(s["points"], s["width"]) for s in data["strokes"]], data.get("canvas", CANVAS))


@dataclass(frozen=True)
class RasterParams:
    tau: float = 1.0
    samples_per_curve: int = 32
    composite: str = "soft_over"

    def __post_init__(self):
        if not 0.25 <= self.tau <= 8:
            raise InputError("tau must be in [0.25, 8]")
        if not 8 <= self.samples_per_curve <= 256:
            raise InputError("samples_per_curve must be in [8, 256]")
        if self.composite not in COMPOSITES:
            raise InputError(f"composite must be one of {COMPOSITES}")


def bernstein(t) -> np.ndarray:
    """Cubic Bernstein weights, shape ``(len(t), 4)``."""
    t = np.asarray(t, dtype=float).reshape(-1)
    s = 1.0 - t
    return np.stack([s ** 3, 3 * s * s * t, 3 * s * t * t, t ** 3], axis=1)


def bezier_point(stroke: Stroke, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    return (bernstein([t]) @ stroke.points)[0]


def sample_curve(stroke: Stroke, count: int) -> np.ndarray:
    return bernstein(np.linspace(0.0, 1.0, count)) @ stroke.points


# -- rasterizer ---------------------------------------------------------------

@dataclass
class _StrokeField:
    window: tuple  # (r0, r1, c0, c1), half-open
    coverage: np.ndarray
    sigma: float
    temp: float
    dx: np.ndarray = field(repr=False, default=None)
    dy: np.ndarray = field(repr=False, default=None)
    d2: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)
    dist: np.ndarray = field(repr=False, default=None)


def _softmin_temperature(tau, sigma):
    # depends on tau only, so the soft distance does not change with width
    # and ink grows monotonically as strokes widen
    return 2.0 * tau * tau


def _stroke_field(points_px, width, params: RasterParams, basis, canvas, hard=False, keep=False):
    sigma = params.tau + width / 2.0
    temp = _softmin_temperature(params.tau, sigma)
    samples = basis @ points_px
    reach = _TAIL * sigma + 1.0
    lo = np.floor(samples.min(0) - reach).astype(int)
    hi = np.ceil(samples.max(0) + reach).astype(int)
    c0, r0 = np.maximum(lo, 0)
    c1, r1 = np.minimum(hi, canvas)
    if c1 <= c0 or r1 <= r0:
        return None
    xs = np.arange(c0, c1) + 0.5
    ys = np.arange(r0, r1) + 0.5
    dx = xs[None, None, :] - samples[:, 0, None, None]
    dy = ys[None, :, None] - samples[:, 1, None, None]
    d2 = dx * dx + dy * dy
    if hard:
        dist = d2.min(0)
        weights = None
    else:
        a = d2 / -temp
        a -= a.max(0)
        weights = np.exp(a)
        weights /= weights.sum(0)
        dist = (weights * d2).sum(0)
    coverage = np.exp(-dist / (2.0 * sigma * sigma))
    f = _StrokeField((r0, r1, c0, c1), coverage, sigma, temp)
    if keep:
        f.dx, f.dy, f.d2, f.weights, f.dist = dx, dy, d2, weights, dist
    return f


def _render(points, widths, params: RasterParams, canvas=CANVAS, hard=False, keep=False):
    basis = bernstein(np.linspace(0.0, 1.0, params.samples_per_curve))
    n = len(points)
    fields = [_stroke_field(points[i] * canvas, widths[i], params, basis, canvas, hard, keep)
              for i in range(n)]
    cover = np.zeros((n, canvas, canvas))
    for i, f in enumerate(fields):
        if f is not None:
            r0, r1, c0, c1 = f.window
            cover[i, r0:r1, c0:c1] = f.coverage
    if params.composite == "max":
        ink = cover.max(0)
    else:
        ink = 1.0 - np.prod(1.0 - cover, axis=0)
    return ink, cover, fields, basis


def _composite_partials(cover, composite):
    """d ink / d coverage_i for every stroke, shape ``(n, H, W)``."""
    if composite == "max":
        winner = cover.argmax(0)
        return (np.arange(len(cover))[:, None, None] == winner[None]).astype(float)
    keep = 1.0 - cover
    n = len(cover)
    prefix = np.ones_like(cover)
    suffix = np.ones_like(cover)
    if n > 1:
        prefix[1:] = np.cumprod(keep[:-1], axis=0)
        suffix[:-1] = np.cumprod(keep[::-1][:-1], axis=0)[::-1]
    return prefix * suffix


def _backward(ink, cover, fields, basis, params, adjoint, canvas):
    partial = _composite_partials(cover, params.composite)
    grads = np.zeros((len(fields), 4, 2))
    for i, f in enumerate(fields):
        if f is None:
            continue
        r0, r1, c0, c1 = f.window
        g_cov = adjoint[r0:r1, c0:c1] * partial[i, r0:r1, c0:c1]
        g_dist = g_cov * f.coverage * (-1.0 / (2.0 * f.sigma * f.sigma))
        g_d2 = g_dist[None] * f.weights * (1.0 - (f.d2 - f.dist[None]) / f.temp)
        gx = -2.0 * (g_d2 * f.dx).sum((1, 2))
        gy = -2.0 * (g_d2 * f.dy).sum((1, 2))
        g_samples = np.stack([gx, gy], axis=1)
        grads[i] = basis.T @ g_samples * canvas
    return grads.reshape(len(fields), 8)


def _arrays(sketch):
    if isinstance(sketch, Sketch):
        return sketch.control_points, sketch.widths
    points, widths = sketch
    return np.asarray(points, float).reshape(-1, 4, 2), np.asarray(widths, float)


def rasterize(sketch, params: RasterParams = RasterParams(), hard_min: bool = False) -> np.ndarray:
    """Grayscale ink image in [0, 1], shape ``(224, 224)``.

    ``sketch`` is a :class:`Sketch` or a ``(points, widths)`` pair.
    ``hard_min=True`` is a non-differentiable preview that uses the exact
    nearest-sample distance.
    """
    points, widths = _arrays(sketch)
    ink, *_ = _render(points, widths, params, hard=hard_min)
    return ink


def rasterize_backward(sketch, params: RasterParams, output_adjoint) -> np.ndarray:
    """Gradient of ``sum(adjoint * rasterize(sketch))`` w.r.t. control points.

    Returns a ``(n, 8)`` array ordered ``x1, y1, ..., x4, y4`` per stroke, in
    normalised units.
    """
    adjoint = np.asarray(output_adjoint, dtype=float)
    if adjoint.shape != (CANVAS, CANVAS):
        raise InputError(f"adjoint must have shape {(CANVAS, CANVAS)}, got {adjoint.shape}")
    if not np.all(np.isfinite(adjoint)):
        raise InputError("adjoint contains non-finite values")
    points, widths = _arrays(sketch)
    ink, cover, fields, basis = _render(points, widths, params, keep=True)
    return _backward(ink, cover, fields, basis, params, adjoint, CANVAS)


def render_with_grad(points, widths, params: RasterParams):
    """Forward raster plus a closure computing the control-point gradient.

    Saves the forward intermediates so an optimizer step does not render twice.
    """
    points = np.asarray(points, float).reshape(-1, 4, 2)
    ink, cover, fields, basis = _render(points, np.asarray(widths, float), params, keep=True)

    def backward(adjoint):
        return _backward(ink, cover, fields, basis, params, np.asarray(adjoint, float), CANVAS)

    return ink, backward


# -- vectors ------------------------------------------------------------------

def flatten(sketch: Sketch) -> np.ndarray:
    """Strokes as rows of ``(x1, y1, x2, y2, x3, y3, x4, y4)``."""
    return sketch.control_points.reshape(len(sketch), 8)


def unflatten(vectors, widths: float | Sequence[float] = DEFAULT_WIDTH) -> Sketch:
    data = np.asarray(vectors, dtype=float)
    if data.size == 0 or data.size % 8:
        raise InputError(f"need a multiple of 8 values, got {data.size}")
    data = data.reshape(-1, 8)
    widths = np.asarray(widths, dtype=float)
    if widths.ndim and len(widths) != len(data):
        raise InputError(f"width template has {len(widths)} entries for {len(data)} strokes")
    return Sketch.from_arrays(data.reshape(-1, 4, 2), widths)


# -- SVG ----------------------------------------------------------------------

_SVG_NS = "http://www.w3.org/2000/svg"


def to_svg(sketch: Sketch) -> str:
    c = sketch.canvas
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{_SVG_NS}" version="1.1" width="{c}" height="{c}" viewBox="0 0 {c} {c}">',
        f'<rect x="0" y="0" width="{c}" height="{c}" fill="white"/>',
    ]
    for s in sketch.strokes:
        (x1, y1), (x2, y2), (x3, y3), (x4, y4) = s.points * c
        d = (f"M {x1:.3f} {y1:.3f} C {x2:.3f} {y2:.3f}, "
             f"{x3:.3f} {y3:.3f}, {x4:.3f} {y4:.3f}")
        out.append(f'<path d="{d}" fill="none" stroke="black" '
                   f'stroke-width="{s.width:.3f}" stroke-linecap="round"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def from_svg(text: str) -> Sketch:
    """Read back a document written by :func:`to_svg`."""
    try:
        root = ET.fromstring(text.encode() if isinstance(text, str) else text)
    except ET.ParseError as exc:
        raise InputError(f"invalid SVG: {exc}") from None
    canvas = int(float(root.get("width", CANVAS)))
    strokes = []
    for path in root.iter(f"{{{_SVG_NS}}}path"):
        nums = [float(v) for v in _NUMBER.findall(path.get("d", ""))]
        if len(nums) != 8:
            raise InputError("expected one cubic segment per path")
        strokes.append(Stroke(np.array(nums).reshape(4, 2) / canvas,
                              float(path.get("stroke-width", DEFAULT_WIDTH))))
    return Sketch(strokes, canvas)


def save_raster_png(image, path) -> None:
    """8-bit grayscale dump of a raster, ink drawn dark."""
    img = np.clip(np.asarray(image, float), 0.0, 1.0)
    Image.fromarray(np.round((1.0 - img) * 255).astype(np.uint8), mode="L").save(path)
