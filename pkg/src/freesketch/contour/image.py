"""Binary contour images: normalisation onto the canvas and PNG I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import InputError
from .views import Viewpoint

CANVAS = 224
MARGIN = 22


@dataclass(eq=False)
class ContourImage:
    """224x224 boolean ink mask. ``True`` is ink."""

    pixels: np.ndarray
    source_viewpoint: Viewpoint | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels).astype(bool)
        if self.pixels.shape != (CANVAS, CANVAS):
            raise InputError(f"contour image must be {CANVAS}x{CANVAS}, got {self.pixels.shape}")

    width = property(lambda self: CANVAS)
    height = property(lambda self: CANVAS)

    @property
    def ink_count(self) -> int:
        return int(self.pixels.sum())

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(float)

    def bbox(self):
        """Inclusive (row0, col0, row1, col1) of the ink, or None if blank."""
        rows = np.flatnonzero(self.pixels.any(1))
        cols = np.flatnonzero(self.pixels.any(0))
        if len(rows) == 0:
            return None
        return int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1])

    def __eq__(self, other):
        if not isinstance(other, ContourImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def save_png(self, path) -> None:
        """1-bit PNG, black ink on white."""
        Image.fromarray(~self.pixels).convert("1").save(path, optimize=False)

    @classmethod
    def load_png(cls, path, viewpoint: Viewpoint | None = None) -> ContourImage:
        path = Path(path)
        try:
            with Image.open(path) as im:
                gray = np.asarray(im.convert("L"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read contour image {path}: {exc}") from None
        return cls(gray < 128, viewpoint)


def render_contour_image(polylines, canvas: int = CANVAS, margin: int = MARGIN,
                         viewpoint: Viewpoint | None = None) -> ContourImage:
    """Fit polylines into the canvas and rasterise them 1 px wide.

    Input coordinates have y pointing up. Pixel ``(r, c)`` has its centre at
    ``(c, r)``; the larger bbox side is mapped onto ``canvas - 2*margin``
    pixels and the drawing is centred, so ink stays inside the margin band.
    Lines are drawn by dense sampling (<= 0.25 px step) and nearest-pixel
    rounding, which is the 0.5 threshold of a 1 px anti-aliased line.
    """
    lines = [np.asarray(p, float).reshape(-1, 2) for p in polylines]
    lines = [p for p in lines if len(p) >= 1]
    if not lines or all(len(p) < 2 for p in lines):
        raise InputError("need at least one polyline with two points")
    pts = np.concatenate(lines)
    lo, hi = pts.min(0), pts.max(0)
    extent = float(max(hi - lo))
    if not extent > 0:
        raise InputError("zero-extent bounding box")
    span = canvas - 2 * margin - 1
    scale = span / extent
    centre_px = (canvas - 1) / 2.0
    mid = (lo + hi) / 2.0

    def to_px(p):
        x = (p[:, 0] - mid[0]) * scale + centre_px
        y = centre_px - (p[:, 1] - mid[1]) * scale
        return np.stack([x, y], axis=1)

    ink = np.zeros((canvas, canvas), dtype=bool)
    for p in lines:
        if len(p) < 2:
            continue
        q = to_px(p)
        seg = np.diff(q, axis=0)
        steps = np.maximum(np.ceil(np.abs(seg).max(1) * 4).astype(int), 1)
        for a, d, k in zip(q[:-1], seg, steps):
            t = np.arange(k + 1)[:, None] / k
            s = np.rint(a + t * d).astype(int)
            np.clip(s, 0, canvas - 1, out=s)
            ink[s[:, 1], s[:, 0]] = True
    return ContourImage(ink, viewpoint)
