"""Input coercion shared by the estimator wrappers and the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .contour.image import CANVAS, ContourImage
from .errors import InputError
from .strokes import MAX_STROKES


def check_contour(obj) -> ContourImage:
    """ContourImage from an instance, a PNG path or a 224x224 array."""
    if isinstance(obj, ContourImage):
        return obj
    if isinstance(obj, (str, Path)):
        return ContourImage.load_png(obj)
    arr = np.asarray(obj)
    if arr.shape != (CANVAS, CANVAS):
        raise InputError(f"expected a {CANVAS}x{CANVAS} contour, got shape {arr.shape}")
    if arr.dtype != bool:
        if not np.all(np.isfinite(arr)):
            raise InputError("contour contains non-finite values")
        arr = arr >= 0.5
    return ContourImage(arr)


def check_contours(X) -> list[ContourImage]:
    if isinstance(X, (ContourImage, str, Path)):
        X = [X]
    elif isinstance(X, np.ndarray) and X.ndim == 2:
        X = [X]
    items = [check_contour(x) for x in X]
    if not items:
        raise InputError("no contour images given")
    return items


def check_stroke_count(n) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise InputError(f"stroke count must be an integer, got {n!r}")
    n = int(n)
    if not 1 <= n <= MAX_STROKES:
        raise InputError(f"stroke count must be in [1, {MAX_STROKES}]")
    return n
