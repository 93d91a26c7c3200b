"""Near-duplicate removal and information ranking of contour views."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .image import ContourImage

DEDUP_THRESHOLD = 6
_EIGHT = np.ones((3, 3), dtype=bool)


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) matrix of exact box-average overlaps."""
    edges = np.arange(n_out + 1) * (n_in / n_out)
    lo, hi = edges[:-1, None], edges[1:, None]
    px = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, px + 1) - np.maximum(lo, px), 0.0, None)
    return overlap / overlap.sum(1, keepdims=True)


def box_downsample(image, rows: int, cols: int) -> np.ndarray:
    img = np.asarray(image, float)
    return _area_weights(img.shape[0], rows) @ img @ _area_weights(img.shape[1], cols).T


def perceptual_hash(image: ContourImage) -> int:
    """64-bit difference hash of ink density.

    The mask is box-averaged to 8 rows x 9 columns and bit (r, c) is set when
    cell (r, c) is denser than its right neighbour. Bits are packed row-major,
    most significant first. Comparisons ignore float noise below 1e-9 so that
    cells with equal ink hash identically.
    """
    cells = box_downsample(image.pixels, 8, 9)
    bits = (cells[:, :-1] - cells[:, 1:]) > 1e-9
    value = 0
    for b in bits.ravel():
        value = (value << 1) | int(b)
    return value


def hash_hex(value: int) -> str:
    return f"{value:016x}"


def hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


def dedup(images, threshold: int = DEDUP_THRESHOLD, hashes=None):
    """Keep images whose hash is more than ``threshold`` bits from all kept ones.

    Greedy over the input order, so the first member of each class survives.
    """
    if not 0 <= threshold <= 64:
        raise ValueError("threshold must be in [0, 64]")
    hashes = [perceptual_hash(im) for im in images] if hashes is None else list(hashes)
    kept, kept_hashes = [], []
    for im, h in zip(images, hashes):
        if all(hamming(h, k) > threshold for k in kept_hashes):
            kept.append(im)
            kept_hashes.append(h)
    return kept


def connected_components(mask) -> int:
    return int(ndimage.label(mask, structure=_EIGHT)[1])


def density_entropy(mask, grid: int = 8) -> float:
    """Shannon entropy (bits) of the ink distribution over a grid x grid tiling."""
    counts = box_downsample(mask, grid, grid).ravel()
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def complexity_score(image: ContourImage) -> float:
    """Ink fraction x (1 + components) x (1 + 8x8 density entropy)."""
    mask = image.pixels
    ink = mask.sum()
    if ink == 0:
        return 0.0
    frac = ink / mask.size
    return float(frac * (1 + connected_components(mask)) * (1 + density_entropy(mask)))


def _view_rank(image: ContourImage):
    vp = image.source_viewpoint
    if vp is None:
        return (3, (0, 0, 0))
    return (sum(map(abs, vp.lattice)) - 1, vp.lattice)


def select_views(images, n: int, scores=None):
    """Top-``n`` images by complexity score; ties keep canonical view order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    images = list(images)
    scores = [complexity_score(im) for im in images] if scores is None else list(scores)
    order = sorted(range(len(images)), key=lambda i: (-scores[i], _view_rank(images[i]), i))
    return [images[i] for i in order[:n]]
