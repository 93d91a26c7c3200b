"""Stage one: multi-view contour images of a mesh."""

from .hlr import HLRConfig, chain_polylines, classify_edges, extract_contours, project
from .image import CANVAS, MARGIN, ContourImage, render_contour_image
from .mesh import TriangleMesh, icosphere, load_mesh, unit_cube, write_stl
from .selection import (DEDUP_THRESHOLD, complexity_score, dedup, hamming, hash_hex,
                        perceptual_hash, select_views)
from .views import ViewKind, Viewpoint, canonical_viewpoints

__all__ = [
    "CANVAS", "DEDUP_THRESHOLD", "MARGIN", "ContourImage", "HLRConfig", "TriangleMesh",
    "ViewKind", "Viewpoint", "canonical_viewpoints", "chain_polylines", "classify_edges",
    "complexity_score", "dedup", "extract_contours", "hamming", "hash_hex", "icosphere",
    "load_mesh", "perceptual_hash", "project", "render_contour_image", "select_views",
    "unit_cube", "write_stl",
]
