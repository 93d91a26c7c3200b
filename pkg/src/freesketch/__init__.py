"""Freehand-style vector sketches of mechanical parts from triangle meshes."""

from .backends import Embedding, ExternalBackend, PyramidBackend, default_backend
from .contour import ContourImage, TriangleMesh, Viewpoint, canonical_viewpoints, load_mesh
from .edge_init import initialize, init_strokes, place_seed_points, segment_features
from .errors import FreesketchError, InputError, NumericError, StageError
from .evaluation import ComplexityClass, MetricsReport, complexity_class, sketch_vs_contour_metrics
from .losses import (GuidanceTrace, LossWeights, guidance_loss, hausdorff, jv_guidance_loss,
                     perceptual_loss, total_loss)
from .optimizer import OptimizerConfig, optimize_sketch
from .pipeline import PipelineConfig, run
from .strokes import RasterParams, Sketch, Stroke, from_svg, rasterize, to_svg

__version__ = "0.1.0"
