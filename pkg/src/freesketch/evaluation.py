"""Sketch-vs-contour metrics and the stroke-count taxonomy."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from .contour.image import ContourImage
from .errors import InputError
from .strokes import RasterParams, Sketch, rasterize

REPORT_VERSION = "v1"
INK_THRESHOLD = 0.5


class ComplexityClass(str, enum.Enum):
    SIMPLE = "Simple"
    MODERATE = "Moderate"
    COMPLEX = "Complex"
    OUT_OF_RANGE = "OutOfRange"


_BUCKETS = [(16, 24, ComplexityClass.SIMPLE), (24, 32, ComplexityClass.MODERATE),
            (32, 40, ComplexityClass.COMPLEX)]


def complexity_class(n: int) -> ComplexityClass:
    if n < 1:
        raise InputError("stroke count must be >= 1")
    for lo, hi, cls in _BUCKETS:
        if lo <= n < hi:
            return cls
    return ComplexityClass.OUT_OF_RANGE


def iou(a, b) -> float:
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def chamfer(a, b) -> float:
    """Symmetric Chamfer distance in pixels: mean of the two directed means.

    ``inf`` when exactly one mask is empty, 0 when both are.
    """
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    if not a.any() and not b.any():
        return 0.0
    if not a.any() or not b.any():
        return math.inf
    to_b = distance_transform_edt(~b)
    to_a = distance_transform_edt(~a)
    return 0.5 * (float(to_b[a].mean()) + float(to_a[b].mean()))


@dataclass
class MetricsRow:
    name: str
    iou: float
    chamfer: float
    ink_ratio: float
    strokes: int
    complexity: str


def sketch_vs_contour_metrics(sketch: Sketch, contour: ContourImage,
                              params: RasterParams = RasterParams(), name: str = "") -> MetricsRow:
    """IoU, Chamfer and ink ratio of the binarised raster against the contour.

    ``ink_ratio`` is sketch ink pixels over contour ink pixels.
    """
    target = contour.pixels
    if not target.any():
        raise InputError("blank contour")
    mask = rasterize(sketch, params) >= INK_THRESHOLD
    return MetricsRow(name, iou(mask, target), chamfer(mask, target),
                      np.count_nonzero(mask) / np.count_nonzero(target), len(sketch),
                      complexity_class(len(sketch)).value)


_FIELDS = ["name", "iou", "chamfer", "ink_ratio", "strokes", "complexity"]


def _num(x):
    # JSON has no infinity; an unmeasurable Chamfer distance is written as null
    return None if isinstance(x, float) and not math.isfinite(x) else x


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)
    version: str = REPORT_VERSION

    def means(self) -> dict:
        if not self.rows:
            return {}
        return {k: float(np.mean([getattr(r, k) for r in self.rows]))
                for k in ("iou", "chamfer", "ink_ratio", "strokes")}

    def to_json(self) -> str:
        doc = {"version": self.version,
               "rows": [{k: _num(v) for k, v in asdict(r).items()} for r in self.rows],
               "means": {k: _num(v) for k, v in self.means().items()}}
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> MetricsReport:
        doc = json.loads(text)
        if doc.get("version") != REPORT_VERSION:
            raise InputError(f"unsupported report version {doc.get('version')!r}")
        rows = []
        for r in doc["rows"]:
            r = dict(r)
            if r["chamfer"] is None:
                r["chamfer"] = math.inf
            rows.append(MetricsRow(**r))
        return cls(rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["version", *_FIELDS])
        for r in self.rows:
            w.writerow([self.version, *(repr(v) if isinstance(v, float) else v
                                        for v in (getattr(r, k) for k in _FIELDS))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> MetricsReport:
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            if rec["version"] != REPORT_VERSION:
                raise InputError(f"unsupported report version {rec['version']!r}")
            rows.append(MetricsRow(rec["name"], float(rec["iou"]), float(rec["chamfer"]),
                                   float(rec["ink_ratio"]), int(rec["strokes"]), rec["complexity"]))
        return cls(rows)

    def __eq__(self, other):
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return self.version == other.version and self.rows == other.rows
