"""End-to-end run: mesh -> contour views -> optimized sketches -> metrics.

Everything a run writes lands under ``config.output`` and is listed in
``manifest.json`` with its sha256. No timestamps or absolute paths are
recorded, so identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .backends import make_backend
from .contour import (DEDUP_THRESHOLD, MARGIN, ContourImage, HLRConfig, canonical_viewpoints,
                      complexity_score, extract_contours, hash_hex, load_mesh, perceptual_hash,
                      render_contour_image, select_views)
from .contour.selection import hamming
from .edge_init import initialize, seed_overlay
from .errors import FreesketchError, InputError, StageError
from .evaluation import MetricsReport, sketch_vs_contour_metrics
from .losses import LossWeights
from .optimizer import OptimizerConfig, distill_targets, optimize_sketch, write_loss_csv
from .strokes import RasterParams, from_svg, rasterize, save_raster_png, to_svg

log = logging.getLogger("freesketch")

MANIFEST_VERSION = "v1"
ENV_OUT = "FREESKETCH_OUT"
ENV_JOBS = "FREESKETCH_JOBS"

# optimizer fields settable from the pipeline config; raster, weights and
# seed come from the pipeline level
_OPT_KEYS = ("steps", "learning_rate", "beta1", "beta2", "eps", "snapshot_count", "width")


@dataclass
class PipelineConfig:
    input: str | None = None
    strokes: int = 16
    views: int = 3
    dedup_threshold: int = DEDUP_THRESHOLD
    margin: int = MARGIN
    raster: RasterParams = field(default_factory=RasterParams)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    backend: str = "default"
    output: str = "out"
    seed: int = 0
    jobs: int = 1
    keep_intermediate: bool = True

    def __post_init__(self):
        if not 1 <= self.strokes <= 64:
            raise InputError("strokes must be in [1, 64]")
        if self.views < 1:
            raise InputError("views must be >= 1")
        if not 0 <= self.dedup_threshold <= 64:
            raise InputError("dedup_threshold must be in [0, 64]")
        if not 0 <= self.margin < 112:
            raise InputError("margin must be in [0, 112)")
        if self.jobs < 1:
            raise InputError("jobs must be >= 1")
        if not (self.backend == "default" or self.backend.startswith("external:")):
            raise InputError("backend must be 'default' or 'external:<command>'")

    def optimizer_for(self, view_index: int) -> OptimizerConfig:
        """Per-view optimizer settings; the seed is ``seed + view_index``."""
        return replace(self.optimizer, raster=self.raster, weights=self.weights,
                       rng_seed=self.seed + view_index)

    def to_dict(self, with_output: bool = True) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["raster"] = asdict(self.raster)
        d["weights"] = asdict(self.weights)
        d["optimizer"] = {k: getattr(self.optimizer, k) for k in _OPT_KEYS}
        if not with_output:
            # manifest form: no machine-specific paths or scheduling
            del d["output"], d["jobs"]
            if self.input:
                d["input"] = Path(self.input).name
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, data) -> PipelineConfig:
        data = dict(data)
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "raster" in data:
                data["raster"] = RasterParams(**data["raster"])
            if "weights" in data:
                data["weights"] = LossWeights(**data["weights"])
            if "optimizer" in data:
                opt = dict(data["optimizer"])
                bad = set(opt) - set(_OPT_KEYS)
                if bad:
                    raise InputError(f"unknown optimizer keys: {sorted(bad)}")
                data["optimizer"] = OptimizerConfig(**opt)
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"bad config: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> PipelineConfig:
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise InputError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> PipelineConfig:
        try:
            return cls.from_json(Path(path).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None

    def with_env(self, environ=None) -> PipelineConfig:
        """Apply ``FREESKETCH_OUT`` / ``FREESKETCH_JOBS`` if set."""
        environ = os.environ if environ is None else environ
        cfg = self
        if environ.get(ENV_OUT):
            cfg = replace(cfg, output=environ[ENV_OUT])
        if environ.get(ENV_JOBS):
            try:
                cfg = replace(cfg, jobs=int(environ[ENV_JOBS]))
            except ValueError:
                raise InputError(f"{ENV_JOBS} must be an integer") from None
        return cfg


# -- artifacts --------------------------------------------------------------------

def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class ArtifactLog:
    """Records every file written under a root directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.entries = {}

    def path(self, rel) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def add(self, rel, kind):
        self.entries[str(rel)] = kind

    def write_text(self, rel, text, kind):
        self.path(rel).write_text(text)
        self.add(rel, kind)

    def listing(self):
        return [{"path": rel, "kind": self.entries[rel], "sha256": sha256_file(self.root / rel)}
                for rel in sorted(self.entries)]


# -- stage one ----------------------------------------------------------------------

def render_views(mesh, margin: int = MARGIN, hlr: HLRConfig = HLRConfig()):
    """Contour images for all 26 canonical viewpoints, in canonical order."""
    images = []
    for vp in canonical_viewpoints():
        try:
            polylines = extract_contours(mesh, vp, hlr)
            images.append(render_contour_image(polylines, margin=margin, viewpoint=vp))
        except FreesketchError as exc:
            raise StageError("extract_contours", exc, vp.name) from exc
    return images


@dataclass
class StageOneResult:
    images: list
    hashes: list
    scores: list
    kept: list  # indices surviving dedup
    selected: list  # indices chosen for stage two, best first

    def summary(self) -> list:
        return [{"index": i, "view": im.source_viewpoint.name,
                 "lattice": list(im.source_viewpoint.lattice),
                 "kind": im.source_viewpoint.kind.value, "hash": hash_hex(h),
                 "score": s, "ink": im.ink_count, "kept": i in self.kept,
                 "selected_rank": self.selected.index(i) if i in self.selected else None}
                for i, (im, h, s) in enumerate(zip(self.images, self.hashes, self.scores))]


def stage_one(mesh, n_views: int, threshold: int = DEDUP_THRESHOLD,
              margin: int = MARGIN) -> StageOneResult:
    images = render_views(mesh, margin)
    hashes = [perceptual_hash(im) for im in images]
    scores = [complexity_score(im) for im in images]
    kept = []
    for i, h in enumerate(hashes):
        if all(hamming(h, hashes[k]) > threshold for k in kept):
            kept.append(i)
    chosen = select_views([images[i] for i in kept], n_views, [scores[i] for i in kept])
    index = {id(im): i for i, im in enumerate(images)}
    return StageOneResult(images, hashes, scores, kept, [index[id(im)] for im in chosen])


def write_stage_one(result: StageOneResult, arts: ArtifactLog, images: bool = True):
    if images:
        for im in result.images:
            rel = f"contours/{im.source_viewpoint.name}.png"
            im.save_png(arts.path(rel))
            arts.add(rel, "contour_png")
    arts.write_text("contours/views.json", json.dumps(result.summary(), indent=1) + "\n",
                    "view_summary")


# -- stage two ----------------------------------------------------------------------

@dataclass
class ViewOutcome:
    name: str
    svg: str
    metrics: object


def sketch_view(contour: ContourImage, name: str, n: int, opt: OptimizerConfig, backend,
                arts: ArtifactLog, prefix: str, keep_intermediate: bool = True) -> ViewOutcome:
    """Initialize, optimize and persist one view under ``prefix/``."""
    try:
        init, placement = initialize(contour, n, opt.rng_seed, opt.width)
    except FreesketchError as exc:
        raise StageError("edge_init", exc, name) from exc
    try:
        result = optimize_sketch(contour, n, opt, backend, init=init)
    except FreesketchError as exc:
        raise StageError("optimize_sketch", exc, name) from exc
    svg_rel = f"{prefix}/sketch.svg"
    arts.write_text(svg_rel, to_svg(result.sketch), "sketch_svg")
    rel = f"{prefix}/contour.png"
    contour.save_png(arts.path(rel))
    arts.add(rel, "contour_png")
    if keep_intermediate:
        rel = f"{prefix}/seeds.png"
        seed_overlay(contour, placement).save(arts.path(rel))
        arts.add(rel, "seed_overlay_png")
        rel = f"{prefix}/preview.png"
        save_raster_png(rasterize(result.sketch, opt.raster), arts.path(rel))
        arts.add(rel, "preview_png")
        rel = f"{prefix}/loss.csv"
        write_loss_csv(result.history, arts.path(rel))
        arts.add(rel, "loss_csv")
    bundle = distill_targets(result.trace, contour, arts.root / prefix / "trace")
    arts.add(f"{prefix}/trace/contour.png", "trace_contour_png")
    arts.add(f"{prefix}/trace/{bundle.name}", "trace_bundle")
    # score the sketch exactly as saved so ``eval`` reproduces it from disk
    saved = from_svg((arts.root / svg_rel).read_text())
    metrics = sketch_vs_contour_metrics(saved, contour, opt.raster, name)
    return ViewOutcome(name, svg_rel, metrics)


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _capture(fn):
    def wrapped(item):
        try:
            return fn(item), None
        except FreesketchError as exc:
            return None, exc
    return wrapped


def write_manifest(arts: ArtifactLog, config: PipelineConfig, extra: dict) -> Path:
    doc = {"version": MANIFEST_VERSION, "config": config.to_dict(with_output=False), **extra,
           "artifacts": arts.listing()}
    path = arts.root / "manifest.json"
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def run(config: PipelineConfig) -> dict:
    """Full two-stage run. Returns the manifest document.

    Per-view failures do not stop other views; the manifest is written with
    an ``errors`` list and the first failure is re-raised afterwards.
    """
    if not config.input:
        raise StageError("load_mesh", InputError("no input mesh given"))
    arts = ArtifactLog(config.output)
    arts.root.mkdir(parents=True, exist_ok=True)
    try:
        mesh = load_mesh(config.input)
    except FreesketchError as exc:
        raise StageError("load_mesh", exc) from exc
    try:
        backend = make_backend(config.backend)
    except FreesketchError as exc:
        raise StageError("backend", exc) from exc
    log.info("stage one: %s", config.input)
    s1 = stage_one(mesh, config.views, config.dedup_threshold, config.margin)
    write_stage_one(s1, arts, config.keep_intermediate)
    log.info("kept %d of %d views, selected %s", len(s1.kept), len(s1.images),
             [s1.images[i].source_viewpoint.name for i in s1.selected])

    def one(rank_index):
        rank, index = rank_index
        im = s1.images[index]
        name = im.source_viewpoint.name
        log.info("view %s: optimizing %d strokes", name, config.strokes)
        return sketch_view(im, name, config.strokes, config.optimizer_for(rank), backend, arts,
                           f"views/{rank:02d}_{name}", config.keep_intermediate)

    results = _map(_capture(one), list(enumerate(s1.selected)), config.jobs)
    outcomes = [r for r, e in results if r is not None]
    errors = [e for r, e in results if e is not None]
    report = MetricsReport([o.metrics for o in outcomes])
    arts.write_text("metrics.json", report.to_json(), "metrics_json")
    arts.write_text("metrics.csv", report.to_csv(), "metrics_csv")
    extra = {
        "input": {"path": Path(config.input).name, "sha256": sha256_file(config.input)},
        "views": [{"view": o.name, "svg": o.svg} for o in outcomes],
        "metrics": "metrics.json",
        "errors": [{"stage": getattr(e, "stage", None), "view": getattr(e, "view", None),
                    "message": str(e)} for e in errors],
    }
    write_manifest(arts, config, extra)
    if errors:
        raise errors[0]
    return json.loads((arts.root / "manifest.json").read_text())


def recompute_metrics(manifest_path) -> tuple[MetricsReport, MetricsReport]:
    """(recomputed, stored) metrics for a finished run."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read manifest {manifest_path}: {exc}") from None
    root = manifest_path.parent
    raster = RasterParams(**doc["config"]["raster"])
    rows = []
    for v in doc["views"]:
        svg = root / v["svg"]
        sketch = from_svg(svg.read_text())
        contour = ContourImage.load_png(svg.parent / "contour.png")
        rows.append(sketch_vs_contour_metrics(sketch, contour, raster, v["view"]))
    stored = MetricsReport.from_json((root / doc["metrics"]).read_text())
    return MetricsReport(rows), stored
