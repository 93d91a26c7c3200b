"""Command-line entry point: ``freesketch {run,contours,init,sketch,eval}``.

Settings come from defaults, then ``--config`` JSON, then the
``FREESKETCH_OUT`` / ``FREESKETCH_JOBS`` environment variables, then flags.
Exit codes: 0 success, 1 other failure, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .backends import make_backend
from .contour import ContourImage, load_mesh
from .edge_init import initialize, seed_overlay
from .errors import FreesketchError, InputError, StageError
from .evaluation import MetricsReport, complexity_class
from .pipeline import ArtifactLog, PipelineConfig
from .strokes import to_svg

log = logging.getLogger("freesketch")


def _add_common(p, mesh=False, contour=False):
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", dest="output", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    if mesh:
        p.add_argument("--input", help="mesh file (.stl or .obj)")
        p.add_argument("--views", type=int, help="views kept for stage two")
        p.add_argument("--dedup-threshold", type=int)
        p.add_argument("--margin", type=int)
    if contour:
        p.add_argument("--contour", required=True, help="224x224 contour PNG")


def _add_stage_two(p):
    p.add_argument("--strokes", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--samples", dest="samples_per_curve", type=int)
    p.add_argument("--composite", choices=["soft_over", "max"])
    p.add_argument("--beta-s", type=float)
    p.add_argument("--beta-h", type=float)
    p.add_argument("--backend", help="'default' or 'external:<command>'")
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-intermediate", dest="keep_intermediate", action="store_false",
                   default=None, help="skip previews, seed overlays and loss CSVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freesketch",
                                     description="Freehand-style vector sketches from meshes.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="full pipeline: mesh to sketches")
    _add_common(p, mesh=True)
    _add_stage_two(p)
    p = sub.add_parser("contours", help="stage one only: 26 views, dedup, selection")
    _add_common(p, mesh=True)
    p = sub.add_parser("init", help="seed overlay and initial strokes for a contour PNG")
    _add_common(p, contour=True)
    p.add_argument("--strokes", type=int)
    p = sub.add_parser("sketch", help="stage two on a contour PNG")
    _add_common(p, contour=True)
    _add_stage_two(p)
    p = sub.add_parser("eval", help="recompute metrics of a finished run")
    p.add_argument("--run", required=True, help="manifest.json of the run")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


_TOP = ("input", "strokes", "views", "dedup_threshold", "margin", "backend", "output", "seed",
        "jobs", "keep_intermediate")


def resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    cfg = cfg.with_env()
    ns = vars(args)
    top = {k: ns[k] for k in _TOP if ns.get(k) is not None}
    raster = {k: ns[k] for k in ("tau", "samples_per_curve", "composite") if ns.get(k) is not None}
    opt = {k: ns[k] for k in ("steps", "learning_rate") if ns.get(k) is not None}
    weights = {k: ns[k] for k in ("beta_s", "beta_h") if ns.get(k) is not None}
    try:
        return replace(cfg, **top,
                       raster=replace(cfg.raster, **raster),
                       optimizer=replace(cfg.optimizer, **opt),
                       weights=replace(cfg.weights, **weights))
    except TypeError as exc:
        raise InputError(str(exc)) from None


def _load_contour(path):
    try:
        return ContourImage.load_png(path)
    except FreesketchError as exc:
        raise StageError("load_contour", exc) from exc


def cmd_run(cfg: PipelineConfig) -> int:
    manifest = pipeline.run(cfg)
    print(json.dumps({"manifest": str(Path(cfg.output) / "manifest.json"),
                      "views": [v["view"] for v in manifest["views"]]}))
    return 0


def cmd_contours(cfg: PipelineConfig) -> int:
    if not cfg.input:
        raise StageError("load_mesh", InputError("--input is required"))
    try:
        mesh = load_mesh(cfg.input)
    except FreesketchError as exc:
        raise StageError("load_mesh", exc) from exc
    arts = ArtifactLog(cfg.output)
    arts.root.mkdir(parents=True, exist_ok=True)
    s1 = pipeline.stage_one(mesh, cfg.views, cfg.dedup_threshold, cfg.margin)
    pipeline.write_stage_one(s1, arts, images=True)
    name = lambda i: s1.images[i].source_viewpoint.name  # noqa: E731
    extra = {"views": s1.summary(), "deduped": [name(i) for i in s1.kept],
             "selected": [name(i) for i in s1.selected]}
    pipeline.write_manifest(arts, cfg, extra)
    print(json.dumps({"views": len(s1.images), "deduped": extra["deduped"],
                      "selected": extra["selected"]}))
    return 0


def cmd_init(cfg: PipelineConfig, contour_path) -> int:
    contour = _load_contour(contour_path)
    try:
        sketch, placement = initialize(contour, cfg.strokes, cfg.seed, cfg.optimizer.width)
    except FreesketchError as exc:
        raise StageError("edge_init", exc) from exc
    arts = ArtifactLog(cfg.output)
    seed_overlay(contour, placement).save(arts.path("seeds.png"))
    arts.add("seeds.png", "seed_overlay_png")
    arts.write_text("init.svg", to_svg(sketch), "sketch_svg")
    pipeline.write_manifest(arts, cfg, {"seeds": placement.pixels.tolist(),
                                        "owner": placement.owner.tolist(),
                                        "dropped": placement.dropped})
    print(json.dumps({"seeds": len(placement), "dropped_features": placement.dropped}))
    return 0


def cmd_sketch(cfg: PipelineConfig, contour_path) -> int:
    contour = _load_contour(contour_path)
    try:
        backend = make_backend(cfg.backend)
    except FreesketchError as exc:
        raise StageError("backend", exc) from exc
    arts = ArtifactLog(cfg.output)
    out = pipeline.sketch_view(contour, Path(contour_path).stem, cfg.strokes,
                               cfg.optimizer_for(0), backend, arts, "sketch",
                               cfg.keep_intermediate)
    report = MetricsReport([out.metrics])
    arts.write_text("metrics.json", report.to_json(), "metrics_json")
    arts.write_text("metrics.csv", report.to_csv(), "metrics_csv")
    pipeline.write_manifest(arts, cfg, {"views": [{"view": out.name, "svg": out.svg}],
                                        "metrics": "metrics.json"})
    print(json.dumps({"svg": str(arts.root / out.svg),
                      "complexity": complexity_class(cfg.strokes).value,
                      "iou": out.metrics.iou}))
    return 0


def cmd_eval(manifest) -> int:
    fresh, stored = pipeline.recompute_metrics(manifest)
    same = fresh == stored
    sys.stdout.write(fresh.to_json())
    if not same:
        log.error("recomputed metrics differ from the stored report")
    return 0 if same else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "eval":
            return cmd_eval(args.run)
        cfg = resolve_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "contours":
            return cmd_contours(cfg)
        if args.command == "init":
            return cmd_init(cfg, args.contour)
        return cmd_sketch(cfg, args.contour)
    except FreesketchError as exc:
        stage = getattr(exc, "stage", None)
        msg = {"error": str(exc), "stage": stage, "view": getattr(exc, "view", None)}
        print(json.dumps(msg), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
