"""Gradient-based stroke optimization and guidance-trace persistence."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .backends import default_backend
from .contour.image import ContourImage
from .edge_init import initialize
from .errors import FreesketchError, InputError, NumericError
from .losses import SNAPSHOT_COUNT, GuidanceTrace, LossWeights, perceptual_terms
from .strokes import COORD_MAX, COORD_MIN, DEFAULT_WIDTH, RasterParams, Sketch, render_with_grad


@dataclass(frozen=True)
class OptimizerConfig:
    steps: int = 1000
    learning_rate: float = 0.0045  # about one pixel per step
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    snapshot_count: int = SNAPSHOT_COUNT
    rng_seed: int = 0
    width: float = DEFAULT_WIDTH
    raster: RasterParams = field(default_factory=RasterParams)
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.snapshot_count < 1:
            raise InputError("snapshot_count must be >= 1")
        if self.steps < self.snapshot_count:
            raise InputError(f"steps must be >= snapshot_count ({self.snapshot_count})")
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise InputError("invalid Adam hyper-parameters")

    def snapshot_steps(self) -> list[int]:
        k = self.snapshot_count
        return [math.ceil(self.steps * i / k) for i in range(1, k + 1)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> OptimizerConfig:
        data = dict(data)
        if "raster" in data:
            data["raster"] = RasterParams(**data["raster"])
        if "weights" in data:
            data["weights"] = LossWeights(**data["weights"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"bad optimizer config: {exc}") from None


class Adam:
    """Plain Adam on a flat parameter array."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params, grad):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class LossRecord:
    step: int
    geometric: float
    semantic: float
    percept: float


@dataclass
class OptimizationResult:
    sketch: Sketch
    trace: GuidanceTrace
    history: list
    best_step: int
    initial: Sketch

    @property
    def initial_loss(self) -> float:
        return self.history[0].percept

    @property
    def best_loss(self) -> float:
        return self.history[self.best_step - 1].percept

    def __iter__(self):
        # allows ``sketch, trace, history = optimize_sketch(...)``
        return iter((self.sketch, self.trace, self.history))


def optimize_sketch(contour: ContourImage, n: int, cfg: OptimizerConfig = OptimizerConfig(),
                    backend=None, init: Sketch | None = None) -> OptimizationResult:
    """Fit ``n`` strokes to ``contour`` by Adam on the perceptual loss.

    Step ``s`` (1-based) evaluates the loss of the current strokes, records
    it, captures a snapshot if ``s`` is a snapshot step, then updates. The
    last step only evaluates. Widths stay fixed; coordinates are clamped to
    the stroke range after every update. Returns the lowest-loss sketch.
    """
    backend = backend or default_backend()
    if not backend.differentiable:
        raise InputError(f"{backend!r} cannot drive the optimizer")
    if init is None:
        init, _ = initialize(contour, n, cfg.rng_seed, cfg.width)
    elif len(init) != n:
        raise InputError(f"initial sketch has {len(init)} strokes, expected {n}")
    target = backend.embed(contour.as_float())
    widths = init.widths
    params = init.control_points.ravel().copy()
    adam = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    snap_at = set(cfg.snapshot_steps())
    history, snapshots, snap_steps = [], [], []
    best_loss, best_step, best_params = math.inf, 0, params
    for step in range(1, cfg.steps + 1):
        ink, backward = render_with_grad(params, widths, cfg.raster)
        terms, d_ink = perceptual_terms(contour, ink, backend, cfg.weights, with_grad=True,
                                        contour_embedding=target)
        if not math.isfinite(terms.total):
            raise NumericError(f"non-finite loss at step {step}: {terms}")
        history.append(LossRecord(step, terms.geometric, terms.semantic, terms.total))
        if terms.total < best_loss:
            best_loss, best_step, best_params = terms.total, step, params.copy()
        if step in snap_at:
            snapshots.append(Sketch.from_arrays(params, widths))
            snap_steps.append(step)
        if step == cfg.steps:
            break
        grad = backward(d_ink).ravel()
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient at step {step}")
        params = np.clip(adam.step(params, grad), COORD_MIN, COORD_MAX)
    return OptimizationResult(Sketch.from_arrays(best_params, widths),
                              GuidanceTrace(snapshots, snap_steps), history, best_step, init)


# -- persistence --------------------------------------------------------------------

def write_loss_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "L_geometric", "L_semantic", "L_percept"])
        for r in history:
            w.writerow([r.step, repr(r.geometric), repr(r.semantic), repr(r.percept)])


def read_loss_csv(path) -> list[LossRecord]:
    with open(path, newline="") as fh:
        return [LossRecord(int(row["step"]), float(row["L_geometric"]),
                           float(row["L_semantic"]), float(row["L_percept"]))
                for row in csv.DictReader(fh)]


BUNDLE_VERSION = "v1"


def distill_targets(trace: GuidanceTrace, contour: ContourImage, directory) -> Path:
    """Write a training bundle: ``contour.png`` plus ``trace.json``.

    Coordinates are stored as JSON floats, which round-trip exactly.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        contour.save_png(directory / "contour.png")
        doc = {
            "version": BUNDLE_VERSION,
            "contour": "contour.png",
            "step_indices": trace.step_indices,
            "snapshots": [s.to_dict() for s in trace.snapshots],
        }
        path = directory / "trace.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
    except OSError as exc:
        raise FreesketchError(f"cannot write trace bundle: {exc}") from None
    return path


def load_targets(directory) -> tuple[ContourImage, GuidanceTrace]:
    directory = Path(directory)
    try:
        doc = json.loads((directory / "trace.json").read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read trace bundle: {exc}") from None
    if doc.get("version") != BUNDLE_VERSION:
        raise InputError(f"unsupported bundle version {doc.get('version')!r}")
    contour = ContourImage.load_png(directory / doc["contour"])
    trace = GuidanceTrace([Sketch.from_dict(s) for s in doc["snapshots"]], doc["step_indices"])
    return contour, trace
