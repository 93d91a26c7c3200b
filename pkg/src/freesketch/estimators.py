"""scikit-learn style wrappers around the two stages.

``ViewSelector`` fits on the 26 contour views of a mesh and keeps the
deduplicated, most informative ones. ``GuidanceSketcher`` turns contour
images into optimized sketches; ``score`` is the mean IoU against them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .backends import make_backend
from .contour.selection import (DEDUP_THRESHOLD, complexity_score, hamming, perceptual_hash,
                                 select_views)
from .evaluation import sketch_vs_contour_metrics
from .losses import LossWeights
from .optimizer import OptimizerConfig, optimize_sketch
from .strokes import DEFAULT_WIDTH, RasterParams
from .validation import check_contours, check_stroke_count


class ViewSelector(BaseEstimator, TransformerMixin):
    def __init__(self, n_views=3, dedup_threshold=DEDUP_THRESHOLD):
        self.n_views = n_views
        self.dedup_threshold = dedup_threshold

    def fit(self, X, y=None):
        images = check_contours(X)
        if self.n_views < 1:
            raise ValueError("n_views must be >= 1")
        self.hashes_ = [perceptual_hash(im) for im in images]
        self.scores_ = np.array([complexity_score(im) for im in images])
        kept = []
        for i, h in enumerate(self.hashes_):
            if all(hamming(h, self.hashes_[k]) > self.dedup_threshold for k in kept):
                kept.append(i)
        self.kept_ = np.array(kept, dtype=int)
        chosen = select_views([images[i] for i in kept], self.n_views,
                              self.scores_[kept].tolist())
        index = {id(im): i for i, im in enumerate(images)}
        self.selected_ = np.array([index[id(im)] for im in chosen], dtype=int)
        self.n_features_in_ = len(images)
        return self

    def transform(self, X):
        check_is_fitted(self, "selected_")
        images = check_contours(X)
        if len(images) != self.n_features_in_:
            raise ValueError(f"fitted on {self.n_features_in_} views, got {len(images)}")
        return [images[i] for i in self.selected_]


class GuidanceSketcher(BaseEstimator, TransformerMixin):
    def __init__(self, n_strokes=16, steps=1000, learning_rate=0.0045, width=DEFAULT_WIDTH,
                 tau=1.0, samples_per_curve=32, composite="soft_over", beta_s=0.1,
                 beta_h=0.8, backend="default", random_state=0):
        self.n_strokes = n_strokes
        self.steps = steps
        self.learning_rate = learning_rate
        self.width = width
        self.tau = tau
        self.samples_per_curve = samples_per_curve
        self.composite = composite
        self.beta_s = beta_s
        self.beta_h = beta_h
        self.backend = backend
        self.random_state = random_state

    def _raster(self):
        return RasterParams(self.tau, self.samples_per_curve, self.composite)

    def _config(self, index):
        return OptimizerConfig(steps=self.steps, learning_rate=self.learning_rate,
                               rng_seed=int(self.random_state) + index, width=self.width,
                               raster=self._raster(),
                               weights=LossWeights(self.beta_s, self.beta_h))

    def fit(self, X, y=None):
        """Optimize one sketch per contour; results kept on the estimator."""
        contours = check_contours(X)
        n = check_stroke_count(self.n_strokes)
        backend = make_backend(self.backend)
        results = [optimize_sketch(c, n, self._config(i), backend)
                   for i, c in enumerate(contours)]
        self.sketches_ = [r.sketch for r in results]
        self.traces_ = [r.trace for r in results]
        self.loss_history_ = [np.array([h.percept for h in r.history]) for r in results]
        self.contours_ = contours
        return self

    def transform(self, X=None):
        """Sketches for the fitted contours (refits when ``X`` differs)."""
        if X is not None:
            contours = check_contours(X)
            if not hasattr(self, "contours_") or contours != self.contours_:
                self.fit(contours)
        check_is_fitted(self, "sketches_")
        return list(self.sketches_)

    def score(self, X, y=None):
        """Mean IoU of the fitted sketches against ``X``."""
        check_is_fitted(self, "sketches_")
        contours = check_contours(X)
        if len(contours) != len(self.sketches_):
            raise ValueError("X must match the fitted contours")
        return float(np.mean([sketch_vs_contour_metrics(s, c, self._raster()).iou
                              for s, c in zip(self.sketches_, contours)]))
