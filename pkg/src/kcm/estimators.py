"""Estimator-style wrappers over the core pipeline.

Both classes follow the fit/transform convention with get_params/set_params
from sklearn, so they clone and compose with standard tooling. The heavy
lifting stays in :mod:`kcm.hull` and :mod:`kcm.pruner`.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

import numpy as np

from .container import ModelBundle, TokenBatch
from .hull import KernelParams, gaussian_kernel, kcha_iterate
from .pruner import run_prune
from .rescale import apply_prune
from .validation import as_matrix


class KernelHullScorer(BaseEstimator):
    """Fit on an (n_points, n_dims) array; read per-point extremeness scores.

    After fit: ``scores_`` (one value per point, higher means harder to
    represent by the others), ``n_iter_``, ``final_delta_``, ``converged_``.
    """

    def __init__(self, width: float = 1.0, alpha: float = 0.01,
                 max_iters: int = 200, floor: float = 1e-12):
        self.width = width
        self.alpha = alpha
        self.max_iters = max_iters
        self.floor = floor

    def fit(self, X, y=None):
        params = KernelParams(self.width, self.alpha, self.max_iters, self.floor)
        result = kcha_iterate(gaussian_kernel(as_matrix("X", X), params.width), params)
        self.scores_ = result.scores
        self.n_iter_ = result.iterations
        self.final_delta_ = result.final_delta
        self.converged_ = result.converged
        return self

    def top_indices(self, count: int) -> np.ndarray:
        """Indices of the count highest-scoring points, ties by position."""
        if not hasattr(self, "scores_"):
            raise NotFittedError("call fit before top_indices")
        order = np.argsort(-self.scores_, kind="stable")
        return order[:count]


class FilterPruner(BaseEstimator):
    """Estimator facade over the pipeline: fit on (model, samples), transform
    a model into its compacted form.

    Parameters mirror the command-line surface; after ``fit`` the learned
    mask, per-filter scales, and the full report hang off the instance.
    """

    def __init__(self, flops: float = 0.6, strategy: str = "r2d2",
                 kernel_width: float = 1.0, alpha: float = 0.01,
                 max_iters: int = 200, num_samples: int = 2000,
                 ridge: float = 0.0, seed: int = 0, normalize_r2: bool = False):
        self.flops = flops
        self.strategy = strategy
        self.kernel_width = kernel_width
        self.alpha = alpha
        self.max_iters = max_iters
        self.num_samples = num_samples
        self.ridge = ridge
        self.seed = seed
        self.normalize_r2 = normalize_r2

    def fit(self, model: ModelBundle, samples: TokenBatch) -> "FilterPruner":
        pruned, mask, report = run_prune(
            model, samples,
            flops=self.flops, strategy=self.strategy,
            kernel_width=self.kernel_width, alpha=self.alpha,
            max_iters=self.max_iters, num_samples=self.num_samples,
            ridge=self.ridge, seed=self.seed, normalize_r2=self.normalize_r2,
        )
        self.mask_ = mask
        self.report_ = report
        self.pruned_ = pruned
        return self

    def transform(self, model: ModelBundle) -> ModelBundle:
        if not hasattr(self, "mask_"):
            raise NotFittedError("call fit before transform")
        return apply_prune(model, self.mask_)

    def fit_transform(self, model: ModelBundle, samples: TokenBatch) -> ModelBundle:
        self.fit(model, samples)
        return self.pruned_
