"""Least-squares rescaling of surviving filters and physical compaction.

Masking perturbs each layer's feed-forward output; a diagonal rescale of the
surviving filters is the cheapest repair. With u_i the captured activation
column of filter i and v_i its output row, the best scales solve

    min_s || sum_{i in A} s_i u_i v_i^T  -  Y ||_F^2  +  ridge ||s - 1||^2

whose normal equations factor as G[i,j] = (u_i . u_j)(v_i . v_j). The ridge
is anchored at unit scales so degenerate statistics degrade toward plain
masking instead of zeroing filters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .container import LayerWeights, ModelBundle, ModelConfig, TokenBatch
from .encoder import ActivationCapture, FilterMask, forward
from .errors import ValidationError
from .parallel import map_ordered

FALLBACK_RIDGE_FACTOR = 1e-8


@dataclass
class ScaleFit:
    scales: np.ndarray          # one factor per active filter
    active: np.ndarray          # filter indices the scales belong to
    ridge: float
    residual_before: float      # feature-map loss at unit scales
    residual_after: float       # feature-map loss at fitted scales
    used_fallback: bool = False
    effective_ridge: float = 0.0


def fit_scales(layer: LayerWeights, h1: np.ndarray, y: np.ndarray,
               active: np.ndarray, ridge: float = 0.0) -> ScaleFit:
    """Closed-form diagonal rescale of the active filters of one layer."""
    active = np.asarray(active, dtype=np.int64)
    if active.size < 1:
        raise ValidationError("active set must hold at least one filter")
    if h1.shape[0] < 1:
        raise ValidationError("capture holds no tokens")
    if not (np.isfinite(ridge) and ridge >= 0):
        raise ValidationError(f"ridge must be nonnegative, got {ridge!r}")

    acts = h1.astype(np.float64)[:, active]            # (T, a)
    rows = layer.w2.astype(np.float64)[active, :]      # (a, d)
    target = y.astype(np.float64)                      # (T, d)

    gram = (acts.T @ acts) * (rows @ rows.T)
    rhs = ((acts.T @ target) * rows).sum(axis=1)

    def solve(lam: float) -> np.ndarray:
        lhs = gram if lam == 0.0 else gram + lam * np.eye(gram.shape[0])
        b = rhs if lam == 0.0 else rhs + lam
        return cho_solve(cho_factor(lhs, lower=True), b)

    used_fallback = False
    effective = ridge
    try:
        scales = solve(ridge)
        if not np.all(np.isfinite(scales)):
            raise LinAlgError("non-finite solution")
    except (LinAlgError, np.linalg.LinAlgError):
        effective = FALLBACK_RIDGE_FACTOR * float(np.mean(np.diag(gram)))
        used_fallback = True
        if effective > 0:
            scales = solve(effective)
            if not np.all(np.isfinite(scales)):
                scales = np.ones(active.size)
        else:
            # all active activations vanished; any scale is a minimizer
            scales = np.ones(active.size)

    before = float(np.linalg.norm(acts @ rows - target))
    after = float(np.linalg.norm((acts * scales) @ rows - target))
    return ScaleFit(scales=scales, active=active, ridge=ridge,
                    residual_before=before, residual_after=after,
                    used_fallback=used_fallback, effective_ridge=effective)


def fit_all_scales(bundle: ModelBundle, capture: ActivationCapture,
                   mask: FilterMask, ridge: float = 0.0
                   ) -> tuple[FilterMask, list[ScaleFit | None]]:
    """Fit every layer independently; returns the mask with scales filled in.

    Layers whose mask keeps nothing have no scales to fit and keep the
    defaults; their fit entry is None.
    """
    if mask.mask.shape[0] != len(bundle.layers):
        raise ValidationError("mask layer count does not match the model")

    def fit_layer(index: int) -> ScaleFit | None:
        active = np.flatnonzero(mask.mask[index])
        if active.size == 0:
            return None
        return fit_scales(bundle.layers[index], capture.h1[index],
                          capture.y[index], active, ridge)

    fits = map_ordered(fit_layer, range(len(bundle.layers)))
    scales = np.ones_like(mask.scales)
    for index, fit in enumerate(fits):
        if fit is not None:
            scales[index, fit.active] = fit.scales
    return FilterMask(mask=mask.mask.copy(), scales=scales), fits


def apply_prune(bundle: ModelBundle, mask: FilterMask) -> ModelBundle:
    """Delete masked filters and fold scales into the surviving output rows."""
    cfg = bundle.config
    if cfg.per_layer_filters is not None:
        raise ValidationError("model is already pruned")
    if mask.mask.shape != (cfg.num_layers, cfg.num_filters):
        raise ValidationError(
            f"mask shape {mask.mask.shape} does not match "
            f"({cfg.num_layers}, {cfg.num_filters})"
        )
    new_layers = []
    counts = []
    for i, layer in enumerate(bundle.layers):
        active = np.flatnonzero(mask.mask[i])
        scales = mask.scales[i, active]
        if not np.all(np.isfinite(scales)):
            raise ValidationError(f"layer {i} is missing scales for active filters")
        counts.append(int(active.size))
        w2 = layer.w2[active, :].astype(np.float64) * scales[:, None]
        new_layers.append(replace(
            layer,
            w1=np.ascontiguousarray(layer.w1[:, active]),
            b1=np.ascontiguousarray(layer.b1[active]),
            w2=np.ascontiguousarray(w2.astype(np.float32)),
        ))
    pruned = ModelBundle(
        config=ModelConfig(
            num_layers=cfg.num_layers,
            hidden_dim=cfg.hidden_dim,
            num_filters=cfg.num_filters,
            num_heads=cfg.num_heads,
            vocab_size=cfg.vocab_size,
            max_seq_len=cfg.max_seq_len,
            activation=cfg.activation,
            per_layer_filters=tuple(counts),
        ),
        token_emb=bundle.token_emb,
        pos_emb=bundle.pos_emb,
        emb_ln_gain=bundle.emb_ln_gain,
        emb_ln_bias=bundle.emb_ln_bias,
        layers=new_layers,
        segment_emb=bundle.segment_emb,
    )
    pruned.validate()
    return pruned


def verify_equivalence(original: ModelBundle, mask: FilterMask,
                       pruned: ModelBundle, batch: TokenBatch) -> float:
    """Max-abs deviation of final hidden states, original vs pruned model.

    Both models share everything except the feed-forward filters, so the
    returned deviation isolates the pruning substitution. Only real token
    positions are compared.
    """
    if pruned.config.per_layer_filters is None:
        raise ValidationError("second model does not look pruned")
    expected = [int(n) for n in mask.active_counts()]
    got = list(pruned.config.per_layer_filters)
    if expected != got:
        raise ValidationError(
            f"mask keeps {expected} filters per layer but the pruned "
            f"model has {got}"
        )
    dense = forward(original, batch).real_rows()
    compact = forward(pruned, batch).real_rows()
    return float(np.max(np.abs(dense - compact))) if dense.size else 0.0
