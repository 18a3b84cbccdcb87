"""End-to-end pruning pipeline: capture, score, budget, mask, rescale,
compact. Pure given (model, samples, parameters); the estimator facade in
:mod:`kcm.estimators` wraps :func:`run_prune` for fit/transform use.
"""

from __future__ import annotations

import time

import numpy as np

from .container import ModelBundle, TokenBatch
from .encoder import FilterMask, forward, total_feature_map_loss
from .errors import ValidationError
from .hull import KernelParams
from .ranking import FlopsModel, baseline_scores, budget_to_k, select_topk
from .rescale import apply_prune, fit_all_scales
from .report import PruneReport


def run_prune(bundle: ModelBundle, batch: TokenBatch, *,
              flops: float = 0.6,
              strategy: str = "r2d2",
              kernel_width: float = 1.0,
              alpha: float = 0.01,
              max_iters: int = 200,
              num_samples: int = 2000,
              ridge: float = 0.0,
              seed: int = 0,
              normalize_r2: bool = False,
              ) -> tuple[ModelBundle, FilterMask, PruneReport]:
    """Prune one model; returns (compacted model, fitted mask, report)."""
    bundle.validate()
    if bundle.config.per_layer_filters is not None:
        raise ValidationError("model is already pruned")
    sub = batch.take(min(num_samples, batch.num_sequences))
    sub.validate_against(bundle.config)
    params = KernelParams(width=kernel_width, alpha=alpha, max_iters=max_iters)
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    capture = forward(bundle, sub, capture=True).capture
    timings["capture"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    table = baseline_scores(strategy, bundle, capture, params=params,
                            normalize_r2=normalize_r2)
    timings["scores"] = time.perf_counter() - t0

    seq_len = sub.max_len
    k = budget_to_k(bundle.config, seq_len, flops)
    mask = select_topk(table, k)

    t0 = time.perf_counter()
    losses_before, total_before = total_feature_map_loss(bundle, capture, mask)
    fitted_mask, fits = fit_all_scales(bundle, capture, mask, ridge=ridge)
    losses_after, total_after = total_feature_map_loss(bundle, capture, fitted_mask)
    timings["scale_fit"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pruned = apply_prune(bundle, fitted_mask)
    timings["compact"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    counts = [int(n) for n in fitted_mask.active_counts()]
    flops_model = FlopsModel.for_config(bundle.config, seq_len)
    report = PruneReport(
        strategy=strategy,
        flops_budget=float(flops),
        achieved_flops_fraction=flops_model.total(counts) / flops_model.dense_total,
        k=k,
        per_layer_retained=counts,
        per_layer_loss_before=[float(x) for x in losses_before],
        per_layer_loss_after=[float(x) for x in losses_after],
        total_loss_before=float(total_before),
        total_loss_after=float(total_after),
        sample_count=capture.token_count,
        seq_len=seq_len,
        seed=seed,
        ridge=float(ridge),
        kernel_width=params.width if strategy in ("r2d2", "r2_only") else None,
        alpha=params.alpha if strategy in ("r2d2", "r2_only") else None,
        kcha_iterations=table.iterations,
        kcha_converged=table.converged,
        scale_fallback_layers=[
            i for i, f in enumerate(fits) if f is not None and f.used_fallback
        ],
        timings_s={name: round(value, 6) for name, value in timings.items()},
    )
    return pruned, fitted_mask, report


def _match_filters(original_layer, pruned_layer, layer_index: int) -> np.ndarray:
    """Original filter index of each surviving filter, via exact column match.

    Compaction copies first-projection columns and biases verbatim, so byte
    equality identifies survivors; duplicate filters are consumed in order,
    which is loss-equivalent since duplicates share activation columns.
    """
    pools: dict[bytes, list[int]] = {}
    for i in range(original_layer.w1.shape[1]):
        key = original_layer.w1[:, i].tobytes() + original_layer.b1[i].tobytes()
        pools.setdefault(key, []).append(i)
    taken: dict[bytes, int] = {}
    matched = []
    for j in range(pruned_layer.w1.shape[1]):
        key = pruned_layer.w1[:, j].tobytes() + pruned_layer.b1[j].tobytes()
        pool = pools.get(key, [])
        used = taken.get(key, 0)
        if used >= len(pool):
            raise ValidationError(
                f"layer {layer_index}: pruned filter {j} has no counterpart "
                "in the original model"
            )
        matched.append(pool[used])
        taken[key] = used + 1
    return np.asarray(matched, dtype=np.int64)


def evaluate_pair(original: ModelBundle, pruned: ModelBundle, batch: TokenBatch,
                  num_samples: int = 2000) -> dict:
    """Layer-wise losses, output deviation, and FLOPs fraction of a pruned model."""
    original.validate()
    pruned.validate()
    oc, pc = original.config, pruned.config
    if (oc.num_layers, oc.hidden_dim) != (pc.num_layers, pc.hidden_dim):
        raise ValidationError(
            f"models disagree on (layers, hidden_dim): "
            f"({oc.num_layers}, {oc.hidden_dim}) vs ({pc.num_layers}, {pc.hidden_dim})"
        )
    if oc.per_layer_filters is not None:
        raise ValidationError("first model must be unpruned")
    sub = batch.take(min(num_samples, batch.num_sequences))
    sub.validate_against(oc)

    dense = forward(original, sub, capture=True)
    capture = dense.capture
    losses = []
    for li, (olayer, player) in enumerate(zip(original.layers, pruned.layers)):
        matched = _match_filters(olayer, player, li)
        acts = capture.h1[li].astype(np.float64)[:, matched]
        approx = acts @ player.w2.astype(np.float64)
        losses.append(float(np.linalg.norm(approx - capture.y[li])))

    compact = forward(pruned, sub)
    deviation = float(np.max(np.abs(dense.real_rows() - compact.real_rows())))

    seq_len = sub.max_len
    flops_model = FlopsModel.for_config(oc, seq_len)
    counts = [pc.filters_in_layer(i) for i in range(pc.num_layers)]
    return {
        "per_layer_loss": losses,
        "total_loss": float(sum(losses)),
        "hidden_state_deviation": deviation,
        "achieved_flops_fraction": flops_model.total(counts) / flops_model.dense_total,
        "per_layer_retained": counts,
        "sample_count": capture.token_count,
        "seq_len": seq_len,
    }


def run_ablation(bundle: ModelBundle, batch: TokenBatch, *,
                 budgets: list[float], strategies: list[str],
                 kernel_width: float = 1.0, alpha: float = 0.01,
                 max_iters: int = 200, num_samples: int = 2000,
                 ridge: float = 0.0, normalize_r2: bool = False) -> list[dict]:
    """Loss sweep over (strategy, budget); scores computed once per strategy."""
    if not strategies:
        raise ValidationError("at least one strategy is required")
    if not budgets:
        raise ValidationError("at least one FLOPs budget is required")
    bundle.validate()
    sub = batch.take(min(num_samples, batch.num_sequences))
    sub.validate_against(bundle.config)
    params = KernelParams(width=kernel_width, alpha=alpha, max_iters=max_iters)
    capture = forward(bundle, sub, capture=True).capture
    seq_len = sub.max_len

    rows = []
    for strategy in strategies:
        table = baseline_scores(strategy, bundle, capture, params=params,
                                normalize_r2=normalize_r2)
        for budget in sorted(budgets):
            k = budget_to_k(bundle.config, seq_len, budget)
            mask = select_topk(table, k)
            fitted, _ = fit_all_scales(bundle, capture, mask, ridge=ridge)
            _, total_before = total_feature_map_loss(bundle, capture, mask)
            _, total_after = total_feature_map_loss(bundle, capture, fitted)
            rows.append({
                "strategy": strategy,
                "flops": float(budget),
                "k": k,
                "total_loss_unscaled": float(total_before),
                "total_loss": float(total_after),
                "per_layer_retained": [int(n) for n in fitted.active_counts()],
            })
    return rows
