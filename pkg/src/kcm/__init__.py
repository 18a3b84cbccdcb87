"""Gradient-free structured pruning of transformer feed-forward filters."""

from .container import (LAYER_TENSOR_NAMES, LayerWeights, ModelBundle,
                        ModelConfig, TokenBatch, batch_file_hash,
                        container_hash, duplicate_groups, read_container,
                        read_token_batch, synth_batch, synth_model,
                        write_container, write_token_batch)
from .encoder import (ActivationCapture, FilterMask, ForwardResult,
                      feature_map_loss, ffn_dense, ffn_masked, forward, gelu,
                      load_capture, save_capture, total_feature_map_loss)
from .errors import InfeasibleBudgetError, ValidationError
from .hull import (KchaResult, KernelParams, gaussian_kernel, kcha_iterate,
                   r2_scores, seminmf_update)
from .pruner import evaluate_pair, run_ablation, run_prune
from .ranking import (STRATEGIES, FlopsModel, ScoreTable, baseline_scores,
                      budget_to_k, d2_scores, flops_of, merge_r2d2,
                      select_topk, weight_magnitude_scores)
from .report import PruneReport
from .rescale import (ScaleFit, apply_prune, fit_all_scales, fit_scales,
                      verify_equivalence)

__version__ = "0.1.0"


def __getattr__(name):
    # the estimator module pulls in sklearn; load it only when asked for
    if name in ("FilterPruner", "KernelHullScorer"):
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "ActivationCapture", "FilterMask", "FilterPruner", "FlopsModel",
    "ForwardResult", "InfeasibleBudgetError", "KchaResult",
    "KernelHullScorer", "KernelParams", "LAYER_TENSOR_NAMES", "LayerWeights",
    "ModelBundle", "ModelConfig", "PruneReport", "STRATEGIES", "ScaleFit",
    "ScoreTable", "TokenBatch", "ValidationError", "apply_prune",
    "baseline_scores", "batch_file_hash", "budget_to_k", "container_hash",
    "d2_scores", "duplicate_groups", "evaluate_pair", "feature_map_loss",
    "ffn_dense", "ffn_masked", "fit_all_scales", "fit_scales", "flops_of",
    "forward", "gaussian_kernel", "gelu", "kcha_iterate", "load_capture",
    "merge_r2d2", "r2_scores", "read_container", "read_token_batch",
    "run_ablation", "run_prune", "save_capture", "select_topk", "seminmf_update",
    "synth_batch", "synth_model", "total_feature_map_loss",
    "verify_equivalence", "weight_magnitude_scores", "write_container",
    "write_token_batch",
]
