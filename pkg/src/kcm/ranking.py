"""Score tables, ranking strategies, the FLOPs cost model, and mask building.

A score table is an (L, N) matrix of per-filter importance values. Any
strategy may fill it; the mask builder only ever sees the table, so every
strategy shares one global top-k path with a deterministic tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .container import ModelBundle, ModelConfig
from .encoder import ActivationCapture, FilterMask
from .errors import InfeasibleBudgetError, ValidationError
from .validation import check_fraction, check_positive_int

if TYPE_CHECKING:  # pragma: no cover
    from .hull import KernelParams

STRATEGIES = ("r2d2", "r2_only", "d2_only", "weight_magnitude", "output_magnitude")
CAPTURE_STRATEGIES = ("r2d2", "d2_only", "output_magnitude")


@dataclass
class ScoreTable:
    scores: np.ndarray                        # (L, N) float64
    strategy: str
    sample_count: int | None = None
    kernel_params: "KernelParams | None" = None
    iterations: list[int] | None = None
    converged: list[bool] | None = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise ValidationError("score table must be 2-d (layers x filters)")
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("score table contains non-finite values")
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape


def _normalize_rows(table: np.ndarray) -> np.ndarray:
    """Divide each row by its max; all-zero rows stay zero."""
    peaks = table.max(axis=1, keepdims=True)
    safe = np.where(peaks > 0, peaks, 1.0)
    return table / safe


def activation_magnitude(capture: ActivationCapture) -> np.ndarray:
    """(L, N) mean absolute activation per filter over captured tokens."""
    if capture.token_count < 1:
        raise ValidationError("capture holds no tokens")
    return np.stack([
        np.abs(h.astype(np.float64)).mean(axis=0) for h in capture.h1
    ])


def d2_scores(capture: ActivationCapture) -> ScoreTable:
    """Activation-statistics ranking, max-normalized within each layer."""
    raw = activation_magnitude(capture)
    return ScoreTable(scores=_normalize_rows(raw), strategy="d2_only",
                      sample_count=capture.token_count)


def merge_r2d2(r2: ScoreTable, d2: ScoreTable, normalize_r2: bool = False) -> ScoreTable:
    """Per-layer product of raw hull scores with normalized activation scores.

    Normalizing the activation table is idempotent, so an already-normalized
    d2 table passes through unchanged. The optional normalize_r2 flag also
    max-normalizes the hull scores per layer before the product, for
    cross-layer comparability experiments; it is off by default.
    """
    if r2.shape != d2.shape:
        raise ValidationError(
            f"score tables disagree: {r2.shape} vs {d2.shape}"
        )
    left = _normalize_rows(r2.scores) if normalize_r2 else r2.scores
    merged = left * _normalize_rows(d2.scores)
    return ScoreTable(
        scores=merged,
        strategy="r2d2",
        sample_count=d2.sample_count,
        kernel_params=r2.kernel_params,
        iterations=r2.iterations,
        converged=r2.converged,
    )


def weight_magnitude_scores(bundle: ModelBundle) -> ScoreTable:
    """L1 norm of each filter's first-projection column and second-projection row."""
    rows = []
    for layer in bundle.layers:
        w1 = np.abs(layer.w1.astype(np.float64)).sum(axis=0)
        w2 = np.abs(layer.w2.astype(np.float64)).sum(axis=1)
        rows.append(w1 + w2)
    return ScoreTable(scores=np.stack(rows), strategy="weight_magnitude")


def baseline_scores(strategy: str, bundle: ModelBundle,
                    capture: ActivationCapture | None = None,
                    params: "KernelParams | None" = None,
                    normalize_r2: bool = False) -> ScoreTable:
    """Score table for any strategy name, including the merged default."""
    if strategy not in STRATEGIES:
        raise ValidationError(
            f"unknown strategy {strategy!r}; expected one of {STRATEGIES}"
        )
    if strategy in CAPTURE_STRATEGIES and capture is None:
        raise ValidationError(f"strategy {strategy!r} requires an activation capture")
    if strategy == "weight_magnitude":
        return weight_magnitude_scores(bundle)
    if strategy == "output_magnitude":
        return ScoreTable(scores=activation_magnitude(capture),
                          strategy="output_magnitude",
                          sample_count=capture.token_count)
    if strategy == "d2_only":
        return d2_scores(capture)

    from .hull import r2_scores  # deferred: hull depends on this module

    if strategy == "r2_only":
        return r2_scores(bundle, params)
    return merge_r2d2(r2_scores(bundle, params), d2_scores(capture),
                      normalize_r2=normalize_r2)


# ---------------------------------------------------------------------------
# FLOPs cost model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlopsModel:
    """Multiply-add FLOPs (x2) of the attention stack and of single filters.

    Per layer and sequence: the four d-by-d projections cost 8 d^2 s and the
    attention score/value products cost 4 d s^2. Each retained filter adds
    two length-d dot products per token, 4 d s. Norms, softmax, and bias adds
    are identical for every mask and are left out of the ratio.
    """

    num_layers: int
    hidden_dim: int
    num_filters: int
    seq_len: int

    @classmethod
    def for_config(cls, config: ModelConfig, seq_len: int) -> "FlopsModel":
        check_positive_int("seq_len", seq_len)
        return cls(config.num_layers, config.hidden_dim, config.num_filters, seq_len)

    @property
    def per_layer_attention(self) -> int:
        d, s = self.hidden_dim, self.seq_len
        return 8 * d * d * s + 4 * d * s * s

    @property
    def per_filter(self) -> int:
        return 4 * self.hidden_dim * self.seq_len

    @property
    def dense_total(self) -> int:
        return self.num_layers * (
            self.per_layer_attention + self.num_filters * self.per_filter
        )

    def total(self, retained: list[int] | np.ndarray) -> int:
        retained = [int(n) for n in retained]
        if len(retained) != self.num_layers:
            raise ValidationError(
                f"retained counts {len(retained)} != num_layers {self.num_layers}"
            )
        for i, n in enumerate(retained):
            if n < 0 or n > self.num_filters:
                raise ValidationError(
                    f"retained[{i}]={n} outside [0, {self.num_filters}]"
                )
        return sum(self.per_layer_attention + n * self.per_filter for n in retained)


def flops_of(config: ModelConfig, retained: list[int] | np.ndarray, seq_len: int) -> int:
    return FlopsModel.for_config(config, seq_len).total(retained)


def budget_to_k(config: ModelConfig, seq_len: int, flops_fraction: float) -> int:
    """Largest total filter count whose FLOPs stay within the budget."""
    flops_fraction = check_fraction("flops_fraction", flops_fraction)
    if flops_fraction <= 0.0:
        raise ValidationError("flops_fraction must be positive")
    model = FlopsModel.for_config(config, seq_len)
    budget = flops_fraction * model.dense_total
    floor = model.num_layers * model.per_layer_attention
    if budget < floor:
        raise InfeasibleBudgetError(budget, floor)
    limit = model.num_layers * config.num_filters
    k = min(int((budget - floor) // model.per_filter), limit)
    # float rounding guard: settle on the exact boundary
    while k > 0 and floor + k * model.per_filter > budget:
        k -= 1
    while k < limit and floor + (k + 1) * model.per_filter <= budget:
        k += 1
    return k


def select_topk(table: ScoreTable, k: int) -> FilterMask:
    """Keep the k best-scoring filters across all layers.

    Scores are sorted descending; exact ties fall back to the smaller layer
    index, then the smaller filter index (a stable sort over the flattened
    table gives exactly that order).
    """
    num_layers, num_filters = table.shape
    limit = num_layers * num_filters
    if not (0 <= k <= limit):
        raise ValidationError(f"k={k} outside [0, {limit}]")
    flat = table.scores.reshape(-1)
    order = np.argsort(-flat, kind="stable")
    mask = np.zeros(limit, dtype=np.float64)
    mask[order[:k]] = 1.0
    mask = mask.reshape(num_layers, num_filters)
    return FilterMask(mask=mask, scales=np.ones_like(mask))
