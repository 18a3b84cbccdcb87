"""Minimal transformer-encoder forward pass with activation capture.

Post-layer-norm blocks: attention -> residual -> norm -> feed-forward ->
residual -> norm. Weights are stored float32; every matrix product runs in
float64 so downstream tolerances stay tight. The feed-forward path is one
shared kernel, so a masked pass with an all-ones mask and unit scales is
bit-identical to the dense pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .container import ModelBundle, TokenBatch, read_tensor_file, write_tensor_file
from .errors import ValidationError
from .validation import check_finite

LN_EPS = 1e-12


def gelu(x):
    """Exact Gaussian-error GELU: x times the standard normal CDF of x."""
    x = np.asarray(x, dtype=np.float64)
    return x * ndtr(x)


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LN_EPS) * gain + bias


@dataclass
class FilterMask:
    """Binary keep/drop matrix over (layer, filter), plus per-filter scales."""

    mask: np.ndarray    # (L, N), entries in {0, 1}
    scales: np.ndarray  # (L, N), ignored where mask == 0

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.float64)
        self.scales = np.asarray(self.scales, dtype=np.float64)
        if self.mask.shape != self.scales.shape or self.mask.ndim != 2:
            raise ValidationError(
                f"mask shape {self.mask.shape} and scales shape "
                f"{self.scales.shape} must be equal and 2-d"
            )
        if not np.all((self.mask == 0.0) | (self.mask == 1.0)):
            raise ValidationError("mask entries must be 0 or 1")
        check_finite("mask scales", self.scales)

    @classmethod
    def all_ones(cls, num_layers: int, num_filters: int) -> "FilterMask":
        shape = (num_layers, num_filters)
        return cls(np.ones(shape), np.ones(shape))

    def active_counts(self) -> np.ndarray:
        return self.mask.sum(axis=1).astype(np.int64)

    def total_active(self) -> int:
        return int(self.mask.sum())

    def effective_row(self, layer: int) -> np.ndarray:
        """Per-filter multiplier applied to activation columns of one layer."""
        return self.mask[layer] * self.scales[layer]


@dataclass
class ActivationCapture:
    """Per-layer post-activation matrices from a dense forward pass.

    h1[l] holds the (T, N) activations of layer l at the T real token
    positions; y[l] holds the matching (T, d) dense feed-forward output
    without the final bias, i.e. h1[l] @ w2[l].
    """

    h1: list[np.ndarray]
    y: list[np.ndarray]
    token_count: int

    def __post_init__(self):
        if len(self.h1) != len(self.y):
            raise ValidationError("capture h1/y layer counts differ")
        for i, (h, y) in enumerate(zip(self.h1, self.y)):
            if h.shape[0] != self.token_count or y.shape[0] != self.token_count:
                raise ValidationError(f"capture layer {i} row count != token count")
            check_finite(f"capture.layer.{i}.h1", h)
            check_finite(f"capture.layer.{i}.y", y)

    @property
    def num_layers(self) -> int:
        return len(self.h1)


@dataclass
class ForwardResult:
    hidden: np.ndarray      # (S, W, d) float64 final hidden states
    real: np.ndarray        # (S, W) bool, True at non-padding positions
    capture: ActivationCapture | None = None

    def real_rows(self) -> np.ndarray:
        """Final hidden states at real positions, row-major (sequence, position)."""
        return self.hidden[self.real]


def _ffn(w1, b1, w2, b2, x, col_scale=None):
    """sigma(x w1 + b1) [* col_scale] w2 + b2; returns (output, activations)."""
    h = gelu(x @ w1 + b1)
    if col_scale is not None:
        h = h * col_scale
    return h @ w2 + b2, h


def _layer64(layer) -> dict[str, np.ndarray]:
    return {name: np.asarray(arr, dtype=np.float64)
            for name, arr in layer.tensors().items()}


def ffn_dense(layer, x: np.ndarray) -> np.ndarray:
    """Dense feed-forward output for a (T, d) input matrix."""
    lw = _layer64(layer)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != lw["w1"].shape[0]:
        raise ValidationError(
            f"input width {x.shape[-1]} != hidden_dim {lw['w1'].shape[0]}"
        )
    out, _ = _ffn(lw["w1"], lw["b1"], lw["w2"], lw["b2"], x)
    return out


def ffn_masked(layer, x: np.ndarray, mask_row: np.ndarray,
               scales_row: np.ndarray | None = None) -> np.ndarray:
    """Feed-forward restricted to masked filters, each scaled by its factor."""
    lw = _layer64(layer)
    x = np.asarray(x, dtype=np.float64)
    mask_row = np.asarray(mask_row, dtype=np.float64)
    n = lw["w1"].shape[1]
    if mask_row.shape != (n,):
        raise ValidationError(f"mask row has shape {mask_row.shape}, expected ({n},)")
    col = mask_row if scales_row is None else mask_row * np.asarray(scales_row, np.float64)
    out, _ = _ffn(lw["w1"], lw["b1"], lw["w2"], lw["b2"], x, col_scale=col)
    return out


def feature_map_loss(layer, h1: np.ndarray, mask_row: np.ndarray,
                     scales_row: np.ndarray | None = None) -> float:
    """Frobenius distance between dense and masked feed-forward outputs.

    Both outputs share the captured activations h1, so the bias and the
    attention stack cancel and the loss reduces to
    ||(h1 * (1 - m*s)) w2||_F over the captured tokens.
    """
    h1 = np.asarray(h1, dtype=np.float64)
    w2 = np.asarray(layer.w2, dtype=np.float64)
    if h1.shape[1] != w2.shape[0]:
        raise ValidationError(
            f"capture width {h1.shape[1]} != filter count {w2.shape[0]}"
        )
    col = np.asarray(mask_row, dtype=np.float64)
    if scales_row is not None:
        col = col * np.asarray(scales_row, dtype=np.float64)
    diff = (h1 * (1.0 - col)) @ w2
    return float(np.linalg.norm(diff))


def total_feature_map_loss(bundle: ModelBundle, capture: ActivationCapture,
                           mask: FilterMask) -> tuple[list[float], float]:
    """Per-layer losses and their sum across layers."""
    losses = [
        feature_map_loss(layer, capture.h1[i], mask.mask[i], mask.scales[i])
        for i, layer in enumerate(bundle.layers)
    ]
    return losses, float(sum(losses))


def forward(bundle: ModelBundle, batch: TokenBatch, capture: bool = False,
            mask: FilterMask | None = None) -> ForwardResult:
    """Run the encoder over a batch; optionally record activations.

    With ``mask`` set, every layer's feed-forward uses the masked kernel.
    Capture is only defined for the dense pass, and capture rows cover real
    token positions only, ordered by (sequence, position).
    """
    if capture and mask is not None:
        raise ValidationError("activation capture is defined for the dense pass only")
    batch.validate_against(bundle.config)
    cfg = bundle.config
    ids, real = batch.padded()
    n_seq, width = ids.shape
    heads = cfg.num_heads
    head_dim = cfg.hidden_dim // heads

    x = bundle.token_emb.astype(np.float64)[ids] + bundle.pos_emb.astype(np.float64)[:width]
    if bundle.segment_emb is not None:
        x = x + bundle.segment_emb.astype(np.float64)[0]
    x = layer_norm(x, bundle.emb_ln_gain.astype(np.float64),
                   bundle.emb_ln_bias.astype(np.float64))

    # keys at padding positions are unreachable; -inf keeps softmax exact
    key_bias = np.where(real, 0.0, -np.inf)[:, None, None, :]

    h1_rows: list[np.ndarray] = []
    y_rows: list[np.ndarray] = []
    for li, layer in enumerate(bundle.layers):
        lw = _layer64(layer)

        def split(a):
            return a.reshape(n_seq, width, heads, head_dim).transpose(0, 2, 1, 3)

        q = split(x @ lw["wq"] + lw["bq"])
        k = split(x @ lw["wk"] + lw["bk"])
        v = split(x @ lw["wv"] + lw["bv"])
        scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(head_dim) + key_bias
        scores -= scores.max(axis=-1, keepdims=True)
        weights = np.exp(scores)
        weights /= weights.sum(axis=-1, keepdims=True)
        ctx = (weights @ v).transpose(0, 2, 1, 3).reshape(n_seq, width, cfg.hidden_dim)
        x = layer_norm(x + ctx @ lw["wo"] + lw["bo"], lw["ln1_gain"], lw["ln1_bias"])

        col = mask.effective_row(li) if mask is not None else None
        ffn_out, h = _ffn(lw["w1"], lw["b1"], lw["w2"], lw["b2"], x, col_scale=col)
        if capture:
            # y is derived from the rounded h1 it is stored with, so the
            # rescale target and the loss reference agree exactly
            h32 = h[real].astype(np.float32)
            h1_rows.append(h32)
            y_rows.append(h32.astype(np.float64) @ lw["w2"])
        x = layer_norm(x + ffn_out, lw["ln2_gain"], lw["ln2_bias"])

    cap = None
    if capture:
        cap = ActivationCapture(h1=h1_rows, y=y_rows, token_count=int(real.sum()))
    return ForwardResult(hidden=x, real=real, capture=cap)


# ---------------------------------------------------------------------------
# Capture persistence
# ---------------------------------------------------------------------------

def save_capture(path: str | Path, capture: ActivationCapture,
                 model_hash: str = "", sample_hash: str = "") -> None:
    tensors = []
    for i in range(capture.num_layers):
        tensors.append((f"capture.layer.{i}.h1", capture.h1[i]))
        tensors.append((f"capture.layer.{i}.y", capture.y[i]))
    write_tensor_file(path, tensors, {"kind": "capture"})
    meta = {"T": capture.token_count, "model_hash": model_hash,
            "sample_hash": sample_hash}
    (Path(path) / "capture.meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_capture(path: str | Path) -> tuple[ActivationCapture, dict]:
    _, tensors = read_tensor_file(path)
    meta = json.loads((Path(path) / "capture.meta.json").read_text())
    h1, y = [], []
    i = 0
    while f"capture.layer.{i}.h1" in tensors:
        h1.append(tensors[f"capture.layer.{i}.h1"])
        y.append(tensors[f"capture.layer.{i}.y"])
        i += 1
    return ActivationCapture(h1=h1, y=y, token_count=int(meta["T"])), meta
