"""Filter ranking by kernelized convex-hull approximation.

Each layer's second projection is read as a point cloud: one point per
filter, one row of the (N, d) matrix. A nonnegative self-representation
matrix C is driven to a fixed point of the multiplicative update

    C <- C * sqrt(K / (K C))        (elementwise product, ratio, and sqrt)

where K is the Gaussian kernel of the points. Diagonal entries of C grow
fastest for points that other points cannot represent, so diag(C) ranks
extremeness without ever computing an exact hull.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import ModelBundle
from .errors import ValidationError
from .parallel import map_ordered
from .ranking import ScoreTable
from .validation import as_matrix, check_positive_int


@dataclass(frozen=True)
class KernelParams:
    width: float = 1.0
    alpha: float = 0.01
    max_iters: int = 200
    floor: float = 1e-12

    def __post_init__(self):
        if not (np.isfinite(self.width) and self.width > 0):
            raise ValidationError(f"kernel width must be positive, got {self.width!r}")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValidationError(f"alpha must be positive, got {self.alpha!r}")
        check_positive_int("max_iters", self.max_iters)
        if not (np.isfinite(self.floor) and self.floor > 0):
            raise ValidationError(f"floor must be positive, got {self.floor!r}")


@dataclass
class KchaResult:
    scores: np.ndarray
    iterations: int
    final_delta: float
    converged: bool


def gaussian_kernel(points: np.ndarray, width: float) -> np.ndarray:
    """K[i, j] = exp(-||p_i - p_j||^2 / (2 width^2)), unit diagonal."""
    if not (np.isfinite(width) and width > 0):
        raise ValidationError(f"kernel width must be positive, got {width!r}")
    pts = as_matrix("kernel points", points)
    sq = np.einsum("ij,ij->i", pts, pts)
    dist2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(dist2, 0.0, out=dist2)
    kernel = np.exp(dist2 / (-2.0 * width * width))
    np.fill_diagonal(kernel, 1.0)
    return kernel


def seminmf_update(gram: np.ndarray, coeff: np.ndarray,
                   floor: float = 1e-12) -> np.ndarray:
    """One multiplicative update of the nonnegative self-representation.

    The gram matrix is split into nonnegative parts P = (gram + |gram|)/2
    and Q = (|gram| - gram)/2, and the step is

        C' = C * sqrt((P + Q C) / (Q + P C))

    with the denominator floored to stay away from zero. For an entrywise
    positive gram matrix Q vanishes and the step reduces to
    C * sqrt(gram / (gram C)).
    """
    gram = as_matrix("gram", gram)
    coeff = as_matrix("coefficients", coeff)
    if gram.shape != coeff.shape or gram.shape[0] != gram.shape[1]:
        raise ValidationError(
            f"gram {gram.shape} and coefficients {coeff.shape} must be "
            "square and equal-shaped"
        )
    if np.any(coeff < 0):
        raise ValidationError("coefficients must be nonnegative")
    mag = np.abs(gram)
    pos = (gram + mag) / 2.0
    neg = (mag - gram) / 2.0
    num = pos + neg @ coeff
    den = np.maximum(neg + pos @ coeff, floor)
    return coeff * np.sqrt(num / den)


def kcha_iterate(kernel: np.ndarray, params: KernelParams) -> KchaResult:
    """Run the positive-kernel update to convergence from the uniform start.

    Starting at C = 1/N everywhere, the loop applies
    C <- C * sqrt(K / (K C)) until the relative step
    sum|C_next - C| / sum C drops to params.alpha, or params.max_iters is
    hit, in which case the result is flagged non-converged and the last
    iterate's diagonal is still returned.
    """
    kernel = as_matrix("kernel", kernel)
    n = kernel.shape[0]
    if kernel.shape != (n, n):
        raise ValidationError(f"kernel must be square, got {kernel.shape}")
    if np.any(kernel <= 0):
        raise ValidationError("kernel entries must be positive")
    coeff = np.full((n, n), 1.0 / n)
    delta = np.inf
    for iteration in range(1, params.max_iters + 1):
        denom = np.maximum(kernel @ coeff, params.floor)
        nxt = coeff * np.sqrt(kernel / denom)
        delta = float(np.abs(nxt - coeff).sum() / coeff.sum())
        coeff = nxt
        if delta <= params.alpha:
            return KchaResult(np.diag(coeff).copy(), iteration, delta, True)
    return KchaResult(np.diag(coeff).copy(), params.max_iters, delta, False)


def r2_scores(bundle: ModelBundle, params: KernelParams | None = None) -> ScoreTable:
    """Extremeness scores of every filter, one independent run per layer."""
    if bundle.config.per_layer_filters is not None:
        raise ValidationError("representative ranking expects an unpruned model")
    params = params or KernelParams()

    def score_layer(layer) -> KchaResult:
        kernel = gaussian_kernel(np.asarray(layer.w2, dtype=np.float64), params.width)
        return kcha_iterate(kernel, params)

    results = map_ordered(score_layer, bundle.layers)
    table = np.stack([r.scores for r in results])
    return ScoreTable(
        scores=table,
        strategy="r2_only",
        kernel_params=params,
        iterations=[r.iterations for r in results],
        converged=[r.converged for r in results],
    )
