"""Versioned audit report emitted by the pruning pipeline.

Everything in the report is reproducible from the inputs except the
``timings_s`` block, which tests and hashes must ignore.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class PruneReport:
    strategy: str
    flops_budget: float
    achieved_flops_fraction: float
    k: int
    per_layer_retained: list[int]
    per_layer_loss_before: list[float]
    per_layer_loss_after: list[float]
    total_loss_before: float
    total_loss_after: float
    sample_count: int
    seq_len: int
    seed: int
    ridge: float
    kernel_width: float | None = None
    alpha: float | None = None
    kcha_iterations: list[int] | None = None
    kcha_converged: list[bool] | None = None
    scale_fallback_layers: list[int] = field(default_factory=list)
    timings_s: dict[str, float] = field(default_factory=dict)
    report_version: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    def stable_json(self) -> str:
        """Serialized form with volatile timing fields removed."""
        payload = asdict(self)
        payload.pop("timings_s", None)
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PruneReport":
        return cls(**json.loads(text))
