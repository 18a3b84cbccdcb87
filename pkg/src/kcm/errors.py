"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """An input, tensor, or file violates a structural invariant."""


class InfeasibleBudgetError(ValueError):
    """The requested FLOPs fraction is below the attention-only floor."""

    def __init__(self, budget_flops: float, floor_flops: int):
        self.budget_flops = budget_flops
        self.floor_flops = floor_flops
        super().__init__(
            f"FLOPs budget {budget_flops:.6g} is below the attention-only "
            f"floor of {floor_flops} FLOPs; no filter count can satisfy it"
        )
