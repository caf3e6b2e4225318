"""Exception types shared across the package."""


class FairallocError(Exception):
    """Base class for all package errors."""


class InputError(FairallocError, ValueError):
    """Invalid argument or malformed instance description."""


class InfeasibleError(FairallocError):
    """No feasible allocation exists (e.g. fewer goods than agents)."""


class UnpulledArmError(FairallocError):
    """Confidence bound requested for an arm with zero pulls."""


class BudgetExceededError(FairallocError):
    """Exhaustive search would visit more states than the configured budget."""

    def __init__(self, budget: int, message: str = ""):
        self.budget = budget
        super().__init__(message or f"enumeration exceeds state budget of {budget}")
