class SearchExhausted(RuntimeError):
    """No open site was found within the configured search radius."""


class BudgetExceeded(RuntimeError):
    """The requested experiment is larger than the configured work budget."""


class DegenerateSample(ValueError):
    """A sample has zero variance, so it cannot be standardized."""
