"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class InfeasibleError(ValueError):
    """A strategy or constraint set admits no valid point."""


class NoRootError(ValueError):
    """A root search found no sign change."""


class BudgetError(RuntimeError):
    """A computation would exceed its configured cell or time budget."""
