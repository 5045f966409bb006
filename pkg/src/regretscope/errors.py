"""Exception hierarchy.

The CLI maps these onto exit codes: ``InputError`` subclasses exit with 2,
``BudgetError`` subclasses with 3, anything else with 1.
"""


class RegretscopeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(RegretscopeError, ValueError):
    """Caller supplied malformed or inconsistent input."""


class ValidationError(InputError):
    """A document or object failed schema validation.

    ``field`` holds the offending path, e.g. ``tau[1][0]``.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionMismatchError(InputError):
    """Two objects disagree on the size of a shared axis."""

    def __init__(self, axis: str, expected: int, got: int):
        self.axis = axis
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch on axis '{axis}': expected {expected}, got {got}")


class BudgetError(RegretscopeError):
    """A resource budget would be exceeded."""


class EnumerationBudgetError(BudgetError):
    def __init__(self, n_candidates: int, budget: int):
        self.n_candidates = n_candidates
        self.budget = budget
        super().__init__(
            f"{n_candidates} deterministic decision policies exceed the enumeration budget "
            f"of {budget}; use the empirical learner path (train_tabular) instead"
        )


class TokenBudgetError(BudgetError):
    def __init__(self, n_tokens: int, budget: int):
        self.n_tokens = n_tokens
        self.budget = budget
        super().__init__(
            f"token table would hold {n_tokens} tokens (budget {budget}); "
            "use a smaller mask region or a coarser filter"
        )


class SolverError(RegretscopeError):
    """Numerical failure in an exact solver."""
