"""Exception hierarchy.

Monte-Carlo failures (retryable with a fresh seed) derive from
:class:`MonteCarloFailure`; violated input assumptions derive from
:class:`PreconditionError`.  The CLI maps the two families to different exit
codes.
"""


class BBError(Exception):
    pass


class MonteCarloFailure(BBError):
    pass


class PreconditionError(BBError, ValueError):
    pass


class BudgetExceeded(MonteCarloFailure):
    def __init__(self, stage: str, budget: int):
        super().__init__(f"{stage}: retry budget of {budget} exhausted")
        self.stage = stage
        self.budget = budget


RetryBudgetExceeded = BudgetExceeded


class IncompleteFactorization(ArithmeticError):
    def __init__(self, n: int, cofactor: int):
        super().__init__(f"could not factor {n}: cofactor {cofactor} left unsplit")
        self.n = n
        self.cofactor = cofactor


class OddOrder(BBError):
    """No involution can be extracted: x^m == 1."""


class EvenCase(BBError):
    """o(i i^x) is even; route to zeta0."""


class OddCase(BBError):
    """o(i i^x) is odd; route to zeta1."""


class TrivialProduct(BBError):
    """i i^x == 1."""


class EvenProduct(MonteCarloFailure):
    """Product of two involutions has even order (retry after re-randomizing)."""


class GroupSpecSyntaxError(PreconditionError):
    """A group string that does not follow NAME:n:p:k."""


class SmallPrimeException(PreconditionError):
    pass


class ClosureTooLarge(BBError):
    pass


class NotCentral(BBError):
    pass


class MissingJ(PreconditionError):
    pass


class PropagationMismatch(BBError):
    pass


class OppositeCorrectionFailed(MonteCarloFailure):
    pass


class CapExceeded(BBError):
    pass
