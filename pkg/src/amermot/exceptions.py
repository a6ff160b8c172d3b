class AmerMotError(Exception):
    """Base class for package errors."""


class NotInConvexOrder(AmerMotError):
    def __init__(self, reason, witness=None):
        self.reason = reason
        self.witness = witness
        msg = f"marginals are not in convex order: {reason}"
        if witness is not None:
            msg += f" (witness x={witness!r})"
        super().__init__(msg)


class TooManyAtoms(AmerMotError):
    def __init__(self, m, max_atoms):
        self.m = m
        self.max_atoms = max_atoms
        super().__init__(
            f"{m} atoms exceed the enumeration limit of {max_atoms}; "
            "use solve_alternating for a lower bound instead"
        )


class GridMismatch(AmerMotError):
    pass


class CostError(AmerMotError):
    pass


class LpError(AmerMotError):
    pass
