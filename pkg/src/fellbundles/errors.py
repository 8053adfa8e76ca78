"""Structured exceptions carrying witnesses for every axiom a validator can reject.

Each class stores enough data (arrow indices, basis indices, residuals) for a
caller to reproduce the violation; the CLI serializes them into failure reports.
"""

from __future__ import annotations


class FellBundleError(Exception):
    """Base class for all validation failures in this package."""

    def witness(self) -> dict:
        """Machine-readable description of the violation."""
        return {"error": type(self).__name__, "message": str(self)}


# -- groupoid layer -----------------------------------------------------------

class GroupoidError(FellBundleError):
    pass


class NonAssociative(GroupoidError):
    def __init__(self, alpha: int, beta: int, gamma: int):
        self.alpha, self.beta, self.gamma = alpha, beta, gamma
        super().__init__(
            f"associativity fails on the composable triple ({alpha}, {beta}, {gamma})"
        )

    def witness(self) -> dict:
        return {"error": "NonAssociative", "triple": [self.alpha, self.beta, self.gamma]}


class BadUnit(GroupoidError):
    def __init__(self, unit: int, detail: str = ""):
        self.unit = unit
        super().__init__(f"unit axiom fails at {unit}" + (f": {detail}" if detail else ""))

    def witness(self) -> dict:
        return {"error": "BadUnit", "unit": self.unit, "message": str(self)}


class BadInverse(GroupoidError):
    def __init__(self, arrow: int, detail: str = ""):
        self.arrow = arrow
        super().__init__(f"inverse axiom fails at arrow {arrow}" + (f": {detail}" if detail else ""))

    def witness(self) -> dict:
        return {"error": "BadInverse", "arrow": self.arrow, "message": str(self)}


class ComposabilityMismatch(GroupoidError):
    def __init__(self, alpha: int, beta: int, detail: str):
        self.alpha, self.beta = alpha, beta
        super().__init__(f"composition of ({alpha}, {beta}): {detail}")

    def witness(self) -> dict:
        return {"error": "ComposabilityMismatch", "pair": [self.alpha, self.beta],
                "message": str(self)}


class NotAGroup(GroupoidError):
    def __init__(self, reason: str):
        super().__init__(f"multiplication table is not a group: {reason}")


class NotClosed(GroupoidError):
    """Arrow subset not closed under the groupoid operations."""

    def __init__(self, witness_pair, detail: str = ""):
        self.pair = tuple(witness_pair)
        super().__init__(
            f"subset not closed, witness {self.pair}" + (f": {detail}" if detail else "")
        )

    def witness(self) -> dict:
        return {"error": "NotClosed", "pair": list(self.pair), "message": str(self)}


class MorphismInvalid(GroupoidError):
    def __init__(self, detail: str, arrow: int | None = None):
        self.arrow = arrow
        super().__init__(detail)


# -- module / bimodule layer --------------------------------------------------

class BimoduleError(FellBundleError):
    pass


class InnerProductEscapesAlgebra(BimoduleError):
    def __init__(self, u: int, v: int, residual: float):
        self.u, self.v, self.residual = u, v, residual
        super().__init__(
            f"<u_{u}, v_{v}> leaves the coefficient algebra (residual {residual:.3e})"
        )

    def witness(self) -> dict:
        return {"error": "InnerProductEscapesAlgebra", "pair": [self.u, self.v],
                "residual": self.residual}


class ModuleNotClosed(BimoduleError):
    def __init__(self, u: int, a: int, residual: float):
        self.u, self.a, self.residual = u, a, residual
        super().__init__(
            f"u_{u} * a_{a} leaves the module carrier (residual {residual:.3e})"
        )

    def witness(self) -> dict:
        return {"error": "ModuleNotClosed", "pair": [self.u, self.a], "residual": self.residual}


class NotFull(BimoduleError):
    def __init__(self, detail: str = "inner-product values do not span the algebra"):
        super().__init__(detail)


class IncompatibleAlgebras(BimoduleError):
    def __init__(self, detail: str):
        super().__init__(detail)


class NotAStarAlgebra(BimoduleError):
    """Matrix span not closed under product/adjoint, or without a unit."""

    def __init__(self, detail: str):
        super().__init__(detail)


# -- Fell bundle layer --------------------------------------------------------

class BundleError(FellBundleError):
    pass


class ClosureViolation(BundleError):
    def __init__(self, alpha: int, beta: int, i: int, j: int, residual: float):
        self.alpha, self.beta, self.i, self.j, self.residual = alpha, beta, i, j, residual
        super().__init__(
            f"E_{alpha} * E_{beta} escapes E_{{{alpha}{beta}}} at basis pair "
            f"({i}, {j}), residual {residual:.3e}"
        )

    def witness(self) -> dict:
        return {"error": "ClosureViolation", "pair": [self.alpha, self.beta],
                "basis_pair": [self.i, self.j], "residual": self.residual}


class InvolutionViolation(BundleError):
    def __init__(self, gamma: int, detail: str = ""):
        self.gamma = gamma
        super().__init__(
            f"conjugate transpose does not map fiber {gamma} onto the fiber at its inverse"
            + (f": {detail}" if detail else "")
        )

    def witness(self) -> dict:
        return {"error": "InvolutionViolation", "arrow": self.gamma, "message": str(self)}


class UnitFiberNotStarAlgebra(BundleError):
    def __init__(self, unit: int, detail: str):
        self.unit = unit
        super().__init__(f"fiber over unit {unit} is not a C*-algebra: {detail}")

    def witness(self) -> dict:
        return {"error": "UnitFiberNotStarAlgebra", "unit": self.unit, "message": str(self)}


class CocycleIdentityViolated(BundleError):
    def __init__(self, alpha: int, beta: int, gamma: int, residual: float):
        self.alpha, self.beta, self.gamma = alpha, beta, gamma
        self.residual = residual
        super().__init__(
            f"cocycle identity fails on ({alpha}, {beta}, {gamma}), residual {residual:.3e}"
        )

    def witness(self) -> dict:
        return {"error": "CocycleIdentityViolated",
                "triple": [self.alpha, self.beta, self.gamma], "residual": self.residual}


class NotNormalized(BundleError):
    def __init__(self, arrow: int, detail: str):
        self.arrow = arrow
        super().__init__(f"cocycle not normalized at arrow {arrow}: {detail}")


class ActionInvalid(BundleError):
    def __init__(self, condition: str, detail: str, arrow: int | None = None):
        self.condition = condition
        self.arrow = arrow
        super().__init__(f"groupoid action violates condition ({condition}): {detail}")

    def witness(self) -> dict:
        return {"error": "ActionInvalid", "condition": self.condition,
                "arrow": self.arrow, "message": str(self)}


class TraceNotFaithful(BundleError):
    def __init__(self, unit: int):
        self.unit = unit
        super().__init__(f"trace on the fiber over unit {unit} is not positive definite")


class RepresentationNotInjective(BundleError):
    def __init__(self, gamma: int):
        self.gamma = gamma
        super().__init__(
            f"regular representation collapses the fiber at arrow {gamma}; "
            "the abstract bundle is degenerate"
        )


class NotNondegenerate(BundleError):
    def __init__(self, gamma: int):
        self.gamma = gamma
        super().__init__(f"fiber at arrow {gamma} is zero")


class NotSaturated(BundleError):
    def __init__(self, alpha: int | None = None, beta: int | None = None):
        self.alpha, self.beta = alpha, beta
        if alpha is None:
            super().__init__("bundle is not saturated")
        else:
            super().__init__(
                f"E_{alpha} * E_{beta} does not span the fiber at their product"
            )

    def witness(self) -> dict:
        return {"error": "NotSaturated", "pair": None if self.alpha is None
                else [self.alpha, self.beta]}


# -- section algebra layer ----------------------------------------------------

class AlgebraError(FellBundleError):
    pass


class NotANormalizer(AlgebraError):
    def __init__(self, detail: str = "support is not contained in a set on which range and source are injective"):
        super().__init__(detail)


class NotPrincipal(AlgebraError):
    def __init__(self, arrow: int):
        self.arrow = arrow
        super().__init__(f"non-unit arrow {arrow} has equal range and source")


# -- Morita layer -------------------------------------------------------------

class MoritaError(FellBundleError):
    pass


class NotAProjection(MoritaError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"candidate is not a Hermitian idempotent (residual {residual:.3e})")


class MorphismNotFull(MoritaError):
    def __init__(self, unit: int):
        self.unit = unit
        super().__init__(
            f"no arrow with source {unit} maps off the units of the two-point groupoid"
        )

    def witness(self) -> dict:
        return {"error": "MorphismNotFull", "unit": self.unit}


class FullnessFailed(MoritaError):
    def __init__(self, corner: int, achieved: int, needed: int):
        self.corner, self.achieved, self.needed = corner, achieved, needed
        super().__init__(
            f"corner {corner} is not full: products span dimension {achieved} of {needed}"
        )

    def witness(self) -> dict:
        return {"error": "FullnessFailed", "corner": self.corner,
                "achieved": self.achieved, "needed": self.needed}


class WellDefinednessFailed(MoritaError):
    def __init__(self, gamma: int, residual: float):
        self.gamma, self.residual = gamma, residual
        super().__init__(
            f"spanning equations at arrow {gamma} are inconsistent (residual {residual:.3e})"
        )

    def witness(self) -> dict:
        return {"error": "WellDefinednessFailed", "arrow": self.gamma, "residual": self.residual}


class NotTransitive(MoritaError):
    def __init__(self):
        super().__init__("groupoid has more than one orbit")
