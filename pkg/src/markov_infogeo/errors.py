"""Exception hierarchy.

Every error carries a machine-readable ``code`` and a ``context`` dict so the
CLI can surface it as ``{code, message, context}`` without special cases.
"""

from __future__ import annotations

from typing import Any


class MarkovGeometryError(Exception):
    code = "domain_error"

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "context": self.context}


class InvalidGraph(MarkovGeometryError):
    code = "invalid_graph"


class NotStronglyConnected(InvalidGraph):
    code = "not_strongly_connected"


class InvalidKernel(MarkovGeometryError):
    code = "invalid_kernel"


class InvalidDistribution(MarkovGeometryError):
    code = "invalid_distribution"


class GraphMismatch(MarkovGeometryError):
    code = "graph_mismatch"


class ConvergenceFailure(MarkovGeometryError):
    code = "convergence_failure"


class NotShiftInvariant(MarkovGeometryError):
    code = "not_shift_invariant"


class ZeroRow(MarkovGeometryError):
    code = "zero_row"


class NotPositive(MarkovGeometryError):
    code = "not_positive"


class Overflow(MarkovGeometryError):
    code = "overflow"


class IdenticalKernels(MarkovGeometryError):
    code = "identical_kernels"


class NotMinimal(MarkovGeometryError):
    code = "not_minimal"


class NoConvergence(MarkovGeometryError):
    """Newton inversion gave up; ``context`` holds the last iterate and residual."""

    code = "no_convergence"


class NotInFamily(MarkovGeometryError):
    code = "not_in_family"


class UnsupportedTransition(MarkovGeometryError):
    code = "unsupported_transition"
