"""Error types shared across the workbench.

Every error carries a stable ``kind`` string that the service layer maps to
an HTTP status and echoes in its error document, and that the CLI maps to an
exit code.
"""

from __future__ import annotations


class NvisError(Exception):
    """Base class; ``kind`` is a stable machine-readable tag."""

    kind = "error"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidShapeError(NvisError):
    """Operands have incompatible shapes; the message names both."""

    kind = "invalid-shape"


class UnsupportedConfigurationError(NvisError):
    """A parameter combination the kernels deliberately refuse (e.g. same-padding with stride > 1)."""

    kind = "unsupported-configuration"


class InvalidInputError(NvisError):
    """Model input rejected: wrong shape or values outside [0, 1]."""

    kind = "invalid-input"


class InvalidConfigError(NvisError):
    """Freeze configuration refers to a layer/filter that does not exist."""

    kind = "invalid-config"


class RangeError(NvisError):
    """Index or label out of range."""

    kind = "range"


class ParseError(NvisError):
    """Malformed manifest or request document; ``location`` is a JSON path."""

    kind = "parse"

    def __init__(self, detail: str, location: str = ""):
        super().__init__(f"{location}: {detail}" if location else detail)
        self.location = location


class IntegrityError(NvisError):
    """Weight blob does not match what the manifest declares."""

    kind = "integrity"


class ModelValidationError(NvisError):
    """One or more model invariants violated; carries all violations."""

    kind = "validation"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UnsupportedModelError(NvisError):
    """Operation needs a capability the model lacks (e.g. softmax head for gradients)."""

    kind = "unsupported-model"


class IncomparableTracesError(NvisError):
    """Traces come from models with different layer shapes."""

    kind = "incomparable-traces"


class NotFoundError(NvisError):
    """Unknown registry id."""

    kind = "not-found"
