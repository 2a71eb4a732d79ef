"""Exception hierarchy shared by all cstune modules.

Every error carries a short machine-parsable ``code`` so the CLI can emit
one-line ``<code>: <message>`` diagnostics with a nonzero exit status.
"""

from __future__ import annotations


class CstuneError(Exception):
    """Base class for all library errors."""

    code = "error"


class DimensionError(CstuneError):
    """Shape disagreement between operands; message names both shapes."""

    code = "dimension-error"


class NumericError(CstuneError):
    """A kernel op produced (or was fed) non-finite values."""

    code = "numeric-error"


class ParameterError(CstuneError):
    """An argument is outside its documented domain."""

    code = "parameter-error"


class LabelError(CstuneError):
    """A class label is outside [0, num_classes)."""

    code = "label-error"


class DegenerateInputError(CstuneError):
    """An input row is unusable (for example a zero-norm embedding)."""

    code = "degenerate-input-error"


class TapeError(CstuneError):
    """Misuse of the recording tape (double backward, detached loss)."""

    code = "tape-error"


class FormatError(CstuneError):
    """A serialized container failed validation (magic, version, CRC)."""

    code = "format-error"


class TruncationError(FormatError):
    """A serialized container is shorter than its header promises."""

    code = "length-error"


class StratificationError(CstuneError):
    """A class-balanced selection quota cannot be met."""

    code = "stratification-error"


class ContractError(CstuneError):
    """A caller violated an operation precondition."""

    code = "contract-error"


class TrainingDiverged(CstuneError):
    """Training aborted on non-finite losses; last checkpoint retained."""

    code = "diverged"
