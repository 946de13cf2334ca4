"""Exception hierarchy shared by every vizpipe subsystem.

Errors carry enough context (paths, positions, node ids) for the service
layer to build actionable reports without string-parsing messages.
"""

from __future__ import annotations


class VizpipeError(Exception):
    """Base class for all vizpipe errors."""


# --- spec language ---------------------------------------------------------

class SpecSyntaxError(VizpipeError):
    """Malformed pipeline document (not parseable as JSON)."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class SchemaError(VizpipeError):
    """Structurally invalid pipeline document: unknown key, wrong type, missing block."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnresolvedReference(VizpipeError):
    """A field reference has no producer (input column, analysis output, or derived column)."""

    def __init__(self, name: str, path: str = ""):
        super().__init__(f"unresolved reference {name!r}" + (f" at {path}" if path else ""))
        self.name = name
        self.path = path


class FacetOverflow(VizpipeError):
    """Facet expansion produced more views than the layout has slots."""


class UnknownModelAttribute(VizpipeError):
    """Requested attribute does not exist on the model (e.g. no 'coefficients')."""


# --- dataframe -------------------------------------------------------------

class LengthMismatch(VizpipeError):
    """Column row counts disagree."""


class DuplicateName(VizpipeError):
    """Column name already present in the frame."""


class UnknownColumn(VizpipeError):
    """Referenced column does not exist in the frame."""

    def __init__(self, name: str):
        super().__init__(f"unknown column {name!r}")
        self.name = name


class CodecError(VizpipeError):
    """Base class for binary wire-format errors."""


class BadMagic(CodecError):
    """Payload does not start with the frame-format magic bytes."""


class UnsupportedVersion(CodecError):
    """Payload version is newer than this decoder understands."""


class TruncatedPayload(CodecError):
    """Payload ended before the declared contents were read."""


# --- ingest ----------------------------------------------------------------

class ParseError(VizpipeError):
    """Malformed cell or record in an input file."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class EmptyInput(VizpipeError):
    """Input has no header row / no records."""


class NetworkError(VizpipeError):
    """Remote fetch failed."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(message or f"remote fetch failed with status {status}")
        self.status = status


class SizeLimitExceeded(VizpipeError):
    """Remote body or upload exceeds the configured cap."""


class EncodeNonCategorical(VizpipeError):
    """numerical/onehot encoding requested for a non-categorical column."""


# --- transform engine ------------------------------------------------------

class PredicateParseError(VizpipeError):
    """Match predicate text does not conform to the predicate grammar."""


class ExprParseError(VizpipeError):
    """Derive expression text does not conform to the expression grammar."""


class TypeMismatch(VizpipeError):
    """Operation applied to a column of the wrong dtype (e.g. '<' on categorical)."""


class AggregateOnCategorical(VizpipeError):
    """sum/mean aggregation over a categorical column."""


# --- analytics -------------------------------------------------------------

class EmptyMatrix(VizpipeError):
    """Feature matrix has no rows (possibly after null-dropping)."""


class KTooLarge(VizpipeError):
    """More clusters requested than data points available."""


class BothOrNeitherStopRule(VizpipeError):
    """Exactly one of the two stop rules must be given (n_clusters/threshold, n_bkps/penalty)."""


class TooManyComponents(VizpipeError):
    """n_components exceeds what the data can support."""


class FeatureMismatch(VizpipeError):
    """Prediction-time feature names/order differ from the trained model's."""


class FoldTooSmall(VizpipeError):
    """Cross-validation folds outside [2, n]."""


class TooShort(VizpipeError):
    """Series too short for change-point detection."""


class VersionMismatch(VizpipeError):
    """Model file written by an incompatible format version."""


class CorruptModel(VizpipeError):
    """Model file is truncated or not a valid model document."""


class UnknownAlgorithm(VizpipeError):
    """Analysis algorithm is neither built in, registered, nor a declared model."""


# --- pipeline engine -------------------------------------------------------

class CycleDetected(VizpipeError):
    """Dependency graph contains a cycle (e.g. a derive referencing its own output)."""


class UnknownPath(VizpipeError):
    """Parameter path does not resolve to a leaf of the normalized spec."""

    def __init__(self, path: str):
        super().__init__(f"unknown parameter path {path!r}")
        self.path = path


class UnknownOperation(VizpipeError):
    """export_result name matches no operation in the pipeline."""


class NotYetExecuted(VizpipeError):
    """Operation is dirty or has never run; no result to export."""


class ShapeMismatch(VizpipeError):
    """Chained input is not frame-shaped."""


class ExecutionError(VizpipeError):
    """A node failed during execution; wraps the root cause with its location."""

    def __init__(self, node_id: str, cause: Exception, context: str = ""):
        detail = f"node {node_id!r}"
        if context:
            detail += f" ({context})"
        super().__init__(f"{detail}: {cause}")
        self.node_id = node_id
        self.cause = cause
        self.context = context


# --- vis compiler ----------------------------------------------------------

class UnknownField(VizpipeError):
    """Encoding references a field missing from the view's data."""

    def __init__(self, name: str, view_id: int | None = None):
        at = f" in view {view_id}" if view_id is not None else ""
        super().__init__(f"unknown field {name!r}{at}")
        self.name = name


class IncompatibleChannel(VizpipeError):
    """Channel is not meaningful for the mark type, or mark type has no renderer/plugin."""


class LayoutOverflow(VizpipeError):
    """More scenes than layout slots."""


class UnknownView(VizpipeError):
    """Interaction or annotation references a nonexistent view id."""


class UnresolvedAnnotationRef(VizpipeError):
    """Annotation data_ref does not resolve against the pipeline results."""


class DuplicatePlugin(VizpipeError):
    """A plugin is already registered for this mark-type condition."""


class MissingRequiredChannel(VizpipeError):
    """View bound to a plugin lacks a channel the plugin contract requires."""
