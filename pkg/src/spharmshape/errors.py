"""Exception types shared across the pipeline."""


class SpharmShapeError(Exception):
    """Base class for all package errors."""


class ParseError(SpharmShapeError):
    """A surface file could not be parsed in its declared format."""


class TopologyError(SpharmShapeError):
    """Mesh is not a closed, oriented, manifold genus-0 surface."""


class InvalidParameter(SpharmShapeError):
    """An argument is outside its documented range."""


class SimplificationError(SpharmShapeError):
    """No legal edge collapse remains before reaching the target size."""


class ParamFailure(SpharmShapeError):
    """Spherical parametrization did not reach a fold-free state."""

    def __init__(self, msg, fold_count=None):
        super().__init__(msg)
        self.fold_count = fold_count


class IllConditioned(SpharmShapeError):
    """Least-squares system condition estimate above threshold."""


class RealityViolation(SpharmShapeError):
    """Reconstruction had imaginary residue above tolerance."""


class DegenerateTriangle(SpharmShapeError):
    """A zero-area face where a nondegenerate one is required."""


class ZeroVolume(SpharmShapeError):
    """Reference volume is zero or negative."""


class SchemaMismatch(SpharmShapeError):
    """Feature data does not match the expected column schema."""


class TooFewSubjects(SpharmShapeError):
    """Not enough rows per class for the requested operation."""


class DegenerateData(SpharmShapeError):
    """Training data unusable (single class, or zero-width matrix)."""


class LengthMismatch(SpharmShapeError):
    """Two vectors that must share a length do not."""


class IndexOutOfRange(SpharmShapeError):
    """A feature or vertex index falls outside the addressed array."""


class MissingArtifact(SpharmShapeError):
    """A pipeline stage's required input artifact is absent."""


class StageError(SpharmShapeError):
    """A stage failed for one subject; carries the subject id."""

    def __init__(self, subject_id, cause):
        super().__init__(f"stage failed for subject {subject_id!r}: {cause}")
        self.subject_id = subject_id
        self.cause = cause
