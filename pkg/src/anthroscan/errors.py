"""Exception hierarchy shared by the whole pipeline.

Every error carries the pipeline ``stage`` it came from so the service and
CLI can report which step failed without string-matching messages.
"""


class AnthroscanError(Exception):
    """Base class; ``stage`` names the pipeline step that raised."""

    stage = "pipeline"

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class ParameterError(AnthroscanError):
    """A caller-supplied parameter violates a precondition."""

    stage = "validation"


class GeometryError(AnthroscanError):
    """Degenerate geometry (collinear points, out-of-bounds keypoint...)."""

    stage = "geometry"


class NoSubjectError(AnthroscanError):
    """No subject found in the image (empty mask, blank frame)."""

    stage = "segmentation"


class TopologyError(AnthroscanError):
    """Mesh is unusable: empty, non-watertight, bad indices."""

    stage = "reconstruction"


class ProviderError(AnthroscanError):
    """An injected provider (detector, reconstructor, extractor) failed."""

    stage = "provider"


class ContractError(AnthroscanError):
    """Provider contract violation, e.g. modality mismatch."""

    stage = "provider"


class DataError(AnthroscanError):
    """Bad data fed to a numeric routine (non-finite embedding etc.)."""

    stage = "data"


class NumericError(AnthroscanError):
    """Non-finite value produced inside a numeric routine."""

    stage = "regression"


class TrainingError(AnthroscanError):
    """Training diverged or could not run."""

    stage = "training"


class FormatError(AnthroscanError):
    """Corrupt or version-mismatched artifact file."""

    stage = "io"


class IngestionError(AnthroscanError):
    """Manifest/record ingestion failure; carries a line number when known."""

    stage = "ingestion"

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigurationError(AnthroscanError):
    """Missing or inconsistent runtime configuration."""

    stage = "configuration"


class StorageError(AnthroscanError):
    """Record store unavailable or corrupt."""

    stage = "storage"


class PlanInfeasibleError(AnthroscanError):
    """Requested nutrition plan violates the calorie safety floor.

    ``min_weeks`` is the smallest feasible duration, or None when no
    duration can satisfy the floor.
    """

    stage = "plan"

    def __init__(self, message, min_weeks=None):
        super().__init__(message)
        self.min_weeks = min_weeks
