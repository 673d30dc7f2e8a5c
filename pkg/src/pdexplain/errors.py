"""Exception types shared across the toolkit."""


class PdexplainError(Exception):
    """Base class for every error raised by this package."""


class IngestError(PdexplainError):
    """CSV ingestion failed: unreadable, ragged, empty, or missing values."""


class SchemaError(PdexplainError):
    """Rows do not conform to the schema a model expects."""


class FitError(PdexplainError):
    """Model fitting failed (singular design, bad target, ...)."""


class PredictError(PdexplainError):
    """An external predictor misbehaved: crash, bad output, or timeout."""


class PersistError(PdexplainError):
    """A saved model document is corrupt or has an unsupported version."""


class EngineError(PdexplainError):
    """Partial dependence engine misuse or failure."""


class ArgError(PdexplainError):
    """Invalid arguments passed to a metric function."""


class DegenerateModelError(PdexplainError):
    """The model makes constant predictions, so explainability is undefined."""


class EmitError(PdexplainError):
    """A plot cannot be rendered from the given inputs."""
