"""Exception hierarchy shared across the pipeline stages."""


class ScibranchError(Exception):
    """Base class for all scibranch errors."""


class ConfigError(ScibranchError):
    """Invalid configuration value or config file (CLI exit code 2)."""


class DataError(ScibranchError):
    """Input data violates a stage precondition (CLI exit code 3)."""


class DuplicateIdError(DataError):
    """Two input records share the same id."""


class EmptyCorpusError(DataError):
    """Filtering left no analyzable documents."""


class EmptyVocabularyError(DataError):
    """No word survived the document-frequency threshold."""


class ConvergenceError(ScibranchError):
    """Fixed-point iteration failed to reach tolerance."""


class PipelineError(ScibranchError):
    """A pipeline stage failed (CLI exit code 4)."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
