"""Exception hierarchy. The CLI maps the three top branches to exit codes."""


class ClozefillError(Exception):
    """Base class for all engine errors."""


class ConfigError(ClozefillError):
    """Invalid run configuration (exit code 2)."""


class NoDevData(ConfigError):
    """Tuning requested but no development dataset available."""


class DatasetFormatError(ClozefillError):
    """Malformed input file: dataset, templates, or embeddings (exit code 3)."""


class TemplateError(DatasetFormatError):
    pass


class MissingPlaceholder(TemplateError):
    pass


class DuplicatePlaceholder(TemplateError):
    pass


class EmptyContext(DatasetFormatError):
    pass


class FormatError(DatasetFormatError):
    """Word-vector text stream violates the expected format."""


class OverlappingAnnotations(DatasetFormatError):
    pass


class BackendUnavailable(ClozefillError):
    """Remote model backend unreachable after retries (exit code 4)."""


class MalformedQuery(ClozefillError):
    """A provider request that the backend cannot serve."""


class EmptySequence(MalformedQuery):
    pass


class EmptyScores(ClozefillError):
    """Threshold fitting got no finite scores to estimate from."""


class EmptyProposal(ClozefillError):
    """Every top-k candidate was punctuation; no proposal tokens remain."""
