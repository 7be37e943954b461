"""Error hierarchy for the extraction pipeline."""


class ExtractorError(Exception):
    """Base for everything this package raises on purpose."""


class InputError(ExtractorError):
    """Bad user-supplied data: unreadable image, empty text, bad config."""


class ModelError(ExtractorError):
    """A backend could not be constructed or failed during inference."""
