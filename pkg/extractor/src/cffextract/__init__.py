"""Region features and query vectors for the surfelmap engine."""

from .config import ExtractorConfig
from .errors import ExtractorError, InputError, ModelError
from .pipeline import Extractor, load_image
from .writer import encode_pack, update_table, write_atomic

__all__ = [
    "Extractor",
    "ExtractorConfig",
    "ExtractorError",
    "InputError",
    "ModelError",
    "encode_pack",
    "load_image",
    "update_table",
    "write_atomic",
]
