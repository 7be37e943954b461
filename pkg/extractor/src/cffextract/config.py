"""Pipeline configuration."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError


@dataclass(frozen=True)
class ExtractorConfig:
    """Which backends to run and how many proposals to emit.

    ``dim`` is the feature dimension written to disk. Backends with a
    fixed output size (real encoder models) must agree with it; the
    deterministic backends produce whatever is asked.
    """

    mask_model: str = "colorseg"
    embed_model: str = "hashtokens"
    proposals: int = 100
    dim: int = 64
    device: str = "cpu"

    def __post_init__(self):
        if self.proposals < 1:
            raise InputError("proposals must be >= 1")
        if self.dim < 1:
            raise InputError("dim must be >= 1")
        if not self.mask_model or not self.embed_model:
            raise InputError("backend ids must be non-empty")
