"""Inference knobs for the decoder hook and the shipped presets."""

import math
from typing import Dict, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from mel_refine.utils.exceptions import ValidationError

GAIN_NAMES = ("s1", "s2", "b1", "b2", "m")


class RefineParams(BaseModel):
    """Skip gains (s1, s2), backbone HF gains (b1, b2) and the shared structure gain m."""

    model_config = ConfigDict(frozen=True)

    s1: float = Field(1.0, gt=0)
    s2: float = Field(1.0, gt=0)
    b1: float = Field(1.0, gt=0)
    b2: float = Field(1.0, gt=0)
    m: float = Field(1.0, ge=1)
    eps: float = Field(1e-8, gt=0)
    structure_channels: Literal["all", "half"] = "all"

    @field_validator("s1", "s2", "b1", "b2", "m", "eps")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @property
    def is_identity(self) -> bool:
        return self.s1 == self.s2 == self.b1 == self.b2 == self.m == 1.0

    def skip_gain(self, block_index: int) -> float:
        return (self.s1, self.s2)[block_index]

    def backbone_gain(self, block_index: int) -> float:
        return (self.b1, self.b2)[block_index]

    def gains(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in GAIN_NAMES}

    def key(self) -> tuple:
        return (self.s1, self.s2, self.b1, self.b2, self.m, self.eps, self.structure_channels)

    def to_kv(self) -> str:
        """Flat `s1=... s2=... b1=... b2=... m=...` text."""
        return " ".join(f"{name}={getattr(self, name):g}" for name in GAIN_NAMES)

    @classmethod
    def from_kv(cls, text: str, **overrides) -> "RefineParams":
        """Parse whitespace- or comma-separated `name=value` pairs."""
        values: Dict[str, float] = {}
        for token in text.replace(",", " ").split():
            if "=" not in token:
                raise ValidationError(f"expected name=value, got {token!r}")
            name, raw = token.split("=", 1)
            name = name.strip()
            if name not in GAIN_NAMES and name != "eps":
                raise ValidationError(f"unknown parameter {name!r}")
            try:
                values[name] = float(raw)
            except ValueError:
                raise ValidationError(f"parameter {name} is not a number: {raw!r}")
        values.update(overrides)
        return cls(**values)


PRESETS: Dict[str, RefineParams] = {
    "identity": RefineParams(),
    "tango": RefineParams(s1=1.2, s2=1.2, b1=0.8, b2=0.1, m=1.4),
    "mustango": RefineParams(s1=1.4, s2=1.2, b1=0.8, b2=0.6, m=1.1),
    "tango2": RefineParams(s1=1.4, s2=1.2, b1=0.5, b2=0.1, m=2.5),
}


def get_preset(name: str) -> RefineParams:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
