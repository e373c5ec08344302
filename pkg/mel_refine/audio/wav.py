from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from mel_refine.utils.exceptions import AudioFormatError, ValidationError
from mel_refine.utils.logger import Logger
from mel_refine.utils.validators import TensorValidator

logger = Logger.get_logger(__name__)

SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError(f"waveform must be mono (1-D), got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be > 0, got {self.sample_rate}")
        TensorValidator.validate_finite(samples, "waveform")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path: Union[str, Path]) -> Waveform:
    """Read PCM16 or float32 RIFF/WAVE; stereo is averaged to mono."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"WAV file not found: {path}")
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise AudioFormatError(f"malformed WAV header in {path}: {e}")
    if info.format not in ("WAV", "WAVEX"):
        raise AudioFormatError(f"{path} is {info.format}, expected RIFF/WAVE")
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(f"unsupported WAV encoding {info.subtype}; need PCM_16 or FLOAT")
    if info.channels not in (1, 2):
        raise AudioFormatError(f"unsupported channel count {info.channels}")

    # libsndfile scales PCM16 by 1/32768
    data, sample_rate = sf.read(str(path), dtype="float64", always_2d=True)
    samples = data.mean(axis=1) if data.shape[1] == 2 else data[:, 0]
    logger.debug(f"Read {path}: {len(samples)} samples at {sample_rate} Hz ({info.subtype})")
    return Waveform(samples=samples, sample_rate=int(sample_rate))


def write_wav(path: Union[str, Path], waveform: Waveform, subtype: str = "PCM_16") -> None:
    if subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(f"unsupported WAV encoding {subtype}")
    sf.write(str(path), waveform.samples, waveform.sample_rate, subtype=subtype, format="WAV")
