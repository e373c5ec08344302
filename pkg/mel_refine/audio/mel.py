"""Log-mel front end: HTK mel scale, peak-normalized triangles, reflect-centered STFT."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from mel_refine.audio.wav import Waveform
from mel_refine.config.settings import settings
from mel_refine.utils.exceptions import AudioFormatError, ValidationError
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)


def hz_to_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    n_fft: int = 1024
    hop: int = 160
    n_mels: int = 64
    f_min: float = 0.0
    f_max: Optional[float] = None  # None -> sample_rate / 2
    window: str = "hann"  # periodic
    log_floor: float = 1e-5

    def __post_init__(self):
        if self.sample_rate <= 0 or self.n_fft < 2 or self.hop < 1 or self.n_mels < 1:
            raise ValidationError("sample_rate, n_fft, hop and n_mels must be positive")
        if self.hop > self.n_fft:
            raise ValidationError(f"hop {self.hop} exceeds n_fft {self.n_fft}")
        if not 0.0 <= self.f_min < self.upper_hz <= self.sample_rate / 2:
            raise ValidationError(
                f"need 0 <= f_min < f_max <= {self.sample_rate / 2}, got {self.f_min}, {self.upper_hz}"
            )
        if self.log_floor <= 0:
            raise ValidationError("log_floor must be > 0")

    @property
    def upper_hz(self) -> float:
        return self.sample_rate / 2 if self.f_max is None else float(self.f_max)

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @classmethod
    def from_settings(cls, **overrides) -> "MelConfig":
        audio = settings.audio
        values = dict(
            sample_rate=audio.sample_rate,
            n_fft=audio.n_fft,
            hop=audio.hop,
            n_mels=audio.n_mels,
            log_floor=audio.log_floor,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def mel_filterbank(cfg: MelConfig) -> np.ndarray:
    """(n_mels, n_fft // 2 + 1) triangles with peaks evenly spaced in mel, max 1 per row."""
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.upper_hz), cfg.n_mels + 2))
    bin_hz = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.n_fft
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_hz[None, :] - lower) / (center - lower)
    falling = (upper - bin_hz[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    peaks = weights.max(axis=1)
    if np.any(peaks <= 0):
        empty = int(np.argmax(peaks <= 0))
        raise ValidationError(
            f"n_mels={cfg.n_mels} too large for n_fft={cfg.n_fft}: filter {empty} covers no FFT bin"
        )
    return weights / peaks[:, None]


def stft_power(samples: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """(n_fft // 2 + 1, frames) power spectrogram, frames = 1 + len // hop."""
    pad = cfg.n_fft // 2
    padded = np.pad(samples, (pad, pad), mode="reflect")
    frames = sliding_window_view(padded, cfg.n_fft)[:: cfg.hop]
    window = get_window(cfg.window, cfg.n_fft, fftbins=True)
    spectrum = np.fft.rfft(frames * window, axis=1)
    return (np.abs(spectrum) ** 2).T


def mel_spectrogram(waveform: Waveform, cfg: MelConfig) -> np.ndarray:
    """(n_mels, frames) natural-log mel power, floored at cfg.log_floor."""
    if waveform.sample_rate != cfg.sample_rate:
        raise AudioFormatError(
            f"waveform is {waveform.sample_rate} Hz but config expects {cfg.sample_rate} Hz; resample first"
        )
    if len(waveform.samples) < cfg.n_fft:
        raise AudioFormatError(
            f"clip of {len(waveform.samples)} samples is shorter than one frame ({cfg.n_fft})"
        )
    power = stft_power(waveform.samples, cfg)
    mel = mel_filterbank(cfg) @ power
    logger.debug(f"Mel spectrogram: {mel.shape[0]} bands x {mel.shape[1]} frames")
    return np.log(np.maximum(mel, cfg.log_floor))
