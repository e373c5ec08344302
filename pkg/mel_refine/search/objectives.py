"""Pluggable scoring recipes for the parameter search (lower is better)."""

import asyncio
import contextlib
import math
import shlex
import tempfile
from abc import ABC, abstractmethod
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, Hashable, Optional, Type, Union

import numpy as np

from mel_refine.config.settings import settings
from mel_refine.core.fmap_io import read_fmap
from mel_refine.core.tensor import FeatureMap
from mel_refine.metrics.bands import band_energy
from mel_refine.metrics.frechet import EmbeddingSet, embedding_distance
from mel_refine.models.sampler import SamplerConfig, ddim_sample
from mel_refine.models.unet_toy import ToyUNet, UNetConfig, build_unet
from mel_refine.refine.hook import BlockHook, ComponentEdit
from mel_refine.refine.params import PRESETS, RefineParams
from mel_refine.utils.exceptions import ObjectiveError, ValidationError
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)

Candidate = Union[RefineParams, BlockHook]

OBJECTIVE_REGISTRY: Dict[str, Type["Objective"]] = {}


def register_objective(name: str) -> Callable[[Type["Objective"]], Type["Objective"]]:
    def register_objective_cls(cls):
        if name in OBJECTIVE_REGISTRY:
            raise ValueError(f"Cannot register duplicate objective ({name})")
        cls.name = name
        OBJECTIVE_REGISTRY[name] = cls
        return cls
    return register_objective_cls


def build_objective(name: str, **options) -> "Objective":
    try:
        cls = OBJECTIVE_REGISTRY[name]
    except KeyError:
        raise ValidationError(f"unknown objective {name!r}; choose from {', '.join(sorted(OBJECTIVE_REGISTRY))}")
    return cls(**options)


def candidate_key(candidate: Candidate) -> Hashable:
    if isinstance(candidate, RefineParams):
        return ("params", *candidate.key())
    if isinstance(candidate, ComponentEdit):
        return ("edit", candidate.target, candidate.band, candidate.gain, candidate.blocks)
    return ("hook", id(candidate))


def require_params(candidate: Candidate, objective: str) -> RefineParams:
    if not isinstance(candidate, RefineParams):
        raise ObjectiveError(f"objective {objective!r} only scores RefineParams candidates")
    return candidate


class Objective(ABC):
    """Maps a candidate to a score; must be deterministic for fixed seeds."""

    name: str = "objective"
    # serial objectives are never evaluated concurrently
    serial: bool = False

    def cache_key(self, candidate: Candidate) -> Hashable:
        return (self.name, id(self), candidate_key(candidate))

    @abstractmethod
    async def score(self, candidate: Candidate) -> float:
        ...


@register_objective("synthetic-bowl")
class SyntheticBowl(Objective):
    """Weighted squared distance to a planted optimum."""

    def __init__(self, center: Optional[RefineParams] = None, weights: Optional[Dict[str, float]] = None):
        self.center = center or PRESETS["tango2"]
        self.weights = {"s1": 1.0, "s2": 1.0, "b1": 1.0, "b2": 1.0, "m": 1.0}
        self.weights.update(weights or {})

    def evaluate(self, params: RefineParams) -> float:
        target = self.center.gains()
        return float(sum(w * (getattr(params, k) - target[k]) ** 2 for k, w in self.weights.items()))

    async def score(self, candidate: Candidate) -> float:
        return self.evaluate(require_params(candidate, self.name))


def format_command(template: str, params: RefineParams, **extra) -> list:
    fields = dict(params.gains(), kv=params.to_kv(), **extra)
    try:
        return shlex.split(template.format(**fields))
    except (KeyError, IndexError, ValueError) as e:
        raise ValidationError(f"bad command template {template!r}: {e}")


async def run_command(argv: list, timeout: float) -> str:
    """Run a program and return its stdout; failures raise ObjectiveError."""
    try:
        process = await asyncio.create_subprocess_exec(
            *argv, stdout=asyncio.subprocess.PIPE, stderr=asyncio.subprocess.PIPE
        )
    except OSError as e:
        raise ObjectiveError(f"cannot start {argv[0]!r}: {e}")
    try:
        stdout, stderr = await asyncio.wait_for(process.communicate(), timeout=timeout)
    except asyncio.TimeoutError:
        raise ObjectiveError(f"{argv[0]!r} timed out after {timeout}s")
    finally:
        # timeout or cancellation: never leave the child running
        if process.returncode is None:
            with contextlib.suppress(ProcessLookupError):
                process.kill()
            await asyncio.shield(process.wait())
    if process.returncode != 0:
        detail = stderr.decode(errors="replace").strip().splitlines()[-1:] or [""]
        raise ObjectiveError(f"{argv[0]!r} exited with {process.returncode}: {detail[0]}")
    return stdout.decode(errors="replace")


@register_objective("external-command")
class ExternalCommand(Objective):
    """Run a user program; the last non-empty stdout line is the score.

    The template may use {s1} {s2} {b1} {b2} {m} and {kv}.
    """

    def __init__(self, command: str, timeout: Optional[float] = None, serial: bool = False):
        if not command:
            raise ValidationError("external-command objective needs a command template")
        self.command = command
        self.timeout = timeout or settings.search.command_timeout
        self.serial = serial

    async def score(self, candidate: Candidate) -> float:
        params = require_params(candidate, self.name)
        output = await run_command(format_command(self.command, params), self.timeout)
        lines = [line.strip() for line in output.splitlines() if line.strip()]
        if not lines:
            raise ObjectiveError("command printed no score")
        try:
            return float(lines[-1])
        except ValueError:
            raise ObjectiveError(f"command printed a non-numeric score {lines[-1]!r}")


def toy_embedding(sample: FeatureMap) -> np.ndarray:
    """Per channel: 4x4 mean-pooled grid of the first batch item plus log band energies."""
    _, channels, height, width = sample.dims
    grid = sample.data[0].astype(np.float64).reshape(channels, 4, height // 4, 4, width // 4).mean(axis=(2, 4))
    bands = band_energy(sample)
    energies = np.stack([bands.lf[0], bands.hf[0]], axis=1)
    return np.concatenate([grid.reshape(-1), np.log1p(energies).reshape(-1)])


def toy_embeddings(net: ToyUNet, scfg: SamplerConfig, candidate: Optional[Candidate], count: int) -> EmbeddingSet:
    vectors = [
        toy_embedding(ddim_sample(net, replace(scfg, seed=scfg.seed + i, batch=1), candidate))
        for i in range(count)
    ]
    return EmbeddingSet(np.stack(vectors))


@register_objective("fd-embeddings")
class FdEmbeddings(Objective):
    """Fréchet distance between reference embeddings and those of a refined pipeline.

    The pipeline is either the toy U-Net sampler or a command template that
    receives {out} (an FMAP path to write (1, 1, n, d) embeddings to) and the gains.
    Without a reference file the hookless toy sampler at `reference_seed` is used.
    """

    def __init__(
        self,
        reference: Optional[Union[str, Path]] = None,
        unet: Optional[UNetConfig] = None,
        sampler: Optional[SamplerConfig] = None,
        samples: int = 8,
        command: Optional[str] = None,
        reference_seed: int = 10_000,
        timeout: Optional[float] = None,
    ):
        if samples < 2:
            raise ValidationError(f"fd-embeddings needs samples >= 2, got {samples}")
        self.unet_cfg = unet or UNetConfig()
        self.sampler_cfg = sampler or SamplerConfig(steps=10)
        self.samples = samples
        self.command = command
        self.timeout = timeout or settings.search.command_timeout
        self.reference_seed = reference_seed
        self._net: Optional[ToyUNet] = None if command else build_unet(self.unet_cfg)
        self._reference: Optional[EmbeddingSet] = (
            EmbeddingSet.from_fmap(read_fmap(reference)) if reference else None
        )
        self._reference_lock = asyncio.Lock()

    async def reference(self) -> EmbeddingSet:
        async with self._reference_lock:
            if self._reference is None:
                if self._net is None:
                    raise ValidationError("fd-embeddings with a command needs a reference file")
                scfg = replace(self.sampler_cfg, seed=self.reference_seed)
                self._reference = await asyncio.to_thread(toy_embeddings, self._net, scfg, None, self.samples)
                logger.info(f"Built toy reference embeddings n={self._reference.n} d={self._reference.d}")
            return self._reference

    async def generated(self, candidate: Candidate) -> EmbeddingSet:
        if self.command is None:
            return await asyncio.to_thread(toy_embeddings, self._net, self.sampler_cfg, candidate, self.samples)
        params = require_params(candidate, self.name)
        with tempfile.TemporaryDirectory(prefix="mel_refine_") as tmp:
            out = Path(tmp) / "embeddings.fmap"
            await run_command(format_command(self.command, params, out=str(out)), self.timeout)
            if not out.exists():
                raise ObjectiveError(f"command did not write {out.name}")
            return EmbeddingSet.from_fmap(read_fmap(out))

    async def score(self, candidate: Candidate) -> float:
        reference = await self.reference()
        generated = await self.generated(candidate)
        value = embedding_distance(reference, generated)
        if not math.isfinite(value):
            raise ObjectiveError("Fréchet distance is not finite")
        return value
