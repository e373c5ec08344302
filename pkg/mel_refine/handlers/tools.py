import asyncio
import json
from typing import Dict, Optional, Sequence, Tuple

from mel_refine.audio.mel import MelConfig, mel_spectrogram
from mel_refine.audio.render import render_png
from mel_refine.audio.wav import read_wav
from mel_refine.config.settings import settings
from mel_refine.core.fmap_io import read_fmap, write_fmap
from mel_refine.core.tensor import FeatureMap
from mel_refine.metrics.bands import band_energy
from mel_refine.metrics.divergence import mean_paired_kl, pairs_from_fmap
from mel_refine.metrics.frechet import EmbeddingSet, embedding_distance
from mel_refine.models.sampler import SamplerConfig
from mel_refine.models.unet_toy import UNetConfig
from mel_refine.refine.hook import apply_block
from mel_refine.refine.params import GAIN_NAMES, RefineParams, get_preset
from mel_refine.search.demo import run_demo
from mel_refine.search.objectives import Objective, build_objective
from mel_refine.search.sweep import (
    AblationReport,
    GridSpec,
    SearchResult,
    TrialTable,
    ablation_study,
    coarse_sweep_m,
    component_study,
    grid_search,
    run_search,
)
from mel_refine.utils.cache import TrialCache
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)


def build_params(preset: Optional[str] = None, **gains: Optional[float]) -> RefineParams:
    """Preset (or identity) overridden by any explicit gains, with hook defaults from settings."""
    base = get_preset(preset) if preset else RefineParams()
    values = base.gains()
    values.update({k: v for k, v in gains.items() if k in GAIN_NAMES and v is not None})
    return RefineParams(
        **values,
        eps=settings.refine.eps,
        structure_channels=settings.refine.structure_channels,
    )


def make_objective(
    name: str,
    command: Optional[str] = None,
    reference: Optional[str] = None,
    samples: Optional[int] = None,
    serial: bool = False,
) -> Objective:
    if name == "external-command":
        return build_objective(name, command=command, serial=serial)
    if name == "fd-embeddings":
        options: Dict[str, object] = {"reference": reference, "command": command}
        if samples is not None:
            options["samples"] = samples
        return build_objective(name, **options)
    return build_objective(name)


class ToolHandlers:
    """Operations shared by the CLI and the MCP tools; domain errors propagate."""

    @staticmethod
    async def refine_features(
        in_path: str, skip_path: str, block: int, out_x: str, out_h: str, params: RefineParams
    ) -> Dict[str, object]:
        x, h = read_fmap(in_path), read_fmap(skip_path)
        logger.info(f"Refining block {block} of {in_path} with {params.to_kv()}")
        x_out, h_out = await asyncio.to_thread(apply_block, params, block, x, h)
        write_fmap(out_x, x_out)
        write_fmap(out_h, h_out)
        return {"block": block, "params": params.gains(), "x_dims": list(x_out.dims), "h_dims": list(h_out.dims)}

    @staticmethod
    async def run_demo(
        out_dir: str,
        params: RefineParams,
        levels: int = 3,
        spatial: int = 32,
        seed: int = 0,
        steps: int = 25,
    ) -> Dict[str, object]:
        ucfg = UNetConfig(levels=levels, spatial=(spatial, spatial), seed=seed)
        scfg = SamplerConfig(steps=steps, seed=seed)
        bundle = await asyncio.to_thread(run_demo, ucfg, scfg, params, out_dir)
        return dict(bundle.report, files=bundle.files)

    @staticmethod
    async def mel_spectrogram(
        wav_path: str,
        out_fmap: Optional[str] = None,
        out_png: Optional[str] = None,
        sample_rate: Optional[int] = None,
        n_fft: Optional[int] = None,
        hop: Optional[int] = None,
        n_mels: Optional[int] = None,
    ) -> Dict[str, object]:
        cfg = MelConfig.from_settings(sample_rate=sample_rate, n_fft=n_fft, hop=hop, n_mels=n_mels)
        waveform = read_wav(wav_path)
        mel = await asyncio.to_thread(mel_spectrogram, waveform, cfg)
        if out_fmap:
            write_fmap(out_fmap, FeatureMap(mel[None, None]))
        if out_png:
            render_png(mel, out_png)
        logger.info(f"Mel spectrogram of {wav_path}: {mel.shape[0]}x{mel.shape[1]}")
        return {"n_mels": int(mel.shape[0]), "frames": int(mel.shape[1]), "min": float(mel.min()), "max": float(mel.max())}

    @staticmethod
    async def frechet_distance(ref_path: str, gen_path: str) -> float:
        reference = EmbeddingSet.from_fmap(read_fmap(ref_path))
        generated = EmbeddingSet.from_fmap(read_fmap(gen_path))
        return await asyncio.to_thread(embedding_distance, reference, generated)

    @staticmethod
    async def paired_kl(pairs_path: str) -> float:
        return mean_paired_kl(pairs_from_fmap(read_fmap(pairs_path)))

    @staticmethod
    async def band_energy(in_path: str, paired_only: bool = False) -> Dict[str, object]:
        x = read_fmap(in_path)
        return band_energy(x, paired_only).to_dict()

    @staticmethod
    async def search_coarse_m(objective: Objective, candidates: Sequence[float],
                              workers: Optional[int] = None) -> Tuple[float, TrialTable]:
        return await coarse_sweep_m(objective, candidates, workers=workers, cache=TrialCache())

    @staticmethod
    async def search_grid(objective: Objective, grid: GridSpec, m: float,
                          workers: Optional[int] = None) -> Tuple[RefineParams, TrialTable]:
        return await grid_search(objective, grid, m, workers=workers, cache=TrialCache())

    @staticmethod
    async def search_full(objective: Objective, grid: GridSpec, workers: Optional[int] = None,
                          verify_ordering: bool = True) -> SearchResult:
        return await run_search(objective, grid, workers=workers, verify_ordering=verify_ordering)

    @staticmethod
    async def search_components(objective: Objective, amplify: float = 1.5, attenuate: float = 0.5,
                                workers: Optional[int] = None) -> TrialTable:
        return await component_study(objective, amplify, attenuate, workers=workers, cache=TrialCache())

    @staticmethod
    async def search_ablation(objective: Objective, params: RefineParams,
                              workers: Optional[int] = None) -> AblationReport:
        return await ablation_study(objective, params, workers=workers, cache=TrialCache())


def dump_json(payload: Dict[str, object]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=str)
