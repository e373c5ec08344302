#!/usr/bin/env python3
import asyncio
from typing import Optional

from dotenv import load_dotenv
from fastmcp import FastMCP
from starlette.requests import Request
from starlette.responses import JSONResponse

from mel_refine.config.settings import settings
from mel_refine.handlers.tools import ToolHandlers, build_params, dump_json, make_objective
from mel_refine.search.objectives import OBJECTIVE_REGISTRY
from mel_refine.search.sweep import GridSpec
from mel_refine.utils.logger import Logger

load_dotenv()

logger = Logger.get_logger(__name__)

app = FastMCP(name="mel_refine")


@app.custom_route("/health", methods=["GET"])
async def health_check(request: Request) -> JSONResponse:
    """Health check endpoint; lists the registered objectives."""
    logger.info("Health check")
    return JSONResponse({"status": "ok", "objectives": sorted(OBJECTIVE_REGISTRY)})


@app.tool()
async def refine_features(
    in_path: str,
    skip_path: str,
    block: int,
    out_x: str,
    out_h: str,
    preset: Optional[str] = None,
    s1: Optional[float] = None,
    s2: Optional[float] = None,
    b1: Optional[float] = None,
    b2: Optional[float] = None,
    m: Optional[float] = None,
) -> str:
    """
    Refine one decoder block's backbone and skip features stored as FMAP files.

    Args:
        in_path: Backbone feature FMAP
        skip_path: Skip feature FMAP
        block: Decoder block index counted from the bottleneck (only 0 and 1 change)
        out_x: Where to write refined backbone features
        out_h: Where to write refined skip features
        preset: Optional gain preset (identity, tango, mustango, tango2)

    Returns:
        JSON summary of the refinement
    """
    try:
        params = build_params(preset, s1=s1, s2=s2, b1=b1, b2=b2, m=m)
        return dump_json(await ToolHandlers.refine_features(in_path, skip_path, block, out_x, out_h, params))
    except Exception as e:
        logger.error(f"Error refining features: {e}")
        return f"Error: {str(e)}"


@app.tool()
async def run_demo(
    out_dir: str,
    preset: Optional[str] = "tango2",
    levels: int = 3,
    spatial: int = 32,
    seed: int = 0,
    steps: int = 25,
) -> str:
    """
    Sample the toy U-Net with and without refinement and write the comparison bundle.

    Returns:
        JSON report (max-abs difference, per-block band-energy ratios, written files)
    """
    try:
        logger.info(f"Running demo into {out_dir} with preset {preset}")
        report = await ToolHandlers.run_demo(out_dir, build_params(preset), levels, spatial, seed, steps)
        return dump_json(report)
    except Exception as e:
        logger.error(f"Error running demo: {e}")
        return f"Error: {str(e)}"


@app.tool()
async def mel_spectrogram(wav_path: str, out_fmap: Optional[str] = None, out_png: Optional[str] = None) -> str:
    """
    Compute the log-mel spectrogram of a WAV file with the configured front end.

    Returns:
        JSON summary (bands, frames, value range)
    """
    try:
        return dump_json(await ToolHandlers.mel_spectrogram(wav_path, out_fmap, out_png))
    except Exception as e:
        logger.error(f"Error computing mel spectrogram: {e}")
        return f"Error: {str(e)}"


@app.tool()
async def frechet_distance(ref_path: str, gen_path: str) -> str:
    """Fréchet distance between two (1, 1, n, d) embedding FMAP files."""
    try:
        return f"FD={await ToolHandlers.frechet_distance(ref_path, gen_path)!r}"
    except Exception as e:
        logger.error(f"Error computing Fréchet distance: {e}")
        return f"Error: {str(e)}"


@app.tool()
async def paired_kl(pairs_path: str) -> str:
    """Mean KL(ref || gen) over the rows of a (1, 2, n, k) posterior FMAP file."""
    try:
        return f"KL={await ToolHandlers.paired_kl(pairs_path)!r}"
    except Exception as e:
        logger.error(f"Error computing paired KL: {e}")
        return f"Error: {str(e)}"


@app.tool()
async def band_energy(in_path: str, paired_only: bool = False) -> str:
    """LF/HF spectral energy of a feature FMAP file, per slice and in total."""
    try:
        return dump_json(await ToolHandlers.band_energy(in_path, paired_only))
    except Exception as e:
        logger.error(f"Error computing band energy: {e}")
        return f"Error: {str(e)}"


@app.tool()
async def search_grid(
    m: float,
    objective: str = "synthetic-bowl",
    grid: str = "",
    order_s: bool = True,
    order_b: bool = True,
    command: Optional[str] = None,
    reference: Optional[str] = None,
) -> str:
    """
    Grid search over s1, s2, b1, b2 at a fixed m.

    Args:
        m: Structure gain found by the m sweep
        objective: synthetic-bowl, external-command or fd-embeddings
        grid: Range overrides such as "s1=1.0:1.6:0.1,b2=0.1:0.5:0.1"
        order_s: Keep only s1 >= s2
        order_b: Keep only b1 >= b2

    Returns:
        Ranked TSV table (s1, s2, b1, b2, m, score, status)
    """
    try:
        spec = GridSpec.parse(grid, enforce_s1_ge_s2=order_s, enforce_b1_ge_b2=order_b)
        _, table = await ToolHandlers.search_grid(
            make_objective(objective, command=command, reference=reference), spec, m
        )
        return table.to_tsv()
    except Exception as e:
        logger.error(f"Error running grid search: {e}")
        return f"Error: {str(e)}"


@app.tool()
async def search_ablation(
    preset: Optional[str] = "tango2",
    objective: str = "synthetic-bowl",
    s1: Optional[float] = None,
    s2: Optional[float] = None,
    b1: Optional[float] = None,
    b2: Optional[float] = None,
    m: Optional[float] = None,
    command: Optional[str] = None,
    reference: Optional[str] = None,
) -> str:
    """
    Score a tuned gain set against the same set with skip boost, structure scaling
    or backbone filtering switched off.

    Returns:
        TSV table (variant, s1, s2, b1, b2, m, score, status)
    """
    try:
        params = build_params(preset, s1=s1, s2=s2, b1=b1, b2=b2, m=m)
        report = await ToolHandlers.search_ablation(
            make_objective(objective, command=command, reference=reference), params
        )
        return report.to_tsv()
    except Exception as e:
        logger.error(f"Error running ablation study: {e}")
        return f"Error: {str(e)}"


async def main():
    """Main entry point to run the MCP server."""
    try:
        transport = settings.server.transport
        host = settings.server.host
        port = settings.server.port
        logger.info(f"Starting server with transport: {transport}")

        if transport in ["http", "sse", "streamable-http"]:
            logger.info(f"Using host: {host}, port: {port}")
            await app.run_async(transport=transport, host=host, port=port)
        else:
            await app.run_async(transport=transport)
    except KeyboardInterrupt:
        logger.info("Server shutdown requested by user")
    except Exception as e:
        logger.error(f"Server error: {e}", exc_info=True)
        raise


if __name__ == "__main__":
    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        logger.info("Server shutdown complete")
