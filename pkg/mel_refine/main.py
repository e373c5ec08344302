#!/usr/bin/env python3
"""
Command-line entry point for the Mel-Refine toolkit.

Results go to stdout, logs and errors to stderr. Failures print one line
`error=<ClassName> message=<json string>` and exit nonzero.
"""

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError as PydanticValidationError

from mel_refine.handlers.tools import ToolHandlers, build_params, dump_json, make_objective
from mel_refine.refine.params import GAIN_NAMES, PRESETS, RefineParams
from mel_refine.search.objectives import OBJECTIVE_REGISTRY
from mel_refine.search.sweep import GridSpec, TrialTable
from mel_refine.utils.exceptions import MelRefineError, ValidationError
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_ERROR = 2


def _add_gain_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=sorted(PRESETS), help="start from a published gain set")
    parser.add_argument("--params-file", help="file with `s1=.. s2=.. b1=.. b2=.. m=..` text")
    for name in GAIN_NAMES:
        parser.add_argument(f"--{name}", type=float, help=f"override {name}")


def _add_objective_args(parser: argparse.ArgumentParser, default: str = "synthetic-bowl") -> None:
    parser.add_argument("--objective", default=default, choices=sorted(OBJECTIVE_REGISTRY))
    parser.add_argument("--command", help="command template for external-command / fd-embeddings")
    parser.add_argument("--reference", help="reference embeddings FMAP for fd-embeddings")
    parser.add_argument("--samples", type=int, help="clips per evaluation for fd-embeddings")
    parser.add_argument("--serial", action="store_true", help="never run trials concurrently")
    parser.add_argument("--workers", type=int, help="concurrent trials (default from settings)")
    parser.add_argument("--out", help="write the ranked TSV table here instead of stdout")


def _params_from_args(args: argparse.Namespace) -> RefineParams:
    gains: Dict[str, float] = PRESETS[args.preset].gains() if args.preset else {}
    if args.params_file:
        gains = RefineParams.from_kv(Path(args.params_file).read_text(encoding="utf-8")).gains()
    gains.update({name: getattr(args, name) for name in GAIN_NAMES if getattr(args, name) is not None})
    return build_params(**gains)


def _objective_from_args(args: argparse.Namespace):
    return make_objective(args.objective, command=args.command, reference=args.reference,
                          samples=args.samples, serial=args.serial)


def _emit_table(table: TrialTable, out: Optional[str]) -> None:
    if out:
        table.write_tsv(out)
        logger.info(f"Wrote {len(table.trials)} trials to {out}")
    else:
        sys.stdout.write(table.to_tsv())


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"expected a list of numbers, got {text!r}")


def cmd_refine(args: argparse.Namespace) -> int:
    result = asyncio.run(ToolHandlers.refine_features(
        args.input, args.skip, args.block, args.out_x, args.out_h, _params_from_args(args)
    ))
    print(dump_json(result))
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    report = asyncio.run(ToolHandlers.run_demo(
        args.out_dir, _params_from_args(args),
        levels=args.levels, spatial=args.spatial, seed=args.seed, steps=args.steps,
    ))
    print(dump_json(report))
    return EXIT_OK


def cmd_mel(args: argparse.Namespace) -> int:
    summary = asyncio.run(ToolHandlers.mel_spectrogram(
        args.wav, args.out_fmap, args.out_png,
        sample_rate=args.sr, n_fft=args.nfft, hop=args.hop, n_mels=args.mels,
    ))
    print(dump_json(summary))
    return EXIT_OK


def cmd_metrics_fd(args: argparse.Namespace) -> int:
    print(f"FD={asyncio.run(ToolHandlers.frechet_distance(args.ref, args.gen))!r}")
    return EXIT_OK


def cmd_metrics_kl(args: argparse.Namespace) -> int:
    print(f"KL={asyncio.run(ToolHandlers.paired_kl(args.pairs))!r}")
    return EXIT_OK


def cmd_metrics_band(args: argparse.Namespace) -> int:
    print(dump_json(asyncio.run(ToolHandlers.band_energy(args.input, args.paired_only))))
    return EXIT_OK


def cmd_search_coarse_m(args: argparse.Namespace) -> int:
    candidates = _parse_floats(args.candidates) if args.candidates else list(GridSpec().m_coarse)
    m_best, table = asyncio.run(ToolHandlers.search_coarse_m(_objective_from_args(args), candidates, args.workers))
    _emit_table(table, args.out)
    print(f"M={m_best!r}")
    return EXIT_OK


def _grid_from_args(args: argparse.Namespace) -> GridSpec:
    return GridSpec.parse(
        args.grid or "",
        enforce_s1_ge_s2=not args.no_order_s,
        enforce_b1_ge_b2=not args.no_order_b,
    )


def cmd_search_grid(args: argparse.Namespace) -> int:
    best, table = asyncio.run(ToolHandlers.search_grid(
        _objective_from_args(args), _grid_from_args(args), args.m, args.workers
    ))
    _emit_table(table, args.out)
    print(f"BEST {best.to_kv()}")
    return EXIT_OK


def cmd_search_full(args: argparse.Namespace) -> int:
    result = asyncio.run(ToolHandlers.search_full(
        _objective_from_args(args), _grid_from_args(args), args.workers, verify_ordering=not args.no_verify
    ))
    if args.out:
        result.tables["grid"].write_tsv(args.out)
    print(dump_json(result.to_dict()))
    return EXIT_OK


def cmd_search_components(args: argparse.Namespace) -> int:
    table = asyncio.run(ToolHandlers.search_components(
        _objective_from_args(args), args.amplify, args.attenuate, args.workers
    ))
    _emit_table(table, args.out)
    return EXIT_OK


def cmd_search_ablation(args: argparse.Namespace) -> int:
    report = asyncio.run(ToolHandlers.search_ablation(
        _objective_from_args(args), _params_from_args(args), args.workers
    ))
    if args.out:
        Path(args.out).write_text(report.to_tsv(), encoding="utf-8")
        logger.info(f"Wrote {len(report.variants)} ablation rows to {args.out}")
    else:
        sys.stdout.write(report.to_tsv())
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    # lazy: pulls in fastmcp
    from mel_refine.server import main as server_main

    logger.info("Starting Mel-Refine MCP server...")
    asyncio.run(server_main())
    return EXIT_OK


class CliParser(argparse.ArgumentParser):
    """Reports usage errors as a single `error=UsageError` line."""

    def error(self, message: str):
        sys.stderr.write(f"error=UsageError message={json.dumps(f'{self.prog}: {message}')}\n")
        self.exit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="mel_refine", description="Mel-spectrogram feature refinement toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("refine", help="apply the decoder hook to serialized features")
    p.add_argument("--in", dest="input", required=True, help="backbone features (FMAP)")
    p.add_argument("--skip", required=True, help="skip features (FMAP)")
    p.add_argument("--block", type=int, required=True, help="decoder block index, 0 at the bottleneck")
    p.add_argument("--out-x", required=True)
    p.add_argument("--out-h", required=True)
    _add_gain_args(p)
    p.set_defaults(handler=cmd_refine)

    p = commands.add_parser("demo", help="baseline vs refined toy sampling bundle")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--spatial", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--out-dir", default="demo_out")
    _add_gain_args(p)
    p.set_defaults(handler=cmd_demo)

    p = commands.add_parser("mel", help="log-mel spectrogram of a WAV file")
    p.add_argument("--wav", required=True)
    p.add_argument("--sr", type=int)
    p.add_argument("--nfft", type=int)
    p.add_argument("--hop", type=int)
    p.add_argument("--mels", type=int)
    p.add_argument("--out-fmap")
    p.add_argument("--out-png")
    p.set_defaults(handler=cmd_mel)

    metrics = commands.add_parser("metrics", help="objective metrics").add_subparsers(dest="metric", required=True)
    p = metrics.add_parser("fd", help="Fréchet distance between embedding sets")
    p.add_argument("--ref", required=True)
    p.add_argument("--gen", required=True)
    p.set_defaults(handler=cmd_metrics_fd)
    p = metrics.add_parser("kl", help="mean paired KL(ref || gen)")
    p.add_argument("--pairs", required=True)
    p.set_defaults(handler=cmd_metrics_kl)
    p = metrics.add_parser("band", help="LF/HF spectral energy")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--paired-only", action="store_true", help="only conjugate-paired bins")
    p.set_defaults(handler=cmd_metrics_band)

    search = commands.add_parser("search", help="parameter search").add_subparsers(dest="phase", required=True)
    p = search.add_parser("coarse-m", help="sweep the structure gain m")
    p.add_argument("--candidates", help="comma-separated m values")
    _add_objective_args(p)
    p.set_defaults(handler=cmd_search_coarse_m)

    for name, handler, help_text in (
        ("grid", cmd_search_grid, "grid search over s1, s2, b1, b2 at fixed m"),
        ("full", cmd_search_full, "coarse m, fine m, ordering check, grid search"),
    ):
        p = search.add_parser(name, help=help_text)
        if name == "grid":
            p.add_argument("--m", type=float, required=True)
        else:
            p.add_argument("--no-verify", action="store_true", help="skip the ordering check")
        p.add_argument("--grid", help="e.g. s1=1.0:1.6:0.1,b2=0.1:0.5:0.1,m=1:3:0.5")
        p.add_argument("--no-order-s", action="store_true", help="drop the s1 >= s2 constraint")
        p.add_argument("--no-order-b", action="store_true", help="drop the b1 >= b2 constraint")
        _add_objective_args(p)
        p.set_defaults(handler=handler)

    p = search.add_parser("components", help="amplify/attenuate each band of each stream")
    p.add_argument("--amplify", type=float, default=1.5)
    p.add_argument("--attenuate", type=float, default=0.5)
    # the bowl only scores gain sets
    _add_objective_args(p, default="fd-embeddings")
    p.set_defaults(handler=cmd_search_components)

    p = search.add_parser("ablation", help="score a tuned gain set with each mechanism switched off")
    _add_gain_args(p)
    _add_objective_args(p)
    p.set_defaults(handler=cmd_search_ablation, preset="tango2")

    p = commands.add_parser("serve", help="run the MCP server")
    p.set_defaults(handler=cmd_serve)
    return parser


def _report_error(error: BaseException) -> None:
    message = str(error).splitlines()[0] if str(error) else type(error).__name__
    sys.stderr.write(f"error={type(error).__name__} message={json.dumps(message)}\n")


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except (MelRefineError, PydanticValidationError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        _report_error(e)
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_OK
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        _report_error(e)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
