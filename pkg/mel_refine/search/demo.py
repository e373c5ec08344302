"""Side-by-side baseline/refined sampling bundle."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from mel_refine.audio.render import render_png
from mel_refine.core.fmap_io import write_fmap
from mel_refine.core.tensor import FeatureMap
from mel_refine.metrics.bands import band_ratio
from mel_refine.models.sampler import SamplerConfig, ddim_sample
from mel_refine.models.unet_toy import BlockCapture, UNetConfig, build_unet
from mel_refine.refine.params import RefineParams
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)


@dataclass
class DemoBundle:
    out_dir: Path
    files: List[str] = field(default_factory=list)
    report: Dict[str, object] = field(default_factory=dict)

    def paths(self) -> List[Path]:
        return [self.out_dir / name for name in self.files]


def capture_report(captures: List[BlockCapture]) -> List[Dict[str, object]]:
    """Paired-bin band ratios (after / before) of each block's backbone and skip."""
    return [
        {
            "block": cap.block_index,
            "backbone": band_ratio(cap.x, cap.xr),
            "skip": band_ratio(cap.h, cap.hr),
        }
        for cap in captures
    ]


def _write_map(bundle: DemoBundle, name: str, x: FeatureMap, png: bool = False) -> None:
    write_fmap(bundle.out_dir / f"{name}.fmap", x)
    bundle.files.append(f"{name}.fmap")
    if png:
        render_png(x.slice(0, 0), bundle.out_dir / f"{name}.png")
        bundle.files.append(f"{name}.png")


def run_demo(
    ucfg: UNetConfig,
    scfg: SamplerConfig,
    params: RefineParams,
    out_dir: Union[str, Path],
    stem: str = "demo",
) -> DemoBundle:
    """Sample without and with the hook, then write both outputs, first-step captures and a JSON report."""
    bundle = DemoBundle(Path(out_dir))
    bundle.out_dir.mkdir(parents=True, exist_ok=True)
    net = build_unet(ucfg)

    baseline = ddim_sample(net, scfg)
    captures: List[BlockCapture] = []
    refined = ddim_sample(net, scfg, params, capture=captures)

    _write_map(bundle, f"{stem}.baseline", baseline, png=True)
    _write_map(bundle, f"{stem}.refined", refined, png=True)
    for cap in captures:
        for part in ("x", "h", "xr", "hr"):
            _write_map(bundle, f"{stem}.blk{cap.block_index}.{part}", getattr(cap, part))

    diff = np.abs(refined.data.astype(np.float64) - baseline.data.astype(np.float64))
    bundle.report = {
        "params": params.gains(),
        "unet": {"levels": ucfg.levels, "base_channels": ucfg.base_channels, "spatial": list(ucfg.spatial),
                 "seed": ucfg.seed, "checksum": net.checksum()},
        "sampler": {"steps": scfg.steps, "seed": scfg.seed, "batch": scfg.batch},
        "max_abs_diff": float(diff.max()),
        "blocks": capture_report(captures),
    }
    report_name = f"{stem}.report.json"
    (bundle.out_dir / report_name).write_text(
        json.dumps(bundle.report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    bundle.files.append(report_name)
    logger.info(f"Demo bundle written to {bundle.out_dir}: max_abs_diff={bundle.report['max_abs_diff']:.6g}")
    return bundle
