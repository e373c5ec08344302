"""Deterministic parameter sweeps: coarse/fine m, ordering check, grid search."""

import asyncio
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mel_refine.config.settings import settings
from mel_refine.refine.hook import ComponentEdit
from mel_refine.refine.params import GAIN_NAMES, RefineParams
from mel_refine.search.objectives import Candidate, Objective
from mel_refine.utils.cache import TrialCache
from mel_refine.utils.exceptions import AllTrialsFailedError, EmptyGridError, ValidationError
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)

# grid values are rounded so 0.1-step sweeps land on the same floats as typed presets
GRID_DECIMALS = 10

TSV_COLUMNS = ("s1", "s2", "b1", "b2", "m", "score", "status")


class ParamRange(BaseModel):
    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    step: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "ParamRange":
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("range bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"lo {self.lo} exceeds hi {self.hi}")
        return self

    def values(self) -> List[float]:
        count = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return [round(self.lo + i * self.step, GRID_DECIMALS) for i in range(count)]

    def first(self) -> float:
        return self.values()[0]

    def last(self) -> float:
        return self.values()[-1]

    def midpoint(self) -> float:
        values = self.values()
        return values[len(values) // 2]

    @classmethod
    def parse(cls, text: str) -> "ParamRange":
        """`lo:hi:step`, or a single value."""
        parts = text.split(":")
        try:
            numbers = [float(p) for p in parts]
        except ValueError:
            raise ValidationError(f"bad range {text!r}; expected lo:hi:step")
        if len(numbers) == 1:
            return cls(lo=numbers[0], hi=numbers[0], step=1.0)
        if len(numbers) != 3:
            raise ValidationError(f"bad range {text!r}; expected lo:hi:step")
        return cls(lo=numbers[0], hi=numbers[1], step=numbers[2])


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    s1: ParamRange = ParamRange(lo=1.0, hi=1.6, step=0.1)
    s2: ParamRange = ParamRange(lo=1.0, hi=1.6, step=0.1)
    b1: ParamRange = ParamRange(lo=0.1, hi=1.0, step=0.1)
    b2: ParamRange = ParamRange(lo=0.1, hi=1.0, step=0.1)
    m_coarse: Tuple[float, ...] = (1.0, 1.5, 2.0, 2.5, 3.0)
    m_fine_step: float = Field(0.1, gt=0)
    enforce_s1_ge_s2: bool = True
    enforce_b1_ge_b2: bool = True

    @model_validator(mode="after")
    def _valid(self) -> "GridSpec":
        if not self.m_coarse:
            raise ValueError("m_coarse must not be empty")
        if min(self.m_coarse) < 1.0:
            raise ValueError("m candidates must be >= 1")
        for name in ("s1", "s2", "b1", "b2"):
            if getattr(self, name).lo <= 0:
                raise ValueError(f"{name} range must be positive")
        return self

    def constraint_names(self) -> List[str]:
        names = []
        if self.enforce_s1_ge_s2:
            names.append("s1>=s2")
        if self.enforce_b1_ge_b2:
            names.append("b1>=b2")
        return names

    def points(self) -> List[Tuple[float, float, float, float]]:
        """Surviving (s1, s2, b1, b2) in lexicographic order."""
        grid = itertools.product(self.s1.values(), self.s2.values(), self.b1.values(), self.b2.values())
        return [
            (s1, s2, b1, b2)
            for s1, s2, b1, b2 in grid
            if not (self.enforce_s1_ge_s2 and s1 < s2) and not (self.enforce_b1_ge_b2 and b1 < b2)
        ]

    @classmethod
    def parse(cls, text: str, **overrides) -> "GridSpec":
        """`s1=1.0:1.6:0.1,b2=0.1:0.5:0.1,m=1:3:0.5` style overrides."""
        values: Dict[str, object] = {}
        for token in filter(None, (t.strip() for t in text.replace(";", ",").split(","))):
            if "=" not in token:
                raise ValidationError(f"expected name=lo:hi:step, got {token!r}")
            name, raw = (part.strip() for part in token.split("=", 1))
            if name in ("s1", "s2", "b1", "b2"):
                values[name] = ParamRange.parse(raw)
            elif name == "m":
                values["m_coarse"] = tuple(ParamRange.parse(raw).values())
            else:
                raise ValidationError(f"unknown grid parameter {name!r}")
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class TrialResult:
    candidate: Candidate
    score: Optional[float]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.score is not None

    @property
    def status(self) -> str:
        return "ok" if self.ok else "failed"

    @property
    def label(self) -> str:
        if isinstance(self.candidate, RefineParams):
            return "baseline" if self.candidate.is_identity else self.candidate.to_kv()
        return getattr(self.candidate, "label", type(self.candidate).__name__)

    def sort_key(self) -> tuple:
        gains = self.candidate.gains() if isinstance(self.candidate, RefineParams) else {}
        return (self.score, *(gains.get(name, 0.0) for name in ("s1", "s2", "b1", "b2", "m")))


@dataclass
class TrialTable:
    """Trial outcomes in evaluation order, rankable by score."""

    trials: List[TrialResult] = field(default_factory=list)

    @property
    def succeeded(self) -> List[TrialResult]:
        return [t for t in self.trials if t.ok]

    @property
    def failed(self) -> List[TrialResult]:
        return [t for t in self.trials if not t.ok]

    def ranked(self) -> List[TrialResult]:
        """Successful trials by (score, s1, s2, b1, b2, m), then failures in evaluation order."""
        return sorted(self.succeeded, key=TrialResult.sort_key) + self.failed

    def best(self) -> TrialResult:
        succeeded = self.succeeded
        if not succeeded:
            raise AllTrialsFailedError(f"all {len(self.trials)} trials failed")
        return min(succeeded, key=TrialResult.sort_key)

    def to_tsv(self) -> str:
        """Ranked rows; tables holding non-parameter hooks use a label column instead of gains."""
        by_gains = all(isinstance(t.candidate, RefineParams) for t in self.trials)
        lines = ["\t".join(TSV_COLUMNS if by_gains else ("label", "score", "status"))]
        for trial in self.ranked():
            if by_gains:
                cells = [f"{getattr(trial.candidate, name):g}" for name in GAIN_NAMES]
            else:
                cells = [trial.label]
            score = repr(trial.score) if trial.ok else "nan"
            lines.append("\t".join(cells + [score, trial.status]))
        return "\n".join(lines) + "\n"

    def write_tsv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    def to_dict(self) -> List[Dict[str, object]]:
        return [
            {"label": t.label, "score": t.score, "status": t.status, "error": t.error}
            for t in self.ranked()
        ]


async def _evaluate(objective: Objective, candidate: Candidate, cache: Optional[TrialCache]) -> TrialResult:
    key = objective.cache_key(candidate)
    if cache is not None:
        cached = await cache.get(key)
        if cached is not None:
            return cached
    try:
        score = float(await objective.score(candidate))
        if not math.isfinite(score):
            result = TrialResult(candidate, None, f"non-finite score {score}")
        else:
            result = TrialResult(candidate, score)
    except Exception as e:
        result = TrialResult(candidate, None, f"{type(e).__name__}: {e}")
    if not result.ok:
        logger.warning(f"Trial failed ({objective.name}) {getattr(candidate, 'label', candidate)}: {result.error}")
    if cache is not None:
        await cache.set(key, result)
    return result


async def evaluate_trials(
    objective: Objective,
    candidates: Sequence[Candidate],
    workers: Optional[int] = None,
    cache: Optional[TrialCache] = None,
) -> TrialTable:
    """Score candidates with bounded concurrency; the table keeps candidate order."""
    limit = 1 if objective.serial else max(1, workers or settings.search.workers)
    semaphore = asyncio.Semaphore(limit)

    async def run(candidate: Candidate) -> TrialResult:
        async with semaphore:
            return await _evaluate(objective, candidate, cache)

    trials = await asyncio.gather(*(run(c) for c in candidates))
    table = TrialTable(list(trials))
    logger.info(f"Evaluated {len(table.trials)} trials with {objective.name}: {len(table.failed)} failed")
    return table


def _anchor(anchor: Optional[RefineParams]) -> RefineParams:
    return anchor if anchor is not None else RefineParams()


def _m_best(table: TrialTable) -> float:
    succeeded = table.succeeded
    if not succeeded:
        raise AllTrialsFailedError(f"all {len(table.trials)} m trials failed")
    return min(succeeded, key=lambda t: (t.score, t.candidate.m)).candidate.m


async def coarse_sweep_m(
    objective: Objective,
    candidates: Sequence[float],
    anchor: Optional[RefineParams] = None,
    workers: Optional[int] = None,
    cache: Optional[TrialCache] = None,
) -> Tuple[float, TrialTable]:
    """Score each m with the other gains held at `anchor`; ties go to the smaller m."""
    if not candidates:
        raise ValidationError("m candidates must not be empty")
    base = _anchor(anchor)
    ms = sorted(set(round(float(m), GRID_DECIMALS) for m in candidates))
    table = await evaluate_trials(objective, [base.model_copy(update={"m": m}) for m in ms], workers, cache)
    best = _m_best(table)
    logger.info(f"Coarse m sweep: m={best}")
    return best, table


async def refine_m_sweep(
    objective: Objective,
    coarse_best: float,
    candidates: Sequence[float],
    step: float = 0.1,
    anchor: Optional[RefineParams] = None,
    workers: Optional[int] = None,
    cache: Optional[TrialCache] = None,
) -> Tuple[float, TrialTable]:
    """Fine sweep between the coarse winner's neighbouring candidates."""
    if step <= 0:
        raise ValidationError(f"m fine step must be > 0, got {step}")
    coarse_best = round(float(coarse_best), GRID_DECIMALS)
    ms = sorted(set(round(float(m), GRID_DECIMALS) for m in candidates) | {coarse_best})
    i = ms.index(coarse_best)
    lo = max(1.0, ms[i - 1] if i > 0 else coarse_best)
    hi = ms[i + 1] if i + 1 < len(ms) else coarse_best
    fine = sorted(set(np.round(np.arange(lo, hi + step * 0.5, step), GRID_DECIMALS).tolist()) | {coarse_best})
    fine = [m for m in fine if lo <= m <= hi]
    base = _anchor(anchor)
    table = await evaluate_trials(objective, [base.model_copy(update={"m": m}) for m in fine], workers, cache)
    best = _m_best(table)
    logger.info(f"Fine m sweep over [{lo}, {hi}]: m={best}")
    return best, table


@dataclass(frozen=True)
class OrderingReport:
    """Whether the descending assignment (first >= second) scored no worse."""

    s_descending: bool
    b_descending: bool
    table: TrialTable

    def to_dict(self) -> Dict[str, object]:
        return {"s1_ge_s2": self.s_descending, "b1_ge_b2": self.b_descending}


async def check_ordering(
    objective: Objective,
    grid: GridSpec,
    m: float,
    anchor: Optional[RefineParams] = None,
    workers: Optional[int] = None,
    cache: Optional[TrialCache] = None,
) -> OrderingReport:
    """Probe (hi, lo) against (lo, hi) for each gain pair, the other pair at its midpoint."""
    base = _anchor(anchor).model_copy(update={"m": m})
    s_mid = {"s1": grid.s1.midpoint(), "s2": grid.s2.midpoint()}
    b_mid = {"b1": grid.b1.midpoint(), "b2": grid.b2.midpoint()}
    probes = [
        base.model_copy(update={"s1": grid.s1.last(), "s2": grid.s2.first(), **b_mid}),
        base.model_copy(update={"s1": grid.s1.first(), "s2": grid.s2.last(), **b_mid}),
        base.model_copy(update={"b1": grid.b1.last(), "b2": grid.b2.first(), **s_mid}),
        base.model_copy(update={"b1": grid.b1.first(), "b2": grid.b2.last(), **s_mid}),
    ]
    table = await evaluate_trials(objective, probes, workers, cache)
    s_desc, s_asc, b_desc, b_asc = table.trials

    def descending_wins(desc: TrialResult, asc: TrialResult) -> bool:
        # an unmeasurable comparison keeps the constraint on
        if not (desc.ok and asc.ok):
            return True
        return desc.score <= asc.score

    report = OrderingReport(descending_wins(s_desc, s_asc), descending_wins(b_desc, b_asc), table)
    logger.info(f"Ordering check: {report.to_dict()}")
    return report


async def grid_search(
    objective: Objective,
    grid: GridSpec,
    m_fixed: float,
    anchor: Optional[RefineParams] = None,
    workers: Optional[int] = None,
    cache: Optional[TrialCache] = None,
) -> Tuple[RefineParams, TrialTable]:
    """Evaluate every surviving (s1, s2, b1, b2) at m_fixed; ties go lexicographically smaller."""
    points = grid.points()
    if not points:
        constraints = ", ".join(grid.constraint_names()) or "none"
        raise EmptyGridError(f"no grid point survives the ordering constraints ({constraints})")
    base = _anchor(anchor).model_copy(update={"m": m_fixed})
    candidates = [base.model_copy(update=dict(zip(("s1", "s2", "b1", "b2"), p))) for p in points]
    logger.info(f"Grid search: {len(candidates)} points at m={m_fixed}")
    table = await evaluate_trials(objective, candidates, workers, cache)
    best = table.best()
    return best.candidate, table


@dataclass(frozen=True)
class SearchResult:
    best: RefineParams
    m_coarse: float
    m_fine: float
    ordering: Optional[OrderingReport]
    tables: Dict[str, TrialTable]

    def to_dict(self) -> Dict[str, object]:
        return {
            "best": self.best.gains(),
            "m_coarse": self.m_coarse,
            "m_fine": self.m_fine,
            "ordering": self.ordering.to_dict() if self.ordering else None,
        }


async def run_search(
    objective: Objective,
    grid: Optional[GridSpec] = None,
    anchor: Optional[RefineParams] = None,
    workers: Optional[int] = None,
    verify_ordering: bool = True,
    fine_m: bool = True,
    cache: Optional[TrialCache] = None,
) -> SearchResult:
    """Coarse m, optional fine m, ordering check, then the grid search."""
    grid = grid or GridSpec()
    cache = cache if cache is not None else TrialCache()
    m_coarse, coarse_table = await coarse_sweep_m(objective, grid.m_coarse, anchor, workers, cache)
    tables = {"coarse-m": coarse_table}
    m_best = m_coarse
    if fine_m:
        m_best, tables["fine-m"] = await refine_m_sweep(
            objective, m_coarse, grid.m_coarse, grid.m_fine_step, anchor, workers, cache
        )
    ordering = None
    if verify_ordering:
        ordering = await check_ordering(objective, grid, m_best, anchor, workers, cache)
        tables["ordering"] = ordering.table
        grid = grid.model_copy(update={
            "enforce_s1_ge_s2": grid.enforce_s1_ge_s2 and ordering.s_descending,
            "enforce_b1_ge_b2": grid.enforce_b1_ge_b2 and ordering.b_descending,
        })
    best, tables["grid"] = await grid_search(objective, grid, m_best, anchor, workers, cache)
    stats = await cache.get_stats()
    logger.info(f"Search done: {best.to_kv()} (cache hit rate {stats['hit_rate']:.2f})")
    return SearchResult(best, m_coarse, m_best, ordering, tables)


def component_edits(amplify: float = 1.5, attenuate: float = 0.5) -> List[ComponentEdit]:
    """amplify/attenuate x skip/backbone x hf/lf, in that nesting order."""
    if not amplify > 1.0:
        raise ValidationError(f"amplify gain must be > 1, got {amplify}")
    if not 0.0 < attenuate < 1.0:
        raise ValidationError(f"attenuate gain must lie in (0, 1), got {attenuate}")
    return [
        ComponentEdit(target=target, band=band, gain=gain)
        for gain in (amplify, attenuate)
        for target in ("skip", "backbone")
        for band in ("hf", "lf")
    ]


async def component_study(
    objective: Objective,
    amplify: float = 1.5,
    attenuate: float = 0.5,
    workers: Optional[int] = None,
    cache: Optional[TrialCache] = None,
) -> TrialTable:
    """Score the unmodified pipeline and each single-component edit."""
    candidates: List[Candidate] = [RefineParams()] + list(component_edits(amplify, attenuate))
    return await evaluate_trials(objective, candidates, workers, cache)


# variant name -> gains reset to identity; the first entry is the tuned point itself
ABLATIONS: Tuple[Tuple[str, Dict[str, float]], ...] = (
    ("tuned", {}),
    ("no-skip-hf", {"s1": 1.0, "s2": 1.0}),
    ("no-structure", {"m": 1.0}),
    ("no-backbone-hf", {"b1": 1.0, "b2": 1.0}),
)


@dataclass(frozen=True)
class AblationReport:
    """Scores of a tuned gain set and of the same set with one mechanism switched off."""

    variants: Tuple[str, ...]
    table: TrialTable

    def rows(self) -> List[Tuple[str, TrialResult]]:
        return list(zip(self.variants, self.table.trials))

    def to_tsv(self) -> str:
        lines = ["\t".join(("variant",) + TSV_COLUMNS)]
        for name, trial in self.rows():
            cells = [f"{getattr(trial.candidate, g):g}" for g in GAIN_NAMES]
            score = repr(trial.score) if trial.ok else "nan"
            lines.append("\t".join([name] + cells + [score, trial.status]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> Dict[str, object]:
        return {
            name: {"params": t.candidate.gains(), "score": t.score, "status": t.status, "error": t.error}
            for name, t in self.rows()
        }


async def ablation_study(
    objective: Objective,
    params: RefineParams,
    workers: Optional[int] = None,
    cache: Optional[TrialCache] = None,
) -> AblationReport:
    """Score `params`, then `params` with skip boost, structure scaling or backbone filtering turned off."""
    variants = tuple(name for name, _ in ABLATIONS)
    candidates = [params.model_copy(update=reset) for _, reset in ABLATIONS]
    table = await evaluate_trials(objective, candidates, workers, cache)
    if not table.succeeded:
        raise AllTrialsFailedError(f"all {len(table.trials)} ablation trials failed")
    logger.info(f"Ablation study around {params.to_kv()}: {len(table.failed)} failed")
    return AblationReport(variants, table)
