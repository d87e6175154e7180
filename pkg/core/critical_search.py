"""
Critical search - bisection on the amplitude A for the dispersal/blow-up threshold

A probe evolves the initial data with amplitude A and classifies the result:
  flipped       w(t,0,0) switched poles, or the projection broke down
  dispersed     reached t_end with the local potential energy decayed
  inconclusive  neither; re-probed with doubled t_end up to a cap

Each probe lives in its own run directory A=<A>_B=<B>_N=<N> under the search
directory, so an interrupted search can be resumed without re-running
finished probes.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .config import RunConfig
from .constants import (
    NUMERICS, BracketInvalid, BudgetExhausted, DomainError, RunOutcome, SearchOutcome, WaveMapError,
)
from .evolution import Evolution
from .series import TRACE_COLUMNS, write_table
from .snapshot import atomic_write

logger = logging.getLogger("wavemap.critical_search")


@dataclass(frozen=True)
class SearchConfig:
    A_lo: float
    A_hi: float
    tol_A: float = NUMERICS.SEARCH_TOL_A
    max_runs: int = NUMERICS.SEARCH_MAX_RUNS
    t_end: float = NUMERICS.SEARCH_T_END
    t_end_cap: float = NUMERICS.SEARCH_T_END_CAP

    def __post_init__(self):
        if not self.A_lo < self.A_hi:
            raise DomainError(f"search bracket needs A_lo < A_hi, got [{self.A_lo}, {self.A_hi}]")
        if not self.tol_A > 0:
            raise DomainError(f"tol_A must be positive, got {self.tol_A}")
        if self.t_end_cap < self.t_end:
            raise DomainError(f"t_end_cap {self.t_end_cap} is below t_end {self.t_end}")

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "SearchConfig":
        if config.search is None:
            raise DomainError("configuration has no [search] section")
        s = config.search
        return cls(A_lo=s.A_lo, A_hi=s.A_hi, tol_A=s.tol_A, max_runs=s.max_runs,
                   t_end=config.time.t_end, t_end_cap=max(s.t_end_cap, config.time.t_end))

    def bisection_runs(self) -> int:
        """Probes needed after validation to shrink the bracket below tol_A."""
        return max(0, math.ceil(math.log2((self.A_hi - self.A_lo) / self.tol_A)))


@dataclass(frozen=True)
class ProbeResult:
    outcome: SearchOutcome
    flip_time: Optional[float] = None
    hover_duration: Optional[float] = None


@dataclass(frozen=True)
class SearchRecord:
    A: float
    outcome: SearchOutcome
    t_end: float
    flip_time: Optional[float]
    hover_duration: Optional[float]
    A_lo: float
    A_hi: float

    @property
    def width(self) -> float:
        return self.A_hi - self.A_lo


@dataclass
class SearchTrace:
    records: list[SearchRecord] = field(default_factory=list)

    def append(self, record: SearchRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def sub_critical(self) -> list[SearchRecord]:
        """Dispersed probes ordered by amplitude."""
        return sorted((r for r in self.records if r.outcome is SearchOutcome.DISPERSED), key=lambda r: r.A)

    def widths_non_increasing(self) -> bool:
        widths = [r.width for r in self.records]
        return all(b <= a for a, b in zip(widths, widths[1:]))

    def rows(self):
        for r in self.records:
            yield (r.A, r.outcome.value, r.t_end, r.flip_time, r.hover_duration, r.A_lo, r.A_hi)

    def write_csv(self, path: Path, config_hex: str) -> None:
        write_table(path, TRACE_COLUMNS, self.rows(), config_hex)


Classifier = Callable[[float, float], ProbeResult]


# ============================================================
# CLASSIFICATION
# ============================================================

def classify_summary(summary: dict) -> ProbeResult:
    """Map an evolution summary onto a bisection outcome."""
    outcome = RunOutcome(summary["outcome"])
    hover = (summary.get("scaling") or {}).get("hover_duration")
    A = summary.get("A")
    if outcome is RunOutcome.FLIPPED:
        return ProbeResult(SearchOutcome.FLIPPED, summary["flip"]["time"], hover)
    if outcome is RunOutcome.PROJECTION_FAILURE:
        failure = summary.get("projection_failure") or {}
        if failure.get("after_hover"):
            logger.info(f"A={A}: projection failure after hovering, counted as blow-up")
        else:
            logger.warning(f"A={A}: projection failure without hovering, counted as blow-up")
        return ProbeResult(SearchOutcome.FLIPPED, failure.get("t"), hover)
    if outcome in (RunOutcome.DISPERSED, RunOutcome.DISPERSED_TRIVIAL):
        return ProbeResult(SearchOutcome.DISPERSED, None, hover)
    if outcome is RunOutcome.FAILED:
        logger.warning(f"A={A}: evolution failed (non-finite state), counted as inconclusive")
    return ProbeResult(SearchOutcome.INCONCLUSIVE, None, hover)


def run_directory_name(A: float, B: float, n: int) -> str:
    return f"A={A:.12f}_B={B:.6f}_N={n}"


def evolution_classifier(base: RunConfig, runs_dir: Path, resume: bool = False) -> Classifier:
    """Classifier that evolves the configured data with amplitude A up to t_end."""
    runs_dir = Path(runs_dir)

    def classify(A: float, t_end: float) -> ProbeResult:
        config = base.with_amplitude(A).with_t_end(t_end)
        run_dir = runs_dir / run_directory_name(A, config.initial_data.B, config.grid.n)
        summary_path = run_dir / "summary.json"
        if resume and summary_path.exists():
            summary = json.loads(summary_path.read_text())
            if summary.get("config_hash") == config.hash_hex():
                logger.info(f"A={A}: reusing {run_dir.name}")
                return classify_summary(summary)
        try:
            summary = Evolution(config, run_dir).run()
        except WaveMapError as e:
            logger.warning(f"A={A}: evolution aborted ({e}), counted as inconclusive")
            return ProbeResult(SearchOutcome.INCONCLUSIVE)
        return classify_summary(summary)

    return classify


def classify_run(A: float, config: RunConfig, runs_dir: Path, resume: bool = False) -> SearchOutcome:
    return evolution_classifier(config, runs_dir, resume)(A, config.time.t_end).outcome


def synthetic_classifier(threshold: float) -> Classifier:
    """Flips iff A >= threshold; for exercising the bisection without evolutions."""
    def classify(A: float, t_end: float) -> ProbeResult:
        if A >= threshold:
            return ProbeResult(SearchOutcome.FLIPPED, flip_time=t_end / 2)
        return ProbeResult(SearchOutcome.DISPERSED, hover_duration=0.0)
    return classify


# ============================================================
# BISECTION
# ============================================================

def bisect(cfg: SearchConfig, classify: Classifier) -> tuple[float, SearchTrace]:
    """
    Validate the bracket, then halve it until narrower than tol_A.

    Raises BracketInvalid when A_lo does not disperse or A_hi does not flip,
    BudgetExhausted when more than max_runs probes would be needed.
    """
    trace = SearchTrace()
    lo, hi = cfg.A_lo, cfg.A_hi
    runs = 0

    def probe(A: float) -> SearchOutcome:
        nonlocal runs
        t_end = cfg.t_end
        while True:
            if runs >= cfg.max_runs:
                raise BudgetExhausted(f"search used all {cfg.max_runs} runs with bracket [{lo}, {hi}]")
            runs += 1
            result = classify(A, t_end)
            new_lo, new_hi = lo, hi
            if result.outcome is SearchOutcome.FLIPPED and lo < A < hi:
                new_hi = A
            elif result.outcome is SearchOutcome.DISPERSED and lo < A < hi:
                new_lo = A
            trace.append(SearchRecord(A, result.outcome, t_end, result.flip_time,
                                      result.hover_duration, new_lo, new_hi))
            logger.info(f"probe {runs}: A={A:.12f} t_end={t_end:g} -> {result.outcome.value}")
            if result.outcome is not SearchOutcome.INCONCLUSIVE:
                return result.outcome
            if 2.0 * t_end > cfg.t_end_cap:
                logger.warning(f"A={A}: still inconclusive at t_end={t_end:g}, treated as dispersed")
                return SearchOutcome.DISPERSED
            t_end *= 2.0

    if probe(lo) is not SearchOutcome.DISPERSED:
        raise BracketInvalid(f"lower amplitude A_lo={lo} does not disperse")
    if probe(hi) is not SearchOutcome.FLIPPED:
        raise BracketInvalid(f"upper amplitude A_hi={hi} does not flip")

    while hi - lo >= cfg.tol_A:
        mid = 0.5 * (lo + hi)
        if probe(mid) is SearchOutcome.FLIPPED:
            hi = mid
        else:
            lo = mid
        logger.info(f"bracket [{lo:.12f}, {hi:.12f}] width {hi - lo:.3e}")

    return 0.5 * (lo + hi), trace


# ============================================================
# SOFT CHECKS
# ============================================================

def hover_growth_ok(trace: SearchTrace, last: int = 4) -> bool:
    """Hover duration increases over the last `last` sub-critical probes as A grows."""
    hovers = [r.hover_duration for r in trace.sub_critical()[-last:] if r.hover_duration is not None]
    ok = all(b > a for a, b in zip(hovers, hovers[1:]))
    if not ok:
        logger.warning(f"hover duration not increasing towards the threshold: {hovers}")
    return ok


def outcomes_monotone(trace: SearchTrace) -> bool:
    """No dispersed probe above a flipped one."""
    flipped = [r.A for r in trace.records if r.outcome is SearchOutcome.FLIPPED]
    dispersed = [r.A for r in trace.records if r.outcome is SearchOutcome.DISPERSED]
    ok = not flipped or not dispersed or max(dispersed) < min(flipped)
    if not ok:
        logger.warning(f"non-monotone outcomes: dispersed up to {max(dispersed)}, flipped from {min(flipped)}")
    return ok


def resolution_trend(a_star_by_n: dict[int, float]) -> bool:
    """A*(N) non-decreasing as the resolution grows."""
    values = [a_star_by_n[n] for n in sorted(a_star_by_n)]
    ok = all(b >= a for a, b in zip(values, values[1:]))
    if not ok:
        logger.warning(f"critical amplitude decreases with resolution: {dict(sorted(a_star_by_n.items()))}")
    return ok


# ============================================================
# DRIVER
# ============================================================

class CriticalSearch:
    """
    Bisection over evolutions with run directories and a trace file.

    Usage:
        search = CriticalSearch(config, out_dir, resume=True)
        a_star, trace = search.run()
    """

    def __init__(self, config: RunConfig, out_dir: Path, resume: bool = False,
                 classifier: Optional[Classifier] = None):
        self.config = config
        self.out_dir = Path(out_dir)
        self.search_cfg = SearchConfig.from_run_config(config)
        self.classifier = classifier or evolution_classifier(config, self.out_dir / "runs", resume)
        self.resume = resume
        self.a_star: Optional[float] = None
        self.trace: Optional[SearchTrace] = None

    def run(self) -> tuple[float, SearchTrace]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        a_star, trace = bisect(self.search_cfg, self.classifier)
        self.a_star, self.trace = a_star, trace

        hash_hex = self.config.hash_hex()
        trace.write_csv(self.out_dir / "trace.csv", hash_hex)
        summary = {
            "config_hash": hash_hex,
            "A_star": a_star,
            "bracket": [trace.records[-1].A_lo, trace.records[-1].A_hi],
            "runs": len(trace),
            "N": self.config.grid.n,
            "B": self.config.initial_data.B,
            "widths_non_increasing": trace.widths_non_increasing(),
            "outcomes_monotone": outcomes_monotone(trace),
            "hover_growth": hover_growth_ok(trace),
        }
        atomic_write(self.out_dir / "search_summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
        logger.info(f"Critical amplitude A*={a_star:.12f} after {len(trace)} runs")
        return a_star, trace

    def get_status(self) -> dict:
        return {
            "A_lo": self.search_cfg.A_lo,
            "A_hi": self.search_cfg.A_hi,
            "tol_A": self.search_cfg.tol_A,
            "runs": len(self.trace) if self.trace else 0,
            "A_star": self.a_star,
            "resume": self.resume,
        }
