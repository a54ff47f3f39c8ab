"""Code parameters, the overhead estimator, and the offline tuner.

A code is fully described by {k, d_nonbin, d_bin, seed, symbol_size}.
Densities are exact rationals so that parameter files round-trip without
float drift.  d_nonbin controls how many columns carry non-binary
coefficients (one column in every round(1/d_nonbin)), d_bin is the fill
probability of the sparse binary part.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels, rng

log = logging.getLogger(__name__)

MAX_SEED = (1 << 64) - 1


def _as_density(value, name: str) -> Fraction:
    f = Fraction(value)
    if not 0 <= f <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {f}")
    return f


@dataclass(frozen=True)
class CodeParams:
    """Everything an encoder/decoder pair must agree on for one block code."""
    k: int
    d_nonbin: Fraction
    d_bin: Fraction
    seed: int = 0
    symbol_size: int = 1024

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "d_nonbin", _as_density(self.d_nonbin, "d_nonbin"))
        object.__setattr__(self, "d_bin", _as_density(self.d_bin, "d_bin"))
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        if self.symbol_size < 1:
            raise ValueError(f"symbol_size must be >= 1, got {self.symbol_size}")


def nonbinary_period(d_nonbin: Fraction) -> int:
    """Spacing of non-binary columns: round(1/d_nonbin); 0 means none.

    Exact-half spacings follow Python round (ties to even).
    """
    if d_nonbin == 0:
        return 0
    return max(1, round(1 / Fraction(d_nonbin)))


def ones_budget(d_bin: Fraction, k: int, nb_nonbin: int) -> int:
    """Number of binary ones a row aims for: max(1, round(d_bin * (k - nb)))."""
    if k - nb_nonbin <= 0:
        return 0
    return max(1, round(Fraction(d_bin) * (k - nb_nonbin)))


@dataclass
class OverheadEstimate:
    avg_overhead: float
    stderr: float
    trials: int
    exhausted: int


def estimate_avg_overhead(params: CodeParams, trials: int, rng_seed: int,
                          max_overhead_symbols: int | None = None,
                          repairs_only: bool = False) -> OverheadEstimate:
    """Mean (symbols_needed / k - 1) over Monte-Carlo decode trials.

    Each trial draws a fresh code instance and a fresh fully random symbol
    arrival order from streams derived off (rng_seed, params.seed, trial),
    so the same inputs always reproduce the same estimate.  A trial that
    cannot decode within k + max_overhead_symbols received symbols counts
    at that cap and increments `exhausted`.  k=1 decodes from whichever
    symbol arrives first, so the estimate is identically 0.

    With repairs_only=True every source symbol is erased and the trial
    consumes repair symbols alone (heavy first, then the windowed stream)
    until the block solves.  This scores the code's intrinsic repair
    overhead independent of the source/repair arrival mix; the tuner uses
    it because its search target is a property of the code, not of one
    reception pattern.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if params.k == 1:
        return OverheadEstimate(0.0, 0.0, trials, 0)
    k = params.k
    budget = 2 * k if max_overhead_symbols is None else max_overhead_symbols
    period = nonbinary_period(params.d_nonbin)
    base = rng.derive_stream(rng_seed, params.seed)
    if repairs_only:
        needed = _kernels.repairs_needed_batch(
            k, k + budget, True, _kernels.MODE_STRUCTURED, period,
            params.d_bin.numerator, params.d_bin.denominator,
            np.uint64(base), trials)
    else:
        needed = _kernels.block_needed_batch(
            k, budget, True, _kernels.MODE_STRUCTURED, period,
            params.d_bin.numerator, params.d_bin.denominator,
            np.uint64(base), trials)
    exhausted = int(np.count_nonzero(needed < 0))
    counts = np.where(needed < 0, k + budget, needed).astype(np.float64)
    over = counts / k - 1.0
    avg = float(over.mean())
    stderr = float(over.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return OverheadEstimate(avg, stderr, trials, exhausted)


@dataclass
class TuningConfig:
    target_overhead: float = 0.001
    security_margin: float = 0.5
    trials_per_eval: int = 2000
    k_grid: list = field(default_factory=lambda: [2, 5, 10, 20, 50, 100, 200])
    seed: int = 1


@dataclass(frozen=True)
class ParamTableEntry:
    k: int
    d_nonbin: Fraction
    d_bin: Fraction


_HEADER_RE = re.compile(r"^# srlc-params v1 target=(\S+) margin=(\S+)$")
_ENTRY_RE = re.compile(r"^k=(\d+) d_nonbin=(\d+)/(\d+) d_bin=(\d+)/(\d+)$")


class ParamTable:
    """Tuned (k -> densities) entries, keys strictly increasing."""

    def __init__(self, entries, target_overhead: float = 0.001,
                 security_margin: float = 0.5, meta: str = ""):
        entries = list(entries)
        for prev, cur in zip(entries, entries[1:]):
            if cur.k <= prev.k:
                raise ValueError(
                    f"table keys must be strictly increasing: {prev.k} then {cur.k}")
        self.entries = entries
        self.target_overhead = target_overhead
        self.security_margin = security_margin
        self.meta = meta

    def lookup(self, k: int) -> ParamTableEntry:
        """Entry at the nearest key >= k; past the end, the largest key."""
        if not self.entries:
            raise ValueError("empty parameter table")
        for e in self.entries:
            if e.k >= k:
                return e
        log.warning("k=%d beyond largest tuned key %d; using that entry",
                    k, self.entries[-1].k)
        return self.entries[-1]

    def dumps(self) -> str:
        lines = [f"# srlc-params v1 target={self.target_overhead:g} "
                 f"margin={self.security_margin:g}"]
        if self.meta:
            lines.append(f"# meta {self.meta}")
        for e in self.entries:
            d_nb = Fraction(e.d_nonbin)
            d_b = Fraction(e.d_bin)
            lines.append(f"k={e.k} d_nonbin={d_nb.numerator}/{d_nb.denominator} "
                         f"d_bin={d_b.numerator}/{d_b.denominator}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "ParamTable":
        lines = text.splitlines()
        if not lines:
            raise ValueError("line 1: empty parameter table file")
        m = _HEADER_RE.match(lines[0])
        if not m:
            raise ValueError(f"line 1: bad header {lines[0]!r}, "
                             f"expected '# srlc-params v1 target=<f> margin=<f>'")
        target, margin = float(m.group(1)), float(m.group(2))
        entries = []
        meta = ""
        for i, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            if line.startswith("#"):
                if line.startswith("# meta "):
                    meta = line[len("# meta "):]
                continue
            em = _ENTRY_RE.match(line)
            if not em:
                raise ValueError(f"line {i}: bad entry {line!r}")
            k = int(em.group(1))
            entry = ParamTableEntry(
                k, Fraction(int(em.group(2)), int(em.group(3))),
                Fraction(int(em.group(4)), int(em.group(5))))
            if entries and k <= entries[-1].k:
                raise ValueError(f"line {i}: key k={k} not above previous "
                                 f"k={entries[-1].k}")
            entries.append(entry)
        return cls(entries, target, margin, meta)

    @classmethod
    def load(cls, path) -> "ParamTable":
        with open(path) as fh:
            return cls.loads(fh.read())


def _eval_overhead(k: int, nb: int, nb1: int, config: TuningConfig,
                   eval_seed: int) -> float:
    d_nonbin = Fraction(nb, k)
    d_bin = Fraction(nb1, k - nb) if k > nb else Fraction(1, 2)
    params = CodeParams(k, d_nonbin, d_bin, seed=config.seed, symbol_size=1)
    est = estimate_avg_overhead(params, config.trials_per_eval, eval_seed,
                                repairs_only=True)
    return est.avg_overhead


def tune(config: TuningConfig) -> ParamTable:
    """Two-phase density search, one entry per k in the grid.

    Candidates are scored by repairs-only overhead (all sources erased,
    repair symbols consumed until the block solves), which measures the
    code itself rather than any one loss pattern.  Phase 1 fixes
    d_bin = 1/2 and takes the smallest non-binary column count whose
    estimate comes in under the target.  Phase 2 then thins the binary
    part one coefficient at a time and stops once the estimate exceeds
    target / margin, keeping the last count before the crossing.  The
    margin < 1 therefore widens both cuts: without the slack, Monte-Carlo
    noise around an estimate sitting near the target would flip the
    stopping point from run to run.  The same evaluation seed is reused
    across candidates at a given k, so per-trial instances are coupled
    and the search is reproducible.
    """
    entries = []
    for k in config.k_grid:
        eval_seed = rng.derive_stream(config.seed, k)
        threshold2 = config.target_overhead / config.security_margin
        chosen = None
        for nb in range(0, k + 1):
            budget = ones_budget(Fraction(1, 2), k, nb)
            if _eval_overhead(k, nb, budget, config, eval_seed) \
                    < config.target_overhead:
                chosen = nb
                break
        if chosen is None:
            log.warning("k=%d: no non-binary column count met target=%g; "
                        "recording dense entry", k, config.target_overhead)
            entries.append(ParamTableEntry(k, Fraction(1), Fraction(1, 2)))
            continue
        if chosen == k:
            log.warning("k=%d: tuned to all-non-binary columns", k)
            entries.append(ParamTableEntry(k, Fraction(1), Fraction(1, 2)))
            continue
        nb1 = ones_budget(Fraction(1, 2), k, chosen)
        while nb1 > 1:
            if _eval_overhead(k, chosen, nb1 - 1, config, eval_seed) \
                    > threshold2:
                break
            nb1 -= 1
        entries.append(ParamTableEntry(
            k, Fraction(chosen, k), Fraction(nb1, k - chosen)))
        log.info("k=%d tuned: %d non-binary columns, d_bin=%s",
                 k, chosen, entries[-1].d_bin)
    return ParamTable(entries, config.target_overhead, config.security_margin,
                      meta=f"trials={config.trials_per_eval} seed={config.seed}")


# --- key=value record helpers shared by file headers -----------------------

def format_params_record(params: CodeParams, **extra) -> str:
    """One-line key=value encoding of CodeParams plus extra integer fields."""
    d_nb, d_b = Fraction(params.d_nonbin), Fraction(params.d_bin)
    parts = [f"k={params.k}",
             f"d_nonbin={d_nb.numerator}/{d_nb.denominator}",
             f"d_bin={d_b.numerator}/{d_b.denominator}",
             f"seed={params.seed}",
             f"symbol_size={params.symbol_size}"]
    parts += [f"{key}={value}" for key, value in extra.items()]
    return " ".join(parts)


def parse_params_record(line: str) -> tuple[CodeParams, dict]:
    """Inverse of format_params_record; unknown keys land in the dict."""
    fields = {}
    for tok in line.split():
        if "=" not in tok:
            raise ValueError(f"bad record token {tok!r}")
        key, value = tok.split("=", 1)
        fields[key] = value
    try:
        params = CodeParams(
            k=int(fields.pop("k")),
            d_nonbin=Fraction(fields.pop("d_nonbin")),
            d_bin=Fraction(fields.pop("d_bin")),
            seed=int(fields.pop("seed")),
            symbol_size=int(fields.pop("symbol_size")))
    except KeyError as exc:
        raise ValueError(f"record missing field {exc.args[0]}") from None
    return params, fields
