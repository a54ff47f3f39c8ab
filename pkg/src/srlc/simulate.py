"""Monte-Carlo evaluation of block and sliding-window codes.

Decodability depends only on the coefficient structure, so mass trials run
payload-free: a block trial counts how many symbols of a fully random
arrival order it takes until the received equations reach full rank, and a
sliding-window session checks which lost sources remain outside the row
space of what survived an i.i.d. Bernoulli loss process.

Every trial derives its own code seed and order/loss seed, so estimates
average over the code ensemble as well as the channel.  Reports and CSVs
are deterministic functions of (config, seed).

Baselines for comparison:
  binary_rlc   every repair coefficient i.i.d. Bernoulli(d_bin), no heavy
               row, no non-binary columns, no empty-row guard
  gf256_rlc    every repair coefficient uniform in 0..255 (zero included),
               no heavy row, no guard
"""

import dataclasses
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels, rng
from .params import CodeParams, nonbinary_period

EXHAUSTED = -1

GENERATORS = ("srlc", "srlc_no_heavy", "binary_rlc", "gf256_rlc")
BASELINES = ("binary_rlc", "gf256_rlc")


@dataclass
class BlockTrialConfig:
    params: CodeParams
    max_overhead_symbols: int | None = None   # repairs generated; default 2k
    decoder: str = "ge"                       # ge | sge | it
    generator: str = "srlc"
    trial_seed: int = 0

    def budget(self) -> int:
        return 2 * self.params.k if self.max_overhead_symbols is None \
            else self.max_overhead_symbols


@dataclass
class ConvTrialConfig:
    params: CodeParams
    tot_src: int
    code_rate: Fraction = Fraction(2, 3)
    heavy_period: int | None = 8
    loss_rate: float = 0.1
    generator: str = "srlc"
    fixed_window: bool = False
    session_seed: int = 0


@dataclass
class MetricsReport:
    """Aggregate results of a batch; block and conv runs fill different fields."""
    kind: str
    trials: int
    k: int = 0
    # block fields
    budget: int = 0
    needed: np.ndarray | None = None
    exhausted: int = 0
    avg_inefficiency: float = 0.0
    avg_ineff_stderr: float = 0.0
    # conv fields
    tot_src: int = 0
    residuals: np.ndarray | None = None
    residual_loss_ratio: float = 0.0
    residual_stderr: float = 0.0
    session_failures: int = 0

    def failures_at(self, received: int) -> int:
        """Trials that could not decode from `received` symbols."""
        return int(np.count_nonzero(
            (self.needed == EXHAUSTED) | (self.needed > received)))

    def failure_prob(self, received: int) -> float:
        return self.failures_at(received) / self.trials


def _kernel_args(generator: str, params: CodeParams):
    if generator not in GENERATORS:
        raise ValueError(f"unknown generator {generator!r}, expected one of {GENERATORS}")
    period = nonbinary_period(params.d_nonbin)
    num, den = params.d_bin.numerator, params.d_bin.denominator
    if generator == "srlc":
        return True, _kernels.MODE_STRUCTURED, period, num, den
    if generator == "srlc_no_heavy":
        return False, _kernels.MODE_STRUCTURED, period, num, den
    if generator == "binary_rlc":
        return False, _kernels.MODE_BINARY_RAW, 0, num, den
    return False, _kernels.MODE_GF256, 0, 1, 2


def run_block_trial(cfg: BlockTrialConfig) -> int:
    """Symbols consumed by one trial, or EXHAUSTED.

    The trial generates k sources plus cfg.budget() repairs, presents them
    in a fully random order drawn from the trial seed, and stops at the
    first prefix from which the chosen decoder succeeds.  ge and sge have
    identical reach, so both map to the rank test; it peels degree-1
    equations only.
    """
    code_seed = rng.draw_at(cfg.trial_seed, 1)
    shuffle_seed = rng.draw_at(cfg.trial_seed, 2)
    if cfg.decoder == "it":
        return _it_trial(cfg, code_seed, shuffle_seed)
    if cfg.decoder not in ("ge", "sge"):
        raise ValueError(f"unknown decoder {cfg.decoder!r}")
    params = cfg.params
    has_heavy, mode, period, num, den = _kernel_args(cfg.generator, params)
    if cfg.generator == "binary_rlc":
        return int(_kernels.block_needed_single_gf2(
            params.k, cfg.budget(), num, den,
            np.uint64(code_seed), np.uint64(shuffle_seed)))
    return int(_kernels.block_needed_single(
        params.k, cfg.budget(), has_heavy, mode, period, num, den,
        np.uint64(code_seed), np.uint64(shuffle_seed)))


def _it_trial(cfg: BlockTrialConfig, code_seed: int, shuffle_seed: int) -> int:
    """Structure-only iterative decoding over the expanded equations."""
    from .block import expand_row, generate_row
    params = dataclasses.replace(cfg.params, seed=int(code_seed), symbol_size=1)
    k, budget = params.k, cfg.budget()
    if cfg.generator != "srlc":
        raise ValueError("decoder 'it' trials support the srlc generator only")
    order = rng.shuffled_indices(k + budget, shuffle_seed)
    unknown = set(range(k))
    eqs = {}
    by_unknown = {j: set() for j in range(k)}

    def peel(start_ready):
        ready = list(start_ready)
        while ready:
            eid = ready.pop()
            eq = eqs.get(eid)
            if eq is None or len(eq) != 1:
                continue
            (j,) = eq
            del eqs[eid]
            if j not in unknown:
                continue
            unknown.discard(j)
            for other in by_unknown.pop(j, ()):
                oe = eqs.get(other)
                if oe is not None:
                    oe.discard(j)
                    if len(oe) == 1:
                        ready.append(other)

    for idx, s in enumerate(order):
        if s < k:
            if s in unknown:
                unknown.discard(s)
                ready = []
                for other in by_unknown.pop(s, ()):
                    oe = eqs.get(other)
                    if oe is not None:
                        oe.discard(s)
                        if len(oe) == 1:
                            ready.append(other)
                peel(ready)
        else:
            vec = expand_row(generate_row(s - k, params), k)
            support = {int(j) for j in np.nonzero(vec)[0] if int(j) in unknown}
            eid = s
            if support:
                eqs[eid] = support
                for j in support:
                    by_unknown.setdefault(j, set()).add(eid)
                if len(support) == 1:
                    peel([eid])
        if not unknown:
            return idx + 1
    return EXHAUSTED


def run_block_batch(params: CodeParams, n_trials: int, rng_seed: int,
                    generator: str = "srlc",
                    max_overhead_symbols: int | None = None,
                    decoder: str = "ge") -> MetricsReport:
    """Batch of independent block trials; trial t uses seed draw(base, t)."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    k = params.k
    budget = 2 * k if max_overhead_symbols is None else max_overhead_symbols
    base = rng.derive_stream(rng_seed, params.seed)
    if decoder == "it":
        needed = np.empty(n_trials, np.int32)
        for t in range(n_trials):
            cfg = BlockTrialConfig(params, budget, decoder, generator,
                                   rng.draw_at(base, t))
            needed[t] = run_block_trial(cfg)
    else:
        if decoder not in ("ge", "sge"):
            raise ValueError(f"unknown decoder {decoder!r}")
        has_heavy, mode, period, num, den = _kernel_args(generator, params)
        if generator == "binary_rlc":
            needed = _kernels.block_needed_batch_gf2(
                k, budget, num, den, np.uint64(base), n_trials)
        else:
            needed = _kernels.block_needed_batch(
                k, budget, has_heavy, mode, period, num, den,
                np.uint64(base), n_trials)
    exhausted = int(np.count_nonzero(needed == EXHAUSTED))
    counts = np.where(needed == EXHAUSTED, k + budget, needed).astype(np.float64)
    ineff = counts / k
    stderr = float(ineff.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
    return MetricsReport(
        kind="block", trials=n_trials, k=k, budget=budget, needed=needed,
        exhausted=exhausted, avg_inefficiency=float(ineff.mean()),
        avg_ineff_stderr=stderr)


def run_baseline(kind: str, params: CodeParams, n_trials: int, rng_seed: int,
                 max_overhead_symbols: int | None = None) -> MetricsReport:
    """Block batch for one of the classic RLC baselines."""
    if kind not in BASELINES:
        raise ValueError(f"baseline must be one of {BASELINES}, got {kind!r}")
    return run_block_batch(params, n_trials, rng_seed, generator=kind,
                           max_overhead_symbols=max_overhead_symbols)


def _conv_kernel_args(cfg: ConvTrialConfig):
    if cfg.tot_src < 1:
        raise ValueError("tot_src must be >= 1")
    cr = Fraction(cfg.code_rate)
    if not 0 < cr <= 1:
        raise ValueError(f"code rate must be in (0, 1], got {cr}")
    hp = 0 if cfg.heavy_period is None else int(cfg.heavy_period)
    has_heavy, mode, period, num, den = _kernel_args(cfg.generator, cfg.params)
    thresh = rng.loss_threshold(cfg.loss_rate)
    return (cfg.tot_src, cfg.params.k, cr.numerator, cr.denominator, hp,
            period, num, den, mode, has_heavy, cfg.fixed_window, thresh)


def run_conv_session(cfg: ConvTrialConfig) -> int:
    """Unrecovered source count after one full session."""
    (tot, k, crn, crd, hp, period, num, den, mode, heavy, fixed,
     thresh) = _conv_kernel_args(cfg)
    return int(_kernels.conv_session_residual(
        tot, k, crn, crd, hp, period, num, den, mode, heavy, fixed,
        np.uint64(cfg.session_seed), np.uint64(thresh)))


def run_conv_batch(cfg: ConvTrialConfig, n_sessions: int,
                   rng_seed: int) -> MetricsReport:
    """Batch of sessions; session s uses seed draw(base, s)."""
    if n_sessions < 1:
        raise ValueError("n_sessions must be >= 1")
    (tot, k, crn, crd, hp, period, num, den, mode, heavy, fixed,
     thresh) = _conv_kernel_args(cfg)
    base = rng.derive_stream(rng_seed, cfg.params.seed)
    residuals = _kernels.conv_residual_batch(
        tot, k, crn, crd, hp, period, num, den, mode, heavy, fixed,
        np.uint64(base), np.uint64(thresh), n_sessions)
    fractions = residuals.astype(np.float64) / tot
    stderr = float(fractions.std(ddof=1) / math.sqrt(n_sessions)) \
        if n_sessions > 1 else 0.0
    return MetricsReport(
        kind="conv", trials=n_sessions, k=k, tot_src=tot, residuals=residuals,
        residual_loss_ratio=float(fractions.mean()), residual_stderr=stderr,
        session_failures=int(np.count_nonzero(residuals > 0)))


# --- CSV output -------------------------------------------------------------
# Every writer embeds the resolved configuration as `# key=value` comment
# lines, so a CSV is a self-describing, reproducible artifact.

def _open_for_write(path_or_fh):
    if hasattr(path_or_fh, "write"):
        return path_or_fh, False
    return open(path_or_fh, "w", newline=""), True


def _write_comments(fh, config: dict):
    for key, value in config.items():
        fh.write(f"# {key}={value}\n")


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_failure_csv(path_or_fh, report: MetricsReport, config: dict,
                      received: range | None = None):
    """Columns: received,failures,trials,failure_prob,stderr (binomial)."""
    fh, close = _open_for_write(path_or_fh)
    try:
        _write_comments(fh, config)
        fh.write("received,failures,trials,failure_prob,stderr\n")
        rng_recv = received if received is not None \
            else range(report.k, report.k + report.budget + 1)
        n = report.trials
        for m in rng_recv:
            fails = report.failures_at(m)
            p = fails / n
            se = math.sqrt(p * (1.0 - p) / n)
            fh.write(f"{m},{fails},{n},{_fmt(p)},{_fmt(se)}\n")
    finally:
        if close:
            fh.close()


def write_overhead_csv(path_or_fh, rows, config: dict):
    """Columns: k,d_nonbin,d_bin,avg_ineff,stderr,trials.

    rows: iterable of (params, MetricsReport).
    """
    fh, close = _open_for_write(path_or_fh)
    try:
        _write_comments(fh, config)
        fh.write("k,d_nonbin,d_bin,avg_ineff,stderr,trials\n")
        for params, rep in rows:
            d_nb, d_b = Fraction(params.d_nonbin), Fraction(params.d_bin)
            fh.write(f"{params.k},{d_nb.numerator}/{d_nb.denominator},"
                     f"{d_b.numerator}/{d_b.denominator},"
                     f"{_fmt(rep.avg_inefficiency)},{_fmt(rep.avg_ineff_stderr)},"
                     f"{rep.trials}\n")
    finally:
        if close:
            fh.close()


def write_conv_csv(path_or_fh, rows, config: dict):
    """Columns: loss_rate,residual_ratio,session_failures,sessions.

    rows: iterable of (loss_rate, MetricsReport).
    """
    fh, close = _open_for_write(path_or_fh)
    try:
        _write_comments(fh, config)
        fh.write("loss_rate,residual_ratio,session_failures,sessions\n")
        for loss_rate, rep in rows:
            fh.write(f"{_fmt(loss_rate)},{_fmt(rep.residual_loss_ratio)},"
                     f"{rep.session_failures},{rep.trials}\n")
    finally:
        if close:
            fh.close()
