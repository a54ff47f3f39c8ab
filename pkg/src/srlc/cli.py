"""Command-line front end: tuning, benchmarks, and a file codec demo.

Subcommands
  tune         run the offline density search, write a parameter table
  block-bench  block-mode Monte-Carlo sweeps (overhead vs k, or a failure
               curve vs received count), CSV out
  conv-bench   sliding-window residual-loss sweep over loss rates for the
               structured code and the classic RLC baselines, CSV out
  encode       split a file into k source packets plus repair packets
  decode       rebuild the file from whatever packets survived
  plot-script  emit a small matplotlib script that plots the CSVs above

Every flag can also come from a `key=value` config file (--config); flags
given on the command line win.  All randomness descends from --seed, so any
command rerun with the same inputs writes byte-identical output.  CSVs and
tables carry their resolved configuration as leading comment lines.

Exit codes: 0 success, 1 decode failure, 2 usage or parse error.  Logs go
to standard error; data goes to files or standard output only.
"""

import argparse
import logging
import math
import struct
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import block, simulate
from .params import (CodeParams, ParamTable, TuningConfig,
                     format_params_record, parse_params_record, tune)

log = logging.getLogger("srlc.cli")

EXIT_OK = 0
EXIT_DECODE_FAILURE = 1
EXIT_USAGE = 2

DEFAULT_D_NONBIN = Fraction(1, 50)
DEFAULT_D_BIN = Fraction(1, 10)

CONV_PRESETS = {
    "small": (500, 20),    # tot_src, window k
    "large": (2500, 100),
}


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad fraction {text!r}: {exc}")


def _int_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}: {exc}")


def _float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}: {exc}")


def _str_list(text: str) -> list:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"bad boolean {text!r}")


# --- config file merge --------------------------------------------------------

def _load_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_config(ns: argparse.Namespace, sub: argparse.ArgumentParser):
    """Fill flags the user did not give from the --config file.

    Every option is declared with default=None, so a None slot means
    "not on the command line" and may be taken from the file.
    """
    if not ns.config:
        return
    values = _load_config_file(ns.config)
    actions = {a.dest: a for a in sub._actions}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise ValueError(f"unknown config key {key!r} in {ns.config}")
        if getattr(ns, key) is not None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            setattr(ns, key, _bool(raw))
        elif action.type is not None:
            setattr(ns, key, action.type(raw))
        else:
            setattr(ns, key, raw)


def _resolve(ns, **defaults) -> dict:
    """Flag values with per-command defaults filled in for absent ones."""
    out = {}
    for key, default in defaults.items():
        value = getattr(ns, key)
        out[key] = default if value is None else value
    return out


def _choice(name: str, value, allowed):
    if value not in allowed:
        raise ValueError(f"{name} must be one of {', '.join(allowed)}; got {value!r}")
    return value


def _code_params(k: int, ns, default_nonbin, default_bin, seed: int) -> CodeParams:
    """Densities for one k: explicit flags beat a table file beat defaults."""
    d_nonbin, d_bin = default_nonbin, default_bin
    if ns.table is not None:
        entry = ParamTable.load(ns.table).lookup(k)
        d_nonbin, d_bin = entry.d_nonbin, entry.d_bin
    if ns.d_nonbin is not None:
        d_nonbin = ns.d_nonbin
    if ns.d_bin is not None:
        d_bin = ns.d_bin
    return CodeParams(k, d_nonbin, d_bin, seed=seed, symbol_size=1)


def _out_stream(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


# --- tune ---------------------------------------------------------------------

def cmd_tune(ns) -> int:
    cfg = _resolve(ns, k_grid=list(TuningConfig().k_grid),
                   target_overhead=0.001, security_margin=0.5,
                   trials=2000, seed=1, out=None)
    if cfg["trials"] < 1:
        raise ValueError("--trials must be >= 1")
    tuning = TuningConfig(target_overhead=cfg["target_overhead"],
                          security_margin=cfg["security_margin"],
                          trials_per_eval=cfg["trials"],
                          k_grid=cfg["k_grid"], seed=cfg["seed"])
    log.info("tune: %s", tuning)
    table = tune(tuning)
    if cfg["out"] and cfg["out"] != "-":
        table.save(cfg["out"])
        log.info("wrote %d entries to %s", len(table.entries), cfg["out"])
    else:
        sys.stdout.write(table.dumps())
    return EXIT_OK


# --- block-bench ----------------------------------------------------------------

def cmd_block_bench(ns) -> int:
    cfg = _resolve(ns, metric="overhead", k=[50, 100, 200, 500],
                   generator="srlc", decoder="ge", trials=1000,
                   budget=None, seed=0, out=None)
    _choice("--metric", cfg["metric"], ("overhead", "failure"))
    _choice("--generator", cfg["generator"], simulate.GENERATORS)
    _choice("--decoder", cfg["decoder"], ("ge", "sge", "it"))
    if cfg["trials"] < 1:
        raise ValueError("--trials must be >= 1")
    if cfg["metric"] == "failure" and len(cfg["k"]) != 1:
        raise ValueError("--metric failure sweeps received count; "
                         "give exactly one k")
    comments = {
        "command": "block-bench", "metric": cfg["metric"],
        "k": ",".join(str(k) for k in cfg["k"]),
        "generator": cfg["generator"], "decoder": cfg["decoder"],
        "trials": cfg["trials"],
        "budget": "2k" if cfg["budget"] is None else cfg["budget"],
        "table": ns.table or "", "seed": cfg["seed"],
    }
    log.info("block-bench resolved config: %s", comments)
    rows = []
    for k in cfg["k"]:
        params = _code_params(k, ns, DEFAULT_D_NONBIN, DEFAULT_D_BIN, seed=0)
        report = simulate.run_block_batch(
            params, cfg["trials"], cfg["seed"], generator=cfg["generator"],
            max_overhead_symbols=cfg["budget"], decoder=cfg["decoder"])
        rows.append((params, report))
        log.info("k=%d avg_ineff=%.6f (+-%.6f)", k,
                 report.avg_inefficiency, report.avg_ineff_stderr)
    comments["d_nonbin"] = str(Fraction(rows[0][0].d_nonbin))
    comments["d_bin"] = str(Fraction(rows[0][0].d_bin))
    fh, close = _out_stream(cfg["out"])
    try:
        if cfg["metric"] == "overhead":
            simulate.write_overhead_csv(fh, rows, comments)
        else:
            simulate.write_failure_csv(fh, rows[0][1], comments)
    finally:
        if close:
            fh.close()
    return EXIT_OK


# --- conv-bench -----------------------------------------------------------------

def _conv_out_path(out: str, code: str, many: bool) -> str:
    if not many:
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}_{code}{p.suffix}"))


def cmd_conv_bench(ns) -> int:
    cfg = _resolve(ns, preset=None, tot_src=None, k=None,
                   codes=["srlc", "binary_rlc", "gf256_rlc"],
                   cr=Fraction(2, 3), heavy_period=8,
                   loss_rates=[0.0, 0.05, 0.1, 0.15, 0.2, 0.25],
                   trials=2000, seed=0, out=None)
    if cfg["preset"] is not None:
        _choice("--preset", cfg["preset"], tuple(CONV_PRESETS))
        tot_src, k = CONV_PRESETS[cfg["preset"]]
        if cfg["tot_src"] is not None:
            tot_src = cfg["tot_src"]
        if cfg["k"] is not None:
            k = cfg["k"][0] if isinstance(cfg["k"], list) else cfg["k"]
    else:
        if cfg["tot_src"] is None or cfg["k"] is None:
            raise ValueError("give --preset, or both --tot-src and --k")
        tot_src = cfg["tot_src"]
        k = cfg["k"][0] if isinstance(cfg["k"], list) else cfg["k"]
    for code in cfg["codes"]:
        _choice("--codes", code, simulate.GENERATORS)
    if cfg["trials"] < 1:
        raise ValueError("--trials must be >= 1")
    heavy_period = None if cfg["heavy_period"] == 0 else cfg["heavy_period"]
    # the structured arm defaults to all non-binary columns: with short
    # windows that is what keeps it at GF(2^8) strength (a tuned block
    # table thins it too far for conv mode)
    params = _code_params(k, ns, Fraction(1), Fraction(1, 2), seed=0)
    fixed = bool(ns.fixed_window)
    many = len(cfg["codes"]) > 1 and cfg["out"] not in (None, "-")
    for code in cfg["codes"]:
        rows = []
        for p in cfg["loss_rates"]:
            conv_cfg = simulate.ConvTrialConfig(
                params, tot_src, code_rate=cfg["cr"],
                heavy_period=heavy_period, loss_rate=p, generator=code,
                fixed_window=fixed)
            report = simulate.run_conv_batch(conv_cfg, cfg["trials"], cfg["seed"])
            rows.append((p, report))
            log.info("%s p=%g residual=%.3g failures=%d/%d", code, p,
                     report.residual_loss_ratio, report.session_failures,
                     report.trials)
        comments = {
            "command": "conv-bench", "generator": code,
            "tot_src": tot_src, "k": k, "cr": str(Fraction(cfg["cr"])),
            "heavy_period": 0 if heavy_period is None else heavy_period,
            "d_nonbin": str(Fraction(params.d_nonbin)),
            "d_bin": str(Fraction(params.d_bin)),
            "fixed_window": fixed, "sessions": cfg["trials"],
            "seed": cfg["seed"],
        }
        fh, close = _out_stream(
            _conv_out_path(cfg["out"], code, many) if cfg["out"] else None)
        try:
            simulate.write_conv_csv(fh, rows, comments)
        finally:
            if close:
                fh.close()
                log.info("wrote %s", fh.name)
    return EXIT_OK


# --- encode / decode --------------------------------------------------------------
#
# On-disk layout of an encoded directory:
#   manifest.txt   "# srlc-block v1" then one key=value record line
#   sNNNNN.pkt     u32 source id, then symbol_size payload bytes
#   rNNNNN.pkt     u32 repair id, then symbol_size payload bytes
# The manifest's file_size field restores the exact original length.

MANIFEST_MAGIC = "# srlc-block v1"


def _pack_source(sid: int, payload: np.ndarray) -> bytes:
    return struct.pack(">I", sid) + payload.tobytes()


def _parse_source(data: bytes):
    if len(data) < 4:
        raise ValueError("source packet shorter than its 4-byte header")
    (sid,) = struct.unpack(">I", data[:4])
    return sid, np.frombuffer(data, np.uint8, offset=4).copy()


def cmd_encode(ns) -> int:
    cfg = _resolve(ns, k=20, cr=Fraction(2, 3), repairs=None, seed=0, out=None)
    if cfg["out"] is None:
        raise ValueError("encode needs --out DIRECTORY")
    k = cfg["k"][0] if isinstance(cfg["k"], list) else cfg["k"]
    data = Path(ns.input).read_bytes()
    symbol_size = max(1, math.ceil(len(data) / k))
    # at the default k=20 reliability beats sparsity: all-non-binary columns
    # decode from almost any k received packets, and cost is negligible at
    # this scale; pass --table or explicit densities for large blocks
    params = _code_params(k, ns, Fraction(1), Fraction(1, 2), cfg["seed"])
    params = CodeParams(k, params.d_nonbin, params.d_bin,
                        seed=cfg["seed"], symbol_size=symbol_size)
    cr = Fraction(cfg["cr"])
    if not 0 < cr <= 1:
        raise ValueError(f"--cr must be in (0, 1], got {cr}")
    n_repairs = cfg["repairs"]
    if n_repairs is None:
        n_repairs = k * (cr.denominator - cr.numerator) // cr.numerator
    sources = [data[i * symbol_size:(i + 1) * symbol_size] for i in range(k)]
    repairs = block.encode_block(sources, params, n_repairs)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    record = format_params_record(params, file_size=len(data),
                                  n_repairs=n_repairs)
    (outdir / "manifest.txt").write_text(f"{MANIFEST_MAGIC}\n{record}\n")
    for sid in range(k):
        payload = np.zeros(symbol_size, np.uint8)
        chunk = np.frombuffer(sources[sid], np.uint8)
        payload[:chunk.size] = chunk
        (outdir / f"s{sid:05d}.pkt").write_bytes(_pack_source(sid, payload))
    for rid, sym in enumerate(repairs):
        (outdir / f"r{rid:05d}.pkt").write_bytes(
            block.pack_repair_packet(rid, sym))
    log.info("encoded %s (%d bytes) into %d sources + %d repairs at %s "
             "(symbol_size=%d)", ns.input, len(data), k, n_repairs,
             outdir, symbol_size)
    return EXIT_OK


def _read_manifest(indir: Path):
    text = (indir / "manifest.txt").read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != MANIFEST_MAGIC:
        raise ValueError(f"{indir}/manifest.txt line 1: expected "
                         f"{MANIFEST_MAGIC!r}")
    for line in lines[1:]:
        if line.strip():
            params, extra = parse_params_record(line.strip())
            try:
                file_size = int(extra["file_size"])
            except KeyError:
                raise ValueError("manifest record lacks file_size") from None
            return params, file_size
    raise ValueError(f"{indir}/manifest.txt has no record line")


def cmd_decode(ns) -> int:
    cfg = _resolve(ns, decoder="ge", out=None)
    _choice("--decoder", cfg["decoder"], ("ge", "sge", "it"))
    if cfg["out"] is None:
        raise ValueError("decode needs --out FILE")
    indir = Path(ns.input)
    params, file_size = _read_manifest(indir)
    received_sources = {}
    received_repairs = []
    for path in sorted(indir.glob("*.pkt")):
        raw = path.read_bytes()
        if path.name.startswith("s"):
            sid, payload = _parse_source(raw)
            if not 0 <= sid < params.k:
                raise ValueError(f"{path.name}: source id {sid} out of range")
            received_sources[sid] = payload
        elif path.name.startswith("r"):
            rid, payload = block.parse_repair_packet(raw)
            received_repairs.append((rid, payload))
        else:
            raise ValueError(f"unrecognized packet file name {path.name}")
        if len(payload) != params.symbol_size:
            raise ValueError(f"{path.name}: payload length {len(payload)} "
                             f"!= symbol_size {params.symbol_size}")
    decode = {"ge": block.decode_ge, "sge": block.decode_sge,
              "it": block.decode_it}[cfg["decoder"]]
    result = decode(received_sources, received_repairs, params)
    have = dict(received_sources)
    have.update(result.recovered)
    if not result.success:
        missing = [j for j in range(params.k) if j not in have]
        log.error("decode failed: %d of %d sources recovered from %d "
                  "received packets; missing source ids: %s",
                  params.k - len(missing), params.k,
                  len(received_sources) + len(received_repairs),
                  ",".join(map(str, missing[:40])) +
                  ("..." if len(missing) > 40 else ""))
        return EXIT_DECODE_FAILURE
    out = bytearray()
    for sid in range(params.k):
        out.extend(bytes(bytearray(np.asarray(have[sid], dtype=np.uint8))))
    Path(cfg["out"]).write_bytes(bytes(out[:file_size]))
    log.info("decoded %d bytes to %s (consumed %d packets)", file_size,
             cfg["out"], result.symbols_consumed)
    return EXIT_OK


# --- plot-script ------------------------------------------------------------------

_PLOT_SCRIPT = '''\
#!/usr/bin/env python3
"""Plot benchmark CSVs; schema is sniffed from each file's header line.

Usage: plot.py out.png file1.csv [file2.csv ...]
"""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    comments, rows = {}, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "=" in line:
                    key, val = line[1:].split("=", 1)
                    comments[key.strip()] = val.strip()
            elif line:
                rows.append(line)
    header = rows[0].split(",")
    data = list(csv.DictReader(rows[1:], fieldnames=header))
    return header, data, comments


def main():
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    out, paths = sys.argv[1], sys.argv[2:]
    fig, ax = plt.subplots(figsize=(7, 5))
    for path in paths:
        header, data, comments = read(path)
        label = comments.get("generator") or comments.get("command") or path
        if header[0] == "received":
            x = [int(r["received"]) for r in data]
            y = [float(r["failure_prob"]) for r in data]
            ax.semilogy(x, [max(v, 1e-12) for v in y], label=label)
            ax.set_xlabel("received symbols")
            ax.set_ylabel("decoding failure probability")
        elif header[0] == "k":
            x = [int(r["k"]) for r in data]
            y = [float(r["avg_ineff"]) - 1.0 for r in data]
            e = [float(r["stderr"]) for r in data]
            ax.errorbar(x, y, yerr=[2 * s for s in e], marker="o", label=label)
            ax.set_xlabel("block size k")
            ax.set_ylabel("average overhead")
        elif header[0] == "loss_rate":
            x = [float(r["loss_rate"]) for r in data]
            y, n = zip(*((float(r["residual_ratio"]), int(r["sessions"]))
                         for r in data))
            ax.plot(x, y, marker="o", label=label)
            ax.set_xlabel("packet loss rate")
            ax.set_ylabel("residual loss ratio")
        else:
            sys.exit(f"{path}: unknown CSV schema {header}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
'''


def cmd_plot_script(ns) -> int:
    cfg = _resolve(ns, out=None)
    fh, close = _out_stream(cfg["out"])
    try:
        fh.write(_PLOT_SCRIPT)
    finally:
        if close:
            fh.close()
            log.info("wrote %s", fh.name)
    return EXIT_OK


# --- parser -----------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", default=None,
                     help="key=value file supplying defaults for any flag")
    sub.add_argument("--seed", type=int, default=None,
                     help="root seed for all randomness")
    sub.add_argument("--out", default=None, help="output path ('-' = stdout)")


def _add_code(sub):
    sub.add_argument("--d-nonbin", type=_fraction, default=None,
                     help="non-binary column density, e.g. 1/50")
    sub.add_argument("--d-bin", type=_fraction, default=None,
                     help="binary fill density, e.g. 1/10")
    sub.add_argument("--table", default=None,
                     help="parameter table file; densities looked up by k")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srlc",
        description="structured random linear codes: benchmarks and file codec")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("tune", help="run the density search, write a table")
    _add_common(p)
    p.add_argument("--k-grid", type=_int_list, default=None,
                   help="comma-separated block sizes to tune")
    p.add_argument("--target-overhead", type=float, default=None)
    p.add_argument("--security-margin", type=float, default=None)
    p.add_argument("--trials", type=int, default=None,
                   help="Monte-Carlo trials per candidate evaluation")
    p.set_defaults(func=cmd_tune, _sub=p)

    p = subs.add_parser("block-bench", help="block-mode Monte-Carlo sweep")
    _add_common(p)
    _add_code(p)
    p.add_argument("--metric", default=None, choices=("overhead", "failure"))
    p.add_argument("--k", type=_int_list, default=None,
                   help="block sizes; failure metric takes exactly one")
    p.add_argument("--generator", default=None, choices=simulate.GENERATORS)
    p.add_argument("--decoder", default=None, choices=("ge", "sge", "it"))
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--budget", type=int, default=None,
                   help="repairs generated per trial (default 2k)")
    p.set_defaults(func=cmd_block_bench, _sub=p)

    p = subs.add_parser("conv-bench", help="sliding-window residual-loss sweep")
    _add_common(p)
    _add_code(p)
    p.add_argument("--preset", default=None, choices=tuple(CONV_PRESETS),
                   help="small: tot=500 k=20; large: tot=2500 k=100")
    p.add_argument("--tot-src", type=int, default=None)
    p.add_argument("--k", type=_int_list, default=None)
    p.add_argument("--codes", type=_str_list, default=None,
                   help="comma-separated generators to sweep")
    p.add_argument("--cr", type=_fraction, default=None, help="code rate")
    p.add_argument("--heavy-period", type=int, default=None,
                   help="heavy repair cadence; 0 = startup heavy only")
    p.add_argument("--loss-rates", type=_float_list, default=None)
    p.add_argument("--trials", type=int, default=None,
                   help="sessions per loss rate")
    p.add_argument("--fixed-window", action="store_true", default=None,
                   help="always use the last k sources as the window")
    p.set_defaults(func=cmd_conv_bench, _sub=p)

    p = subs.add_parser("encode", help="encode a file into packet files")
    _add_common(p)
    _add_code(p)
    p.add_argument("input", help="file to encode")
    p.add_argument("--k", type=_int_list, default=None, help="source symbol count")
    p.add_argument("--cr", type=_fraction, default=None,
                   help="code rate; sets repair count k*(1-cr)/cr")
    p.add_argument("--repairs", type=int, default=None,
                   help="explicit repair count, overrides --cr")
    p.set_defaults(func=cmd_encode, _sub=p)

    p = subs.add_parser("decode", help="rebuild a file from packet files")
    _add_common(p)
    p.add_argument("input", help="directory of .pkt files with manifest.txt")
    p.add_argument("--decoder", default=None, choices=("ge", "sge", "it"))
    p.set_defaults(func=cmd_decode, _sub=p)

    p = subs.add_parser("plot-script", help="emit a matplotlib plotting script")
    _add_common(p)
    p.set_defaults(func=cmd_plot_script, _sub=p)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        _merge_config(ns, ns._sub)
        return ns.func(ns)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
