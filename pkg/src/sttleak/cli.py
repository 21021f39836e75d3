"""Command-line front end.

Every subcommand writes data files (CSV or JSON) into ``--out`` and echoes the
effective configuration to ``effective_config.json``.  Each CSV has a
``<name>.meta.json`` sidecar carrying the config hash and seed; JSON outputs
embed both.  Plotting is left to external tools.

Exit codes: 0 success, 2 missing file, 3 parse error, 4 invariant
violation, 5 simulated write failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .attack import AttackConfig, attack_campaign, spa_infer
from .config import ConfigMissing, ConfigSyntaxError, RunConfig, parse_config
from .defense import MATRIX_COLUMNS, defense_matrix
from .device import (
    BitState,
    CellMode,
    Direction,
    ParameterError,
    cell_current,
    resistance,
    retention_saturated,
    retention_time,
    scale_volume,
    thermal_stability,
    write_latency,
)
from .encoding import EncodingScheme, encode
from .io import write_csv, write_json, write_sidecar, write_trace_csv
from .trace import (
    DriverKind,
    DriverMode,
    WindowError,
    Word,
    WriteFailure,
    WriteTransaction,
    sample_window,
    synthesize_read_trace,
    synthesize_write_trace,
)
from .variation import evt_extrapolate, latency_distribution, sample_devices

EXIT_OK = 0
EXIT_MISSING = 2
EXIT_PARSE = 3
EXIT_INVARIANT = 4
EXIT_WRITE_FAILURE = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def parse_int_list(text: str) -> list[int]:
    """``4..64`` (powers of two), ``4..64:4`` (step 4), or ``4,8,16``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, rest = text.split("..", 1)
            if ":" in rest:
                hi, step = rest.split(":", 1)
                return list(range(int(lo), int(hi) + 1, int(step)))
            lo, hi = int(lo), int(rest)
            out, w = [], lo
            while w <= hi:
                out.append(w)
                w *= 2
            return out
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"bad integer list {text!r}", EXIT_PARSE) from exc


def parse_range(text: str) -> list[float]:
    """``start:stop:step``, inclusive of ``stop``."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise CliError(f"bad range {text!r}; expected start:stop:step", EXIT_PARSE) from exc
    if step <= 0 or stop < start:
        raise CliError(f"bad range {text!r}", EXIT_PARSE)
    n = int(round((stop - start) / step))
    return [start + i * step for i in range(n + 1)]


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=d, help="INI config file")
    parser.add_argument("--seed", type=int, default=d, help="override [run] seed")
    parser.add_argument("--out", metavar="DIR", default=d, help="output directory (default: out)")
    parser.add_argument("--jobs", type=int, default=d,
                        help="worker threads; outputs do not depend on it (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sttleak", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("device", parents=[common], help="device anchors (thermal stability, retention, latency, currents)")
    s.add_argument("--temperature", type=float, help="kelvin (default: [env] temperature)")

    s = sub.add_parser("mc", parents=[common], help="Monte Carlo latency distributions and tail extrapolation")
    s.add_argument("--count", type=int, default=5000)
    s.add_argument("--target", type=float, default=6.7e7, help="population size to extrapolate to")
    s.add_argument("--kind", choices=("write", "read", "both"), default="both")
    s.add_argument("--bins", type=int, default=50)
    s.add_argument("--temperature", type=float)

    s = sub.add_parser("trace", parents=[common], help="synthesize one write (or read) supply-current trace")
    s.add_argument("--old", help="previous word, binary or 0x-hex (write traces)")
    s.add_argument("--new", required=True, help="new word (or the word read with --read)")
    s.add_argument("--width", type=int, help="word width; required for hex words")
    s.add_argument("--read", action="store_true", help="synthesize a read of --new instead of a write")
    s.add_argument("--noise", type=float, help="noise sigma in A (default: [run] noise_sigma)")
    s.add_argument("--scheme", help="encoding scheme (default: [run] scheme)")
    s.add_argument("--pv", action="store_true", help="draw per-bit process variation from [pv]")
    s.add_argument("--smoothing-tau", type=float, help="first-order switching transient, s")

    s = sub.add_parser("attack", parents=[common], help="SPA/DPA attack campaign on random data")
    s.add_argument("--width", type=int, default=4, help="data word width")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--traces", type=int, default=1, help="traces averaged per trial (1 = SPA)")
    s.add_argument("--noise", type=float, help="noise sigma in A (default: [run] noise_sigma)")
    s.add_argument("--scheme", help="encoding scheme (default: [run] scheme)")
    s.add_argument("--pv", action="store_true", help="victim cells drawn from [pv]")

    s = sub.add_parser("states", parents=[common], help="state counts and leakage metrics per width and scheme")
    s.add_argument("--widths", default="4..256", help="e.g. 4..64, 4..64:4 or 4,8,16")
    s.add_argument("--scheme", default=None, help="comma list, e.g. none,parity1,random2")
    s.add_argument("--driver", default=None, help="comma list of constant-voltage,constant-current")

    s = sub.add_parser("sweep", parents=[common], help="one-parameter device sweeps")
    s.add_argument("--var", required=True, choices=("temperature", "volume", "delta", "voltage"))
    s.add_argument("--range", required=True, dest="range_", metavar="START:STOP:STEP")
    s.add_argument("--metric", required=True,
                   choices=("delta", "retention", "write_latency", "write_latency_fast",
                            "write_current", "level_gap"))
    return p


def _noise(args, cfg: RunConfig, n_cells: int) -> float:
    if args.noise is not None:
        return args.noise
    if cfg.run.noise_sigma is not None:
        return cfg.run.noise_sigma
    full_scale = n_cells * (cfg.driver.i_write if cfg.driver.constant_current
                            else cfg.device.v_write_eff / cfg.device.r_low)
    return 0.01 * full_scale


def _scheme(args, cfg: RunConfig) -> EncodingScheme:
    return EncodingScheme.parse(args.scheme) if getattr(args, "scheme", None) else cfg.run.scheme


def cmd_device(args, cfg: RunConfig, out: Path) -> dict:
    p = cfg.device
    temp = args.temperature or cfg.env.temperature
    delta = thermal_stability(p, temp)
    rec = {
        "temperature_k": temp,
        "delta": delta,
        "retention_s": retention_time(delta, cfg.retention),
        "retention_saturated": retention_saturated(delta, cfg.retention),
        "write_latency_slow_s": float(write_latency(delta, p.v_supply, Direction.P_TO_AP, p)),
        "write_latency_fast_s": float(write_latency(delta, p.v_supply, Direction.AP_TO_P, p)),
        "r_low_ohm": resistance(BitState.P, p),
        "r_high_ohm": resistance(BitState.AP, p),
        "write_current_p_a": cell_current(BitState.P, CellMode.WRITE, p),
        "write_current_ap_a": cell_current(BitState.AP, CellMode.WRITE, p),
        "read_current_p_a": cell_current(BitState.P, CellMode.READ, p),
        "read_current_ap_a": cell_current(BitState.AP, CellMode.READ, p),
        "config_hash": cfg.hash,
        "seed": cfg.run.seed,
    }
    write_json(out / "device.json", rec)
    return rec


def cmd_mc(args, cfg: RunConfig, out: Path) -> dict:
    sample = sample_devices(cfg.device, cfg.pv, args.count, cfg.run.seed, workers=args.jobs)
    temp = args.temperature or cfg.env.temperature
    kinds = ("write", "read") if args.kind == "both" else (args.kind,)
    summary = {}
    for kind in kinds:
        dist = latency_distribution(sample, temp, kind, bins=args.bins)
        hist = write_csv(out / f"mc_{kind}_hist.csv", ("bin_low", "bin_high", "count"),
                         dist.histogram_rows())
        write_sidecar(hist, cfg.hash, cfg.run.seed, kind=kind, count=args.count)
        tail = evt_extrapolate(dist.latencies, args.target).to_dict()
        tail.update(kind=kind, sd=dist.sd, min=dist.min, config_hash=cfg.hash, seed=cfg.run.seed)
        write_json(out / f"mc_{kind}_tail.json", tail)
        summary[kind] = tail["ratio_max_to_mean"]
    return summary


def cmd_trace(args, cfg: RunConfig, out: Path) -> dict:
    scheme = _scheme(args, cfg)
    new = encode(Word.parse(args.new, args.width), scheme, seed=cfg.run.seed)
    n = new.width
    devices = (sample_devices(cfg.device, cfg.pv, n, cfg.run.seed) if args.pv else cfg.device)
    noise = _noise(args, cfg, n)
    info = {"width": n, "seed": cfg.run.seed, "noise_sigma": noise, "scheme": str(scheme)}
    if args.read:
        tr = synthesize_read_trace(new, devices, cfg.env, noise, cfg.run.seed,
                                   cfg.run.sample_rate, cfg.driver)
        info["mean_current_a"] = float(np.mean(tr.samples))
    else:
        if args.old is None:
            raise CliError("--old is required for write traces", EXIT_PARSE)
        old = encode(Word.parse(args.old, args.width), scheme, seed=cfg.run.seed + 1)
        txn = WriteTransaction(old, new, cfg.driver, devices, cfg.env)
        tr = synthesize_write_trace(txn, noise, cfg.run.seed, cfg.run.sample_rate,
                                    args.smoothing_tau)
        info.update(old=str(old), new=str(new))
        if not cfg.driver.constant_current:
            pre, post = AttackConfig(n, cfg.driver, cfg.device, cfg.env,
                                     cfg.run.sample_rate).windows()
            info["pre_window_mean_a"] = sample_window(tr, pre)
            info["post_window_mean_a"] = sample_window(tr, post)
            inf = spa_infer(tr, AttackConfig(n, cfg.driver, cfg.device, cfg.env, cfg.run.sample_rate))
            info["hw_old_est"], info["hw_new_est"] = inf.hw_old_est, inf.hw_new_est
    path = write_trace_csv(out / "trace.csv", tr)
    write_sidecar(path, cfg.hash, cfg.run.seed, width=n, driver=tr.driver,
                  sample_rate=tr.sample_rate, t0=tr.t0, device_hash=_device_hash(cfg))
    write_json(out / "trace_summary.json", dict(info, config_hash=cfg.hash))
    return info


def _device_hash(cfg: RunConfig) -> str:
    from .io import config_hash
    return config_hash(cfg.to_dict()["device"])


def cmd_attack(args, cfg: RunConfig, out: Path) -> dict:
    scheme = _scheme(args, cfg)
    n_enc = scheme.encoded_width(args.width)
    noise = _noise(args, cfg, n_enc)
    devices = sample_devices(cfg.device, cfg.pv, n_enc, cfg.run.seed) if args.pv else None
    config = AttackConfig(args.width, cfg.driver, cfg.device, cfg.env, cfg.run.sample_rate)
    rep = attack_campaign(config, scheme, args.trials, noise, cfg.run.seed,
                          traces_per_trial=args.traces, devices=devices, workers=args.jobs)
    rec = rep.to_dict(cfg.hash)
    write_json(out / "campaign.json", rec)
    cols = ("trial", "old", "new", "hw_old", "hw_new", "hw_old_est", "hw_new_est",
            "correct_old", "correct_new", "effort_bits", "low_confidence")
    path = write_csv(out / "trials.csv", cols, ([r[c] for c in cols] for r in rep.records))
    write_sidecar(path, cfg.hash, cfg.run.seed)
    return rec


def cmd_states(args, cfg: RunConfig, out: Path) -> list[dict]:
    widths = parse_int_list(args.widths)
    schemes = ([EncodingScheme.parse(s) for s in args.scheme.split(",")]
               if args.scheme else [cfg.run.scheme])
    if args.driver:
        drivers = [replace(cfg.driver, kind=DriverKind(d.strip())) for d in args.driver.split(",")]
    else:
        drivers = [cfg.driver]
    rows = defense_matrix(widths, schemes, drivers)
    path = write_csv(out / "states.csv", MATRIX_COLUMNS,
                     ([getattr(r, c) for c in MATRIX_COLUMNS] for r in rows))
    write_sidecar(path, cfg.hash, cfg.run.seed)
    return [r.as_dict() for r in rows]


def _sweep_point(var: str, x: float, metric: str, cfg: RunConfig) -> float:
    p = cfg.device
    temp = cfg.env.temperature
    volt = p.v_supply
    if var == "temperature":
        temp = x
        delta = thermal_stability(p, temp)
    elif var == "volume":
        delta = thermal_stability(scale_volume(p, x), temp)
    elif var == "delta":
        delta = x
    else:
        volt = x
        delta = thermal_stability(p, temp)
    if metric == "delta":
        return delta
    if metric == "retention":
        return retention_time(delta, cfg.retention)
    if metric == "write_latency":
        return float(write_latency(delta, volt, Direction.P_TO_AP, p))
    if metric == "write_latency_fast":
        return float(write_latency(delta, volt, Direction.AP_TO_P, p))
    scale = delta / p.delta0
    i_p = cell_current(BitState.P, CellMode.WRITE, p)
    if metric == "write_current":
        return i_p * scale
    return (i_p - cell_current(BitState.AP, CellMode.WRITE, p)) * scale


def cmd_sweep(args, cfg: RunConfig, out: Path) -> dict:
    xs = parse_range(args.range_)
    rows = [(x, _sweep_point(args.var, x, args.metric, cfg)) for x in xs]
    path = write_csv(out / "sweep.csv", (args.var, args.metric), rows)
    write_sidecar(path, cfg.hash, cfg.run.seed, var=args.var, metric=args.metric)
    return {"points": len(rows)}


COMMANDS = {
    "device": cmd_device,
    "mc": cmd_mc,
    "trace": cmd_trace,
    "attack": cmd_attack,
    "states": cmd_states,
    "sweep": cmd_sweep,
}


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.jobs = args.jobs or 1
    out = Path(args.out or "out")
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "effective_config.json", {"config": cfg.to_dict(), "config_hash": cfg.hash})
        result = COMMANDS[args.command](args, cfg, out)
    except ConfigMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except WriteFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WRITE_FAILURE
    except (ParameterError, WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    print(json.dumps(result, sort_keys=True, default=str))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
