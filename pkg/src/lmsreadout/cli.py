"""Command line harness.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error
(stream alignment, file I/O, numerical failure).
"""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
import tempfile
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import io as lio
from .arith import FixedConfig
from .bounds import engine_deviation_bound
from .chain import RunConfig, compare_to_postprocessing, run, sweep
from .metrics import convergence_curve
from .presets import PRESET_GRIDS, PRESETS
from .signal import ConfigError, Frame, apply_channel, generate_pulse
from .sync import AlignmentError

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    src = common.add_argument_group("configuration")
    src.add_argument("--preset", choices=sorted(PRESETS),
                     help="embedded configuration (fig4: 30 MHz, 8 us, sigma 1, "
                          "mu 0.0006, 64 taps, 10 pulses, 491.52 MS/s)")
    src.add_argument("--config", metavar="PATH", help="JSON run configuration file")
    src.add_argument("--seed", type=int, metavar="U64", help="override the configured seed")
    src.add_argument("--engine", choices=["float", "fixed"],
                     help="override the arithmetic engine")
    src.add_argument("--record", metavar="TAPS",
                     help="comma separated taps to store, from x,d,y,e,w")
    src.add_argument("-o", "--output", metavar="DIR", required=True,
                     help="directory for artifacts (created if missing)")

    parser = _Parser(prog="lmsreadout",
                     description="LMS noise cancellation readout-chain simulator.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND",
                                parser_class=_Parser)
    sub.add_parser("gen", parents=[common],
                   help="generate the received pulse train (x) and the clean pulse")
    sub.add_parser("run", parents=[common],
                   help="run the chain; writes report.json, waveforms and traces.csv")
    p = sub.add_parser("sweep", parents=[common],
                       help="run a grid over mu/taps/noise_sigma (config key 'grid')")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="grid points to run in parallel")
    sub.add_parser("compare-engines", parents=[common],
                   help="run float and fixed engines and check the deviation bound")
    sub.add_parser("compare-postproc", parents=[common],
                   help="per-pulse SNR of the LMS taps against plain ensemble averaging")
    sub.add_parser("report", parents=[common],
                   help="summarize the report.json in the output directory")
    return parser


def resolve_config(args) -> tuple[RunConfig, dict]:
    """Config from --preset/--config plus overrides; also returns the sweep grid."""
    if args.preset and args.config:
        raise UsageError("give either --preset or --config, not both")
    if args.config:
        doc = lio.load_config(args.config)
        cfg = lio.config_from_dict(doc)
        grid = doc.get("grid", {})
    elif args.preset:
        cfg = PRESETS[args.preset]
        grid = PRESET_GRIDS.get(args.preset, {})
    else:
        raise UsageError("one of --preset or --config is required")
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        cfg = replace(cfg, seed=args.seed)
    if args.engine:
        engine = FixedConfig() if args.engine == "fixed" else "float64"
        if args.engine == "fixed" and cfg.lms.is_fixed:
            engine = cfg.lms.engine
        cfg = replace(cfg, lms=replace(cfg.lms, engine=engine))
    if args.record is not None:
        taps = tuple(t.strip() for t in args.record.split(",") if t.strip())
        cfg = replace(cfg, record=taps)
    return cfg, grid


def _wave_bytes(frames: list[Frame], cfg: RunConfig, tap: str) -> bytes:
    rate = cfg.pulse.sample_rate
    if cfg.lms.is_fixed and tap != "w":
        return lio.encode_waveform(frames, rate, lio.INT16, cfg.sample_format.frac_bits)
    return lio.encode_waveform(frames, rate, lio.FLOAT32)


class Artifacts:
    """Collects output files in a staging directory and publishes them together."""

    def __init__(self, out: Path):
        self.out = out
        out.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(dir=out, prefix=".staging-"))
        self.names: list[str] = []

    def add(self, name: str, data: bytes | str) -> None:
        if isinstance(data, str):
            data = data.encode("utf-8")
        (self.stage / name).write_bytes(data)
        self.names.append(name)

    def publish(self) -> None:
        for name in self.names:
            (self.stage / name).replace(self.out / name)
        shutil.rmtree(self.stage, ignore_errors=True)

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def cmd_gen(cfg: RunConfig, args, art: Artifacts) -> None:
    xs, clean = [], None
    for k in range(cfg.pulses):
        clean, noisy = generate_pulse(cfg.pulse, cfg.seed, k, cfg.substream)
        xs.append(apply_channel(noisy, cfg.channel))
    art.add("x.lmsw", _wave_bytes(xs, cfg, "x"))
    art.add("clean.lmsw", lio.encode_waveform([clean], cfg.pulse.sample_rate))
    art.add("config.json", lio.dumps(lio.config_to_dict(cfg)))
    print(f"generated {cfg.pulses} pulses of {cfg.pulse.length} samples")


def cmd_run(cfg: RunConfig, args, art: Artifacts) -> None:
    res = run(cfg)
    rep = res.report
    art.add("config.json", lio.dumps(lio.config_to_dict(cfg)))
    art.add("report.json", lio.dumps(lio.report_to_dict(rep)))
    for tap, frames in res.waveforms.items():
        art.add(f"{tap}.lmsw", _wave_bytes(frames, cfg, tap))
    cols = [t for t in cfg.record if t != "w"]
    if cols:
        last = {t: res.waveforms[t][-1:] for t in cols}
        art.add("traces.csv", lio.export_csv(last, cols, cfg.pulse.sample_rate))
    _print_report(rep)


def cmd_sweep(cfg: RunConfig, args, art: Artifacts) -> None:
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    grid = getattr(args, "grid", {}) or {}
    rows = sweep(cfg, mu=grid.get("mu"), taps=grid.get("taps"),
                 noise_sigma=grid.get("noise_sigma"), jobs=args.jobs)
    doc = {"base": lio.config_to_dict(cfg), "grid": grid, "rows": [asdict(r) for r in rows]}
    art.add("sweep.json", lio.dumps(doc))
    header = list(asdict(rows[0]))
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("" if v is None else str(v) for v in asdict(r).values()))
    art.add("sweep.csv", "\n".join(lines) + "\n")
    for line in lines:
        print(line)


def cmd_compare_engines(cfg: RunConfig, args, art: Artifacts) -> None:
    fixed_cfg = cfg.lms.engine if cfg.lms.is_fixed else FixedConfig()
    base = replace(cfg, record=("e",))
    flt = run(replace(base, lms=replace(cfg.lms, engine="float64")))
    fix = run(replace(base, lms=replace(cfg.lms, engine=fixed_cfg)))
    bound = engine_deviation_bound(base, fixed_cfg)
    diffs = [np.abs(a.samples - b.samples)
             for a, b in zip(fix.waveforms["e"], flt.waveforms["e"])]
    max_diff = float(max(d.max() for d in diffs))
    within = all(bool(np.all(d <= env)) for d, env in zip(diffs, bound.envelope))
    doc = {
        "max_abs_e_difference": max_diff,
        "eps_total": bound.eps_total,
        "within_eps_total": max_diff <= bound.eps_total,
        "within_per_sample_envelope": within,
        "sigma_random": bound.sigma_random,
        "per_pulse_max_difference": [float(d.max()) for d in diffs],
        "error_power_float": flt.report.error_power,
        "error_power_fixed": fix.report.error_power,
    }
    art.add("compare_engines.json", lio.dumps(doc))
    print(f"max |e_fixed - e_float| = {max_diff:.6g}, eps_total = {bound.eps_total:.6g}, "
          f"{'within' if doc['within_eps_total'] else 'EXCEEDS'} bound")


def cmd_compare_postproc(cfg: RunConfig, args, art: Artifacts) -> None:
    cmp = compare_to_postprocessing(cfg)
    doc = {k: [lio._num(v) for v in val] if isinstance(val, list) else val
           for k, val in asdict(cmp).items()}
    art.add("compare_postproc.json", lio.dumps(doc))
    cols = ["lms_output_snr_db", "lms_e_snr_db", "lms_y_snr_db", "ensemble_snr_db",
            "single_shot_snr_db"]
    lines = ["pulse," + ",".join(cols)]
    for i in range(cmp.pulses):
        lines.append(",".join([str(i + 1)] + [repr(getattr(cmp, c)[i]) for c in cols]))
    art.add("compare_postproc.csv", "\n".join(lines) + "\n")
    for line in lines:
        print(line)


def cmd_report(args) -> None:
    rep = lio.read_report(Path(args.output) / "report.json")
    _print_report(rep)


def _print_report(rep) -> None:
    print(f"{'pulse':>5} {'error_power':>12} {'out_snr_db':>10} {'in_snr_db':>10} "
          f"{'lag':>4} {'sat':>5} {'|w|':>8}")
    for r in rep.records:
        print(f"{r.pulse_index:>5} {r.error_power:>12.6g} {r.output_snr_db:>10.4g} "
              f"{r.input_snr_db:>10.4g} {r.xcorr_lag_samples:>4} {r.saturation_count:>5} "
              f"{r.weight_l2_norm:>8.4g}")
    if len(rep.records) >= 2:
        conv = convergence_curve(rep.error_power).converged_at
        print(f"converged at pulse: {conv if conv is not None else 'never'}")
    print(f"step size advisory: {rep.stability.value}")


COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "compare-engines": cmd_compare_engines,
    "compare-postproc": cmd_compare_postproc,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "report":
            cmd_report(args)
            return 0
        cfg, grid = resolve_config(args)
        args.grid = grid
    except (UsageError, ConfigError) as exc:
        print(f"lmsreadout: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"lmsreadout: error: {exc}", file=sys.stderr)
        return 2
    art = None
    try:
        art = Artifacts(Path(args.output))
        COMMANDS[args.command](cfg, args, art)
        art.publish()
        return 0
    except (UsageError, ConfigError) as exc:
        print(f"lmsreadout: error: {exc}", file=sys.stderr)
        return 1
    except (AlignmentError, OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"lmsreadout: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    finally:
        if art is not None:
            art.discard()


if __name__ == "__main__":
    sys.exit(main())
