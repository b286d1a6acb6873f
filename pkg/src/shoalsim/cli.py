"""``shoal-bench``: run simulated scenarios and compare their metrics.

    shoal-bench run --preset n50-f8-shoal --out results/shoal
    shoal-bench run --mode vanilla --validators 10 --crashes 3 --rounds 80 --out results/v
    shoal-bench compare results/v/metrics.json results/shoal/metrics.json

Flags given on the command line override the fields of ``--config`` or
``--preset``.  Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage
or configuration error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .framework import SHOAL_MODES, ShoalConfig
from .metrics import MetricsFileError, compare, compute_metrics
from .netsim import ConfigError, SimConfig, mode_config, run, uniform_matrix
from .pacer import PACER_MODES, PacerKind, PacerPolicy

MODES = PACER_MODES + SHOAL_MODES

_PRESET_RE = re.compile(r"^n(\d+)-(nofail|f(\d+))-(" + "|".join(re.escape(m) for m in MODES) + r")$")


def crash_set(n: int, k: int) -> list:
    """First ``k`` validators crash at time 0 (round-robin placement spreads them over regions)."""
    return [(v, 0.0) for v in range(k)]


def preset(name: str) -> SimConfig:
    """Named scenario.

    ``n{N}-nofail-{mode}`` and ``n{N}-f{K}-{mode}`` run the multi-region matrix
    with K crashed validators; ``fallback-adversarial`` slows three validators
    of a uniform 50 ms network enough that their anchors keep being skipped,
    which drives the fallback pacer into timeout mode.
    """
    if name == "fallback-adversarial":
        return mode_config(
            "baseline-fallback", n=10, latency_ms=uniform_matrix(50.0), jitter=0.05,
            delay_multiplier={0: 4.0, 2: 4.0, 4: 4.0}, fallback_k=3, timeout_ms=1000.0,
            duration_rounds=60, seed=7, record_deliveries=True,
        )
    m = _PRESET_RE.match(name)
    if not m:
        raise KeyError(name)
    n = int(m.group(1))
    k = 0 if m.group(2) == "nofail" else int(m.group(3))
    return mode_config(m.group(4), n=n, crashes=crash_set(n, k), duration_rounds=100)


PRESET_EXAMPLES = ("n10-nofail-shoal", "n50-nofail-baseline", "n50-f8-vanilla", "n50-f8-shoal",
                   "n50-f16-shoal", "fallback-adversarial")


def _apply_mode(cfg: SimConfig, mode: str) -> SimConfig:
    p = cfg.pacer
    if mode in PACER_MODES:
        cfg.pacer = PacerPolicy(PacerKind(mode), p.timeout_ms, p.fallback_k)
        cfg.shoal = ShoalConfig.for_mode("bullshark", epoch_seed=cfg.shoal.epoch_seed,
                                         w_high=cfg.shoal.w_high, w_low=cfg.shoal.w_low)
    else:
        cfg.pacer = PacerPolicy(PacerKind.BASELINE, p.timeout_ms, p.fallback_k)
        cfg.shoal = ShoalConfig.for_mode(mode, epoch_seed=cfg.shoal.epoch_seed,
                                         w_high=cfg.shoal.w_high, w_low=cfg.shoal.w_low)
    return cfg


def config_mode(cfg: SimConfig) -> str:
    """Inverse of :func:`shoalsim.netsim.mode_config` for display purposes."""
    if cfg.shoal.mode.value != "bullshark":
        return cfg.shoal.mode.value
    return cfg.pacer.kind.value


def build_config(args) -> SimConfig:
    if args.config and args.preset:
        raise ConfigError(["--config and --preset are mutually exclusive"])
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError([f"--config: {e}"]) from None
        try:
            cfg = SimConfig.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError([f"--config: not valid JSON ({e})"]) from None
    elif args.preset:
        try:
            cfg = preset(args.preset)
        except KeyError:
            raise ConfigError([f"--preset: unknown preset {args.preset!r}"]) from None
    else:
        cfg = mode_config(args.mode or "shoal", n=args.validators or 10)

    d = cfg.to_dict()
    if args.validators is not None:
        d["n"] = args.validators
        d["f"] = None
        d["regions"] = None
        if args.crashes is None:
            d["crashes"] = [c for c in d["crashes"] if c[0] < args.validators]
    if args.crashes is not None:
        d["crashes"] = crash_set(d["n"], args.crashes)
    if args.rounds is not None:
        d["duration_rounds"] = args.rounds
    if args.seed is not None:
        d["seed"] = args.seed
        d["shoal"]["epoch_seed"] = args.seed
    if args.timeout_ms is not None:
        d["pacer"]["timeout_ms"] = args.timeout_ms
    cfg = SimConfig.from_dict(d)
    if args.mode:
        cfg = _apply_mode(cfg, args.mode)
    return cfg.validate()


def write_results(out: Path, cfg: SimConfig, trace, metrics):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps() + "\n")
    (out / "metrics.json").write_text(metrics.dumps())
    (out / "timeline.csv").write_text(metrics.timeline_csv())
    tdir = out / "trace"
    tdir.mkdir(exist_ok=True)
    for v in trace.validators:
        (tdir / f"validator-{v.id:03d}.json").write_text(
            json.dumps(v.to_json(), sort_keys=True, separators=(",", ":")) + "\n")


def cmd_run(args) -> int:
    try:
        cfg = build_config(args)
    except ConfigError as e:
        for p in e.problems:
            print(f"error: {p}", file=sys.stderr)
        return 2
    try:
        trace = run(cfg)
        metrics = compute_metrics(trace, convention=args.latency_convention)
        if args.out:
            write_results(Path(args.out), cfg, trace, metrics)
    except Exception as e:  # noqa: BLE001 - report and map to exit code 1
        print(f"error: run failed: {e}", file=sys.stderr)
        return 1

    def ms(x):
        return "-" if x is None else f"{x:.1f} ms"

    print(f"mode={config_mode(cfg)} "
          f"n={cfg.n} crashes={len(cfg.crashes)} rounds={cfg.duration_rounds} seed={cfg.seed}")
    print(f"throughput {metrics.throughput_tps:.0f} tx/s  latency avg {ms(metrics.latency_avg_ms)}  "
          f"p50 {ms(metrics.latency_p50_ms)}  p90 {ms(metrics.latency_p90_ms)}")
    print(f"anchors ordered {metrics.anchors_ordered}, skipped {metrics.anchors_skipped}")
    return 0


def cmd_compare(args) -> int:
    if args.labels and len(args.labels) != len(args.files):
        print("error: --labels needs one label per file", file=sys.stderr)
        return 2
    try:
        _, text, csv_text = compare(args.files, args.labels)
    except (MetricsFileError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    if args.csv:
        try:
            Path(args.csv).write_text(csv_text)
        except OSError as e:
            print(f"error: cannot write {args.csv}: {e}", file=sys.stderr)
            return 1
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shoal-bench", description="DAG BFT ordering simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--config", metavar="PATH", help="JSON SimConfig file")
    r.add_argument("--preset", metavar="NAME",
                   help="named scenario, e.g. " + ", ".join(PRESET_EXAMPLES))
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--validators", type=int, metavar="N")
    r.add_argument("--crashes", type=int, metavar="K")
    r.add_argument("--timeout-ms", type=float, metavar="T")
    r.add_argument("--rounds", type=int, metavar="R")
    r.add_argument("--seed", type=int, metavar="S")
    r.add_argument("--latency-convention", choices=("first", "mean"), default="first")
    r.add_argument("--out", metavar="DIR")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="percent deltas between metrics files (first is the base)")
    c.add_argument("files", nargs="+")
    c.add_argument("--labels", nargs="+")
    c.add_argument("--csv", metavar="PATH")
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
