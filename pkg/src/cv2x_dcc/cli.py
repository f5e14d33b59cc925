"""Command line entry point: run one configuration or a whole preset."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConfigError
from .output import write_run, write_summary
from .presets import desk_scale, get_preset, list_presets
from .sim import simulate

log = logging.getLogger("cv2x_dcc")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"1,2,3"``, ``"1 2 3"`` or ``"1-5"``."""
    seeds = []
    for part in text.replace(",", " ").split():
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("empty seed list")
    return tuple(seeds)


def _job(args):
    cfg, seed, out, trace_grants, trace_channel = args
    result = simulate(cfg.with_seed(seed), seed, trace_channel=trace_channel)
    return write_run(result, out, trace_grants, trace_channel)


def run_configs(configs: list[RunConfig], out: Path, trace_grants: bool = False,
                trace_channel: bool = False, jobs: int = 1) -> list[dict]:
    """Run every config for each of its seeds; returns summary rows in order."""
    tasks = []
    for cfg in configs:
        for seed in cfg.seeds:
            tasks.append((cfg, seed, out / cfg.name / f"seed_{seed}", trace_grants, trace_channel))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_job, tasks))
    else:
        rows = []
        for task in tasks:
            log.info("running %s seed %d", task[0].name, task[1])
            rows.append(_job(task))
    write_summary(rows, out / "summary.csv")
    return rows


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cv2x-dcc",
                                description="C-V2X Mode 4 congestion control simulator")
    p.add_argument("--config", type=Path, help="configuration file (INI sections)")
    p.add_argument("--preset", help="named comparison set, see --list-presets")
    p.add_argument("--seeds", help="seed list, e.g. '1,2,3' or '1-5'")
    p.add_argument("--out", type=Path, help="output directory (default: output_dir of the config)")
    p.add_argument("--trace-grants", action="store_true", help="write grant_trace.csv per run")
    p.add_argument("--trace-channel", action="store_true",
                   help="write per-vehicle controller and CBR/CR traces per run")
    p.add_argument("--desk-scale", action="store_true", help="reduced scenario: 100 vehicles, 20 s, 5 seeds")
    p.add_argument("--list-presets", action="store_true", help="print presets and exit")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.list_presets:
        for name, desc in list_presets():
            print(f"{name:8s} {desc}")
        return EXIT_OK
    try:
        base = load_config(args.config) if args.config else RunConfig()
        seeds = parse_seeds(args.seeds) if args.seeds else None
        if args.jobs < 1:
            raise ConfigError("jobs", "must be >= 1")
        if args.preset:
            preset = get_preset(args.preset)
            configs = preset.configs(base, desk=args.desk_scale, seeds=seeds)
            out = (args.out or Path(base.output_dir)) / preset.name
        else:
            cfg = desk_scale(base) if args.desk_scale else base
            if seeds is not None:
                cfg = replace(cfg, seeds=seeds)
            configs = [cfg.validate()]
            out = args.out or Path(cfg.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = run_configs(configs, out, args.trace_grants, args.trace_channel, args.jobs)
    except Exception as exc:  # any failure during a run is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for r in rows:
        print(f"{r['mechanism']:22s} seed {r['seed']:3d}  cbr {r['mean_cbr']:.3f}  "
              f"pdr {r['mean_pdr_by_bin']:.3f}  ipg {r['mean_ipg']:.1f}  "
              f"awareness {r['awareness_mean']:.3f}  gamma {r['gamma']}")
    print(f"results in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
