"""Command line: ``dmdark run | sweep | analyze``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from types import SimpleNamespace

from dmdark import __version__
from dmdark.analysis import classify, find_dark_pulses
from dmdark.cavity import CavityConfig, net_dispersion, run_to_steady_state
from dmdark.config import ConfigError, config_to_dict, format_config, parse_config
from dmdark.export import (
    config_hash,
    pulse_rows,
    read_region_csv,
    read_region_header,
    region_row,
    write_classification_csv,
    write_json,
    write_pulses_csv,
    write_region_csv,
    write_trace_csv,
)
from dmdark.fiber import PropagationError
from dmdark.grid import SnapshotFormatError, read_snapshot, write_snapshot
from dmdark.kernels import BACKEND
from dmdark.sweep import RegionMap, SweepSpec, run_sweep

log = logging.getLogger("dmdark")


class UsageError(Exception):
    pass


def _load(path: str | None):
    text = Path(path).read_text() if path else ""
    return parse_config(text), text


def _derived(cfg: CavityConfig) -> dict:
    return {
        "net_dispersion_ps2": net_dispersion(cfg),
        "total_length_m": cfg.total_length_m,
        "segments": {
            s.name: {
                "beta2_ps2_per_km": c.beta2,
                "beta3_ps3_per_km": c.beta3,
                "beta_bi_rad_per_km": c.beta_bi,
                "delta_ps_per_km": c.delta,
                "omega_g_rad_per_ps": c.omega_g,
            }
            for s, c in zip(cfg.segments, cfg.coefficients())
        },
    }


def _meta(cfg: CavityConfig, seed: int, mode: str, **extra) -> dict:
    return {
        "software": "dmdark",
        "version": __version__,
        "kernel_backend": BACKEND,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "mode": mode,
        "seed": seed,
        "config": config_to_dict(cfg),
        "config_text": format_config(cfg),
        "derived": _derived(cfg),
        **extra,
    }


def cmd_run(args) -> int:
    cfg, _ = _load(args.config)
    if isinstance(cfg, SweepSpec):
        raise UsageError("config has a [sweep] section; use 'dmdark sweep'")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    f0 = cfg.initial.build(cfg.grid, args.seed)

    def progress(k, f, trace):
        if k % 100 == 0:
            log.info("trip %d  energy %.4g pJ  residual %.3g", k, trace.energy[-1], trace.residual[-1])

    f, trace = run_to_steady_state(f0, cfg, seed=args.seed, snapshot_every=args.snapshot_every, callback=progress)
    c = classify(trace, f, cfg.lambda0, cfg.depth_threshold, cfg.stable_trips)

    write_trace_csv(trace, out / "trace.csv")
    write_snapshot(f, out / "final_field.bin")
    write_classification_csv(out / "classification.csv", "run", c, trace.status, len(trace))
    if trace.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for k, field in sorted(trace.snapshots.items()):
            write_snapshot(field, snap_dir / f"field_{k:05d}.bin")
    write_json(_meta(cfg, args.seed, "run", status=trace.status, trips=len(trace), label=c.label), out / "meta.json")
    print(f"{c.label} ({trace.status} after {len(trace)} trips), {c.pulse_count} dark pulse(s); output in {out}")
    return 0


def _sweep_header(spec: SweepSpec, seed: int) -> dict[str, str]:
    base = spec.base
    text = format_config(base) + f"\nsmf={spec.smf_lengths!r} gains={spec.gains!r} seeds={spec.seeds!r}\n"
    return {
        "software": f"dmdark {__version__}",
        "config_hash": config_hash(text),
        "seed": str(seed),
        "seeds": " ".join(str(s) for s in spec.seeds),
        "grid": f"n_samples={base.n_samples} window_ps={base.window!r}",
        "smf_lengths_m": " ".join(repr(m) for m in spec.smf_lengths),
        "gains_per_km": " ".join(repr(g) for g in spec.gains),
    }


def cmd_sweep(args) -> int:
    spec, _ = _load(args.config)
    if isinstance(spec, CavityConfig):
        spec = SweepSpec(base=spec)
    seeds = tuple(args.seed + s for s in spec.seeds)
    spec = SweepSpec(spec.smf_lengths, spec.gains, spec.base, seeds, args.workers or spec.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    region_path, pulses_path = out / "region_map.csv", out / "pulses.csv"
    header = _sweep_header(spec, args.seed)

    previous = RegionMap(())
    if args.resume and region_path.exists():
        old = read_region_header(region_path)
        if old.get("config_hash") != header["config_hash"]:
            raise UsageError(f"{region_path} was written for a different configuration; refusing to resume")
        previous = read_region_csv(region_path, pulses_path)
    wanted = set(spec.cells())
    kept = tuple(c for c in previous.cells if c.key in wanted)

    # rewrite what we keep, then append cells as they finish so a crash loses little
    write_region_csv(RegionMap(kept), region_path, header)
    write_pulses_csv(RegionMap(kept), pulses_path)
    with open(region_path, "a", newline="") as rf, open(pulses_path, "a", newline="") as pf:
        rw = csv.writer(rf, lineterminator="\n")
        pw = csv.writer(pf, lineterminator="\n")

        def record(cell):
            rw.writerow(region_row(cell))
            pw.writerows(pulse_rows(cell))
            rf.flush()
            pf.flush()
            log.info("smf %g m, gain %g /km, seed %d -> %s", cell.smf_length_m, cell.gain_per_km, cell.seed, cell.label)

        fresh = run_sweep(spec, skip=[c.key for c in kept], on_result=record)

    region = RegionMap(kept + fresh.cells)
    write_region_csv(region, region_path, header)
    write_pulses_csv(region, pulses_path)
    write_json(
        _meta(spec.base, args.seed, "sweep", seeds=list(seeds), smf_lengths_m=list(spec.smf_lengths),
              gains_per_km=list(spec.gains), cells=len(region), recomputed=len(fresh)),
        out / "meta.json",
    )
    print(f"{len(fresh)} cell(s) computed, {len(kept)} reused; map in {region_path}")
    return 0


def cmd_analyze(args) -> int:
    cfg, _ = _load(args.config)
    if isinstance(cfg, SweepSpec):
        cfg = cfg.base
    f = read_snapshot(args.snapshot)
    # a stored field carries no history: treat it as a settled state
    n = cfg.stable_trips
    pulses = find_dark_pulses(f, cfg.depth_threshold) if f.power.any() else []
    trace = SimpleNamespace(
        status="converged", pulse_counts=[len(pulses)] * n, pulse_positions=[tuple(p.position for p in pulses)] * n
    )
    c = classify(trace, f, cfg.lambda0, cfg.depth_threshold, n)
    print(f"label: {c.label}")
    print(f"cw_level_w: {c.cw_level:.6g}")
    bw = "grid-limited" if c.bandwidth_grid_limited else ""
    print(f"bandwidth_3db_nm: {c.spectral_bw_3db:.6g} {bw}".rstrip())
    print(f"tbp: {c.tbp:.4g}" if math.isfinite(c.tbp) else "tbp: n/a")
    print(f"pulses: {c.pulse_count}")
    if c.pulses:
        print(f"{'#':>3} {'position_ps':>12} {'fwhm_ps':>9} {'depth':>7} {'phase_rad':>9}")
        for k, p in enumerate(c.pulses):
            print(f"{k:>3} {p.position:>12.4f} {p.fwhm:>9.4f} {p.modulation_depth:>7.4f} {p.phase_step:>9.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_classification_csv(out / "classification.csv", Path(args.snapshot).stem, c, "snapshot", 0)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmdark", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (defaults: reference laser)")
    common.add_argument("--seed", type=int, default=0, help="seed for the initial noise")

    r = sub.add_parser("run", parents=[common], help="iterate one cavity to steady state")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--snapshot-every", type=int, default=0, metavar="N",
                   help="save the field every N trips plus the last (0: final only)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="(SMF length, gain) map")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, default=0, help="process count (default: config or 1)")
    s.add_argument("--resume", action="store_true", help="keep cells already in region_map.csv")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", parents=[common], help="classify a stored field snapshot")
    a.add_argument("snapshot", help="binary field file")
    a.add_argument("--out", help="also write classification.csv here")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "snapshot_every", 0) < 0:
        parser.error("--snapshot-every must be >= 0")
    if getattr(args, "workers", 0) < 0:
        parser.error("--workers must be >= 0")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SnapshotFormatError, UsageError) as exc:
        print(f"dmdark: error: {exc}", file=sys.stderr)
        return 2
    except (PropagationError, OSError) as exc:
        print(f"dmdark: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
