"""CSV and JSON writers/readers for traces, classifications and sweep maps.

Floats are written with ``repr`` so every row parses back to the exact
value it came from.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable

from dmdark.analysis import DarkPulse, StateClassification
from dmdark.cavity import RoundTripTrace
from dmdark.sweep import CellResult, RegionMap

TRACE_COLUMNS = ("trip", "energy_pj", "cw_level_w", "residual", "pulse_count", "pulse_positions_ps")
CLASSIFICATION_COLUMNS = (
    "run_id", "label", "status", "trips", "pulse_count", "cw_level_w", "bandwidth_nm",
    "bandwidth_grid_limited", "tbp", "pulse_index", "position_ps", "fwhm_ps",
    "modulation_depth", "phase_step_rad",
)
REGION_COLUMNS = (
    "smf_length_m", "net_dispersion_ps2", "gain_per_km", "seed", "label", "pulse_count",
    "depth_max", "fwhm_ps", "bandwidth_nm", "cw_level_w", "trips", "status", "error",
)
PULSE_COLUMNS = ("smf_length_m", "gain_per_km", "seed", "pulse_index", "position_ps", "fwhm_ps", "modulation_depth")


def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _parse_float(s: str) -> float:
    return float(s) if s != "" else math.nan


def _rows(path: Path) -> Iterable[dict]:
    with open(path, newline="") as fh:
        body = (line for line in fh if not line.startswith("#"))
        yield from csv.DictReader(body)


# -- trace --------------------------------------------------------------------


def write_trace_csv(trace: RoundTripTrace, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for k in range(len(trace)):
            positions = ";".join(fmt(p) for p in trace.pulse_positions[k])
            w.writerow(
                [k + 1, fmt(trace.energy[k]), fmt(trace.cw_level[k]), fmt(trace.residual[k]),
                 trace.pulse_counts[k], positions]
            )


def read_trace_csv(path: Path, status: str = "") -> RoundTripTrace:
    trace = RoundTripTrace(status=status or "running")
    for row in _rows(path):
        trace.energy.append(float(row["energy_pj"]))
        trace.cw_level.append(float(row["cw_level_w"]))
        trace.residual.append(float(row["residual"]))
        trace.pulse_counts.append(int(row["pulse_count"]))
        pos = row["pulse_positions_ps"]
        trace.pulse_positions.append(tuple(float(p) for p in pos.split(";")) if pos else ())
    return trace


# -- classification -----------------------------------------------------------


def classification_rows(run_id: str, c: StateClassification, status: str = "", trips: int = 0) -> list[list[str]]:
    """One row per pulse; a state without pulses still gets one row."""
    head = [run_id, c.label, status, trips, c.pulse_count, fmt(c.cw_level), fmt(c.spectral_bw_3db),
            fmt(c.bandwidth_grid_limited), fmt(c.tbp)]
    if not c.pulses:
        return [head + ["", "", "", "", ""]]
    return [
        head + [k, fmt(p.position), fmt(p.fwhm), fmt(p.modulation_depth), fmt(p.phase_step)]
        for k, p in enumerate(c.pulses)
    ]


def write_classification_csv(path: Path, run_id: str, c: StateClassification, status: str = "", trips: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLASSIFICATION_COLUMNS)
        w.writerows(classification_rows(run_id, c, status, trips))


def read_classification_csv(path: Path) -> tuple[str, StateClassification, str, int]:
    """Inverse of :func:`write_classification_csv`: (run_id, classification, status, trips)."""
    rows = list(_rows(path))
    if not rows:
        raise ValueError(f"{path}: no classification rows")
    r0 = rows[0]
    pulses = tuple(
        DarkPulse(float(r["position_ps"]), float(r["fwhm_ps"]), float(r["modulation_depth"]),
                  _parse_float(r["phase_step_rad"]))
        for r in rows
        if r["pulse_index"] != ""
    )
    c = StateClassification(
        r0["label"], pulses, float(r0["cw_level_w"]), _parse_float(r0["bandwidth_nm"]),
        r0["bandwidth_grid_limited"] == "1", _parse_float(r0["tbp"]),
    )
    return r0["run_id"], c, r0["status"], int(r0["trips"])


# -- sweep --------------------------------------------------------------------


def region_row(c: CellResult) -> list[str]:
    return [fmt(c.smf_length_m), fmt(c.net_dispersion_ps2), fmt(c.gain_per_km), c.seed, c.label,
            c.pulse_count, fmt(c.depth_max), fmt(c.fwhm_ps), fmt(c.bandwidth_nm), fmt(c.cw_level),
            c.trips, c.status, c.error]


def pulse_rows(c: CellResult) -> list[list[str]]:
    return [[fmt(c.smf_length_m), fmt(c.gain_per_km), c.seed, k, fmt(p[0]), fmt(p[1]), fmt(p[2])]
            for k, p in enumerate(c.pulses)]


def write_region_csv(region: RegionMap, path: Path, header: dict[str, str]) -> None:
    """Region map with ``# key: value`` metadata lines before the column header."""
    with open(path, "w", newline="") as fh:
        for k, v in header.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGION_COLUMNS)
        w.writerows(region_row(c) for c in region.cells)


def write_pulses_csv(region: RegionMap, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PULSE_COLUMNS)
        for c in region.cells:
            w.writerows(pulse_rows(c))


def read_region_header(path: Path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            out[key.strip()] = value.strip()
    return out


def read_region_csv(path: Path, pulses_path: Path | None = None) -> RegionMap:
    pulses: dict[tuple, list] = {}
    if pulses_path is not None and Path(pulses_path).exists():
        for r in _rows(pulses_path):
            key = (float(r["smf_length_m"]), float(r["gain_per_km"]), int(r["seed"]))
            pulses.setdefault(key, []).append(
                (int(r["pulse_index"]), (float(r["position_ps"]), float(r["fwhm_ps"]), float(r["modulation_depth"])))
            )
    cells = []
    for r in _rows(path):
        key = (float(r["smf_length_m"]), float(r["gain_per_km"]), int(r["seed"]))
        ps = tuple(p for _, p in sorted(pulses.get(key, [])))
        cells.append(
            CellResult(
                key[0], key[1], key[2], float(r["net_dispersion_ps2"]), r["label"], int(r["pulse_count"]),
                _parse_float(r["depth_max"]), _parse_float(r["fwhm_ps"]), _parse_float(r["bandwidth_nm"]),
                _parse_float(r["cw_level_w"]), int(r["trips"]), r["status"], ps, r["error"],
            )
        )
    return RegionMap(tuple(cells))


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def write_json(obj, path: Path) -> None:
    """Pretty JSON with NaN and inf written as null."""
    Path(path).write_text(json.dumps(_finite(obj), indent=2, sort_keys=True) + "\n")
