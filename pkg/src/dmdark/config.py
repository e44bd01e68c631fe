"""INI-style configuration files.

Grammar: ``[section]`` headers followed by ``key = value`` lines; ``#`` and
``;`` start comments. Every key is optional and defaults to the reference
laser at SMF 8 m. Angles are given in units of pi. A ``[sweep]`` section
turns the file into a sweep description.

============  =================================================================
section       keys
============  =================================================================
cavity        polarizer_angle_pi, phase_bias_pi, coupler_out, lambda0_nm,
              smf_length_m, gain_per_km
edf/smf/dcf   length_m, dispersion, third_order_dispersion, gamma,
              small_signal_gain, sat_energy_pj, gain_bandwidth_nm,
              beat_length_ratio
grid          n_samples, window_ps
solver        step_m, substeps, kerr, max_round_trips, convergence_tol,
              stable_trips, noise_per_trip
initial       shape (sech_dip | black_soliton), cw_power_w, dip_depth,
              dip_width_ps, noise_amplitude
analysis      depth_threshold
sweep         smf_lengths_m, gains_per_km, seeds (comma lists), workers
============  =================================================================
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re

from dmdark.cavity import CavityConfig, InitialCondition, default_segments
from dmdark.fiber import StepControl
from dmdark.sweep import DEFAULT_GAINS, DEFAULT_SMF_LENGTHS, SweepSpec


class ConfigError(ValueError):
    """Invalid configuration text; ``line`` is 1-based or None."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.key = key


_FIBER_KEYS = {
    "length_m": float,
    "dispersion": float,
    "third_order_dispersion": float,
    "gamma": float,
    "small_signal_gain": float,
    "sat_energy_pj": float,
    "gain_bandwidth_nm": float,
    "beat_length_ratio": float,
}

SCHEMA = {
    "cavity": {
        "polarizer_angle_pi": float,
        "phase_bias_pi": float,
        "coupler_out": float,
        "lambda0_nm": float,
        "smf_length_m": float,
        "gain_per_km": float,
    },
    "edf": _FIBER_KEYS,
    "smf": _FIBER_KEYS,
    "dcf": _FIBER_KEYS,
    "grid": {"n_samples": int, "window_ps": float},
    "solver": {
        "step_m": float,
        "substeps": int,
        "kerr": str,
        "max_round_trips": int,
        "convergence_tol": float,
        "stable_trips": int,
        "noise_per_trip": float,
    },
    "initial": {
        "shape": str,
        "cw_power_w": float,
        "dip_depth": float,
        "dip_width_ps": float,
        "noise_amplitude": float,
    },
    "analysis": {"depth_threshold": float},
    "sweep": {"smf_lengths_m": "floats", "gains_per_km": "floats", "seeds": "ints", "workers": int},
}

# config key -> FiberSegment field (and unit scale)
_FIBER_FIELDS = {
    "length_m": ("length", 1e-3),
    "dispersion": ("dispersion_D", 1.0),
    "third_order_dispersion": ("third_order_D", 1.0),
    "gamma": ("gamma", 1.0),
    "small_signal_gain": ("small_signal_gain", 1.0),
    "sat_energy_pj": ("sat_energy", 1.0),
    "gain_bandwidth_nm": ("gain_bandwidth", 1.0),
    "beat_length_ratio": ("beat_length_ratio", 1.0),
}


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Map (section, key) to the line it appears on."""
    lines = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            lines.setdefault((section, None), n)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip().lower()), n)
    return lines


def _convert(kind, value: str):
    if kind == "floats":
        return tuple(float(x) for x in value.replace(",", " ").split())
    if kind == "ints":
        return tuple(int(x) for x in value.replace(",", " ").split())
    if kind is int:
        return int(value)
    if kind is float:
        x = float(value)
        if not math.isfinite(x):
            raise ValueError("not a finite number")
        return x
    return value.strip()


def read_values(text: str) -> dict[str, dict[str, object]]:
    """Parse and type-check ``text`` without applying defaults."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__none__"
    )
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line, bad = exc.errors[0]
        raise ConfigError(f"cannot parse {bad!r}", line) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, exc.option) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    where = _key_lines(text)
    out: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", where.get((sec, None)))
        values = {}
        for key, raw in parser.items(section):
            line = where.get((sec, key))
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", line, key)
            try:
                values[key] = _convert(SCHEMA[sec][key], raw)
            except ValueError:
                raise ConfigError(f"bad value {raw!r} for {sec}.{key}", line, key) from None
        out[sec] = values
    return out


def _build(values: dict[str, dict[str, object]]) -> CavityConfig:
    cav = values.get("cavity", {})
    segs = []
    for seg in default_segments(cav.get("smf_length_m", 8.0), cav.get("gain_per_km", 485.0)):
        changes = {}
        for key, x in values.get(seg.name.lower(), {}).items():
            name, scale = _FIBER_FIELDS[key]
            changes[name] = x * scale
        segs.append(dataclasses.replace(seg, **changes))

    grid = values.get("grid", {})
    sol = values.get("solver", {})
    ini = values.get("initial", {})
    ana = values.get("analysis", {})
    base = CavityConfig()
    step = StepControl(
        sol.get("step_m", base.step.step_size * 1e3) * 1e-3,
        sol.get("substeps", base.step.substeps),
        sol.get("kerr", base.step.kerr),
    )
    initial = InitialCondition(
        ini.get("cw_power_w", base.initial.cw_power),
        ini.get("dip_depth", base.initial.dip_depth),
        ini.get("dip_width_ps", base.initial.dip_width),
        ini.get("noise_amplitude", base.initial.noise_amplitude),
        ini.get("shape", base.initial.shape),
    )
    return CavityConfig(
        segments=tuple(segs),
        polarizer_angle=cav.get("polarizer_angle_pi", base.polarizer_angle / math.pi) * math.pi,
        phase_bias=cav.get("phase_bias_pi", base.phase_bias / math.pi) * math.pi,
        coupler_out=cav.get("coupler_out", base.coupler_out),
        lambda0=cav.get("lambda0_nm", base.lambda0),
        n_samples=grid.get("n_samples", base.n_samples),
        window=grid.get("window_ps", base.window),
        step=step,
        max_round_trips=sol.get("max_round_trips", base.max_round_trips),
        convergence_tol=sol.get("convergence_tol", base.convergence_tol),
        stable_trips=sol.get("stable_trips", base.stable_trips),
        depth_threshold=ana.get("depth_threshold", base.depth_threshold),
        noise_per_trip=sol.get("noise_per_trip", base.noise_per_trip),
        initial=initial,
    )


def parse_config(text: str) -> CavityConfig | SweepSpec:
    """Build a :class:`CavityConfig`, or a :class:`SweepSpec` if ``[sweep]`` is present.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, bad values, and range
        violations; the message names the line where it can.
    """
    values = read_values(text)
    try:
        cfg = _build(values)
    except ValueError as exc:
        raise ConfigError(f"out of range: {exc}") from None
    if "sweep" not in values:
        return cfg
    sw = values["sweep"]
    try:
        return SweepSpec(
            smf_lengths=sw.get("smf_lengths_m", DEFAULT_SMF_LENGTHS),
            gains=sw.get("gains_per_km", DEFAULT_GAINS),
            base=cfg,
            seeds=sw.get("seeds", (0,)),
            workers=sw.get("workers", 1),
        )
    except ValueError as exc:
        raise ConfigError(f"out of range: {exc}") from None


def config_to_dict(cfg: CavityConfig) -> dict:
    """Every resolved setting as plain JSON-ready values."""
    d = dataclasses.asdict(cfg)
    d["segments"] = [dataclasses.asdict(s) for s in cfg.segments]
    return d


def format_config(cfg: CavityConfig) -> str:
    """Write ``cfg`` back in the file grammar (angles in units of pi)."""
    out = [
        "[cavity]",
        f"polarizer_angle_pi = {cfg.polarizer_angle / math.pi!r}",
        f"phase_bias_pi = {cfg.phase_bias / math.pi!r}",
        f"coupler_out = {cfg.coupler_out!r}",
        f"lambda0_nm = {cfg.lambda0!r}",
    ]
    for seg in cfg.segments:
        out += ["", f"[{seg.name.lower()}]"]
        for key, (name, scale) in _FIBER_FIELDS.items():
            out.append(f"{key} = {getattr(seg, name) / scale!r}")
    out += [
        "",
        "[grid]",
        f"n_samples = {cfg.n_samples}",
        f"window_ps = {cfg.window!r}",
        "",
        "[solver]",
        f"step_m = {cfg.step.step_size * 1e3!r}",
        f"substeps = {cfg.step.substeps}",
        f"kerr = {cfg.step.kerr}",
        f"max_round_trips = {cfg.max_round_trips}",
        f"convergence_tol = {cfg.convergence_tol!r}",
        f"stable_trips = {cfg.stable_trips}",
        f"noise_per_trip = {cfg.noise_per_trip!r}",
        "",
        "[initial]",
        f"shape = {cfg.initial.shape}",
        f"cw_power_w = {cfg.initial.cw_power!r}",
        f"dip_depth = {cfg.initial.dip_depth!r}",
        f"dip_width_ps = {cfg.initial.dip_width!r}",
    ]
    if cfg.initial.noise_amplitude is not None:
        out.append(f"noise_amplitude = {cfg.initial.noise_amplitude!r}")
    out += ["", "[analysis]", f"depth_threshold = {cfg.depth_threshold!r}", ""]
    return "\n".join(out)
