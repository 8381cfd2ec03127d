"""Command-line front end: ``spinbench <command> [options]``.

Commands
--------
spectrum   stick spectrum at one orientation (CSV + SVG)
rotate     rotation pattern over an in-plane angle grid (CSV + SVG)
simulate   run a pulse-sequence file (CSV + SVG trace)
fit        fit a decay trace or temperature series (JSON result)
models     evaluate the SLR or flip-flop temperature law (CSV + SVG)

Every command validates its inputs before computing, and every output
file is written atomically. Errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .core import PLANES, Orientation, SpinSystem, field_vector, spin_systems_from_json
from .dynamics import (
    ELECTRON_FLIPFLOP,
    NUCLEAR_FLIPFLOP,
    FlipFlopModel,
    SlrModel,
    flipflop_rate,
    slr_rate,
)

__all__ = ["WorkbenchConfig", "load_config", "build_parser", "main", "BUILTIN_CONFIGS"]

BUILTIN_CONFIGS = {"er167-literature": "er167_yso_literature.json"}
DEFAULT_MW_GHZ = 9.56
DEFAULT_FIELD_MT = 781.0


class CliError(Exception):
    pass


@dataclass(frozen=True)
class WorkbenchConfig:
    """Spin systems plus run defaults, loaded from a JSON document.

    Recognized keys: ``systems`` (inline records) or ``parameter_file``
    (path relative to the config, or ``builtin:<name>``), ``constants``
    (overrides by field name), ``mw_frequency_ghz``, ``field_mT``,
    ``output_dir``. A bare parameter file is also a valid config.
    """

    systems: tuple[SpinSystem, ...]
    constants: PhysicalConstants = DEFAULT_CONSTANTS
    mw_frequency_ghz: float = DEFAULT_MW_GHZ
    field_mT: float = DEFAULT_FIELD_MT
    output_dir: Path = Path(".")
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.systems:
            raise ValueError("config defines no spin systems")
        if not self.mw_frequency_ghz > 0:
            raise ValueError("mw_frequency_ghz must be positive")
        if not self.field_mT > 0:
            raise ValueError("field_mT must be positive")

    def system(self, label: str | None = None) -> SpinSystem:
        if label is None:
            return self.systems[0]
        for s in self.systems:
            if s.site_label == label:
                return s
        raise ValueError(f"no subsite labelled {label!r}; have {[s.site_label for s in self.systems]}")


def _builtin_path(name: str) -> Path:
    if name not in BUILTIN_CONFIGS:
        raise ValueError(f"unknown builtin config {name!r}; choose from {sorted(BUILTIN_CONFIGS)}")
    return Path(str(resources.files("spinbench") / "data" / BUILTIN_CONFIGS[name]))


def load_config(source: str) -> WorkbenchConfig:
    """Load a config from a path or ``builtin:<name>`` / a bare builtin name."""
    name = source[len("builtin:"):] if source.startswith("builtin:") else source
    path = _builtin_path(name) if name in BUILTIN_CONFIGS or source.startswith("builtin:") else Path(source)
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, (dict, list)):
        raise ValueError("config must be a JSON object or list")
    if isinstance(doc, list):
        return WorkbenchConfig(tuple(spin_systems_from_json(doc)))
    if "parameter_file" in doc:
        ref = str(doc["parameter_file"])
        if ref.startswith("builtin:"):
            ppath = _builtin_path(ref[len("builtin:"):])
        else:
            ppath = (path.parent / ref).resolve()
        with open(ppath) as fh:
            systems = spin_systems_from_json(json.load(fh))
    else:
        systems = spin_systems_from_json(doc)
    constants = DEFAULT_CONSTANTS.with_overrides(**doc.get("constants", {}))
    known = {"systems", "parameter_file", "constants", "mw_frequency_ghz", "field_mT", "output_dir"}
    return WorkbenchConfig(
        systems=tuple(systems),
        constants=constants,
        mw_frequency_ghz=float(doc.get("mw_frequency_ghz", DEFAULT_MW_GHZ)),
        field_mT=float(doc.get("field_mT", DEFAULT_FIELD_MT)),
        output_dir=Path(doc.get("output_dir", ".")),
        extras={k: v for k, v in doc.items() if k not in known},
    )


# -- helpers ---------------------------------------------------------------------

def _config(args) -> WorkbenchConfig:
    if not args.config:
        raise CliError("--config is required for this command")
    return load_config(args.config)


def _out_dir(args, cfg: WorkbenchConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    return cfg.output_dir if cfg is not None else Path(".")


def _mw(args, cfg) -> float:
    v = args.mw_ghz if args.mw_ghz is not None else (cfg.mw_frequency_ghz if cfg else DEFAULT_MW_GHZ)
    if not v > 0:
        raise CliError("--mw-ghz must be positive")
    return v


def _field_range(args) -> tuple[float, float]:
    lo, hi = args.field_range
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or hi <= lo:
        raise CliError(f"empty or invalid field range {lo:g}..{hi:g} mT")
    if not args.grid_step > 0:
        raise CliError("--grid-step must be positive")
    return lo, hi


def _kinds(args):
    return None if args.all_kinds else ("allowed", "forbidden")


def _select(cfg: WorkbenchConfig, labels):
    if not labels:
        return list(cfg.systems)
    return [cfg.system(lab) for lab in labels]


def _relaxation(args):
    from .pulsesim import RelaxationSpec

    vals = (args.t1e_s, args.t2e_us, args.t2n_us)
    if all(v is None for v in vals) and args.stretch_m is None:
        return None
    return RelaxationSpec(
        t1e=math.inf if args.t1e_s is None else args.t1e_s,
        t2e=math.inf if args.t2e_us is None else args.t2e_us,
        t2n=math.inf if args.t2n_us is None else args.t2n_us,
        stretch_m=1.0 if args.stretch_m is None else args.stretch_m,
    )


def _temperature(args) -> float:
    if not args.temp_k > 0:
        raise CliError("--temp-k must be positive")
    return args.temp_k


def _report(paths):
    for p in paths:
        print(f"wrote {p}")


# -- commands --------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    from .io import write_spectrum_csv
    from .plotting import plot_spectrum
    from .spectra import StickSpectrum, resonance_fields

    cfg = _config(args)
    mw = _mw(args, cfg)
    rng = _field_range(args)
    orient = Orientation.from_plane(args.plane, args.angle_deg)
    systems = _select(cfg, args.subsite)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parts = [
            resonance_fields(s, orient, mw, rng, args.grid_step, args.moment_floor, _kinds(args),
                             constants=cfg.constants)
            for s in systems
        ]
    spec = StickSpectrum.merge(parts)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out_dir(args, cfg)
    paths = [write_spectrum_csv(out / "spectrum.csv", spec, args.angle_deg)]
    if not args.no_plot:
        paths.append(plot_spectrum(out / "spectrum.svg", spec,
                                   f"{mw:g} GHz, {args.angle_deg:g} deg in {args.plane}"))
    counts = {k: spec.count(k) for k in ("allowed", "forbidden", "other")}
    print(f"{len(spec)} lines ({', '.join(f'{v} {k}' for k, v in counts.items() if v)})")
    _report(paths)
    return 0


def _angle_grid(args) -> np.ndarray:
    start, stop, step = args.angles
    if not step > 0 or stop <= start:
        raise CliError("--angles needs START < STOP and STEP > 0")
    grid = np.arange(start, stop, step)
    if grid[0] < 0 or grid[-1] >= 180:
        raise CliError("angles must lie in [0, 180) degrees")
    return grid


def cmd_rotate(args) -> int:
    from .io import write_rotation_csv
    from .plotting import plot_rotation
    from .spectra import rotation_pattern

    cfg = _config(args)
    mw = _mw(args, cfg)
    rng = _field_range(args)
    grid = _angle_grid(args)
    systems = _select(cfg, args.subsite)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pattern = rotation_pattern(systems, args.plane, grid, mw, rng, args.grid_step,
                                   args.moment_floor, _kinds(args), cfg.constants)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out_dir(args, cfg)
    paths = [write_rotation_csv(out / "rotation.csv", pattern)]
    if not args.no_plot:
        paths.append(plot_rotation(out / "rotation.svg", pattern, f"{mw:g} GHz, {args.plane} plane"))
    print(f"{len(grid)} angles, {len(pattern.lines())} lines")
    _report(paths)
    return 0


def cmd_simulate(args) -> int:
    from .io import write_trace_csv
    from .plotting import plot_trace
    from .pulsesim import load_sequence, run_sequence

    cfg = _config(args)
    system = cfg.system(args.subsite[0] if args.subsite else None)
    b = args.field_mt if args.field_mt is not None else cfg.field_mT
    if not b > 0:
        raise CliError("--field-mt must be positive")
    T = _temperature(args)
    relax = _relaxation(args)
    seq = load_sequence(args.sequence)
    bvec = field_vector(Orientation.from_plane(args.plane, args.angle_deg), b)
    trace = run_sequence(system, bvec, seq, relax, T, cfg.constants)
    out = _out_dir(args, cfg)
    paths = [write_trace_csv(out / "trace.csv", trace.values, trace.signal)]
    if not args.no_plot:
        paths.append(plot_trace(out / "trace.svg", trace.values, trace.signal, trace.parameter or "point"))
    print(f"{len(trace.values)} points")
    _report(paths)
    return 0


def cmd_fit(args) -> int:
    from .fitting import (
        fit_exponential_recovery,
        fit_flipflop_model,
        fit_mims,
        fit_slr_model,
    )
    from .io import read_series_csv, read_trace_csv, write_fit_json

    cfg = load_config(args.config) if args.config else None
    consts = cfg.constants if cfg else DEFAULT_CONSTANTS
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.kind in ("recovery", "mims"):
            trace = read_trace_csv(args.data)
            if args.kind == "recovery":
                result = fit_exponential_recovery(trace)
            else:
                result = fit_mims(trace, m=args.fixed_m)
        else:
            T, y, sigma = read_series_csv(args.data)
            if args.kind == "slr":
                result = fit_slr_model(T, y, _mw(args, cfg), sigma, consts)
            else:
                ti = args.zeeman_temps or list(ELECTRON_FLIPFLOP.zeeman_temperatures)
                result = fit_flipflop_model(T, y, ti, sigma)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out_dir(args, cfg)
    path = write_fit_json(out / f"fit_{args.kind}.json", result)
    tag = "" if result.authoritative else "  [NON-AUTHORITATIVE: not converged]"
    for n, v, s, u in zip(result.names, result.values, result.sigmas, result.units):
        flag = " (at bound)" if n in result.at_bound else (" (fixed)" if n in result.fixed else "")
        print(f"{n} = {v:.9g} +/- {s:.3g} {u}{flag}")
    print(f"converged={result.converged} iterations={result.iterations}{tag}")
    _report([path])
    return 0


def cmd_models(args) -> int:
    from .io import write_model_csv
    from .plotting import plot_model

    start, stop, num = args.t_grid
    if not (start > 0 and stop > start and int(num) >= 2):
        raise CliError("--t-grid needs 0 < START < STOP and NUM >= 2")
    temps = np.linspace(start, stop, int(num))
    if args.kind == "slr":
        model = SlrModel(args.A, args.dE_ghz if args.dE_ghz is not None else DEFAULT_MW_GHZ)
        rate = slr_rate(model, temps)
        times = 1e6 / rate  # s^-1 -> us
        ylabel = "T1 (us)"
    else:
        preset = NUCLEAR_FLIPFLOP if args.preset == "nuclear" else ELECTRON_FLIPFLOP
        model = FlipFlopModel(
            preset.coupling_C if args.C is None else args.C,
            preset.residual_D if args.D is None else args.D,
            tuple(args.zeeman_temps) if args.zeeman_temps else preset.zeeman_temperatures,
        )
        rate = flipflop_rate(model, temps)
        times = 1e3 / rate  # ms^-1 -> us
        ylabel = "T2 (us)"
    out = Path(args.out) if args.out else Path(".")
    paths = [write_model_csv(out / f"model_{args.kind}.csv", temps, rate, times)]
    if not args.no_plot:
        paths.append(plot_model(out / f"model_{args.kind}.svg", temps, times, ylabel))
    print(f"{args.kind}: T={temps[0]:g} K -> {times[0]:.6g} us, T={temps[-1]:g} K -> {times[-1]:.6g} us")
    _report(paths)
    return 0


# -- parser ----------------------------------------------------------------------

def _common(p, config=True):
    if config:
        p.add_argument("--config", help="workbench/parameter JSON, or builtin:er167-literature")
    p.add_argument("--out", help="output directory (default: config output_dir or .)")
    p.add_argument("--no-plot", action="store_true", help="skip SVG output")


def _search_opts(p):
    p.add_argument("--mw-ghz", type=float, help="microwave frequency in GHz")
    p.add_argument("--plane", choices=PLANES, default="bD1")
    p.add_argument("--field-range", type=float, nargs=2, metavar=("LO", "HI"), default=(0.0, 1500.0))
    p.add_argument("--grid-step", type=float, default=0.5, help="scan step in mT")
    p.add_argument("--moment-floor", type=float, default=1e-4, help="minimum moment in muB")
    p.add_argument("--all-kinds", action="store_true", help="keep |dM_I|>1 lines as well")
    p.add_argument("--subsite", action="append", help="restrict to a subsite label (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinbench", description="Spin-Hamiltonian and relaxation workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="stick spectrum at one orientation")
    _common(p)
    _search_opts(p)
    p.add_argument("--angle-deg", type=float, default=0.0, help="angle from the first plane axis")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("rotate", help="rotation pattern over an angle grid")
    _common(p)
    _search_opts(p)
    p.add_argument("--angles", type=float, nargs=3, metavar=("START", "STOP", "STEP"), default=(0.0, 180.0, 1.0))
    p.set_defaults(func=cmd_rotate)

    p = sub.add_parser("simulate", help="run a pulse-sequence file")
    _common(p)
    p.add_argument("--sequence", required=True, help="sequence JSON")
    p.add_argument("--field-mt", type=float, help="static field magnitude in mT")
    p.add_argument("--plane", choices=PLANES, default="bD1")
    p.add_argument("--angle-deg", type=float, default=0.0)
    p.add_argument("--temp-k", type=float, default=0.1)
    p.add_argument("--t1e-s", type=float)
    p.add_argument("--t2e-us", type=float)
    p.add_argument("--t2n-us", type=float)
    p.add_argument("--stretch-m", type=float)
    p.add_argument("--subsite", action="append", help="subsite label to simulate (default: first)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a trace or temperature series")
    p.add_argument("kind", choices=("recovery", "mims", "slr", "flipflop"))
    _common(p)
    p.add_argument("--data", required=True, help="CSV: delay_us,amplitude[,sigma] or T_K,time_constant[,sigma]")
    p.add_argument("--fixed-m", type=float, help="hold the stretch exponent fixed (mims)")
    p.add_argument("--mw-ghz", type=float, help="SLR transition energy in GHz (default 9.56)")
    p.add_argument("--zeeman-temps", type=float, nargs="+", help="fixed subsite Zeeman temperatures in K")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("models", help="evaluate a temperature law on a grid")
    p.add_argument("kind", choices=("slr", "flipflop"))
    _common(p, config=False)
    p.add_argument("--t-grid", type=float, nargs=3, metavar=("START", "STOP", "NUM"), default=(0.1, 0.9, 81))
    p.add_argument("--A", type=float, default=0.0341, help="SLR prefactor in s^-1")
    p.add_argument("--dE-ghz", type=float, help="SLR transition energy in GHz (default 9.56)")
    p.add_argument("--preset", choices=("electron", "nuclear"), default="electron")
    p.add_argument("--C", type=float, help="flip-flop coupling in ms^-1")
    p.add_argument("--D", type=float, help="residual rate in ms^-1")
    p.add_argument("--zeeman-temps", type=float, nargs=4, help="four subsite Zeeman temperatures in K")
    p.set_defaults(func=cmd_models)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"spinbench {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
