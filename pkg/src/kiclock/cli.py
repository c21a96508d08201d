"""Command-line entry point.

Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .circuit import quantize_circuit, tuning_curve
from .config import load_config
from .errors import (
    CriticalCurrentError,
    FitError,
    InvalidArgumentError,
    InvalidConfigurationError,
    InvalidScheduleError,
    KiclockError,
)
from .fitting import fit_exponential, fit_lorentzian_peaks, fit_resonance, fit_tuning
from .modes import integrate_modes, reflection_s11, ringdown_schedule
from .pulses import endor_scan, hahn_echo, hahn_schedule
from .scenarios import SCENARIOS, get_scenario
from .spin import find_clock_transition, labeled_spectrum, transitions

OUTPUT_ENV = "KICLOCK_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
NEGATIVE_VALUE = re.compile(r"^-\.?\d")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _label(text: str) -> tuple[int, int]:
    try:
        F, m = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"level label must look like F,m: {text!r}") from None
    return F, m


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers: {text!r}") from None
    return a, b


def _emit(text: str, out: str | None) -> None:
    if out:
        io.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a configuration value (repeatable)")
    if out:
        p.add_argument("-o", "--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kiclock", description="Bi:Si clock-transition and kinetic-inductance circuit simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="transition catalog at one field")
    _common(p)
    p.add_argument("--bz", type=float, required=True, help="field (T)")
    p.add_argument("--kind", choices=("esr", "nmr", "all"), default="all")

    p = sub.add_parser("clock-find", help="locate a clock transition")
    _common(p)
    p.add_argument("--lower", type=_label, default=(4, 0))
    p.add_argument("--upper", type=_label, default=(5, -1))
    p.add_argument("--bracket", type=_pair, default=(0.02, 0.03), help="field interval lo,hi (T)")

    p = sub.add_parser("tune", help="mode frequencies over a bias grid")
    _common(p)
    p.add_argument("--ia", type=_pair, default=(-2e-3, 2e-3), help="I_A range lo,hi (A)")
    p.add_argument("--ib", type=_pair, default=(0.0, 0.0), help="I_B range lo,hi (A)")
    p.add_argument("--n", type=int, default=41, help="points per axis")

    p = sub.add_parser("quantize", help="circuit Hamiltonian couplings at the configured bias")
    _common(p)

    p = sub.add_parser("s11", help="reflection spectrum")
    _common(p)
    p.add_argument("--probe", choices=("a", "b"), default="a")
    p.add_argument("--half-span", type=float, default=2e6)
    p.add_argument("--n", type=int, default=801)
    p.add_argument("--pump-detuning", type=float, default=0.0)

    p = sub.add_parser("ringdown", help="mode-A ringdown with a delayed pump")
    _common(p)
    p.add_argument("--drive", type=float, default=2e-6)
    p.add_argument("--pump-delay", type=float, default=None, help="omit for no pump")
    p.add_argument("--t-end", type=float, default=12e-6)
    p.add_argument("--n", type=int, default=1201)

    p = sub.add_parser("echo", help="Hahn-echo trace")
    _common(p)
    p.add_argument("--tau", type=float, default=10e-6)

    p = sub.add_parser("endor", help="ENDOR scan")
    _common(p)
    p.add_argument("--bz", type=float, default=None, help="field (T), default from config")
    p.add_argument("--f-range", type=_pair, default=(36.8e6, 38.3e6))
    p.add_argument("--step", type=float, default=1e3)

    p = sub.add_parser("fit", help="fit a trace CSV")
    p.add_argument("model", choices=("resonance", "exponential", "inversion-recovery", "lorentzian", "tuning"))
    p.add_argument("input", help="CSV input")
    p.add_argument("--n-peaks", type=int, default=1)
    p.add_argument("--element", choices=("a", "c"), default="a")
    _common(p)

    p = sub.add_parser("run", help="run a registered scenario")
    p.add_argument("scenario")
    _common(p, out=False)
    p.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_ENV} or ./output)")

    p = sub.add_parser("list", help="list scenarios")
    p.add_argument("--machine", action="store_true", help="ids only, one per line")
    return parser


def _split_extras(extras: list[str]) -> dict[str, str]:
    """Turn ``--pump-delay 2e-6`` style leftovers into scenario parameter overrides."""
    out = {}
    i = 0
    while i < len(extras):
        tok = extras[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        name = tok[2:]
        if "=" in name:
            name, value = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extras):
                raise UsageError(f"missing value for {tok}")
            value = extras[i + 1]
            i += 2
        out[name.replace("-", "_")] = value
    return out


def cmd_spectrum(args, cfg):
    spec = labeled_spectrum(cfg.spin_system(), args.bz)
    _emit(io.table_text(io.CATALOG_HEADER, io.catalog_rows(transitions(spec, args.kind))), args.out)


def cmd_clock_find(args, cfg):
    b, f = find_clock_transition(cfg.spin_system(), args.lower, args.upper, args.bracket)
    _emit(f"B_ct_T = {io.fmt(b)}\nf_ct_Hz = {io.fmt(f)}\n", args.out)


def cmd_tune(args, cfg):
    net = cfg.netlist().with_bias(0.0, 0.0)
    ia = np.linspace(*args.ia, args.n) if args.ia[0] != args.ia[1] else [args.ia[0]]
    ib = np.linspace(*args.ib, args.n) if args.ib[0] != args.ib[1] else [args.ib[0]]
    tab = tuning_curve(net, ia, ib)
    rows = zip(tab.I_A, tab.I_B, tab.fa, tab.fb, tab.dfa, tab.dfb)
    _emit(io.table_text(("I_A", "I_B", "fa_Hz", "fb_Hz", "dfa_Hz", "dfb_Hz"), ([float(x) for x in r] for r in rows)), args.out)


def cmd_quantize(args, cfg):
    c = quantize_circuit(cfg.netlist(), int(cfg.get("circuit", "order")))
    _emit(io.table_text(("name", "value"), ((n, float(getattr(c, n))) for n in io.COUPLING_FIELDS)), args.out)


def cmd_s11(args, cfg):
    modes = cfg.modes()
    center = modes.fa if args.probe == "a" else modes.fb
    f = center + np.linspace(-args.half_span, args.half_span, args.n)
    tr = reflection_s11(modes, f, args.probe, args.pump_detuning)
    _emit(io.trace_text(tr, "freq_Hz"), args.out)


def cmd_ringdown(args, cfg):
    modes = replace(cfg.modes(), g3wm=0.0)
    t = np.linspace(0.0, args.t_end, args.n)
    sched = ringdown_schedule(args.drive, args.pump_delay, cfg.get("modes", "g3wm"), args.t_end)
    _emit(io.trace_text(integrate_modes(modes, sched, t), "time_s"), args.out)


def cmd_echo(args, cfg):
    tr, _ = hahn_echo(cfg.ensemble(), hahn_schedule(args.tau))
    _emit(io.trace_text(tr, "time_s"), args.out)


def cmd_endor(args, cfg):
    e = cfg.values["endor"]
    bz = e["Bz"] if args.bz is None else args.bz
    f = np.arange(args.f_range[0], args.f_range[1] + args.step / 2, args.step)
    tr = endor_scan(cfg.spin_system(), bz, f, cfg.probes(), rf_area=e["rf_area"], deltaB0=cfg.get("spin", "deltaB0"))
    _emit(io.trace_text(tr, "f_rf_Hz"), args.out)


def cmd_fit(args, cfg):
    if args.model == "tuning":
        with open(args.input, newline="") as fh:
            rows = list(csv.DictReader(fh))
        try:
            ia = np.array([float(r["I_A"]) for r in rows])
            ib = np.array([float(r["I_B"]) for r in rows])
            key = "dfa_Hz" if args.element == "a" else "dfb_Hz"
            df = np.array([float(r[key]) for r in rows])
        except (KeyError, ValueError) as exc:
            raise InvalidArgumentError(f"{args.input}: tuning table needs I_A, I_B and {exc}") from None
        kw = {"dfa": df} if args.element == "a" else {"dfb": df}
        res = fit_tuning(ia, ib, cfg.netlist().with_bias(0.0, 0.0), element=args.element, **kw)
        _emit(res.to_text(), args.out)
        return
    trace = io.read_trace(args.input)
    if args.model == "resonance":
        res = fit_resonance(trace)
    elif args.model in ("exponential", "inversion-recovery"):
        y = trace.values.real
        res = fit_exponential(trace.axis, y, "simple" if args.model == "exponential" else "inversion-recovery")
    else:
        res = fit_lorentzian_peaks(trace.axis, trace.values.real, args.n_peaks).result
    _emit(res.to_text(), args.out)


def cmd_list(args):
    if args.machine:
        sys.stdout.write("".join(f"{sid}\n" for sid in SCENARIOS))
        return
    width = max(len(s) for s in SCENARIOS)
    for s in SCENARIOS.values():
        sys.stdout.write(f"{s.id:<{width}}  {s.figure:<8}  {s.description}\n")


def run_scenario(scenario_id: str, cfg, overrides: dict, output_dir: str | os.PathLike) -> list[Path]:
    """Run one scenario and write its CSVs plus ``metadata.json`` into ``output_dir``."""
    scenario = get_scenario(scenario_id)
    params = scenario.resolve(overrides)
    rng = np.random.default_rng(cfg.seed)
    files, summary = scenario.runner(cfg, params, rng)
    out = Path(output_dir)
    written = [io.atomic_write(out / name, text) for name, text in sorted(files.items())]
    meta = {
        "scenario": scenario.id,
        "figure": scenario.figure,
        "description": scenario.description,
        "params": params,
        "config": cfg.values,
        "seed": cfg.seed,
        "outputs": sorted(files),
        "summary": summary,
    }
    written.append(io.write_metadata(out / "metadata.json", meta))
    return written


def cmd_run(args, cfg, extras):
    overrides = _split_extras(extras)
    out = args.output_dir or os.path.join(os.environ.get(OUTPUT_ENV, "output"), args.scenario)
    for path in run_scenario(args.scenario, cfg, overrides, out):
        sys.stdout.write(f"{path}\n")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "clock-find": cmd_clock_find,
    "tune": cmd_tune,
    "quantize": cmd_quantize,
    "s11": cmd_s11,
    "ringdown": cmd_ringdown,
    "echo": cmd_echo,
    "endor": cmd_endor,
    "fit": cmd_fit,
}

NUMERIC_ERRORS = (FitError, CriticalCurrentError, ArithmeticError, np.linalg.LinAlgError)


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--opt -2e-3,2e-3`` as ``--opt=-2e-3,2e-3`` so argparse does not read a flag."""
    out: list[str] = []
    for tok in argv:
        prev = out[-1] if out else ""
        if NEGATIVE_VALUE.match(tok) and prev.startswith("--") and "=" not in prev:
            out[-1] = f"{prev}={tok}"
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _attach_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args, extras = parser.parse_known_args(argv)
        if extras and args.command != "run":
            raise UsageError(f"unrecognized arguments: {' '.join(extras)}")
        if args.command == "list":
            cmd_list(args)
            return EXIT_OK
        cfg = load_config(args.config, args.set)
        if args.command == "run":
            cmd_run(args, cfg, extras)
        else:
            COMMANDS[args.command](args, cfg)
    except (UsageError, InvalidConfigurationError, InvalidArgumentError, InvalidScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KiclockError, *NUMERIC_ERRORS) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
