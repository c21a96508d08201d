"""Registry of reproducible scenarios, one per figure panel.

A runner takes the configuration, its resolved parameters and a seeded
generator, and returns ``{filename: csv_text}`` plus a summary dict that
goes into the metadata sidecar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import io
from .circuit import pump_current, quantize_circuit, tuning_curve, with_pump
from .config import Config
from .errors import InvalidConfigurationError
from .fitting import fit_exponential, fit_lorentzian_peaks, fit_tuning
from .modes import integrate_modes, rate_change_time, reflection_s11, ringdown_schedule
from .pulses import (
    absorption_map,
    echo_decay,
    echo_silencing,
    echo_spectrum,
    endor_scan,
    hahn_echo,
    hahn_schedule,
    inversion_recovery,
)
from .spin import find_clock_transition, labeled_spectrum, linewidth_estimate, transitions

Runner = Callable[[Config, dict, np.random.Generator], tuple[dict[str, str], dict]]


@dataclass(frozen=True)
class Scenario:
    id: str
    figure: str
    description: str
    params: dict
    runner: Runner

    def resolve(self, overrides: dict | None = None) -> dict:
        out = dict(self.params)
        for k, v in (overrides or {}).items():
            if k not in out:
                raise InvalidConfigurationError(
                    f"scenario {self.id} has no parameter {k!r} (known: {', '.join(sorted(out))})"
                )
            try:
                out[k] = type(out[k])(float(v)) if not isinstance(out[k], str) else str(v)
            except ValueError:
                raise InvalidConfigurationError(f"{self.id}.{k}: {v!r} is not a number") from None
        return out


def _grid(lo, hi, n):
    return np.linspace(float(lo), float(hi), int(n))


def _tuning_rows(tab):
    return zip(tab.I_A, tab.I_B, tab.fa, tab.fb, tab.dfa, tab.dfb)


TUNING_HEADER = ("I_A", "I_B", "fa_Hz", "fb_Hz", "dfa_Hz", "dfb_Hz")


def _tuning(cfg: Config, p: dict, rng, element: str):
    net = cfg.netlist().with_bias(0.0, 0.0)
    sweep = _grid(-p["i_max"], p["i_max"], p["n"])
    if element == "a":
        ia, ib = sweep, np.zeros_like(sweep)
    else:
        ia, ib = np.zeros_like(sweep), sweep
    tab = tuning_curve(net, ia, [0.0]) if element == "a" else tuning_curve(net, [0.0], ib)
    rows = [tuple(float(x) for x in r) for r in _tuning_rows(tab)]
    # synthetic measurement: relative noise on the shifts, then a GL fit
    key = "dfa" if element == "a" else "dfb"
    clean = getattr(tab, key)
    noisy = clean + p["noise"] * np.max(np.abs(clean)) * rng.standard_normal(len(clean))
    ind = net.inductor_a if element == "a" else net.inductor_c
    guess = (ind.Istar * 1.1, 0.5)
    fit = fit_tuning(tab.I_A, tab.I_B, net, **{key: noisy}, element=element, guess=guess)
    files = {
        "tuning.csv": io.table_text(TUNING_HEADER, rows),
        "fit.txt": fit.to_text(),
    }
    summary = {"span_Hz": float(np.ptp(tab.fa if element == "a" else tab.fb)), "fit": fit.as_dict()}
    return files, summary


def run_fig2a(cfg, p, rng):
    return _tuning(cfg, p, rng, "a")


def run_fig2b(cfg, p, rng):
    return _tuning(cfg, p, rng, "c")


def _s11(cfg: Config, p: dict, probe: str):
    modes = cfg.modes()
    center = modes.fa if probe == "a" else modes.fb
    f = center + _grid(-p["half_span"], p["half_span"], p["n"])
    files = {}
    for tag, g in (("pump_off", 0.0), ("pump_on", modes.g3wm)):
        tr = reflection_s11(replace(modes, g3wm=g), f, probe=probe)
        files[f"s11_{tag}.csv"] = io.trace_text(tr, "freq_Hz")
    return files, {"probe": probe, "g3wm": modes.g3wm}


def run_fig2c(cfg, p, rng):
    return _s11(cfg, p, "b")


def run_fig2d(cfg, p, rng):
    return _s11(cfg, p, "a")


def run_fig2e(cfg, p, rng):
    net = cfg.netlist().with_bias(0.0, p["I_B"])
    couplings = quantize_circuit(net, int(cfg.get("circuit", "order")))
    modes = cfg.modes()
    pw = cfg.values["pump"]
    rows = []
    for dbm in _grid(p["dbm_min"], p["dbm_max"], p["n"]):
        P = 1e-3 * 10 ** (dbm / 10)
        irf = pump_current(P, pw["Z0"], pw["attenuation_db"])
        c = with_pump(couplings, net.I_c, irf, modes.kappa_b)
        rows.append((float(dbm), irf, c.g3wm, c.induced_loss, modes.kappa_a + c.induced_loss))
    text = io.table_text(("power_dBm", "Irf_A", "g3wm_per_s", "induced_loss_per_s", "kappa_a_total_per_s"), rows)
    return {"induced_loss.csv": text, "couplings.csv": io.table_text(
        ("name", "value"), ((n, float(getattr(couplings, n))) for n in io.COUPLING_FIELDS)
    )}, {"k": couplings.k, "Idc_A": net.I_c}


def run_fig2f(cfg, p, rng):
    modes = replace(cfg.modes(), g3wm=0.0)
    g = cfg.get("modes", "g3wm")
    t = _grid(0.0, p["t_end"], p["n"])
    delay = p["pump_delay"]
    sched = ringdown_schedule(p["drive"], None if delay < 0 else delay, g, p["t_end"])
    tr = integrate_modes(modes, sched, t)
    rate_after = modes.kappa_a + 4 * g**2 / modes.kappa_b
    after = t > p["drive"]
    kink = rate_change_time(t[after], tr.values[after], modes.kappa_a, rate_after) if delay >= 0 else float("nan")
    files = {"ringdown.csv": io.trace_text(tr, "time_s")}
    return files, {"pump_start_s": p["drive"] + delay, "kink_s": kink, "rate_after_per_s": rate_after}


def run_fig3a(cfg, p, rng):
    system = cfg.spin_system()
    fields = _grid(0.0, p["b_max"], p["n"])
    first = labeled_spectrum(system, fields[0])
    labels = list(first.labels)
    header = ["Bz_T"] + [f"E_{F}_{m}_Hz" for F, m in labels]
    rows = []
    for b in fields:
        spec = labeled_spectrum(system, b)
        rows.append([float(b)] + [float(spec.energy(lab)) for lab in labels])
    b_ct, f_ct = find_clock_transition(system, (4, 0), (5, -1), (p["ct_lo"], p["ct_hi"]))
    catalog = transitions(labeled_spectrum(system, b_ct), "all")
    files = {
        "levels.csv": io.table_text(header, rows),
        "catalog_ct.csv": io.table_text(io.CATALOG_HEADER, io.catalog_rows(catalog)),
    }
    return files, {"B_ct_T": b_ct, "f_ct_Hz": f_ct}


def run_fig3b(cfg, p, rng):
    system = cfg.spin_system()
    fields = _grid(0.0, p["b_max"], p["nb"])
    freqs = _grid(p["f_min"], p["f_max"], p["nf"])
    ab = cfg.values["absorption"]
    grid = absorption_map(system, fields, freqs, ab["g_ens"], ab["width"])
    rows = ((float(b), float(f), float(grid[i, j])) for i, b in enumerate(fields) for j, f in enumerate(freqs))
    return {"absorption.csv": io.table_text(("Bz_T", "freq_Hz", "delta_kappa_a_per_s"), rows)}, {
        "max_delta_kappa_per_s": float(grid.max())
    }


def run_fig3c(cfg, p, rng):
    system = cfg.spin_system()
    dB0 = cfg.get("spin", "deltaB0")
    rows = []
    for b in _grid(p["b_min"], p["b_max"], p["n"]):
        spec = labeled_spectrum(system, b)
        for t in transitions(spec, "esr"):
            if {t.lower, t.upper} == {(4, 0), (5, -1)}:
                rows.append((float(b), t.frequency, t.sensitivity, linewidth_estimate(t, dB0)))
    return {"linewidth.csv": io.table_text(("Bz_T", "freq_Hz", "dfdB_Hz_per_T", "linewidth_Hz"), rows)}, {
        "deltaB0_T": dB0
    }


def run_fig4a(cfg, p, rng):
    system = cfg.spin_system()
    width = cfg.get("ensemble", "fwhm")
    f = _grid(p["f_min"], p["f_max"], p["n"])
    tr = echo_spectrum(system, p["Bz"], f, width)
    y = tr.values.real / tr.values.real.max()
    noisy = y + cfg.get("run", "noise") * rng.standard_normal(len(y))
    fit = fit_lorentzian_peaks(f, noisy, 2)
    files = {
        "echo_spectrum.csv": io.table_text(("freq_Hz", "echo"), zip(f.tolist(), noisy.tolist())),
        "fit.txt": fit.result.to_text(),
    }
    return files, {"centers_Hz": [c for c, _, _ in fit.peaks], "widths_Hz": [w for _, w, _ in fit.peaks]}


def run_fig4b(cfg, p, rng):
    ens = cfg.ensemble()
    two_tau = _grid(p["t_min"], p["t_max"], p["n"])
    y = echo_decay(ens, two_tau)
    noisy = y + cfg.get("run", "noise") * rng.standard_normal(len(y))
    fit = fit_exponential(two_tau, noisy, "simple")
    tr, _ = hahn_echo(ens, hahn_schedule(p["tau_trace"]))
    files = {
        "echo_decay.csv": io.table_text(("two_tau_s", "echo"), zip(two_tau.tolist(), noisy.tolist())),
        "echo_trace.csv": io.trace_text(tr, "time_s"),
        "fit.txt": fit.to_text(),
    }
    return files, {"T2_fit_s": fit["T"]}


def run_fig4c(cfg, p, rng):
    ens = cfg.ensemble()
    t = _grid(p["t_min"], p["t_max"], p["n"])
    y = inversion_recovery(ens, t)
    noisy = y + cfg.get("run", "noise") * rng.standard_normal(len(y))
    fit = fit_exponential(t, noisy, "inversion-recovery")
    files = {
        "inversion_recovery.csv": io.table_text(("t_wait_s", "echo"), zip(t.tolist(), noisy.tolist())),
        "fit.txt": fit.to_text(),
    }
    return files, {"T1_fit_s": fit["T"], "zero_crossing_s": fit["T"] * math.log(2)}


def run_fig4d(cfg, p, rng):
    ens = cfg.ensemble()
    modes = cfg.modes()
    df = _grid(0.0, p["df_max"], p["n"])
    y = echo_silencing(ens, df, modes.kappa_a)
    return {"echo_silencing.csv": io.table_text(("shift_Hz", "normalized_echo"), zip(df.tolist(), y.tolist()))}, {
        "kappa_a_per_s": modes.kappa_a
    }


def run_fig4e(cfg, p, rng):
    system = cfg.spin_system()
    e = cfg.values["endor"]
    f = np.arange(p["f_min"], p["f_max"] + p["step"] / 2, p["step"])
    tr = endor_scan(system, e["Bz"], f, cfg.probes(), rf_area=e["rf_area"], deltaB0=cfg.get("spin", "deltaB0"))
    nmr = transitions(labeled_spectrum(system, e["Bz"]), "nmr")
    lines = [t for t in nmr if p["f_min"] <= t.frequency <= p["f_max"]]
    files = {
        "endor.csv": io.table_text(("f_rf_Hz", "normalized_echo"), zip(f.tolist(), tr.values.real.tolist())),
        "nmr_catalog.csv": io.table_text(io.CATALOG_HEADER, io.catalog_rows(lines)),
    }
    return files, {"Bz_T": e["Bz"], "n_lines": len(lines)}


SCENARIOS: dict[str, Scenario] = {
    s.id: s
    for s in [
        Scenario("fig2a", "Fig. 2a", "mode-A tuning vs microwire current with GL fit",
                 {"i_max": 2e-3, "n": 41, "noise": 1e-3}, run_fig2a),
        Scenario("fig2b", "Fig. 2b", "tuning vs coupler current with GL fit",
                 {"i_max": 2e-3, "n": 41, "noise": 1e-3}, run_fig2b),
        Scenario("fig2c", "Fig. 2c", "S11 off port B, pump off and on",
                 {"half_span": 20e6, "n": 801}, run_fig2c),
        Scenario("fig2d", "Fig. 2d", "S11 off port A, pump off and on",
                 {"half_span": 2e6, "n": 801}, run_fig2d),
        Scenario("fig2e", "Fig. 2e", "3WM coupling and induced loss vs pump power",
                 {"I_B": 2e-3, "dbm_min": -90.0, "dbm_max": -50.0, "n": 41}, run_fig2e),
        Scenario("fig2f", "Fig. 2f", "mode-A ringdown with delayed pump (negative delay = no pump)",
                 {"drive": 2e-6, "pump_delay": 1e-6, "t_end": 12e-6, "n": 1201}, run_fig2f),
        Scenario("fig3a", "Fig. 3a", "labeled level energies vs field and catalog at the clock transition",
                 {"b_max": 65e-3, "n": 131, "ct_lo": 20e-3, "ct_hi": 30e-3}, run_fig3a),
        Scenario("fig3b", "Fig. 3b", "spin-induced mode-A loss over field and frequency",
                 {"b_max": 65e-3, "nb": 131, "f_min": 7.342e9, "f_max": 7.422e9, "nf": 161}, run_fig3b),
        Scenario("fig3c", "Fig. 3c", "homogeneous linewidth of the clock branch vs field",
                 {"b_min": 1e-3, "b_max": 60e-3, "n": 60}, run_fig3c),
        Scenario("fig4a", "Fig. 4a", "echo-detected spectrum near the clock transition with two-peak fit",
                 {"Bz": 25.6e-3, "f_min": 7.3370e9, "f_max": 7.3392e9, "n": 441}, run_fig4a),
        Scenario("fig4b", "Fig. 4b", "Hahn-echo decay and T2 fit",
                 {"t_min": 1e-3, "t_max": 1.5, "n": 40, "tau_trace": 10e-6}, run_fig4b),
        Scenario("fig4c", "Fig. 4c", "inversion recovery and T1 fit",
                 {"t_min": 0.1, "t_max": 250.0, "n": 40}, run_fig4c),
        Scenario("fig4d", "Fig. 4d", "echo silencing vs resonator shift",
                 {"df_max": 2e6, "n": 81}, run_fig4d),
        Scenario("fig4e", "Fig. 4e", "ENDOR scan of the NMR-like transitions",
                 {"f_min": 36.8e6, "f_max": 38.3e6, "step": 1e3}, run_fig4e),
    ]
}


def get_scenario(scenario_id: str) -> Scenario:
    try:
        return SCENARIOS[scenario_id]
    except KeyError:
        raise InvalidConfigurationError(
            f"unknown scenario {scenario_id!r}; known: {', '.join(SCENARIOS)}"
        ) from None
