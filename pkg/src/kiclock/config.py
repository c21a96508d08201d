"""Sectioned key-value configuration with physical defaults."""

from __future__ import annotations

import configparser
import copy
import math
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .circuit import CircuitNetlist, KineticInductor, dressed_inductances
from .errors import InvalidConfigurationError
from .modes import ModePair
from .pulses import DEFAULT_NODES, EnsembleModel, Probe
from .spin import SpinSystem

FWHM_TO_SIGMA = 1 / (2 * math.sqrt(2 * math.log(2)))

DEFAULTS: dict[str, dict[str, float]] = {
    "spin": {
        "S": 0.5,
        "I": 4.5,
        "gamma_e": -28e9,
        "gamma_n": 8e6,
        "A": 1.47507e9,
        "deltaB0": 4e-6,
    },
    "circuit": {
        "Lk0_a": 0.94e-9,
        "Istar_a": 9.53e-3,
        "Lg_a": 1.06e-9,
        "alpha_a": 0.3,
        "Lk0_c": 22e-12,
        "Istar_c": 5.73e-3,
        "Lg_c": 3e-12,
        "alpha_c": 0.3,
        "Lb": 1.5e-9,
        # capacitances are solved so the zero-bias modes sit at these frequencies
        "fa": 7.422e9,
        "fb": 6.605e9,
        "I_A": 0.0,
        "I_B": 0.0,
        "order": 3,
    },
    "modes": {
        "fa": 7.422e9,
        "fb": 6.605e9,
        "kappa_ca": 9.4e4,
        "kappa_ia": 7.5e5,
        "kappa_cb": 2.6e7,
        "kappa_ib": 5.7e6,
        "g3wm": 1.5e6,
    },
    "pump": {
        "power": 1e-9,
        "Z0": 50.0,
        "attenuation_db": 0.0,
    },
    "ensemble": {
        "n_spins": DEFAULT_NODES,
        "fwhm": 90e3,
        "T1": 53.0,
        "T2": 0.45,
    },
    "endor": {
        "Bz": 13.49e-3,
        "weight_primary": 0.8,
        "weight_secondary": 0.2,
        "rf_area": math.pi,
    },
    "absorption": {
        "g_ens": 1e5,
        "width": 300e3,
    },
    "run": {
        "seed": 1234,
        "noise": 0.01,
    },
}


@dataclass
class Config:
    """Section -> key -> float mapping with typed builders."""

    values: dict[str, dict[str, float]] = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str | None = None

    def get(self, section: str, key: str) -> float:
        return self.values[section][key]

    def set(self, dotted: str, value) -> None:
        section, key = _split(dotted)
        self.values[section][key] = _parse_value(value, dotted)

    def spin_system(self) -> SpinSystem:
        s = self.values["spin"]
        return SpinSystem(S=s["S"], I=s["I"], gamma_e=s["gamma_e"], gamma_n=s["gamma_n"], A=s["A"])

    def netlist(self) -> CircuitNetlist:
        c = self.values["circuit"]
        ind_a = KineticInductor(c["Lk0_a"], c["Istar_a"], c["Lg_a"], c["alpha_a"])
        ind_c = KineticInductor(c["Lk0_c"], c["Istar_c"], c["Lg_c"], c["alpha_c"])
        lta, ltb = dressed_inductances(ind_a.L0, c["Lb"], ind_c.L0)
        Ca = 1.0 / (lta * (2 * np.pi * c["fa"]) ** 2)
        Cb = 1.0 / (ltb * (2 * np.pi * c["fb"]) ** 2)
        return CircuitNetlist(ind_a, ind_c, c["Lb"], Ca, Cb, (c["I_A"], c["I_B"]))

    def modes(self) -> ModePair:
        m = self.values["modes"]
        return ModePair(
            fa=m["fa"], fb=m["fb"],
            kappa_ca=m["kappa_ca"], kappa_ia=m["kappa_ia"],
            kappa_cb=m["kappa_cb"], kappa_ib=m["kappa_ib"],
            g3wm=m["g3wm"],
        )

    def ensemble(self) -> EnsembleModel:
        e = self.values["ensemble"]
        return EnsembleModel(
            n_spins=int(e["n_spins"]),
            detuning_sigma=e["fwhm"] * FWHM_TO_SIGMA,
            T1=e["T1"],
            T2=e["T2"],
        )

    def probes(self) -> tuple[Probe, Probe]:
        e = self.values["endor"]
        return (
            Probe((4, 0), (5, 1), e["weight_primary"]),
            Probe((4, 1), (5, 0), e["weight_secondary"]),
        )

    @property
    def seed(self) -> int:
        return int(self.values["run"]["seed"])

    def to_ini(self) -> str:
        lines = []
        for section, kv in self.values.items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v!r}" for k, v in kv.items())
            lines.append("")
        return "\n".join(lines)


def _split(dotted: str) -> tuple[str, str]:
    section, _, key = dotted.partition(".")
    if not key:
        raise InvalidConfigurationError(f"override {dotted!r} must look like section.key")
    if section not in DEFAULTS:
        raise InvalidConfigurationError(f"unknown config section {section!r}")
    if key not in DEFAULTS[section]:
        raise InvalidConfigurationError(f"unknown key {key!r} in section [{section}]")
    return section, key


def _parse_value(value, where: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidConfigurationError(f"{where}: {value!r} is not a number") from None
    if not math.isfinite(v):
        raise InvalidConfigurationError(f"{where}: value must be finite")
    return v


def load_config(path: str | os.PathLike | None = None, overrides: Iterable[str] = ()) -> Config:
    """Defaults, then the INI file at ``path``, then ``section.key=value`` overrides.

    Raises:
        InvalidConfigurationError: for a missing or unreadable file, an
            unknown section or key, or a non-numeric value.
    """
    cfg = Config()
    if path is not None:
        path = os.fspath(path)
        if not os.path.isfile(path):
            raise InvalidConfigurationError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise InvalidConfigurationError(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                cfg.set(f"{section}.{key}", raw)
        cfg.source = path
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidConfigurationError(f"override {item!r} must look like section.key=value")
        cfg.set(key.strip(), value.strip())
    return cfg
