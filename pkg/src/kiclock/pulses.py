"""Semi-classical spin-ensemble pulse experiments.

The ensemble is a set of spin packets with Gaussian-distributed detunings
sampled at Gauss-Hermite nodes. Packets dephase freely, a refocusing pulse
conjugates their phase, and T1/T2 enter phenomenologically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import roots_hermite

from .errors import InvalidArgumentError, InvalidConfigurationError, InvalidScheduleError
from .modes import PulseEvent, PulseSchedule, Trace
from .spin import LabeledSpectrum, SpinSystem, labeled_spectrum, linewidth_estimate, transitions

DEFAULT_NODES = 201
OVERHAUSER_FIELD = 4e-6


@dataclass(frozen=True)
class EnsembleModel:
    """Phenomenological spin ensemble.

    Attributes:
        n_spins: Number of quadrature nodes (spin packets).
        detuning_sigma: Standard deviation of the inhomogeneous detuning (Hz).
        T1: Energy relaxation time (s).
        T2: Coherence time (s).
        populations: Optional level populations (sum to 1).
    """

    n_spins: int = DEFAULT_NODES
    detuning_sigma: float = 90e3 / (2 * math.sqrt(2 * math.log(2)))
    T1: float = 53.0
    T2: float = 0.45
    populations: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_spins < 1:
            raise InvalidArgumentError("n_spins must be positive")
        if not (self.T1 > 0 and self.T2 > 0):
            raise InvalidArgumentError("T1 and T2 must be positive")
        if self.detuning_sigma < 0:
            raise InvalidArgumentError("detuning_sigma must be non-negative")
        if self.populations is not None:
            p = np.asarray(self.populations, dtype=float)
            if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1) > 1e-9:
                raise InvalidArgumentError("populations must lie in [0, 1] and sum to 1")

    def packets(self) -> tuple[NDArray, NDArray]:
        """Detunings (Hz) and normalized weights of the spin packets."""
        x, w = roots_hermite(self.n_spins)
        return math.sqrt(2) * self.detuning_sigma * x, w / math.sqrt(math.pi)


def hahn_schedule(tau: float, pi2_duration: float = 0.0, pi_duration: float = 0.0, phase: float = 0.0) -> PulseSchedule:
    """pi/2 - tau - pi sequence with pulse centers ``tau`` apart, first pulse at t=0."""
    first = PulseEvent(0.0, pi2_duration, "microwave-drive", math.pi / 2, phase=phase)
    second_start = pi2_duration / 2 + tau - pi_duration / 2
    second = PulseEvent(second_start, pi_duration, "microwave-drive", math.pi, phase=phase)
    return PulseSchedule.from_events([first, second])


def _control_pulses(schedule: PulseSchedule) -> tuple[PulseEvent, PulseEvent]:
    mw = schedule.of_kind("microwave-drive")
    if len(mw) != 2:
        raise InvalidScheduleError(
            f"Hahn echo needs exactly two microwave control pulses, got {len(mw)}"
        )
    return mw[0], mw[1]


def hahn_echo(
    ensemble: EnsembleModel,
    schedule: PulseSchedule,
    t_grid: ArrayLike | None = None,
) -> tuple[Trace, float]:
    """Echo signal after a pi/2 - tau - pi sequence.

    Each packet accumulates phase ``2 pi delta t``; the pi pulse conjugates
    it so all packets rephase at ``2 tau`` after the first pulse center.
    Coherence decays as ``exp(-t/T2)`` measured from the first pulse.

    Returns:
        The complex echo trace on ``t_grid`` (absolute schedule time) and the
        echo magnitude at the refocusing time.
    """
    p1, p2 = _control_pulses(schedule)
    tau = p2.center - p1.center
    if tau <= 0:
        raise InvalidScheduleError("refocusing pulse must follow the excitation pulse")
    t_echo = p2.center + tau
    delta, w = ensemble.packets()
    if t_grid is None:
        half = 4.0 / (2 * np.pi * max(ensemble.detuning_sigma, 1e-30))
        half = min(half, t_echo - p2.t_end)
        t_grid = np.linspace(t_echo - half, t_echo + half, 201)
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < p2.t_end):
        raise InvalidArgumentError("echo trace must be sampled after the refocusing pulse")
    carrier = np.exp(1j * (2 * p2.phase - p1.phase))
    signal = carrier * (np.exp(2j * np.pi * np.outer(t - t_echo, delta)) @ w)
    signal *= np.exp(-(t - p1.center) / ensemble.T2)
    amplitude = float(abs(carrier * w.sum()) * math.exp(-2 * tau / ensemble.T2))
    trace = Trace(t, signal, {"observable": "echo", "tau": tau, "t_echo": t_echo})
    return trace, amplitude


def echo_decay(ensemble: EnsembleModel, two_tau: ArrayLike) -> NDArray:
    """Echo magnitudes for a sweep of total echo delays ``2 tau``."""
    return np.array([hahn_echo(ensemble, hahn_schedule(x / 2), [x])[1] for x in np.atleast_1d(two_tau)])


def inversion_recovery(ensemble: EnsembleModel, t_wait: ArrayLike, tau: float = 1e-3) -> NDArray:
    """Signed echo amplitude after pi - t_wait - (pi/2 - tau - pi).

    The longitudinal magnetization recovers as ``1 - 2 exp(-t_wait/T1)``,
    crossing zero at ``T1 ln 2``.
    """
    t_wait = np.atleast_1d(np.asarray(t_wait, dtype=float))
    _, echo = hahn_echo(ensemble, hahn_schedule(tau), [2 * tau])
    return echo * (1 - 2 * np.exp(-t_wait / ensemble.T1))


def echo_silencing(ensemble: EnsembleModel, delta_f: ArrayLike, kappa_total: float) -> NDArray:
    """Echo amplitude with mode A shifted by ``delta_f`` (Hz) during emission.

    Normalized to the unshifted echo; the transfer is the resonator's
    Lorentzian amplitude response ``(k/2)/sqrt((k/2)**2 + (2 pi df)**2)``.
    """
    if not kappa_total > 0:
        raise InvalidArgumentError("kappa_total must be positive")
    _, ref = hahn_echo(ensemble, hahn_schedule(1e-3), [2e-3])
    df = np.asarray(delta_f, dtype=float)
    half = kappa_total / 2
    emitted = ref * half / np.sqrt(half**2 + (2 * np.pi * df) ** 2)
    return emitted / ref


# ---------------------------------------------------------------------------
# ENDOR


@dataclass(frozen=True)
class Probe:
    """An ESR-like transition addressed by the resonator, with its echo weight."""

    lower: tuple
    upper: tuple
    weight: float


DEFAULT_PROBES = (Probe((4, 0), (5, 1), 0.8), Probe((4, 1), (5, 0), 0.2))


def _check_probes(spectrum: LabeledSpectrum, probes: Sequence[Probe], resonator_frequency, window):
    esr = {(t.lower, t.upper): t for t in transitions(spectrum, "esr")}
    esr.update({(t.upper, t.lower): t for t in esr.values()})
    found = []
    for p in probes:
        t = esr.get((tuple(p.lower), tuple(p.upper)))
        if t is None:
            raise InvalidConfigurationError(
                f"probed transition {p.lower}<->{p.upper} is not an ESR-like transition at "
                f"Bz = {spectrum.Bz} T"
            )
        found.append(t)
    if resonator_frequency is not None:
        main = max(zip(probes, found), key=lambda pt: pt[0].weight)[1]
        if abs(main.frequency - resonator_frequency) > window:
            raise InvalidConfigurationError(
                f"probed transition at {main.frequency:.6g} Hz is more than {window:.3g} Hz "
                f"from the resonator at {resonator_frequency:.6g} Hz"
            )
    return found


def saturation(f_nmr: ArrayLike, center: float, width: float, rf_area: float) -> NDArray:
    """Fraction of full population equalization produced by an rf pulse.

    A pulse of area ``pi`` on resonance equalizes completely; off resonance
    the effect follows a Lorentzian of FWHM ``width``.
    """
    f = np.asarray(f_nmr, dtype=float)
    profile = 1.0 / (1.0 + ((f - center) / (width / 2)) ** 2)
    return np.minimum(1.0, rf_area / math.pi * profile)


def apply_rf(populations: dict, level_a: tuple, level_b: tuple, s) -> None:
    """Move populations of two levels toward their mean by fraction ``s`` (in place)."""
    pa = populations.get(level_a)
    pb = populations.get(level_b)
    if pa is None and pb is None:
        return
    pa = 0.0 if pa is None else pa
    pb = 0.0 if pb is None else pb
    shift = s * (pa - pb) / 2
    populations[level_a] = pa - shift
    populations[level_b] = pb + shift


def endor_scan(
    system: SpinSystem,
    Bz: float,
    f_nmr: ArrayLike,
    probes: Sequence[Probe] = DEFAULT_PROBES,
    rf_area: float = math.pi,
    deltaB0: float = OVERHAUSER_FIELD,
    resonator_frequency: float | None = None,
    window: float = 5e6,
    min_width: float = 1.0,
) -> Trace:
    """Normalized echo magnitude versus the frequency of an intermediate rf pulse.

    Each probed transition starts with its excited spin packets split
    evenly between its two levels. An rf pulse near an NMR-like transition
    partially equalizes that transition's two level populations (saturation
    scaled by pulse area, Lorentzian in detuning with width
    ``|df/dB| * deltaB0``). The surviving echo of a probe is
    ``2 sqrt(p_lower p_upper)``, weighted across probes.

    Raises:
        InvalidConfigurationError: if a probe is not an ESR-like transition
            at ``Bz`` or sits farther than ``window`` from the resonator.
    """
    spectrum = labeled_spectrum(system, Bz)
    _check_probes(spectrum, probes, resonator_frequency, window)
    nmr = transitions(spectrum, "nmr")
    f = np.asarray(f_nmr, dtype=float)
    total_w = sum(p.weight for p in probes)
    echo = np.zeros(len(f))
    for p in probes:
        pops = {tuple(p.lower): np.full(len(f), 0.5), tuple(p.upper): np.full(len(f), 0.5)}
        for t in nmr:
            if t.lower not in pops and t.upper not in pops:
                continue
            width = max(linewidth_estimate(t, deltaB0), min_width)
            apply_rf(pops, t.lower, t.upper, saturation(f, t.frequency, width, rf_area))
        echo += p.weight * 2 * np.sqrt(pops[tuple(p.lower)] * pops[tuple(p.upper)])
    meta = {
        "observable": "normalized_echo",
        "Bz_T": Bz,
        "probes": [(list(p.lower), list(p.upper), p.weight) for p in probes],
        "rf_area": rf_area,
        "deltaB0_T": deltaB0,
    }
    return Trace(f, echo / total_w, meta)


def endor_populations(
    system: SpinSystem,
    Bz: float,
    f_nmr: float,
    probe: Probe,
    rf_area: float = math.pi,
    deltaB0: float = OVERHAUSER_FIELD,
    min_width: float = 1.0,
) -> list[dict]:
    """Packet populations of one probe after each rf event (for bookkeeping checks)."""
    spectrum = labeled_spectrum(system, Bz)
    _check_probes(spectrum, [probe], None, 0.0)
    pops = {tuple(probe.lower): 0.5, tuple(probe.upper): 0.5}
    history = [dict(pops)]
    for t in transitions(spectrum, "nmr"):
        if t.lower not in pops and t.upper not in pops:
            continue
        width = max(linewidth_estimate(t, deltaB0), min_width)
        s = float(saturation(f_nmr, t.frequency, width, rf_area))
        apply_rf(pops, t.lower, t.upper, s)
        history.append(dict(pops))
    return history


def echo_spectrum(
    system: SpinSystem,
    Bz: float,
    frequencies: ArrayLike,
    width: float = 90e3,
) -> Trace:
    """Echo magnitude versus resonator frequency: Lorentzian lines of FWHM ``width``
    at every ESR-like transition, weighted by the squared transition dipole."""
    f = np.asarray(frequencies, dtype=float)
    out = np.zeros(len(f))
    for t in transitions(labeled_spectrum(system, Bz), "esr"):
        out += t.dipole**2 / (1 + ((f - t.frequency) / (width / 2)) ** 2)
    return Trace(f, out, {"observable": "echo_spectrum", "Bz_T": Bz, "width_Hz": width})


def absorption_map(
    system: SpinSystem,
    fields: ArrayLike,
    frequencies: ArrayLike,
    g_ens: float = 1e5,
    width: float = 300e3,
) -> NDArray:
    """Extra mode-A loss rate from resonant spin absorption on an (Bz, f) grid.

    Every ESR-like transition contributes a Lorentzian of FWHM ``width`` (Hz)
    with peak loss ``4 g_t**2 / gamma``, where ``gamma = 2 pi width / 2`` is
    the half width in s^-1 and ``g_t = g_ens * dipole / 0.5`` scales the
    ensemble coupling by the transition dipole (0.5 for a bare electron flip).
    Level populations are taken as equal.

    Returns:
        Array of shape ``(len(fields), len(frequencies))`` in s^-1.
    """
    if not width > 0:
        raise InvalidArgumentError("absorption width must be positive")
    b = np.atleast_1d(np.asarray(fields, dtype=float))
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    gamma = np.pi * width
    out = np.zeros((len(b), len(f)))
    for i, bz in enumerate(b):
        for t in transitions(labeled_spectrum(system, bz), "esr"):
            g_t = g_ens * t.dipole / 0.5
            out[i] += 4 * g_t**2 / gamma / (1 + (2 * np.pi * (f - t.frequency) / gamma) ** 2)
    return out
