"""Two-mode Langevin dynamics, stationary response and reflection spectra.

In the frame rotating with the drive, the resonator amplitudes obey

    da/dt = -(kappa_a/2 + i delta_a) a - i g b + sqrt(kappa_ca) alpha(t)
    db/dt = -(kappa_b/2 + i delta_b) b - i g* a

where ``g`` is the three-wave-mixing conversion rate switched on by pump
windows. Rates are energy decay rates in s^-1; detunings are angular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    InvalidArgumentError,
    InvalidScheduleError,
    StiffnessError,
    UnsupportedConfigurationError,
)

EventKind = Literal["microwave-drive", "rf-drive", "pump-window", "detuning-ramp"]
EVENT_KINDS = ("microwave-drive", "rf-drive", "pump-window", "detuning-ramp")

#: Fixed RK4 step as a fraction of the fastest rate.
STEPS_PER_RATE = 40
MAX_STEPS = 20_000_000


@dataclass(frozen=True)
class ModePair:
    """High-Q mode A coupled to the low-Q buffer mode B."""

    fa: float
    fb: float
    kappa_ca: float
    kappa_ia: float
    kappa_cb: float
    kappa_ib: float
    g3wm: float = 0.0
    delta_a: float = 0.0
    delta_b: float = 0.0

    def __post_init__(self):
        for name in ("kappa_ca", "kappa_ia", "kappa_cb", "kappa_ib"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be non-negative")

    @property
    def kappa_a(self) -> float:
        return self.kappa_ca + self.kappa_ia

    @property
    def kappa_b(self) -> float:
        return self.kappa_cb + self.kappa_ib


def device_modes(**overrides) -> ModePair:
    """Zero-bias characterization of both modes."""
    base = ModePair(
        fa=7.422e9, fb=6.605e9,
        kappa_ca=9.4e4, kappa_ia=7.5e5,
        kappa_cb=2.6e7, kappa_ib=5.7e6,
    )
    return replace(base, **overrides)


@dataclass(frozen=True)
class Trace:
    """Sampled complex amplitude along a strictly increasing axis."""

    axis: NDArray
    values: NDArray
    metadata: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if axis.ndim != 1 or axis.shape != values.shape:
            raise InvalidArgumentError("axis and values must be 1-D arrays of equal length")
        if len(axis) > 1 and np.any(np.diff(axis) <= 0):
            raise InvalidArgumentError("trace axis must be strictly increasing")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "values", values)

    @property
    def magnitude(self) -> NDArray:
        return np.abs(self.values)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class PulseEvent:
    """One timed control event.

    ``amplitude`` means: drive amplitude ``alpha_in`` for microwave drives,
    conversion rate ``g`` (s^-1) for pump windows, frequency shift of mode A
    (Hz) for detuning ramps, and Rabi angle (rad) for rf drives.
    ``frequency`` of a microwave drive is its offset (Hz) from the frame.
    """

    t_start: float
    duration: float
    kind: EventKind
    amplitude: float = 1.0
    frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InvalidScheduleError(f"unknown event kind {self.kind!r}")
        if self.duration < 0:
            raise InvalidScheduleError("event duration must be non-negative")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def center(self) -> float:
        return self.t_start + self.duration / 2


@dataclass(frozen=True)
class PulseSchedule:
    events: tuple[PulseEvent, ...] = ()

    def __post_init__(self):
        starts = [e.t_start for e in self.events]
        if starts != sorted(starts):
            raise InvalidScheduleError("schedule must be sorted by t_start")

    @classmethod
    def from_events(cls, events: Sequence[PulseEvent]) -> "PulseSchedule":
        return cls(tuple(sorted(events, key=lambda e: e.t_start)))

    def of_kind(self, kind: str) -> list[PulseEvent]:
        return [e for e in self.events if e.kind == kind]

    def breakpoints(self) -> list[float]:
        pts = set()
        for e in self.events:
            pts.add(e.t_start)
            pts.add(e.t_end)
        return sorted(pts)


# ---------------------------------------------------------------------------
# stationary response


def steady_state(modes: ModePair, alpha_in: complex) -> complex:
    """Stationary mode-A amplitude under a constant drive, resonant pump.

    Raises:
        UnsupportedConfigurationError: when ``delta_b != 0``; use
            :func:`stationary_amplitudes` for the general case.
    """
    if modes.delta_b != 0:
        raise UnsupportedConfigurationError("closed-form steady state requires delta_b = 0")
    kb = modes.kappa_b
    if kb <= 0 and modes.g3wm != 0:
        raise InvalidArgumentError("kappa_b must be positive when the pump is on")
    extra = 4 * modes.g3wm**2 / kb if modes.g3wm else 0.0
    denom = modes.kappa_a + extra + 2j * modes.delta_a
    return 2 * math.sqrt(modes.kappa_ca) * alpha_in / denom


def _drift_matrix(modes: ModePair, g: complex, delta_a: float, delta_b: float) -> NDArray:
    return np.array([
        [-(modes.kappa_a / 2 + 1j * delta_a), -1j * g],
        [-1j * np.conj(g), -(modes.kappa_b / 2 + 1j * delta_b)],
    ])


def stationary_amplitudes(
    modes: ModePair, alpha_in: complex, port: Literal["a", "b"] = "a"
) -> tuple[complex, complex]:
    """Fixed point ``(a, b)`` of the Langevin equations with drive on ``port``.

    This is the long-time limit of :func:`integrate_modes` for any detunings.
    """
    m = _drift_matrix(modes, modes.g3wm, modes.delta_a, modes.delta_b)
    u = np.zeros(2, dtype=complex)
    if port == "a":
        u[0] = math.sqrt(modes.kappa_ca) * alpha_in
    elif port == "b":
        u[1] = math.sqrt(modes.kappa_cb) * alpha_in
    else:
        raise InvalidArgumentError(f"port must be 'a' or 'b', got {port!r}")
    a, b = np.linalg.solve(m, -u)
    return complex(a), complex(b)


def reflection_s11(
    modes: ModePair,
    frequencies: ArrayLike,
    probe: Literal["a", "b"] = "a",
    pump_detuning: float = 0.0,
) -> Trace:
    """Linear-response reflection off the coupling port.

    Args:
        modes: Mode parameters; ``modes.g3wm`` is the pump-on conversion rate.
        frequencies: Probe frequencies (Hz), strictly increasing.
        probe: Mode whose resonance is probed.
        pump_detuning: ``f_pump - (fa - fb)`` in Hz.

    With ``pump_detuning = 0`` and ``probe = 'a'`` this reduces to
    ``1 - 2 kappa_ca / (kappa_a + 4 g**2/kappa_b + 2 i delta)`` with
    ``delta = 2 pi (fa - f)``.
    """
    f = np.asarray(frequencies, dtype=float)
    out = np.empty(len(f), dtype=complex)
    dp = 2 * np.pi * pump_detuning
    for i, fi in enumerate(f):
        if probe == "a":
            da = 2 * np.pi * (modes.fa - fi)
            m = replace(modes, delta_a=da, delta_b=da + dp)
            a, _ = stationary_amplitudes(m, 1.0, "a")
            out[i] = 1 - math.sqrt(modes.kappa_ca) * a
        elif probe == "b":
            db = 2 * np.pi * (modes.fb - fi)
            m = replace(modes, delta_a=db - dp, delta_b=db)
            _, b = stationary_amplitudes(m, 1.0, "b")
            out[i] = 1 - math.sqrt(modes.kappa_cb) * b
        else:
            raise InvalidArgumentError(f"probe must be 'a' or 'b', got {probe!r}")
    return Trace(f, out, {"observable": "S11", "probe": probe, "pump_detuning_Hz": pump_detuning})


# ---------------------------------------------------------------------------
# time domain


def _segment_coefficients(modes: ModePair, schedule: PulseSchedule, t: float):
    """Pump coupling, mode-A detuning and drive terms active at time ``t``."""
    g = 0j
    da = modes.delta_a
    drives = []
    for e in schedule.events:
        if not (e.t_start <= t < e.t_end):
            continue
        if e.kind == "pump-window":
            g += e.amplitude * np.exp(1j * e.phase)
        elif e.kind == "detuning-ramp":
            da += 2 * np.pi * e.amplitude
        elif e.kind == "microwave-drive":
            drives.append(e)
    return g, da, drives


def integrate_modes(
    modes: ModePair,
    schedule: PulseSchedule,
    t_grid: ArrayLike,
    dt: float | None = None,
    a0: complex = 0j,
    b0: complex = 0j,
) -> Trace:
    """Fixed-step RK4 integration of the two coupled amplitudes.

    The pump coupling is ``modes.g3wm`` plus any active pump windows. The
    step defaults to ``1/(40 * fastest rate)`` and is shrunk so that every
    interval of ``t_grid`` holds a whole number of steps.

    Returns:
        Trace of mode A on ``t_grid``; mode B is in ``trace.aux['b']``.

    Raises:
        InvalidArgumentError: if ``dt`` exceeds ``1/(20 * fastest rate)``.
        StiffnessError: if the required step count exceeds ``MAX_STEPS``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise InvalidArgumentError("t_grid must be strictly increasing with >= 2 points")
    g_max = abs(modes.g3wm) + sum(abs(e.amplitude) for e in schedule.of_kind("pump-window"))
    ramp = sum(abs(2 * np.pi * e.amplitude) for e in schedule.of_kind("detuning-ramp"))
    rate = max(modes.kappa_a, modes.kappa_b, 2 * g_max, abs(modes.delta_a) + ramp, abs(modes.delta_b))
    drive_off = [abs(2 * np.pi * e.frequency) for e in schedule.of_kind("microwave-drive")]
    rate = max([rate, *drive_off])
    if rate <= 0:
        rate = 1.0 / (t_grid[-1] - t_grid[0])
    if dt is None:
        dt = 1.0 / (STEPS_PER_RATE * rate)
    elif dt > 1.0 / (20 * rate):
        raise InvalidArgumentError(f"dt = {dt:.3g} s exceeds 1/(20 x {rate:.3g} s^-1)")
    n_sub = np.maximum(1, np.ceil(np.diff(t_grid) / dt - 1e-9).astype(int))
    if n_sub.sum() > MAX_STEPS:
        raise StiffnessError(
            f"{int(n_sub.sum())} RK4 steps needed (limit {MAX_STEPS}); step underflow"
        )

    sq_ca = math.sqrt(modes.kappa_ca)
    ha, hb = modes.kappa_a / 2, modes.kappa_b / 2
    db = modes.delta_b
    g0 = complex(modes.g3wm)
    breaks = schedule.breakpoints()

    def coefficients(t):
        g, da, drives = _segment_coefficients(modes, schedule, t)
        return g0 + g, da, drives

    def drive(drives, t):
        total = 0j
        for e in drives:
            total += e.amplitude * np.exp(1j * (e.phase - 2 * np.pi * e.frequency * (t - e.t_start)))
        return total

    a, b = complex(a0), complex(b0)
    a_out = np.empty(len(t_grid), dtype=complex)
    b_out = np.empty(len(t_grid), dtype=complex)
    a_out[0], b_out[0] = a, b
    t = float(t_grid[0])
    for k in range(len(t_grid) - 1):
        h = (t_grid[k + 1] - t_grid[k]) / n_sub[k]
        for j in range(n_sub[k]):
            t0 = t_grid[k] + j * h
            # coefficients are piecewise constant; evaluate at the step midpoint
            # unless a breakpoint falls strictly inside the step
            inside = any(t0 < bp < t0 + h for bp in breaks)
            if not inside:
                g, da, drives = coefficients(t0 + h / 2)
                gc = g.conjugate()
                ka = -(ha + 1j * da)
                kb_ = -(hb + 1j * db)
                if drives:
                    u0 = sq_ca * drive(drives, t0)
                    um = sq_ca * drive(drives, t0 + h / 2)
                    u1 = sq_ca * drive(drives, t0 + h)
                else:
                    u0 = um = u1 = 0j
                k1a = ka * a - 1j * g * b + u0
                k1b = kb_ * b - 1j * gc * a
                a2, b2 = a + h / 2 * k1a, b + h / 2 * k1b
                k2a = ka * a2 - 1j * g * b2 + um
                k2b = kb_ * b2 - 1j * gc * a2
                a3, b3 = a + h / 2 * k2a, b + h / 2 * k2b
                k3a = ka * a3 - 1j * g * b3 + um
                k3b = kb_ * b3 - 1j * gc * a3
                a4, b4 = a + h * k3a, b + h * k3b
                k4a = ka * a4 - 1j * g * b4 + u1
                k4b = kb_ * b4 - 1j * gc * a4
            else:
                def rhs(tt, aa, bb):
                    g, da, drives = coefficients(tt)
                    u = sq_ca * drive(drives, tt) if drives else 0j
                    return (
                        -(ha + 1j * da) * aa - 1j * g * bb + u,
                        -(hb + 1j * db) * bb - 1j * g.conjugate() * aa,
                    )

                k1a, k1b = rhs(t0, a, b)
                k2a, k2b = rhs(t0 + h / 2, a + h / 2 * k1a, b + h / 2 * k1b)
                k3a, k3b = rhs(t0 + h / 2, a + h / 2 * k2a, b + h / 2 * k2b)
                k4a, k4b = rhs(t0 + h, a + h * k3a, b + h * k3b)
            a = a + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
            b = b + h / 6 * (k1b + 2 * k2b + 2 * k3b + k4b)
        a_out[k + 1], b_out[k + 1] = a, b
    return Trace(t_grid, a_out, {"observable": "mode_a_amplitude", "dt": float(dt)}, {"b": b_out})


def decay_rate(t: ArrayLike, amplitude: ArrayLike) -> float:
    """Energy decay rate from a straight-line fit of ``log|a|**2`` (s^-1)."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.abs(np.asarray(amplitude)) ** 2)
    slope, _ = np.polyfit(t, y, 1)
    return float(-slope)


def ringdown_schedule(
    drive_duration: float,
    pump_delay: float | None,
    g3wm: float,
    t_end: float,
    drive_amplitude: float = 1.0,
) -> PulseSchedule:
    """Resonant drive on ``[0, drive_duration)`` then a pump from ``drive_duration + pump_delay``.

    ``pump_delay=None`` leaves the pump off.
    """
    events = [PulseEvent(0.0, drive_duration, "microwave-drive", drive_amplitude)]
    if pump_delay is not None:
        start = drive_duration + pump_delay
        if start < t_end:
            events.append(PulseEvent(start, t_end - start, "pump-window", g3wm))
    return PulseSchedule.from_events(events)


def rate_change_time(
    t: ArrayLike,
    amplitude: ArrayLike,
    rate_before: float,
    rate_after: float,
    fraction: float = 0.02,
) -> float:
    """First sample at which the local energy decay rate leaves ``rate_before``.

    The local rate is the backward difference of ``log|a|**2``; the change
    is flagged once it has moved ``fraction`` of the way to ``rate_after``.
    A small fraction catches the onset before the buffer mode has built up.
    """
    t = np.asarray(t, dtype=float)
    y = np.log(np.abs(np.asarray(amplitude)) ** 2)
    local = -np.diff(y) / np.diff(t)
    threshold = rate_before + fraction * (rate_after - rate_before)
    if rate_after > rate_before:
        hits = np.flatnonzero(local > threshold)
    else:
        hits = np.flatnonzero(local < threshold)
    if len(hits) == 0:
        return float("nan")
    # local[i] covers (t[i], t[i+1]]; report the interval start
    return float(t[hits[0]])
