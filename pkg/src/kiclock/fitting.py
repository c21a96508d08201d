"""Least-squares extraction of resonator, tuning and coherence parameters."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths

from .circuit import CircuitNetlist, KineticInductor, tuning_curve
from .errors import FitError, InvalidArgumentError
from .modes import Trace

MAX_ITER = 200
RTOL = 1e-10


@dataclass
class FitResult:
    """Parameters with 1-sigma uncertainties and convergence diagnostics."""

    names: list[str]
    values: NDArray
    errors: NDArray
    residual_norm: float
    converged: bool
    iterations: int
    warnings: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.errors[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def to_text(self) -> str:
        """Key-value serialization, one ``key = value`` per line."""
        lines = [
            f"converged = {str(self.converged).lower()}",
            f"iterations = {self.iterations}",
            f"residual_norm = {self.residual_norm:.12g}",
        ]
        for n, v, e in zip(self.names, self.values, self.errors):
            lines.append(f"{n} = {v:.12g}")
            lines.append(f"{n}_err = {e:.12g}")
        for w in self.warnings:
            lines.append(f"warning = {w}")
        return "\n".join(lines) + "\n"


def _solve(
    residual: Callable[[NDArray], NDArray],
    x0: NDArray,
    scale: NDArray,
    names: list[str],
    bounds=None,
    threshold: float | None = None,
) -> FitResult:
    """Damped least squares in scaled coordinates ``x = p / scale``.

    Uses Levenberg-Marquardt when unbounded and a trust-region variant when
    ``bounds`` are given. Covariance comes from the Jacobian at the optimum
    scaled by the reduced chi-square.
    """
    scale = np.asarray(scale, dtype=float)

    def fun(x):
        return residual(x * scale)

    x0 = np.asarray(x0, dtype=float) / scale
    kw = dict(xtol=RTOL, ftol=RTOL, gtol=RTOL, max_nfev=MAX_ITER * (len(x0) + 1))
    if bounds is None:
        sol = least_squares(fun, x0, method="lm", **kw)
    else:
        lo, hi = (np.asarray(b, dtype=float) / scale for b in bounds)
        sol = least_squares(fun, np.clip(x0, lo, hi), method="trf", bounds=(lo, hi), **kw)
    n, p = len(sol.fun), len(sol.x)
    rss = float(sol.fun @ sol.fun)
    dof = max(n - p, 1)
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj) * (rss / dof)
        errs = np.sqrt(np.clip(np.diag(cov), 0, None)) * np.abs(scale)
    except np.linalg.LinAlgError:
        errs = np.full(p, np.inf)
    converged = bool(sol.success) and (threshold is None or math.sqrt(rss) <= threshold)
    iterations = int(sol.nfev if sol.njev is None else sol.njev)
    return FitResult(list(names), sol.x * scale, errs, math.sqrt(rss), converged, iterations)


# ---------------------------------------------------------------------------
# resonance


def reflection_model(f, f0, kappa_c, kappa_i, amp=1.0, phase=0.0, slope=0.0, f_ref=0.0):
    """Reflection with a complex background ``amp * exp(i (phase + slope (f - f_ref)))``."""
    f = np.asarray(f, dtype=float)
    delta = 2 * np.pi * (f0 - f)
    core = 1 - 2 * kappa_c / (kappa_c + kappa_i + 2j * delta)
    return amp * np.exp(1j * (phase + slope * (f - f_ref))) * core


def _resonance_guess(f: NDArray, s: NDArray):
    mag = np.abs(s)
    edge = np.r_[mag[: max(3, len(mag) // 20)], mag[-max(3, len(mag) // 20):]]
    amp = float(np.median(edge))
    i0 = int(np.argmin(mag))
    f0 = f[i0]
    r = min(mag[i0] / amp, 0.999)
    # |S11|^2 dip is Lorentzian with FWHM kappa/(2 pi) in frequency
    p2 = (mag / amp) ** 2
    half = (1 + r**2) / 2
    below = np.flatnonzero(p2 < half)
    if len(below) >= 2:
        fwhm = f[below[-1]] - f[below[0]]
    else:
        fwhm = 4 * (f[1] - f[0])
    kappa = 2 * np.pi * max(fwhm, f[1] - f[0])
    # unwrap the background phase from the edges
    ph = np.unwrap(np.angle(s))
    n_edge = max(3, len(f) // 20)
    # per-edge slopes; an over-coupled dip winds the phase by 2 pi in between
    s_lo = np.polyfit(f[:n_edge], ph[:n_edge], 1)[0]
    s_hi = np.polyfit(f[-n_edge:], ph[-n_edge:], 1)[0]
    slope = (s_lo + s_hi) / 2
    return f0, kappa, r, amp, slope


def fit_resonance(trace: Trace, threshold: float | None = None) -> FitResult:
    """Fit complex S11 near one resonance.

    Returns a FitResult with ``f0`` (Hz), ``kappa_c`` and ``kappa_i``
    (s^-1) plus the background nuisance parameters ``amp``, ``phase`` and
    ``slope`` (rad/Hz about the sweep center).

    Raises:
        InvalidArgumentError: with fewer than 50 points.
        FitError: when neither coupling-regime start converges.
    """
    f = np.asarray(trace.axis, dtype=float)
    s = np.asarray(trace.values, dtype=complex)
    if len(f) < 50:
        raise InvalidArgumentError("resonance fit needs at least 50 points")
    f_ref = float(f.mean())
    f0, kappa, r, amp, slope = _resonance_guess(f, s)
    # background phase at the reference, from points away from the dip
    far = np.abs(f - f0) > 2 * kappa / (2 * np.pi)
    ref_pts = far if far.sum() >= 3 else np.ones_like(far)
    phase = float(np.angle(np.mean(s[ref_pts] * np.exp(-1j * slope * (f[ref_pts] - f_ref)))))
    linewidth_hz = kappa / (2 * np.pi)
    span = f[-1] - f[0]
    notes = []
    if span < 5 * linewidth_hz:
        notes.append("sweep spans fewer than 5 linewidths")

    def residual(p):
        model = reflection_model(f, p[0], p[1], p[2], p[3], p[4], p[5], f_ref)
        d = model - s
        return np.concatenate([d.real, d.imag])

    scale = np.array([linewidth_hz, kappa, kappa, 1.0, 1.0, 1.0 / span])
    best = None
    for kc in ((1 - r) / 2 * kappa, (1 + r) / 2 * kappa):
        x0 = np.array([f0, kc, kappa - kc, amp, phase, slope])
        try:
            res = _solve(residual, x0, scale, ["f0", "kappa_c", "kappa_i", "amp", "phase", "slope"], threshold=threshold)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if best is None or res.residual_norm < best.residual_norm:
            best = res
    if best is None or not np.all(np.isfinite(best.values)):
        raise FitError("resonance fit failed", float("nan") if best is None else best.residual_norm)
    if best["kappa_c"] < 0 or best["kappa_i"] < 0:
        raise FitError("resonance fit returned negative rates", best.residual_norm)
    if best.iterations >= MAX_ITER * 7:
        best.converged = False
    if not best.converged:
        raise FitError("resonance fit did not converge", best.residual_norm)
    best.warnings.extend(notes)
    return best


# ---------------------------------------------------------------------------
# tuning curves


def _with_element(netlist: CircuitNetlist, element: str, Istar: float, alpha: float, fraction: float) -> CircuitNetlist:
    ind = netlist.inductor_a if element == "a" else netlist.inductor_c
    L0 = ind.L0
    new = KineticInductor(Lk0=fraction * L0, Istar=Istar, Lg=(1 - fraction) * L0, alpha=alpha)
    if element == "a":
        return replace(netlist, inductor_a=new)
    return replace(netlist, inductor_c=new)


def fit_tuning(
    I_A: ArrayLike,
    I_B: ArrayLike,
    netlist: CircuitNetlist,
    dfa: ArrayLike | None = None,
    dfb: ArrayLike | None = None,
    element: Literal["a", "c"] = "a",
    fit_fraction: bool = False,
    sigma: float | None = None,
    guess: tuple[float, float] | None = None,
) -> FitResult:
    """Fit the quartic kinetic-inductance law of one element to frequency shifts.

    The forward model is :func:`~kiclock.circuit.tuning_curve` evaluated at
    each ``(I_A[i], I_B[i])`` bias pair, with the element's total
    zero-current inductance held fixed. ``Lk0_fraction`` is taken from
    ``netlist`` unless ``fit_fraction`` is set; it is nearly degenerate with
    ``Istar`` for small bias spans.

    Returns:
        FitResult with ``Istar`` (A), ``alpha`` (bounded to [0, 1]) and
        ``Lk0_fraction``.
    """
    if element not in ("a", "c"):
        raise InvalidArgumentError("element must be 'a' (microwire A) or 'c' (coupler)")
    ia = np.asarray(I_A, dtype=float)
    ib = np.asarray(I_B, dtype=float)
    if ia.shape != ib.shape:
        raise InvalidArgumentError("I_A and I_B must have the same shape")
    if dfa is None and dfb is None:
        raise InvalidArgumentError("need dfa and/or dfb")
    data = [np.asarray(d, dtype=float) for d in (dfa, dfb) if d is not None]
    use = [d is not None for d in (dfa, dfb)]
    y = np.concatenate(data)
    if sigma is None:
        sigma = max(1e-3 * np.max(np.abs(y)), 1.0)

    ind = netlist.inductor_a if element == "a" else netlist.inductor_c
    current = ia if element == "a" else ia + ib
    notes = []
    if len(ia) < 8 or np.ptp(current) < 0.3 * ind.Istar:
        notes.append("ill-conditioned: fewer than 8 points or bias span below 30% of I*")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    istar0, alpha0 = guess if guess is not None else (ind.Istar, min(max(ind.alpha, 0.0), 1.0))
    istar0 = max(istar0, 1.05 * np.max(np.abs(current)))
    frac0 = ind.kinetic_fraction

    def predict(p):
        frac = p[2] if fit_fraction else frac0
        net = _with_element(netlist, element, p[0], p[1], frac)
        out = []
        tab = [_pairwise_tuning(net, ia, ib)]
        if use[0]:
            out.append(tab[0][0])
        if use[1]:
            out.append(tab[0][1])
        return np.concatenate(out)

    def residual(p):
        try:
            return (predict(p) - y) / sigma
        except ValueError:
            return np.full(len(y), 1e6)

    names = ["Istar", "alpha", "Lk0_fraction"]
    x0 = [istar0, alpha0, frac0]
    scale = [istar0, 1.0, 1.0]
    lo = [1.0001 * np.max(np.abs(current)), 0.0, 1e-6]
    hi = [np.inf, 1.0, 1.0]
    if not fit_fraction:
        names, x0, scale, lo, hi = names[:2], x0[:2], scale[:2], lo[:2], hi[:2]
    res = _solve(residual, np.array(x0), np.array(scale), names, bounds=(lo, hi))
    if not fit_fraction:
        res.names.append("Lk0_fraction")
        res.values = np.append(res.values, frac0)
        res.errors = np.append(res.errors, 0.0)
    res.warnings.extend(notes)
    if not res.converged:
        raise FitError("tuning fit did not converge", res.residual_norm)
    return res


def _pairwise_tuning(net: CircuitNetlist, ia: NDArray, ib: NDArray) -> tuple[NDArray, NDArray]:
    dfa = np.empty(len(ia))
    dfb = np.empty(len(ia))
    for i, (a, b) in enumerate(zip(ia, ib)):
        tab = tuning_curve(net, [a], [b])
        dfa[i], dfb[i] = tab.dfa[0], tab.dfb[0]
    return dfa, dfb


# ---------------------------------------------------------------------------
# exponentials


def exponential_model(t, T, amplitude, offset, model="simple"):
    t = np.asarray(t, dtype=float)
    if model == "simple":
        return amplitude * np.exp(-t / T) + offset
    if model == "inversion-recovery":
        return amplitude * (1 - 2 * np.exp(-t / T)) + offset
    raise InvalidArgumentError(f"unknown exponential model {model!r}")


def _log_linear_guess(t: NDArray, y: NDArray) -> float:
    """Time constant from a straight line through log(y) over its first decade."""
    y0 = y[0]
    keep = (y > 0) & (y >= y0 / 10)
    # use the leading run only
    stop = np.argmin(keep) if not keep.all() else len(keep)
    idx = np.arange(max(stop, 2))
    if len(idx) < 2 or np.any(y[idx] <= 0):
        return float(np.ptp(t) / 3)
    slope, _ = np.polyfit(t[idx], np.log(y[idx]), 1)
    return float(-1 / slope) if slope < 0 else float(np.ptp(t))


def fit_exponential(
    t: ArrayLike,
    y: ArrayLike,
    model: Literal["simple", "inversion-recovery"] = "simple",
) -> FitResult:
    """Fit ``A exp(-t/T) + c`` or ``A (1 - 2 exp(-t/T)) + c``.

    Raises:
        InvalidArgumentError: with fewer than 10 points.
        FitError: on non-convergence or a non-positive time constant.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 10:
        raise InvalidArgumentError("exponential fit needs at least 10 points")
    if model not in ("simple", "inversion-recovery"):
        raise InvalidArgumentError(f"unknown exponential model {model!r}")
    order = np.argsort(t)
    t, y = t[order], y[order]
    if model == "simple":
        c0 = float(min(y[-1], 0.0)) if y[0] > y[-1] else float(y[-1])
        sign = 1.0 if y[0] >= y[-1] else -1.0
        T0 = _log_linear_guess(t - t[0], sign * (y - c0))
        A0 = (y[0] - c0) * math.exp(t[0] / T0)
    else:
        plateau = float(y[-1])
        T0 = _log_linear_guess(t - t[0], plateau - y)
        A0 = plateau / 1.0 if plateau != 0 else float(np.ptp(y) / 2)
        c0 = 0.0
    amp_scale = max(float(np.ptp(y)), 1e-300)

    def residual(p):
        return (exponential_model(t, p[0], p[1], p[2], model) - y) / amp_scale

    res = _solve(residual, np.array([T0, A0, c0]), np.array([T0, amp_scale, amp_scale]), ["T", "amplitude", "offset"])
    if not res.converged or not np.all(np.isfinite(res.values)):
        raise FitError("exponential fit did not converge", res.residual_norm)
    if res["T"] <= 0:
        raise FitError(f"non-physical time constant {res['T']:.4g} s", res.residual_norm)
    if not res.error("T") < res["T"]:
        # e.g. a growing or flat signal: T runs off and trades against the offset
        raise FitError(f"time constant not constrained by the data (T = {res['T']:.4g} s)", res.residual_norm)
    return res


# ---------------------------------------------------------------------------
# Lorentzian peaks


def lorentzian_sum(x, baseline, peaks: Sequence[tuple[float, float, float]]):
    """``baseline + sum depth / (1 + ((x - center)/(width/2))**2)`` with FWHM ``width``."""
    x = np.asarray(x, dtype=float)
    out = np.full(len(x), float(baseline))
    for c, w, d in peaks:
        out += d / (1 + ((x - c) / (w / 2)) ** 2)
    return out


@dataclass
class PeakFit:
    peaks: list[tuple[float, float, float]]
    baseline: float
    result: FitResult


def fit_lorentzian_peaks(
    x: ArrayLike,
    y: ArrayLike,
    n_peaks: int,
    guesses: Sequence[tuple[float, float, float]] | None = None,
) -> PeakFit:
    """Multi-Lorentzian least squares with a shared constant baseline.

    Peaks may point either way (``depth`` is signed). Without ``guesses``
    the ``n_peaks`` most prominent extrema seed the fit. A peak whose depth
    is consistent with zero, or whose center uncertainty exceeds its width,
    is flagged as degenerate in ``result.warnings``.
    """
    if n_peaks < 1:
        raise InvalidArgumentError("n_peaks must be at least 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    baseline0 = float(np.median(np.r_[y[: max(3, len(y) // 10)], y[-max(3, len(y) // 10):]]))
    if guesses is None:
        guesses = _peak_guesses(x, y, baseline0, n_peaks)
    if len(guesses) != n_peaks:
        raise InvalidArgumentError(f"expected {n_peaks} peak guesses, got {len(guesses)}")
    dx = float(np.median(np.diff(x)))
    wscale = max(float(np.mean([abs(g[1]) for g in guesses])), dx)
    dscale = max(float(np.ptp(y)), 1e-300)

    def residual(p):
        pk = [(p[1 + 3 * k], p[2 + 3 * k], p[3 + 3 * k]) for k in range(n_peaks)]
        return (lorentzian_sum(x, p[0], pk) - y) / dscale

    x0 = [baseline0]
    scale = [dscale]
    names = ["baseline"]
    for k, (c, w, d) in enumerate(guesses):
        x0 += [c, w, d]
        scale += [wscale, wscale, dscale]
        names += [f"center_{k}", f"width_{k}", f"depth_{k}"]
    res = _solve(residual, np.array(x0), np.array(scale), names)
    peaks = []
    for k in range(n_peaks):
        c, w, d = res.values[1 + 3 * k: 4 + 3 * k]
        peaks.append((float(c), float(abs(w)), float(d)))
        dc, dd = res.errors[1 + 3 * k], res.errors[3 + 3 * k]
        if not np.isfinite(dc) or dc > abs(w) or abs(d) <= 2 * dd:
            res.warnings.append(f"degenerate-fit: peak {k} is not resolved")
    if not res.converged:
        raise FitError("Lorentzian fit did not converge", res.residual_norm)
    return PeakFit(peaks, float(res.values[0]), res)


def _peak_guesses(x, y, baseline, n_peaks):
    dev = y - baseline
    sign = 1.0 if abs(dev.max()) >= abs(dev.min()) else -1.0
    idx, props = find_peaks(sign * dev, prominence=0)
    if len(idx) < n_peaks:
        raise InvalidArgumentError(f"found only {len(idx)} candidate peaks, need {n_peaks}")
    top = idx[np.argsort(props["prominences"])[::-1][:n_peaks]]
    top = np.sort(top)
    widths = peak_widths(sign * dev, top, rel_height=0.5)[0]
    dx = float(np.median(np.diff(x)))
    return [(float(x[i]), float(max(w, 1.0) * dx), float(dev[i])) for i, w in zip(top, widths)]
