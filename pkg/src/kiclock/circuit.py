"""Kinetic-inductance tuning and quantization of the two-resonator circuit.

Resonator A (microwire A, capacitor ``Ca``) and resonator B (linear
inductor ``Lb``, capacitor ``Cb``) share a nonlinear kinetic-inductance
coupler (KIC) to ground. The bias ``I_A`` flows through microwire A and the
KIC carries ``I_A + I_B``.

Inductances depend on current through

    L(I) = Lg + Lk0 * (1 + (I/I*)**2 + alpha * (I/I*)**4)

and the circuit co-energy is ``sum_j L_j(I_j) I_j**2 / 2`` with the rf
currents ``I_a = dQa/dt``, ``I_b = dQb/dt`` and ``I_a + I_b`` in the KIC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import CriticalCurrentError, DegenerateCircuitError, InvalidArgumentError
from .series import TruncatedPoly, linear_map

Z0 = 50.0


@dataclass(frozen=True)
class KineticInductor:
    """A current-tunable inductor.

    Attributes:
        Lk0: Zero-current kinetic inductance (H).
        Istar: Current scale I* of the quadratic term (A).
        Lg: Series geometric inductance (H).
        alpha: Quartic coefficient (dimensionless).
    """

    Lk0: float
    Istar: float
    Lg: float = 0.0
    alpha: float = 0.3

    def __post_init__(self):
        if not self.Lk0 > 0:
            raise InvalidArgumentError(f"Lk0 must be positive, got {self.Lk0!r}")
        if not self.Istar > 0:
            raise InvalidArgumentError(f"Istar must be positive, got {self.Istar!r}")
        if self.Lg < 0:
            raise InvalidArgumentError(f"Lg must be non-negative, got {self.Lg!r}")
        if not math.isfinite(self.alpha):
            raise InvalidArgumentError("alpha must be finite")

    @property
    def L0(self) -> float:
        """Total zero-current inductance."""
        return self.Lg + self.Lk0

    @property
    def kinetic_fraction(self) -> float:
        return self.Lk0 / self.L0


def _check_current(ind: KineticInductor, I) -> NDArray:
    I = np.asarray(I, dtype=float)
    if np.any(np.abs(I) >= ind.Istar):
        raise CriticalCurrentError(
            f"|I| = {np.max(np.abs(I)):.6g} A reaches the critical scale I* = {ind.Istar:.6g} A"
        )
    return I


def kinetic_inductance(ind: KineticInductor, I: ArrayLike):
    """Total inductance ``Lg + Lk(I)`` at current ``I`` (A), in H."""
    x = _check_current(ind, I) / ind.Istar
    out = ind.Lg + ind.Lk0 * (1 + x**2 + ind.alpha * x**4)
    return float(out) if out.ndim == 0 else out


def expansion_coeffs(ind: KineticInductor, Idc: float) -> tuple[float, float, float, float]:
    """Coefficients of the rf-current expansion around a DC bias.

    Returns ``(c1, c2, c3, c4)`` in A^-1 .. A^-4 such that

        L(Idc + d) = Lg + Lk(Idc) + Lk0 * sum_i c_i d**i

    holds exactly (the quartic law has no higher terms).
    """
    _check_current(ind, Idc)
    s, a, x = ind.Istar, ind.alpha, Idc / ind.Istar
    return (
        (2 * x + 4 * a * x**3) / s,
        (1 + 6 * a * x**2) / s**2,
        4 * a * x / s**3,
        a / s**4,
    )


def resonance_frequency(L, C):
    """Lumped LC resonance 1/(2 pi sqrt(LC)) in Hz."""
    L = np.asarray(L, dtype=float)
    C = np.asarray(C, dtype=float)
    if np.any(L <= 0) or np.any(C <= 0):
        raise InvalidArgumentError("inductance and capacitance must be positive")
    f = 1.0 / (2 * np.pi * np.sqrt(L * C))
    return float(f) if f.ndim == 0 else f


@dataclass(frozen=True)
class CircuitNetlist:
    """Element values of the coupled resonators and their DC bias."""

    inductor_a: KineticInductor
    inductor_c: KineticInductor
    Lb: float
    Ca: float
    Cb: float
    bias: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("Lb", "Ca", "Cb"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)!r}")
        _check_current(self.inductor_a, self.I_a)
        _check_current(self.inductor_c, self.I_c)

    @property
    def I_a(self) -> float:
        return float(self.bias[0])

    @property
    def I_c(self) -> float:
        """DC current through the coupler, ``I_A + I_B``."""
        return float(self.bias[0] + self.bias[1])

    def with_bias(self, I_A: float, I_B: float) -> "CircuitNetlist":
        return replace(self, bias=(float(I_A), float(I_B)))


def dressed_inductances(La: float, Lb: float, Lc: float) -> tuple[float, float]:
    """Effective mode inductances of the linear circuit (H)."""
    det = La * Lb + La * Lc + Lb * Lc
    return det / (Lb + Lc), det / (La + Lc)


def default_netlist(I_A: float = 0.0, I_B: float = 0.0) -> CircuitNetlist:
    """Device values reproducing the zero-bias modes at 7.422 and 6.605 GHz.

    The microwire and coupler kinetic inductances follow a sheet inductance
    of 2.2 pH per square; capacitances are solved for the measured
    frequencies.
    """
    ind_a = KineticInductor(Lk0=0.94e-9, Istar=9.53e-3, Lg=1.06e-9, alpha=0.3)
    ind_c = KineticInductor(Lk0=22e-12, Istar=5.73e-3, Lg=3e-12, alpha=0.3)
    Lb = 1.5e-9
    lta, ltb = dressed_inductances(ind_a.L0, Lb, ind_c.L0)
    Ca = 1.0 / (lta * (2 * np.pi * 7.422e9) ** 2)
    Cb = 1.0 / (ltb * (2 * np.pi * 6.605e9) ** 2)
    return CircuitNetlist(ind_a, ind_c, Lb, Ca, Cb, (I_A, I_B))


def mode_frequencies(netlist: CircuitNetlist) -> tuple[float, float]:
    La = kinetic_inductance(netlist.inductor_a, netlist.I_a)
    Lc = kinetic_inductance(netlist.inductor_c, netlist.I_c)
    lta, ltb = dressed_inductances(La, netlist.Lb, Lc)
    return resonance_frequency(lta, netlist.Ca), resonance_frequency(ltb, netlist.Cb)


@dataclass(frozen=True)
class TuningTable:
    """Mode frequencies over a grid of bias points (flattened, I_A outer)."""

    I_A: NDArray
    I_B: NDArray
    fa: NDArray
    fb: NDArray
    dfa: NDArray
    dfb: NDArray


def tuning_curve(netlist: CircuitNetlist, I_A: ArrayLike, I_B: ArrayLike) -> TuningTable:
    """Mode frequencies and shifts from zero bias over the ``I_A x I_B`` grid."""
    ia, ib = np.meshgrid(np.atleast_1d(I_A).astype(float), np.atleast_1d(I_B).astype(float), indexing="ij")
    ia, ib = ia.ravel(), ib.ravel()
    La = kinetic_inductance(netlist.inductor_a, ia)
    Lc = kinetic_inductance(netlist.inductor_c, ia + ib)
    lta, ltb = dressed_inductances(La, netlist.Lb, Lc)
    fa = resonance_frequency(lta, netlist.Ca)
    fb = resonance_frequency(ltb, netlist.Cb)
    fa0, fb0 = mode_frequencies(netlist.with_bias(0.0, 0.0))
    return TuningTable(ia, ib, np.atleast_1d(fa), np.atleast_1d(fb), fa - fa0, fb - fb0)


# ---------------------------------------------------------------------------
# quantization


@dataclass(frozen=True)
class CouplingSet:
    """Quadratic and cubic flux-basis Hamiltonian coefficients of the circuit.

    ``H_kin = Phi_a**2/(2 Ltilde_a) + Phi_b**2/(2 Ltilde_b) + g11 Phi_a Phi_b
    + g21 Phi_a**2 Phi_b + g12 Phi_a Phi_b**2 + g30 Phi_a**3 + g03 Phi_b**3 + ...``
    in SI units. ``g3wm`` and ``induced_loss`` are zero until a pump is
    applied with :func:`with_pump`.
    """

    Ltilde_a: float
    Ltilde_b: float
    Za: float
    Zb: float
    fa: float
    fb: float
    g11: float
    g21: float
    g12: float
    g30: float
    g03: float
    k: float
    Istar_c: float
    g3wm: float = 0.0
    induced_loss: float = 0.0
    hamiltonian: TruncatedPoly | None = field(default=None, repr=False, compare=False)


def _co_energy(L0: float, c: tuple[float, ...], current: TruncatedPoly) -> TruncatedPoly:
    # L(I) I^2 / 2 with L(I) = L0 + sum_i c_i I^i
    out = current**2 * (L0 / 2)
    for i, ci in enumerate(c, start=1):
        if ci:
            out = out + current ** (i + 2) * (ci / 2)
    return out


def _grad_co_energy(L0: float, c: tuple[float, ...], current: TruncatedPoly) -> TruncatedPoly:
    out = current * L0
    for i, ci in enumerate(c, start=1):
        if ci:
            out = out + current ** (i + 1) * (ci * (i + 2) / 2)
    return out


@dataclass(frozen=True)
class FluxChargeRelation:
    """Forward relation ``Phi = Lambda q + R(q)`` and its truncated inverse ``q(Phi)``."""

    Lambda: NDArray
    forward: tuple[TruncatedPoly, TruncatedPoly]
    inverse: tuple[TruncatedPoly, TruncatedPoly]
    co_energy: TruncatedPoly


def flux_charge_relation(
    La0: float,
    Lb: float,
    Lc0: float,
    ca: tuple[float, ...],
    cn: tuple[float, ...],
    order: int = 3,
) -> FluxChargeRelation:
    """Build ``Phi(q)`` and invert it by fixed-point substitution.

    ``ca`` and ``cn`` are the dimensional expansion coefficients (H/A^i) of
    microwire A and of the coupler. Starting from ``q = Lambda^-1 Phi`` the
    update ``q <- Lambda^-1 (Phi - R(q))`` gains one correct degree per
    pass; every intermediate product is truncated at ``order``.
    """
    if order < 2:
        raise InvalidArgumentError("truncation order must be at least 2")
    qa = TruncatedPoly.variable(0, 2, order)
    qb = TruncatedPoly.variable(1, 2, order)
    qc = qa + qb
    lam = np.array([[La0 + Lc0, Lc0], [Lc0, Lb + Lc0]])
    det = np.linalg.det(lam)
    if not np.isfinite(det) or abs(det) <= 1e-12 * np.max(np.abs(lam)) ** 2:
        raise DegenerateCircuitError(f"inductance matrix is singular (det = {det:.3g})")
    lam_inv = np.linalg.inv(lam)

    def remainder(a: TruncatedPoly, b: TruncatedPoly) -> list[TruncatedPoly]:
        # nonlinear parts of dT/dq_a and dT/dq_b
        na = _grad_co_energy(0.0, ca, a) + _grad_co_energy(0.0, cn, a + b)
        nb = _grad_co_energy(0.0, cn, a + b)
        return [na, nb]

    fwd = [
        _grad_co_energy(La0, ca, qa) + _grad_co_energy(Lc0, cn, qc),
        _grad_co_energy(Lb, (), qb) + _grad_co_energy(Lc0, cn, qc),
    ]
    phi = [TruncatedPoly.variable(0, 2, order), TruncatedPoly.variable(1, 2, order)]
    base = linear_map(lam_inv, phi)
    q = list(base)
    for _ in range(order - 1):
        corr = linear_map(lam_inv, remainder(*q))
        q = [b - c for b, c in zip(base, corr)]
    co = (
        _co_energy(La0, ca, qa)
        + _co_energy(Lb, (), qb)
        + _co_energy(Lc0, cn, qc)
    )
    return FluxChargeRelation(lam, tuple(fwd), tuple(q), co)


def quantize_circuit(netlist: CircuitNetlist, order: int = 3) -> CouplingSet:
    """Flux-basis Hamiltonian coefficients at the netlist's bias point.

    The Legendre transform ``H = Phi . q(Phi) - T(q(Phi))`` is evaluated with
    the truncated inverse relation and cut at total degree ``order``.

    Raises:
        DegenerateCircuitError: if the linear inductance matrix is singular.
    """
    ind_a, ind_c = netlist.inductor_a, netlist.inductor_c
    La0 = kinetic_inductance(ind_a, netlist.I_a)
    Lc0 = kinetic_inductance(ind_c, netlist.I_c)
    ca = tuple(ind_a.Lk0 * c for c in expansion_coeffs(ind_a, netlist.I_a))
    cn = tuple(ind_c.Lk0 * c for c in expansion_coeffs(ind_c, netlist.I_c))
    rel = flux_charge_relation(La0, netlist.Lb, Lc0, ca, cn, order)
    phi_a = TruncatedPoly.variable(0, 2, order)
    phi_b = TruncatedPoly.variable(1, 2, order)
    qa, qb = rel.inverse
    H = phi_a * qa + phi_b * qb - rel.co_energy.compose([qa, qb])

    lta = 1.0 / (2 * H.coeff((2, 0)))
    ltb = 1.0 / (2 * H.coeff((0, 2)))
    return CouplingSet(
        Ltilde_a=lta,
        Ltilde_b=ltb,
        Za=math.sqrt(lta / netlist.Ca),
        Zb=math.sqrt(ltb / netlist.Cb),
        fa=resonance_frequency(lta, netlist.Ca),
        fb=resonance_frequency(ltb, netlist.Cb),
        g11=H.coeff((1, 1)),
        g21=H.coeff((2, 1)),
        g12=H.coeff((1, 2)),
        g30=H.coeff((3, 0)),
        g03=H.coeff((0, 3)),
        k=ind_c.Lk0 / math.sqrt(La0 * netlist.Lb),
        Istar_c=ind_c.Istar,
        hamiltonian=H,
    )


def cubic_couplings_closed_form(
    La0: float, Lb: float, Lc0: float, c1a: float, c1n: float
) -> dict[str, float]:
    """Closed-form third-order couplings from the lowest-order Legendre correction.

    To cubic order ``H = Phi.Lambda^-1.Phi / 2 - T3(Lambda^-1 Phi)``, where
    ``T3 = c1a qa**3/2 + c1n (qa+qb)**3/2``. With ``D = La0 Lb (1 + Lc0/Lab)``
    and ``Lab = La0 Lb/(La0 + Lb)``:

        g12 = -3/(2 Ltilde_a) c1a (Lc0/D)**2 - 3/2 c1n La0**2 Lb / D**3
    """
    Lab = La0 * Lb / (La0 + Lb)
    D = La0 * Lb * (1 + Lc0 / Lab)
    lta, _ = dressed_inductances(La0, Lb, Lc0)
    return {
        "g12": -1.5 / lta * c1a * (Lc0 / D) ** 2 - 1.5 * c1n * La0**2 * Lb / D**3,
        "g21": 1.5 * c1a * Lc0 * (Lb + Lc0) ** 2 / D**3 - 1.5 * c1n * La0 * Lb**2 / D**3,
        "g30": -0.5 * c1a * (Lb + Lc0) ** 3 / D**3 - 0.5 * c1n * Lb**3 / D**3,
        "g03": 0.5 * c1a * Lc0**3 / D**3 - 0.5 * c1n * La0**3 / D**3,
        "g11": -Lc0 / D,
    }


# ---------------------------------------------------------------------------
# three-wave mixing


def pump_current(P_in: float, Z0: float = Z0, attenuation_db: float = 0.0) -> float:
    """rf current amplitude sqrt(P/Z0) reaching the coupler (A)."""
    if P_in < 0:
        raise InvalidArgumentError("pump power must be non-negative")
    return math.sqrt(P_in * 10 ** (-attenuation_db / 10) / Z0)


def three_wave_coupling(couplings: CouplingSet, Idc: float, Irf: float) -> float:
    """Conversion rate ``12 k Idc Irf / I*^2 sqrt(wa wb)`` in s^-1 (angular).

    ``Idc`` is the total coupler bias ``I_A + I_B``.
    """
    if abs(Idc) >= couplings.Istar_c or abs(Irf) >= couplings.Istar_c:
        raise CriticalCurrentError("coupler current reaches I*")
    wa = 2 * np.pi * couplings.fa
    wb = 2 * np.pi * couplings.fb
    return 12 * couplings.k * Idc * Irf / couplings.Istar_c**2 * math.sqrt(wa * wb)


def induced_loss(g3wm: float, kappa_b: float) -> float:
    """Extra energy decay rate ``4 g**2 / kappa_b`` of mode A (s^-1)."""
    if not kappa_b > 0:
        raise InvalidArgumentError(f"kappa_b must be positive, got {kappa_b!r}")
    return 4 * g3wm**2 / kappa_b


def with_pump(couplings: CouplingSet, Idc: float, Irf: float, kappa_b: float) -> CouplingSet:
    g = three_wave_coupling(couplings, Idc, Irf)
    return replace(couplings, g3wm=g, induced_loss=induced_loss(g, kappa_b))
