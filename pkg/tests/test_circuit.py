import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from kiclock.circuit import (
    CircuitNetlist,
    KineticInductor,
    cubic_couplings_closed_form,
    default_netlist,
    dressed_inductances,
    expansion_coeffs,
    flux_charge_relation,
    induced_loss,
    kinetic_inductance,
    mode_frequencies,
    pump_current,
    quantize_circuit,
    three_wave_coupling,
    tuning_curve,
    with_pump,
)
from kiclock.errors import CriticalCurrentError, DegenerateCircuitError, InvalidArgumentError
from kiclock.series import TruncatedPoly


# ---------------------------------------------------------------------------
# truncated series


def test_poly_arithmetic_truncates():
    x = TruncatedPoly.variable(0, 2, 3)
    y = TruncatedPoly.variable(1, 2, 3)
    p = (1 + x + y) ** 4
    assert p.coeff((2, 1)) == 12
    assert p.coeff((2, 2)) == 0
    assert p(0.1, 0.2) == pytest.approx(sum(
        math.comb(4, i + j) * math.comb(i + j, i) * 0.1**i * 0.2**j
        for i in range(4) for j in range(4) if i + j <= 3
    ))


def test_compose_matches_direct_evaluation():
    x = TruncatedPoly.variable(0, 2, 3)
    y = TruncatedPoly.variable(1, 2, 3)
    f = x * y + x**3 * 2.0 - y
    g = [x + y * y, y - x * 0.5]
    h = f.compose(g)
    # exact polynomial minus terms above degree 3
    X, Y = sp.symbols("X Y")
    gx, gy = X + Y**2, Y - X / 2
    ref = sp.Poly(sp.expand(gx * gy + 2 * gx**3 - gy), X, Y)
    for (i, j), c in zip(ref.monoms(), ref.coeffs()):
        if i + j <= 3:
            assert h.coeff((i, j)) == pytest.approx(float(c))


def _sympy_inverse(La0, Lb, Lc0, ca, cn, order=3):
    """Exact rational inversion of Phi(q), one total degree at a time.

    At degree d the unknown part of q enters only through the linear map
    Lambda; everything else is fixed by the lower degrees.
    """
    pa, pb = sp.symbols("pa pb")
    half = sp.Rational(1, 2)

    def trunc(expr, d):
        poly = sp.Poly(sp.expand(expr), pa, pb)
        return sum((c * pa**i * pb**j for (i, j), c in poly.terms() if i + j <= d), sp.Integer(0))

    def nonlinear(c, q, d):
        return sum((ci * (i + 2) * half * trunc(q ** (i + 1), d) for i, ci in enumerate(c, start=1)), sp.Integer(0))

    lam = sp.Matrix([[La0 + Lc0, Lc0], [Lc0, Lb + Lc0]])
    qa, qb = sp.Integer(0), sp.Integer(0)
    for d in range(1, order + 1):
        na = nonlinear(ca, qa, d) + nonlinear(cn, qa + qb, d)
        nb = nonlinear(cn, qa + qb, d)
        rhs_a = (pa if d == 1 else 0) - trunc(na, d) + trunc(na, d - 1)
        rhs_b = (pb if d == 1 else 0) - trunc(nb, d) + trunc(nb, d - 1)
        ua, ub = lam.LUsolve(sp.Matrix([rhs_a, rhs_b]))
        qa, qb = qa + sp.expand(ua), qb + sp.expand(ub)
    out = []
    for q in (qa, qb):
        poly = sp.Poly(q, pa, pb)
        out.append({m: float(c) for m, c in poly.terms()})
    return out


def test_series_inversion_matches_sympy_oracle():
    La0, Lb, Lc0 = sp.Rational(1), sp.Rational(13, 10), sp.Rational(1, 5)
    ca = (sp.Rational(3, 10), sp.Rational(1, 2), sp.Rational(1, 7), sp.Rational(1, 11))
    cn = (sp.Rational(-1, 4), sp.Rational(2, 5), sp.Rational(1, 3), sp.Rational(1, 9))
    qa_ref, qb_ref = _sympy_inverse(La0, Lb, Lc0, ca, cn)
    rel = flux_charge_relation(float(La0), float(Lb), float(Lc0), tuple(map(float, ca)), tuple(map(float, cn)))
    qa, qb = rel.inverse
    for m, c in qa_ref.items():
        assert qa.coeff(m) == pytest.approx(c, rel=1e-12, abs=1e-14)
    for m, c in qb_ref.items():
        assert qb.coeff(m) == pytest.approx(c, rel=1e-12, abs=1e-14)


def _identity_residual(rel):
    """Largest coefficient of forward(inverse(Phi)) - Phi relative to its magnitude envelope."""
    worst = 0.0
    for k, fwd in enumerate(rel.forward):
        comp = fwd.compose(list(rel.inverse))
        env = fwd.abs().compose([p.abs() for p in rel.inverse])
        target = TruncatedPoly.variable(k, 2, comp.order)
        res = comp - target
        for m, c in res.coeffs.items():
            worst = max(worst, abs(c) / max(env.coeff(m), 1e-300))
    return worst


@settings(max_examples=30, deadline=None)
@given(
    st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.01, 2.0),
    st.lists(st.floats(-1, 1), min_size=8, max_size=8),
    st.sampled_from([3, 4]),
)
def test_inverse_composes_to_identity(La, Lb, Lc, cs, order):
    rel = flux_charge_relation(La, Lb, Lc, tuple(cs[:4]), tuple(cs[4:]), order)
    assert _identity_residual(rel) < 1e-10


def test_singular_inductance_matrix():
    with pytest.raises(DegenerateCircuitError):
        flux_charge_relation(0.0, 0.0, 0.0, (0.1,) * 4, (0.1,) * 4)


# ---------------------------------------------------------------------------
# kinetic inductance


def test_kinetic_inductance_law():
    ind = KineticInductor(Lk0=1e-9, Istar=1e-2, Lg=2e-9, alpha=0.3)
    assert kinetic_inductance(ind, 0.0) == pytest.approx(3e-9)
    x = 0.4
    assert kinetic_inductance(ind, x * 1e-2) == pytest.approx(2e-9 + 1e-9 * (1 + x**2 + 0.3 * x**4))
    with pytest.raises(CriticalCurrentError):
        kinetic_inductance(ind, 1e-2)


@pytest.mark.parametrize("Idc", [0.0, 1e-3, -3e-3, 5e-3])
def test_expansion_coefficients_reproduce_taylor_series(Idc):
    ind = KineticInductor(Lk0=0.94e-9, Istar=9.53e-3, Lg=1.06e-9, alpha=0.3)
    c = expansion_coeffs(ind, Idc)
    for d in (-1e-3, 2e-4, 1.5e-3):
        series = kinetic_inductance(ind, Idc) + ind.Lk0 * sum(ci * d ** (i + 1) for i, ci in enumerate(c))
        assert series == pytest.approx(kinetic_inductance(ind, Idc + d), rel=1e-13)


def test_zero_bias_coefficients():
    ind = KineticInductor(Lk0=1e-9, Istar=5.73e-3, alpha=0.3)
    c1, c2, c3, c4 = expansion_coeffs(ind, 0.0)
    assert c1 == 0 and c3 == 0
    assert c2 * ind.Istar**2 == pytest.approx(1.0)
    assert c4 * ind.Istar**4 == pytest.approx(0.3)


def test_default_netlist_frequencies():
    fa, fb = mode_frequencies(default_netlist())
    assert fa == pytest.approx(7.422e9, rel=1e-12)
    assert fb == pytest.approx(6.605e9, rel=1e-12)


def test_tuning_curve_is_even_and_downward():
    tab = tuning_curve(default_netlist(), np.linspace(-2e-3, 2e-3, 9), [0.0])
    assert np.allclose(tab.dfa, tab.dfa[::-1])
    assert np.all(tab.dfa <= 0)
    assert tab.dfa[4] == 0


def test_mode_a_tuning_span():
    tab = tuning_curve(default_netlist(), np.linspace(-2e-3, 2e-3, 81), [0.0])
    assert np.ptp(tab.fa) == pytest.approx(80e6, rel=0.1)


def test_netlist_rejects_bias_above_critical():
    with pytest.raises(CriticalCurrentError):
        default_netlist(I_A=4e-3, I_B=2e-3)


# ---------------------------------------------------------------------------
# quantization


def test_quadratic_terms_match_dressed_inductances():
    net = default_netlist(1e-3, 0.5e-3)
    c = quantize_circuit(net)
    La = kinetic_inductance(net.inductor_a, net.I_a)
    Lc = kinetic_inductance(net.inductor_c, net.I_c)
    lta, ltb = dressed_inductances(La, net.Lb, Lc)
    assert c.Ltilde_a == pytest.approx(lta, rel=1e-12)
    assert c.Ltilde_b == pytest.approx(ltb, rel=1e-12)
    assert c.fa == pytest.approx(mode_frequencies(net)[0], rel=1e-12)


@pytest.mark.parametrize("bias", [(1e-3, 0.0), (0.0, 2e-3), (1.5e-3, 1e-3)])
def test_cubic_couplings_match_closed_form(bias):
    net = default_netlist(*bias)
    c = quantize_circuit(net)
    La = kinetic_inductance(net.inductor_a, net.I_a)
    Lc = kinetic_inductance(net.inductor_c, net.I_c)
    c1a = net.inductor_a.Lk0 * expansion_coeffs(net.inductor_a, net.I_a)[0]
    c1n = net.inductor_c.Lk0 * expansion_coeffs(net.inductor_c, net.I_c)[0]
    ref = cubic_couplings_closed_form(La, net.Lb, Lc, c1a, c1n)
    for name in ("g12", "g21", "g30", "g03", "g11"):
        assert getattr(c, name) == pytest.approx(ref[name], rel=1e-10, abs=1e-300), name


def test_zero_bias_has_no_cubic_terms():
    c = quantize_circuit(default_netlist())
    assert c.g12 == 0 and c.g21 == 0 and c.g30 == 0 and c.g03 == 0


def test_decoupling_limit():
    base = default_netlist(1e-3, 1e-3)
    small = KineticInductor(Lk0=1e-18, Istar=base.inductor_c.Istar, Lg=0.0)
    net = CircuitNetlist(base.inductor_a, small, base.Lb, base.Ca, base.Cb, base.bias)
    c = quantize_circuit(net)
    assert abs(c.g11) * c.Ltilde_a < 1e-8
    assert c.k < 1e-8


def test_rescaling_invariance():
    net = default_netlist(1e-3, 0.5e-3)
    s = 3.7

    def scaled(ind):
        return KineticInductor(ind.Lk0 * s, ind.Istar, ind.Lg * s, ind.alpha)

    net2 = CircuitNetlist(scaled(net.inductor_a), scaled(net.inductor_c), net.Lb * s, net.Ca / s, net.Cb / s, net.bias)
    a, b = quantize_circuit(net), quantize_circuit(net2)
    assert (a.fa, a.fb) == pytest.approx((b.fa, b.fb), rel=1e-12)
    assert a.k == pytest.approx(b.k, rel=1e-12)


def test_three_wave_coupling_formula():
    c = quantize_circuit(default_netlist(0.0, 2e-3))
    irf = pump_current(1e-9)
    assert irf == pytest.approx(math.sqrt(1e-9 / 50))
    g = three_wave_coupling(c, 2e-3, irf)
    wa, wb = 2 * math.pi * c.fa, 2 * math.pi * c.fb
    assert g == pytest.approx(12 * c.k * 2e-3 * irf / 5.73e-3**2 * math.sqrt(wa * wb))
    p = with_pump(c, 2e-3, irf, 3.17e7)
    assert p.induced_loss == pytest.approx(4 * g**2 / 3.17e7)


def test_pump_attenuation_and_errors():
    assert pump_current(1e-6, attenuation_db=20) == pytest.approx(pump_current(1e-8))
    with pytest.raises(InvalidArgumentError):
        pump_current(-1.0)
    with pytest.raises(InvalidArgumentError):
        induced_loss(1e5, 0.0)
    c = quantize_circuit(default_netlist())
    with pytest.raises(CriticalCurrentError):
        three_wave_coupling(c, 6e-3, 1e-6)
