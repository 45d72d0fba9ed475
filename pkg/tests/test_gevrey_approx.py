import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cocyclekit.gevrey_approx import (
    AnalyticLadder,
    GevreyFunction,
    almost_analytic_extension,
    build_ladder_green,
    build_ladder_truncation,
    cauchy_kernel,
    dbar_defect,
    dbar_defect_exact,
    dbar_sup_certificate,
    fit_exponent,
    fit_in_frame,
    frame_constant,
    gevrey_model,
    gevrey_norm_estimate,
    inverse_ladder,
    kernel_k0,
    kernel_k1,
    ladder_report,
    stirling_constant,
    taylor_order,
)
from cocyclekit.torus_fourier import constant_map, grid_sup, sub, wiener_norm

from conftest import random_skew_map


def trig_gevrey(K, n, seed, scale=1.0, rho=2.0, L=1.0):
    """Random skew trig polynomial wrapped as a GevreyFunction (d = 1)."""
    f = random_skew_map(1, n, K, scale, seed)
    coeffs = {k[0]: v for k, v in f.coeffs.items()}
    return GevreyFunction(rho=rho, L=L, coeffs=coeffs, n=n, skew=True)


# ------------------------------------------------------------ norm estimate

def test_norm_estimate_cosine_closed_form():
    # cos(2 pi theta) at L = 2 pi: |d^r| = (2 pi)^r, scaled value (r!)^{-rho},
    # maximized at r = 0 where it is exactly 1
    c = np.array([[0.5 + 0j]])
    P = GevreyFunction(rho=2.0, L=2.0 * math.pi, coeffs={1: c, -1: c}, n=1)
    assert gevrey_norm_estimate(P, max_order=6) == pytest.approx(1.0, abs=1e-12)


def test_norm_estimate_constant():
    P = GevreyFunction(rho=1.5, L=3.0, coeffs={0: np.array([[2.5j]])}, n=1)
    assert gevrey_norm_estimate(P, max_order=4) == pytest.approx(2.5, abs=1e-14)


def test_norm_estimate_monotone_in_order():
    P = gevrey_model(2.0, K_cap=64)
    vals = [gevrey_norm_estimate(P, max_order=r, grid_size=256) for r in range(7)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert all(math.isfinite(v) for v in vals)


def test_model_scaled_derivatives_bounded():
    # coefficient decay e^{-sqrt(k)} keeps sum_k (2 pi k)^r e^{-sqrt k} inside
    # C L^r (r!)^rho at L = 8 pi with one fixed prefactor: the saddle of
    # r log(2 pi k) - sqrt(k) sits below the cap through r ~ 11
    P = gevrey_model(2.0, K_cap=512)
    ratios = [P.deriv_sup_bound(r) / (P.L ** r * math.factorial(r) ** P.rho)
              for r in range(12)]
    assert max(ratios) <= 12.0
    assert min(ratios) >= 1.0


# -------------------------------------------------------------- taylor order

def test_taylor_order_frozen_values():
    assert taylor_order(2.0, 25.0, 8e-3) == 2
    assert taylor_order(2.0, 25.0, 2e-3) == 10
    assert taylor_order(3.0, 1.0, 0.02) == 5
    assert taylor_order(2.0, 1.0, 0.7) == 0


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=1e-4, max_value=1e-2),
       st.floats(min_value=1.1, max_value=3.0))
def test_taylor_order_monotone_in_h(h, rho):
    assert taylor_order(rho, 5.0, h) >= taylor_order(rho, 5.0, 2.0 * h)


# ------------------------------------------------------------ jet extension

def test_extension_real_axis_exact():
    P = trig_gevrey(5, 2, seed=101)
    thetas = np.linspace(0.0, 1.0, 7, endpoint=False)
    for t in thetas:
        jet = almost_analytic_extension(P, 0.05, t, 0.0)
        assert np.allclose(jet, P.value(t), atol=1e-13)


def test_extension_matches_analytic_continuation_on_trig_poly():
    # bandwidth 3, h = 0.01 gives jet order 50: the Taylor tail past r = 50
    # at |2 pi k y| < 0.4 is far below 1e-9
    P = trig_gevrey(3, 2, seed=202, rho=2.0, L=1.0)
    h, y = 0.01, 0.015
    fmap = P.as_fourier_map()
    for t in (0.0, 0.31, 0.77):
        jet = almost_analytic_extension(P, h, t, y)
        exact = fmap.eval_at(np.array([t]), y=np.array([y]))
        assert np.abs(jet - exact).max() <= 1e-9


def test_extension_equals_literal_taylor_sum():
    P = gevrey_model(2.0, K_cap=8)
    h, y, t = 4e-3, 5e-3, 0.37
    N = taylor_order(P.rho, P.L, h)
    literal = np.zeros((1, 1), dtype=complex)
    for r in range(N + 1):
        literal = literal + P.deriv(t, r) * (1j * y) ** r / math.factorial(r)
    jet = almost_analytic_extension(P, h, t, y)
    assert np.abs(jet - literal).max() <= 1e-12 * max(1.0, np.abs(literal).max())


def test_extension_skew_reflection():
    # skew P gives F(z)^* = -F(conj z)
    P = trig_gevrey(4, 2, seed=303)
    h, y, t = 0.02, 0.03, 0.21
    up = almost_analytic_extension(P, h, t, y)
    dn = almost_analytic_extension(P, h, t, -y)
    assert np.abs(up.conj().T + dn).max() <= 1e-12 * max(1.0, np.abs(up).max())


def test_extension_rejects_wide_offset():
    P = trig_gevrey(2, 1, seed=404)
    with pytest.raises(ValueError):
        almost_analytic_extension(P, 0.01, 0.0, 0.02)


# -------------------------------------------------------------- dbar defect

def test_dbar_closed_form_matches_difference_quotient():
    P = gevrey_model(2.0, K_cap=16)
    h, y, t = 5e-3, 6e-3, 0.13
    fd = dbar_defect(P, h, t, y, step=1e-5)
    exact = dbar_defect_exact(P, h, t, y)
    scale = max(1.0, np.abs(exact).max())
    assert np.abs(fd - exact).max() <= 1e-6 * scale


def test_dbar_vanishes_for_low_order_jets():
    # jet order exceeding the bandwidth-0 content: constants are analytic
    P = GevreyFunction(rho=2.0, L=1.0, coeffs={0: np.array([[1.0j]])}, n=1, skew=True)
    assert np.abs(dbar_defect_exact(P, 0.01, 0.3, 0.015)).max() == 0.0


def test_dbar_defect_decays_at_gevrey_rate():
    # the certified sup of |dbar| along h_j = h_0 delta^j behaves like
    # exp(-c / h): log(-log defect) on log(1/h) gives an exponent near 1 for
    # rho = 2. The sharper family member (decay 4, so L = pi/2) reaches the
    # asymptotic window at jet orders ~40-120 where the polynomial prefactor
    # no longer biases the fit; pointwise values there sit near 1e-25, which
    # is exactly why the certificate is summed in log space.
    P = gevrey_model(2.0, K_cap=6000, decay=4.0)
    assert P.L == pytest.approx(math.pi / 2.0, abs=1e-12)
    h0, delta = 8e-3, (1.0 / 3.0) ** 0.2
    hs = [h0 * delta ** j for j in range(6)]
    defects = [dbar_sup_certificate(P, h, h) for h in hs]
    assert all(b < a for a, b in zip(defects, defects[1:]))
    fit = fit_exponent(hs, defects)
    assert 0.75 <= fit.slope <= 1.25
    assert fit.r2 >= 0.98


def test_dbar_certificate_dominates_pointwise_values():
    P = gevrey_model(2.0, K_cap=64)
    h = 5e-3
    cert = dbar_sup_certificate(P, h, h)
    for t in np.arange(16) / 16.0:
        assert np.abs(dbar_defect_exact(P, h, t, h)).max() <= cert * (1.0 + 1e-12)


# ------------------------------------------------------------------- kernel

def test_kernel_residue_and_symmetry():
    z = np.array([0.3 + 0.1j, -0.2 + 0.05j, 0.45 - 0.3j])
    assert np.allclose(cauchy_kernel(-z), -cauchy_kernel(z), atol=1e-12)
    near = 1e-9 + 1e-9j
    assert cauchy_kernel(near) * near == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(cauchy_kernel(z + 1.0), cauchy_kernel(z), atol=1e-9)


def test_kernel_tail_partial_sums_converge_to_closed_form():
    z = 0.23 + 0.04j
    closed = kernel_k1(z)
    errs = [abs(kernel_k1(z, terms=T) - closed) for T in (10, 100, 1000)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 3.0 * abs(2.0 * z) / 1000.0
    assert abs(cauchy_kernel(z) - (kernel_k0(z) + closed)) <= 1e-14


# ------------------------------------------------------------- green ladder

def test_green_reproduces_trig_polynomial():
    P = trig_gevrey(4, 2, seed=505, rho=2.0, L=1.0)
    ladder = build_ladder_green(P, h0=0.01, delta=0.7, J=2)
    target = P.as_fourier_map()
    for m in ladder.members:
        assert grid_sup(sub(m, target)) <= 1e-9
    assert all(g <= 1e-9 for g in ladder.gap_norms)


def test_green_members_keep_skew_flag():
    P = trig_gevrey(3, 2, seed=606, rho=2.0, L=1.0)
    ladder = build_ladder_green(P, h0=0.01, delta=0.7, J=1)
    assert all(m.skew for m in ladder.members)


def test_green_model_gap_decay_fits_in_inverse_h_frame():
    # window chosen so the integer jet order advances at every rung and the
    # order-N saddle stays inside the model's spectral cap (N <= 13)
    P = gevrey_model(2.0)
    ladder = build_ladder_green(P, h0=4.5e-3, delta=0.8, J=5)
    fit = fit_in_frame(ladder.hs[:-1], ladder.gap_norms, frame=1.0)
    assert fit.slope < 0.0
    assert fit.r2 >= 0.98
    sups = ladder.sup_errors
    assert all(b <= a * (1.0 + 1e-9) for a, b in zip(sups, sups[1:]))


def test_green_rejects_wide_initial_strip():
    P = gevrey_model(2.0, K_cap=16)
    with pytest.raises(ValueError):
        build_ladder_green(P, h0=0.05, delta=0.5, J=1)


# -------------------------------------------------------- truncation ladder

def test_truncation_exact_once_bandwidth_covered():
    P = trig_gevrey(4, 1, seed=707, rho=2.0, L=1.0)
    ladder = build_ladder_truncation(P, h0=0.05, delta=0.5, J=3)
    assert ladder.orders[0] >= 4
    assert all(g == 0.0 for g in ladder.gap_norms)
    assert all(s <= 1e-14 for s in ladder.sup_errors)


def test_truncation_exponent_near_inverse_rho():
    # sharp-decay member so the gap magnitudes dominate the fit's prefactor:
    # measured exponent lands on 1/rho = 0.5
    P = gevrey_model(2.0, K_cap=6000, decay=4.0)
    ladder = build_ladder_truncation(P, h0=8e-3, delta=(1.0 / 3.0) ** 0.2, J=6)
    fit = fit_exponent(ladder.hs[:-1], ladder.gap_norms)
    assert 0.3 <= fit.slope <= 0.7
    assert fit.r2 >= 0.95


def test_green_beats_truncation_slope_ratio():
    # same frame, same window: the smoothing ladder's decay in h^{-1} must be
    # steeper by half again
    P = gevrey_model(2.0)
    h0, delta, J = 4.5e-3, 0.8, 5
    green = build_ladder_green(P, h0=h0, delta=delta, J=J)
    trunc = build_ladder_truncation(P, h0=h0, delta=delta, J=J)
    fg = fit_in_frame(green.hs[:-1], green.gap_norms, frame=1.0)
    ft = fit_in_frame(trunc.hs[:-1], trunc.gap_norms, frame=1.0)
    assert fg.slope < 0.0 and ft.slope < 0.0
    assert fg.slope / ft.slope >= 1.5


# ---------------------------------------------------------------------- fits

def test_fit_in_frame_recovers_planted_slope():
    hs = [0.1 * 0.8 ** j for j in range(6)]
    errs = [math.exp(-3.0 / h + 0.5) for h in hs]
    fit = fit_in_frame(hs, errs, frame=1.0)
    assert fit.slope == pytest.approx(-3.0, rel=1e-9)
    assert fit.intercept == pytest.approx(0.5, abs=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_exponent_recovers_planted_beta():
    hs = [0.05 * 0.7 ** j for j in range(7)]
    errs = [math.exp(-2.0 * h ** -0.5) for h in hs]
    fit = fit_exponent(hs, errs)
    assert fit.slope == pytest.approx(0.5, rel=0.05)


# ------------------------------------------------------------ inverse ladder

def make_synthetic_ladder(hs, gaps, n=1):
    """Ladder of constant maps whose consecutive gaps are exactly the given
    values in every Wiener norm. Members are tail sums (descending toward 0)
    so a tiny deep gap is never absorbed into a large accumulated value."""
    tails = [0.0] * len(hs)
    for j in range(len(gaps) - 1, -1, -1):
        tails[j] = gaps[j] + tails[j + 1]
    members = [constant_map(np.array([[t * 1j]]), 1) for t in tails]
    recorded = [wiener_norm(sub(members[j + 1], members[j]), hs[j + 1])
                for j in range(len(gaps))]
    sups = [grid_sup(sub(m, members[-1])) for m in members]
    return AnalyticLadder(kind="synthetic", rho=2.0, L=1.0, h0=hs[0],
                          delta=hs[1] / hs[0], hs=tuple(hs),
                          members=tuple(members), gap_norms=tuple(recorded),
                          sup_errors=tuple(sups),
                          dbar_defects=tuple(0.0 for _ in hs),
                          orders=tuple(0 for _ in hs))


def test_inverse_ladder_constant_sequence_trivially_passes():
    hs = [0.1 * 0.7 ** j for j in range(5)]
    ladder = make_synthetic_ladder(hs, [0.0] * 4)
    rep = inverse_ladder(ladder, rho=2.0, L=1.0, C0=1.0, frame_c=1.0)
    assert rep.hypothesis_ok and rep.offending_j is None
    assert rep.cauchy_ok
    assert rep.slope is None and rep.slope_ok


def test_inverse_ladder_accepts_planted_gevrey_rate():
    hs = [0.1 * 0.7 ** j for j in range(7)]
    gaps = [2.0 * math.exp(-1.0 / h) for h in hs[:-1]]
    ladder = make_synthetic_ladder(hs, gaps)
    rep = inverse_ladder(ladder, rho=2.0, L=1.0, C0=2.5, frame_c=1.0, max_order=4)
    assert rep.hypothesis_ok
    assert rep.C0_measured == pytest.approx(2.0, rel=1e-6)
    assert rep.slope == pytest.approx(-1.0, rel=1e-6)
    assert rep.slope_ok and rep.cauchy_ok


def test_inverse_ladder_on_green_output():
    P = gevrey_model(2.0, K_cap=128)
    ladder = build_ladder_green(P, h0=8e-3, delta=(1.0 / 3.0) ** 0.2, J=5)
    probe = inverse_ladder(ladder, rho=2.0, L=P.L, C0=1.0, max_order=6)
    rep = inverse_ladder(ladder, rho=2.0, L=P.L, C0=1.01 * probe.C0_measured,
                         max_order=6)
    assert rep.hypothesis_ok
    assert rep.cauchy_ok
    assert all(m <= 1.0 for m in rep.cauchy_margins)
    assert math.isfinite(rep.c0L_effective) and rep.c0L_effective > 0.0


def test_inverse_ladder_rejects_shallow_decay():
    # gaps e^{-h^{-1/2}} look fine on the widest strips but cross the
    # e^{-1/h} envelope mid ladder: the offending rung is reported
    hs = [0.2 * 0.74 ** j for j in range(10)]
    gaps = [math.exp(-h ** -0.5) for h in hs[:-1]]
    ladder = make_synthetic_ladder(hs, gaps)
    rep = inverse_ladder(ladder, rho=2.0, L=1.0, C0=math.exp(8.0), frame_c=1.0)
    assert not rep.hypothesis_ok
    assert rep.offending_j is not None and rep.offending_j >= 1
    assert not rep.slope_ok
    beta = fit_exponent(hs[:-1], gaps)
    assert 0.4 <= beta.slope <= 0.6


def test_frame_constant_value():
    assert frame_constant(2.0) == pytest.approx(4.0, abs=1e-14)
    assert frame_constant(1.5) == pytest.approx(2.0 * 0.25 ** -0.5, abs=1e-12)


# ------------------------------------------------------------------ stirling

def test_stirling_constant_frozen_values():
    c_half = stirling_constant(2.0, [0.5])
    assert c_half == pytest.approx(0.75 * math.exp(3.0) / math.sqrt(3.0), rel=1e-12)
    c_one = stirling_constant(2.0, [1.0])
    assert c_one == pytest.approx(math.sqrt(2.0) * math.exp(2.0), rel=1e-12)


def test_stirling_bound_holds_with_measured_constant():
    rho = 2.0
    ts = [0.5, 0.2, 0.05, 0.01]
    C = stirling_constant(rho, ts)
    for t in ts:
        m_cap = int(math.floor(t ** (-1.0 / (rho - 1.0)) + 1.0))
        for m in range(1, m_cap + 1):
            lhs = t ** m * math.factorial(m) ** (rho - 1.0)
            rhs = C * m ** ((rho - 1.0) / 2.0) * math.exp(-(rho - 1.0) * m)
            assert lhs <= rhs * (1.0 + 1e-12)


# ------------------------------------------------------------------- report

def test_ladder_report_is_json_ready():
    P = trig_gevrey(3, 1, seed=808, rho=2.0, L=1.0)
    ladder = build_ladder_green(P, h0=0.01, delta=0.7, J=1)
    fit = fit_in_frame([0.1, 0.05, 0.025], [1e-2, 1e-4, 1e-8], frame=1.0)
    rep = ladder_report(ladder, fit)
    blob = json.loads(json.dumps(rep))
    assert blob["kind"] == "green"
    assert len(blob["levels"]) == 2
    assert set(blob["levels"][0]) == {"h", "gap_norm", "sup_err", "dbar_defect"}
    assert blob["levels"][-1]["gap_norm"] is None
    assert blob["fit"]["frame"] == 1.0
