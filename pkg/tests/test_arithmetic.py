import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cocyclekit.arithmetic import (
    cf_expand,
    dc_check,
    gauss_map,
    half_lattice,
    parse_alpha,
    rdc_scan,
    sigma_alpha_check,
    upsilon_check,
)
from cocyclekit.torus_fourier import UnitaryConstant


# -------------------------------------------------------------- parsing, gauss

def test_parse_alpha_forms():
    g = parse_alpha("golden")
    assert abs(float(g) - (math.sqrt(5) - 1) / 2) < 1e-15
    s = parse_alpha("(0+1*sqrt(2))/1")
    assert abs(float(s) - math.sqrt(2)) < 1e-15
    assert float(parse_alpha("3/8")) == 0.375
    assert abs(float(parse_alpha("0.1234567890123456789")) - 0.12345678901234568) < 1e-16
    with pytest.raises(ValueError):
        parse_alpha("one half")


def test_gauss_map_golden_fixed_point():
    g = parse_alpha("golden")
    assert abs(gauss_map(g) - g) < mp.mpf(10) ** -100


def test_gauss_map_domain():
    with pytest.raises(ValueError):
        gauss_map(0.0)


# ------------------------------------------------------------ continued fractions

def test_cf_golden_fibonacci():
    cf = cf_expand("golden", 21)
    assert cf.a[1:] == [1] * 21
    fib = [1, 1]
    for _ in range(20):
        fib.append(fib[-1] + fib[-2])
    assert cf.q == fib[:22]


def test_cf_silver_pell():
    cf = cf_expand("silver", 12)
    assert cf.a[1:] == [2] * 12
    for m in range(2, 12):
        assert cf.q[m] == 2 * cf.q[m - 1] + cf.q[m - 2]


def test_cf_determinant_identity():
    # q_m p_{m-1} - p_m q_{m-1} = (-1)^m
    for spec in ("golden", "silver", "0.7234871"):
        cf = cf_expand(spec, 15)
        for m in range(1, 15):
            det = cf.q[m] * cf.p[m - 1] - cf.p[m] * cf.q[m - 1]
            assert det == (-1) ** m


def test_cf_beta_identities_high_precision():
    # beta_m = prod tails = (-1)^m (q_m alpha - p_m), and the convergent
    # sandwich 1/(q_m + q_{m+1}) < beta_m < 1/q_{m+1}
    for spec in ("golden", "silver"):
        cf = cf_expand(spec, 21)
        with mp.workdps(120):
            for m in range(20):
                ident = (-1) ** m * (cf.q[m] * cf.alpha - cf.p[m])
                assert abs(cf.betas[m] - ident) < mp.mpf(10) ** -100
                assert 1 / mp.mpf(cf.q[m] + cf.q[m + 1]) < cf.betas[m]
                assert cf.betas[m] < 1 / mp.mpf(cf.q[m + 1])


def test_cf_beta_deep_relative_precision():
    # q_38 alpha - p_38 is a difference of numbers agreeing to ~16 digits;
    # float64 would lose everything, the mpf pipeline keeps ~100 digits
    cf = cf_expand("golden", 40)
    assert cf.betas[38] > 0
    naive = abs(cf.q[38] * float(cf.alpha) - cf.p[38])
    with mp.workdps(120):
        ident = (cf.q[38] * cf.alpha - cf.p[38]) * (-1) ** 38
        assert abs(cf.betas[38] / ident - 1) < mp.mpf(10) ** -80
        assert abs(naive / float(ident) - 1) > 1e-4


def test_cf_rational_raises():
    with pytest.raises(ValueError):
        cf_expand("3/7", 10)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 50), st.integers(3, 50))
def test_cf_random_surd_invariants(b, c):
    # quadratic irrationals (b sqrt(c) mod 1) have eventually periodic a_m and
    # exact determinant identities at any depth
    if int(math.isqrt(c)) ** 2 == c:
        return
    alpha = parse_alpha(f"(0+{b}*sqrt({c}))/{4 * b}")
    cf = cf_expand(alpha, 12)
    for m in range(1, 12):
        assert cf.q[m] * cf.p[m - 1] - cf.p[m] * cf.q[m - 1] == (-1) ** m
        assert cf.q[m] >= cf.q[m - 1]


# ------------------------------------------------------------------- dc scans

def test_dc_golden_frozen():
    r = dc_check(float(parse_alpha("golden")), 2.0, 10_000)
    assert r.argmin_k == (1,)
    assert abs(r.gamma_star - 0.5364620234501587) < 1e-12
    assert r.witness is None


def test_dc_rational_witness():
    r = dc_check(0.5, 2.0, 100)
    assert r.witness == (2,)
    assert r.gamma_star == float("inf")


def test_dc_liouville_cutoff_dependence():
    # alpha = sum 10^{-j!}: the first deep near-resonance has denominator 1e6,
    # so the K = 1e4 scan sees an ordinary gamma* (about 1.48, attained at
    # k = 1) while K = 1e6 reveals a resonance beyond float64 resolution
    liou = float(sum(mp.mpf(10) ** (-mp.factorial(j)) for j in range(1, 6)))
    r4 = dc_check(liou, 2.0, 10_000)
    assert r4.argmin_k == (1,)
    assert abs(r4.gamma_star - 1.4760545161989322) < 1e-9
    r6 = dc_check(liou, 2.0, 1_000_000)
    assert r6.gamma_star > 1e10
    assert r6.argmin_k == (1_000_000,)


def test_dc_monotone_in_K():
    a = float(parse_alpha("0.7234871"))
    g1 = dc_check(a, 1.5, 100).gamma_star
    g2 = dc_check(a, 1.5, 1000).gamma_star
    assert g2 >= g1


def test_dc_two_dim():
    r = dc_check([float(parse_alpha("golden")), math.sqrt(3) - 1], 3.0, 60)
    assert r.gamma_star < float("inf")
    assert len(r.argmin_k) == 2


def test_half_lattice_structure():
    ks = half_lattice(2, 3)
    as_set = {tuple(k) for k in ks}
    assert len(as_set) == len(ks)
    for k in as_set:
        assert 0 < abs(k[0]) + abs(k[1]) <= 3
        assert tuple(-x for x in k) not in as_set
    # full ball size: |{0<|k|_1<=3}| = (2*3*3+2*3+... ) check via direct count
    full = {(i, j) for i in range(-3, 4) for j in range(-3, 4)
            if 0 < abs(i) + abs(j) <= 3}
    assert len(as_set) == len(full) // 2


# --------------------------------------------------------------- phase-gap scans

def test_upsilon_passes_with_margin(golden):
    res = upsilon_check([0.0, 0.31], golden, chi=1e-3, nu=2.0, K=40)
    assert res.ok
    assert res.empirical_chi >= 1e-3
    assert res.witness is None


def test_upsilon_exact_witness(golden):
    # phi_2 - phi_1 = 3 alpha - 1 makes k = (-3), j = -1 cancel exactly
    phi = [0.0, (3 * golden) % 1.0]
    res = upsilon_check(phi, golden, chi=1e-6, nu=2.0, K=10)
    assert not res.ok
    assert res.empirical_chi < 1e-12
    k, p, q, j = res.witness
    assert abs(k[0]) == 3


def test_upsilon_single_phase_vacuous(golden):
    assert upsilon_check([0.25], golden, chi=0.5, nu=2.0, K=10).ok


def test_sigma_matches_upsilon_semantics(golden):
    # for A = diag(e^{2 pi i phi_p}) the two scans agree on clear verdicts:
    # chordal distance 2|sin(pi t)| vs distance-to-integer |t - j| differ by a
    # factor in [4, 2 pi], so compare at thresholds away from that band
    phi = np.array([0.0, 0.31, 0.77])
    a = UnitaryConstant.from_matrix(np.diag(np.exp(2j * np.pi * phi)))
    up = upsilon_check(phi, golden, chi=1e-4, nu=2.0, K=30)
    sg = sigma_alpha_check(a, golden, chi=1e-4, nu=2.0, K=30)
    assert up.ok and sg.ok
    assert sg.empirical_chi <= 2 * math.pi * up.empirical_chi + 1e-12
    assert sg.empirical_chi >= 4 * up.empirical_chi - 1e-12
    # and on an exact resonance both fail
    phi_bad = [0.0, (5 * golden) % 1.0]
    a_bad = UnitaryConstant.from_matrix(np.diag(np.exp(2j * np.pi * np.array(phi_bad))))
    assert not upsilon_check(phi_bad, golden, chi=1e-6, nu=2.0, K=10).ok
    assert not sigma_alpha_check(a_bad, golden, chi=1e-6, nu=2.0, K=10).ok


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_upsilon_scale_equivariance(phi1, alpha):
    # scanning a deeper j range can only lower the minimum
    r1 = upsilon_check([0.0, phi1], alpha, chi=1e-9, nu=1.0, K=8, J=3)
    r2 = upsilon_check([0.0, phi1], alpha, chi=1e-9, nu=1.0, K=8, J=9)
    assert r2.empirical_chi <= r1.empirical_chi + 1e-15


# ---------------------------------------------------------------------- rdc

def test_rdc_golden_silver_all_depths_pass():
    r = rdc_scan("golden", 2.0, 2.0, 10, 2000)
    assert r.passing_ms == list(range(11))
    assert all(abs(g - r.gamma_stars[0]) < 1e-9 for g in r.gamma_stars)
    r = rdc_scan("silver", 2.0, 2.0, 10, 2000)
    assert r.passing_ms == list(range(11))


def test_rdc_rational_diagnostic():
    r = rdc_scan("3/7", 2.0, 2.0, 10, 100)
    assert r.passing_ms == []
    assert "rational" in r.diagnostic
    assert r.depth_M == 10 and r.lattice_K == 100


def test_rdc_cutoffs_labeled():
    r = rdc_scan("golden", 2.0, 2.0, 4, 500)
    assert r.depth_M == 4
    assert r.lattice_K == 500
    assert len(r.gamma_stars) == 5
