import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cocyclekit import torus_fourier as tf
from cocyclekit._rng import spawn_rng
from cocyclekit.nondegeneracy import (
    GammaCert,
    PiCert,
    bracket0,
    bracket_estimate,
    gamma_member,
    pi_apply,
    pi_cert_of_map,
    pi_compose,
)

from conftest import random_skew_map


def haar_constant(n, seed):
    rng = spawn_rng(seed, 99)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))[None, :]


def character_map(freqs):
    n = len(freqs)
    coeffs = {}
    for q, k in enumerate(freqs):
        key = (k,) if isinstance(k, int) else tuple(k)
        mat = coeffs.setdefault(key, np.zeros((n, n), dtype=complex))
        mat[q, q] = 1.0
    return tf.FourierMap(len(next(iter(coeffs))), n, coeffs)


# ------------------------------------------------------------------ bracket0

def test_bracket0_single_mode_scalar():
    b = tf.FourierMap(1, 1, {(1,): 1.0 + 0j})
    assert bracket0(b) == 1.0


def test_bracket0_identity_n3():
    assert bracket0(tf.identity_map(1, 3)) == 1.0


def test_bracket0_zero_map():
    assert bracket0(tf.zero_map(1, 2)) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_bracket0_constant_unitary_floor(seed):
    q = haar_constant(2, seed)
    assert bracket0(tf.constant_map(q, d=1)) >= 1 / math.sqrt(2) - 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_bracket0_right_frame_inequality(seed):
    # bracket0(S B T) >= (1/n) bracket0(B) for unitary frames
    b = random_skew_map(1, 2, K=2, scale=0.8, seed=seed)
    s = haar_constant(2, seed + 1)
    t = haar_constant(2, seed + 2)
    framed = tf.conj_by_constant(s, b, u_inv=t)
    assert bracket0(framed) >= bracket0(b) / 2 - 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(-3, 3), st.integers(-3, 3))
def test_bracket0_framed_character_floor(seed, k1, k2):
    w = character_map([k1, k2])
    s = haar_constant(2, seed)
    t = haar_constant(2, seed + 1)
    assert bracket0(tf.conj_by_constant(s, w, u_inv=t)) >= 2 ** -1.5 - 1e-12


# ----------------------------------------------------------- bracket_estimate

def test_estimate_constant_u2():
    b = tf.constant_map(haar_constant(2, 7), d=1)
    est = bracket_estimate(b, 1000, seed=42)
    assert abs(est.bracket_upper * math.sqrt(2) - 1) < 0.05
    assert est.bracket_upper <= est.bracket0 + 1e-15
    assert est.samples == 1000 and est.seed == 42


def test_estimate_constant_u3():
    est = bracket_estimate(tf.identity_map(1, 3), 1000, seed=42)
    assert abs(est.bracket_upper * math.sqrt(3) - 1) < 0.05


def test_estimate_deterministic():
    b = tf.constant_map(haar_constant(2, 7), d=1)
    a = bracket_estimate(b, 300, seed=11)
    c = bracket_estimate(b, 300, seed=11)
    assert a.bracket_upper == c.bracket_upper


def test_estimate_n1_exact():
    b = tf.FourierMap(1, 1, {(0,): 0.3 + 0j, (2,): 0.55 + 0j, (-2,): -0.55 + 0j})
    est = bracket_estimate(b, 10, seed=0)
    assert est.bracket_upper == 0.55 == est.bracket0


def test_estimate_character_floor():
    w = character_map([1, -2])
    est = bracket_estimate(w, 1000, seed=5)
    assert est.bracket_upper >= 2 ** -1.5 - 1e-12


def test_estimate_monotone_in_samples():
    b = tf.constant_map(haar_constant(2, 7), d=1)
    e50 = bracket_estimate(b, 50, seed=42)
    e200 = bracket_estimate(b, 200, seed=42)
    assert e200.bracket_upper <= e50.bracket_upper + 1e-15


def test_estimate_truncation_exact_past_support():
    b = random_skew_map(1, 2, K=3, scale=1.0, seed=31)
    full = bracket_estimate(b, 150, seed=9).bracket_upper
    assert bracket_estimate(tf.truncate(b, 3), 150, seed=9).bracket_upper == full
    assert bracket_estimate(tf.truncate(b, 10), 150, seed=9).bracket_upper == full


def test_estimate_rejects_zero_samples():
    with pytest.raises(ValueError):
        bracket_estimate(tf.identity_map(1, 2), 0, seed=1)


# --------------------------------------------------------------- gamma_member

def test_gamma_member_identity():
    res = gamma_member(tf.identity_map(1, 2), GammaCert(0, 1 / (2 * math.sqrt(2))),
                       400, seed=3)
    assert res.member
    assert abs(res.margin - 1 / (2 * math.sqrt(2))) < 0.05


def test_gamma_member_mode_beyond_truncation():
    b = tf.FourierMap(1, 2, {(3,): np.eye(2, dtype=complex)})
    res = gamma_member(b, GammaCert(2, 1e-6), 50, seed=3)
    assert not res.member
    assert res.estimate.bracket_upper == 0.0


def test_gamma_member_half_bracket():
    # any map sits in Gamma(N, upper/2) once N covers its support and the
    # estimate has converged near the true bracket
    b = random_skew_map(1, 2, K=2, scale=0.7, seed=12)
    est = bracket_estimate(b, 800, seed=4)
    res = gamma_member(b, GammaCert(2, est.bracket_upper / 2), 800, seed=4)
    assert res.member


# ------------------------------------------------------------- cert algebra

def test_pi_compose_identity():
    c = PiCert(3, 0.5, 0.01)
    ident = PiCert(0, 1.0, 0.0)
    assert pi_compose(c, ident) == c
    assert pi_compose(ident, c) == c


def test_pi_compose_example():
    out = pi_compose(PiCert(4, 0.5, 0.0), PiCert(0, 1.0, 0.02))
    assert out == PiCert(4, 0.5, 0.02)


def test_pi_compose_associative():
    rng = spawn_rng(17, 0)
    for _ in range(20):
        certs = [PiCert(int(rng.integers(0, 9)), float(rng.uniform(0.1, 1.0)),
                        float(rng.uniform(0.0, 0.2))) for _ in range(3)]
        left = pi_compose(pi_compose(certs[0], certs[1]), certs[2])
        right = pi_compose(certs[0], pi_compose(certs[1], certs[2]))
        assert left.N_tilde == right.N_tilde
        assert left.xi == pytest.approx(right.xi, rel=1e-12)
        assert left.eps == pytest.approx(right.eps, rel=1e-12, abs=1e-15)


def test_pi_apply_examples():
    g = GammaCert(5, 0.4)
    assert pi_apply(PiCert(0, 1.0, 0.0), g).to_gamma() == g
    halved = pi_apply(PiCert(3, 0.5, 0.0), g)
    assert halved.to_gamma() == GammaCert(8, 0.2)
    spent = pi_apply(PiCert(0, 1.0, 0.1), g)
    assert spent.N == 5
    assert spent.eps == pytest.approx(0.3)


def test_pi_apply_vacuous():
    out = pi_apply(PiCert(0, 0.5, 0.3), GammaCert(2, 0.4))
    assert out.vacuous
    with pytest.raises(ValueError):
        out.to_gamma()


def test_cert_validation():
    with pytest.raises(ValueError):
        GammaCert(-1, 0.5)
    with pytest.raises(ValueError):
        GammaCert(2, 0.0)
    with pytest.raises(ValueError):
        PiCert(0, 1.5, 0.0)
    with pytest.raises(ValueError):
        PiCert(0, 0.5, -0.1)


# ------------------------------------------------------------ pi_cert_of_map

def test_cert_of_constant():
    c = pi_cert_of_map(tf.constant_map(haar_constant(2, 3), d=1), "constant")
    assert c == PiCert(0, 1.0, 0.0)
    with pytest.raises(ValueError):
        pi_cert_of_map(character_map([1, 0]), "constant")


def test_cert_of_character():
    c = pi_cert_of_map(character_map([1, -2]), "character")
    assert c == PiCert(2, 0.5, 0.0)
    bad = tf.FourierMap(1, 2, {(1,): np.array([[0, 1], [0, 0]], dtype=complex)})
    with pytest.raises(ValueError):
        pi_cert_of_map(bad, "character")


def test_cert_of_near_identity():
    y = random_skew_map(1, 2, K=2, scale=0.004, seed=8)
    p = tf.exp_map(y)
    c = pi_cert_of_map(p, "near-identity")
    assert c.N_tilde == 0 and c.xi == 1.0
    assert 0 < c.eps <= tf.wiener_norm(y) * 1.01


def test_cert_unrecognized_kind():
    with pytest.raises(ValueError):
        pi_cert_of_map(tf.identity_map(1, 2), "diagonal")


def test_composed_cert_verified_on_product():
    # B = I in Gamma(0, 1/sqrt(2)); multiply by a character then a
    # near-identity factor and check membership for the composed certificate
    w = character_map([1, -2])
    y = random_skew_map(1, 2, K=1, scale=0.008, seed=21)
    p = tf.exp_map(y)
    cw = pi_cert_of_map(w, "character")
    cp = pi_cert_of_map(p, "near-identity")
    composed = pi_compose(cw, cp)
    applied = pi_apply(composed, GammaCert(0, 1 / math.sqrt(2)))
    assert not applied.vacuous
    product = tf.multiply(w, p)
    res = gamma_member(product, applied.to_gamma(), 600, seed=14)
    assert res.member
    assert res.margin > 0.05
