"""Degeneracy brackets and truncation certificates for matrix-valued maps.

A map B: T^d -> M_n is totally degenerate when constant unitary frames S, T
exist making a full row of S B(theta) T vanish a.e.  Distance to that set is
measured by two brackets built from the entrywise coefficient suprema

    btilde_{p,q} = sup_k |bhat_{p,q}(k)|,
    bracket0(B)  = min_p max_q btilde_{p,q},
    bracket(B)   = inf over S, T in U(n) of bracket0(S B T).

bracket0 is exact for finitely supported maps (sup over an empty tail is a
max over the stored coefficients).  bracket is an infimum over the compact
group U(n)^2 with no closed form in general, so `bracket_estimate` reports a
seeded Monte-Carlo plus local-descent upper bound and records the sample
count.  Lower bounds for the maps that actually occur downstream come from
exact special cases instead:

    constant B in U(n)        -> bracket(B) = 1/sqrt(n)
    diagonal character map W  -> bracket(W) >= n^{-3/2}
    n = 1                     -> bracket(B) = bracket0(B) = sup_k |bhat(k)|

A map is (N, eps)-non-degenerate when bracket(T_N B) >= eps; those pairs are
carried around as `GammaCert`.  Multipliers P acting on such maps from the
right are summarized by `PiCert(N_tilde, xi, eps)`: if B is (N, delta)-non-
degenerate then B P is (N + N_tilde, xi delta - eps)-non-degenerate.  The
certificates compose by an exact algebra (`pi_compose`, `pi_apply`) that the
numerical estimates here are used to sanity-check, never to replace.
"""

import dataclasses
import math

import numpy as np

from ._rng import spawn_rng
from .torus_fourier import (
    FourierMap,
    expm_skew_stack,
    grid_sup,
    identity_map,
    spec_norm,
    sub,
    truncate,
)

DESCENT_ITERS = 50
_BATCH = 256


@dataclasses.dataclass(frozen=True)
class DegeneracyEstimate:
    """Exact bracket0 next to a Monte-Carlo upper estimate of bracket."""

    bracket0: float
    bracket_upper: float
    samples: int
    seed: int


@dataclasses.dataclass(frozen=True)
class GammaCert:
    """Truncation order N and lower bound eps certified for bracket(T_N B)."""

    N: int
    eps: float

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("truncation order must be nonnegative")
        if not self.eps > 0:
            raise ValueError("certificate threshold must be positive")


@dataclasses.dataclass(frozen=True)
class PiCert:
    """Right-multiplier certificate: maps (N, delta) into (N + N_tilde, xi delta - eps)."""

    N_tilde: int
    xi: float
    eps: float

    def __post_init__(self):
        if not 0 < self.xi <= 1:
            raise ValueError("contraction factor xi must lie in (0, 1]")
        if self.eps < 0:
            raise ValueError("certificate loss eps must be nonnegative")


@dataclasses.dataclass(frozen=True)
class AppliedCert:
    """Result of pushing a GammaCert through a PiCert; eps may be spent."""

    N: int
    eps: float
    vacuous: bool

    def to_gamma(self):
        if self.vacuous:
            raise ValueError("certificate is vacuous: xi*delta <= eps")
        return GammaCert(self.N, self.eps)


@dataclasses.dataclass(frozen=True)
class GammaMembership:
    member: bool
    margin: float
    estimate: DegeneracyEstimate


def _coeff_stack(b):
    ks = b.support()
    if not ks:
        return np.zeros((1, b.n, b.n), dtype=complex)
    return np.stack([np.atleast_2d(b.coeff(k)) for k in ks])


def _row_min_value(stack):
    # min over rows of the max entry of btilde = max_k |entries|
    btilde = np.abs(stack).max(axis=0)
    return float(btilde.max(axis=-1).min(axis=-1))


def _pair_values(s_batch, stack, t_batch):
    prod = np.einsum("apq,mqr,art->ampt", s_batch, stack, t_batch)
    btilde = np.abs(prod).max(axis=1)
    return btilde.max(axis=-1).min(axis=-1)


def bracket0(b):
    """min_p max_q sup_k |bhat_{p,q}(k)|, exact on the stored coefficients."""
    return _row_min_value(_coeff_stack(b))


def _haar_unitary(rng, n, count):
    z = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(z / math.sqrt(2.0))
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


def _random_skew(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (z - z.conj().T) / 2.0


def bracket_estimate(b, samples, seed):
    """Upper estimate of bracket(b) from seeded Haar pairs plus local descent.

    Sample i always draws from the stream derived as (seed, 0, i), so the
    running minimum over a longer run extends a shorter one and the estimate
    is monotone nonincreasing in `samples`.  The best pair found is refined
    by 50 tangent-space descent iterations with step halving.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    b0 = bracket0(b)
    if b.n == 1:
        # unimodular frames cannot change coefficient moduli
        return DegeneracyEstimate(b0, b0, samples, int(seed))
    stack = _coeff_stack(b)
    best_val = b0
    best_pair = (np.eye(b.n, dtype=complex), np.eye(b.n, dtype=complex))
    for start in range(0, samples, _BATCH):
        count = min(_BATCH, samples - start)
        s_batch = np.empty((count, b.n, b.n), dtype=complex)
        t_batch = np.empty((count, b.n, b.n), dtype=complex)
        for i in range(count):
            rng = spawn_rng(seed, 0, start + i)
            s_batch[i], t_batch[i] = _haar_unitary(rng, b.n, 2)
        vals = _pair_values(s_batch, stack, t_batch)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = float(vals[i])
            best_pair = (s_batch[i].copy(), t_batch[i].copy())

    s, t = best_pair
    rng = spawn_rng(seed, 1)
    step = 0.25
    for _ in range(DESCENT_ITERS):
        x = _random_skew(rng, b.n)
        y = _random_skew(rng, b.n)
        s2 = expm_skew_stack(step * x) @ s
        t2 = t @ expm_skew_stack(step * y)
        val = _pair_values(s2[None], stack, t2[None])[0]
        if val < best_val:
            best_val = float(val)
            s, t = s2, t2
        else:
            step *= 0.5
    return DegeneracyEstimate(b0, best_val, samples, int(seed))


def gamma_member(b, cert, samples, seed):
    """Numerical check of bracket(T_N b) >= eps with the margin reported.

    The Monte-Carlo value is an upper bound of the true bracket converging
    from above, so memberships at clear margins are meaningful and
    razor-thin ones are not; the margin is returned for that judgement.
    """
    est = bracket_estimate(truncate(b, cert.N), samples, seed)
    margin = est.bracket_upper - cert.eps
    return GammaMembership(margin >= 0.0, margin, est)


def pi_compose(c1, c2):
    """Certificate of the product multiplier: apply c1 first, then c2."""
    return PiCert(c1.N_tilde + c2.N_tilde, c1.xi * c2.xi, c2.xi * c1.eps + c2.eps)


def pi_apply(cert, g):
    """Push a GammaCert through a multiplier certificate."""
    eps = cert.xi * g.eps - cert.eps
    return AppliedCert(g.N + cert.N_tilde, eps, eps <= 0.0)


def _is_unitary(mat, tol=1e-9):
    return spec_norm(mat @ mat.conj().T - np.eye(mat.shape[0])) <= tol


def _character_frequencies(p, tol=1e-9):
    # diagonal map with one unimodular mode per diagonal slot, zero elsewhere
    freqs = [None] * p.n
    for k in p.support():
        mat = np.atleast_2d(p.coeff(k))
        off = mat - np.diag(np.diagonal(mat))
        if spec_norm(off) > tol:
            return None
        for q in range(p.n):
            v = mat[q, q]
            if abs(v) <= tol:
                continue
            if abs(abs(v) - 1.0) > tol or freqs[q] is not None:
                return None
            freqs[q] = k
    if any(f is None for f in freqs):
        return None
    return freqs


def pi_cert_of_map(p, kind):
    """Exact PiCert for the three recognized multiplier shapes.

    kind "constant": constant unitary -> (0, 1, 0).
    kind "character": exp(2 pi i diag(<k^(q), theta>)) -> (max |k^(q)|_1, 1/n, 0).
    kind "near-identity": unitary-valued P -> (0, 1, sup |P - I|) from a grid sup.
    """
    if kind == "constant":
        if not p.is_constant(tol=1e-12):
            raise ValueError("map is not constant")
        if not _is_unitary(np.atleast_2d(p.constant_part())):
            raise ValueError("constant part is not unitary")
        return PiCert(0, 1.0, 0.0)
    if kind == "character":
        freqs = _character_frequencies(p)
        if freqs is None:
            raise ValueError("map is not a diagonal character map")
        return PiCert(max(sum(abs(x) for x in k) for k in freqs), 1.0 / p.n, 0.0)
    if kind == "near-identity":
        eps = grid_sup(sub(p, identity_map(p.d, p.n)))
        return PiCert(0, 1.0, float(eps))
    raise ValueError(f"unrecognized multiplier kind: {kind!r}")
