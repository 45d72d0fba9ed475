"""Arithmetic of frequencies: continued fractions, Diophantine scans, phase gaps.

Working precision matters in two places. Continued-fraction data is computed
with mpmath at 120 digits because the products beta_m = alpha_0 ... alpha_m
underflow float64 around depth 35 and partial quotients amplify representation
error like q_m^2. Brute-force lattice scans (dc_check and friends) run in
float64 over |k|_1 <= K, which keeps 12+ digits for every cutoff used here.

Scanned quantities:

    dc_check       min over 0 < |k|_1 <= K of |e^{2 pi i <k,alpha>} - 1| |k|^tau,
                   reported as gamma* = 1/min (large gamma* = near resonance)
    upsilon_check  min over p != q, |k| <= K, |j| <= J of
                   |<k,alpha> + phi_p - phi_q - j| (1+|k|)^nu
    sigma_check    same with the chordal distance |lam_p - lam_q e^{2 pi i <k,alpha>}|

The same-index (p = q) versions of the gap conditions reduce to the
Diophantine condition on alpha itself, which is dc_check's job; the phase-gap
scans therefore run over distinct index pairs only.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

CF_DPS = 120

_SURD_RE = re.compile(
    r"^\(?\s*(-?\d+)\s*([+-])\s*(\d+)\s*\*\s*sqrt\(\s*(\d+)\s*\)\s*\)?\s*/\s*(\d+)$")
_RATIONAL_RE = re.compile(r"^(-?\d+)\s*/\s*(\d+)$")


def parse_alpha(spec):
    """Parse a frequency given as float, decimal string, 'p/q', a quadratic
    surd '(a+b*sqrt(c))/e', or the keywords 'golden' / 'silver'. Returns an
    mpmath mpf at 120 digits."""
    with mp.workdps(CF_DPS):
        if isinstance(spec, (int, float)):
            return mp.mpf(spec)
        s = str(spec).strip().lower()
        if s == "golden":
            return (mp.sqrt(5) - 1) / 2
        if s == "silver":
            return mp.sqrt(2) - 1
        m = _SURD_RE.match(s)
        if m:
            a, sign, b, c, e = m.groups()
            root = mp.mpf(int(b)) * mp.sqrt(int(c))
            num = mp.mpf(int(a)) + (root if sign == "+" else -root)
            return num / mp.mpf(int(e))
        m = _RATIONAL_RE.match(s)
        if m:
            return mp.mpf(int(m.group(1))) / mp.mpf(int(m.group(2)))
        try:
            return mp.mpf(s)
        except ValueError as exc:
            raise ValueError(f"cannot parse frequency {spec!r}") from exc


def gauss_map(alpha):
    """G(alpha) = 1/alpha mod 1, at working precision."""
    with mp.workdps(CF_DPS):
        a = mp.mpf(alpha)
        if a <= 0 or a >= 1:
            raise ValueError("gauss map needs alpha in (0,1)")
        inv = 1 / a
        return inv - mp.floor(inv)


@dataclass(frozen=True)
class ContinuedFraction:
    """Depth-M continued fraction data of alpha in (0,1).

    a[m] are the partial quotients (a[0] = 0 by convention), p[m]/q[m] the
    convergents with q[0] = 1, p[0] = 0 and q[m] = a[m] q[m-1] + q[m-2].
    tails[m] = G^m(alpha) and betas[m] = tails[0] * ... * tails[m], which also
    equals (-1)^m (q_m alpha - p_m). All mpf fields carry 120 digits.
    """

    alpha: object
    depth: int
    a: list
    p: list
    q: list
    tails: list
    betas: list

    def beta(self, m):
        return self.betas[m]

    def beta_float(self, m):
        return float(self.betas[m])

    def convergent_matrix(self, m):
        """Q_m = [[q_m, p_m], [q_{m-1}, p_{m-1}]], determinant (-1)^m."""
        if m == 0:
            return np.array([[1, 0], [0, 1]], dtype=object)
        return np.array([[self.q[m], self.p[m]],
                         [self.q[m - 1], self.p[m - 1]]], dtype=object)


def cf_expand(alpha, M):
    """Continued-fraction data down to depth M.

    Raises ValueError when a tail collapses to zero at working precision,
    which means alpha is indistinguishable from a rational before depth M.
    """
    with mp.workdps(CF_DPS):
        a0 = parse_alpha(alpha) if isinstance(alpha, str) else mp.mpf(alpha)
        if a0 <= 0 or a0 >= 1:
            a0 = a0 - mp.floor(a0)
        if a0 == 0:
            raise ValueError("alpha is an integer")
        eps_rat = mp.mpf(10) ** (-(CF_DPS - 15))
        a_list = [0]
        p_list = [mp.mpf(0)]
        q_list = [mp.mpf(1)]
        p_prev, q_prev = mp.mpf(1), mp.mpf(0)   # index -1 values
        tails = [a0]
        betas = [a0]
        cur = a0
        for m in range(1, M + 1):
            if cur < eps_rat:
                raise ValueError(
                    f"alpha indistinguishable from rational at depth {m} "
                    f"(tail {float(cur):.3e} below working precision)")
            inv = 1 / cur
            am = int(mp.floor(inv))
            cur = inv - am
            a_list.append(am)
            p_new = am * p_list[-1] + p_prev
            q_new = am * q_list[-1] + q_prev
            p_prev, q_prev = p_list[-1], q_list[-1]
            p_list.append(p_new)
            q_list.append(q_new)
            tails.append(cur)
            betas.append(betas[-1] * cur)
        return ContinuedFraction(
            alpha=a0, depth=M,
            a=a_list,
            p=[int(x) for x in p_list],
            q=[int(x) for x in q_list],
            tails=tails, betas=betas)


# ------------------------------------------------------------------ lattice scans

def half_lattice(d, K):
    """All k in Z^d with 0 < |k|_1 <= K and first nonzero component > 0.

    The scanned quantities are symmetric under k -> -k, so half the lattice
    suffices. Returns an (M, d) int array in (|k|, lex) order.
    """
    if d == 1:
        return np.arange(1, K + 1, dtype=int)[:, None]
    if d > 3:
        raise ValueError("lattice scan supports d <= 3")
    out = []
    rng = range(-K, K + 1)
    for k in itertools.product(rng, repeat=d):
        if sum(abs(x) for x in k) == 0 or sum(abs(x) for x in k) > K:
            continue
        nz = next(x for x in k if x != 0)
        if nz > 0:
            out.append(k)
    arr = np.array(sorted(out, key=lambda k: (sum(abs(x) for x in k), k)), dtype=int)
    return arr


@dataclass(frozen=True)
class DcResult:
    gamma_star: float
    min_value: float
    argmin_k: tuple
    tau: float
    K: int
    witness: tuple = None   # exact resonance <k,alpha> in Z, if hit


def dc_check(alpha, tau, K):
    """Brute-force Diophantine scan of |e^{2 pi i <k,alpha>} - 1| |k|_1^tau.

    gamma_star is the smallest gamma for which alpha passes DC(gamma,tau) at
    this cutoff; an exact zero is returned as a rational witness.
    """
    al = np.atleast_1d(np.asarray(alpha, dtype=float))
    ks = half_lattice(al.size, int(K))
    frac = (ks @ al) % 1.0
    vals = 2.0 * np.abs(np.sin(np.pi * frac))
    l1k = np.abs(ks).sum(axis=1).astype(float)
    prod = vals * l1k ** float(tau)
    i = int(np.argmin(prod))
    witness = tuple(int(x) for x in ks[i]) if vals[i] == 0.0 else None
    gamma_star = float("inf") if prod[i] == 0.0 else 1.0 / float(prod[i])
    return DcResult(gamma_star=gamma_star, min_value=float(prod[i]),
                    argmin_k=tuple(int(x) for x in ks[i]),
                    tau=float(tau), K=int(K), witness=witness)


@dataclass(frozen=True)
class GapScanResult:
    ok: bool
    empirical_chi: float
    chi: float
    nu: float
    K: int
    J: int
    witness: tuple = None   # (k, p, q, j) attaining the minimum when below chi


def upsilon_check(phi, alpha, chi, nu, K, J=None):
    """Scan |<k,alpha> + phi_p - phi_q - j| (1+|k|_1)^nu over p != q.

    k runs over the full ball |k|_1 <= K including 0; j over |j| <= J, with J
    defaulting to the analytic bound K |alpha|_inf d + max|phi_p - phi_q| + 1
    beyond which the inequality is automatic.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    al = np.atleast_1d(np.asarray(alpha, dtype=float))
    n = phi.size
    if n < 2:
        return GapScanResult(ok=True, empirical_chi=float("inf"), chi=float(chi),
                             nu=float(nu), K=int(K), J=0)
    dphi = phi[:, None] - phi[None, :]
    max_gap = float(np.abs(dphi).max())
    if J is None:
        J = int(np.ceil(K * np.abs(al).max() * al.size + max_gap + 1))
    half = half_lattice(al.size, int(K))
    ks = np.vstack([np.zeros((1, al.size), dtype=int), half, -half])
    ka = ks @ al
    wk = (1.0 + np.abs(ks).sum(axis=1)) ** float(nu)
    js = np.arange(-J, J + 1, dtype=float)
    best = (float("inf"), None)
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            # (K_modes, J_vals) grid of |<k,alpha> + dphi - j|
            expr = np.abs(ka[:, None] + dphi[p, q] - js[None, :])
            scaled = expr * wk[:, None]
            i_flat = int(np.argmin(scaled))
            v = float(scaled.flat[i_flat])
            if v < best[0]:
                ik, ij = np.unravel_index(i_flat, scaled.shape)
                best = (v, (tuple(int(x) for x in ks[ik]), p, q, int(js[ij])))
    emp = best[0]
    ok = emp >= chi
    return GapScanResult(ok=bool(ok), empirical_chi=emp, chi=float(chi),
                         nu=float(nu), K=int(K), J=int(J),
                         witness=None if ok else best[1])


def sigma_alpha_check(a, alpha, chi, nu, K):
    """Eigenvalue-pair gap scan: min |lam_p - lam_q e^{2 pi i <k,alpha>}| (1+|k|)^nu.

    a: a UnitaryConstant or an array of unit-modulus eigenvalues. Scans
    distinct pairs over |k|_1 <= K (k = 0 included).
    """
    eigs = np.asarray(getattr(a, "eigs", a), dtype=complex)
    al = np.atleast_1d(np.asarray(alpha, dtype=float))
    n = eigs.size
    if n < 2:
        return GapScanResult(ok=True, empirical_chi=float("inf"), chi=float(chi),
                             nu=float(nu), K=int(K), J=0)
    half = half_lattice(al.size, int(K))
    ks = np.vstack([np.zeros((1, al.size), dtype=int), half, -half])
    rot = np.exp(2j * np.pi * (ks @ al))
    wk = (1.0 + np.abs(ks).sum(axis=1)) ** float(nu)
    best = (float("inf"), None)
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            vals = np.abs(eigs[p] - eigs[q] * rot) * wk
            i = int(np.argmin(vals))
            v = float(vals[i])
            if v < best[0]:
                best = (v, (tuple(int(x) for x in ks[i]), p, q, 0))
    emp = best[0]
    ok = emp >= chi
    return GapScanResult(ok=bool(ok), empirical_chi=emp, chi=float(chi),
                         nu=float(nu), K=int(K), J=0,
                         witness=None if ok else best[1])


# ---------------------------------------------------------------- renormalized DC

@dataclass(frozen=True)
class RdcScanResult:
    """Finite-depth surrogate for the renormalized Diophantine condition.

    passing_ms lists the m <= M whose Gauss-map tail G^m(alpha) passes
    DC(gamma,tau) at lattice cutoff K. Both cutoffs are part of the result;
    no claim is made beyond them.
    """

    passing_ms: list
    gamma_stars: list
    gamma: float
    tau: float
    depth_M: int
    lattice_K: int
    diagnostic: str = ""


def rdc_scan(alpha, gamma, tau, M, K):
    try:
        cf = cf_expand(alpha, M)
    except ValueError as exc:
        return RdcScanResult(passing_ms=[], gamma_stars=[], gamma=float(gamma),
                             tau=float(tau), depth_M=int(M), lattice_K=int(K),
                             diagnostic=str(exc))
    passing, stars = [], []
    for m in range(M + 1):
        res = dc_check(float(cf.tails[m]), tau, K)
        stars.append(res.gamma_star)
        if res.gamma_star <= gamma:
            passing.append(m)
    return RdcScanResult(passing_ms=passing, gamma_stars=stars, gamma=float(gamma),
                         tau=float(tau), depth_M=int(M), lattice_K=int(K))
