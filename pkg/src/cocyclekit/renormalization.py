"""Renormalization of commuting pairs of circle extensions.

A fibered pair assigns to each lattice point (k1, k2) a generator (gamma, A)
with gamma real and A a U(n)-valued map on the line, multiplying by

    (gamma, A) (gamma', A') = (gamma + gamma', A(. + gamma') A'(.)).

The pair is stored through its two generators Phi(1,0) and Phi(0,1); every
other element is a word in them, and the whole structure is consistent iff
the generators commute (checked numerically, never assumed).

Renormalization acts on pairs by three elementary moves: translating the
base point, rescaling the line, and integer base changes of the lattice.
One step normalizes the rotation number into (0,1), applies the base change
attached to its first partial quotient, and rescales so the first generator
translates by 1 again. Iterating drives the rotation number through the
Gauss map; after m steps the result has a closed form read off the depth-m
convergent matrix, which this module both implements and cross-checks.

Maps on the line are kept in factored form: a product of atoms, each a
reference to a periodic coefficient table or a sampler plus an affine
reparametrization and inversion/exponential flags. Shifts, rescalings,
inverses and products are then exact bookkeeping; numbers only appear when
a map is evaluated on a grid. Atom values must be unitary (inversion is the
conjugate transpose).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
import scipy.linalg

from .arithmetic import CF_DPS, cf_expand, parse_alpha, upsilon_check
from .torus_fourier import (
    FourierMap,
    coeffs_from_grid,
    constant_map,
    expm_skew_stack,
    grid_sup,
    identity_map,
    principal_log_unitary,
    spec_norm,
)

__all__ = [
    "Atom",
    "RealMap",
    "Generator",
    "compose",
    "gen_inverse",
    "gen_power",
    "identity_generator",
    "FiberedAction",
    "constant_action",
    "cocycle_action",
    "translate",
    "rescale",
    "base_change",
    "renorm_step",
    "RenormState",
    "renorm_iterate",
    "renorm_closed_form",
    "action_distance",
    "PrioriBoundRow",
    "PrioriBoundReport",
    "priori_bound_report",
    "periodicity_residual",
    "realmap_to_fourier",
    "PiecewiseConjugation",
    "NormalizationResult",
    "normalize_action",
    "LinearExp",
    "ConstantNormalization",
    "normalize_constant",
    "RenormalizedGapResult",
    "renormalized_upsilon_check",
]


# ---------------------------------------------------------------------------
# factored maps on the line


@dataclass(frozen=True)
class Atom:
    """One factor base(scale * x + shift), optionally exponentiated/inverted.

    base is any object with eval_many(points) -> (M, n, n); with exp_form the
    base values are skew logs and the atom value is their exponential. The
    inverse of a unitary value is its conjugate transpose, so invert works
    for both forms.
    """

    base: object
    scale: float = 1.0
    shift: float = 0.0
    invert: bool = False
    exp_form: bool = False

    def values(self, xs):
        pts = self.scale * np.asarray(xs, dtype=float) + self.shift
        vals = np.asarray(self.base.eval_many(pts), dtype=complex)
        if self.exp_form:
            vals = expm_skew_stack(vals)
        if self.invert:
            vals = np.conj(np.swapaxes(vals, -1, -2))
        return vals


@dataclass(frozen=True)
class RealMap:
    """Ordered product of atoms; the empty product is the identity map."""

    n: int
    atoms: tuple = ()

    def eval_many(self, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.broadcast_to(np.eye(self.n, dtype=complex),
                              xs.shape + (self.n, self.n)).copy()
        for atom in self.atoms:
            out = out @ atom.values(xs)
        return out

    def shifted(self, t):
        t = float(t)
        if t == 0.0:
            return self
        moved = tuple(
            Atom(a.base, a.scale, a.shift + a.scale * t, a.invert, a.exp_form)
            for a in self.atoms)
        return RealMap(self.n, moved)

    def rescaled(self, lam):
        lam = float(lam)
        if lam == 1.0:
            return self
        moved = tuple(
            Atom(a.base, a.scale * lam, a.shift, a.invert, a.exp_form)
            for a in self.atoms)
        return RealMap(self.n, moved)

    def inverse(self):
        flipped = tuple(
            Atom(a.base, a.scale, a.shift, not a.invert, a.exp_form)
            for a in reversed(self.atoms))
        return RealMap(self.n, flipped)

    def times(self, other):
        if other.n != self.n:
            raise ValueError("dimension mismatch in map product")
        return RealMap(self.n, self.atoms + other.atoms)

    @property
    def atom_count(self):
        return len(self.atoms)

    @staticmethod
    def identity(n):
        return RealMap(n, ())

    @staticmethod
    def from_fourier(f):
        if f.d != 1:
            raise ValueError("line maps need d = 1 coefficient tables")
        return RealMap(f.n, (Atom(f),))

    @staticmethod
    def from_constant(mat):
        mat = np.asarray(mat, dtype=complex)
        return RealMap(mat.shape[0], (Atom(constant_map(mat, 1)),))

    @staticmethod
    def from_exp(f):
        """Map x -> exp(F(x)) for a skew-valued coefficient table F."""
        if f.d != 1:
            raise ValueError("line maps need d = 1 coefficient tables")
        return RealMap(f.n, (Atom(f, exp_form=True),))


# ---------------------------------------------------------------------------
# generators and the fibered pair


@dataclass(frozen=True)
class Generator:
    """(gamma, A): translate by gamma on the base, multiply by A on the fiber."""

    gamma: float
    amap: RealMap

    @property
    def n(self):
        return self.amap.n


def compose(g, h):
    """(gamma, A)(gamma', A') = (gamma + gamma', A(. + gamma') A')."""
    return Generator(g.gamma + h.gamma, g.amap.shifted(h.gamma).times(h.amap))


def identity_generator(n):
    return Generator(0.0, RealMap.identity(n))


def gen_inverse(g):
    return Generator(-g.gamma, g.amap.shifted(-g.gamma).inverse())


def gen_power(g, k):
    k = int(k)
    if k == 0:
        return identity_generator(g.n)
    if k < 0:
        return gen_inverse(gen_power(g, -k))
    acc = g
    for _ in range(k - 1):
        acc = compose(g, acc)
    return acc


@dataclass(frozen=True)
class FiberedAction:
    """Commuting pair of generators, indexed so gen10 = Phi(1,0) etc."""

    gen10: Generator
    gen01: Generator

    @property
    def n(self):
        return self.gen10.n

    def element(self, k1, k2):
        """Phi(k1, k2) as a word in the generators; exact for commuting pairs."""
        return compose(gen_power(self.gen10, k1), gen_power(self.gen01, k2))

    def commutation_residual(self, grid=96, lo=-1.0, hi=1.0):
        xs = lo + (hi - lo) * np.arange(grid) / grid
        ab = compose(self.gen10, self.gen01).amap.eval_many(xs)
        ba = compose(self.gen01, self.gen10).amap.eval_many(xs)
        return float(np.max(spec_norm(ab - ba)))

    def validate(self, tol=1e-9, grid=96):
        res = self.commutation_residual(grid=grid)
        if res > tol:
            raise ValueError(f"generators do not commute: residual {res:.3e}")
        return res


def constant_action(c, d, alpha):
    """Pair (1, C), (alpha, D) with constant commuting unitaries C, D."""
    return FiberedAction(
        Generator(1.0, RealMap.from_constant(c)),
        Generator(float(alpha), RealMap.from_constant(d)))


def cocycle_action(alpha, a):
    """Normalized pair (1, I), (alpha, A) from a period-1 coefficient table."""
    amap = a if isinstance(a, RealMap) else RealMap.from_fourier(a)
    return FiberedAction(
        Generator(1.0, RealMap.identity(amap.n)),
        Generator(float(alpha), amap))


# ---------------------------------------------------------------------------
# elementary moves


def translate(action, t):
    """Move the base point: every generator map evaluated at x + t."""
    return FiberedAction(
        Generator(action.gen10.gamma, action.gen10.amap.shifted(t)),
        Generator(action.gen01.gamma, action.gen01.amap.shifted(t)))


def rescale(action, lam):
    """Rescale the line by lam: translations divide, maps read lam * x."""
    lam = float(lam)
    if lam == 0.0:
        raise ValueError("rescale needs lam != 0")
    return FiberedAction(
        Generator(action.gen10.gamma / lam, action.gen10.amap.rescaled(lam)),
        Generator(action.gen01.gamma / lam, action.gen01.amap.rescaled(lam)))


def base_change(action, u):
    """Reindex by a unimodular integer matrix u: new Phi(k) = Phi(k (u^T)^-1).

    The new generators are the images of (1,0) and (0,1), i.e. the words
    given by the rows of the exact integer inverse transpose.
    """
    u = np.asarray(u)
    a, b = int(u[0, 0]), int(u[0, 1])
    c, d = int(u[1, 0]), int(u[1, 1])
    det = a * d - b * c
    if det not in (1, -1):
        raise ValueError(f"base change needs determinant +-1, got {det}")
    # (u^T)^-1 = det * [[d, -c], [-b, a]] since det^2 = 1
    w = ((det * d, -det * c), (-det * b, det * a))
    return FiberedAction(action.element(*w[0]), action.element(*w[1]))


# ---------------------------------------------------------------------------
# the renormalization step and its closed form


def renorm_step(action, rational_tol=1e-12):
    """One renormalization step of a pair with gen10 translating by 1.

    Reduces the rotation number mod 1, applies the base change of its first
    partial quotient, and rescales so the new gen10 translates by 1 again.
    The new rotation number is the Gauss image of the old one.
    """
    g10, g01 = action.gen10, action.gen01
    if abs(g10.gamma - 1.0) > 1e-9:
        raise ValueError(f"step expects gen10 translation 1, got {g10.gamma!r}")
    k0 = math.floor(g01.gamma)
    if k0 != 0:
        g01 = compose(g01, gen_power(g10, -k0))
    alpha = g01.gamma
    if not rational_tol < alpha < 1.0 - rational_tol:
        raise ValueError(
            "rotation number indistinguishable from an integer at this precision")
    a1 = math.floor(1.0 / alpha)
    if 1.0 / alpha - a1 < rational_tol:
        raise ValueError(
            "rotation number indistinguishable from a rational at this precision")
    changed = base_change(FiberedAction(g10, g01), ((a1, 1), (1, 0)))
    return rescale(changed, alpha)


@dataclass(frozen=True)
class RenormState:
    m: int
    action: FiberedAction
    rotation: float


def renorm_iterate(action, m, rational_tol=1e-12):
    """States 0..m of repeated renorm_step, state 0 being the input."""
    states = [RenormState(0, action, action.gen01.gamma)]
    for j in range(1, int(m) + 1):
        nxt = renorm_step(states[-1].action, rational_tol=rational_tol)
        states.append(RenormState(j, nxt, nxt.gen01.gamma))
    return states


def renorm_closed_form(action, m, cf=None):
    """Depth-m renormalization in one move, off the convergent matrix.

    Valid for any commuting pair with gen10 translating by 1; the generator
    words use the exact integer rows of the inverse transpose of Q_m, and
    the final rescaling is the translation length of the first word. For a
    normalized pair this reproduces the generator maps A_{s} with
    s = -(-1)^m q_{m-1} and s~ = (-1)^m q_m, read at the rescaled points.
    """
    m = int(m)
    if abs(action.gen10.gamma - 1.0) > 1e-9:
        raise ValueError("closed form expects gen10 translation 1")
    if m == 0:
        return action
    if cf is None:
        cf = cf_expand(action.gen01.gamma, m)
    qm = cf.convergent_matrix(m)
    a, b = int(qm[0, 0]), int(qm[0, 1])
    c, d = int(qm[1, 0]), int(qm[1, 1])
    det = a * d - b * c  # (-1)^m
    w = ((det * d, -det * c), (-det * b, det * a))
    changed = FiberedAction(action.element(*w[0]), action.element(*w[1]))
    beta_prev = changed.gen10.gamma  # = |q_{m-1} alpha - p_{m-1}| > 0
    if beta_prev <= 0:
        raise ValueError("convergent data inconsistent with rotation number")
    return rescale(changed, beta_prev)


def action_distance(a, b, grid=96, lo=-1.0, hi=1.0):
    """Sup over a grid of generator map differences, plus translation gaps."""
    xs = lo + (hi - lo) * np.arange(grid) / grid
    worst = max(abs(a.gen10.gamma - b.gen10.gamma),
                abs(a.gen01.gamma - b.gen01.gamma))
    for ga, gb in ((a.gen10, b.gen10), (a.gen01, b.gen01)):
        diff = ga.amap.eval_many(xs) - gb.amap.eval_many(xs)
        worst = max(worst, float(np.max(spec_norm(diff))))
    return worst


# ---------------------------------------------------------------------------
# derivative growth of iterates


def _deriv_sup_1d(f, r, grid=None):
    # exact spectral derivative of a d = 1 coefficient table, sup on a grid
    if r == 0:
        return grid_sup(f, grid)
    scaled = {k: ((2j * np.pi * k[0]) ** r) * v for k, v in f.coeffs.items()}
    g = FourierMap(1, f.n, scaled, skew=False, _floor=None)
    return grid_sup(g, grid)


@dataclass(frozen=True)
class PrioriBoundRow:
    m: int
    k: int
    r: int
    raw: float       # (sup|d^r A_k| / (|k|^r sup|d^r A|))^(1/r)
    rescaled: float  # (beta_{m-1}^r sup|d^r A_k| / sup|d^r A|)^(1/r)


@dataclass(frozen=True)
class PrioriBoundReport:
    c_measured: float
    rescaled_sup: float
    rows: tuple


def priori_bound_report(alpha, a, m_max, max_order=4, cf=None, grid=None):
    """Measure the constant in sup|d^r A_k| <= |k|^r c^r sup|d^r A|.

    Rows cover the iterate indices that actually occur at depths 1..m_max,
    namely k = -(-1)^m q_{m-1} and (-1)^m q_m. The rescaled column multiplies
    by beta_{m-1}^r; since |beta_{m-1} k| <= 1 for both indices it is bounded
    by the raw column, which is what makes the renormalized iterates
    uniformly differentiable.
    """
    from .torus_fourier import cocycle_iterate

    alpha_f = float(parse_alpha(alpha))
    if cf is None:
        cf = cf_expand(alpha, int(m_max))
    base = {r: _deriv_sup_1d(a, r, grid) for r in range(1, max_order + 1)}
    rows = []
    for m in range(1, int(m_max) + 1):
        beta_prev = cf.beta_float(m - 1) if m >= 1 else 1.0
        sign = -1 if m % 2 else 1
        for k in (-sign * int(cf.q[m - 1]), sign * int(cf.q[m])):
            if k == 0:
                continue
            ak = cocycle_iterate(alpha_f, a, k)
            for r in range(1, max_order + 1):
                lhs = _deriv_sup_1d(ak, r, grid)
                raw = (lhs / (abs(k) ** r * base[r])) ** (1.0 / r)
                resc = ((beta_prev ** r) * lhs / base[r]) ** (1.0 / r)
                rows.append(PrioriBoundRow(m, k, r, raw, resc))
    return PrioriBoundReport(
        c_measured=max(row.raw for row in rows),
        rescaled_sup=max(row.rescaled for row in rows),
        rows=tuple(rows))


# ---------------------------------------------------------------------------
# conversion back to coefficient tables


def periodicity_residual(rmap, grid=64, period=1.0):
    """Sup over an offset grid of |F(x + period) - F(x)|."""
    xs = (np.arange(grid) + 0.318) / grid
    return float(np.max(spec_norm(
        rmap.eval_many(xs + period) - rmap.eval_many(xs))))


def realmap_to_fourier(rmap, grid=256, skew=False, tol=1e-9):
    """Sample a period-1 factored map back into a coefficient table."""
    res = periodicity_residual(rmap, grid=min(grid, 64))
    if res > tol:
        raise ValueError(f"map is not 1-periodic: residual {res:.3e}")
    xs = np.arange(grid) / grid
    vals = rmap.eval_many(xs)
    return coeffs_from_grid(vals, 1, rmap.n, skew=skew)


# ---------------------------------------------------------------------------
# normalization of the first generator


def _gevrey_bump(s, rho=2.0):
    """Flat-ended ramp: 0 for s <= 1/3, 1 for s >= 2/3, smooth between.

    The cutoff profile is exp(-t^(-1/(rho-1))), which keeps the glued map in
    the same differentiability class as the inputs for rho > 1.
    """
    s = float(s)
    w = 3.0 * s - 1.0
    if w <= 0.0:
        return 0.0
    if w >= 1.0:
        return 1.0
    p = 1.0 / (rho - 1.0)
    u = math.exp(-w ** (-p))
    v = math.exp(-(1.0 - w) ** (-p))
    return u / (u + v)


class PiecewiseConjugation:
    """The normalizing map P built from a gluing on [1 - delta, 1 + delta].

    P = I left of the gluing window inside [0,1), interpolates to C(. - 1)
    inside it, and extends to the whole line through P(x+1) = C(x) P(x).
    Then P(x+1)^-1 C(x) P(x) = I identically.
    """

    def __init__(self, cmap, x0, delta, rho=2.0):
        self.cmap = cmap
        self.x0 = np.asarray(x0, dtype=complex)
        self.delta = float(delta)
        self.rho = float(rho)
        self.n = cmap.n

    def _c_at(self, x):
        return self.cmap.eval_many(np.array([x]))[0]

    def _base(self, x):
        # x in [0, 1)
        d = self.delta
        if x <= 1.0 - 2.0 * d / 3.0:
            return np.eye(self.n, dtype=complex)
        b = _gevrey_bump((x - (1.0 - d)) / d, self.rho)
        f = (1.0 - d) + (x - (1.0 - d)) * b
        y = principal_log_unitary(
            expm_skew_stack(-self.x0) @ self._c_at(f - 1.0))
        return expm_skew_stack(b * self.x0) @ expm_skew_stack(b * y)

    def _one(self, x):
        pre = np.eye(self.n, dtype=complex)
        while x >= 1.0:
            pre = pre @ self._c_at(x - 1.0)
            x -= 1.0
        while x < 0.0:
            pre = pre @ np.conj(self._c_at(x).T)
            x += 1.0
        return pre @ self._base(x)

    def eval_many(self, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.empty(xs.shape + (self.n, self.n), dtype=complex)
        for i, x in enumerate(xs):
            out[i] = self._one(float(x))
        return out


@dataclass(frozen=True)
class NormalizationResult:
    action: FiberedAction
    conjugation: RealMap
    residual: float
    delta: float
    x0: np.ndarray
    sup_c_minus_i: float
    sup_p_minus_i: float


def _conjugate_action(action, pmap):
    """Ad(P): each (gamma, A) becomes (gamma, P(. + gamma)^-1 A P)."""
    def conj(g):
        return Generator(
            g.gamma,
            pmap.shifted(g.gamma).inverse().times(g.amap).times(pmap))
    return FiberedAction(conj(action.gen10), conj(action.gen01))


def normalize_action(action, rho=2.0, window_grid=192, residual_grid=128,
                     delta_floor=5e-3):
    """Conjugate a pair so the first generator becomes exactly (1, I).

    Requires gen10 = (1, C). The conjugation equals I near 0 and C(. - 1)
    near 1, glued through logs of e^{-X0} C with X0 the principal log of
    C(0); the gluing width delta is shrunk until e^{-X0} C stays within 2/3
    of I across the window, which keeps every log on the principal branch.
    Raises when C(0) has an eigenvalue at -1 (no branch to start from).
    """
    g10 = action.gen10
    if abs(g10.gamma - 1.0) > 1e-9:
        raise ValueError("normalization expects gen10 translation 1")
    cmap = g10.amap
    c0 = cmap.eval_many(np.array([0.0]))[0]
    try:
        x0 = principal_log_unitary(c0)
    except ValueError as exc:
        raise ValueError(
            "constant part has an eigenvalue at -1; no continuous log branch"
        ) from exc

    einv = expm_skew_stack(-x0)
    eye = np.eye(cmap.n, dtype=complex)
    delta = None
    trial = 0.55
    while trial >= delta_floor:
        ts = np.linspace(1.0 - trial, 1.0 + trial, window_grid)
        vals = cmap.eval_many(ts - 1.0)
        if float(np.max(spec_norm(einv @ vals - eye))) < 2.0 / 3.0:
            delta = trial
            break
        trial *= 0.6
    if delta is None:
        raise ValueError("no gluing width keeps the window on the log branch")

    sampler = PiecewiseConjugation(cmap, x0, delta, rho=rho)
    pmap = RealMap(cmap.n, (Atom(sampler),))
    conjugated = _conjugate_action(action, pmap)

    xs = np.arange(residual_grid) / residual_grid
    residual = float(np.max(spec_norm(
        conjugated.gen10.amap.eval_many(xs) - eye)))
    span = np.linspace(-2.0, 3.0, 160)
    sup_c = float(np.max(spec_norm(cmap.eval_many(span) - eye)))
    window = np.linspace(-delta, 1.0 + delta, 160)
    sup_p = float(np.max(spec_norm(pmap.eval_many(window) - eye)))
    return NormalizationResult(conjugated, pmap, residual, delta, x0,
                               sup_c, sup_p)


# ---------------------------------------------------------------------------
# normalization of constant pairs


class LinearExp:
    """Sampler x -> exp(x X0) for a fixed skew matrix X0; not periodic."""

    def __init__(self, x0):
        self.x0 = np.asarray(x0, dtype=complex)
        self.n = self.x0.shape[0]

    def eval_many(self, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return expm_skew_stack(xs[:, None, None] * self.x0)


@dataclass(frozen=True)
class ConstantNormalization:
    x0: np.ndarray
    conjugation: RealMap
    action: FiberedAction
    target_d: np.ndarray
    exp_residual: float
    commute_residual: float


def normalize_constant(c, d, alpha, comm_tol=1e-8, cluster_tol=1e-8):
    """Straighten a constant commuting pair (1, C), (alpha, D).

    Builds a skew X0 with e^{X0} = C that also commutes with D, by refining
    a Schur frame of C inside each eigenvalue cluster with the compression
    of D. Conjugating by x -> e^{x X0} sends the pair to (1, I),
    (alpha, D e^{-alpha X0}).
    """
    c = np.asarray(c, dtype=complex)
    d = np.asarray(d, dtype=complex)
    n = c.shape[0]
    comm = float(spec_norm(c @ d - d @ c))
    if comm > comm_tol:
        raise ValueError(f"pair does not commute: |CD - DC| = {comm:.3e}")

    t, v = scipy.linalg.schur(c, output="complex")
    eigs = np.diag(t)
    angles = np.angle(eigs)
    if np.any(np.abs(eigs + 1.0) < 1e-12):
        raise ValueError("constant has an eigenvalue at -1; no log branch")

    order = np.argsort(angles)
    v = v[:, order]
    angles = angles[order]
    # cluster indices with nearly equal angles, refine the frame with D
    start = 0
    for stop in range(1, n + 1):
        if stop < n and angles[stop] - angles[stop - 1] < cluster_tol:
            continue
        idx = slice(start, stop)
        block = v[:, idx]
        if stop - start > 1:
            sub = np.conj(block.T) @ d @ block
            _, w = scipy.linalg.schur(sub, output="complex")
            v[:, idx] = block @ w
        start = stop

    x0 = (v * (1j * angles)) @ np.conj(v.T)
    x0 = 0.5 * (x0 - np.conj(x0.T))
    exp_res = float(spec_norm(expm_skew_stack(x0) - c))
    comm_res = float(spec_norm(x0 @ d - d @ x0))

    bmap = RealMap(n, (Atom(LinearExp(x0)),))
    target = d @ expm_skew_stack(-float(alpha) * x0)
    conjugated = _conjugate_action(constant_action(c, d, alpha), bmap)
    return ConstantNormalization(x0, bmap, conjugated, target,
                                 exp_res, comm_res)


# ---------------------------------------------------------------------------
# the gap condition along the renormalization


@dataclass(frozen=True)
class RenormalizedGapResult:
    m: int
    alpha_m: float
    beta_prev: float
    chi: float
    phi_rescaled: tuple
    scan: object

    @property
    def ok(self):
        return self.scan.ok


def renormalized_upsilon_check(phi, alpha, m, chi, nu, K, cf=None):
    """Gap scan of the depth-m rescaled phases against the Gauss tail.

    The phases transform as phi -> (-1)^m phi / beta_{m-1} (mod 1, reduced
    at high precision since beta_{m-1} is tiny), the frequency becomes
    G^m(alpha), and the guaranteed gap constant shrinks by the factor
    beta_{m-1}^{-1} (4 q_m)^{-nu}. Pass/fail is delegated to the lattice
    scan; reducing the phases mod 1 bounds every phase gap by 2, so indices
    |j| <= 2K + 3 are exhaustive for any chi <= 1.
    """
    m = int(m)
    if m < 0:
        raise ValueError("depth m must be >= 0")
    if cf is None:
        cf = cf_expand(alpha, max(m, 1))
    with mp.workdps(CF_DPS):
        beta_prev = cf.betas[m - 1] if m >= 1 else mp.mpf(1)
        sign = -1 if m % 2 else 1
        resc = []
        for t in phi:
            z = sign * mp.mpf(t) / beta_prev
            resc.append(float(z - mp.floor(z)))
        if m == 0:
            chi_m = float(chi)
        else:
            chi_m = float(mp.mpf(chi) / beta_prev / (4 * int(cf.q[m])) ** nu)
    alpha_m = float(cf.tails[m])
    scan = upsilon_check(tuple(resc), alpha_m, chi=chi_m, nu=nu, K=K,
                         J=2 * K + 3)
    return RenormalizedGapResult(m, alpha_m, float(beta_prev), chi_m,
                                 tuple(resc), scan)
