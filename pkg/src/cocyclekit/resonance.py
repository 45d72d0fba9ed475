"""Resonant structure of a unitary spectrum relative to a torus rotation.

A pair of unimodular numbers (lam, lam~) is (N, delta)-resonant when some
frequency 0 < |k|_1 <= N brings e^{2 pi i <k, alpha>} lam~ within delta of
lam.  For a constant A in U(n) the spectrum is partitioned into blocks by a
ladder of scan radii N_j = (kappa/(2n+1))^{n-j} N: at level j the blocks are
the (N_j, delta)-connected components, and the level is accepted once
distinct blocks are pairwise (N_{j+1}, delta)-nonresonant.  A counting
argument guarantees acceptance at some j <= n-1: whenever a level fails,
two components merge at the next one, and a single component passes
vacuously.

Each index p then receives an offset k^(p): zero for the smallest index of
its block (the representative), otherwise the frequency inside |k| <= n N_j
minimizing |lam_p - lam_rep e^{2 pi i <k, alpha>}|, which the resonance
uniqueness principle makes unique below threshold n delta.  When that
threshold reaches 2 every frequency qualifies and uniqueness is void; the
partition then records uniqueness_vacuous instead of failing, since the
argmin offset is still deterministic and the downstream conjugation algebra
is unaffected.

The offsets induce the mode sets Z_k = {(p, q) same block, k^(p) - k^(q) = k}
and the exact entrywise splitting of a skew-Hermitian-valued map into a
resonant part (Z_k entries at |k| <= n N_j, plus the whole tail beyond
N_{j+1}) and a nonresonant part (everything else up to N_{j+1}).  On the
nonresonant part the twisted difference X - A^{-1} X(. + alpha) A has all
divisors |lam_p - lam_q e^{2 pi i <k, alpha>}| >= delta, which is the lower
bound the homological solver relies on.

Indices p, q are 0-based throughout.
"""

import dataclasses
import itertools
import math

import numpy as np

from .torus_fourier import FourierMap, l1

UNIMODULAR_TOL = 1e-8


@dataclasses.dataclass(frozen=True)
class ResonanceLadder:
    """Scan radii N_0 < ... < N_n = N with contraction kappa and threshold delta."""

    N: float
    kappa: float
    delta: float
    levels: tuple

    @property
    def n(self):
        return len(self.levels) - 1


def build_ladder(N, kappa, delta, n):
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    if N < 1:
        raise ValueError("truncation order must be >= 1")
    if delta <= 0:
        raise ValueError("resonance threshold must be positive")
    ratio = kappa / (2 * n + 1)
    levels = tuple(ratio ** (n - j) * N for j in range(n + 1))
    return ResonanceLadder(float(N), float(kappa), float(delta), levels)


@dataclasses.dataclass(frozen=True)
class ResonancePartition:
    """Blocks, acceptance level, representatives and offsets for one spectrum."""

    blocks: tuple
    level_j: int
    representatives: tuple
    offsets: tuple
    window: int
    bound: float
    uniqueness_vacuous: bool


@dataclasses.dataclass(frozen=True)
class ModeSplit:
    """Mode sets Z_k with the splitting window n N_j and bound N_{j+1}.

    degenerate marks off-diagonal pairs in Z_0, which arise only when two
    same-block indices carry equal offsets (clustered eigenvalues); those
    entries stay on the resonant side, as the divisor bound requires.
    """

    Zk: dict
    window: int
    bound: float
    degenerate: bool


def _lattice_ball(d, N, include_zero):
    """Frequencies |k|_1 <= N sorted by (|k|_1, k); deterministic scan order."""
    radius = int(math.floor(N))
    if radius < 0 or (radius == 0 and not include_zero):
        return []
    if d == 1:
        ks = [(k,) for k in range(-radius, radius + 1)]
    else:
        ks = [k for k in itertools.product(range(-radius, radius + 1), repeat=d)
              if sum(abs(x) for x in k) <= radius]
    if not include_zero:
        ks = [k for k in ks if any(k)]
    ks.sort(key=lambda k: (sum(abs(x) for x in k), k))
    return ks


def _divisors(lam, lam_t, alpha, ks):
    phases = np.asarray(ks, dtype=float) @ np.atleast_1d(np.asarray(alpha, dtype=float))
    return np.abs(np.exp(2j * np.pi * phases) * lam_t - lam)


def is_resonant_pair(lam, lam_t, alpha, N, delta):
    """First witness k with |e^{2 pi i <k, alpha>} lam_t - lam| < delta, or None.

    Scans 0 < |k|_1 <= N in (|k|_1, k) order; N = 0 is vacuously nonresonant.
    """
    for v in (lam, lam_t):
        if abs(abs(v) - 1.0) > UNIMODULAR_TOL:
            raise ValueError("resonance scan expects unimodular values")
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    ks = _lattice_ball(alpha.size, N, include_zero=False)
    if not ks:
        return None
    vals = _divisors(lam, lam_t, alpha, ks)
    hits = np.nonzero(vals < delta)[0]
    if hits.size == 0:
        return None
    return ks[int(hits[0])]


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, p):
        while self.parent[p] != p:
            self.parent[p] = self.parent[self.parent[p]]
            p = self.parent[p]
        return p

    def union(self, p, q):
        rp, rq = self.find(p), self.find(q)
        if rp != rq:
            self.parent[max(rp, rq)] = min(rp, rq)

    def blocks(self):
        groups = {}
        for p in range(len(self.parent)):
            groups.setdefault(self.find(p), []).append(p)
        return tuple(tuple(g) for _, g in sorted(groups.items()))


def _components(lam, alpha, radius, delta):
    uf = _UnionFind(len(lam))
    for p, q in itertools.combinations(range(len(lam)), 2):
        if is_resonant_pair(lam[p], lam[q], alpha, radius, delta) is not None:
            uf.union(p, q)
    return uf.blocks()


def partition_spectrum(A, alpha, ladder):
    """Ladder partition of Spec(A) with representatives and offsets.

    Raises ValueError when two distinct admissible offsets exist below the
    uniqueness threshold n delta (the threshold is too large for this alpha
    and N); an unconditionally ambiguous threshold n delta >= 2 is recorded
    as uniqueness_vacuous instead.
    """
    lam = np.asarray(getattr(A, "eigs", A), dtype=complex)
    n = lam.size
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    delta = ladder.delta
    if ladder.n != n:
        raise ValueError("ladder was built for a different matrix size")

    level = None
    blocks = None
    for j in range(n):
        comps = _components(lam, alpha, ladder.levels[j], delta)
        member = {}
        for b, comp in enumerate(comps):
            for p in comp:
                member[p] = b
        ok = True
        for p, q in itertools.combinations(range(n), 2):
            if member[p] == member[q]:
                continue
            if is_resonant_pair(lam[p], lam[q], alpha, ladder.levels[j + 1], delta) is not None:
                ok = False
                break
        if ok:
            level, blocks = j, comps
            break
    if blocks is None:
        # the merge-counting argument makes this unreachable for any input
        raise RuntimeError("resonance ladder failed to stabilize")

    window = int(math.floor(n * ladder.levels[level]))
    threshold = n * delta
    vacuous = threshold >= 2.0
    offsets = [None] * n
    reps = []
    ball = _lattice_ball(alpha.size, window, include_zero=True)
    for comp in blocks:
        rep = comp[0]
        reps.append(rep)
        offsets[rep] = (0,) * alpha.size
        for p in comp[1:]:
            vals = _divisors(lam[p], lam[rep], alpha, ball)
            hits = np.nonzero(vals < threshold)[0]
            if hits.size == 0:
                raise RuntimeError("no admissible offset inside the scan window")
            if hits.size > 1 and not vacuous:
                raise ValueError(
                    "offset is not unique below the resonance threshold; "
                    "the threshold is too large for this rotation and order")
            offsets[p] = ball[int(hits[np.argmin(vals[hits])])]
    return ResonancePartition(
        blocks=blocks,
        level_j=level,
        representatives=tuple(reps),
        offsets=tuple(offsets),
        window=window,
        bound=ladder.levels[level + 1],
        uniqueness_vacuous=vacuous,
    )


def build_mode_split(part):
    """Mode sets Z_k of entry pairs (p, q) in one block with k = k^(p) - k^(q)."""
    zk = {}
    degenerate = False
    for comp in part.blocks:
        for p in comp:
            for q in comp:
                k = tuple(a - b for a, b in zip(part.offsets[p], part.offsets[q]))
                zk.setdefault(k, set()).add((p, q))
                if p != q and not any(k):
                    degenerate = True
    return ModeSplit(
        Zk={k: frozenset(v) for k, v in zk.items()},
        window=part.window,
        bound=part.bound,
        degenerate=degenerate,
    )


def split_re_nre(x, split):
    """Exact entrywise split of X into resonant and nonresonant parts.

    Resonant side: Z_k entries at |k|_1 <= n N_j plus every mode beyond
    N_{j+1} (the tail is removed separately, not by the homological solver).
    Nonresonant side: the complement at |k|_1 <= n N_j plus all entries at
    n N_j < |k|_1 <= N_{j+1}.  The two parts sum to X coefficientwise and
    both inherit skewness from the Z_k symmetry.
    """
    re_coeffs = {}
    nre_coeffs = {}
    bound = int(math.floor(split.bound))
    for k, mat in x.coeffs.items():
        r = l1(k)
        if r > bound:
            re_coeffs[k] = mat
            continue
        if r > split.window:
            nre_coeffs[k] = mat
            continue
        pairs = split.Zk.get(k)
        if pairs is None:
            nre_coeffs[k] = mat
            continue
        mask = np.zeros(mat.shape, dtype=bool)
        for p, q in pairs:
            mask[..., p, q] = True
        re_part = np.where(mask, mat, 0.0)
        nre_part = mat - re_part
        if np.any(re_part):
            re_coeffs[k] = re_part
        if np.any(nre_part):
            nre_coeffs[k] = nre_part
    x_re = FourierMap(x.d, x.n, re_coeffs, skew=x.skew, _floor=0.0)
    x_nre = FourierMap(x.d, x.n, nre_coeffs, skew=x.skew, _floor=0.0)
    return x_re, x_nre
