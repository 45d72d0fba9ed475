"""Matrix-valued trigonometric polynomials on the d-torus and their cocycle algebra.

A map F: T^d -> gl(n,C) is stored by its Fourier coefficients
F(theta) = sum_k Fhat(k) exp(2 pi i <k,theta>), k in Z^d, with only finitely
many nonzero Fhat(k) (each an n x n complex matrix). Analytic norms used
throughout:

    wiener_norm(F,h) = sum_k |Fhat(k)| e^{2 pi |k|_1 h}      (|.| spectral)
    |F|_h            = sup over the strip |Im theta_s| <= h  (sampled)

and wiener dominates the strip sup: |F|_h <= |F|_{1,h}. The Wiener norm is
submultiplicative, which is what makes it the workhorse bound for products,
exponentials and logarithms of cocycle data.

Frequency size |k| always means the l1 norm. A map is "skew" when it takes
values in the Lie algebra u(n), equivalently Fhat(k)^* = -Fhat(-k) for all k;
exponentials of skew maps are unitary-valued. Unitary-valued maps are inverted
exactly by the pointwise adjoint, whose coefficients are Fhat(-k)^*.

Nonlinear operations (exp, log, products beyond the convolution threshold) go
through uniform grids sized to the next power of two >= 4*(max|k|+1) per axis,
which leaves headroom against aliasing; output coefficients below 1e-14 of the
leading one are dropped (1e-16 for plain arithmetic).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

COEFF_FLOOR = 1e-16       # relative storage floor for exact arithmetic
GRID_OP_FLOOR = 1e-14     # relative floor after grid transcendental ops
CONV_PAIR_LIMIT = 4096    # direct convolution up to this many coeff pairs


def next_pow2(m):
    """Smallest power of two >= m (and >= 1)."""
    p = 1
    while p < m:
        p *= 2
    return p


def spec_norm(a):
    """Spectral norm; accepts a single matrix or a stack (..., n, n)."""
    a = np.asarray(a)
    if a.ndim == 2:
        return float(np.linalg.norm(a, 2))
    return np.linalg.norm(a, ord=2, axis=(-2, -1))


def _as_key(k, d):
    if np.isscalar(k):
        if d != 1:
            raise ValueError("scalar frequency only valid for d = 1")
        return (int(k),)
    k = tuple(int(x) for x in k)
    if len(k) != d:
        raise ValueError(f"frequency {k} has length {len(k)}, expected d = {d}")
    return k


def _as_matrix(v, n):
    a = np.asarray(v, dtype=complex)
    if a.ndim == 0:
        if n != 1:
            raise ValueError("scalar coefficient only valid for n = 1")
        a = a.reshape(1, 1)
    if a.shape != (n, n):
        raise ValueError(f"coefficient shape {a.shape}, expected {(n, n)}")
    return a


def l1(k):
    return int(sum(abs(int(x)) for x in k))


class FourierMap:
    """Finitely supported Fourier series of an n x n matrix valued map on T^d.

    Immutable by convention: coefficient arrays are copied on construction and
    marked read-only, and every operation returns a fresh map. The skew flag
    asserts values in u(n); it is validated against Fhat(k)^* = -Fhat(-k) at
    construction time.
    """

    __slots__ = ("d", "n", "coeffs", "skew")

    def __init__(self, d, n, coeffs, skew=False, _floor=COEFF_FLOOR):
        self.d = int(d)
        self.n = int(n)
        if self.d < 1 or self.n < 1:
            raise ValueError("need d >= 1 and n >= 1")
        store = {}
        for k, v in coeffs.items():
            key = _as_key(k, self.d)
            mat = _as_matrix(v, self.n)
            if key in store:
                raise ValueError(f"duplicate frequency {key}")
            store[key] = mat
        if store and _floor is not None:
            lead = max(spec_norm(v) for v in store.values())
            if lead > 0.0:
                cut = _floor * lead
                store = {k: v for k, v in store.items() if spec_norm(v) > cut}
        for v in store.values():
            v.setflags(write=False)
        self.coeffs = store
        self.skew = bool(skew)
        if self.skew:
            self._check_skew()

    def _check_skew(self):
        lead = max((spec_norm(v) for v in self.coeffs.values()), default=0.0)
        tol = 1e-10 * max(lead, 1.0)
        for k, v in self.coeffs.items():
            mk = tuple(-x for x in k)
            w = self.coeffs.get(mk)
            if w is None:
                w = np.zeros((self.n, self.n), dtype=complex)
            if spec_norm(v.conj().T + w) > tol:
                raise ValueError(f"skew flag violated at frequency {k}")

    # -- basic queries ------------------------------------------------------

    def coeff(self, k):
        key = _as_key(k, self.d)
        v = self.coeffs.get(key)
        if v is None:
            return np.zeros((self.n, self.n), dtype=complex)
        return v.copy()

    def support(self):
        return sorted(self.coeffs.keys(), key=lambda k: (l1(k), k))

    def max_abs_k(self):
        """Largest l1 frequency in the support (0 for constants and zero)."""
        return max((l1(k) for k in self.coeffs.keys()), default=0)

    def max_axis_k(self):
        """Per-axis max of |k_s| over the support."""
        out = [0] * self.d
        for k in self.coeffs.keys():
            for s in range(self.d):
                out[s] = max(out[s], abs(k[s]))
        return out

    def is_constant(self, tol=0.0):
        return all(l1(k) == 0 or spec_norm(v) <= tol for k, v in self.coeffs.items())

    def constant_part(self):
        return self.coeff((0,) * self.d)

    def __repr__(self):
        return (f"FourierMap(d={self.d}, n={self.n}, "
                f"modes={len(self.coeffs)}, max|k|={self.max_abs_k()}, skew={self.skew})")

    # -- pointwise evaluation ----------------------------------------------

    def eval_at(self, theta, y=None):
        """Value F(theta + i y) at one point; theta, y are length-d reals."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.d,):
            raise ValueError("theta has wrong length")
        if y is None:
            y = np.zeros(self.d)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        acc = np.zeros((self.n, self.n), dtype=complex)
        for k, v in self.coeffs.items():
            ka = np.asarray(k, dtype=float)
            acc += v * cmath.exp(2j * math.pi * (ka @ theta + 1j * (ka @ y)))
        return acc

    def eval_many(self, thetas):
        """Values on an arbitrary list of real points, shape (M, d) or (M,) for d = 1.

        Returns an (M, n, n) stack. Meant for quasi-periodic sampling where a
        uniform grid does not apply; uses a dense phase matrix.
        """
        t = np.asarray(thetas, dtype=float)
        if t.ndim == 1:
            if self.d != 1:
                raise ValueError("flat theta list only valid for d = 1")
            t = t[:, None]
        m = t.shape[0]
        if not self.coeffs:
            return np.zeros((m, self.n, self.n), dtype=complex)
        keys = np.array(list(self.coeffs.keys()), dtype=float)       # (S, d)
        stack = np.stack(list(self.coeffs.values()))                  # (S, n, n)
        phases = np.exp(2j * np.pi * (keys @ t.T))                    # (S, M)
        return np.einsum("sm,sij->mij", phases, stack)

    def sample_grid(self, sizes):
        """Values on the uniform grid theta_j = j/N per axis, via inverse FFT.

        sizes: int (same per axis) or length-d list. Exact when every axis
        size exceeds twice the per-axis bandwidth.
        """
        if np.isscalar(sizes):
            sizes = [int(sizes)] * self.d
        sizes = [int(s) for s in sizes]
        placed = np.zeros(tuple(sizes) + (self.n, self.n), dtype=complex)
        for k, v in self.coeffs.items():
            idx = tuple(k[s] % sizes[s] for s in range(self.d))
            placed[idx] += v
        axes = tuple(range(self.d))
        vals = np.fft.ifftn(placed, axes=axes) * np.prod(sizes)
        return vals


def zero_map(d, n):
    return FourierMap(d, n, {}, skew=True)


def constant_map(mat, d, skew=False):
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    return FourierMap(d, mat.shape[0], {(0,) * d: mat}, skew=skew)


def identity_map(d, n):
    return constant_map(np.eye(n), d)


def grid_sizes_for(*maps, factor=4):
    """Common per-axis FFT sizes: next power of two >= factor*(max|k_s|+1)."""
    d = maps[0].d
    mx = [0] * d
    for f in maps:
        ax = f.max_axis_k()
        for s in range(d):
            mx[s] = max(mx[s], ax[s])
    return [next_pow2(factor * (m + 1)) for m in mx]


def coeffs_from_grid(vals, d, n, floor=GRID_OP_FLOOR, skew=False):
    """Inverse of sample_grid: FFT the grid values and collect signed modes."""
    axes = tuple(range(d))
    sizes = vals.shape[:d]
    c = np.fft.fftn(vals, axes=axes) / np.prod(sizes)
    norms = np.linalg.norm(c, ord=2, axis=(-2, -1))
    lead = float(norms.max()) if norms.size else 0.0
    out = {}
    if lead > 0.0:
        cut = floor * lead
        for idx in np.argwhere(norms > cut):
            k = tuple(int(i) if i < sizes[s] / 2 else int(i) - sizes[s]
                      for s, i in enumerate(idx))
            out[k] = c[tuple(idx)]
    return FourierMap(d, n, out, skew=skew, _floor=None)


# -- linear operations -------------------------------------------------------

def add(f, g, skew=None):
    if (f.d, f.n) != (g.d, g.n):
        raise ValueError("shape mismatch")
    out = {k: v.copy() for k, v in f.coeffs.items()}
    for k, v in g.coeffs.items():
        out[k] = out.get(k, 0) + v
    if skew is None:
        skew = f.skew and g.skew
    return FourierMap(f.d, f.n, out, skew=skew)


def sub(f, g):
    return add(f, scale(g, -1.0))


def scale(f, c):
    keep_skew = f.skew and float(np.imag(c)) == 0.0
    return FourierMap(f.d, f.n, {k: c * v for k, v in f.coeffs.items()}, skew=keep_skew)


def adjoint(f):
    """Pointwise conjugate transpose; inverts unitary-valued maps exactly."""
    out = {tuple(-x for x in k): v.conj().T for k, v in f.coeffs.items()}
    return FourierMap(f.d, f.n, out, skew=f.skew)


def shift(f, alpha):
    """F(. + alpha): multiplies Fhat(k) by exp(2 pi i <k,alpha>)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (f.d,):
        raise ValueError("alpha has wrong length")
    out = {}
    for k, v in f.coeffs.items():
        ph = cmath.exp(2j * math.pi * float(np.dot(k, alpha)))
        out[k] = ph * v
    return FourierMap(f.d, f.n, out, skew=f.skew)


def truncate(f, N):
    """Keep modes with |k|_1 <= N."""
    out = {k: v for k, v in f.coeffs.items() if l1(k) <= N}
    return FourierMap(f.d, f.n, out, skew=f.skew, _floor=None)


def remainder(f, N):
    """Drop modes with |k|_1 <= N (the tail R_N F)."""
    out = {k: v for k, v in f.coeffs.items() if l1(k) > N}
    return FourierMap(f.d, f.n, out, skew=f.skew, _floor=None)


def conj_by_constant(u, f, u_inv=None):
    """u F u_inv for a constant matrix u (no convolution needed).

    Defaults u_inv to u*, which preserves skewness; an explicit unlike
    right frame is a general two-sided product and drops the flag.
    """
    like_frames = u_inv is None
    if like_frames:
        u_inv = np.conj(u.T)
    out = {k: u @ v @ u_inv for k, v in f.coeffs.items()}
    return FourierMap(f.d, f.n, out, skew=f.skew and like_frames)


def multiply(f, g):
    """Pointwise product FG; coefficients are the convolution sum.

    Small supports convolve directly (exact); larger ones go through a padded
    FFT grid, which is also alias-free because the product bandwidth is the
    sum of bandwidths.
    """
    if (f.d, f.n) != (g.d, g.n):
        raise ValueError("shape mismatch")
    nf, ng = len(f.coeffs), len(g.coeffs)
    if nf == 0 or ng == 0:
        return zero_map(f.d, f.n)
    if nf * ng <= CONV_PAIR_LIMIT:
        out = {}
        for ka, va in f.coeffs.items():
            for kb, vb in g.coeffs.items():
                k = tuple(a + b for a, b in zip(ka, kb))
                prod = va @ vb
                if k in out:
                    out[k] = out[k] + prod
                else:
                    out[k] = prod
        return FourierMap(f.d, f.n, out)
    axf, axg = f.max_axis_k(), g.max_axis_k()
    sizes = [next_pow2(2 * (axf[s] + axg[s] + 1)) for s in range(f.d)]
    vals = f.sample_grid(sizes) @ g.sample_grid(sizes)
    return coeffs_from_grid(vals, f.d, f.n, floor=COEFF_FLOOR)


def product_chain(maps):
    """Left-to-right product maps[0] @ maps[1] @ ... as a single FourierMap."""
    acc = maps[0]
    for m in maps[1:]:
        acc = multiply(acc, m)
    return acc


# -- norms --------------------------------------------------------------------

def wiener_norm(f, h=0.0):
    """|F|_{1,h} = sum_k |Fhat(k)| e^{2 pi |k|_1 h}."""
    if h < 0:
        raise ValueError("h must be >= 0")
    tot = 0.0
    for k, v in f.coeffs.items():
        tot += spec_norm(v) * math.exp(2.0 * math.pi * l1(k) * h)
    return tot


def strip_sup_norm(f, h, grid=None):
    """Bracket the strip sup |F|_h: (grid lower bound, Wiener upper bound).

    The lower bound samples theta on a uniform grid and the imaginary parts on
    {-h, 0, +h}^d; the upper bound is wiener_norm(f, h).
    """
    if grid is None:
        grid = grid_sizes_for(f)
    if np.isscalar(grid):
        grid = [int(grid)] * f.d
    upper = wiener_norm(f, h)
    if not f.coeffs:
        return 0.0, upper
    ys = [0.0] if h == 0.0 else [-h, 0.0, h]
    lower = 0.0
    for y_combo in np.stack(np.meshgrid(*([ys] * f.d)), axis=-1).reshape(-1, f.d):
        damped = {}
        for k, v in f.coeffs.items():
            damped[k] = v * math.exp(-2.0 * math.pi * float(np.dot(k, y_combo)))
        fm = FourierMap(f.d, f.n, damped, _floor=None)
        vals = fm.sample_grid(grid)
        lower = max(lower, float(spec_norm(vals).max()))
    return lower, upper


def grid_sup(f, grid=None):
    """Grid sup of |F| on the real torus (lower bound for |F|_0)."""
    return strip_sup_norm(f, 0.0, grid)[0]


# -- pointwise matrix transcendentals ----------------------------------------

def expm_skew_stack(x):
    """exp of a stack of skew-Hermitian matrices via eigh of -i X."""
    x = np.asarray(x, dtype=complex)
    herm = -1j * x
    herm = 0.5 * (herm + np.conj(np.swapaxes(herm, -1, -2)))
    w, v = np.linalg.eigh(herm)
    phase = np.exp(1j * w)
    return np.einsum("...ij,...j,...kj->...ik", v, phase, v.conj())


def principal_log_unitary(u, tol=1e-8):
    """Principal matrix log of one (near-)unitary matrix, skew-projected.

    Uses the complex Schur form; for a normal matrix the triangular factor is
    diagonal to machine precision, so the log is the basis-conjugated log of
    the eigenvalues. Falls back to scipy's logm when the input is visibly not
    normal. Raises when an eigenvalue sits at -1 (branch cut).
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    if n == 1:
        lam = u[0, 0]
        if abs(lam + 1.0) < 1e-13:
            raise ValueError("log branch: eigenvalue at -1")
        x = np.array([[cmath.log(lam)]])
    else:
        t, z = scipy.linalg.schur(u, output="complex")
        off = t - np.diag(np.diag(t))
        if spec_norm(off) > tol * max(1.0, spec_norm(u)):
            x = scipy.linalg.logm(u)
        else:
            lam = np.diag(t)
            if np.any(np.abs(lam + 1.0) < 1e-13):
                raise ValueError("log branch: eigenvalue at -1")
            x = z @ np.diag(np.log(lam)) @ z.conj().T
    return 0.5 * (x - x.conj().T)


def log_unitary_stack(vals):
    """Principal log of a stack of (near-)unitary matrices, skew-projected."""
    vals = np.asarray(vals, dtype=complex)
    if vals.shape[-1] == 1:
        lam = vals[..., 0, 0]
        if np.any(np.abs(lam + 1.0) < 1e-13):
            raise ValueError("log branch: eigenvalue at -1")
        return np.log(lam)[..., None, None]
    flat = vals.reshape(-1, vals.shape[-2], vals.shape[-1])
    out = np.empty_like(flat)
    for i in range(flat.shape[0]):
        out[i] = principal_log_unitary(flat[i])
    return out.reshape(vals.shape)


# -- exp and log of maps -------------------------------------------------------

def _pointwise_transform(f, fn, grid, skew_out):
    """Grid transform with verified spectral convergence.

    With grid=None, starts from the power-of-two rule (4x bandwidth headroom)
    and doubles the grid until two successive transforms agree to 1e-13
    relative in Wiener norm; an explicit grid is used as given. Deterministic
    either way.
    """
    if grid is not None:
        vals = fn(f.sample_grid(grid))
        return coeffs_from_grid(vals, f.d, f.n, floor=GRID_OP_FLOOR, skew=skew_out)
    sizes = grid_sizes_for(f)
    prev = coeffs_from_grid(fn(f.sample_grid(sizes)), f.d, f.n,
                            floor=GRID_OP_FLOOR, skew=skew_out)
    while max(sizes) <= 8192:
        sizes = [2 * s for s in sizes]
        cur = coeffs_from_grid(fn(f.sample_grid(sizes)), f.d, f.n,
                               floor=GRID_OP_FLOOR, skew=skew_out)
        gap = wiener_norm(sub(cur, prev), 0.0)
        if gap <= 1e-13 * max(1.0, wiener_norm(cur, 0.0)):
            return cur
        prev = cur
    raise RuntimeError("grid transform did not stabilize below 8192 points per axis")


def exp_map(f, grid=None):
    """exp(F) as a FourierMap, for skew-Hermitian-valued F; output is unitary-valued.

    Exponentiated pointwise through the eigendecomposition of -iF, transformed
    back, and floored at 1e-14 relative.
    """
    if not f.skew:
        raise ValueError("exp_map requires a skew-flagged map")
    if f.is_constant():
        return constant_map(expm_skew_stack(f.constant_part()), f.d)

    def fn(vals):
        if f.n == 1:
            return np.exp(vals)
        return expm_skew_stack(vals)

    return _pointwise_transform(f, fn, grid, skew_out=False)


def log_map(g, grid=None):
    """Principal log of a unitary-valued map, skew-projected pointwise.

    Requires the grid sup of |G - I| to stay below 1, which keeps every
    eigenvalue safely off the branch cut at -1.
    """
    if g.is_constant():
        x = principal_log_unitary(g.constant_part())
        return constant_map(x, g.d, skew=True)
    probe = g.sample_grid(grid if grid is not None else grid_sizes_for(g))
    dist = float(spec_norm(probe - np.eye(g.n)).max())
    if dist >= 1.0:
        raise ValueError(f"log branch: grid sup |G - I| = {dist:.3f} >= 1")

    def fn(vals):
        if g.n == 1:
            logs = np.log(vals)
        else:
            logs = log_unitary_stack(vals)
        return 0.5 * (logs - np.conj(np.swapaxes(logs, -1, -2)))

    return _pointwise_transform(g, fn, grid, skew_out=True)


# -- cocycles -----------------------------------------------------------------

def cocycle_iterate(alpha, a, k):
    """k-th iterate A_k of the cocycle (alpha, A) over theta -> theta + alpha.

    A_0 = I, A_k(theta) = A(theta + (k-1) alpha) ... A(theta) for k > 0, and
    A_{-k}(theta) = A_k(theta - k alpha)^{-1} (adjoint, since A is unitary
    valued). Satisfies the group law A_{j+k} = A_j(. + k alpha) A_k.
    """
    k = int(k)
    if k == 0:
        return identity_map(a.d, a.n)
    if k < 0:
        pos = cocycle_iterate(alpha, a, -k)
        alpha_v = np.atleast_1d(np.asarray(alpha, dtype=float))
        return adjoint(shift(pos, k * alpha_v))
    alpha_v = np.atleast_1d(np.asarray(alpha, dtype=float))
    acc = a
    for j in range(1, k):
        acc = multiply(shift(a, j * alpha_v), acc)
    return acc


# -- constants ------------------------------------------------------------------

@dataclass(frozen=True)
class UnitaryConstant:
    """A constant unitary with a deterministic eigenstructure.

    basis columns are orthonormal eigenvectors, mat = basis diag(eigs) basis^*,
    eigenvalues sorted by phase in [0, 2 pi). phases are the angles / (2 pi).
    """

    mat: np.ndarray
    eigs: np.ndarray
    basis: np.ndarray

    @staticmethod
    def from_matrix(m, tol=1e-9):
        m = np.atleast_2d(np.asarray(m, dtype=complex))
        n = m.shape[0]
        if spec_norm(m @ m.conj().T - np.eye(n)) > tol:
            raise ValueError("matrix is not unitary within tolerance")
        if n == 1:
            eigs = np.array([m[0, 0]])
            basis = np.eye(1, dtype=complex)
        else:
            t, z = scipy.linalg.schur(m, output="complex")
            eigs = np.diag(t).copy()
            basis = z
        ang = np.mod(np.angle(eigs), 2.0 * np.pi)
        order = np.argsort(ang, kind="stable")
        eigs = eigs[order]
        basis = basis[:, order]
        mm = m.copy()
        mm.setflags(write=False)
        eigs.setflags(write=False)
        basis.setflags(write=False)
        return UnitaryConstant(mm, eigs, basis)

    @property
    def n(self):
        return self.mat.shape[0]

    @property
    def phases(self):
        return np.mod(np.angle(self.eigs), 2.0 * np.pi) / (2.0 * np.pi)

    def diagonalizer(self):
        """S with S mat S^* diagonal (S = basis^*)."""
        return self.basis.conj().T

    def recon_error(self):
        d = self.basis @ np.diag(self.eigs) @ self.basis.conj().T - self.mat
        return float(spec_norm(d))


# -- serialization ---------------------------------------------------------------

def to_json_dict(f):
    """Schema: {d, n, skew, coeffs: [{k: [...], entries: [{p,q,re,im}, ...]}]}.

    p, q are 1-based; only nonzero entries are written; deterministic order.
    """
    coeffs = []
    for k in f.support():
        v = f.coeffs[k]
        entries = []
        for p in range(f.n):
            for q in range(f.n):
                z = v[p, q]
                if z != 0:
                    entries.append({"p": p + 1, "q": q + 1,
                                    "re": float(z.real), "im": float(z.imag)})
        coeffs.append({"k": list(k), "entries": entries})
    return {"d": f.d, "n": f.n, "skew": bool(f.skew), "coeffs": coeffs}


def from_json_dict(obj):
    try:
        d = int(obj["d"])
        n = int(obj["n"])
        skew = bool(obj.get("skew", False))
        coeffs = {}
        for rec in obj["coeffs"]:
            k = tuple(int(x) for x in rec["k"])
            mat = np.zeros((n, n), dtype=complex)
            for e in rec["entries"]:
                p, q = int(e["p"]) - 1, int(e["q"]) - 1
                if not (0 <= p < n and 0 <= q < n):
                    raise ValueError(f"entry index ({e['p']},{e['q']}) out of range")
                mat[p, q] = float(e["re"]) + 1j * float(e["im"])
            coeffs[k] = mat
        return FourierMap(d, n, coeffs, skew=skew, _floor=None)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed coefficient record: {exc}") from exc
