"""Exact finite-N correlation kernel of two-speed TASEP with step initial data.

Rates are v_i = alpha for i <= M and 1 otherwise.  All contour integrals are
normalised by 1/(2 pi i) and evaluated with the trapezoid rule on circles.
Functions accept scalar or array ``x`` and return real numpy arrays of the
same shape.

Conventions:

* ``psi(n, t, j, x)`` is Psi^{n,t}_{n-j}(x); for j <= n its integrand is
  e^{tw} prod_{i=j+1}^{n}(w - v_i) / w^{x+n-M+1} around 0, for j > n the
  product becomes 1/prod_{i=n+1}^{j}(w - v_i) and the circle must enclose
  alpha and 1 as well.
* ``phi_fn(n, t, j, x)`` is Phi^{n,t}_{n-j}(x), in three cases:
  (a) n <= M, (b) n >= M with j > M, (c) n > M with j <= M.
* ``kernel`` = -phi * gate + sum_{k=1}^{n2} psi(n1,t1,k,x1) phi_fn(n2,t2,k,x2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import SpaceLikePoint, as_point, precedes


def _circle(center, radius, n):
    e = np.exp(2j * np.pi * np.arange(n) / n)
    return center + radius * e, radius * e / n


@dataclass(frozen=True)
class KernelContext:
    """Parameters of the two-speed system plus the contour plan.

    ``A`` is the auxiliary constant of g(z, v).  The default ``inf`` uses the
    limit g = 1; finite values evaluate the closed form with its O(1/A) error.
    """
    M: int
    alpha: float
    A: float = math.inf
    nodes: int = 128
    v_radius: Optional[float] = None
    hat_w_radius: Optional[float] = None
    hat1_v_radius: float = 0.2
    hat1_w_radius: float = 0.6
    phi_hat_radius: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.M < 0:
            raise ValueError("M must be nonnegative")
        if self.nodes < 16:
            raise ValueError("need at least 16 nodes per circle")
        self._check_plan()

    # contour plan -------------------------------------------------------
    @property
    def rv(self) -> float:
        return self.v_radius if self.v_radius is not None else min(self.alpha, 1 - self.alpha) / 4

    @property
    def rw_hat(self) -> float:
        return self.hat_w_radius if self.hat_w_radius is not None else self.alpha / 2

    @property
    def z_center(self) -> float:
        return (self.alpha - 1) / 2

    @property
    def z_radius(self) -> float:
        return 0.5

    def _check_plan(self):
        a, rv = self.alpha, self.rv
        # Phi case (c): z circle encloses 0 and the v circle, excludes -1
        if not (abs(self.z_center - (a - 1)) + rv < self.z_radius and self.z_center - self.z_radius > -1):
            raise ValueError("z contour must enclose {0, v} and exclude -1")
        # hat K1: |v - 1| < |w - 1| for every pair of nodes, and w excludes 1
        if not self.hat1_v_radius < 1 - self.hat1_w_radius:
            raise ValueError("hat K1 contours violate |v-1| < |w-1|")
        # hat K2 (after the shift v -> v-1, z -> z-1): |v - alpha| < |w - alpha|
        if not self.rw_hat + rv < a:
            raise ValueError("hat K2 contours violate |v-alpha| < |w-alpha|")
        if not (abs(self.phi_hat_radius) < 1):
            raise ValueError("phi-hat circle must exclude 1")
        if math.isfinite(self.A) and self.A < 10 * (1 + 1.5):
            raise ValueError("A must dominate every contour radius (A >= 25)")

    def rate(self, i: int) -> float:
        return self.alpha if i <= self.M else 1.0


def _as_x(x):
    arr = np.asarray(x)
    return arr.shape, np.atleast_1d(arr).astype(np.int64).ravel()


def _coef_radius(m, t, rmin, rmax=60.0):
    """Saddle radius of e^{tw}/w^{m+1}, kept inside [rmin, rmax]."""
    m = np.asarray(m, dtype=float)
    if t <= 0:
        return np.full(m.shape, rmin)
    return np.clip((np.maximum(m, 0) + 1) / t, rmin, max(rmin, rmax))


# ---------------------------------------------------------------- Psi ---
def psi(ctx: KernelContext, n: int, t: float, j: int, x):
    """Psi^{n,t}_{n-j}(x)."""
    shape, xs = _as_x(x)
    M = ctx.M
    m = xs + n - M
    if j <= n:
        roots = [ctx.rate(i) for i in range(j + 1, n + 1)]
        poles = []
    else:
        roots = []
        poles = [ctx.rate(i) for i in range(n + 1, j + 1)]
    rmin = 1.5 if poles else 0.5
    r = _coef_radius(m, t, rmin)
    e = np.exp(2j * np.pi * np.arange(ctx.nodes) / ctx.nodes)
    w = r[:, None] * e[None, :]
    logf = t * w - (m[:, None] + 1) * np.log(w)
    f = np.exp(logf) * w / ctx.nodes
    for v in roots:
        f = f * (w - v)
    for v in poles:
        f = f / (w - v)
    out = f.sum(axis=1).real
    if not poles:
        out[m < 0] = 0.0
    return out.reshape(shape) if shape else float(out[0])


# ---------------------------------------------------------------- Phi ---
def g_factor(ctx: KernelContext, z, v, j: int):
    """g(z, v) = (2z + A)/(z + v + A) * ((z + A)/(v + A))^{M-j}; 1 when A is infinite."""
    if not math.isfinite(ctx.A):
        return np.ones(np.broadcast(z, v).shape)
    A = ctx.A
    return (2 * z + A) / (z + v + A) * ((z + A) / (v + A)) ** (ctx.M - j)


def phi_fn(ctx: KernelContext, n: int, t: float, j: int, x):
    """Phi^{n,t}_{n-j}(x)."""
    if not 1 <= j <= n:
        raise ValueError("need 1 <= j <= n")
    shape, xs = _as_x(x)
    M, a = ctx.M, ctx.alpha
    m = (xs + n - M).astype(float)
    if n <= M or j >= M + 1:
        if n <= M:
            center, radius = a - 1, min(a, 1 - a) / 2
        else:
            center, radius = 0.0, 0.5
        order = n - j + 1
        v, dv = _circle(center, radius, ctx.nodes)
        base = np.exp(-t * (v + 1)) / (v - center) ** order * dv
        out = (base[None, :] * np.exp(m[:, None] * np.log1p(v)[None, :])).sum(axis=1).real
    else:
        out = _phi_case_c(ctx, n, t, j, m)
    return out.reshape(shape) if shape else float(out[0])


def _phi_case_c(ctx, n, t, j, m):
    M, a = ctx.M, ctx.alpha
    v, dv = _circle(a - 1, ctx.rv, ctx.nodes)
    z, dz = _circle(ctx.z_center, ctx.z_radius, 2 * ctx.nodes)
    zpart = dz / (z ** (n - M) * np.exp(t * (z + 1)))
    vpart = dv / (v - a + 1) ** (M - j + 1)
    pair = 1.0 / (z[None, :] - v[:, None]) * g_factor(ctx, z[None, :], v[:, None], j)
    # sum over v first, then over z against (1+z)^m
    zw = (vpart[:, None] * pair).sum(axis=0) * zpart
    powers = np.exp(m[:, None] * np.log1p(z)[None, :])
    return (powers * zw[None, :]).sum(axis=1).real


# ---------------------------------------------------- bi-orthogonality ---
def biorth_matrix(ctx: KernelContext, n: int, t: float, tail_tol: float = 1e-14, max_terms: int = 400):
    """Gram matrix G[j-1, k-1] = sum_{x >= M-n} Psi_{n-j}(x) Phi_{n-k}(x).

    Terms are added in blocks until a whole block contributes less than
    ``tail_tol``; raises if ``max_terms`` is reached first.
    """
    x0 = ctx.M - n
    G = np.zeros((n, n))
    start, block = 0, 24
    while True:
        xs = np.arange(x0 + start, x0 + start + block)
        P = np.array([psi(ctx, n, t, j, xs) for j in range(1, n + 1)])
        F = np.array([phi_fn(ctx, n, t, k, xs) for k in range(1, n + 1)])
        contrib = P @ F.T
        G += contrib
        start += block
        if np.abs(contrib).max() < tail_tol and start > 2 * block:
            return G
        if start >= max_terms:
            raise ArithmeticError("bi-orthogonality sum did not converge; check contour radii")


def biorth_inner(ctx: KernelContext, n: int, t: float, j: int, k: int, tail_tol: float = 1e-14) -> float:
    if not (1 <= j <= n and 1 <= k <= n):
        raise ValueError("need 1 <= j, k <= n")
    return float(biorth_matrix(ctx, n, t, tail_tol)[j - 1, k - 1])


# ------------------------------------------------------- transition ---
def phi_transition(ctx: KernelContext, p1, x1, p2, x2, form: str = "full"):
    """Free transition term between ordered points; 0 when p1 does not precede p2.

    form="full": circle enclosing 0, alpha and 1 with 1/prod_{k=n1+1}^{n2}(w - v_k).
    form="hat":  circle around 0 only with (w - 1)^{-(n2-n1)}, valid for n1 >= M.
    """
    p1, p2 = as_point(p1), as_point(p2)
    x1a, x2a = np.broadcast_arrays(np.asarray(x1), np.asarray(x2))
    shape = x1a.shape
    if not precedes(p1, p2):
        return np.zeros(shape) if shape else 0.0
    n1, n2, dt = p1.n, p2.n, p1.t - p2.t
    m = (np.atleast_1d(x1a).ravel() + n1 - np.atleast_1d(x2a).ravel() - n2).astype(float)
    e = np.exp(2j * np.pi * np.arange(ctx.nodes) / ctx.nodes)
    if form == "full":
        poles = [ctx.rate(k) for k in range(n1 + 1, n2 + 1)]
        r = _coef_radius(m, dt, 1.5 if poles else 0.5)
    elif form == "hat":
        if n1 < ctx.M:
            raise ValueError("the hat form needs n1 >= M")
        poles = [1.0] * (n2 - n1)
        r = np.full(m.shape, ctx.phi_hat_radius)
    else:
        raise ValueError(f"unknown form {form!r}")
    w = r[:, None] * e[None, :]
    f = np.exp(dt * w - (m[:, None] + 1) * np.log(w)) * w / ctx.nodes
    for v in poles:
        f = f / (w - v)
    out = f.sum(axis=1).real
    if not poles:
        out[m < 0] = 0.0
    return out.reshape(shape) if shape else float(out[0])


# ----------------------------------------------------------- K1, K2 ---
def _sum_part(ctx, p1, x1, p2, x2, ks):
    p1, p2 = as_point(p1), as_point(p2)
    x1a, x2a = np.broadcast_arrays(np.asarray(x1), np.asarray(x2))
    total = np.zeros(np.atleast_1d(x1a).shape)
    for k in ks:
        total = total + np.atleast_1d(psi(ctx, p1.n, p1.t, k, x1a)) * np.atleast_1d(phi_fn(ctx, p2.n, p2.t, k, x2a))
    return total.reshape(x1a.shape) if x1a.shape else float(total[0])


def k1_sum(ctx: KernelContext, p1, x1, p2, x2):
    """sum_{j=M+1}^{n2} Psi^{n1,t1}_{n1-j}(x1) Phi^{n2,t2}_{n2-j}(x2)."""
    return _sum_part(ctx, p1, x1, p2, x2, range(ctx.M + 1, as_point(p2).n + 1))


def k2_sum(ctx: KernelContext, p1, x1, p2, x2):
    """sum_{j=1}^{min(M, n2)} Psi^{n1,t1}_{n1-j}(x1) Phi^{n2,t2}_{n2-j}(x2)."""
    return _sum_part(ctx, p1, x1, p2, x2, range(1, min(ctx.M, as_point(p2).n) + 1))


def _hat_check(ctx, p1, p2):
    if p1.n < ctx.M + 1 or p2.n < ctx.M + 1:
        raise ValueError("hat forms need n1, n2 >= M + 1")


def k1_hat_matrix(ctx: KernelContext, p1, xs1, p2, xs2):
    """Resummed double integral for K1 on the grid xs1 x xs2."""
    p1, p2 = as_point(p1), as_point(p2)
    _hat_check(ctx, p1, p2)
    M = ctx.M
    m1 = np.asarray(xs1, dtype=float) + p1.n - M
    m2 = np.asarray(xs2, dtype=float) + p2.n - M
    w, dw = _circle(0.0, ctx.hat1_w_radius, ctx.nodes)
    v, dv = _circle(1.0, ctx.hat1_v_radius, ctx.nodes)
    W = np.exp(p1.t * w) * (w - 1) ** (p1.n - M) / w * dw
    W = W[None, :] * np.exp(-m1[:, None] * np.log(w)[None, :])
    V = dv / ((v - 1) ** (p2.n - M) * np.exp(p2.t * v))
    V = V[:, None] * np.exp(m2[None, :] * np.log(v)[:, None])
    C = 1.0 / (w[:, None] - v[None, :])
    return (W @ C @ V).real


def k2_hat_matrix(ctx: KernelContext, p1, xs1, p2, xs2):
    """Resummed triple integral for K2 on the grid xs1 x xs2 (v near alpha, z around {1, v}, w near 0)."""
    p1, p2 = as_point(p1), as_point(p2)
    _hat_check(ctx, p1, p2)
    M, a = ctx.M, ctx.alpha
    if M == 0:
        return np.zeros((len(xs1), len(xs2)))
    m1 = np.asarray(xs1, dtype=float) + p1.n - M
    m2 = np.asarray(xs2, dtype=float) + p2.n - M
    v, dv = _circle(a, ctx.rv, ctx.nodes)
    z, dz = _circle((1 + a) / 2, 0.5, 2 * ctx.nodes)
    w, dw = _circle(0.0, ctx.rw_hat, ctx.nodes)
    W = np.exp(p1.t * w) * (w - 1) ** (p1.n - M) * (w - a) ** M / w * dw
    W = W[None, :] * np.exp(-m1[:, None] * np.log(w)[None, :])
    Z = dz / ((z - 1) ** (p2.n - M) * np.exp(p2.t * z))
    Z = Z[:, None] * np.exp(m2[None, :] * np.log(z)[:, None])
    vw = dv / (v - a) ** M
    left = W @ (1.0 / (w[:, None] - v[None, :]))      # (x1, v)
    right = (1.0 / (z[None, :] - v[:, None])) @ Z      # (v, x2)
    base = ((left * vw[None, :]) @ right).real
    if not math.isfinite(ctx.A):
        return base
    # finite A: base plus the integral of (g-factor rational - 1/(w - v)), which is O(1/A);
    # summing only the correction keeps the A = inf value's accuracy
    eps = 1.0 / ctx.A
    V3, Z3, W3 = v[:, None, None], z[None, :, None], w[None, None, :]
    B = (Z3 - 1) * (W3 - a) - (V3 - 1) * (V3 - a)
    logg = (_log1p(2 * eps * (Z3 - 1)) - _log1p(eps * (Z3 + V3 - 2))
            + M * (_log1p(eps * (Z3 - 1)) - _log1p(eps * (V3 - 1))) + _log1p(eps * (V3 - 1)))
    diff = (_expm1(logg) * (W3 - V3) - eps * B) / (((W3 - V3) + eps * B) * (W3 - V3))
    core = diff * vw[:, None, None] / (Z3 - V3)            # (v, z, w)
    return base + np.einsum("iw,vzw,zj->ij", W, core, Z).real


def _log1p(z):
    """log(1 + z) accurate for small complex z."""
    u = 1 + z
    d = u - 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(d == 0, z, np.log(u) * z / np.where(d == 0, 1, d))


def _expm1(z):
    """exp(z) - 1 accurate for small complex z."""
    u = np.exp(z)
    d = u - 1
    lu = np.log(u)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(d == 0, z, d * z / np.where(lu == 0, 1, lu))


def _scalar_hat(fn, ctx, p1, x1, p2, x2):
    x1a, x2a = np.broadcast_arrays(np.asarray(x1), np.asarray(x2))
    flat1, flat2 = np.atleast_1d(x1a).ravel(), np.atleast_1d(x2a).ravel()
    out = np.array([fn(ctx, p1, [a], p2, [b])[0, 0] for a, b in zip(flat1, flat2)])
    return out.reshape(x1a.shape) if x1a.shape else float(out[0])


def k1_hat(ctx: KernelContext, p1, x1, p2, x2):
    return _scalar_hat(k1_hat_matrix, ctx, p1, x1, p2, x2)


def k2_hat(ctx: KernelContext, p1, x1, p2, x2):
    return _scalar_hat(k2_hat_matrix, ctx, p1, x1, p2, x2)


# ------------------------------------------------------- full kernel ---
def kernel_matrix(ctx: KernelContext, p1, xs1, p2, xs2, method: str = "definition"):
    """K(p1, x1; p2, x2) on the grid xs1 x xs2.

    method="definition": -phi * gate + sum over all k of Psi Phi.
    method="hat": -phi_hat * gate + K1_hat + K2_hat (needs n1, n2 > M, and the
    two points comparable in the space-like order; for n1 < n2 with t1 < t2
    the resummation drops the w = 1 residue and the forms differ).
    """
    p1, p2 = as_point(p1), as_point(p2)
    if method == "hat" and not ((p1.n >= p2.n and p1.t <= p2.t) or (p1.n <= p2.n and p1.t >= p2.t)):
        raise ValueError("the hat assembly needs space-like comparable points")
    xs1 = np.asarray(xs1, dtype=np.int64)
    xs2 = np.asarray(xs2, dtype=np.int64)
    if method == "definition":
        P = np.array([psi(ctx, p1.n, p1.t, k, xs1) for k in range(1, p2.n + 1)])
        F = np.array([phi_fn(ctx, p2.n, p2.t, k, xs2) for k in range(1, p2.n + 1)])
        K = P.T @ F
        form = "full"
    elif method == "hat":
        K = k1_hat_matrix(ctx, p1, xs1, p2, xs2) + k2_hat_matrix(ctx, p1, xs1, p2, xs2)
        form = "hat"
    else:
        raise ValueError(f"unknown method {method!r}")
    if precedes(p1, p2):
        X1, X2 = np.meshgrid(xs1, xs2, indexing="ij")
        K = K - phi_transition(ctx, p1, X1, p2, X2, form=form)
    return K


def kernel(ctx: KernelContext, p1, x1, p2, x2, method: str = "definition") -> float:
    return float(kernel_matrix(ctx, p1, [x1], p2, [x2], method)[0, 0])


# ------------------------------------------------------------- gauge ---
@dataclass(frozen=True)
class GaugeFactor:
    """Diagonal conjugation D(n, t, x) = e^{alpha t} (alpha - 1)^n / alpha^{x + n}.

    Stored as log-magnitude plus sign so that ratios never overflow.
    """
    alpha: float

    def log_abs(self, n, t, x):
        a = self.alpha
        return a * t + n * math.log(1 - a) - (np.asarray(x) + n) * math.log(a)

    def sign(self, n):
        return -1.0 if n % 2 else 1.0

    def ratio(self, p1, x1, p2, x2):
        """D(p2, x2) / D(p1, x1), the factor multiplying K(p1, x1; p2, x2)."""
        p1, p2 = as_point(p1), as_point(p2)
        s = self.sign(p1.n) * self.sign(p2.n)
        return s * np.exp(self.log_abs(p2.n, p2.t, x2) - self.log_abs(p1.n, p1.t, x1))

    def conjugate(self, K, index):
        """Apply the gauge to a matrix indexed by [(point, x), ...]."""
        d = np.array([self.log_abs(p.n, p.t, x) for p, x in index])
        s = np.array([self.sign(p.n) for p, _ in index])
        return K * np.exp(d[None, :] - d[:, None]) * (s[:, None] * s[None, :])
