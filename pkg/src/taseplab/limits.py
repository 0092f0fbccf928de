"""Special functions and limiting kernels: Airy, Hermite/DBM, extended Airy, DBM->2.

Contour integrals here are normalised by 1/(2 pi i).  gamma1 runs from
e^{-2 pi i/3} infinity to e^{2 pi i/3} infinity, gamma2 from e^{pi i/3}
infinity to e^{-pi i/3} infinity.

Hermite polynomials are orthonormal for the weight e^{-x^2/2}:
p_k(x) = H_k(x/sqrt 2) (2 pi)^{-1/4} 2^{-k/2} (k!)^{-1/2}.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .contour import Circle, VerticalLine, airy_contour

AIRY_RANGE = 40.0


@lru_cache(maxsize=32)
def _gl(n):
    return roots_legendre(n)


# --------------------------------------------------------------- Airy ---
def airy_series(x, terms: int = 120):
    """Maclaurin series of (Ai, Ai'); accurate for |x| <= 6 or so."""
    x = np.asarray(x, dtype=float)
    c1 = 1 / (3 ** (2 / 3) * math.gamma(2 / 3))
    c2 = 1 / (3 ** (1 / 3) * math.gamma(1 / 3))
    x3 = x ** 3
    f = np.ones_like(x)
    g = x.copy()
    fp = np.zeros_like(x)
    gp = np.ones_like(x)
    tf, tg = np.ones_like(x), x.copy()
    for k in range(terms):
        tf = tf * x3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * x3 / ((3 * k + 3) * (3 * k + 4))
        f = f + tf
        g = g + tg
        # derivative of x^{3k+3}/(..) term is (3k+3) x^{3k+2}/(..)
        with np.errstate(divide="ignore", invalid="ignore"):
            fp = fp + np.where(x != 0, tf * (3 * k + 3) / x, 0.0)
            gp = gp + np.where(x != 0, tg * (3 * k + 4) / x, 0.0)
    return c1 * f - c2 * g, c1 * fp - c2 * gp


def _airy_paths(x, n_ray=80, ray_length=6.0):
    """Quadrature nodes and weights (per x) for -(1/2 pi i) int_{gamma2} e^{w^3/3 - x w} dw.

    For x >= 0 the wedge has its vertex at the saddle sqrt(x).  For x < 0 the
    path climbs the imaginary axis between the saddles -i sqrt|x| and
    i sqrt|x| and leaves along the steepest-descent rays, so no large terms
    cancel.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    gx, gw = _gl(n_ray)
    r = (gx + 1) / 2 * ray_length
    wr = gw / 2 * ray_length
    e_up, e_dn = np.exp(1j * np.pi / 3), np.exp(-1j * np.pi / 3)
    pos = x >= 0
    s = np.sqrt(np.abs(x))
    n_seg = int(48 + 2.0 * (s[~pos].max() ** 3 if np.any(~pos) else 0))
    sx, sw = _gl(n_seg)
    # incoming ray on the upper side, traversed toward its origin
    top = np.where(pos, s, 0.0)[:, None] + np.where(pos, 0.0, s)[:, None] * 1j
    bot = np.conj(top)
    w_in = top + r[None, :] * e_up
    d_in = -wr[None, :] * e_up * np.ones_like(top)
    w_out = bot + r[None, :] * e_dn
    d_out = wr[None, :] * e_dn * np.ones_like(top)
    # imaginary-axis segment from i s down to -i s (zero length when x >= 0)
    seg_len = np.where(pos, 0.0, s)
    w_seg = 1j * seg_len[:, None] * (-sx[None, :])
    d_seg = -1j * seg_len[:, None] * sw[None, :]
    w = np.concatenate([w_in, w_seg, w_out], axis=1)
    d = np.concatenate([d_in, d_seg, d_out], axis=1) / (2j * np.pi)
    return x, w, -d


def airy_contour_identity(a: float, b: float, vertex: float = 1.0) -> float:
    """-(1/2 pi i) int_{gamma2} e^{w^3/3 + a w^2 + b w} dw, which equals Ai(a^2 - b) e^{2a^3/3 - ab}."""
    c = airy_contour(vertex, 2, length=10.0, nodes=160)
    z, dz = c.nodes()
    return float(-np.sum(np.exp(z ** 3 / 3 + a * z ** 2 + b * z) * dz).real)


def airy_pair(x):
    """(Ai(x), Ai'(x)) from the contour formula; |x| <= 40."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > AIRY_RANGE):
        raise ValueError(f"Airy argument outside [-{AIRY_RANGE}, {AIRY_RANGE}]")
    flat, w, d = _airy_paths(arr.ravel())
    e = np.exp(w ** 3 / 3 - flat[:, None] * w) * d
    ai = e.sum(axis=1).real
    aip = (-w * e).sum(axis=1).real
    return ai.reshape(arr.shape), aip.reshape(arr.shape)


def airy(x):
    """Airy function Ai via its contour integral."""
    ai = airy_pair(x)[0]
    return ai if np.ndim(ai) else float(ai)


def airy_prime(x):
    aip = airy_pair(x)[1]
    return aip if np.ndim(aip) else float(aip)


def airy_kernel(x, y):
    """Static Airy kernel (Ai(x)Ai'(y) - Ai'(x)Ai(y))/(x - y) on the outer product of x and y."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ax, apx = airy_pair(x)
    ay, apy = airy_pair(y)
    X, Y = np.meshgrid(x, y, indexing="ij")
    num = ax[:, None] * apy[None, :] - apx[:, None] * ay[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = num / (X - Y)
    diag = np.isclose(X, Y, rtol=0, atol=1e-10)
    if np.any(diag):
        Kd = apx[:, None] ** 2 - X * ax[:, None] ** 2
        K = np.where(diag, Kd, K)
    return K


# ------------------------------------------------------- extended Airy ---
def gaussian_airy_convolution(delta: float, s1, s2):
    """int_R e^{lambda delta} Ai(s1 + lambda) Ai(s2 + lambda) d lambda in closed form (delta > 0)."""
    s1, s2 = np.asarray(s1, dtype=float), np.asarray(s2, dtype=float)
    return np.exp(-(s2 - s1) ** 2 / (4 * delta) - delta * (s1 + s2) / 2 + delta ** 3 / 12) / np.sqrt(4 * np.pi * delta)


def _lambda_block(tau1, x1, tau2, x2, nodes):
    delta = tau1 - tau2          # weight e^{-lambda delta} on [0, inf)
    lo = min(np.min(x1), np.min(x2))
    length = max(18.0 - lo, 4.0) + 2.0 * max(-delta, 0.0) ** 2
    if lo + length > AIRY_RANGE:
        length = AIRY_RANGE - lo
    gx, gw = _gl(nodes)
    lam = (gx + 1) / 2 * length
    wl = gw / 2 * length * np.exp(-lam * delta)
    A1 = airy_pair(x1[:, None] + lam[None, :])[0]
    A2 = airy_pair(x2[:, None] + lam[None, :])[0]
    return (A1 * wl[None, :]) @ A2.T


def extended_airy_block(tau1, x1, tau2, x2, nodes: int = 120, verify: bool = False, tol: float = 1e-9):
    """Extended Airy kernel on the grid x1 x x2 from the lambda integral.

    tau1 >= tau2: int_0^inf e^{-lambda(tau1-tau2)} Ai(x1+lambda) Ai(x2+lambda).
    tau1 < tau2: -int_{-inf}^0 of the same integrand, evaluated as the
    [0, inf) part minus the closed-form integral over the whole line.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if tau1 == tau2:
        return airy_kernel(x1, x2)
    K = _lambda_block(tau1, x1, tau2, x2, nodes)
    if verify:
        K2 = _lambda_block(tau1, x1, tau2, x2, 2 * nodes)
        if np.max(np.abs(K2 - K)) > tol:
            raise ArithmeticError("lambda quadrature did not stabilise")
        K = K2
    if tau1 < tau2:
        K = K - gaussian_airy_convolution(tau2 - tau1, x1[:, None], x2[None, :])
    return K


def airy_gauge_exponent(tau1, s1, tau2, s2):
    """G = (tau2^3 - tau1^3)/3 - (tau2 s2 - tau1 s1); the contour form equals e^{-G} K."""
    return (tau2 ** 3 - tau1 ** 3) / 3 - (tau2 * s2 - tau1 * s1)


def _wedge_nodes(vertex, kind, length=9.0, nodes=120):
    return airy_contour(vertex, kind, length, nodes).nodes()


def _contour_block(M, tau1, x1, tau2, x2, v1, v2, nodes):
    """Gaussian term plus int_{gamma2} dw2 int_{gamma1} dw1 e^{f(w2;2)}/e^{f(w1;1)} (w1/w2)^M/(w1 - w2)."""
    w1, d1 = _wedge_nodes(v1, 1, nodes=nodes)
    w2, d2 = _wedge_nodes(v2, 2, nodes=nodes)
    sb1 = x1 - tau1 ** 2
    sb2 = x2 - tau2 ** 2
    F1 = np.exp(-(w1[None, :] ** 3 / 3 + tau1 * w1[None, :] ** 2 - sb1[:, None] * w1[None, :])) * (w1 ** M * d1)[None, :]
    F2 = np.exp(w2[None, :] ** 3 / 3 + tau2 * w2[None, :] ** 2 - sb2[:, None] * w2[None, :]) * (d2 / w2 ** M)[None, :]
    C = 1.0 / (w1[:, None] - w2[None, :])
    K = (F1 @ C @ F2.T).real
    if tau2 > tau1:
        D = tau2 - tau1
        K = K - np.exp(-(sb2[None, :] - sb1[:, None]) ** 2 / (4 * D)) / np.sqrt(4 * np.pi * D)
    return K


def extended_airy_kernel(tau1, s1, tau2, s2, method: str = "lambda", conjugated: bool = False,
                         vertices=(-1.0, 1.0), nodes: int = 120) -> float:
    """Extended Airy kernel.

    method="lambda": the lambda-integral form.
    method="contour": the double-contour form times e^{G} (see airy_gauge_exponent).
    With conjugated=True the value is multiplied by e^{-G}, i.e. the bare contour form.
    """
    x1, x2 = np.array([s1], float), np.array([s2], float)
    if method == "lambda":
        val = float(extended_airy_block(tau1, x1, tau2, x2, verify=True)[0, 0])
        if conjugated:
            val *= math.exp(-airy_gauge_exponent(tau1, s1, tau2, s2))
        return val
    if method == "contour":
        if not vertices[0] < vertices[1]:
            raise ValueError("gamma1 vertex must lie left of gamma2 vertex")
        val = float(_contour_block(0, tau1, x1, tau2, x2, vertices[0], vertices[1], nodes)[0, 0])
        return val if conjugated else val * math.exp(airy_gauge_exponent(tau1, s1, tau2, s2))
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ DBM -> 2 ---
def dbm_to_2_block(M, tau1, x1, tau2, x2, vertices=(-1.0, -0.5), nodes: int = 120):
    """Transition kernel on a grid; both wedges pass left of 0."""
    v1, v2 = vertices
    if not v1 < v2 < 0:
        raise ValueError("need gamma1 vertex < gamma2 vertex < 0")
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    return _contour_block(M, tau1, x1, tau2, x2, v1, v2, nodes)


def dbm_to_2_kernel(M, tau1, s1, tau2, s2, method: str = "power", vertices=(-1.0, -0.5),
                    nodes: int = 120, u_radius: float = 0.25, u_nodes: int = 32) -> float:
    """DBM->2 kernel.

    method="power": Gaussian term + double contour with (w1/w2)^M/(w1 - w2).
    method="ucontour": Gaussian term + double contour with 1/(w1 - w2) plus the
    triple integral with (w1/u)^M/((w1 - u)(w2 - u)) over a small u circle at 0.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    if method == "power":
        return float(dbm_to_2_block(M, tau1, [s1], tau2, [s2], vertices, nodes)[0, 0])
    if method != "ucontour":
        raise ValueError(f"unknown method {method!r}")
    v1, v2 = vertices
    if not v1 < v2 < 0:
        raise ValueError("need gamma1 vertex < gamma2 vertex < 0")
    if u_radius >= abs(v2) * math.sin(math.pi / 3):
        raise ValueError("u circle must stay clear of the wedges")
    base = dbm_to_2_block(0, tau1, [s1], tau2, [s2], vertices, nodes)[0, 0]
    if M == 0:
        return float(base)
    w1, d1 = _wedge_nodes(v1, 1, nodes=nodes)
    w2, d2 = _wedge_nodes(v2, 2, nodes=nodes)
    u, du = Circle(0.0, u_radius, u_nodes).nodes()
    f1 = np.exp(-(w1 ** 3 / 3 + tau1 * w1 ** 2 - (s1 - tau1 ** 2) * w1)) * w1 ** M * d1
    f2 = np.exp(w2 ** 3 / 3 + tau2 * w2 ** 2 - (s2 - tau2 ** 2) * w2) * d2
    left = f1 @ (1.0 / (w1[:, None] - u[None, :]))
    right = f2 @ (1.0 / (w2[:, None] - u[None, :]))
    extra = np.sum(left * right * du / u ** M)
    return float(base + extra.real)


# -------------------------------------------------------------- Hermite ---
class HermiteBasis:
    """Orthonormal polynomials for e^{-x^2/2} by the three-term recurrence."""

    def __init__(self, max_degree: int):
        if max_degree < 0:
            raise ValueError("max_degree must be nonnegative")
        self.max_degree = max_degree

    def polynomials(self, x):
        """Array (max_degree + 1, len(x)) of p_k(x)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((self.max_degree + 1, x.size))
        out[0] = (2 * np.pi) ** -0.25
        if self.max_degree >= 1:
            out[1] = x * out[0]
        for k in range(1, self.max_degree):
            out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
        return out

    def functions(self, x):
        """p_k(x) e^{-x^2/4}, orthonormal in L^2(dx); bounded by (2 pi)^{-1/4}."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self._functions(x)

    def _functions(self, x):
        out = np.empty((self.max_degree + 1, x.size))
        out[0] = (2 * np.pi) ** -0.25 * np.exp(-x * x / 4)
        if self.max_degree >= 1:
            out[1] = x * out[0]
        for k in range(1, self.max_degree):
            out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
        return out


def mehler_density(q, x1, x2):
    """Transition density of the stationary Ornstein-Uhlenbeck step: N(q x1, 1 - q^2) in x2."""
    v = 1 - q * q
    return np.exp(-(x2 - q * x1) ** 2 / (2 * v)) / np.sqrt(2 * np.pi * v)


def dbm_block(M, tau1, x1, tau2, x2):
    """Extended Hermite kernel on a grid (sum form)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    H = HermiteBasis(M - 1)
    h1, h2 = H.functions(x1), H.functions(x2)
    q = np.exp((tau1 - tau2) * np.arange(M))
    # p_k(x1) p_k(x2) e^{-x2^2/2} = h_k(x1) h_k(x2) e^{(x1^2 - x2^2)/4}
    K = (h1.T * q[None, :]) @ h2 * np.exp((x1[:, None] ** 2 - x2[None, :] ** 2) / 4)
    if tau1 < tau2:
        K = K - mehler_density(math.exp(tau1 - tau2), x1[:, None], x2[None, :])
    return K


def dbm_kernel(M, tau1, x1, tau2, x2, method: str = "sum", tol: float = 1e-12,
               radius: float = 1.0, line: float = 2.0) -> float:
    """Extended Hermite kernel of M-particle stationary DBM.

    method="sum": finite Hermite sum minus the Gaussian term when tau1 < tau2.
    method="integral": the Hermite sum as a circle x vertical-line integral.
    method="split": for tau1 < tau2 the complementary series -sum_{k >= M},
    truncated with a certified tail bound below ``tol``.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if method == "sum":
        return float(dbm_block(M, tau1, [x1], tau2, [x2])[0, 0])
    if method == "integral":
        if not line > radius:
            raise ValueError("the line must lie right of the circle")
        q = math.exp(tau1 - tau2)
        z, dz = Circle(0.0, radius, 96).nodes()
        w, dw = VerticalLine(line, 14.0, 240).nodes()
        Z, W = z[:, None], w[None, :]
        f = np.exp(W ** 2 / 2 - x2 * W - q * q * Z ** 2 / 2 + q * x1 * Z) * (W / Z) ** M / (W - Z)
        val = float(np.sum(f * dz[:, None] * dw[None, :]).real)
        if tau1 < tau2:
            val -= float(mehler_density(q, x1, x2))
        return val
    if method == "split":
        if tau1 >= tau2:
            return dbm_kernel(M, tau1, x1, tau2, x2, "sum")
        q = math.exp(tau1 - tau2)
        pref = math.exp((x1 * x1 - x2 * x2) / 4) / math.sqrt(2 * math.pi)
        # |h_k| <= (2 pi)^{-1/4}, so the tail after K terms is <= pref q^K / (1 - q)
        K = M
        while pref * q ** K / (1 - q) > tol:
            K += 1
            if K > 20000:
                raise ArithmeticError("tail bound not reached; q too close to 1")
        h = HermiteBasis(K).functions(np.array([x1, x2]))
        ks = np.arange(M, K + 1)
        terms = q ** ks * h[M:, 0] * h[M:, 1]
        return float(-np.sum(terms) * math.exp((x1 * x1 - x2 * x2) / 4))
    raise ValueError(f"unknown method {method!r}")


def dbm_limit_kernel(M, rho, xi1, xi2, gate=None, R: float = 1.0, L: float = 2.0,
                     half_extent: float = 12.0, nodes: int = 200) -> float:
    """Slow-region limit kernel with rho = sigma2/sigma1.

    -Gaussian (when gated) + int_{|V|=R} dV int_{-L+iR} dW (W/V)^M/(W - V)
    e^{W^2/2 + W xi1} / e^{rho^2 V^2/2 + rho xi2 V}.  ``gate`` defaults to rho < 1.
    ``rho`` may also be a pair of slow-region scaling frames.
    """
    if isinstance(rho, tuple):
        rho = rho_from_frames(*rho)
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if not L > R:
        raise ValueError("need L > R")
    gate = rho < 1 if gate is None else gate
    val = 0.0
    if M > 0:
        V, dV = Circle(0.0, R, 96).nodes()
        W, dW = VerticalLine(-L, half_extent, nodes).nodes()
        Vc, Wr = V[:, None], W[None, :]
        f = np.exp(Wr ** 2 / 2 + Wr * xi1 - (rho ** 2 * Vc ** 2 / 2 + rho * xi2 * Vc)) * (Wr / Vc) ** M / (Wr - Vc)
        val = float(np.sum(f * dV[:, None] * dW[None, :]).real)
    if gate:
        if rho >= 1:
            raise ValueError("the Gaussian term needs rho < 1")
        val -= float(np.exp(-(xi1 - xi2 * rho) ** 2 / (2 * (1 - rho ** 2))) / np.sqrt(2 * np.pi * (1 - rho ** 2)))
    return val


def rho_from_frames(frame1, frame2) -> float:
    return frame2.sigma / frame1.sigma


def tracy_widom_gue(s, nodes: int = 40, window: float = 12.0):
    """F_2(s) = det(1 - K_Airy) on L^2(s, infinity)."""
    from .fredholm import fredholm_det_continuum
    return fredholm_det_continuum(lambda t1, a, t2, b: airy_kernel(a, b), [(0.0, s)], nodes, window)
