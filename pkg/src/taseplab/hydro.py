"""Hydrodynamic profile, mean positions and the fluctuation scaling constants."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Region(enum.Enum):
    SlowFrozenFan = "slow"
    Kpz = "kpz"
    Frozen = "frozen"
    TransitionLine = "transition"


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")


def classify(alpha: float, nu: float, tol: float = 1e-12) -> Region:
    """Region of the particle n = nu t; nu below the transition line counts as slow."""
    _check_alpha(alpha)
    crit = (1 - alpha) ** 2
    if abs(nu - crit) <= tol:
        return Region.TransitionLine
    if nu < crit:
        return Region.SlowFrozenFan
    if nu < 1:
        return Region.Kpz
    return Region.Frozen


def density(alpha: float, x, t: float):
    """Macroscopic density: 1 left of -t, (1 - x/t)/2 on the fan, 1 - alpha right of (2 alpha - 1) t."""
    _check_alpha(alpha)
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    out = np.where(x < -t, 1.0, np.where(x <= (2 * alpha - 1) * t, (1 - x / t) / 2, 1 - alpha))
    return out if out.ndim else float(out)


def mean_position_limit(alpha: float, nu: float) -> float:
    """lim x_{[nu t]}(t) / t."""
    _check_alpha(alpha)
    if nu <= 0:
        raise ValueError("nu must be positive")
    if nu <= (1 - alpha) ** 2:
        return alpha - nu / (1 - alpha)
    if nu <= 1:
        return 1 - 2 * math.sqrt(nu)
    return -nu


def sigma2_slow(alpha: float, nu: float) -> float:
    """Gaussian variance per unit time in the slow region, alpha (1 - nu/(1-alpha)^2)."""
    return alpha * (1 - nu / (1 - alpha) ** 2)


def finite_t_center(alpha: float, M: int, n: int, t: float, region: Region = None) -> float:
    """Centering of x_n(t); nu is taken as (n - M)/t when the region is not given."""
    if region is None:
        region = classify(alpha, (n - M) / t) if t > 0 else Region.Frozen
    if region in (Region.SlowFrozenFan, Region.TransitionLine):
        return alpha * t - (n - M) / (1 - alpha)
    if region is Region.Kpz:
        arg = n * t - M * t
        if arg < 0:
            raise ValueError("n t - M t must be nonnegative in the KPZ branch")
        return t - 2 * math.sqrt(arg)
    return float(M - n)


def rescale(position, alpha: float, M: int, n: int, t: float, region: Region = None):
    """Rescaled fluctuation X_t: positive when the particle lags behind its center."""
    nu = (n - M) / t
    if region is None:
        region = classify(alpha, nu)
    center = finite_t_center(alpha, M, n, t, region)
    pos = np.asarray(position, dtype=float)
    if region is Region.SlowFrozenFan:
        s2 = sigma2_slow(alpha, nu)
        if s2 <= 0:
            raise ValueError("sigma vanishes on the slow-region boundary")
        out = (pos - center) / (-math.sqrt(s2 * t))
    elif region in (Region.Kpz, Region.TransitionLine):
        out = (pos - center) / (-t ** (1 / 3))
    else:
        out = np.zeros_like(pos)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ScalingFrame:
    theta: float
    pi: float
    pi1: float
    pi2: float
    u: float
    a: float
    nu: float
    alpha: float
    M: int
    region: Region
    w_star: float
    sigma: float
    kappa0: float
    kappa1: float
    S_h: float
    S_v: float


def make_scaling_frame(theta: float, pi: float, pi1: float, pi2: float, alpha: float, M: int,
                       region: Region = None) -> ScalingFrame:
    """Scaling constants at t = (pi + theta) T, n = (pi - theta) T + M.

    sigma is filled in the slow region (and on the transition line), the KPZ
    constants w*, kappa0, kappa1, S_h, S_v for nu <= 1; other fields are nan.
    """
    _check_alpha(alpha)
    if abs(pi1) > 1:
        raise ValueError("|pi'| must not exceed 1")
    u, a = pi + theta, pi - theta
    if u <= 0 or a < 0:
        raise ValueError("need u > 0 and a >= 0")
    nu = a / u
    found = classify(alpha, nu)
    region = found if region is None else region
    nan = float("nan")
    sigma = w = k0 = k1 = sh = sv = nan
    if region in (Region.SlowFrozenFan, Region.TransitionLine):
        s2 = alpha * u - alpha * a / (1 - alpha) ** 2
        if region is Region.SlowFrozenFan and s2 <= 0:
            raise ValueError("sigma^2 must be positive in the slow region")
        sigma = math.sqrt(max(s2, 0.0))
    if region is Region.Kpz and nu >= 1:
        raise ValueError("a KPZ frame needs nu < 1")
    if region in (Region.Kpz, Region.TransitionLine) and nu <= 1:
        w = 1 - math.sqrt(nu)
        if 0 < w < 1:
            k0 = u / (w * (1 - w))
            k1 = 0.5 * ((1 + pi1) / w - (pi1 - 1) / (w * (1 - w) ** 2))
            sh = k0 ** (2 / 3) / k1
            sv = w * k0 ** (1 / 3)
    return ScalingFrame(theta, pi, pi1, pi2, u, a, nu, alpha, M, region, w, sigma, k0, k1, sh, sv)


def kpz_frame(alpha: float, M: int, n: int, t: float, pi1: float = 0.0) -> ScalingFrame:
    """Frame with T = t, i.e. u = 1 and a = (n - M)/t."""
    a = (n - M) / t
    return make_scaling_frame((1 - a) / 2, (1 + a) / 2, pi1, 0.0, alpha, M, Region.Kpz)


def burgers_residual(alpha: float, xi: float, tau: float, h: float = 1e-3) -> float:
    """Central-difference residual of d_tau rho + d_xi (rho (1 - rho)) for the closed-form profile."""
    if tau - h <= 0:
        raise ValueError("tau must exceed h")
    kinks = (-1.0, 2 * alpha - 1)
    for tt in (tau - h, tau, tau + h):
        for xx in (xi - h, xi + h):
            for k in kinks:
                if (xx - k * tt) * (xi - k * tau) <= 0:
                    raise ValueError("stencil straddles a kink")

    def flux(x, t):
        r = density(alpha, x, t)
        return r * (1 - r)

    dt = (density(alpha, xi, tau + h) - density(alpha, xi, tau - h)) / (2 * h)
    dx = (flux(xi + h, tau) - flux(xi - h, tau)) / (2 * h)
    return float(dt + dx)
