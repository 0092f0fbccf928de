"""Numerical contour integrals normalised by 1/(2 pi i).

Every contour exposes ``nodes()`` returning points ``z`` and weights ``dz``
that already include the 1/(2 pi i) factor, so an integral is just
``sum(f(z) * dz)``.  Circles use the trapezoid rule, open paths use
Gauss-Legendre.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import roots_legendre

TWO_PI_I = 2j * np.pi


@lru_cache(maxsize=64)
def _legendre(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class Circle:
    """Positively oriented circle."""
    center: complex
    radius: float
    nodes_count: int = 128

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.nodes_count < 8:
            raise ValueError("need at least 8 nodes")

    def nodes(self):
        n = self.nodes_count
        e = np.exp(2j * np.pi * np.arange(n) / n)
        z = self.center + self.radius * e
        return z, self.radius * e / n

    def with_nodes(self, n):
        return replace(self, nodes_count=n)

    def contains(self, z) -> bool:
        return abs(z - self.center) < self.radius

    def distance_to(self, z) -> float:
        return abs(abs(z - self.center) - self.radius)


@dataclass(frozen=True)
class VerticalLine:
    """The line anchor + iR traversed upward, truncated to |Im z| <= half_extent."""
    anchor: float
    half_extent: float = 12.0
    nodes_count: int = 200

    def nodes(self):
        x, w = _legendre(self.nodes_count)
        s = x * self.half_extent
        return self.anchor + 1j * s, w * self.half_extent / (2 * np.pi)

    def with_nodes(self, n):
        return replace(self, nodes_count=n)

    def gaussian_tail_bound(self, scale=0.5):
        """Bound on the dropped mass of an integrand decaying like exp(-scale*s^2)."""
        h = self.half_extent
        return float(np.exp(-scale * h * h) / (2 * np.pi * scale * h))


@dataclass(frozen=True)
class Segment:
    start: complex
    end: complex
    nodes_count: int = 64

    def nodes(self):
        x, w = _legendre(self.nodes_count)
        d = self.end - self.start
        z = self.start + (x + 1) / 2 * d
        return z, w / 2 * d / TWO_PI_I

    def with_nodes(self, n):
        return replace(self, nodes_count=n)


@dataclass(frozen=True)
class Ray:
    """Half line origin + r e^{i angle}, r in [0, length]; ``inward`` flips direction."""
    origin: complex
    angle: float
    length: float = 10.0
    nodes_count: int = 96
    inward: bool = False

    def nodes(self):
        x, w = _legendre(self.nodes_count)
        e = np.exp(1j * self.angle)
        r = (x + 1) / 2 * self.length
        dz = w / 2 * self.length * e / TWO_PI_I
        return self.origin + r * e, (-dz if self.inward else dz)

    def with_nodes(self, n):
        return replace(self, nodes_count=n)


@dataclass(frozen=True)
class Chain:
    """Concatenation of oriented pieces."""
    parts: tuple

    def nodes(self):
        zs, ws = zip(*(p.nodes() for p in self.parts))
        return np.concatenate(zs), np.concatenate(ws)

    def with_nodes(self, n):
        return Chain(tuple(p.with_nodes(n) for p in self.parts))


def airy_contour(vertex: float, kind: int, length: float = 10.0, nodes: int = 96) -> Chain:
    """Wedge contours of the Airy integrals.

    kind=1: from e^{-2 pi i/3} infinity to e^{2 pi i/3} infinity (left wedge).
    kind=2: from e^{pi i/3} infinity to e^{-pi i/3} infinity (right wedge).
    """
    if kind == 1:
        a_in, a_out = -2 * np.pi / 3, 2 * np.pi / 3
    elif kind == 2:
        a_in, a_out = np.pi / 3, -np.pi / 3
    else:
        raise ValueError("kind must be 1 or 2")
    return Chain((Ray(vertex, a_in, length, nodes, inward=True),
                  Ray(vertex, a_out, length, nodes)))


def _eval(f, *z):
    v = np.asarray(f(*z), dtype=complex)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("integrand is not finite on the contour")
    return v


def integrate(contour, f: Callable) -> complex:
    """(1/2 pi i) times the integral of f over the contour."""
    z, dz = contour.nodes()
    return complex(np.sum(_eval(f, z) * dz))


def integrate_nested(contours: Sequence, f: Callable, constraints: Sequence[Callable] = ()) -> complex:
    """Tensor-product quadrature of a multivariate integrand.

    ``f`` receives one broadcastable array per contour (first contour on axis 0).
    Each entry of ``constraints`` is called with the contours and must return
    True; a False result raises before any integrand evaluation.
    """
    for check in constraints:
        if not check(*contours):
            raise ValueError(f"contour constraint {getattr(check, '__name__', check)} violated")
    d = len(contours)
    grids, weights = [], None
    for k, c in enumerate(contours):
        z, dz = c.nodes()
        shape = [1] * d
        shape[k] = z.size
        grids.append(z.reshape(shape))
        weights = dz.reshape(shape) if weights is None else weights * dz.reshape(shape)
    return complex(np.sum(_eval(f, *grids) * weights)) if d else 0j


class QuadResult(NamedTuple):
    value: complex
    error: float
    nodes: int
    converged: bool


def refine_until(f: Callable, contour, tol: float = 1e-10, start: int = 32, cap: int = 8192) -> QuadResult:
    """Double the node count until two successive values differ by less than tol."""
    n = start
    prev = integrate(contour.with_nodes(n), f)
    if not np.isfinite(tol):
        return QuadResult(prev, float("inf"), n, True)
    while n < cap:
        n *= 2
        cur = integrate(contour.with_nodes(n), f)
        err = abs(cur - prev)
        if err < tol:
            return QuadResult(cur, err, n, True)
        prev = cur
    return QuadResult(prev, err, n, False)
