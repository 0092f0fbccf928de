"""Particle configurations, observation points and the zero-range mapping.

Particles are 1-indexed in every public call: particle ``n`` sits at
``positions[n - 1]`` and particle 1 is the rightmost one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class ParticleSystem:
    positions: tuple
    rates: tuple
    time: float = 0.0
    M: int = 0
    alpha: float = 0.5

    def __post_init__(self):
        pos = tuple(int(x) for x in self.positions)
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "rates", rates)
        if len(pos) != len(rates):
            raise ValueError("positions and rates differ in length")
        if any(a <= b for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be strictly decreasing")
        if any(r < 0 for r in rates):
            raise ValueError("rates must be nonnegative")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        if self.M < 0:
            raise ValueError("M must be nonnegative")

    @property
    def N(self) -> int:
        return len(self.positions)

    def position(self, n: int) -> int:
        if not 1 <= n <= self.N:
            raise IndexError(f"particle {n} out of range 1..{self.N}")
        return self.positions[n - 1]

    def can_jump(self, n: int) -> bool:
        return n == 1 or self.positions[n - 2] > self.positions[n - 1] + 1

    def jump(self, n: int, dt: float = 0.0) -> "ParticleSystem":
        """Return the system after particle ``n`` moved one site right."""
        if not self.can_jump(n):
            raise ValueError(f"particle {n} is blocked")
        pos = list(self.positions)
        pos[n - 1] += 1
        return ParticleSystem(tuple(pos), self.rates, self.time + dt, self.M, self.alpha)


def two_speed_rates(M: int, alpha: float, N: int) -> tuple:
    return tuple(alpha if i < M else 1.0 for i in range(N))


def make_step_system(M: int, alpha: float, N: int) -> ParticleSystem:
    """Packed step configuration x_i(0) = M - i with the first M particles slow."""
    _check_alpha(alpha)
    if N < 1:
        raise ValueError("N must be at least 1")
    if M < 0:
        raise ValueError("M must be nonnegative")
    positions = tuple(M - i for i in range(1, N + 1))
    return ParticleSystem(positions, two_speed_rates(M, alpha, N), 0.0, M, alpha)


@dataclass(frozen=True, order=True)
class SpaceLikePoint:
    n: int
    t: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "t", float(self.t))


def as_point(p) -> SpaceLikePoint:
    return p if isinstance(p, SpaceLikePoint) else SpaceLikePoint(*p)


def precedes(p1, p2) -> bool:
    """Strict space-like order used to gate the transition term.

    True iff p1 != p2, n1 <= n2 and t1 >= t2.
    """
    p1, p2 = as_point(p1), as_point(p2)
    return p1 != p2 and p1.n <= p2.n and p1.t >= p2.t


@dataclass(frozen=True)
class SpaceLikeSet:
    points: tuple
    cutoffs: tuple = field(default=())

    def __post_init__(self):
        pts = tuple(as_point(p) for p in self.points)
        cut = tuple(int(a) for a in self.cutoffs)
        if not pts:
            raise ValueError("a space-like set needs at least one point")
        if cut and len(cut) != len(pts):
            raise ValueError("cutoffs and points differ in length")
        for a, b in zip(pts, pts[1:]):
            if not (a.n >= b.n and a.t <= b.t):
                raise ValueError(f"ordering violated between {a} and {b}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cutoffs", cut)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ZrpConfig:
    """Totally asymmetric zero-range process on sites 1..L-1.

    Site 0 is the exit, injection happens at site L-1 at ``injection_rate``.
    ``occupations[j - 1]`` is the content of site j.
    """
    occupations: tuple
    L: int
    injection_rate: float = 0.5

    def __post_init__(self):
        occ = tuple(int(k) for k in self.occupations)
        object.__setattr__(self, "occupations", occ)
        if self.L < 2:
            raise ValueError("L must be at least 2")
        if len(occ) != self.L - 1:
            raise ValueError(f"need {self.L - 1} occupations, got {len(occ)}")
        if any(k < 0 for k in occ):
            raise ValueError("occupations must be nonnegative")
        if self.injection_rate < 0:
            raise ValueError("injection rate must be nonnegative")


def zrp_to_tasep(z: ZrpConfig, anchor: int = 0) -> ParticleSystem:
    """Map a ZRP state to TASEP gaps.

    Site l holds the gap between particles L-l and L-l+1, so a hop l -> l-1
    is a jump of particle L-l+1 and an injection is a jump of the leader,
    which carries rate alpha.  The trailing gap (the exit count) starts at 0,
    giving L+1 particles.
    """
    L = z.L
    gaps = [z.occupations[L - j - 1] for j in range(1, L)] + [0]
    pos = [anchor]
    for g in gaps:
        pos.append(pos[-1] - 1 - g)
    alpha = z.injection_rate if 0 < z.injection_rate < 1 else 0.5
    rates = (float(z.injection_rate),) + (1.0,) * L
    return ParticleSystem(tuple(pos), rates, 0.0, 1, alpha)


def tasep_to_zrp(p: ParticleSystem) -> ZrpConfig:
    """Inverse of :func:`zrp_to_tasep`; the last gap is the exit count and is dropped."""
    if p.N < 2:
        raise ValueError("need at least two particles")
    gaps = -np.diff(np.asarray(p.positions)) - 1
    L = p.N - 1
    occ = tuple(int(gaps[L - l - 1]) for l in range(1, L))
    return ZrpConfig(occ, L, p.rates[0])
