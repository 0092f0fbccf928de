"""Master-equation ground truth for a handful of particles.

The state space is every ordered configuration inside a finite window; a jump
of the leading particle past the right edge is sent to an absorbing leak.
Time evolution uses uniformisation, so probabilities stay nonnegative and the
Poisson truncation gives an a-priori error bound.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

from .lattice import ParticleSystem, SpaceLikeSet


@dataclass
class StateSpace:
    configs: np.ndarray          # (S, N) positions, rows strictly decreasing
    generator: sp.csr_matrix     # Q[i, j] = rate i -> j, diagonal = -total exit rate (incl. leak)
    leak_rate: np.ndarray        # rate from each state into the leak
    window: Tuple[int, int]
    lookup: Dict[tuple, int]

    @property
    def size(self):
        return len(self.configs)


def _enumerate(lower, hi):
    """Decreasing tuples with x_i >= lower[i], x_i <= hi and x_1 > x_2 > ..."""
    out = []
    N = len(lower)

    def rec(i, cap, prefix):
        if i == N:
            out.append(tuple(prefix))
            return
        for x in range(cap, lower[i] - 1, -1):
            prefix.append(x)
            rec(i + 1, x - 1, prefix)
            prefix.pop()

    rec(0, hi, [])
    return out


def build_state_space(sys: ParticleSystem, hi: int) -> StateSpace:
    lower = list(sys.positions)
    if hi < lower[0]:
        raise ValueError("window must contain the initial configuration")
    configs = _enumerate(lower, hi)
    lookup = {c: i for i, c in enumerate(configs)}
    rows, cols, vals = [], [], []
    leak = np.zeros(len(configs))
    rates = sys.rates
    for i, c in enumerate(configs):
        out_rate = 0.0
        for k, r in enumerate(rates):
            if r == 0:
                continue
            y = c[k] + 1
            if k > 0 and c[k - 1] == y:
                continue
            out_rate += r
            if k == 0 and y > hi:
                leak[i] += r
                continue
            nxt = c[:k] + (y,) + c[k + 1:]
            rows.append(i)
            cols.append(lookup[nxt])
            vals.append(r)
        rows.append(i)
        cols.append(i)
        vals.append(-out_rate)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(len(configs),) * 2)
    return StateSpace(np.array(configs, dtype=np.int64).reshape(len(configs), sys.N), Q, leak,
                      (min(lower), hi), lookup)


def evolve(space: StateSpace, p0: np.ndarray, t: float, tol: float = 1e-14):
    """p0 exp(tQ) by uniformisation; returns (p, leaked mass)."""
    p0 = np.asarray(p0, dtype=float)
    if t == 0:
        return p0.copy(), 0.0
    lam = float(-space.generator.diagonal().min())
    if lam == 0:
        return p0.copy(), 0.0
    P = (sp.identity(space.size, format="csr") + space.generator / lam).T.tocsr()
    mass0 = p0.sum()
    kmax = int(poisson.isf(tol, lam * t)) + 2
    weights = poisson.pmf(np.arange(kmax + 1), lam * t)
    vec = p0.copy()
    out = weights[0] * vec
    for k in range(1, kmax + 1):
        vec = P @ vec
        out += weights[k] * vec
    return out, float(mass0 - out.sum())


@dataclass
class MasterSolution:
    space: StateSpace
    probs: np.ndarray
    leak: float
    t: float

    def as_dict(self):
        return {tuple(int(v) for v in c): float(p) for c, p in zip(self.space.configs, self.probs) if p > 0}


def _initial(space, sys):
    p0 = np.zeros(space.size)
    p0[space.lookup[tuple(sys.positions)]] = 1.0
    return p0


def _default_hi(sys, t):
    lam = max(sys.rates) * t
    return sys.positions[0] + int(lam + 6 * np.sqrt(lam) + 10)


def solve_master(sys: ParticleSystem, t: float, window=None, leak_tol: float = 1e-10,
                 tol: float = 1e-14, max_doublings: int = 6) -> MasterSolution:
    """Law of the configuration at time t.

    ``window`` is (x_min, x_max); x_min must not exceed the initial positions.
    Without a window the right edge is doubled until the leak is below
    ``leak_tol``.  An explicit window that leaks too much raises.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if window is not None:
        lo, hi = window
        if lo > min(sys.positions):
            raise ValueError("window excludes the initial configuration")
        space = build_state_space(sys, hi)
        probs, leak = evolve(space, _initial(space, sys), t, tol)
        if leak > leak_tol:
            raise ArithmeticError(f"window leaks {leak:.2e} > {leak_tol:.0e}")
        return MasterSolution(space, probs, leak, t)
    width = _default_hi(sys, t) - sys.positions[0]
    for _ in range(max_doublings):
        space = build_state_space(sys, sys.positions[0] + width)
        probs, leak = evolve(space, _initial(space, sys), t, tol)
        if leak < leak_tol:
            return MasterSolution(space, probs, leak, t)
        width *= 2
    raise ArithmeticError("window doubling did not bring the leak below tolerance")


def marginal_tail(dist: MasterSolution, n: int, a: int) -> float:
    """P(x_n(t) >= a)."""
    N = dist.space.configs.shape[1]
    if not 1 <= n <= N:
        raise IndexError(f"particle {n} out of range 1..{N}")
    return float(dist.probs[dist.space.configs[:, n - 1] >= a].sum())


def joint_tail_oracle(sys: ParticleSystem, sls: SpaceLikeSet, leak_tol: float = 1e-10,
                      tol: float = 1e-14) -> float:
    """P(x_{n_k}(t_k) >= a_k for all k) by conditioning at successive times."""
    tmax = max(p.t for p in sls.points)
    hi = _default_hi(sys, tmax)
    for _ in range(6):
        space = build_state_space(sys, hi)
        vec, clock, leaked = _initial(space, sys), 0.0, 0.0
        for p, a in sorted(zip(sls.points, sls.cutoffs), key=lambda q: q[0].t):
            if p.n > sys.N:
                raise IndexError(f"particle {p.n} out of range")
            vec, lk = evolve(space, vec, p.t - clock, tol)
            leaked += lk
            clock = p.t
            vec = np.where(space.configs[:, p.n - 1] >= a, vec, 0.0)
        if leaked < leak_tol:
            return float(vec.sum())
        hi = sys.positions[0] + 2 * (hi - sys.positions[0])
    raise ArithmeticError("window doubling did not bring the leak below tolerance")
