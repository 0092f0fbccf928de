"""Continuous-time Monte Carlo for multi-speed TASEP and the totally asymmetric ZRP.

Jumps are drawn only among enabled particles (Gillespie).  Particles are
grouped by rate; each group keeps a swap-remove array of its enabled members,
so an event costs O(number of distinct rates).  Replica r is seeded from
SeedSequence([seed, r]), which makes results independent of the thread count.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import Dict, Sequence

import numba
import numpy as np

from .lattice import ParticleSystem, SpaceLikePoint, SpaceLikeSet, ZrpConfig, as_point


def configure_threads(count=None) -> int:
    """Set the numba pool size from ``count`` or TASEPLAB_THREADS; returns the size used."""
    if count is None:
        env = os.environ.get("TASEPLAB_THREADS")
        if env is None:
            return numba.config.NUMBA_NUM_THREADS
        try:
            count = int(env)
        except ValueError:
            raise ValueError(f"TASEPLAB_THREADS must be a positive integer, got {env!r}") from None
    if count < 1:
        raise ValueError("thread count must be positive")
    count = min(count, numba.config.NUMBA_NUM_THREADS)
    with warnings.catch_warnings():
        # an old system TBB only triggers a fallback to another threading layer
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(count)
    return count


@dataclass(frozen=True)
class SimConfig:
    seed: int
    replicas: int
    horizon: float
    record_points: SpaceLikeSet

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if any(p.t > self.horizon for p in self.record_points.points):
            raise ValueError("record time beyond the horizon")


@dataclass
class EmpiricalLaw:
    samples: Dict[SpaceLikePoint, np.ndarray]
    replica_count: int

    def __post_init__(self):
        for p, s in self.samples.items():
            if len(s) != self.replica_count:
                raise ValueError(f"sample for {p} has length {len(s)} != {self.replica_count}")

    def mean(self, point):
        return float(np.mean(self._get(point)))

    def _get(self, point):
        point = as_point(point)
        if point not in self.samples:
            raise KeyError(f"point {point} was not recorded")
        return self.samples[point]


def replica_seeds(seed: int, replicas: int) -> np.ndarray:
    return np.array([np.random.SeedSequence([seed, r]).generate_state(1)[0] for r in range(replicas)],
                    dtype=np.int64)


# ------------------------------------------------------------ kernels ---
@numba.njit(cache=True)
def _tasep_path(x, cls, class_rates, times, watch, out, check):
    """Evolve x in place, writing x[watch] at each time into out[time, watch]."""
    N = x.size
    C = class_rates.size
    members = np.empty((C, N), dtype=np.int64)
    count = np.zeros(C, dtype=np.int64)
    slot = np.full(N, -1, dtype=np.int64)
    for i in range(N):
        if class_rates[cls[i]] > 0 and (i == 0 or x[i - 1] > x[i] + 1):
            c = cls[i]
            members[c, count[c]] = i
            slot[i] = count[c]
            count[c] += 1
    clock = 0.0
    k = 0
    T = times.size
    while k < T:
        total = 0.0
        for c in range(C):
            total += class_rates[c] * count[c]
        if total > 0:
            clock += np.random.exponential(1.0 / total)
        else:
            clock = np.inf
        while k < T and times[k] < clock:
            for j in range(watch.size):
                out[k, j] = x[watch[j]]
            k += 1
        if k >= T:
            break
        u = np.random.random() * total
        c = 0
        while c < C - 1 and u >= class_rates[c] * count[c]:
            u -= class_rates[c] * count[c]
            c += 1
        pick = min(int(u / class_rates[c]), count[c] - 1)
        i = members[c, pick]
        x[i] += 1
        # i leaves its set if it is now blocked
        if i > 0 and x[i - 1] == x[i] + 1:
            last = members[c, count[c] - 1]
            members[c, slot[i]] = last
            slot[last] = slot[i]
            slot[i] = -1
            count[c] -= 1
        # i + 1 gains room
        if i + 1 < N and slot[i + 1] < 0 and class_rates[cls[i + 1]] > 0:
            c2 = cls[i + 1]
            members[c2, count[c2]] = i + 1
            slot[i + 1] = count[c2]
            count[c2] += 1
        if check:
            for j in range(1, N):
                if x[j - 1] <= x[j]:
                    raise AssertionError("exclusion violated")


@numba.njit(cache=True, parallel=True)
def _tasep_batch(x0, cls, class_rates, times, watch, seeds, check):
    R = seeds.size
    out = np.empty((R, times.size, watch.size), dtype=np.int64)
    for r in numba.prange(R):
        np.random.seed(seeds[r])
        x = x0.copy()
        _tasep_path(x, cls, class_rates, times, watch, out[r], check)
    return out


@numba.njit(cache=True, parallel=True)
def _zrp_batch(occ0, inj, times, bonds, seeds):
    """Site j (1..L-1) fires at rate 1 when occupied, sending a particle to j-1.

    Bond j counts transfers j -> j-1; bond L counts injections into site L-1.
    """
    R = seeds.size
    S = occ0.size           # sites 1..S stored at index 0..S-1
    out = np.empty((R, times.size, bonds.size), dtype=np.int64)
    for r in numba.prange(R):
        np.random.seed(seeds[r])
        occ = occ0.copy()
        cur = np.zeros(S + 2, dtype=np.int64)
        busy = 0
        for j in range(S):
            if occ[j] > 0:
                busy += 1
        clock = 0.0
        k = 0
        while k < times.size:
            total = busy + inj
            clock = clock + np.random.exponential(1.0 / total) if total > 0 else np.inf
            while k < times.size and times[k] < clock:
                for b in range(bonds.size):
                    out[r, k, b] = cur[bonds[b]]
                k += 1
            if k >= times.size:
                break
            u = np.random.random() * total
            if u < inj:
                cur[S + 1] += 1
                occ[S - 1] += 1
                if occ[S - 1] == 1:
                    busy += 1
                continue
            u -= inj
            nth = min(int(u), busy - 1)
            j = 0
            seen = -1
            while True:
                if occ[j] > 0:
                    seen += 1
                    if seen == nth:
                        break
                j += 1
            occ[j] -= 1
            cur[j + 1] += 1
            if occ[j] == 0:
                busy -= 1
            if j > 0:
                occ[j - 1] += 1
                if occ[j - 1] == 1:
                    busy += 1
    return out


@numba.njit(cache=True)
def _coupled_pair(xa, xb, ra, rb, horizon, seed):
    """Shared rate-1 clocks per particle; particle i in system s jumps if U < rate_s[i] and unblocked."""
    np.random.seed(seed)
    N = xa.size
    clock = 0.0
    while True:
        clock += np.random.exponential(1.0 / N)
        if clock > horizon:
            break
        i = np.random.randint(0, N)
        u = np.random.random()
        if u < ra[i] and (i == 0 or xa[i - 1] > xa[i] + 1):
            xa[i] += 1
        if u < rb[i] and (i == 0 or xb[i - 1] > xb[i] + 1):
            xb[i] += 1


# ----------------------------------------------------------- drivers ---
def _classes(rates):
    rates = np.asarray(rates, dtype=float)
    uniq = np.unique(rates)
    cls = np.searchsorted(uniq, rates).astype(np.int64)
    return cls, uniq


def simulate_positions(sys: ParticleSystem, times, particles, replicas: int, seed: int,
                       debug: bool = False, threads=None) -> np.ndarray:
    """Positions x_n(t) for n in ``particles`` (1-based): array (replicas, len(times), len(particles))."""
    configure_threads(threads)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ValueError("times must be nonnegative and sorted")
    watch = np.asarray(particles, dtype=np.int64) - 1
    if watch.size and (watch.min() < 0 or watch.max() >= sys.N):
        raise IndexError(f"particle index outside 1..{sys.N}")
    cls, uniq = _classes(sys.rates)
    x0 = np.asarray(sys.positions, dtype=np.int64)
    return _tasep_batch(x0, cls, uniq, times, watch, replica_seeds(seed, replicas), debug)


def run_tasep(sys: ParticleSystem, cfg: SimConfig, debug: bool = False) -> EmpiricalLaw:
    """Record x_{n_k}(t_k) for every point of cfg.record_points.

    Simulating N particles is exact for particles 1..N since blocking only
    propagates backward; points with n_k > N raise.
    """
    pts = list(cfg.record_points.points)
    for p in pts:
        if p.n > sys.N:
            raise IndexError(f"record point n={p.n} exceeds the particle count {sys.N}")
    times = sorted({p.t for p in pts})
    parts = sorted({p.n for p in pts})
    data = simulate_positions(sys, times, parts, cfg.replicas, cfg.seed, debug)
    samples = {p: data[:, times.index(p.t), parts.index(p.n)].copy() for p in pts}
    return EmpiricalLaw(samples, cfg.replicas)


def run_zrp(z: ZrpConfig, cfg: SimConfig, threads=None) -> EmpiricalLaw:
    """Cumulative bond currents; record point (n, t) means bond n at time t.

    Bond j (1 <= j <= L-1) carries site j -> j-1 (bond 1 is the exit);
    bond L is the injection into site L-1.
    """
    configure_threads(threads)
    pts = list(cfg.record_points.points)
    for p in pts:
        if not 1 <= p.n <= z.L:
            raise IndexError(f"bond {p.n} outside 1..{z.L}")
    times = sorted({p.t for p in pts})
    bonds = sorted({p.n for p in pts})
    data = _zrp_batch(np.asarray(z.occupations, dtype=np.int64), float(z.injection_rate),
                      np.asarray(times, dtype=float), np.asarray(bonds, dtype=np.int64),
                      replica_seeds(cfg.seed, cfg.replicas))
    samples = {p: data[:, times.index(p.t), bonds.index(p.n)].copy() for p in pts}
    return EmpiricalLaw(samples, cfg.replicas)


def run_coupled(sys_a: ParticleSystem, sys_b: ParticleSystem, horizon: float, seed: int):
    """Final positions of two systems driven by the same clocks and uniforms (Harris construction)."""
    if sys_a.positions != sys_b.positions:
        raise ValueError("coupled systems must share the initial condition")
    if max(max(sys_a.rates), max(sys_b.rates)) > 1:
        raise ValueError("rates must not exceed 1 in the coupling")
    xa = np.asarray(sys_a.positions, dtype=np.int64)
    xb = xa.copy()
    _coupled_pair(xa, xb, np.asarray(sys_a.rates, float), np.asarray(sys_b.rates, float),
                  float(horizon), int(replica_seeds(seed, 1)[0]))
    return xa, xb


# --------------------------------------------------------- statistics ---
def wilson_band(k, n, z: float = 3.0):
    """Wilson score interval for k successes out of n."""
    k = np.asarray(k, dtype=float)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the interval ends exactly at 0 and 1 for k = 0 and k = n
    return np.where(k == 0, 0.0, mid - half), np.where(k == n, 1.0, mid + half)


@dataclass(frozen=True)
class TailEcdf:
    """x -> fraction of samples >= x, with a Wilson band."""
    sorted_samples: np.ndarray
    z: float = 3.0

    @property
    def n(self):
        return self.sorted_samples.size

    def counts(self, x):
        return self.n - np.searchsorted(self.sorted_samples, np.asarray(x, dtype=float), side="left")

    def __call__(self, x):
        v = self.counts(x) / self.n
        return v if np.ndim(v) else float(v)

    def band(self, x):
        return wilson_band(self.counts(x), self.n, self.z)


def ecdf(law: EmpiricalLaw, point, z: float = 3.0) -> TailEcdf:
    return TailEcdf(np.sort(np.asarray(law._get(point), dtype=float)), z)


def ks_distance(samples, cdf) -> float:
    """sup_x |F_n(x) - F(x)| for a continuous reference cdf (callable on arrays)."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    vals, first = np.unique(s, return_index=True)
    last = np.append(first[1:], n)
    F = np.asarray(cdf(vals), dtype=float)
    # the empirical cdf jumps from first/n to last/n at each distinct value
    return float(max(np.max(np.abs(F - first / n)), np.max(np.abs(F - last / n))))


def binned_density(snapshots: np.ndarray, lo: int, hi: int, width: int):
    """Occupation fraction in bins [lo + k w, lo + (k+1) w) averaged over replicas.

    ``snapshots`` is (replicas, N) of positions; returns (bin centres, density, standard error).
    """
    edges = np.arange(lo, hi + 1, width)
    counts = np.stack([np.histogram(row, bins=edges)[0] for row in snapshots]) / width
    centres = (edges[:-1] + edges[1:] - 1) / 2
    return centres, counts.mean(axis=0), counts.std(axis=0, ddof=1) / math.sqrt(len(snapshots))


def poisson_tail(k, lam):
    """P(Poisson(lam) >= k)."""
    from scipy.stats import poisson
    return poisson.sf(np.asarray(k) - 1, lam)


def record_set(points: Sequence) -> SpaceLikeSet:
    """SpaceLikeSet of recording points, ordered to satisfy the space-like constraint."""
    pts = sorted((as_point(p) for p in points), key=lambda p: (p.t, -p.n))
    return SpaceLikeSet(tuple(pts))
