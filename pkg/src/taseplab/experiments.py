"""Experiment recipes shared by the CLI and the acceptance suite.

Each recipe takes a parameter dict and returns a Report: a table (header +
rows), named checks (value, tolerance, passed) and a one-line anchor naming
the statement under test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import hydro
from .fredholm import fredholm_det_continuum, joint_tail
from .kernels import KernelContext, biorth_matrix, k1_hat, k1_sum, k2_hat, k2_sum, phi_transition
from .lattice import SpaceLikeSet, ZrpConfig, make_step_system
from .limits import airy_kernel, dbm_block, dbm_to_2_block
from .oracle import joint_tail_oracle
from .simulator import (SimConfig, binned_density, ks_distance, record_set, run_tasep, run_zrp,
                        simulate_positions, wilson_band)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool


@dataclass
class Report:
    kind: str
    anchor: str
    header: List[str]
    rows: List[list] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name, value, tol, passed=None):
        ok = bool(value < tol) if passed is None else bool(passed)
        self.checks.append(Check(name, float(value), float(tol), ok))
        return ok


# ------------------------------------------------------ reference laws ---
def _window(s):
    return max(12.0, 12.0 - s)


def tracy_widom_cdf(s, nodes: int = 40) -> float:
    """F_2(s) by Nystrom; 0 / 1 outside [-9, 14] where the value is below 1e-12 away from the limit."""
    if s > 14:
        return 1.0
    if s < -9:
        return 0.0
    w = _window(s)
    res = fredholm_det_continuum(lambda t1, a, t2, b: airy_kernel(a, b), [(0.0, s)],
                                 int(nodes * w / 12), w, verify=False)
    return res.value


def dbm_cdf(M: int, s, nodes: int = 40) -> float:
    """Distribution of the top point of the M-term Hermite ensemble (weight e^{-x^2/2})."""
    top = 2 * math.sqrt(M) + 8
    if s > top + 4:
        return 1.0
    if s < -top - 4:
        return 0.0
    w = max(12.0, top + 6 - s)
    res = fredholm_det_continuum(lambda t1, a, t2, b: dbm_block(M, 0.0, a, 0.0, b), [(0.0, s)],
                                 int(nodes * w / 12), w, verify=False)
    return res.value


def transition_cdf(M: int, s, nodes: int = 40) -> float:
    if s > 14:
        return 1.0
    w = _window(s)
    res = fredholm_det_continuum(lambda t1, a, t2, b: dbm_to_2_block(M, 0.0, a, 0.0, b), [(0.0, s)],
                                 int(nodes * w / 12), w, verify=False)
    return res.value


def goe_cdf_scaled(s, nodes: int = 40) -> float:
    """det(1 - B_s) on L^2(0, inf) with B_s(x, y) = Ai(x + y + s), i.e. F_1(2^{2/3} s)."""
    from .limits import airy
    x, wts = np.polynomial.legendre.leggauss(nodes)
    L = max(12.0, 12.0 - s)
    x = (x + 1) * L / 2
    wts = wts * L / 2
    B = airy(x[:, None] + x[None, :] + s)
    sw = np.sqrt(wts)
    return float(np.linalg.det(np.eye(nodes) - sw[:, None] * B * sw[None, :]))


def _cdf_table(fn, values, **kw):
    cache = {}
    out = np.empty(len(values))
    for i, v in enumerate(values):
        key = round(float(v), 12)
        if key not in cache:
            cache[key] = fn(key, **kw)
        out[i] = cache[key]
    return out


# ------------------------------------------------------------- recipes ---
def run_density(p) -> Report:
    alpha, t, R, M, seed = p["alpha"], p["t"], p["replicas"], p["m"], p["seed"]
    tol = p.get("tol") or 0.02
    N = int(2.5 * t) + M
    sys = make_step_system(M, alpha, N)
    snaps = simulate_positions(sys, [t], range(1, N + 1), R, seed)[:, 0, :]
    width = max(1, int(round(t / 50)))
    lo = int(-1.5 * t)
    hi = lo + width * int(math.ceil((alpha * t + 0.25 * t - lo) / width))
    xs, dens, se = binned_density(snaps, lo, hi, width)
    pred = np.asarray(hydro.density(alpha, xs, t))
    rep = Report("density", ANCHORS["density"], ["x", "empirical", "predicted", "band"])
    for row in zip(xs, dens, pred, 3 * se):
        rep.rows.append([float(v) for v in row])
    # kinks carry O(sqrt t) fluctuation layers; stay three widths away
    margin = max(3 * math.sqrt(t), 0.05 * t) + width
    kinks = np.array([-t, (2 * alpha - 1) * t, alpha * t])
    safe = (xs > -t) & (xs < alpha * t) & (np.min(np.abs(xs[:, None] - kinks[None, :]), axis=1) > margin)
    dev = float(np.max(np.abs(dens[safe] - pred[safe]))) if np.any(safe) else math.inf
    rep.check("max binned deviation away from kinks", dev, tol)
    return rep


def run_means(p) -> Report:
    alpha, t, R, M, seed = p["alpha"], p["t"], p["replicas"], p["m"], p["seed"]
    tol = p.get("tol") or 0.01
    nus = [p["nu"]] if p.get("nu") is not None else [0.1, 0.5, 1.5]
    ns = [int(nu * t) + M for nu in nus]
    sys = make_step_system(M, alpha, max(ns))
    X = simulate_positions(sys, [t], ns, R, seed)[:, 0, :]
    rep = Report("means", ANCHORS["means"], ["nu", "n", "empirical", "predicted", "deviation"])
    worst = 0.0
    for j, (nu, n) in enumerate(zip(nus, ns)):
        emp = float(X[:, j].mean() / t)
        pred = hydro.mean_position_limit(alpha, nu)
        rep.rows.append([nu, n, emp, pred, emp - pred])
        worst = max(worst, abs(emp - pred))
    rep.check("max |mean x_n/t - limit|", worst, tol)
    return rep


def run_frozen(p) -> Report:
    alpha, t, R, M, seed = p["alpha"], p["t"], p["replicas"], p["m"], p["seed"]
    nu = p.get("nu") or 1.5
    n = int(nu * t)
    sys = make_step_system(M, alpha, n)
    X = simulate_positions(sys, [t], [n], R, seed)[:, 0, 0]
    frac = float(np.mean(X > sys.position(n)))
    rep = Report("frozen", "particles beyond the fan never move", ["nu", "n", "moved_fraction"])
    rep.rows.append([nu, n, frac])
    rep.check("fraction of replicas where the particle moved", frac, p.get("tol") or 0.01)
    return rep


def run_biorth(p) -> Report:
    ctx = KernelContext(p["m"], p["alpha"])
    n, t = p["n"], p["t"]
    tol = p.get("tol") or 1e-8
    G = biorth_matrix(ctx, n, t)
    rep = Report("biorth", ANCHORS["biorth"], ["j", "k", "inner", "deviation"])
    for j in range(n):
        for k in range(n):
            rep.rows.append([j + 1, k + 1, float(G[j, k]), float(G[j, k] - (j == k))])
    rep.check("max |<Psi_j, Phi_k> - delta_jk|", float(np.max(np.abs(G - np.eye(n)))), tol)
    return rep


def kernel_instances(rng, count, n_max=6, M_max=3, t_max=2.0):
    """Random (alpha, M, p1, x1, p2, x2) with n1, n2 > M so that the resummed forms apply."""
    out = []
    while len(out) < count:
        M = int(rng.integers(0, M_max + 1))
        if M + 1 > n_max:
            continue
        alpha = float(rng.uniform(0.2, 0.8))
        n1, n2 = (int(v) for v in rng.integers(M + 1, n_max + 1, size=2))
        t1, t2 = (float(v) for v in rng.uniform(0.2, t_max, size=2))
        x1 = int(rng.integers(M - n1, M - n1 + 8))
        x2 = int(rng.integers(M - n2, M - n2 + 8))
        out.append((alpha, M, (n1, t1), x1, (n2, t2), x2))
    return out


def run_kernel_equiv(p) -> Report:
    rng = np.random.default_rng(p["seed"])
    count = p.get("replicas") or 200
    tol = p.get("tol") or 1e-8
    rep = Report("kernel-equiv", ANCHORS["kernel-equiv"],
                 ["alpha", "m", "n1", "t1", "x1", "n2", "t2", "x2", "k2_diff", "k1_diff", "k1_compensated_diff"])
    worst2 = worst1 = worstc = 0.0
    for alpha, M, p1, x1, p2, x2 in kernel_instances(rng, count, p.get("n") or 6, 3, p.get("t") or 2.0):
        ctx = KernelContext(M, alpha)
        d2 = k2_sum(ctx, p1, x1, p2, x2) - k2_hat(ctx, p1, x1, p2, x2)
        d1 = k1_sum(ctx, p1, x1, p2, x2) - k1_hat(ctx, p1, x1, p2, x2)
        corr = phi_transition(ctx, p1, x1, p2, x2, "full") - phi_transition(ctx, p1, x1, p2, x2, "hat")
        dc = d1 - corr
        rep.rows.append([alpha, M, p1[0], p1[1], x1, p2[0], p2[1], x2, d2, d1, dc])
        worst2 = max(worst2, abs(d2))
        if p2[0] <= p1[0]:
            worst1 = max(worst1, abs(d1))
        # the phi gate only sees pairs that can sit in one space-like set
        if (p1[0] >= p2[0] and p1[1] <= p2[1]) or (p1[0] <= p2[0] and p1[1] >= p2[1]):
            worstc = max(worstc, abs(dc))
    rep.check("max |k2_sum - k2_hat|", worst2, tol)
    rep.check("max |k1_sum - k1_hat| (n2 <= n1)", worst1, tol)
    rep.check("max |(k1_sum - phi) - (k1_hat - phi_hat)| (comparable pairs)", worstc, tol)
    return rep


def random_space_like_sets(rng, count, N, M, t_max):
    """Space-like sets on particles 1..N with cutoffs near the typical positions."""
    sets = []
    while len(sets) < count:
        k = int(rng.integers(1, min(3, N) + 1))
        ns = sorted((int(v) for v in rng.integers(1, N + 1, size=k)), reverse=True)
        ts = sorted(float(round(v, 3)) for v in rng.uniform(0.2, t_max, size=k))
        pts = list(zip(ns, ts))
        if len(set(pts)) < k:
            continue
        cut = [M - n + int(rng.integers(0, 3)) for n in ns]
        sets.append(SpaceLikeSet(tuple(pts), tuple(cut)))
    return sets


def run_joint_tail(p) -> Report:
    rng = np.random.default_rng(p["seed"])
    alpha, M, t = p["alpha"], p["m"], p["t"]
    N = p.get("n") or 3
    R = p["replicas"]
    tol = p.get("tol") or 1e-6
    sets = random_space_like_sets(rng, p.get("sets") or 10, N, M, t)
    sys = make_step_system(M, alpha, N)
    ctx = KernelContext(M, alpha)
    rep = Report("joint-tail", ANCHORS["joint-tail"],
                 ["set", "fredholm", "oracle", "monte_carlo", "fredholm_minus_oracle", "mc_sigma"])
    worst, mc_ok = 0.0, True
    for i, sls in enumerate(sets):
        fd = joint_tail(ctx, sls).raw
        orc = joint_tail_oracle(sys, sls)
        law = run_tasep(sys, SimConfig(p["seed"] * 1000 + i, R, max(q.t for q in sls.points), record_set(sls.points)))
        hit = np.ones(R, dtype=bool)
        for q, a in zip(sls.points, sls.cutoffs):
            hit &= law.samples[q] >= a
        mc = float(hit.mean())
        sig = math.sqrt(max(orc * (1 - orc), 1e-300) / R)
        lo, hi = wilson_band(hit.sum(), R, 3.0)
        inside = (abs(mc - orc) <= 3 * sig or lo <= orc <= hi) and (abs(mc - fd) <= 3 * sig or lo <= fd <= hi)
        mc_ok &= bool(inside)
        desc = ";".join(f"({q.n},{q.t},{a})" for q, a in zip(sls.points, sls.cutoffs))
        rep.rows.append([desc, fd, orc, mc, fd - orc, sig])
        worst = max(worst, abs(fd - orc))
    rep.check("max |Fredholm - oracle|", worst, tol)
    rep.check("Monte Carlo within 3 sigma of both", 0.0 if mc_ok else 1.0, 0.5, mc_ok)
    return rep


def kpz_ks(alpha, M, nu, t, replicas, seed):
    n = int(nu * t) + M
    frame = hydro.kpz_frame(alpha, M, n, t)
    sys = make_step_system(M, alpha, n)
    X = simulate_positions(sys, [t], [n], replicas, seed)[:, 0, 0]
    Xs = hydro.rescale(X, alpha, M, n, t, hydro.Region.Kpz)
    ks = ks_distance(Xs, lambda s: _cdf_table(tracy_widom_cdf, np.asarray(s) / frame.S_v))
    return n, frame.S_v, ks


def run_kpz(p) -> Report:
    alpha, M = p["alpha"], p["m"]
    nu = p.get("nu") or 0.64 * 1.2
    if hydro.classify(alpha, nu) is not hydro.Region.Kpz:
        raise ValueError("nu is not in the KPZ region for this alpha")
    tmax = p.get("t") or 1000.0
    times = [tmax / 4, tmax / 2, tmax]
    rep = Report("kpz-convergence", ANCHORS["kpz-convergence"], ["t", "n", "S_v", "ks"])
    ks = []
    for i, t in enumerate(times):
        n, sv, d = kpz_ks(alpha, M, nu, t, p["replicas"], p["seed"] + i)
        rep.rows.append([t, n, sv, d])
        ks.append(d)
    dec = all(b < a for a, b in zip(ks, ks[1:]))
    rep.check("KS distance strictly decreasing in t", 0.0 if dec else 1.0, 0.5, dec)
    return rep


def slow_ks(alpha, M, n, t, replicas, seed):
    sys = make_step_system(M, alpha, n)
    X = simulate_positions(sys, [t], [n], replicas, seed)[:, 0, 0]
    Xs = hydro.rescale(X, alpha, M, n, t, hydro.Region.SlowFrozenFan)
    terms = min(n, M)
    return ks_distance(Xs, lambda s: _cdf_table(dbm_cdf_scaled, np.asarray(s), M=terms))


def dbm_cdf_scaled(s, M):
    return dbm_cdf(M, s)


def run_slow(p) -> Report:
    alpha, M = p["alpha"], p["m"]
    if M < 1:
        raise ValueError("the slow-region recipe needs m >= 1")
    n = p.get("n") or M
    if n > M:
        raise ValueError("the slow-region recipe takes n <= m")
    tmax = p.get("t") or 1000.0
    times = [tmax / 4, tmax / 2, tmax]
    rep = Report("slow-region-dbm", ANCHORS["slow-region-dbm"], ["t", "n", "terms", "ks"])
    ks = []
    for i, t in enumerate(times):
        d = slow_ks(alpha, M, n, t, p["replicas"], p["seed"] + i)
        rep.rows.append([t, n, min(n, M), d])
        ks.append(d)
    dec = all(b < a for a, b in zip(ks, ks[1:]))
    rep.check("KS distance strictly decreasing in t", 0.0 if dec else 1.0, 0.5, dec)
    return rep


def run_transition(p) -> Report:
    tol = p.get("tol") or 1e-6
    Mmax = max(p.get("m") or 3, 1)
    grid = np.linspace(-4.0, 3.0, 8)
    rep = Report("transition", ANCHORS["transition"], ["s"] + [f"M={m}" for m in range(Mmax + 1)] + ["airy", "goe_squared"])
    airy_gap = goe_gap = 0.0
    mono = True
    for s in grid:
        vals = [transition_cdf(m, s) for m in range(Mmax + 1)]
        f2 = tracy_widom_cdf(s)
        g2 = goe_cdf_scaled(s) ** 2
        rep.rows.append([float(s)] + vals + [f2, g2])
        airy_gap = max(airy_gap, abs(vals[0] - f2))
        goe_gap = max(goe_gap, abs(vals[1] - g2))
        mono &= all(b <= a + tol for a, b in zip(vals, vals[1:]))
    rep.check("M=0 against the Airy determinant", airy_gap, tol)
    rep.check("M=1 against the squared GOE determinant", goe_gap, tol)
    rep.check("distribution shifts right as M grows", 0.0 if mono else 1.0, 0.5, mono)
    return rep


def zrp_reference_particle(L: int, bond: int) -> int:
    """TASEP particle whose displacement equals the current across ``bond``."""
    return L - bond + 1


def run_zrp_current(p) -> Report:
    alpha, t, R, seed = p["alpha"], p["t"], p["replicas"], p["seed"]
    L = p.get("l") or 6
    bond = p.get("bond") or L - 1
    z = ZrpConfig((0,) * (L - 1), L, alpha)
    law = run_zrp(z, SimConfig(seed, R, t, record_set([(bond, t)])))
    J = law.samples[record_set([(bond, t)]).points[0]]
    n = zrp_reference_particle(L, bond)
    ctx = KernelContext(1, alpha)
    start = 1 - n
    rep = Report("zrp-current", ANCHORS["zrp-current"], ["c", "empirical", "mapped_tasep", "sigma", "inside"])
    ok = True
    for c in range(0, int(J.max()) + 2):
        emp = float(np.mean(J >= c))
        exact = joint_tail(ctx, SpaceLikeSet(((n, t),), (start + c,))).raw
        sig = math.sqrt(max(exact * (1 - exact), 0.0) / R)
        inside = abs(emp - exact) <= 3 * sig + 1e-12
        ok &= inside
        rep.rows.append([c, emp, exact, sig, int(inside)])
    rep.check(f"current across bond {bond} vs particle {n} law (3 sigma)", 0.0 if ok else 1.0, 0.5, ok)
    return rep


def run_limit_identities(p) -> Report:
    from .limits import dbm_kernel, dbm_to_2_kernel, extended_airy_kernel
    tol = p.get("tol") or 1e-7
    M = p.get("m") or 2
    grid = [-1.0, 0.0, 1.0]
    taus = [(0.0, 0.4), (0.4, 0.0), (0.2, 0.2)]
    rep = Report("limit-identities", ANCHORS["limit-identities"], ["identity", "max_abs_diff", "tol"])
    diffs: Dict[str, float] = {"hermite sum vs double integral": 0.0, "extended Airy lambda vs contour": 0.0,
                               "dbm->2 u-contour vs power form": 0.0, "dbm->2 at M=0 vs extended Airy": 0.0}
    for t1, t2 in taus:
        for a in grid:
            for b in grid:
                d = abs(dbm_kernel(M, t1, a, t2, b, "sum") - dbm_kernel(M, t1, a, t2, b, "integral"))
                diffs["hermite sum vs double integral"] = max(diffs["hermite sum vs double integral"], d)
                d = abs(extended_airy_kernel(t1, a, t2, b, "lambda") - extended_airy_kernel(t1, a, t2, b, "contour"))
                diffs["extended Airy lambda vs contour"] = max(diffs["extended Airy lambda vs contour"], d)
                d = abs(dbm_to_2_kernel(M, t1, a, t2, b, "ucontour") - dbm_to_2_kernel(M, t1, a, t2, b, "power"))
                diffs["dbm->2 u-contour vs power form"] = max(diffs["dbm->2 u-contour vs power form"], d)
                d = abs(dbm_to_2_kernel(0, t1, a, t2, b) - extended_airy_kernel(t1, a, t2, b, "lambda", conjugated=True))
                diffs["dbm->2 at M=0 vs extended Airy"] = max(diffs["dbm->2 at M=0 vs extended Airy"], d)
    for name, d in diffs.items():
        lim = 1e-9 if "M=0" in name else tol
        rep.rows.append([name, d, lim])
        rep.check(name, d, lim)
    return rep


ANCHORS = {
    "density": "macroscopic density profile: 1, (1 - x/t)/2, 1 - alpha",
    "means": "law of large numbers for x_n(t)/t in the slow, fan and frozen branches",
    "biorth": "bi-orthogonality of the Psi and Phi families",
    "kernel-equiv": "resummation of the kernel sums into contour integrals",
    "joint-tail": "joint tail probabilities as gated Fredholm determinants",
    "kpz-convergence": "KPZ-region fluctuations converge to the Airy2 process",
    "slow-region-dbm": "slow-region fluctuations converge to Dyson Brownian motion",
    "transition": "DBM->2 process on the critical line nu = (1 - alpha)^2",
    "zrp-current": "ZRP bond current equals a tagged TASEP particle displacement",
    "limit-identities": "equivalent representations of the limiting kernels",
}

RECIPES: Dict[str, Callable[[dict], Report]] = {
    "density": run_density,
    "means": run_means,
    "biorth": run_biorth,
    "kernel-equiv": run_kernel_equiv,
    "joint-tail": run_joint_tail,
    "kpz-convergence": run_kpz,
    "slow-region-dbm": run_slow,
    "transition": run_transition,
    "zrp-current": run_zrp_current,
    "limit-identities": run_limit_identities,
}
