import math

import numpy as np
import pytest
from scipy.stats import poisson

from taseplab.lattice import ParticleSystem, make_step_system
from taseplab.oracle import build_state_space, joint_tail_oracle, marginal_tail, solve_master
from taseplab.lattice import SpaceLikeSet


def test_time_zero_point_mass():
    sys = make_step_system(1, 0.5, 3)
    sol = solve_master(sys, 0.0)
    assert sol.as_dict() == {sys.positions: 1.0}


@pytest.mark.parametrize("alpha,t", [(0.5, 1.0), (0.3, 2.5)])
def test_single_particle_is_poisson(alpha, t):
    sol = solve_master(ParticleSystem((0,), (alpha,)), t)
    d = sol.as_dict()
    for k in range(10):
        assert abs(d.get((k,), 0.0) - poisson.pmf(k, alpha * t)) < 1e-12


def test_two_particle_fixture_at_two_tolerances():
    sys = make_step_system(1, 0.5, 2)
    a = solve_master(sys, 1.0, tol=1e-14)
    b = solve_master(sys, 1.0, tol=1e-11)
    for x in range(-1, 5):
        assert abs(marginal_tail(a, 2, x) - marginal_tail(b, 2, x)) < 1e-9
    assert abs(marginal_tail(a, 2, 0) - 0.15481812174617549) < 1e-12
    assert abs(marginal_tail(a, 2, 1) - 0.010068840723163002) < 1e-12


def test_mass_conservation():
    sol = solve_master(make_step_system(2, 0.4, 3), 2.0)
    assert abs(sol.probs.sum() + sol.leak - 1) < 1e-10
    assert sol.leak < 1e-10
    assert np.all(sol.probs >= 0)


def test_marginal_tail_edges_and_monotone():
    sol = solve_master(make_step_system(1, 0.5, 3), 1.5)
    assert marginal_tail(sol, 3, -10) == pytest.approx(1.0, abs=1e-12)
    assert marginal_tail(sol, 1, sol.space.window[1] + 1) == 0.0
    vals = [marginal_tail(sol, 2, a) for a in range(-3, 8)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    with pytest.raises(IndexError):
        marginal_tail(sol, 4, 0)


def test_small_window_fails_loudly():
    with pytest.raises(ArithmeticError):
        solve_master(make_step_system(0, 0.5, 2), 3.0, window=(-2, 1))
    with pytest.raises(ValueError):
        solve_master(make_step_system(0, 0.5, 2), 1.0, window=(0, 10))


def _taylor_law(sys, t, hi, order=12):
    # independent route: p0 sum_k (tQ)^k / k! with a dense generator
    space = build_state_space(sys, hi)
    Q = space.generator.toarray()
    p = np.zeros(space.size)
    p[space.lookup[tuple(sys.positions)]] = 1.0
    term, out = p.copy(), p.copy()
    for k in range(1, order + 1):
        term = term @ Q * t / k
        out += term
    return space, out


@pytest.mark.parametrize("N", [1, 2, 3])
def test_equal_rates_against_taylor_series(N):
    sys = make_step_system(0, 0.5, N)
    t = 0.1
    space, ref = _taylor_law(sys, t, sys.positions[0] + 14)
    sol = solve_master(sys, t)
    d = sol.as_dict()
    for c, p in zip(space.configs, ref):
        assert abs(d.get(tuple(int(v) for v in c), 0.0) - p) < 1e-10


def test_joint_oracle_matches_marginal():
    sys = make_step_system(1, 0.5, 2)
    sls = SpaceLikeSet(((2, 1.0),), (0,))
    assert abs(joint_tail_oracle(sys, sls) - 0.15481812174617549) < 1e-12
