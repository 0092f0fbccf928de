import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from taseplab.hydro import (Region, burgers_residual, classify, density, finite_t_center, kpz_frame,
                            make_scaling_frame, mean_position_limit, rescale, sigma2_slow)


def test_density_examples():
    assert density(0.5, -2.0, 1.0) == 1.0
    assert density(0.5, 0.0, 1.0) == 0.5
    t = 10.0
    assert density(0.3, (2 * 0.3 - 1) * t + 1e-9, t) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        density(0.5, 0.0, 0.0)


@given(st.floats(0.05, 0.95), st.floats(0.1, 100))
def test_density_continuous_at_kinks(alpha, t):
    eps = 1e-9 * t
    for k in (-t, (2 * alpha - 1) * t):
        assert abs(density(alpha, k - eps, t) - density(alpha, k + eps, t)) < 1e-8


@given(st.floats(0.05, 0.95), st.floats(-5, 5))
def test_density_bounds(alpha, xi):
    assert 0 <= density(alpha, xi * 3.0, 3.0) <= 1


def test_mean_position_branches():
    assert mean_position_limit(0.5, 0.1) == pytest.approx(0.3)
    assert mean_position_limit(0.5, 0.5) == pytest.approx(1 - 2 * math.sqrt(0.5))
    assert mean_position_limit(0.5, 1.5) == pytest.approx(-1.5)
    with pytest.raises(ValueError):
        mean_position_limit(0.5, 0.0)


@given(st.floats(0.05, 0.95))
def test_mean_position_continuity(alpha):
    c = (1 - alpha) ** 2
    assert abs(mean_position_limit(alpha, c) - (2 * alpha - 1)) < 1e-12
    assert abs(mean_position_limit(alpha, c * (1 + 1e-10)) - (2 * alpha - 1)) < 1e-8
    assert abs(mean_position_limit(alpha, 1 + 1e-12) + 1) < 1e-10
    assert abs(mean_position_limit(alpha, 1.0) + 1) < 1e-12


@settings(max_examples=50)
@given(st.floats(0.05, 0.95), st.floats(0.01, 0.99))
def test_holes_bookkeeping(alpha, frac):
    # in the slow region, (alpha t - xbar)(1 - alpha) counts the particles n - M behind the leader
    nu = frac * (1 - alpha) ** 2
    x = mean_position_limit(alpha, nu)
    assert abs((alpha - x) * (1 - alpha) - nu) < 1e-12


def test_classify():
    assert classify(0.5, 0.1) is Region.SlowFrozenFan
    assert classify(0.5, 0.25) is Region.TransitionLine
    assert classify(0.5, 0.5) is Region.Kpz
    assert classify(0.5, 1.5) is Region.Frozen


def test_centers():
    assert finite_t_center(0.5, 0, 40, 100.0, Region.Kpz) == pytest.approx(100 - 2 * math.sqrt(4000))
    assert finite_t_center(0.4, 3, 3, 50.0) == pytest.approx(20.0)
    assert finite_t_center(0.5, 0, 200, 100.0) == -200
    with pytest.raises(ValueError):
        finite_t_center(0.5, 5, 2, 10.0, Region.Kpz)


def test_centerings_agree_on_transition_line():
    alpha, M, t = 0.5, 2, 1e4
    n = round((1 - alpha) ** 2 * t) + M
    slow = finite_t_center(alpha, M, n, t, Region.SlowFrozenFan)
    kpz = finite_t_center(alpha, M, n, t, Region.Kpz)
    assert abs(slow - kpz) < 0.1 * t ** (1 / 3)


def test_rescale_signs():
    alpha, M, n, t = 0.5, 1, 11, 100.0
    c = finite_t_center(alpha, M, n, t)
    assert rescale(c, alpha, M, n, t) == 0.0
    assert rescale(c - 5, alpha, M, n, t) > 0
    assert sigma2_slow(0.37, 0.0) == pytest.approx(0.37)
    assert rescale(-300, 0.5, 0, 200, 100.0) == 0.0
    with pytest.raises(ValueError):
        rescale(0, 0.5, 0, 25, 100.0, Region.SlowFrozenFan)


def test_transition_frame_w_star():
    alpha = 0.3
    nu = (1 - alpha) ** 2
    # u = 1, a = nu
    f = make_scaling_frame((1 - nu) / 2, (1 + nu) / 2, 0.0, 0.0, alpha, 2, Region.TransitionLine)
    assert abs(f.w_star - alpha) < 1e-12


def test_linear_pi_frame():
    # with |pi'| <= 1, u > 0 and a >= 0 only c = 1 is admissible
    c, th = 1.0, 0.2
    f = make_scaling_frame(th, c * th, c, 0.0, 0.5, 1)
    assert f.u == pytest.approx((c + 1) * th) and f.a == pytest.approx((c - 1) * th) and f.pi2 == 0.0


def test_frame_errors():
    with pytest.raises(ValueError):
        make_scaling_frame(0.1, 0.5, 1.5, 0, 0.5, 1)
    with pytest.raises(ValueError):
        make_scaling_frame(-0.5, 0.5, 0, 0, 0.5, 1, Region.Kpz)   # nu = infinite is not KPZ
    with pytest.raises(ValueError):
        make_scaling_frame(0.3, 0.5, 0, 0, 0.5, 1, Region.SlowFrozenFan)  # sigma^2 < 0


def test_kpz_constants_positive_on_grid():
    for alpha in (0.2, 0.5, 0.8):
        lo = (1 - alpha) ** 2
        for nu in np.linspace(lo, 1, 12)[1:-1]:
            for pi1 in (-0.9, 0.0, 0.9):
                f = make_scaling_frame((1 - nu) / 2, (1 + nu) / 2, pi1, 0, alpha, 1)
                assert f.kappa0 > 0 and f.kappa1 > 0 and f.S_h > 0 and f.S_v > 0


def test_boundary_degeneracy():
    alpha = 0.4
    c = (1 - alpha) ** 2
    inside = make_scaling_frame((1 - (c - 1e-6)) / 2, (1 + c - 1e-6) / 2, 0, 0, alpha, 1)
    assert inside.region is Region.SlowFrozenFan and inside.sigma > 0
    on = make_scaling_frame((1 - c) / 2, (1 + c) / 2, 0, 0, alpha, 1, Region.TransitionLine)
    assert on.sigma < 1e-7
    kpz = make_scaling_frame((1 - (c + 1e-6)) / 2, (1 + c + 1e-6) / 2, 0, 0, alpha, 1)
    assert kpz.region is Region.Kpz and kpz.S_h > 0 and kpz.S_v > 0
    # at nu -> 1 the KPZ scale S_v collapses
    top = kpz_frame(alpha, 0, int(1e6 * (1 - 1e-6)), 1e6)
    assert top.S_v < 0.05


def test_kpz_frame_value():
    f = kpz_frame(0.6, 2, 770, 1000.0)
    assert f.region is Region.Kpz and abs(f.S_v - 0.25935) < 1e-3


def test_burgers_constant_piece_exact():
    assert burgers_residual(0.4, -2.0, 1.0) == 0.0
    assert burgers_residual(0.4, 0.5, 1.0) == 0.0


def test_burgers_fan_small():
    assert abs(burgers_residual(0.5, -0.3, 1.0, 1e-3)) < 1e-5


def test_burgers_second_order():
    # the closed form is self-similar and exactly linear in x/t on the fan, so the
    # residual is pure rounding; check it does not grow as h halves
    rng = np.random.default_rng(0)
    for _ in range(3):
        xi = rng.uniform(-0.8, -0.1)
        r1 = abs(burgers_residual(0.5, xi, 1.0, 2e-3))
        r2 = abs(burgers_residual(0.5, xi, 1.0, 1e-3))
        assert r2 <= max(r1 / 3.9, 1e-9)


def test_burgers_rejects_kinks():
    with pytest.raises(ValueError):
        burgers_residual(0.5, -1.0, 1.0)
