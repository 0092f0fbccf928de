import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from taseplab.fredholm import DiscreteOperator, det_stable, fredholm_det_continuum, fredholm_series, joint_tail
from taseplab.kernels import KernelContext
from taseplab.lattice import SpaceLikeSet, make_step_system
from taseplab.limits import airy_kernel
from taseplab.oracle import joint_tail_oracle


def cofactor_det(a):
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    return sum((-1) ** j * a[0, j] * cofactor_det(np.delete(a[1:], j, axis=1)) for j in range(n))


def test_det_identity_and_scalar():
    assert det_stable(np.eye(5)) == pytest.approx(1.0, abs=1e-15)
    assert det_stable(np.array([[1 - 0.3]])) == pytest.approx(0.7, abs=1e-15)
    assert det_stable(np.zeros((0, 0))) == 1.0


def test_det_vs_cofactor():
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = rng.normal(size=(6, 6))
        assert abs(det_stable(a) - cofactor_det(a)) < 1e-12 * max(1, abs(cofactor_det(a)))


def test_det_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        det_stable(np.array([[1.0, np.nan], [0, 1]]))


def test_det_deterministic():
    a = np.random.default_rng(1).normal(size=(20, 20))
    assert det_stable(a) == det_stable(a.copy())


def test_tail_below_reachable_is_one():
    ctx = KernelContext(1, 0.5)
    sls = SpaceLikeSet(((2, 1.0), (1, 1.5)), (-20, -20))
    r = joint_tail(ctx, sls)
    assert r.value == 1.0 and r.size == 0


@pytest.mark.parametrize("t", [0.5, 1.3, 2.0])
def test_single_free_particle(t):
    ctx = KernelContext(0, 0.5)
    for a in range(-1, 5):
        r = joint_tail(ctx, SpaceLikeSet(((1, t),), (a,)))
        assert abs(r.value - poisson.sf(a, t)) < 1e-12


def test_two_point_against_oracle():
    ctx = KernelContext(1, 0.5)
    sls = SpaceLikeSet(((2, 1.0), (1, 1.5)), (-1, 1))
    r = joint_tail(ctx, sls)
    exact = joint_tail_oracle(make_step_system(1, 0.5, 2), sls)
    assert abs(exact - 0.5276334472589853) < 1e-9
    assert abs(r.value - exact) < 1e-6
    assert r.drift < 1e-9 and r.detail["buffer"] == 2
    assert r.detail["structure_residual"] < 1e-10


def test_buffer_doubling_stable():
    ctx = KernelContext(2, 0.4)
    sls = SpaceLikeSet(((3, 0.7), (2, 1.2), (1, 1.9)), (-2, 0, 1))
    ops = [DiscreteOperator(ctx, sls, B) for B in (0, 2, 4)]
    vals = [op.determinant() for op in ops]
    assert max(abs(v - vals[0]) for v in vals) < 1e-12
    # the plain LU on the whole truncated matrix is an independent route
    assert abs(ops[1].full_determinant() - vals[0]) < 1e-10
    assert max(op.split()[1] for op in ops) < 1e-10


def test_structure_below_support():
    ctx = KernelContext(1, 0.5)
    op = DiscreteOperator(ctx, SpaceLikeSet(((3, 0.523), (1, 0.541)), (0, 1)), buffer=4)
    low, res = op.split()
    assert low.sum() == 8 and res < 1e-11
    exact = joint_tail_oracle(make_step_system(1, 0.5, 3), op.sls)
    assert abs(op.determinant() - exact) < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(-3, 2), st.integers(-1, 3), st.sampled_from([0, 1, 2]))
def test_monotone_in_cutoffs(a1, a2, M):
    ctx = KernelContext(M, 0.5)
    pts = ((3, 0.8), (2, 1.5))
    base = joint_tail(ctx, SpaceLikeSet(pts, (a1, a2)), verify=False).raw
    up1 = joint_tail(ctx, SpaceLikeSet(pts, (a1 + 1, a2)), verify=False).raw
    up2 = joint_tail(ctx, SpaceLikeSet(pts, (a1, a2 + 1)), verify=False).raw
    assert up1 <= base + 1e-10 and up2 <= base + 1e-10
    assert -1e-7 < base < 1 + 1e-7


def test_series_within_bound():
    rng = np.random.default_rng(3)
    K = 0.03 * rng.normal(size=(5, 5))
    val, bound = fredholm_series(K, 3)
    exact = det_stable(np.eye(5) - K)
    assert abs(exact - val) <= bound
    assert bound < 1e-3


def test_series_on_kernel_block():
    # a deep tail cutoff leaves a small-norm kernel block
    ctx = KernelContext(1, 0.5)
    op = DiscreteOperator(ctx, SpaceLikeSet(((2, 0.3),), (-1,)), buffer=2)
    val, bound = fredholm_series(op.matrix, 3)
    assert abs(op.determinant() - val) <= bound + 1e-14


def _airy_block(tau1, x1, tau2, x2):
    return airy_kernel(x1, x2)


def test_continuum_large_s_is_one():
    r = fredholm_det_continuum(_airy_block, [(0.0, 12.0)])
    assert abs(r.value - 1) < 1e-9


def test_continuum_tracy_widom_values():
    r = fredholm_det_continuum(_airy_block, [(0.0, 0.0)])
    assert abs(r.raw - 0.9693728283552635) < 1e-10
    assert r.drift < 1e-6
    r2 = fredholm_det_continuum(_airy_block, [(0.0, 0.0)], nodes=80, window=24)
    assert abs(r.raw - r2.raw) < 1e-6


def test_continuum_monotone_to_zero():
    vals = [fredholm_det_continuum(_airy_block, [(0.0, s)], verify=False).raw for s in (-5, -3, -1, 1)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[0] < 1e-3


def test_continuum_drift_raises():
    with pytest.raises(ArithmeticError):
        fredholm_det_continuum(_airy_block, [(0.0, -6.0)], nodes=4, window=2, tol=1e-12)
