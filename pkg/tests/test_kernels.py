import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from taseplab.fredholm import DiscreteOperator, det_stable, joint_tail
from taseplab.kernels import (GaugeFactor, KernelContext, biorth_inner, biorth_matrix, k1_hat, k1_sum, k2_hat,
                              k2_sum, kernel, kernel_matrix, phi_fn, phi_transition, psi)
from taseplab.lattice import SpaceLikeSet


def test_psi_at_time_zero_is_delta():
    ctx = KernelContext(2, 0.5)
    xs = np.arange(-6, 4)
    vals = psi(ctx, 4, 0.0, 4, xs)
    assert np.allclose(vals, (xs == 2 - 4).astype(float), atol=1e-14)


def test_psi_coefficient():
    ctx = KernelContext(3, 0.5)
    assert abs(psi(ctx, 3, 1.0, 3, 2) - 0.5) < 1e-14


@pytest.mark.parametrize("M,n,j", [(3, 2, 1), (1, 4, 2), (0, 3, 3), (2, 5, 1)])
def test_psi_vanishes_below_support(M, n, j):
    ctx = KernelContext(M, 0.4)
    assert psi(ctx, n, 0.8, j, M - n - 1) == 0.0


def test_psi_with_rate_poles_does_not_vanish():
    # j > n: the circle encloses alpha and 1, so the value below the support is a residue sum
    ctx = KernelContext(1, 0.4)
    t = 0.8
    # e^{tw} / ((w - 1)(w - 1)) at m = -1: residue of e^{tw}/(w-1)^2 at 1 is t e^t
    assert abs(psi(ctx, 2, t, 4, 1 - 2 - 1) - t * math.exp(t)) < 1e-12


def test_phi_case_a_single_residue():
    ctx = KernelContext(3, 0.5)
    assert abs(phi_fn(ctx, 3, 0.0, 3, 1) - 0.5) < 1e-14


def test_phi_case_b_binomial():
    ctx = KernelContext(1, 0.5)
    xs = np.arange(-3, 5)
    assert np.allclose(phi_fn(ctx, 4, 0.0, 4, xs), 1.0, atol=1e-13)


def test_phi_case_c_plan_check():
    with pytest.raises(ValueError):
        KernelContext(2, 0.5, v_radius=0.4)


def test_biorth_examples():
    ctx = KernelContext(3, 0.5)
    assert abs(biorth_inner(ctx, 5, 1.0, 2, 2) - 1) < 1e-10
    assert abs(biorth_inner(ctx, 5, 1.0, 2, 4)) < 1e-10
    G = biorth_matrix(KernelContext(5, 0.5), 2, 0.7)
    assert np.max(np.abs(G - np.eye(2))) < 1e-12


@pytest.mark.parametrize("M,n", [(0, 4), (2, 2), (2, 5), (4, 8)])
def test_biorth_cases(M, n):
    G = biorth_matrix(KernelContext(M, 0.3), n, 3.0)
    assert np.max(np.abs(G - np.eye(n))) < 1e-8


def test_phi_case_c_independent_of_large_A():
    a = phi_fn(KernelContext(2, 0.5, A=1e12), 4, 1.0, 1, np.arange(-2, 4))
    b = phi_fn(KernelContext(2, 0.5, A=2e12), 4, 1.0, 1, np.arange(-2, 4))
    c = phi_fn(KernelContext(2, 0.5), 4, 1.0, 1, np.arange(-2, 4))
    assert np.max(np.abs(a - b)) < 1e-10 and np.max(np.abs(a - c)) < 1e-10


def test_finite_A_drift_is_order_one_over_A():
    # the closed form with finite A is not bi-orthogonal; its error falls like 1/A
    errs = []
    for A in (30.0, 300.0, 3000.0):
        G = biorth_matrix(KernelContext(1, 0.5, A=A), 2, 1.0)
        errs.append(np.max(np.abs(G - np.eye(2))))
    assert errs[0] > 1e-3
    assert errs[1] < errs[0] / 5 and errs[2] < errs[1] / 5


def test_transition_gate():
    ctx = KernelContext(1, 0.5)
    assert phi_transition(ctx, (2, 1.0), 0, (1, 2.0), -1) == 0.0
    assert phi_transition(ctx, (1, 1.0), 0, (1, 1.0), 0) == 0.0


def test_transition_same_particle_is_heat_kernel():
    ctx = KernelContext(0, 0.5)
    dt = 0.7
    for x2 in range(-4, 1):
        x1 = 0
        m = x1 - x2
        expected = dt ** m / math.factorial(m) if m >= 0 else 0.0
        assert abs(phi_transition(ctx, (2, 1.5), x1, (2, 0.8), x2) - expected) < 1e-13


def test_transition_forms():
    ctx = KernelContext(1, 0.5)
    # equal particle index: both forms coincide
    a = phi_transition(ctx, (3, 1.2), 0, (3, 0.5), -2, "full")
    b = phi_transition(ctx, (3, 1.2), 0, (3, 0.5), -2, "hat")
    assert abs(a - b) < 1e-13
    # n2 > n1: the difference is the w = 1 residue, which equals k1_sum - k1_hat
    p1, p2 = (3, 1.5), (4, 1.0)
    ctx = KernelContext(2, 0.4)
    d_phi = phi_transition(ctx, p1, 0, p2, 0, "full") - phi_transition(ctx, p1, 0, p2, 0, "hat")
    d_k1 = k1_sum(ctx, p1, 0, p2, 0) - k1_hat(ctx, p1, 0, p2, 0)
    assert abs(d_phi - 1.6487212707001282) < 1e-12
    assert abs(d_phi - d_k1) < 1e-12


def test_k1_empty_sum():
    ctx = KernelContext(2, 0.5)
    assert k1_sum(ctx, (3, 1.0), 0, (2, 1.0), 0) == 0.0


def test_k1_small_instance():
    ctx = KernelContext(2, 0.4)
    assert abs(k1_sum(ctx, (4, 1.0), 0, (4, 1.0), 0) - k1_hat(ctx, (4, 1.0), 0, (4, 1.0), 0)) < 1e-9


def test_k2_zero_without_slow_particles():
    ctx = KernelContext(0, 0.5)
    assert k2_sum(ctx, (3, 1.0), 0, (2, 1.0), 0) == 0.0
    assert k2_hat(ctx, (3, 1.0), 0, (2, 1.0), 0) == 0.0


def test_k2_small_instance():
    ctx = KernelContext(1, 0.5)
    assert abs(k2_sum(ctx, (3, 1.0), -1, (2, 0.6), 0) - k2_hat(ctx, (3, 1.0), -1, (2, 0.6), 0)) < 1e-9


def test_k2_hat_independent_of_large_A():
    p1, p2 = (3, 1.0), (4, 0.7)
    vals = [k2_hat(KernelContext(2, 0.5, A=A), p1, -1, p2, 0) for A in (1e12, 2e12)]
    ref = k2_hat(KernelContext(2, 0.5), p1, -1, p2, 0)
    assert abs(vals[0] - vals[1]) < 1e-10 and abs(vals[0] - ref) < 1e-10


def test_definition_equals_hat_assembly():
    rng = np.random.default_rng(4)
    for _ in range(12):
        M = int(rng.integers(0, 4))
        ctx = KernelContext(M, float(rng.uniform(0.2, 0.8)))
        n1, n2 = sorted(int(v) for v in rng.integers(M + 1, 7, size=2))
        t1, t2 = sorted((float(v) for v in rng.uniform(0.2, 2, size=2)), reverse=True)
        # comparable pairs in both orientations
        p1, p2 = ((n1, t1), (n2, t2)) if rng.random() < 0.5 else ((n2, t2), (n1, t1))
        xs1 = np.arange(M - p1[0], M - p1[0] + 5)
        xs2 = np.arange(M - p2[0], M - p2[0] + 5)
        A = kernel_matrix(ctx, p1, xs1, p2, xs2, "definition")
        B = kernel_matrix(ctx, p1, xs1, p2, xs2, "hat")
        assert np.max(np.abs(A - B)) < 1e-9


def test_single_particle_kernel_gives_poisson_tail():
    ctx = KernelContext(0, 0.5)
    t = 1.3
    for a in range(0, 5):
        val = joint_tail(ctx, SpaceLikeSet(((1, t),), (a - 1,))).value
        assert abs(val - poisson.sf(a - 1, t)) < 1e-12


def test_hat_assembly_rejects_incomparable_points():
    ctx = KernelContext(1, 0.5)
    with pytest.raises(ValueError):
        kernel_matrix(ctx, (2, 0.5), [0], (3, 1.0), [0], "hat")


def test_kernel_is_real_scalar():
    ctx = KernelContext(1, 0.5)
    v = kernel(ctx, (2, 1.0), 0, (3, 0.5), -1)
    assert isinstance(v, float) and math.isfinite(v)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 0.8))
def test_gauge_invariance(shift, alpha):
    ctx = KernelContext(1, alpha)
    sls = SpaceLikeSet(((3, 0.8), (2, 1.4)), (0, 1))
    op = DiscreteOperator(ctx, sls, buffer=2)
    g = GaugeFactor(alpha)
    C = g.conjugate(op.matrix, op.index)
    d0 = det_stable(np.eye(len(op.index)) - op.matrix)
    d1 = det_stable(np.eye(len(op.index)) - C)
    assert abs(d0 - d1) < 1e-9
    # an arbitrary diagonal similarity as well
    D = np.exp(shift * np.arange(len(op.index)) / len(op.index))
    d2 = det_stable(np.eye(len(op.index)) - D[:, None] * op.matrix / D[None, :])
    assert abs(d0 - d2) < 1e-9


def test_gauge_ratio_sign_and_size():
    g = GaugeFactor(0.5)
    r = g.ratio((1, 1.0), 0, (2, 1.0), 0)
    # D = e^{a t} (a - 1)^n / a^{x + n}: ratio = (a - 1)/a = -1
    assert abs(r + 1.0) < 1e-14
