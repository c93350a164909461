import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fock_tmsv_cov
from rasesim.errors import InvalidArgument, PhysicalityError
from rasesim.gaussian import (
    GaussianState,
    LossChannel,
    SqueezeParams,
    apply_loss,
    quadrature_stats,
    rotate,
    symplectic_eigenvalues,
    physicality_tolerance,
    symplectic_form,
    two_mode_squeeze,
    vacuum,
)


def test_vacuum_one_mode():
    s = vacuum(1)
    np.testing.assert_array_equal(s.cov, np.eye(2))
    np.testing.assert_array_equal(s.mean, np.zeros(2))


def test_vacuum_two_modes():
    s = vacuum(2)
    for k in range(2):
        vx, vp, cross = quadrature_stats(s, k)
        assert (vx, vp) == (1.0, 1.0)
        assert not cross.any()


def test_vacuum_rejects_zero_modes():
    with pytest.raises(InvalidArgument):
        vacuum(0)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
@pytest.mark.parametrize("mode", [0, 1])
def test_loss_on_vacuum_is_identity(t, mode):
    s = apply_loss(vacuum(2), LossChannel(t, mode))
    np.testing.assert_allclose(s.cov, np.eye(4), atol=1e-15)


def test_loss_channel_range():
    with pytest.raises(InvalidArgument):
        LossChannel(1.2)
    with pytest.raises(InvalidArgument):
        LossChannel(-0.1)


def test_squeeze_params_validation():
    with pytest.raises(InvalidArgument):
        SqueezeParams(-0.1)
    with pytest.raises(InvalidArgument):
        SqueezeParams(0.1, 1, 1)


def test_squeeze_zero_is_identity():
    s = two_mode_squeeze(vacuum(2), SqueezeParams(0.0))
    np.testing.assert_allclose(s.cov, np.eye(4), atol=0)


def test_squeeze_r_half_values():
    s = two_mode_squeeze(vacuum(2), SqueezeParams(0.5))
    assert s.cov[0, 0] == pytest.approx(math.cosh(1.0), abs=1e-12)
    assert s.cov[0, 0] == pytest.approx(1.5430806348, abs=1e-9)
    assert s.cov[0, 2] == pytest.approx(-math.sinh(1.0), abs=1e-12)
    assert s.cov[1, 3] == pytest.approx(+1.1752011936, abs=1e-9)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
def test_squeeze_matches_fock_space_oracle(r):
    s = two_mode_squeeze(vacuum(2), SqueezeParams(r))
    np.testing.assert_allclose(s.cov, fock_tmsv_cov(r), atol=1e-9)


def test_squeeze_gain_identity_at_unit_depth():
    r = math.acosh(math.sqrt(math.e))
    s = two_mode_squeeze(vacuum(2), SqueezeParams(r))
    assert s.cov[0, 0] == pytest.approx(2 * math.e - 1, abs=1e-12)
    assert s.cov[0, 0] == pytest.approx(4.4366, abs=1e-4)


def test_squeeze_bad_mode():
    with pytest.raises(InvalidArgument):
        two_mode_squeeze(vacuum(2), SqueezeParams(0.2, 0, 3))


def test_loss_full_transmission_identity():
    s = two_mode_squeeze(vacuum(2), SqueezeParams(0.7))
    np.testing.assert_allclose(apply_loss(s, LossChannel(1.0, 0)).cov, s.cov, atol=1e-15)


def test_loss_zero_transmission_resets_mode():
    s = apply_loss(two_mode_squeeze(vacuum(2), SqueezeParams(0.7)), LossChannel(0.0, 1))
    vx, vp, cross = quadrature_stats(s, 1)
    assert (vx, vp) == pytest.approx((1.0, 1.0), abs=1e-15)
    assert np.abs(cross).max() == 0.0


def test_loss_on_amplified_mode():
    alpha = 1.4
    r = math.acosh(math.sqrt(math.exp(alpha)))
    s = apply_loss(two_mode_squeeze(vacuum(2), SqueezeParams(r)), LossChannel(0.11, 0))
    expected = 0.11 * (2 * math.exp(1.4) - 1) + 0.89
    assert s.cov[0, 0] == pytest.approx(expected, abs=1e-12)
    assert s.cov[0, 0] == pytest.approx(1.672, abs=1e-3)


def test_loss_scales_cross_terms():
    s0 = two_mode_squeeze(vacuum(2), SqueezeParams(0.4))
    s1 = apply_loss(s0, LossChannel(0.25, 0))
    assert s1.cov[0, 2] == pytest.approx(0.5 * s0.cov[0, 2], abs=1e-15)
    assert s1.cov[2, 2] == s0.cov[2, 2]


def test_quadrature_stats_after_squeeze():
    r = 0.3
    vx, vp, _ = quadrature_stats(two_mode_squeeze(vacuum(2), SqueezeParams(r)), "mode1")
    assert vx == pytest.approx(math.cosh(2 * r), abs=1e-12)
    assert vp == pytest.approx(math.cosh(2 * r), abs=1e-12)


def test_quadrature_stats_bad_index():
    with pytest.raises(InvalidArgument):
        quadrature_stats(vacuum(1), 2)
    with pytest.raises(InvalidArgument):
        quadrature_stats(vacuum(1, ["ASE"]), "RASE")


def test_symplectic_eigenvalues_examples():
    np.testing.assert_allclose(symplectic_eigenvalues(vacuum(2)), [1, 1], atol=1e-12)
    tmsv = two_mode_squeeze(vacuum(2), SqueezeParams(0.5))
    np.testing.assert_allclose(symplectic_eigenvalues(tmsv), [1, 1], atol=1e-9)
    lossy = apply_loss(tmsv, LossChannel(0.5, 1))
    assert symplectic_eigenvalues(lossy).min() >= 1 - 1e-9


def test_symplectic_eigenvalues_thermal():
    # single-mode thermal state with variance 3 has symplectic eigenvalue 3
    np.testing.assert_allclose(symplectic_eigenvalues(np.diag([3.0, 3.0])), [3.0])


def test_nonsymmetric_rejected():
    with pytest.raises(PhysicalityError):
        symplectic_eigenvalues(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_tolerance_tracks_conditioning():
    assert physicality_tolerance(np.eye(4)) == 1e-9
    s = vacuum(3)
    for _ in range(3):
        s = two_mode_squeeze(s, SqueezeParams(1.5, 0, 1))
    assert abs(symplectic_eigenvalues(s) - 1).max() <= physicality_tolerance(s.cov)
    assert physicality_tolerance(s.cov) < 1e-4


def test_unphysical_state_rejected():
    with pytest.raises(PhysicalityError):
        GaussianState(np.zeros(2), np.diag([0.5, 0.5]))


def test_state_is_immutable():
    s = vacuum(1)
    with pytest.raises(ValueError):
        s.cov[0, 0] = 2.0


def test_squeezer_is_symplectic():
    s = two_mode_squeeze(vacuum(2), SqueezeParams(0.8))
    # S S^T = cov on vacuum; check S Omega S^T = Omega via the Cholesky-free route
    c, sh = math.cosh(0.8), math.sinh(0.8)
    S = np.array([[c, 0, -sh, 0], [0, c, 0, sh], [-sh, 0, c, 0], [0, sh, 0, c]])
    np.testing.assert_allclose(S @ S.T, s.cov, atol=1e-12)
    om = symplectic_form(2)
    np.testing.assert_allclose(S @ om @ S.T, om, atol=1e-12)


def test_rotation_swaps_quadratures():
    s = apply_loss(two_mode_squeeze(vacuum(2), SqueezeParams(0.5)), LossChannel(0.3, 0))
    rot = rotate(s, 0, math.pi / 2)
    assert rot.cov[0, 0] == pytest.approx(s.cov[1, 1], abs=1e-12)
    assert rot.cov[0, 2] == pytest.approx(s.cov[1, 2], abs=1e-12)
    # opposite rotations of the two arms leave the TMSV unchanged
    back = rotate(rotate(s, 0, 0.4), 1, -0.4)
    np.testing.assert_allclose(back.cov, s.cov, atol=1e-12)


# -- properties ---------------------------------------------------------------

ops = st.lists(
    st.one_of(
        st.tuples(st.just("sq"), st.floats(0, 1.5)),
        st.tuples(st.just("loss"), st.floats(0, 1), st.integers(0, 2)),
    ),
    max_size=6,
)


@settings(max_examples=60, deadline=None)
@given(ops)
def test_physicality_preserved(seq):
    s = vacuum(3)
    for op in seq:
        if op[0] == "sq":
            s = two_mode_squeeze(s, SqueezeParams(op[1], 0, 1))
        else:
            s = apply_loss(s, LossChannel(op[1], op[2]))
    assert symplectic_eigenvalues(s).min() >= 1 - physicality_tolerance(s.cov)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1.5), st.floats(0, 1), st.floats(0, 1), st.integers(0, 1))
def test_loss_semigroup(r, t1, t2, mode):
    s = two_mode_squeeze(vacuum(2), SqueezeParams(r))
    a = apply_loss(apply_loss(s, LossChannel(t1, mode)), LossChannel(t2, mode))
    b = apply_loss(s, LossChannel(t1 * t2, mode))
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1.5), min_size=1, max_size=4))
def test_squeezes_on_vacuum_are_pure(rs):
    s = vacuum(3)
    for i, r in enumerate(rs):
        s = two_mode_squeeze(s, SqueezeParams(r, i % 3, (i + 1) % 3))
    np.testing.assert_allclose(symplectic_eigenvalues(s), 1.0, atol=physicality_tolerance(s.cov))


@pytest.mark.parametrize("alpha", [0.1, 0.8, 1.4, 2.0])
def test_gain_identity(alpha):
    r = math.acosh(math.sqrt(math.exp(alpha)))
    s = two_mode_squeeze(vacuum(2), SqueezeParams(r))
    assert abs(s.cov[0, 0] - (2 * math.exp(alpha) - 1)) <= 1e-12 * max(1, s.cov[0, 0])
