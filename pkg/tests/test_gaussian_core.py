import math

import numpy as np
import pytest

from su11 import gaussian_core as gc
from su11._validation import DomainError

R4 = math.acosh(2.0)


def tmsv(r=R4, pump=0.0):
    return gc.two_mode_squeeze(gc.vacuum(2), gc.SqueezeParams(r, pump))


def test_vacuum_two_modes():
    s = gc.vacuum(2)
    np.testing.assert_array_equal(s.mean, np.zeros(4))
    np.testing.assert_array_equal(s.cov, np.eye(4))


def test_vacuum_has_no_photons():
    assert gc.photon_stats(gc.vacuum(1), [0]) == (0.0, 0.0)


@pytest.mark.parametrize("n", [0, -1, 1.5])
def test_vacuum_rejects_bad_mode_count(n):
    with pytest.raises(DomainError):
        gc.vacuum(n)


def test_displace_real():
    s = gc.displace(gc.vacuum(1), 0, 3)
    np.testing.assert_allclose(s.mean, [6, 0])
    assert gc.mean_photon_number(s, 0) == pytest.approx(9)


def test_displace_zero_is_identity():
    s = gc.displace(gc.vacuum(1), 0, 0)
    np.testing.assert_array_equal(s.mean, [0, 0])


def test_displace_imaginary():
    np.testing.assert_allclose(gc.displace(gc.vacuum(1), 0, 1j).mean, [0, 2])


def test_coherent_photon_variance_is_poissonian():
    m, v = gc.photon_stats(gc.coherent(1, 0, 2.0), [0])
    assert m == pytest.approx(4) and v == pytest.approx(4)


def test_squeeze_r0_identity():
    s = gc.coherent(2, 0, 1 + 0.5j)
    out = gc.two_mode_squeeze(s, gc.SqueezeParams(0.0))
    np.testing.assert_allclose(out.mean, s.mean)
    np.testing.assert_allclose(out.cov, s.cov)


def test_squeeze_gain4_photons():
    s = tmsv()
    assert gc.mean_photon_number(s, 0) == pytest.approx(3, rel=1e-12)
    assert gc.mean_photon_number(s, 1) == pytest.approx(3, rel=1e-12)


def test_squeeze_matrix_symplectic():
    om = gc.symplectic_form(3)
    S = gc.two_mode_squeeze_matrix(3, gc.SqueezeParams(1.3, 0.7, (2, 0)))
    assert np.max(np.abs(S @ om @ S.T - om)) < 1e-10


def test_inverse_pump_restores_input():
    s = gc.coherent(2, 0, 1.5 - 0.3j)
    p = gc.SqueezeParams(0.8, 0.4)
    back = gc.two_mode_squeeze(gc.two_mode_squeeze(s, p), gc.SqueezeParams(0.8, 0.4 + math.pi))
    np.testing.assert_allclose(back.mean, s.mean, atol=1e-10)
    np.testing.assert_allclose(back.cov, s.cov, atol=1e-10)


def test_squeeze_rejects_same_modes():
    with pytest.raises(DomainError):
        gc.SqueezeParams(0.1, 0.0, (1, 1))


def test_gain_conversion():
    assert gc.gain_to_r(4.0) == pytest.approx(R4)
    assert gc.r_to_gain(R4) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        gc.gain_to_r(0.5)


@pytest.mark.parametrize("phi", [0.0, 2 * math.pi])
def test_phase_identity(phi):
    s = gc.coherent(1, 0, 1.2)
    out = gc.phase_shift(s, 0, phi)
    np.testing.assert_allclose(out.mean, s.mean, atol=1e-12)


def test_phase_quarter_turn():
    out = gc.phase_shift(gc.coherent(1, 0, 1.0), 0, math.pi / 2)
    np.testing.assert_allclose(out.mean, [0, 2], atol=1e-15)


def test_loss_identity_and_full():
    s = tmsv()
    kept = gc.loss(s, 0, 1.0)
    np.testing.assert_array_equal(kept.cov, s.cov)
    gone = gc.loss(gc.coherent(1, 0, 2.0), 0, 0.0)
    np.testing.assert_allclose(gone.mean, 0)
    np.testing.assert_allclose(gone.cov, np.eye(2))


def test_loss_half_on_tmsv():
    assert gc.mean_photon_number(gc.loss(tmsv(), 0, 0.5), 0) == pytest.approx(1.5)


def test_loss_composes():
    s = gc.displace(tmsv(0.7), 1, 0.4j)
    a = gc.loss(gc.loss(s, 0, 0.6), 0, 0.3)
    b = gc.loss(s, 0, 0.18)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-12)


@pytest.mark.parametrize("eta", [-0.1, 1.1, float("nan")])
def test_loss_range(eta):
    with pytest.raises(DomainError):
        gc.loss(gc.vacuum(1), 0, eta)


def test_quadrature_convention():
    s = gc.coherent(1, 0, 1.5)
    assert gc.quadrature_stats(s, 0, 0.0) == pytest.approx((3.0, 1.0))
    m, v = gc.quadrature_stats(s, 0, math.pi / 2)
    assert abs(m) < 1e-12 and v == pytest.approx(1.0)


def test_joint_quadrature_vacuum_variance():
    assert gc.joint_quadrature_stats(gc.vacuum(3), [(0.1, 1), (0.2, 1), (0.3, 1)])[1] == pytest.approx(3)


def test_joint_quadrature_needs_weights():
    with pytest.raises(DomainError):
        gc.joint_quadrature_stats(gc.vacuum(2), {})


def test_photon_stats_tmsv_total_is_even():
    # total photon number of a TMSV: mean 2 sinh^2, variance 4 sinh^2 cosh^2
    s = tmsv()
    m, v = gc.photon_stats(s, [0, 1])
    assert m == pytest.approx(6) and v == pytest.approx(4 * 3 * 4)


def test_photon_stats_thermal_marginal():
    m, v = gc.photon_stats(tmsv(), [0])
    assert v == pytest.approx(m * (m + 1))


def test_photon_stats_rejects_duplicates():
    with pytest.raises(DomainError):
        gc.photon_stats(gc.vacuum(2), [0, 0])
    with pytest.raises(DomainError):
        gc.photon_stats(gc.vacuum(2), [])


def test_mode_out_of_range():
    with pytest.raises(DomainError):
        gc.displace(gc.vacuum(2), 2, 1.0)


def test_state_validation():
    with pytest.raises(DomainError):
        gc.GaussianState(np.zeros(3), np.eye(3))
    with pytest.raises(DomainError):
        gc.GaussianState(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_state_is_immutable():
    s = gc.vacuum(1)
    with pytest.raises(ValueError):
        s.mean[0] = 1.0


def test_purity_and_physicality():
    assert tmsv(2.0).is_pure()
    assert not gc.loss(tmsv(), 0, 0.5).is_pure()
    assert gc.thermal(1, 0.3).is_physical()
    assert not gc.GaussianState(np.zeros(2), 0.5 * np.eye(2)).is_physical()


def test_symplectic_eigenvalues_thermal():
    np.testing.assert_allclose(gc.symplectic_eigenvalues(gc.thermal(2, [0.5, 1.0])), [2.0, 3.0])
