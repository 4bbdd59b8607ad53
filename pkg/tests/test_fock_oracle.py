import math

import numpy as np
import pytest
from scipy.special import gammaln

from su11 import analytics as an
from su11 import fock_oracle as fo
from su11 import gaussian_core as gc
from su11.circuit import Detector, Observable
from su11.fisher import qfi
from su11.interferometer import InterferometerConfig, Topology, observable_moments, to_circuit
from su11._validation import DomainError

TRUNC = Topology.TRUNCATED_HOMODYNE
CONV = Topology.CONVENTIONAL_INTENSITY


def coherent(alpha, cutoff=20):
    return fo.fock_displace(fo.fock_vacuum(1, cutoff), 0, alpha)


def tmsv(r, cutoff=25):
    return fo.fock_two_mode_squeeze(fo.fock_vacuum(2, cutoff), r)


def test_vacuum_counts():
    assert fo.fock_observable_stats(fo.fock_vacuum(2, 6), "M_N") == (0.0, 0.0)


def test_coherent_quadrature():
    m, v = fo.fock_observable_stats(coherent(1.0), "M_Q", modes=(0,), theta_a=0.0)
    assert m == pytest.approx(2, abs=1e-9) and v == pytest.approx(1, abs=1e-9)


def test_displacement_matches_poisson():
    p = coherent(1.5, 30).populations(0)
    n = np.arange(30)
    ref = np.exp(-2.25 + n * np.log(2.25) - gammaln(n + 1))
    np.testing.assert_allclose(p, ref, atol=1e-12)


def test_squeeze_r0_is_identity():
    s = fo.fock_vacuum(2, 5)
    assert fo.fock_two_mode_squeeze(s, 0.0) is s


def test_squeeze_gain4_photons():
    # gain 4 puts visible population above any affordable cutoff
    with pytest.raises(fo.LeakageError):
        tmsv(math.acosh(2.0), cutoff=30)
    m, _ = fo.fock_observable_stats(tmsv(0.3), "M_N", modes=(0,))
    assert m == pytest.approx(math.sinh(0.3) ** 2, rel=1e-9)


def test_squeeze_unitary_is_unitary_in_interior():
    U = fo.two_mode_squeeze_unitary(12, 0.2, 0.4)
    col = np.zeros(144)
    col[0] = 1.0
    assert abs(np.linalg.norm(U @ col) - 1) < 1e-9


def test_leakage_raises():
    with pytest.raises(fo.LeakageError):
        fo.fock_two_mode_squeeze(fo.fock_vacuum(2, 6), 1.0)


def test_loss_identity():
    s = coherent(0.7)
    np.testing.assert_allclose(fo.fock_loss(s, 0, 1.0).density, s.density, atol=1e-15)


def test_loss_halves_coherent_photons():
    m, _ = fo.fock_observable_stats(fo.fock_loss(coherent(1.0), 0, 0.5), "M_N", modes=(0,))
    assert m == pytest.approx(0.5, abs=1e-9)


def test_loss_on_tmsv():
    s = fo.fock_loss(tmsv(0.3), 0, 0.7)
    m, _ = fo.fock_observable_stats(s, "M_N", modes=(0,))
    assert m == pytest.approx(0.7 * math.sinh(0.3) ** 2, rel=1e-7)
    assert s.trace() == pytest.approx(1, abs=1e-9)


def test_kraus_matches_beamsplitter():
    s = fo.fock_phase(coherent(0.8 + 0.3j, 12), 0, 0.2)
    a = fo.fock_loss(s, 0, 0.6)
    b = fo.beamsplitter_loss(s, 0, 0.6)
    np.testing.assert_allclose(a.density, b.density, atol=1e-10)


def test_kraus_completeness():
    ops = fo.loss_kraus(10, 0.37)
    total = sum(E.T @ E for E in ops)
    np.testing.assert_allclose(total, np.eye(10), atol=1e-12)


def test_noise_power_matches_gaussian():
    g = 1.2
    r = math.acosh(math.sqrt(g))
    s = tmsv(r)
    m, v = fo.fock_observable_stats(s, "M_Q2", theta_a=math.pi / 2, theta_b=math.pi / 2)
    ref = gc.two_mode_squeeze(gc.vacuum(2), gc.SqueezeParams(r))
    gm, gv = gc.joint_quadrature_stats(ref, [(math.pi / 2, 1), (math.pi / 2, 1)])
    assert m == pytest.approx(gv + gm ** 2, rel=1e-6)
    assert v == pytest.approx(2 * gv ** 2 + 4 * gv * gm ** 2, rel=1e-6)


def test_photon_and_quadrature_stats_agree_with_gaussian():
    r, alpha = 0.5, math.sqrt(2)
    cfg = InterferometerConfig(TRUNC, alpha, math.cosh(r) ** 2, phi=0.3, theta_a=0.7, theta_b=0.4)
    circ = to_circuit(cfg, "M_Q")
    f = fo.fock_run(circ, cutoff=30, check=False)
    g = circ.run()
    for det in (Detector("M_N"), Detector("M_Nb", (1,)), Detector("M_Q", (0, 1), 0.7, 0.4)):
        fm, fv = fo.fock_observable_stats(f, det)
        gm, gv = (float(x) for x in observable_moments(det, g.mean, g.cov))
        assert fm == pytest.approx(gm, rel=1e-6, abs=1e-9)
        assert fv == pytest.approx(gv, rel=1e-6)


def test_fidelity_qfi_examples():
    assert fo.fock_fidelity_qfi(InterferometerConfig(TRUNC, 1, 1.0)) == pytest.approx(4, rel=1e-3)
    r = math.acosh(math.sqrt(1.2))
    for a2 in (0, 1):
        cfg = InterferometerConfig(TRUNC, math.sqrt(a2), 1.2, phi=0.3)
        assert fo.fock_fidelity_qfi(cfg) == pytest.approx(an.qfi_nlo(r, a2), rel=1e-3)
        assert fo.fock_fidelity_qfi(cfg) == pytest.approx(qfi(cfg), rel=1e-3)


def test_fidelity_qfi_refuses_loss():
    with pytest.raises(DomainError):
        fo.fock_fidelity_qfi(InterferometerConfig(TRUNC, 1, 1.2, eta_ai=0.9))


def test_cutoff_budget():
    with pytest.raises(DomainError):
        fo.fock_vacuum(2, fo.MAX_CUTOFF + 1)
    with pytest.raises(DomainError):
        fo.fock_vacuum(2, 1)


def test_state_check_catches_bad_trace():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 0.5
    with pytest.raises(DomainError):
        fo.FockState(2, 2, rho).check()


def _rel_err(row):
    scale = max(abs(row["gauss_mean"]), math.sqrt(row["gauss_var"]))
    return max(abs(row["fock_mean"] - row["gauss_mean"]) / scale,
               abs(row["fock_var"] - row["gauss_var"]) / row["gauss_var"])


def test_oracle_grid_converges_with_cutoff():
    # the grid point with the most high-number population
    grid = {"r": (0.5,), "alpha_sq": (2.0,), "eta": (0.6,), "phi": (1.2,)}
    errs = []
    for c in (20, 25, 30):
        rep = fo.oracle_check(cutoff=c, grid=grid)
        errs.append(max(_rel_err(row) for row in rep["rows"] if row["check"] == "moments"))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_oracle_check_report_shape():
    rep = fo.oracle_check(cutoff=20, grid={"r": (0.1,), "alpha_sq": (0.0, 0.5), "eta": (1.0,), "phi": (0.3,)})
    assert rep["pass"] and rep["n_failed"] == 0
    assert {"cutoff", "moment_rtol", "qfi_rtol", "n_checks", "rows"} <= set(rep)
