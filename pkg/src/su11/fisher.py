"""Classical and quantum Fisher information for the phase ``phi``.

``cfi_gaussian`` treats a homodyne outcome as a Gaussian random variable
whose mean and width both depend on ``phi``.  ``qfi_gaussian`` computes the
quantum Fisher information of a Gaussian state family from its first and
second moments; for pure states

    F_Q = mu'^T V^-1 mu' + tr[(V^-1 V')^2] / 4

in the convention ``x = a + a^dag`` (vacuum ``V = I``).  The mixed-state
expression ``mu'^T V^-1 mu' + vec(V')^T (V (x) V - Omega (x) Omega)^-1 vec(V') / 2``
is available with ``allow_mixed=True`` but carries no accuracy guarantee.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from . import gaussian_core as gc
from ._validation import DomainError
from .circuit import Loss, Observable, PhaseFamily
from .interferometer import (DEFAULT_STEP, Topology, _stats_with_slope, check_compatible,
                             probe_state, to_circuit)

MEAN_STEP = 1e-4
COV_STEP = 1e-5


class NonGaussianObservable(DomainError):
    """Photon counting has no Gaussian outcome distribution."""


class MixedStateError(DomainError):
    pass


@dataclass(frozen=True)
class FisherReport:
    cfi: float
    qfi: float
    mean_term: float
    variance_term: float

    @property
    def ccrb(self):
        return math.inf if self.cfi == 0 else 1 / self.cfi

    @property
    def qcrb(self):
        return math.inf if self.qfi == 0 else 1 / self.qfi

    @property
    def components(self):
        return self.mean_term, self.variance_term

    def to_dict(self):
        return {"cfi": self.cfi, "qfi": self.qfi, "ccrb": self.ccrb, "qcrb": self.qcrb,
                "mean_term": self.mean_term, "variance_term": self.variance_term}


def _richardson(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def lossless_family(config):
    """``phi -> `` state of both arms right after the phase object, without loss."""
    ideal = config.replace(eta_ai=1.0, eta_bi=1.0, eta_ae=1.0, eta_be=1.0,
                           topology=_homodyne_twin(config.topology))
    return circuit_lossless_family(to_circuit(ideal, Observable.M_Q))


def circuit_lossless_family(circuit):
    """Lossless phase family of an arbitrary circuit.

    Loss elements are dropped and everything after the phase object is cut
    (the remainder is unitary and cannot change the QFI).
    """
    if circuit.phase_index is None:
        raise DomainError("circuit has no phase object")
    kept = [el for el in circuit.elements[:circuit.phase_index + 1] if not isinstance(el, Loss)]
    return replace(circuit, elements=tuple(kept), phase_index=None).phase_family()


def _homodyne_twin(topology):
    if topology == Topology.MZ_HOMODYNE_REFERENCE:
        return topology
    return Topology.TRUNCATED_HOMODYNE


def cfi_gaussian(config, observable, phi=None, derivative_step=DEFAULT_STEP):
    """Fisher information of a homodyne readout, both mean and width terms.

    ``mean_term`` is ``(d<M>/dphi)^2 / Var(M)`` and ``variance_term``
    ``2 (d sigma_M/dphi)^2 / Var(M)``.  ``qfi`` is that of the lossless
    probe state, the bound every ``cfi`` must respect.
    """
    observable = Observable(observable)
    if not observable.is_gaussian:
        raise NonGaussianObservable(
            f"{observable.value} is not a Gaussian measurement; use M_Q or M_lambdaQ")
    if phi is not None:
        config = config.replace(phi=phi)
    check_compatible(config, observable)
    return circuit_cfi(to_circuit(config, observable), derivative_step=derivative_step)


def circuit_cfi(circuit, phi=None, derivative_step=DEFAULT_STEP):
    """:func:`cfi_gaussian` for any circuit with a quadrature detector."""
    det = circuit.detector
    if not det.kind.is_gaussian:
        raise NonGaussianObservable(
            f"{det.kind.value} is not a Gaussian measurement; use M_Q or M_lambdaQ")
    phi = circuit.phi if phi is None else float(phi)
    family = circuit.phase_family()
    m, v, slope = (float(np.squeeze(x)) for x in
                   _stats_with_slope(family, det, phi, None, derivative_step))

    def sigma(p):
        return float(np.sqrt(np.squeeze(_stats_with_slope(family, det, p, None, derivative_step)[1])))

    dsigma = _richardson(sigma, phi, derivative_step)
    mean_term = slope ** 2 / v
    variance_term = 2 * dsigma ** 2 / v
    qfi = qfi_gaussian(circuit_lossless_family(circuit), phi)
    return FisherReport(mean_term + variance_term, qfi, mean_term, variance_term)


def _derivatives(family, phi, mean_step, cov_step):
    if isinstance(family, PhaseFamily):
        return family(phi), *family.derivatives(phi)

    def mean_at(p):
        return np.asarray(family(p).mean)

    def cov_at(p):
        return np.asarray(family(p).cov)

    return family(phi), _richardson(mean_at, phi, mean_step), _richardson(cov_at, phi, cov_step)


def qfi_gaussian(family, phi, *, allow_mixed=False, mean_step=MEAN_STEP, cov_step=COV_STEP):
    """Quantum Fisher information of ``phi -> GaussianState`` at ``phi``.

    ``family`` is any callable returning a :class:`GaussianState`; a
    :class:`~su11.circuit.PhaseFamily` supplies exact derivatives, other
    callables are differentiated by Richardson-extrapolated central
    differences (steps ``mean_step`` and ``cov_step``).
    """
    state, dmean, dcov = _derivatives(family, phi, mean_step, cov_step)
    if not state.is_physical():
        raise DomainError("state family is not physical at this phi")
    V = state.cov
    Vinv = np.linalg.inv(V)
    displacement = float(dmean @ Vinv @ dmean)
    if state.is_pure(1e-7):
        A = Vinv @ dcov
        return displacement + float(np.trace(A @ A)) / 4
    if not allow_mixed:
        raise MixedStateError("state is mixed; pass allow_mixed=True for the experimental formula")
    Om = gc.symplectic_form(state.n_modes)
    M = np.kron(V, V) - np.kron(Om, Om)
    vec = dcov.reshape(-1)
    return displacement + float(vec @ np.linalg.lstsq(M, vec, rcond=None)[0]) / 2


def qfi(config, phi=None):
    """QFI of the lossless probe state of ``config``."""
    return qfi_gaussian(lossless_family(config), config.phi if phi is None else phi)


def circuit_qfi(circuit, phi=None):
    """QFI of the lossless version of ``circuit`` at ``phi`` (default: its own)."""
    return qfi_gaussian(circuit_lossless_family(circuit), circuit.phi if phi is None else phi)


def sql_reference(config):
    """Fisher information ``4 N_p`` of a coherent probe carrying the same arm-a photons.

    ``N_p`` is the mean photon number in arm a at the phase object.
    """
    return 4 * gc.mean_photon_number(probe_state(config), 0)


def qcrb(config, phi=None):
    f = qfi(config, phi)
    if f <= 0:
        raise DomainError("QFI vanishes: no phase information in this state")
    return 1 / f


__all__ = ["FisherReport", "NonGaussianObservable", "MixedStateError", "cfi_gaussian",
           "circuit_cfi", "qfi_gaussian", "qfi", "circuit_qfi", "qcrb", "sql_reference", "lossless_family",
           "circuit_lossless_family"]
