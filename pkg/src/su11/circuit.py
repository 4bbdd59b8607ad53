"""Linear pipelines of Gaussian channels followed by one detector.

A :class:`Circuit` is what both :class:`~su11.interferometer.InterferometerConfig`
and the ``.circ`` language compile to.  Running a circuit applies the
:mod:`su11.gaussian_core` operations element by element, so two circuits
with equal element lists produce bit-identical states.
"""
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import gaussian_core as gc
from ._validation import DomainError, check_gain, check_mode, check_transmission


class Observable(str, Enum):
    """Measurement choices.

    ``M_N``  total photon number of the two outputs;
    ``M_Nb`` photon number of output b only;
    ``M_Q``  sum of the two homodyne outputs;
    ``M_lambdaQ`` homodyne sum with output b scaled by ``lam``;
    ``M_Q2`` square of the ``M_Q`` joint quadrature (noise power).
    """

    M_N = "M_N"
    M_Nb = "M_Nb"
    M_Q = "M_Q"
    M_lambdaQ = "M_lambdaQ"
    M_Q2 = "M_Q2"

    @property
    def is_intensity(self):
        return self in (Observable.M_N, Observable.M_Nb)

    @property
    def is_gaussian(self):
        return self in (Observable.M_Q, Observable.M_lambdaQ)


@dataclass(frozen=True)
class Seed:
    mode: int
    alpha: complex

    def apply(self, state):
        return gc.displace(state, self.mode, self.alpha)

    def affine(self, n_modes):
        d = np.zeros(2 * n_modes)
        d[2 * self.mode] = 2 * complex(self.alpha).real
        d[2 * self.mode + 1] = 2 * complex(self.alpha).imag
        return np.eye(2 * n_modes), None, d


@dataclass(frozen=True)
class NLO:
    mode_a: int
    mode_b: int
    gain: float
    pump_phase: float = 0.0

    def __post_init__(self):
        check_gain(self.gain)
        if self.mode_a == self.mode_b:
            raise DomainError(f"nlo needs two distinct modes, got {self.mode_a} twice")

    @property
    def params(self):
        return gc.SqueezeParams.from_gain(self.gain, self.pump_phase, (self.mode_a, self.mode_b))

    def apply(self, state):
        return gc.two_mode_squeeze(state, self.params)

    def affine(self, n_modes):
        return gc.two_mode_squeeze_matrix(n_modes, self.params), None, None


@dataclass(frozen=True)
class Loss:
    mode: int
    eta: float

    def __post_init__(self):
        check_transmission(self.eta)

    def apply(self, state):
        return gc.loss(state, self.mode, self.eta)

    def affine(self, n_modes):
        X, Y = gc.loss_matrices(n_modes, self.mode, self.eta)
        return X, Y, None


@dataclass(frozen=True)
class Phase:
    mode: int
    phi: float

    def apply(self, state):
        return gc.phase_shift(state, self.mode, self.phi)

    def affine(self, n_modes):
        return gc.phase_matrix(n_modes, self.mode, self.phi), None, None


@dataclass(frozen=True)
class Detector:
    """Which observable is read out, on which modes, with which LO settings.

    ``modes[0]`` is output a and ``modes[1]`` (if present) output b.  For
    ``M_Nb`` the single listed mode is the one counted.
    """

    kind: Observable
    modes: tuple = (0, 1)
    theta_a: float = np.pi / 2
    theta_b: float = np.pi / 2
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Observable(self.kind))
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if not self.modes:
            raise DomainError("detector needs at least one mode")
        if len(set(self.modes)) != len(self.modes):
            raise DomainError(f"detector modes repeat: {self.modes}")
        if len(self.modes) > 2:
            raise DomainError("detectors act on at most two modes")

    def weights(self):
        """``{mode: (theta, lam)}`` for the quadrature observables."""
        w = {self.modes[0]: (self.theta_a, 1.0)}
        if len(self.modes) == 2:
            lam = self.lam if self.kind == Observable.M_lambdaQ else 1.0
            w[self.modes[1]] = (self.theta_b, lam)
        return w


@dataclass(frozen=True)
class Circuit:
    """Ordered channel elements acting on ``n_modes`` vacuum modes, plus a detector.

    ``phase_index`` points at the element whose angle is the estimated phase.
    """

    n_modes: int
    elements: tuple
    detector: Detector
    phase_index: int = None
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            for m in _element_modes(el):
                check_mode(m, self.n_modes)
        for m in self.detector.modes:
            check_mode(m, self.n_modes)
        if self.phase_index is None:
            idx = [i for i, el in enumerate(self.elements) if isinstance(el, Phase)]
            if idx:
                object.__setattr__(self, "phase_index", idx[0])
        elif not isinstance(self.elements[self.phase_index], Phase):
            raise DomainError(f"element {self.phase_index} is not a phase shift")

    @property
    def phi(self):
        return self.elements[self.phase_index].phi if self.phase_index is not None else None

    def with_phi(self, phi):
        if self.phase_index is None:
            raise DomainError("circuit has no phase object")
        els = list(self.elements)
        els[self.phase_index] = replace(els[self.phase_index], phi=float(phi))
        return replace(self, elements=tuple(els))

    def with_detector(self, **changes):
        return replace(self, detector=replace(self.detector, **changes))

    def run(self, phi=None):
        circ = self if phi is None else self.with_phi(phi)
        state = gc.vacuum(circ.n_modes)
        for el in circ.elements:
            state = el.apply(state)
        return state

    def phase_family(self):
        """Split the circuit around the phase object (see :class:`PhaseFamily`)."""
        if self.phase_index is None:
            raise DomainError("circuit has no phase object")
        state = gc.vacuum(self.n_modes)
        for el in self.elements[:self.phase_index]:
            state = el.apply(state)
        dim = 2 * self.n_modes
        X = np.eye(dim)
        Y = np.zeros((dim, dim))
        d = np.zeros(dim)
        for el in self.elements[self.phase_index + 1:]:
            Xe, Ye, de = el.affine(self.n_modes)
            X = Xe @ X
            Y = Xe @ Y @ Xe.T
            d = Xe @ d
            if Ye is not None:
                Y = Y + Ye
            if de is not None:
                d = d + de
        return PhaseFamily(state.mean, state.cov, self.elements[self.phase_index].mode, X, Y, d)


def _element_modes(el):
    if isinstance(el, NLO):
        return (el.mode_a, el.mode_b)
    return (el.mode,)


@dataclass(frozen=True)
class PhaseFamily:
    """The one-parameter family ``phi -> state`` of a circuit.

    The state reaching the phase object is fixed (``mean_in``, ``cov_in``);
    everything downstream is one affine channel ``(X, Y, d)``.  Moments are
    evaluated for arrays of ``phi`` at once and the exact ``phi`` derivative
    is available because the phase enters only through one rotation.
    """

    mean_in: np.ndarray
    cov_in: np.ndarray
    mode: int
    X: np.ndarray
    Y: np.ndarray
    d: np.ndarray

    @property
    def n_modes(self):
        return self.mean_in.size // 2

    def _rotations(self, phis):
        phis = np.asarray(phis, dtype=float)
        dim = self.mean_in.size
        R = np.broadcast_to(np.eye(dim), phis.shape + (dim, dim)).copy()
        i = 2 * self.mode
        c, s = np.cos(phis), np.sin(phis)
        R[..., i, i] = c
        R[..., i, i + 1] = -s
        R[..., i + 1, i] = s
        R[..., i + 1, i + 1] = c
        return R

    def moments(self, phis):
        """Means ``(..., 2N)`` and covariances ``(..., 2N, 2N)`` at ``phis``."""
        T = self.X @ self._rotations(phis)
        mean = T @ self.mean_in + self.d
        cov = T @ self.cov_in @ np.swapaxes(T, -1, -2) + self.Y
        return mean, cov

    def derivatives(self, phi):
        """Exact ``d mean/d phi`` and ``d cov/d phi`` at a scalar ``phi``."""
        R = self._rotations(phi)
        i = 2 * self.mode
        dR = np.zeros_like(R)
        c, s = np.cos(phi), np.sin(phi)
        dR[i:i + 2, i:i + 2] = [[-s, -c], [c, -s]]
        T, dT = self.X @ R, self.X @ dR
        dmean = dT @ self.mean_in
        dcov = dT @ self.cov_in @ T.T + T @ self.cov_in @ dT.T
        return dmean, dcov

    def state(self, phi):
        mean, cov = self.moments(phi)
        return gc.GaussianState(mean, 0.5 * (cov + cov.T))

    def __call__(self, phi):
        return self.state(phi)
