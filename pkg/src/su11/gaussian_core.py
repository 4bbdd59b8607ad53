"""Gaussian states of N bosonic modes and the channels acting on them.

Conventions
-----------
Quadratures are ``x = a + a^dag`` and ``p = -i (a - a^dag)``, so that
``[x, p] = 2i`` and the vacuum covariance matrix is the identity.  Phase
space vectors are interleaved per mode: ``(x1, p1, x2, p2, ...)``.  The
covariance matrix is ``V_ij = <{dR_i, dR_j}>/2`` and the ordered second
moments are ``<R_i R_j> = V_ij + mu_i mu_j + i Omega_ij``.

Every channel is an affine map ``mu -> X mu + d`` and
``V -> X V X^T + Y``.  The matrix builders are public so that callers
can compose whole pipelines (see :mod:`su11.interferometer`).
"""
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_mode, check_nonnegative, check_transmission

SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-9


def symplectic_form(n_modes):
    """Block-diagonal symplectic form with ``[[0, 1], [-1, 0]]`` blocks."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def gain_to_r(g):
    """Squeezing parameter for intensity gain ``g = cosh(r)**2``."""
    if g < 1.0:
        raise DomainError(f"gain must be >= 1, got {g}")
    return float(np.arccosh(np.sqrt(g)))


def r_to_gain(r):
    return float(np.cosh(r) ** 2)


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix of an N-mode Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mean.ndim != 1 or mean.size % 2 or mean.size == 0:
            raise DomainError("mean must be a nonempty vector of even length")
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"cov must be {mean.size}x{mean.size}, got {cov.shape}")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise DomainError("cov is not symmetric")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self):
        return self.mean.size // 2

    def is_physical(self, tol=PHYSICALITY_TOL):
        """True when ``cov + i*Omega`` is positive semidefinite within ``tol``."""
        return physicality_margin(self) >= -tol

    def is_pure(self, tol=1e-8):
        """All symplectic eigenvalues equal one (within ``tol``)."""
        return bool(np.all(np.abs(symplectic_eigenvalues(self) - 1.0) < tol))

    def block(self, mode):
        i = 2 * mode
        return self.mean[i:i + 2], self.cov[i:i + 2, i:i + 2]


@dataclass(frozen=True)
class SqueezeParams:
    """Two-mode squeezer ``a -> cosh(r) a + exp(i*pump_phase) sinh(r) b^dag``."""

    r: float
    pump_phase: float = 0.0
    mode_pair: tuple = (0, 1)

    def __post_init__(self):
        check_nonnegative(self.r, "r")
        i, j = self.mode_pair
        if i == j:
            raise DomainError(f"two-mode squeezer needs distinct modes, got {self.mode_pair}")

    @classmethod
    def from_gain(cls, g, pump_phase=0.0, mode_pair=(0, 1)):
        return cls(gain_to_r(g), pump_phase, tuple(mode_pair))

    @property
    def gain(self):
        return r_to_gain(self.r)


def symplectic_eigenvalues(state):
    """Symplectic spectrum of ``cov`` (one value per mode, ascending)."""
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(state.n_modes) @ state.cov))
    return np.sort(ev)[::2]


def physicality_margin(state):
    """Smallest eigenvalue of ``cov + i*Omega``."""
    herm = state.cov + 1j * symplectic_form(state.n_modes)
    return float(np.linalg.eigvalsh(herm)[0])


def vacuum(n_modes):
    if int(n_modes) != n_modes or n_modes < 1:
        raise DomainError(f"n_modes must be a positive integer, got {n_modes}")
    n_modes = int(n_modes)
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes))


def thermal(n_modes, nbar):
    nbar = np.broadcast_to(np.asarray(nbar, dtype=float), (n_modes,))
    return GaussianState(np.zeros(2 * n_modes), np.diag(np.repeat(2 * nbar + 1, 2)))


# -- channel matrices -------------------------------------------------------

def two_mode_squeeze_matrix(n_modes, params):
    """Symplectic matrix of the two-mode squeezer acting on ``params.mode_pair``."""
    i, j = (check_mode(m, n_modes) for m in params.mode_pair)
    c, s = np.cosh(params.r), np.sinh(params.r)
    ct, st = np.cos(params.pump_phase), np.sin(params.pump_phase)
    # b^dag coupling: x_a -> c x_a + s (cos x_b + sin p_b), p_a -> c p_a + s (sin x_b - cos p_b)
    cross = s * np.array([[ct, st], [st, -ct]])
    S = np.eye(2 * n_modes)
    S[2 * i:2 * i + 2, 2 * i:2 * i + 2] = c * np.eye(2)
    S[2 * j:2 * j + 2, 2 * j:2 * j + 2] = c * np.eye(2)
    S[2 * i:2 * i + 2, 2 * j:2 * j + 2] = cross
    S[2 * j:2 * j + 2, 2 * i:2 * i + 2] = cross
    return S


def rotation_block(phi):
    """Phase-space action of ``a -> exp(i*phi) a`` on one mode."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def phase_matrix(n_modes, mode, phi):
    mode = check_mode(mode, n_modes)
    S = np.eye(2 * n_modes)
    S[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] = rotation_block(phi)
    return S


def loss_matrices(n_modes, mode, eta):
    """``(X, Y)`` of a beamsplitter of transmission ``eta`` coupling to vacuum."""
    mode = check_mode(mode, n_modes)
    eta = check_transmission(eta)
    X = np.eye(2 * n_modes)
    Y = np.zeros((2 * n_modes, 2 * n_modes))
    sl = slice(2 * mode, 2 * mode + 2)
    X[sl, sl] = np.sqrt(eta) * np.eye(2)
    Y[sl, sl] = (1.0 - eta) * np.eye(2)
    return X, Y


def _apply(state, X, Y=None, d=None):
    mean = X @ state.mean
    cov = X @ state.cov @ X.T
    if Y is not None:
        cov = cov + Y
    if d is not None:
        mean = mean + d
    # congruence leaves rounding-level asymmetry
    return GaussianState(mean, 0.5 * (cov + cov.T))


# -- state operations -------------------------------------------------------

def displace(state, mode, alpha):
    """Shift ``<a_mode>`` by the complex amplitude ``alpha``."""
    mode = check_mode(mode, state.n_modes)
    alpha = complex(alpha)
    mean = state.mean.copy()
    mean[2 * mode] += 2.0 * alpha.real
    mean[2 * mode + 1] += 2.0 * alpha.imag
    return GaussianState(mean, state.cov)


def coherent(n_modes, mode, alpha):
    return displace(vacuum(n_modes), mode, alpha)


def two_mode_squeeze(state, params):
    return _apply(state, two_mode_squeeze_matrix(state.n_modes, params))


def phase_shift(state, mode, phi):
    return _apply(state, phase_matrix(state.n_modes, mode, phi))


def loss(state, mode, eta):
    X, Y = loss_matrices(state.n_modes, mode, eta)
    return _apply(state, X, Y)


# -- measurement statistics -------------------------------------------------

def quadrature_vector(n_modes, weights):
    """Phase-space vector ``w`` with ``w . R = sum lam (e^{i th} a + h.c.)``.

    ``weights`` maps mode index to ``(theta, lam)``.
    """
    w = np.zeros(2 * n_modes)
    for mode, (theta, lam) in weights.items():
        mode = check_mode(mode, n_modes)
        w[2 * mode] += lam * np.cos(theta)
        w[2 * mode + 1] -= lam * np.sin(theta)
    return w


def linear_moments(mean, cov, w):
    """Mean and variance of ``w . R``; broadcasts over leading axes."""
    m = np.einsum("...i,...i->...", w, mean)
    v = np.einsum("...i,...ij,...j->...", w, cov, w)
    return m, v


def quadrature_stats(state, mode, theta):
    """Moments of ``exp(i*theta) a + exp(-i*theta) a^dag`` on one mode.

    ``theta = pi/2`` measures (minus) the phase quadrature ``p``.
    """
    w = quadrature_vector(state.n_modes, {mode: (theta, 1.0)})
    m, v = linear_moments(state.mean, state.cov, w)
    return float(m), float(v)


def joint_quadrature_stats(state, weights):
    """Moments of ``sum_k lam_k (e^{i theta_k} a_k + h.c.)``.

    Parameters
    ----------
    weights : dict or sequence
        Either ``{mode: (theta, lam)}`` or a sequence of ``(theta, lam)``
        pairs indexed by mode.
    """
    if not isinstance(weights, dict):
        weights = dict(enumerate(weights))
    if not weights:
        raise DomainError("need weights for at least one mode")
    w = quadrature_vector(state.n_modes, weights)
    m, v = linear_moments(state.mean, state.cov, w)
    return float(m), float(v)


def photon_moments(mean, cov, modes):
    """Mean and variance of the total photon number over ``modes``.

    Works on stacked states: ``mean`` has shape ``(..., 2N)`` and ``cov``
    ``(..., 2N, 2N)``.  With ``n = (x^2 + p^2 - 2)/4`` the number operator is
    a quadratic form ``R^T A R`` and Wick's theorem gives

        Var = 2 tr(A V A V) - 2 tr(A^2) + 4 mu^T A V A mu

    (the ``-2 tr(A^2)`` is ``2 tr(A Omega A Omega)`` for this ``A``).
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    idx = np.concatenate([[2 * m, 2 * m + 1] for m in modes])
    sub_mu = mean[..., idx]
    sub_v = cov[..., idx[:, None], idx[None, :]]
    k = len(modes)
    diag = np.einsum("...ii->...", sub_v)
    n_mean = (diag - 2 * k) / 4 + np.einsum("...i,...i->...", sub_mu, sub_mu) / 4
    # A = I/4 on the selected block
    tr_vv = np.einsum("...ij,...ji->...", sub_v, sub_v)
    quad = np.einsum("...i,...ij,...j->...", sub_mu, sub_v, sub_mu)
    n_var = 2 * tr_vv / 16 - 2 * (2 * k) / 16 + 4 * quad / 16
    return n_mean, n_var


def photon_stats(state, modes):
    modes = [check_mode(m, state.n_modes) for m in modes]
    if not modes:
        raise DomainError("photon_stats needs a nonempty mode subset")
    if len(set(modes)) != len(modes):
        raise DomainError(f"duplicate modes in {modes}")
    m, v = photon_moments(state.mean, state.cov, modes)
    return float(m), float(v)


def mean_photon_number(state, mode):
    return photon_stats(state, [mode])[0]
