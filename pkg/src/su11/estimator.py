"""scikit-learn style front end: ``fit`` finds the operating point, ``predict`` maps phi to Delta^2 phi."""
import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError
from .circuit import Observable
from .fisher import qfi
from .interferometer import (InterferometerConfig, Topology, ZeroSlope, check_compatible,
                             optimize_operating_point, sensitivity)


class SensitivityEstimator(BaseEstimator):
    """Optimized phase sensitivity of one interferometer configuration.

    Parameters
    ----------
    topology : str
        One of the :class:`~su11.interferometer.Topology` values.
    observable : str
        Detection scheme (``"M_N"``, ``"M_Nb"``, ``"M_Q"``, ``"M_lambdaQ"``, ``"M_Q2"``).
    gain, g2 : float
        Intensity gains of NLO 1 and NLO 2 (``g2=None`` copies ``gain``).
    seed_photons : float
        Mean photon number of the coherent seed.
    eta_int, eta_ext : float
        Internal and detection transmissions, applied to both arms.
    free_params : tuple of str
        Operating-point coordinates optimized by :meth:`fit`.
    angle_points, budget : int
        Coarse-grid controls passed to the optimizer.

    Attributes
    ----------
    config_ : InterferometerConfig
        Configuration at the optimal operating point.
    operating_point_ : dict
    delta2_phi_ : float
        Optimal phase variance.
    qcrb_ : float
        ``1 / F_Q`` of the lossless probe state at the optimum.
    report_ : SensitivityReport
    """

    def __init__(self, topology="Conventional_Intensity", observable="M_N", gain=4.0, g2=None,
                 seed_photons=0.0, eta_int=1.0, eta_ext=1.0, free_params=("phi",),
                 angle_points=512, budget=2 ** 18):
        self.topology = topology
        self.observable = observable
        self.gain = gain
        self.g2 = g2
        self.seed_photons = seed_photons
        self.eta_int = eta_int
        self.eta_ext = eta_ext
        self.free_params = free_params
        self.angle_points = angle_points
        self.budget = budget

    def _config(self):
        if self.seed_photons < 0:
            raise DomainError(f"seed_photons must be >= 0, got {self.seed_photons}")
        return InterferometerConfig(Topology(self.topology), math.sqrt(self.seed_photons),
                                    self.gain, g2=self.g2, eta_ai=self.eta_int, eta_bi=self.eta_int,
                                    eta_ae=self.eta_ext, eta_be=self.eta_ext)

    def fit(self, X=None, y=None):
        """Optimize the operating point; ``X`` and ``y`` are ignored."""
        config = self._config()
        observable = check_compatible(config, Observable(self.observable))
        report = optimize_operating_point(config, observable, tuple(self.free_params),
                                          angle_points=self.angle_points, budget=self.budget)
        self.report_ = report
        self.operating_point_ = dict(report.operating_point)
        self.config_ = config.with_operating_point(self.operating_point_)
        self.delta2_phi_ = report.delta2_phi
        f = qfi(self.config_)
        self.qcrb_ = math.inf if f == 0 else 1 / f
        return self

    def predict(self, X):
        """Delta^2 phi at each phase in ``X``, other coordinates held at the optimum.

        Points without phase sensitivity give ``inf``.
        """
        check_is_fitted(self, "config_")
        phis = np.asarray(X, dtype=float).reshape(-1)
        if not np.all(np.isfinite(phis)):
            raise DomainError("phases must be finite")
        out = np.empty(phis.shape)
        for i, phi in enumerate(phis):
            try:
                out[i] = sensitivity(self.config_.replace(phi=phi), self.observable).delta2_phi
            except ZeroSlope:
                out[i] = np.inf
        return out

    def score(self, X=None, y=None):
        """Fraction of the quantum bound reached at the optimum, ``qcrb_ / delta2_phi_``."""
        check_is_fitted(self, "config_")
        return self.qcrb_ / self.delta2_phi_
