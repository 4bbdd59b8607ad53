"""Closed-form sensitivities and Fisher informations of SU(1,1) interferometers.

Each form is a plain function of the squeezing parameter ``r`` (gain
``g = cosh(r)**2``), the seed photon number ``alpha_sq = |alpha|**2`` and
the operating point.  Bright-seed forms are the leading order in
``1/alpha_sq``.  :func:`evaluate` dispatches by :class:`ClosedForm` tag and
checks each form's parameter domain first.

All sensitivities are variances ``Delta^2 phi``.  Angle conventions are
those of the closed forms; see ``README.md`` for how they map onto the
simulation's LO angles.
"""
import math
from enum import Enum

import numpy as np

from ._validation import DomainError

R_MAX = 5.0


class SingularityError(DomainError):
    """The form has a pole at the requested parameters (e.g. ``r = 0``)."""


class ClosedForm(str, Enum):
    QFI_NLO = "qfi_nlo"
    QFI_SQL = "qfi_sql"
    SQL_DELTA2 = "sql_delta2"
    BRIGHT_INTENSITY = "bright_intensity"
    BRIGHT_INTENSITY_PHI_OPT = "bright_intensity_phi_opt"
    BRIGHT_INTENSITY_MIN = "bright_intensity_min"
    BRIGHT_INTENSITY_MIN_NS = "bright_intensity_min_ns"
    BRIGHT_INTENSITY_B = "bright_intensity_b"
    BRIGHT_INTENSITY_B_MIN = "bright_intensity_b_min"
    VACUUM_INTENSITY = "vacuum_intensity"
    VACUUM_INTENSITY_MIN = "vacuum_intensity_min"
    BRIGHT_HOMODYNE = "bright_homodyne"
    BRIGHT_HOMODYNE_MIN = "bright_homodyne_min"
    VACUUM_NOISE_POWER = "vacuum_noise_power"
    VACUUM_NOISE_POWER_OFFSET_OPT = "vacuum_noise_power_offset_opt"
    VACUUM_NOISE_POWER_MIN = "vacuum_noise_power_min"
    LAMBDA_OPT = "lambda_opt"


def _r(r, positive):
    r = float(r)
    if not 0.0 <= r <= R_MAX or math.isnan(r):
        raise DomainError(f"r must lie in [0, {R_MAX}], got {r}")
    if positive and r == 0.0:
        raise SingularityError("form is singular at r = 0 (no squeezing)")
    return r


def _alpha_sq(alpha_sq, positive=True):
    alpha_sq = float(alpha_sq)
    if alpha_sq < 0 or (positive and alpha_sq == 0) or math.isnan(alpha_sq):
        raise DomainError(f"alpha_sq must be {'> 0' if positive else '>= 0'}, got {alpha_sq}")
    return alpha_sq


def _csch4_times(r, x):
    """``x * csch(2r)^4`` without forming ``sinh(2r)^4`` separately."""
    return x / math.sinh(2 * r) ** 4


# -- Fisher information and limits -------------------------------------------

def qfi_nlo(r, alpha_sq):
    """Quantum Fisher information of the two-mode state after NLO 1."""
    r = _r(r, positive=False)
    alpha_sq = _alpha_sq(alpha_sq, positive=False)
    return 2 * math.cosh(r) ** 2 * ((2 * alpha_sq + 1) * math.cosh(2 * r) - 1)


def qfi_sql(r, alpha_sq):
    """Fisher information ``4 N_p`` of a coherent probe with the same arm-a photons."""
    r = _r(r, positive=False)
    alpha_sq = _alpha_sq(alpha_sq, positive=False)
    return 4 * (alpha_sq * math.cosh(r) ** 2 + math.sinh(r) ** 2)


def sql_delta2(n_p):
    """Phase variance ``1/(4 N_p)`` of the homodyne reference device."""
    n_p = float(n_p)
    if not n_p > 0:
        raise DomainError(f"photon number must be > 0, got {n_p}")
    return 1.0 / (4 * n_p)


def qcrb(r, alpha_sq):
    """Quantum Cramer-Rao bound ``1/F_Q`` as a phase variance."""
    f = qfi_nlo(r, alpha_sq)
    if f == 0.0:
        raise SingularityError("F_Q = 0 for r = 0 and alpha = 0: the state carries no phase information")
    return 1.0 / f


# -- intensity detection -----------------------------------------------------

def bright_intensity(r, alpha_sq, phi):
    """Total output photon number, bright seed, no loss."""
    r = _r(r, positive=True)
    alpha_sq = _alpha_sq(alpha_sq)
    half = phi / 2
    if math.sin(half) == 0 or math.cos(half) == 0:
        raise SingularityError(f"sensitivity diverges at phi = {phi}")
    bracket = math.cosh(8 * r) / math.cos(half) ** 2 + 1 / math.sin(half) ** 2
    return (_csch4_times(r, bracket) - 8) / (4 * alpha_sq)


def bright_intensity_phi_opt(r):
    r = _r(r, positive=False)
    return 2 * math.atan(math.cosh(8 * r) ** -0.25)


def bright_intensity_min(r, alpha_sq):
    r = _r(r, positive=True)
    alpha_sq = _alpha_sq(alpha_sq)
    num = 2 * math.cosh(4 * r) + math.sqrt(math.cosh(8 * r)) - 1
    return _csch4_times(r, num) / (2 * alpha_sq)


def bright_intensity_min_ns(n_s, alpha_sq):
    """:func:`bright_intensity_min` written in spontaneous photons ``n_s = 2g - 2``."""
    n_s = float(n_s)
    if not n_s > 0:
        raise SingularityError(f"n_s must be > 0, got {n_s}")
    alpha_sq = _alpha_sq(alpha_sq)
    root = math.sqrt(math.cosh(8 * math.asinh(math.sqrt(n_s / 2))))
    return (4 * n_s * (n_s + 2) + root + 1) / (2 * alpha_sq * n_s ** 2 * (n_s + 2) ** 2)


def bright_intensity_b(r, alpha_sq, phi):
    """Photon number of output b only, bright seed, no loss."""
    r = _r(r, positive=True)
    alpha_sq = _alpha_sq(alpha_sq)
    c = math.cos(phi / 2)
    if c == 0:
        raise SingularityError(f"sensitivity diverges at phi = {phi}")
    lead = math.cosh(4 * r) / (math.sinh(r) ** 2 * math.cosh(r) ** 2 * c ** 2)
    return (lead - 8) / (4 * alpha_sq)


def bright_intensity_b_min(r, alpha_sq):
    r = _r(r, positive=True)
    return 1 / (math.sinh(2 * r) ** 2 * _alpha_sq(alpha_sq))


def vacuum_intensity(r, phi):
    r = _r(r, positive=True)
    c = math.cos(phi / 2)
    if c == 0:
        raise SingularityError(f"sensitivity diverges at phi = {phi}")
    return 1 / (math.tanh(2 * r) ** 2 * c ** 2) - 1


def vacuum_intensity_min(r):
    r = _r(r, positive=True)
    return 1 / math.sinh(2 * r) ** 2


# -- homodyne detection ------------------------------------------------------

def bright_homodyne(r, alpha_sq, phi, theta_b):
    """Homodyne sum with ``theta_a = pi/2``, bright seed, no loss."""
    r = _r(r, positive=False)
    alpha_sq = _alpha_sq(alpha_sq)
    c = math.cos(phi)
    if c == 0:
        raise SingularityError(f"sensitivity diverges at phi = {phi}")
    t = math.tanh(r)
    return (1 - 2 * t * math.sin(theta_b - phi) + t * t) / (2 * alpha_sq * c * c)


def bright_homodyne_min(r, alpha_sq):
    r = _r(r, positive=False)
    return (math.tanh(r) - 1) ** 2 / (2 * _alpha_sq(alpha_sq))


def vacuum_noise_power(r, offset):
    """Noise-power measurement on a vacuum-seeded state; ``offset = phi - theta_b``."""
    r = _r(r, positive=True)
    s = math.sin(offset)
    if s == 0:
        raise SingularityError(f"sensitivity diverges at offset = {offset}")
    bracket = 2 * math.cos(offset) + math.tanh(r) + 1 / math.tanh(r)
    return 0.5 * bracket ** 2 / (s * s)


def vacuum_noise_power_offset_opt(r):
    r = _r(r, positive=True)
    return math.pi - math.atan(1 / math.sinh(2 * r))


def vacuum_noise_power_min(r):
    r = _r(r, positive=True)
    return 2 / math.sinh(2 * r) ** 2


def lambda_opt(r):
    """Classical weight of output b that makes the homodyne sum optimal."""
    return math.tanh(2 * _r(r, positive=False))


_DISPATCH = {
    ClosedForm.QFI_NLO: (qfi_nlo, ("r", "alpha_sq")),
    ClosedForm.QFI_SQL: (qfi_sql, ("r", "alpha_sq")),
    ClosedForm.SQL_DELTA2: (sql_delta2, ("n_p",)),
    ClosedForm.BRIGHT_INTENSITY: (bright_intensity, ("r", "alpha_sq", "phi")),
    ClosedForm.BRIGHT_INTENSITY_PHI_OPT: (bright_intensity_phi_opt, ("r",)),
    ClosedForm.BRIGHT_INTENSITY_MIN: (bright_intensity_min, ("r", "alpha_sq")),
    ClosedForm.BRIGHT_INTENSITY_MIN_NS: (bright_intensity_min_ns, ("n_s", "alpha_sq")),
    ClosedForm.BRIGHT_INTENSITY_B: (bright_intensity_b, ("r", "alpha_sq", "phi")),
    ClosedForm.BRIGHT_INTENSITY_B_MIN: (bright_intensity_b_min, ("r", "alpha_sq")),
    ClosedForm.VACUUM_INTENSITY: (vacuum_intensity, ("r", "phi")),
    ClosedForm.VACUUM_INTENSITY_MIN: (vacuum_intensity_min, ("r",)),
    ClosedForm.BRIGHT_HOMODYNE: (bright_homodyne, ("r", "alpha_sq", "phi", "theta_b")),
    ClosedForm.BRIGHT_HOMODYNE_MIN: (bright_homodyne_min, ("r", "alpha_sq")),
    ClosedForm.VACUUM_NOISE_POWER: (vacuum_noise_power, ("r", "offset")),
    ClosedForm.VACUUM_NOISE_POWER_OFFSET_OPT: (vacuum_noise_power_offset_opt, ("r",)),
    ClosedForm.VACUUM_NOISE_POWER_MIN: (vacuum_noise_power_min, ("r",)),
    ClosedForm.LAMBDA_OPT: (lambda_opt, ("r",)),
}


def parameters(form):
    """Names of the parameters ``form`` takes."""
    return _DISPATCH[ClosedForm(form)][1]


def evaluate(form, **params):
    """Evaluate a closed form by tag.

    ``g`` may be passed instead of ``r``.  Unknown or missing parameters
    raise ``TypeError``.
    """
    fn, names = _DISPATCH[ClosedForm(form)]
    if "g" in params and "r" not in params and "r" in names:
        g = float(params.pop("g"))
        if g < 1:
            raise DomainError(f"gain must be >= 1, got {g}")
        params["r"] = math.acosh(math.sqrt(g))
    extra = set(params) - set(names)
    if extra:
        raise TypeError(f"{form}: unexpected parameters {sorted(extra)}")
    return fn(**params)


# numpy-friendly versions for plotting grids
def vectorize(form):
    fn = _DISPATCH[ClosedForm(form)][0]

    def _safe(*args):
        try:
            return fn(*args)
        except DomainError:
            return np.nan

    return np.vectorize(_safe, otypes=[float])
