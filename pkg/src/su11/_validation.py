"""Small argument checks shared by the public functions.

They raise ``ValueError`` subclasses so callers can catch a single
family of domain errors (the CLI maps them to exit code 3).
"""
import math
import numbers


class DomainError(ValueError):
    """A parameter lies outside the physically meaningful domain."""


def check_mode(mode, n_modes):
    if not isinstance(mode, numbers.Integral) or isinstance(mode, bool):
        raise DomainError(f"mode index must be an integer, got {mode!r}")
    if not 0 <= mode < n_modes:
        raise DomainError(f"mode {mode} out of range for {n_modes}-mode state")
    return int(mode)


def check_transmission(eta, name="eta"):
    eta = float(eta)
    if not (0.0 <= eta <= 1.0) or math.isnan(eta):
        raise DomainError(f"{name} must lie in [0, 1], got {eta}")
    return eta


def check_gain(g, name="gain"):
    g = float(g)
    if not g >= 1.0 or math.isinf(g):
        raise DomainError(f"{name} must be a finite value >= 1, got {g}")
    return g


def check_nonnegative(x, name):
    x = float(x)
    if not x >= 0.0 or math.isinf(x):
        raise DomainError(f"{name} must be finite and >= 0, got {x}")
    return x


def check_finite(x, name):
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x}")
    return x
