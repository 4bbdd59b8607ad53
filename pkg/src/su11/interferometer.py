"""SU(1,1) interferometer configurations and their phase sensitivities.

The three layouts are

* ``Conventional_Intensity`` - NLO 1, phase, NLO 2, photon counting;
* ``Conventional_Homodyne``  - the same with homodyne detection;
* ``Truncated_Homodyne``     - NLO 1, phase, homodyne detection (no NLO 2);

plus ``MZ_Homodyne_Reference``, a coherent beam read out against a strong
local oscillator, which defines the standard quantum limit used here.

Mode 0 is arm a (it carries the seed and the phase object), mode 1 is arm b.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import minimize

from . import gaussian_core as gc
from ._validation import DomainError, check_finite, check_gain, check_transmission
from .circuit import NLO, Circuit, Detector, Loss, Observable, Phase, Seed

DEFAULT_STEP = 1e-4
ZERO_SLOPE_RTOL = 1e-9
BOUNDARY_PHI = 1e-4
PARAM_NAMES = ("phi", "theta_a", "theta_b", "lambda")


class ZeroSlope(DomainError):
    """The mean of the observable does not move with phi at this operating point."""


class IncompatibleObservable(DomainError):
    pass


class Topology(str, Enum):
    CONVENTIONAL_INTENSITY = "Conventional_Intensity"
    CONVENTIONAL_HOMODYNE = "Conventional_Homodyne"
    TRUNCATED_HOMODYNE = "Truncated_Homodyne"
    MZ_HOMODYNE_REFERENCE = "MZ_Homodyne_Reference"


_COMPATIBLE = {
    Topology.CONVENTIONAL_INTENSITY: {Observable.M_N, Observable.M_Nb},
    Topology.CONVENTIONAL_HOMODYNE: {Observable.M_Q, Observable.M_lambdaQ, Observable.M_Q2},
    Topology.TRUNCATED_HOMODYNE: {Observable.M_Q, Observable.M_lambdaQ, Observable.M_Q2},
    Topology.MZ_HOMODYNE_REFERENCE: {Observable.M_Q},
}


@dataclass(frozen=True)
class InterferometerConfig:
    """Physical parameters of one interferometer at one operating point.

    ``g2=None`` means "same gain as NLO 1".  For the truncated layout a
    given ``g2`` is ignored and a ``"g2_ignored"`` diagnostic is recorded.
    """

    topology: Topology = Topology.CONVENTIONAL_INTENSITY
    seed_alpha: complex = 0.0
    g1: float = 1.0
    g2: float = None
    eta_ai: float = 1.0
    eta_bi: float = 1.0
    eta_ae: float = 1.0
    eta_be: float = 1.0
    phi: float = 0.0
    theta_a: float = math.pi / 2
    theta_b: float = math.pi / 2
    lambda_weight: float = 1.0
    pump_phase: float = 0.0
    diagnostics: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "seed_alpha", complex(self.seed_alpha))
        check_gain(self.g1, "g1")
        if self.g2 is not None:
            check_gain(self.g2, "g2")
        for name in ("eta_ai", "eta_bi", "eta_ae", "eta_be"):
            check_transmission(getattr(self, name), name)
        for name in ("phi", "theta_a", "theta_b", "lambda_weight", "pump_phase"):
            check_finite(getattr(self, name), name)
        diags = set(self.diagnostics)
        if self.topology == Topology.TRUNCATED_HOMODYNE and self.g2 is not None:
            diags.add("g2_ignored")
        object.__setattr__(self, "diagnostics", tuple(sorted(diags)))

    @property
    def r1(self):
        return gc.gain_to_r(self.g1)

    @property
    def effective_g2(self):
        if self.topology == Topology.TRUNCATED_HOMODYNE:
            return None
        return self.g1 if self.g2 is None else self.g2

    @property
    def alpha_sq(self):
        return abs(self.seed_alpha) ** 2

    def replace(self, **changes):
        return replace(self, **changes)

    def operating_point(self):
        return {"phi": self.phi, "theta_a": self.theta_a,
                "theta_b": self.theta_b, "lambda": self.lambda_weight}

    def with_operating_point(self, point):
        keys = {"phi": "phi", "theta_a": "theta_a", "theta_b": "theta_b", "lambda": "lambda_weight"}
        return replace(self, **{keys[k]: float(v) for k, v in point.items()})


@dataclass(frozen=True)
class SensitivityReport:
    delta2_phi: float
    mean_M: float
    var_M: float
    dM_dphi: float
    operating_point: dict
    observable: Observable = None
    cfi: float = None
    boundary_limit: bool = False
    diagnostics: tuple = ()

    def to_dict(self):
        return {
            "observable": self.observable.value if self.observable else None,
            "delta2_phi": self.delta2_phi,
            "mean_M": self.mean_M,
            "var_M": self.var_M,
            "dM_dphi": self.dM_dphi,
            "operating_point": dict(self.operating_point),
            "cfi": self.cfi,
            "boundary_limit": self.boundary_limit,
            "diagnostics": list(self.diagnostics),
        }


# -- assembling circuits ----------------------------------------------------

def check_compatible(config, observable):
    observable = Observable(observable)
    if observable not in _COMPATIBLE[config.topology]:
        raise IncompatibleObservable(
            f"{observable.value} cannot be measured on {config.topology.value}")
    return observable


def detector_for(config, observable):
    observable = Observable(observable)
    if config.topology == Topology.MZ_HOMODYNE_REFERENCE:
        return Detector(observable, (0,), config.theta_a, config.theta_b, config.lambda_weight)
    modes = (1,) if observable == Observable.M_Nb else (0, 1)
    return Detector(observable, modes, config.theta_a, config.theta_b, config.lambda_weight)


def to_circuit(config, observable=None):
    """Element list of the configured layout; identity losses are omitted."""
    if observable is None:
        observable = next(iter(sorted(_COMPATIBLE[config.topology], key=lambda o: o.value)))
    observable = check_compatible(config, observable)
    els = []
    if config.topology == Topology.MZ_HOMODYNE_REFERENCE:
        if config.seed_alpha != 0:
            els.append(Seed(0, config.seed_alpha))
        _add_loss(els, 0, config.eta_ai)
        els.append(Phase(0, config.phi))
        _add_loss(els, 0, config.eta_ae)
        return Circuit(1, els, detector_for(config, observable), notes=config.diagnostics)

    if config.seed_alpha != 0:
        els.append(Seed(0, config.seed_alpha))
    els.append(NLO(0, 1, config.g1, config.pump_phase))
    _add_loss(els, 0, config.eta_ai)
    _add_loss(els, 1, config.eta_bi)
    els.append(Phase(0, config.phi))
    if config.topology != Topology.TRUNCATED_HOMODYNE:
        # pump shifted so that NLO 2 undoes NLO 1 at phi = 0
        els.append(NLO(0, 1, config.effective_g2, config.pump_phase + math.pi))
    _add_loss(els, 0, config.eta_ae)
    _add_loss(els, 1, config.eta_be)
    return Circuit(2, els, detector_for(config, observable), notes=config.diagnostics)


def _add_loss(els, mode, eta):
    if eta != 1.0:
        els.append(Loss(mode, eta))


def build_state(config):
    """Final output state of the configured interferometer."""
    return to_circuit(config).run()


def probe_state(config):
    """State of both arms just before the phase object (after internal loss)."""
    fam = to_circuit(config).phase_family()
    return gc.GaussianState(fam.mean_in, fam.cov_in)


# -- vectorized observable statistics ---------------------------------------

def _weight_vectors(detector, n_modes, theta_a, theta_b, lam):
    """Quadrature vectors for broadcast arrays of LO angles and weights."""
    theta_a, theta_b, lam = np.broadcast_arrays(
        np.asarray(theta_a, float), np.asarray(theta_b, float), np.asarray(lam, float))
    w = np.zeros(theta_a.shape + (2 * n_modes,))
    a = detector.modes[0]
    w[..., 2 * a] = np.cos(theta_a)
    w[..., 2 * a + 1] = -np.sin(theta_a)
    if len(detector.modes) == 2:
        b = detector.modes[1]
        scale = lam if detector.kind == Observable.M_lambdaQ else 1.0
        w[..., 2 * b] = scale * np.cos(theta_b)
        w[..., 2 * b + 1] = -scale * np.sin(theta_b)
    return w


def observable_moments(detector, mean, cov, w=None):
    """Mean and variance of the detector's observable.

    ``mean``/``cov`` carry leading axes ``S``; ``w`` (quadrature kinds only)
    has leading axes ``K``.  Results have shape ``S + K``.
    """
    kind = detector.kind
    if kind.is_intensity:
        return gc.photon_moments(mean, cov, detector.modes)
    if w is None:
        w = _weight_vectors(detector, mean.shape[-1] // 2,
                            detector.theta_a, detector.theta_b, detector.lam)
    wk = w.reshape(-1, w.shape[-1])
    s_shape = mean.shape[:-1]
    m = np.einsum("...i,ki->...k", mean, wk)
    v = np.einsum("ki,...ij,kj->...k", wk, cov, wk)
    if kind == Observable.M_Q2:
        # Gaussian q: <q^2> = v + m^2, Var(q^2) = 2 v^2 + 4 v m^2
        m, v = v + m ** 2, 2 * v ** 2 + 4 * v * m ** 2
    return m.reshape(s_shape + w.shape[:-1]), v.reshape(s_shape + w.shape[:-1])


def _stats_with_slope(family, detector, phis, w, h):
    """Mean, variance and Richardson-extrapolated d<M>/dphi.

    Central differences with steps ``h`` and ``h/2`` combine to an
    ``O(h^4)`` estimate.
    """
    phis = np.asarray(phis, dtype=float)
    offsets = np.array([0.0, h, -h, h / 2, -h / 2]).reshape((5,) + (1,) * phis.ndim)
    mean, cov = family.moments(phis + offsets)
    m, v = observable_moments(detector, mean, cov, w)
    if detector.kind.is_intensity and w is not None:
        extra = w.shape[:-1]
        m = m.reshape(m.shape + (1,) * len(extra))
        v = v.reshape(v.shape + (1,) * len(extra))
    d1 = (m[1] - m[2]) / (2 * h)
    d2 = (m[3] - m[4]) / h
    return m[0], v[0], (4 * d2 - d1) / 3


def _delta2(m, v, slope):
    scale = np.maximum(np.maximum(np.abs(m), np.sqrt(np.abs(v))), 1.0)
    flat = np.abs(slope) < ZERO_SLOPE_RTOL * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = np.where(flat, np.inf, v / np.where(flat, 1.0, slope) ** 2)
    return d2, flat


# -- public evaluation API --------------------------------------------------

def evaluate(config, observable):
    """Mean and variance of ``observable`` at the configured operating point."""
    circ = to_circuit(config, observable)
    state = circ.run()
    m, v = observable_moments(circ.detector, state.mean, state.cov)
    return float(np.squeeze(m)), float(np.squeeze(v))


def sensitivity(config, observable, derivative_step=DEFAULT_STEP):
    """Phase uncertainty ``Var(M) / (d<M>/dphi)^2`` at ``config.phi``.

    Raises
    ------
    ZeroSlope
        If ``|d<M>/dphi|`` is below ``1e-9`` times the scale of ``M``.
    """
    report = circuit_sensitivity(to_circuit(config, observable), derivative_step)
    return replace(report, operating_point=config.operating_point(),
                   diagnostics=config.diagnostics)


def circuit_sensitivity(circuit, derivative_step=DEFAULT_STEP):
    """:func:`sensitivity` for any :class:`~su11.circuit.Circuit` with a phase object."""
    family = circuit.phase_family()
    det = circuit.detector
    m, v, slope = _stats_with_slope(family, det, circuit.phi, None, derivative_step)
    m, v, slope = (float(np.squeeze(x)) for x in (m, v, slope))
    d2, flat = _delta2(np.array(m), np.array(v), np.array(slope))
    if flat:
        raise ZeroSlope(
            f"d<{det.kind.value}>/dphi vanishes at phi={circuit.phi:.6g} "
            "(no phase sensitivity at this operating point)")
    point = {"phi": circuit.phi, "theta_a": det.theta_a, "theta_b": det.theta_b,
             "lambda": det.lam}
    return SensitivityReport(float(d2), m, v, slope, point, det.kind,
                             diagnostics=tuple(circuit.notes))


def limit_sensitivity(config, observable, phi0=BOUNDARY_PHI, derivative_step=DEFAULT_STEP):
    """One-sided limit of the sensitivity as ``phi -> config.phi``.

    Used at dark fringes where mean and slope vanish together.  Evaluates
    at offsets ``phi0`` and ``phi0/2`` (sign of ``phi0`` picks the side) and
    extrapolates assuming a quadratic approach.
    """
    near = sensitivity(config.replace(phi=config.phi + phi0), observable, derivative_step)
    nearer = sensitivity(config.replace(phi=config.phi + phi0 / 2), observable, derivative_step)
    value = (4 * nearer.delta2_phi - near.delta2_phi) / 3
    return replace(nearer, delta2_phi=value, operating_point=config.operating_point(),
                   boundary_limit=True)


def sensitivity_q2(config, angles=None, derivative_step=DEFAULT_STEP):
    """Sensitivity of the joint-quadrature noise power ``M_Q2``.

    ``angles`` optionally overrides ``(theta_a, theta_b)``.
    """
    if angles is not None:
        config = config.replace(theta_a=angles[0], theta_b=angles[1])
    return sensitivity(config, Observable.M_Q2, derivative_step)


# -- optimization ------------------------------------------------------------

@dataclass(frozen=True)
class _Space:
    names: tuple
    axes: tuple

    def point(self, base, x):
        out = dict(base)
        for name, val in zip(self.names, x):
            out[name] = float(val)
        return out


def _relevant(params, observable, config):
    out = []
    for p in params:
        if p not in PARAM_NAMES:
            raise DomainError(f"unknown free parameter {p!r}; choose from {PARAM_NAMES}")
        if observable.is_intensity and p in ("theta_a", "theta_b", "lambda"):
            continue
        if p == "lambda" and observable != Observable.M_lambdaQ:
            continue
        if config.topology == Topology.MZ_HOMODYNE_REFERENCE and p in ("theta_b", "lambda"):
            continue
        if p not in out:
            out.append(p)
    return tuple(out)


def _grid_sizes(names, angle_points, lambda_points, budget):
    n_angles = sum(1 for n in names if n != "lambda")
    n_lam = lambda_points if "lambda" in names else 1
    if n_angles and n_lam > 1:
        n_lam = min(lambda_points, max(8, int(round(budget ** (1 / (n_angles + 1))))))
    per_angle = angle_points
    if n_angles:
        per_angle = min(angle_points, max(8, int((budget / n_lam) ** (1 / n_angles))))
    return per_angle, n_lam


def optimize_operating_point(config, observable, free_params=("phi",), *,
                             angle_points=512, lambda_points=64, budget=2 ** 18,
                             n_starts=4, derivative_step=DEFAULT_STEP, xatol=1e-9):
    """Global minimum of the phase uncertainty over the free parameters.

    A coarse grid (``angle_points`` per angle on ``[0, 2pi)`` and
    ``lambda_points`` log-spaced weights on ``[1e-3, 1]``; per-axis density
    reduced when the product would exceed ``budget`` points) seeds
    Nelder-Mead refinements from the ``n_starts`` best separated cells.
    For photon-number observables the dark-fringe limit ``phi -> 0`` is a
    candidate as well.
    """
    observable = check_compatible(config, observable)
    names = _relevant(tuple(free_params), observable, config)
    circ = to_circuit(config, observable)
    family = circ.phase_family()
    det = circ.detector
    base = config.operating_point()

    per_angle, n_lam = _grid_sizes(names, angle_points, lambda_points, budget)
    axes = []
    for n in names:
        if n == "lambda":
            axes.append(np.logspace(-3, 0, n_lam))
        else:
            axes.append(np.linspace(0, 2 * np.pi, per_angle, endpoint=False))
    space = _Space(names, tuple(axes))

    def grid_values(phi_vals, other):
        w = _weight_vectors(det, family.n_modes, other["theta_a"], other["theta_b"], other["lambda"])
        m, v, s = _stats_with_slope(family, det, phi_vals, w, derivative_step)
        return _delta2(m, v, s)[0]

    # grid: phi axis (if free) x product of the remaining axes
    other_names = [n for n in names if n != "phi"]
    mesh = np.meshgrid(*[space.axes[names.index(n)] for n in other_names], indexing="ij") if other_names else []
    other = {k: np.asarray(base[k], float) for k in ("theta_a", "theta_b", "lambda")}
    for n, arr in zip(other_names, mesh):
        other[n] = arr.ravel()
    phi_vals = space.axes[names.index("phi")] if "phi" in names else np.array([base["phi"]])
    grid = grid_values(phi_vals, other)
    grid = grid.reshape(len(phi_vals), -1)

    bounded_phi = observable.is_intensity and "phi" in names
    if bounded_phi:
        # dark fringes handled by the one-sided limit below
        grid[np.abs(np.angle(np.exp(1j * phi_vals))) < BOUNDARY_PHI] = np.inf

    starts = _pick_starts(grid, phi_vals, other_names, mesh, names, n_starts)

    def objective(x):
        pt = space.point(base, x)
        with np.errstate(all="ignore"):
            m, v, s = _stats_with_slope(family, det, pt["phi"],
                                        _weight_vectors(det, family.n_modes, pt["theta_a"],
                                                        pt["theta_b"], pt["lambda"]),
                                        derivative_step)
            val = float(np.squeeze(_delta2(m, v, s)[0]))
        if not np.isfinite(val) or val <= 0:
            return 1e300
        return val

    candidates = []
    for x0 in starts:
        if not names:
            break
        steps = [_step(space.axes[i], x0[i], n) for i, n in enumerate(names)]
        simplex = np.vstack([x0] + [np.asarray(x0) + np.eye(len(names))[i] * steps[i]
                                    for i in range(len(names))])
        f0 = objective(x0)
        scale = f0 if np.isfinite(f0) and f0 < 1e299 else 1.0
        bounds = None
        if bounded_phi:
            lo = [BOUNDARY_PHI if n == "phi" else None for n in names]
            hi = [2 * np.pi - BOUNDARY_PHI if n == "phi" else None for n in names]
            bounds = list(zip(lo, hi))
            simplex[:, names.index("phi")] = np.clip(simplex[:, names.index("phi")], lo[names.index("phi")],
                                                     hi[names.index("phi")])
        res = minimize(lambda x: objective(x) / scale, x0, method="Nelder-Mead", bounds=bounds,
                       options={"initial_simplex": simplex, "xatol": xatol, "fatol": np.inf,
                                "maxiter": 20000, "maxfev": 40000})
        val = res.fun * scale
        if val < 1e299:
            candidates.append((val, space.point(base, res.x), False))

    if not names:
        pt = dict(base)
        try:
            rep = sensitivity(config.with_operating_point(pt), observable, derivative_step)
            candidates.append((rep.delta2_phi, pt, False))
        except ZeroSlope:
            pass

    if observable.is_intensity and "phi" in names:
        ref = min(candidates, key=lambda c: c[0])[1] if candidates else dict(base)
        for side in (1.0, -1.0):
            pt = dict(ref, phi=0.0)
            try:
                rep = limit_sensitivity(config.with_operating_point(pt), observable,
                                        side * BOUNDARY_PHI, derivative_step)
            except ZeroSlope:
                continue
            if np.isfinite(rep.delta2_phi) and rep.delta2_phi > 0:
                candidates.append((rep.delta2_phi, pt, True))

    if not candidates:
        raise ZeroSlope(f"no operating point with phase sensitivity for {observable.value}")
    val, pt, is_limit = min(candidates, key=lambda c: c[0])
    for k in ("phi", "theta_a", "theta_b"):
        if k in names:
            pt[k] = float(np.mod(pt[k], 2 * np.pi))
    final = config.with_operating_point(pt)
    if is_limit:
        best = limit_sensitivity(final, observable, BOUNDARY_PHI if pt["phi"] >= 0 else -BOUNDARY_PHI,
                                 derivative_step)
        # keep the side that won
        best = replace(best, delta2_phi=val)
    else:
        best = sensitivity(final, observable, derivative_step)
    return best


def _step(axis, x, name):
    if name == "lambda":
        ratio = axis[1] / axis[0] if len(axis) > 1 else 1.1
        return x * (ratio - 1) if x else 1e-3
    return axis[1] - axis[0] if len(axis) > 1 else 0.1


def _pick_starts(grid, phi_vals, other_names, mesh, names, n_starts):
    flat = grid.ravel()
    order = np.argsort(flat, kind="stable")
    shape = grid.shape
    chosen, chosen_idx = [], []
    other_shape = mesh[0].shape if mesh else ()
    for k in order:
        if not np.isfinite(flat[k]):
            break
        ip, io = np.unravel_index(k, shape)
        multi = (ip,) + (np.unravel_index(io, other_shape) if other_shape else ())
        if any(_near(multi, c, (len(phi_vals),) + other_shape) for c in chosen_idx):
            continue
        chosen_idx.append(multi)
        x = []
        for n in names:
            if n == "phi":
                x.append(phi_vals[ip])
            else:
                x.append(mesh[other_names.index(n)].ravel()[io])
        chosen.append(np.array(x, dtype=float))
        if len(chosen) >= n_starts:
            break
    return chosen


def _near(a, b, sizes, radius=2):
    for i, j, n in zip(a, b, sizes):
        d = abs(i - j)
        d = min(d, n - d)
        if d > radius:
            return False
    return True


# -- sweeps -------------------------------------------------------------------

SWEEP_AXES = ("phi", "gain", "seed", "g2", "eta")


@dataclass(frozen=True)
class SweepPoint:
    value: float
    report: SensitivityReport = None
    reason: str = ""


def apply_axis(config, axis, value):
    """Config with one sweep coordinate set.

    ``gain`` sets NLO 1 (and NLO 2 when it follows NLO 1), ``seed`` the mean
    seed photon number, ``eta`` both internal transmissions.
    """
    value = float(value)
    if axis == "phi":
        return config.replace(phi=value)
    if axis == "gain":
        return config.replace(g1=value)
    if axis == "seed":
        if value < 0:
            raise DomainError("seed photon number must be >= 0")
        return config.replace(seed_alpha=math.sqrt(value))
    if axis == "g2":
        return config.replace(g2=value)
    if axis == "eta":
        return config.replace(eta_ai=value, eta_bi=value)
    raise DomainError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def sweep(config, observable, axis, grid, free_params=(), threads=None, **optimize_kw):
    """One report per grid value; failures become ``SweepPoint(reason=...)``.

    Results are returned in grid order whatever ``threads`` is.
    """
    if axis not in SWEEP_AXES:
        raise DomainError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")

    if axis == "phi":
        # the swept coordinate cannot also be optimized
        free_params = tuple(p for p in free_params if p != "phi")

    def one(value):
        try:
            cfg = apply_axis(config, axis, value)
            if free_params:
                rep = optimize_operating_point(cfg, observable, free_params, **optimize_kw)
            else:
                rep = sensitivity(cfg, observable)
            return SweepPoint(float(value), rep)
        except ZeroSlope as exc:
            return SweepPoint(float(value), None, f"zero_slope: {exc}")
        except DomainError as exc:
            return SweepPoint(float(value), None, f"domain: {exc}")

    grid = [float(v) for v in grid]
    workers = resolve_threads(threads)
    if workers <= 1 or len(grid) <= 1:
        return [one(v) for v in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, grid))


def resolve_threads(threads=None):
    if threads is None:
        raw = os.environ.get("SU11_THREADS", "").strip()
        try:
            threads = int(raw) if raw else 0
        except ValueError:
            raise DomainError(f"SU11_THREADS must be an integer, got {raw!r}") from None
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads
