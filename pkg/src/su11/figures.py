"""Figure datasets: sensitivity curves as deterministic tables.

Every dataset is a pure function of its parameter dict (the JSON sidecar
written next to the CSV).  Bright-seed figures use ``alpha_sq = 100`` and
report ``Delta^2 phi * alpha_sq``; their QCRB and SQL columns are the
bright-seed (``alpha_sq -> infinity``) limits of ``alpha_sq / F``, which is
the curve such rescaled plots show.

``FIGURES`` lists the available names:

========  ==========================================================
fig4      bright seed, g = 4, sensitivity vs phi
fig5      bright seed, optimized sensitivity vs gain
fig6      bright seed M_Q vs gain for four internal transmissions
fig7      vacuum seed, optimized sensitivity vs gain
fig8      vacuum seed M_Q2 vs gain for four internal transmissions
fig9      g = 4, optimized sensitivity vs seed photon number
fig10     vacuum seed, g1 = 2, M_N vs g2 for four external transmissions
========  ==========================================================
"""
import copy
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError
from .interferometer import (InterferometerConfig, Topology, ZeroSlope, optimize_operating_point,
                             resolve_threads, sensitivity)

SCHEMA_VERSION = 1
_ALL = ("phi", "theta_a", "theta_b", "lambda")
_ANGLES = ("phi", "theta_a", "theta_b")

_BASE = {"schema_version": SCHEMA_VERSION}

FIGURES = {
    "fig4": dict(_BASE, figure="fig4", axis="phi", start=0.0, stop=math.pi, points=91, log=False,
                 g=4.0, alpha_sq=100.0, scale_by_alpha_sq=True, lo_angle=math.pi / 2,
                 series=["M_N", "M_Nb", "M_Q", "M_lambdaQ", "QCRB", "SQL"]),
    "fig5": dict(_BASE, figure="fig5", axis="gain", start=1.1, stop=30.0, points=25, log=True,
                 alpha_sq=100.0, scale_by_alpha_sq=True,
                 series=["M_N", "M_Nb", "M_Q", "M_lambdaQ", "QCRB", "SQL"]),
    "fig6": dict(_BASE, figure="fig6", axis="gain", start=1.1, stop=100.0, points=25, log=True,
                 alpha_sq=100.0, scale_by_alpha_sq=True, etas=[0.5, 0.75, 0.95, 1.0],
                 series=["eta_0.5", "eta_0.75", "eta_0.95", "eta_1"]),
    "fig7": dict(_BASE, figure="fig7", axis="gain", start=1.0, stop=30.0, points=25, log=True,
                 alpha_sq=0.0, scale_by_alpha_sq=False,
                 series=["M_Q2", "M_N", "QCRB", "SQL"]),
    "fig8": dict(_BASE, figure="fig8", axis="gain", start=1.1, stop=100.0, points=25, log=True,
                 alpha_sq=0.0, scale_by_alpha_sq=False, etas=[0.5, 0.75, 0.95, 1.0],
                 series=["eta_0.5", "eta_0.75", "eta_0.95", "eta_1"]),
    "fig9": dict(_BASE, figure="fig9", axis="seed", start=1e-3, stop=1e3, points=31, log=True,
                 g=4.0, scale_by_alpha_sq=False,
                 series=["M_lambdaQ", "M_Q2", "M_N", "QCRB", "SQL"]),
    "fig10": dict(_BASE, figure="fig10", axis="g2", start=1.0, stop=100.0, points=25, log=True,
                  g1=2.0, alpha_sq=0.0, scale_by_alpha_sq=False, etas=[0.5, 0.75, 0.9, 0.99, 1.0],
                  series=["eta_0.5", "eta_0.75", "eta_0.9", "eta_0.99", "eta_1"]),
}


def figure_params(name):
    """Default parameter dict of a figure (a fresh copy)."""
    if name not in FIGURES:
        raise DomainError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}")
    return copy.deepcopy(FIGURES[name])


def axis_values(params):
    lo, hi, n = float(params["start"]), float(params["stop"]), int(params["points"])
    if n < 1:
        raise DomainError("points must be >= 1")
    if params.get("log"):
        if lo <= 0 or hi <= 0:
            raise DomainError("log-spaced axes need positive bounds")
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


# -- reference curves ----------------------------------------------------------

def _r(g):
    return math.acosh(math.sqrt(g))


def _bright_qcrb_scaled(g):
    # alpha_sq / F_Q with F_Q ~ 4 alpha_sq cosh^2 r cosh 2r
    r = _r(g)
    return 1.0 / (4 * math.cosh(r) ** 2 * math.cosh(2 * r))


def _bright_sql_scaled(g):
    return 1.0 / (4 * math.cosh(_r(g)) ** 2)


def _qcrb(g, alpha_sq):
    r = _r(g)
    f = 2 * math.cosh(r) ** 2 * ((2 * alpha_sq + 1) * math.cosh(2 * r) - 1)
    if f <= 0:
        raise DomainError("QFI vanishes (no squeezing and no seed)")
    return 1.0 / f


def _sql(g, alpha_sq):
    r = _r(g)
    n_p = alpha_sq * math.cosh(r) ** 2 + math.sinh(r) ** 2
    if n_p <= 0:
        raise DomainError("no photons pass the phase object")
    return 1.0 / (4 * n_p)


# -- per-figure series ---------------------------------------------------------

def _cfg(topology, g, alpha_sq, **kw):
    return InterferometerConfig(topology, math.sqrt(alpha_sq), g, **kw)


def _opt(cfg, observable, free):
    return optimize_operating_point(cfg, observable, free).delta2_phi


def _fig4(p, x):
    g, a2 = p["g"], p["alpha_sq"]
    lo = p["lo_angle"]
    conv = _cfg(Topology.CONVENTIONAL_INTENSITY, g, a2, phi=x)
    trunc = _cfg(Topology.TRUNCATED_HOMODYNE, g, a2, phi=x, theta_a=lo, theta_b=lo)
    return {
        "M_N": lambda: sensitivity(conv, "M_N").delta2_phi,
        "M_Nb": lambda: sensitivity(conv, "M_Nb").delta2_phi,
        "M_Q": lambda: sensitivity(trunc, "M_Q").delta2_phi,
        "M_lambdaQ": lambda: _opt(trunc, "M_lambdaQ", ("theta_a", "theta_b", "lambda")),
        "QCRB": lambda: _bright_qcrb_scaled(g) / a2,
        "SQL": lambda: _bright_sql_scaled(g) / a2,
    }


def _fig5(p, x):
    a2 = p["alpha_sq"]
    conv = _cfg(Topology.CONVENTIONAL_INTENSITY, x, a2)
    trunc = _cfg(Topology.TRUNCATED_HOMODYNE, x, a2)
    return {
        "M_N": lambda: _opt(conv, "M_N", ("phi",)),
        "M_Nb": lambda: _opt(conv, "M_Nb", ("phi",)),
        "M_Q": lambda: _opt(trunc, "M_Q", _ANGLES),
        "M_lambdaQ": lambda: _opt(trunc, "M_lambdaQ", _ALL),
        "QCRB": lambda: _bright_qcrb_scaled(x) / a2,
        "SQL": lambda: _bright_sql_scaled(x) / a2,
    }


def _loss_scaling(observable):
    def build(p, x):
        out = {}
        for eta, name in zip(p["etas"], p["series"]):
            cfg = _cfg(Topology.TRUNCATED_HOMODYNE, x, p["alpha_sq"], eta_ai=eta, eta_bi=eta)
            out[name] = (lambda c=cfg: _opt(c, observable, _ANGLES))
        return out
    return build


def _fig7(p, x):
    trunc = _cfg(Topology.TRUNCATED_HOMODYNE, x, 0.0)
    conv = _cfg(Topology.CONVENTIONAL_INTENSITY, x, 0.0)
    return {
        "M_Q2": lambda: _opt(trunc, "M_Q2", _ANGLES),
        "M_N": lambda: _opt(conv, "M_N", ("phi",)),
        "QCRB": lambda: _qcrb(x, 0.0),
        "SQL": lambda: _sql(x, 0.0),
    }


def _fig9(p, x):
    g = p["g"]
    trunc = _cfg(Topology.TRUNCATED_HOMODYNE, g, x)
    conv = _cfg(Topology.CONVENTIONAL_INTENSITY, g, x)
    return {
        "M_lambdaQ": lambda: _opt(trunc, "M_lambdaQ", _ALL),
        "M_Q2": lambda: _opt(trunc, "M_Q2", _ANGLES),
        "M_N": lambda: _opt(conv, "M_N", ("phi",)),
        "QCRB": lambda: _qcrb(g, x),
        "SQL": lambda: _sql(g, x),
    }


def _fig10(p, x):
    out = {}
    for eta, name in zip(p["etas"], p["series"]):
        cfg = _cfg(Topology.CONVENTIONAL_INTENSITY, p["g1"], p["alpha_sq"], g2=x,
                   eta_ae=eta, eta_be=eta)
        out[name] = (lambda c=cfg: _opt(c, "M_N", ("phi",)))
    return out


_BUILDERS = {"fig4": _fig4, "fig5": _fig5, "fig6": _loss_scaling("M_Q"), "fig7": _fig7,
             "fig8": _loss_scaling("M_Q2"), "fig9": _fig9, "fig10": _fig10}


# -- assembling ----------------------------------------------------------------

@dataclass(frozen=True)
class FigureData:
    params: dict
    axis: str
    values: tuple
    series: tuple
    rows: tuple       # one tuple of floats-or-None per axis value
    reasons: tuple    # one string per axis value ("" when complete)


def _point(params, x):
    fns = _BUILDERS[params["figure"]](params, float(x))
    scale = params["alpha_sq"] if params.get("scale_by_alpha_sq") else 1.0
    row, why = [], []
    for name in params["series"]:
        try:
            val = float(fns[name]()) * scale
            if not math.isfinite(val):
                raise DomainError("non-finite value")
            row.append(val)
        except ZeroSlope:
            row.append(None)
            why.append(f"{name}:zero_slope")
        except DomainError as exc:
            row.append(None)
            kind = "singular" if "singular" in str(exc).lower() else "domain"
            why.append(f"{name}:{kind}")
    return tuple(row), ";".join(why)


def build_figure(name_or_params, threads=None):
    """Compute a figure dataset from its name or a full parameter dict."""
    if isinstance(name_or_params, str):
        params = figure_params(name_or_params)
    else:
        params = copy.deepcopy(dict(name_or_params))
        defaults = figure_params(params.get("figure", ""))
        if params.get("schema_version") != SCHEMA_VERSION:
            raise DomainError(f"unsupported schema_version {params.get('schema_version')!r}")
        params = {**defaults, **params}
    if list(params["series"]) != list(FIGURES[params["figure"]]["series"]) and "etas" not in params:
        raise DomainError("series names are fixed for this figure")
    if "etas" in params and len(params["etas"]) != len(params["series"]):
        raise DomainError("etas and series must have the same length")
    xs = axis_values(params)
    workers = resolve_threads(threads)
    if workers > 1 and len(xs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x: _point(params, x), xs))
    else:
        results = [_point(params, x) for x in xs]
    return FigureData(params, params["axis"], tuple(float(x) for x in xs), tuple(params["series"]),
                      tuple(r for r, _ in results), tuple(w for _, w in results))


def _num(x):
    return "" if x is None else format(x, ".17g")


def to_csv(data):
    """CSV text: header ``<axis>,<series...>,reason``; 17 significant digits."""
    buf = io.StringIO()
    buf.write(",".join((data.axis,) + data.series + ("reason",)) + "\n")
    for x, row, why in zip(data.values, data.rows, data.reasons):
        buf.write(",".join([_num(x)] + [_num(v) for v in row] + [why]) + "\n")
    return buf.getvalue()


def sidecar(data):
    """Parameters that fully determine the dataset."""
    return dict(data.params)
