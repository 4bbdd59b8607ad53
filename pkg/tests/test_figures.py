import math

import numpy as np
import pytest

from su11 import figures
from su11._validation import DomainError


def small(name, **kw):
    p = figures.figure_params(name)
    p.update(kw)
    return figures.build_figure(p, threads=2)


def column(data, name):
    i = data.series.index(name)
    return np.array([np.nan if r[i] is None else r[i] for r in data.rows])


def test_every_figure_has_defaults():
    for name, p in figures.FIGURES.items():
        assert p["figure"] == name and p["schema_version"] == figures.SCHEMA_VERSION


def test_unknown_figure():
    with pytest.raises(DomainError):
        figures.figure_params("fig3")


def test_fig4_weighted_homodyne_reaches_bound():
    d = small("fig4", points=5)
    lam = column(d, "M_lambdaQ")
    assert np.nanmin(lam) / 100 == pytest.approx(8.929e-5, rel=1e-4)
    assert d.reasons[0] == "M_N:zero_slope;M_Nb:zero_slope"


def test_fig5_weighted_homodyne_equals_qcrb_column():
    d = small("fig5", points=4)
    np.testing.assert_allclose(column(d, "M_lambdaQ"), column(d, "QCRB"), rtol=1e-6)


def test_fig7_intensity_equals_qcrb_column():
    d = small("fig7", start=1.5, points=4)
    np.testing.assert_allclose(column(d, "M_N"), column(d, "QCRB"), rtol=1e-6)


def test_fig7_unit_gain_row_is_missing():
    d = small("fig7", points=2)
    assert all(v is None for v in d.rows[0]) and "M_N:zero_slope" in d.reasons[0]


def test_fig10_improves_with_g2():
    d = small("fig10", start=2.0, points=5)
    col = column(d, "eta_0.5")
    assert np.all(np.diff(col) < 0)


def test_csv_format():
    d = small("fig9", points=2)
    text = figures.to_csv(d)
    lines = text.split("\n")
    assert lines[0] == "seed,M_lambdaQ,M_Q2,M_N,QCRB,SQL,reason"
    assert text.endswith("\n") and "\r" not in text
    first = lines[1].split(",")
    assert float(first[0]) == 1e-3 and len(first) == 7
    assert float(first[4]) == pytest.approx(1 / (2 * 4 * ((2e-3 + 1) * 7 - 1)))


def test_deterministic_with_threads():
    p = figures.figure_params("fig6")
    p.update(points=3)
    a = figures.to_csv(figures.build_figure(p, threads=1))
    b = figures.to_csv(figures.build_figure(p, threads=3))
    assert a == b


def test_param_validation():
    with pytest.raises(DomainError):
        figures.build_figure({"schema_version": 2, "figure": "fig5"})
    with pytest.raises(DomainError):
        small("fig5", log=True, start=0.0)
    with pytest.raises(DomainError):
        small("fig6", etas=[0.5])
    with pytest.raises(DomainError):
        small("fig5", series=["M_N"])


def test_sidecar_reproduces():
    d = small("fig8", points=2)
    again = figures.build_figure(figures.sidecar(d))
    assert figures.to_csv(again) == figures.to_csv(d)
