"""Built-in surface catalog: charts, profiles, the 3d log tube."""
import numpy as np
import pytest

from qlayer.catalog import (build_chart, get_entry, list_catalog,
                            polar_chart, radial_profile_of,
                            tube_curvature_report, tube_sigma_functions)
from qlayer.geometry import fundamental_forms, shape_data


def test_catalog_contents():
    names = {e.name for e in list_catalog()}
    assert names == {"plane", "paraboloid", "radial-graph", "gaussian-bump",
                     "s1xr2-logtube"}
    parab = get_entry("paraboloid")
    assert parab.n == 2 and parab.euler_char == 1 and parab.end_count == 1
    assert parab.sup_normA == 2.0 and "convex" in parab.flags
    bump = get_entry("gaussian-bump")
    assert "zero-total-curvature" in bump.flags
    assert "equality-case" in bump.flags
    tube = get_entry("s1xr2-logtube")
    assert tube.n == 3 and tube.euler_char == 0
    assert "negative-total" in tube.flags
    assert get_entry("plane").sup_normA == 0.0
    with pytest.raises(KeyError):
        get_entry("torus")


def test_radial_profiles_match_graph_functions():
    rng = np.random.default_rng(9)
    rr = rng.uniform(0.05, 3.0, size=12)
    for name in ("plane", "paraboloid", "gaussian-bump"):
        chart = build_chart(name)
        prof = radial_profile_of(chart)
        f = chart.extra["graph_function"]
        pts = np.stack([rr, np.zeros_like(rr)], axis=-1)
        assert np.allclose(prof.value(rr), f.value(pts), atol=1e-12)
        assert np.allclose(prof.d1(rr), f.grad(pts)[:, 0], atol=1e-10)
        assert np.allclose(prof.d2(rr), f.hess(pts)[:, 0, 0], atol=1e-10)


def test_gaussian_bump_height_parameter():
    chart = build_chart("gaussian-bump", height=2.5)
    prof = radial_profile_of(chart)
    assert prof.value(np.array([0.0]))[0] == pytest.approx(2.5)
    assert prof.value(np.array([3.0]))[0] == pytest.approx(
        2.5 * np.exp(-9.0), rel=1e-12)


def test_radial_graph_coefficients():
    chart = build_chart("radial-graph", coeffs=(0.5, -0.125))
    prof = radial_profile_of(chart)
    r = np.array([1.3])
    s = r ** 2
    assert prof.value(r)[0] == pytest.approx(0.5 * s[0] - 0.125 * s[0] ** 2)


def test_polar_chart_agrees_with_cartesian(paraboloid_chart):
    pol = polar_chart(paraboloid_chart, 0.1, 50.0)
    pts_pol = np.array([[1.7, 0.6], [4.0, 2.0]])
    xy = np.stack([pts_pol[:, 0] * np.cos(pts_pol[:, 1]),
                   pts_pol[:, 0] * np.sin(pts_pol[:, 1])], axis=-1)
    assert np.allclose(pol.position(pts_pol),
                       paraboloid_chart.position(xy), atol=1e-12)
    shp_pol = shape_data(fundamental_forms(pol, pts_pol))
    shp_car = shape_data(fundamental_forms(paraboloid_chart, xy))
    assert np.allclose(np.sort(np.abs(shp_pol.principal), -1),
                       np.sort(np.abs(shp_car.principal), -1), atol=1e-7)


# ---------------------------------------------------------------------------
# the 3d tube S^1 x R^2 with logarithmic profile
# ---------------------------------------------------------------------------

def test_tube_profile_cap_is_c2_at_both_joins():
    sigma, dsigma, d2sigma = tube_sigma_functions()
    for t0 in (3.0, 3.1):
        left = np.array([t0 - 1e-7])
        right = np.array([t0 + 1e-7])
        for fn, tol in ((sigma, 1e-6), (dsigma, 1e-5), (d2sigma, 1e-3)):
            assert abs(fn(left)[0] - fn(right)[0]) < tol
    # beyond the join the profile is exactly log t
    ts = np.array([3.1, 5.0, 40.0])
    assert np.allclose(sigma(ts), np.log(ts), atol=1e-12)
    assert np.allclose(dsigma(ts), 1.0 / ts, atol=1e-12)
    # the cap keeps the radius positive all the way to the axis
    ts = np.linspace(1e-3, 3.2, 200)
    assert np.all(sigma(ts) > 0)


def test_tube_derivatives_are_consistent():
    sigma, dsigma, d2sigma = tube_sigma_functions()
    ts = np.linspace(0.2, 8.0, 400)
    h = 1e-5
    fd1 = (sigma(ts + h) - sigma(ts - h)) / (2 * h)
    fd2 = (dsigma(ts + h) - dsigma(ts - h)) / (2 * h)
    assert np.max(np.abs(fd1 - dsigma(ts))) < 5e-8
    # the quintic cap packs large higher derivatives into the short join
    # window [3, 3.1], so the second-derivative stencil is a bit looser
    assert np.max(np.abs(fd2 - d2sigma(ts))) < 5e-6


def test_tube_principal_curvatures_closed_forms():
    chart = build_chart("s1xr2-logtube")
    assert chart.n == 3
    sigma, dsigma, d2sigma = tube_sigma_functions()
    ts = np.concatenate([np.linspace(0.4, 2.9, 9),
                         np.linspace(3.0, 3.1, 11),
                         np.geomspace(3.2, 900.0, 14)])
    pts = np.stack([ts, np.full_like(ts, 0.8), np.full_like(ts, 2.0)],
                   axis=-1)
    shp = shape_data(fundamental_forms(chart, pts))
    s1 = dsigma(ts)
    root = np.sqrt(1.0 + s1 ** 2)
    expected = np.sort(np.stack([
        d2sigma(ts) / root ** 3,          # profile (meridian) direction
        -1.0 / (sigma(ts) * root),        # swept circle
        s1 / (ts * root),                 # planar angular direction
    ], axis=-1), axis=-1)
    assert np.max(np.abs(np.sort(shp.principal, -1) - expected)) < 1e-8


def test_tube_total_curvature_report_bounds():
    rep = tube_curvature_report(1000.0)
    assert rep.t_max == 1000.0
    # the boundary sub-integral converges to -1
    assert abs(rep.boundary + 1.0) < 1e-6
    # profile integral sits below its closed-form bound
    assert rep.J_bound == pytest.approx(
        np.log(6.0) - np.log(3.0 + np.sqrt(10.0)), rel=1e-12)
    assert rep.J <= rep.J_bound
    assert rep.J == pytest.approx(-0.027509, abs=2e-5)
    # total second-curvature integral: strictly negative, below the bound
    assert rep.total == pytest.approx(4 * np.pi ** 2 * (rep.J + rep.boundary),
                                      rel=1e-9)
    assert rep.total < 0.0
    assert rep.total <= rep.total_bound
    assert rep.total == pytest.approx(-40.5644, abs=2e-3)
    # integrable tail: partial integrals forming a Cauchy sequence
    assert rep.tail_cauchy < 1e-3
