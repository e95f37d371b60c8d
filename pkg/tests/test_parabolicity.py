"""Volume growth, capacity decay, log cutoffs, total-curvature identity."""
import numpy as np
import pytest

from qlayer.catalog import build_chart
from qlayer.errors import TruncationTooSmall
from qlayer.parabolicity import (capacity_profile, hartman_residual,
                                 isoperimetric_constants, log_cutoff_energy,
                                 log_cutoff_profile, parabolicity_integral,
                                 volume_growth)


# ---------------------------------------------------------------------------
# explicit logarithmic cutoff on the flat plane
# ---------------------------------------------------------------------------

def test_log_cutoff_energy_closed_form_values():
    assert log_cutoff_energy(5.0) == pytest.approx(2.7355815521345295,
                                                   rel=1e-12)
    assert log_cutoff_energy(10.0) == pytest.approx(1.516416861572044,
                                                    rel=1e-12)


def test_log_cutoff_profile_matches_energy_by_quadrature():
    from scipy.integrate import quad
    for R in (5.0, 30.0):
        _, dsig = log_cutoff_profile(R)
        # substitute t = exp(s): the support spans many decades for large R
        val, _ = quad(lambda s: dsig(np.array([np.exp(s)]))[0] ** 2
                      * 2 * np.pi * np.exp(2 * s),
                      np.log(R), R, limit=400)
        assert val == pytest.approx(log_cutoff_energy(R), rel=1e-8)


def test_log_cutoff_profile_boundary_values():
    sig, _ = log_cutoff_profile(8.0)
    assert sig(np.array([8.0]))[0] == pytest.approx(1.0, abs=1e-12)
    assert sig(np.array([np.exp(8.0)]))[0] == pytest.approx(0.0, abs=1e-12)
    assert log_cutoff_energy(8.0) <= 2 * np.pi * (4.0 / 3.0) / np.log(8.0)


def test_log_cutoff_rejects_small_radius():
    with pytest.raises(ValueError):
        log_cutoff_energy(2.0)


# ---------------------------------------------------------------------------
# capacities
# ---------------------------------------------------------------------------

def test_flat_capacity_is_two_pi_over_log_ratio(plane_chart):
    for r, R in ((2.0, 20.0), (1.0, 10.0), (3.0, 81.0)):
        cp = capacity_profile(plane_chart, r, R)
        assert cp.energy == pytest.approx(2 * np.pi / np.log(R / r),
                                          rel=2e-4)
        assert cp.psi[0] == pytest.approx(1.0, abs=1e-10)
        assert cp.psi[-1] == pytest.approx(0.0, abs=1e-10)
        assert np.all(np.diff(cp.psi) <= 1e-12)


def test_paraboloid_capacity_decays_toward_zero(paraboloid_chart):
    e10 = capacity_profile(paraboloid_chart, 2.0, 10.0).energy
    e50 = capacity_profile(paraboloid_chart, 2.0, 50.0).energy
    assert e10 == pytest.approx(0.390275, abs=2e-4)
    assert e50 == pytest.approx(0.065369, abs=2e-4)
    assert e50 < e10 / 3.0     # much faster than the flat log decay


# ---------------------------------------------------------------------------
# volume growth and the parabolicity trend
# ---------------------------------------------------------------------------

def test_volume_growth_exponents_and_verdicts():
    expected = {"plane": 2.0000, "paraboloid": 1.5228,
                "gaussian-bump": 2.0144}
    for name, expo in expected.items():
        chart = build_chart(name)
        curve = volume_growth(chart, np.geomspace(0.8, 80.0, 24))
        assert curve.fit["exponent"] == pytest.approx(expo, abs=0.03), name
        assert np.all(np.diff(curve.volumes) > 0)
        _, verdict = parabolicity_integral(curve, 80.0)
        assert verdict == "parabolic-consistent", name


def test_plane_ball_volume_is_euclidean(plane_chart):
    radii = np.geomspace(1.0, 50.0, 12)
    curve = volume_growth(plane_chart, radii)
    assert np.allclose(curve.volumes, np.pi * radii ** 2, rtol=1e-4)


def test_tube_growth_is_marginally_parabolic():
    # V(t) ~ t^2 log t: the slope ratio sits near 1, inside the
    # parabolic-consistent band once two clean decades are available
    tube = build_chart("s1xr2-logtube", t_max=20000.0)
    curve = volume_growth(tube, np.geomspace(1.0, 1e4, 30))
    assert 2.0 < curve.fit["exponent"] < 2.3
    _, verdict = parabolicity_integral(curve, 1e4)
    assert verdict in ("parabolic-consistent", "inconclusive")


def test_volume_growth_needs_enough_radii(plane_chart):
    with pytest.raises(TruncationTooSmall):
        volume_growth(plane_chart, np.linspace(1.0, 10.0, 5))


def test_parabolicity_integral_needs_two_decades(plane_chart):
    curve = volume_growth(plane_chart, np.geomspace(2.0, 40.0, 10))
    with pytest.raises(TruncationTooSmall):
        parabolicity_integral(curve, 40.0)


# ---------------------------------------------------------------------------
# isoperimetric ratios and the total-curvature identity
# ---------------------------------------------------------------------------

def test_isoperimetric_limits():
    radii = np.geomspace(1.0, 80.0, 16)
    lam = {name: isoperimetric_constants(build_chart(name), radii)
           .lambda_iso[0] for name in ("plane", "paraboloid",
                                       "gaussian-bump")}
    assert lam["plane"] == pytest.approx(1.0, abs=1e-3)
    assert lam["gaussian-bump"] == pytest.approx(1.0, abs=2e-3)
    assert abs(lam["paraboloid"]) < 0.05    # cusp-like end: ratio -> 0


def test_hartman_identity_residuals():
    res = {name: hartman_residual(build_chart(name), truncation=80.0)
           for name in ("plane", "paraboloid", "gaussian-bump")}
    assert abs(res["plane"]) < 1e-4
    assert res["paraboloid"] == pytest.approx(-0.014847, abs=1e-3)
    assert abs(res["gaussian-bump"]) < 1e-3
    detail = hartman_residual(build_chart("paraboloid"), truncation=80.0,
                              detail=True)
    # paraboloid: total curvature approaches 2 pi (euler_char 1, lambda 0)
    assert detail["total_curvature"] == pytest.approx(2 * np.pi, abs=0.05)
    assert detail["euler_char"] == 1


def test_gaussian_bump_total_curvature_vanishes():
    from qlayer.parabolicity import total_gauss_curvature
    total = total_gauss_curvature(build_chart("gaussian-bump"), 80.0)
    assert abs(total) < 1e-3
