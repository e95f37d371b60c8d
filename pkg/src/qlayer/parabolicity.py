"""Volume growth, capacity, and total-curvature diagnostics for ends.

Whether a complete surface supports nonconstant bounded harmonic functions
of finite energy (nonparabolicity) is an asymptotic property of its ends.
This module extracts the computable signals: geodesic-ball volume growth
and the convergence/divergence trend of the integral of t / V(t), annulus
capacities (closed-form radial profiles and a discrete harmonic
cross-check), explicit logarithmic cutoffs with their energies, end-wise
isoperimetric ratios, and the defect in the total-curvature identity that
ties those ratios to the Euler characteristic.

Geodesic radii are arclength radii from the chart center; capacity radii
are chart radii (the flat-plane annulus energy 2 pi / log(R/r) is exact in
chart radius).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import log, pi
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad, trapezoid

from .catalog import radial_profile_of
from .errors import (TruncationTooSmall, UnknownEulerChar, UnsupportedChart)
from .geometry import SurfaceChart, fundamental_forms, shape_data
from .quadrature import gauss_points, geometric_nodes

__all__ = ["VolumeGrowthCurve", "CapacityProfile", "EndData",
           "volume_growth", "parabolicity_integral", "capacity_profile",
           "log_cutoff_energy", "isoperimetric_constants", "hartman_residual"]

_MIN_RADII = 8


# --------------------------------------------------------------------------
# containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VolumeGrowthCurve:
    """Geodesic-ball volumes V(t) at the requested radii, with a log-log
    power fit over the outer third: fit = {"exponent", "coefficient"}."""
    radii: np.ndarray
    volumes: np.ndarray
    fit: dict


@dataclass(frozen=True)
class CapacityProfile:
    """Harmonic annulus profile between chart radii r < R.

    psi is sampled on `radii` (monotone 1 -> 0); energy is the Dirichlet
    energy of the profile, i.e. the annulus capacity.
    """
    r: float
    R: float
    radii: np.ndarray
    psi: np.ndarray
    energy: float
    method: str


@dataclass(frozen=True)
class EndData:
    """Per-end isoperimetric data: area curves and their limiting ratios
    lambda_i = lim A_i(t) / (pi t^2)."""
    lambda_iso: np.ndarray          # (ends,)
    A_i: np.ndarray                 # (ends, len(radii))
    radii: np.ndarray


# --------------------------------------------------------------------------
# radial reductions
# --------------------------------------------------------------------------

def _radial_area_integrand(chart):
    """(arclength density, area density) as functions of chart radius r.

    For a radial graph: (sqrt(1+f'^2), 2 pi r sqrt(1+f'^2)).
    For the product tube: (sqrt(1+sigma'^2), 4 pi^2 t sigma sqrt(1+sigma'^2)).
    """
    prof = radial_profile_of(chart)
    if chart.symmetry == "radial" and prof is not None:
        def arc(r):
            return np.sqrt(1.0 + prof.d1(r) ** 2)

        def area(r):
            return 2.0 * pi * r * np.sqrt(1.0 + prof.d1(r) ** 2)

        return arc, area
    if chart.symmetry == "product" and "tube_sigma" in chart.extra:
        sigma, dsigma, _ = chart.extra["tube_sigma"]

        def arc(t):
            return np.sqrt(1.0 + dsigma(t) ** 2)

        def area(t):
            return 4.0 * pi ** 2 * t * sigma(t) * np.sqrt(1.0 + dsigma(t) ** 2)

        return arc, area
    raise UnsupportedChart(
        f"volume/area reduction needs a radial or product chart with a "
        f"profile; got symmetry={chart.symmetry!r}")


def _arclength_tables(chart, s_max: float):
    """Dense (chart radius, arclength) table covering arclength s_max."""
    arc, _ = _radial_area_integrand(chart)
    # s(r) >= r for graphs and the tube, so 2*s_max always suffices, but keep
    # a doubling search for generality
    r_hi = max(2.0 * s_max, 1.0)
    for _ in range(60):
        s_end = quad(lambda t: float(arc(np.array([t]))[0]), 0.0, r_hi,
                     limit=200)[0]
        if s_end >= s_max:
            break
        r_hi *= 2.0
    grid = np.concatenate([[0.0], np.geomspace(max(1e-6, r_hi * 1e-7), r_hi,
                                               6000)])
    vals = arc(np.maximum(grid, 1e-12))
    s = cumulative_trapezoid(vals, grid, initial=0.0)
    return grid, s


def volume_growth(chart: SurfaceChart, radii) -> VolumeGrowthCurve:
    """Volumes of geodesic balls at the given arclength radii.

    Needs at least 8 radii spanning an increasing range; the power fit runs
    over the outer third of the curve.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < _MIN_RADII:
        raise TruncationTooSmall(
            f"need at least {_MIN_RADII} radii, got {radii.size}")
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and increasing")

    _, area = _radial_area_integrand(chart)
    rgrid, s = _arclength_tables(chart, float(radii[-1]))
    if s[-1] < radii[-1]:
        raise TruncationTooSmall("chart truncation too small for last radius")
    # invert s(r) at the requested radii
    r_of_t = np.interp(radii, s, rgrid)
    # cumulative area on the same dense grid
    a_vals = area(np.maximum(rgrid, 1e-12))
    A = cumulative_trapezoid(a_vals, rgrid, initial=0.0)
    volumes = np.interp(r_of_t, rgrid, A)

    tail = slice(2 * radii.size // 3, None)
    lt, lv = np.log(radii[tail]), np.log(volumes[tail])
    slope, intercept = np.polyfit(lt, lv, 1)
    fit = {"exponent": float(slope), "coefficient": float(np.exp(intercept))}
    return VolumeGrowthCurve(radii=radii, volumes=volumes, fit=fit)


def parabolicity_integral(curve: VolumeGrowthCurve, T: float
                          ) -> tuple[float, str]:
    """Partial integral of t / V(t) up to T and a trend verdict.

    The integral over (1, infinity) converges on every nonparabolic end.
    The verdict compares the growth rate of the partial integral against
    log T over the last two decades below T: a ratio >= 0.6 means the
    integral still grows at least logarithmically ("parabolic-consistent"),
    <= 0.3 means it is flattening toward convergence
    ("nonparabolic-consistent"), anything between is "inconclusive".
    """
    radii, volumes = curve.radii, curve.volumes
    if radii[0] > 1.0 or radii[-1] < T:
        raise TruncationTooSmall(
            f"curve must cover [1, {T}], has [{radii[0]}, {radii[-1]}]")
    if T / 100.0 < radii[0]:
        raise TruncationTooSmall("need two decades below T for the verdict")

    mask = (radii >= 1.0) & (radii <= T)
    t, v = radii[mask], volumes[mask]
    partial = float(trapezoid(t / v, t))

    def upto(x):
        m = t <= x
        return float(trapezoid(t[m] / v[m], t[m]))

    i2, i1, i0 = upto(T), upto(T / 10.0), upto(T / 100.0)
    s_last = (i2 - i1) / log(10.0)
    s_prev = (i1 - i0) / log(10.0)
    if s_prev <= 0:
        verdict = "inconclusive"
    else:
        ratio = s_last / s_prev
        if ratio >= 0.6:
            verdict = "parabolic-consistent"
        elif ratio <= 0.3:
            verdict = "nonparabolic-consistent"
        else:
            verdict = "inconclusive"
    return partial, verdict


# --------------------------------------------------------------------------
# capacity
# --------------------------------------------------------------------------

def capacity_profile(chart: SurfaceChart, r: float, R: float,
                     mesh: Optional[tuple] = None) -> CapacityProfile:
    """Capacity of the chart-radius annulus {r < |x| < R}.

    Radial charts solve the 1-d harmonic equation in closed form:
    psi'(t) proportional to sqrt(1 + f'(t)^2) / t, normalized to 1 at r and
    0 at R; the energy is 2 pi / I where I = integral of that density.
    With mesh=(radial_nodes, angular_count) a discrete harmonic solve on a
    polar grid is used instead (cross-validation path).
    """
    if not (0 < r < R):
        raise ValueError("need 0 < r < R")
    prof = radial_profile_of(chart)
    if prof is None:
        raise UnsupportedChart("capacity_profile needs a radial graph chart")

    if mesh is None:
        dens = lambda t: np.sqrt(1.0 + prof.d1(t) ** 2) / t
        I_total = quad(lambda t: float(dens(np.array([t]))[0]), r, R,
                       limit=400)[0]
        radii = np.geomspace(r, R, 200)
        tails = np.array([quad(lambda t: float(dens(np.array([t]))[0]),
                               float(x), R, limit=400)[0] for x in radii])
        psi = tails / I_total
        energy = 2.0 * pi / I_total
        return CapacityProfile(r=r, R=R, radii=radii, psi=psi, energy=energy,
                               method="radial-ode")

    r_nodes, n_theta = mesh
    r_nodes = np.asarray(r_nodes, dtype=float)
    if r_nodes[0] != r or r_nodes[-1] != R:
        raise ValueError("mesh radial nodes must span [r, R]")
    return _capacity_polar_fd(prof, r_nodes, int(n_theta))


def _capacity_polar_fd(prof, r_nodes, n_theta):
    """Discrete harmonic profile on a polar grid, metric-weighted 5-point
    scheme in divergence form; by symmetry the solution is radial, so the
    angular direction only enters through the weights."""
    from scipy.sparse import lil_matrix
    from scipy.sparse.linalg import spsolve

    nr = r_nodes.size
    # radial conductances on half-points of the 1-d network equivalent:
    # c_{i+1/2} = 2 pi * (r / sqrt(1+f'^2) slope weight) averaged
    mid = 0.5 * (r_nodes[:-1] + r_nodes[1:])
    w = mid / np.sqrt(1.0 + prof.d1(mid) ** 2)          # g^{rr} sqrt(g) = r/sqrt(1+f'^2)
    cond = 2.0 * pi * w / np.diff(r_nodes)
    A = lil_matrix((nr - 2, nr - 2))
    b = np.zeros(nr - 2)
    for i in range(1, nr - 1):
        row = i - 1
        A[row, row] = cond[i - 1] + cond[i]
        if i - 1 >= 1:
            A[row, row - 1] = -cond[i - 1]
        else:
            b[row] += cond[i - 1] * 1.0                  # psi(r) = 1
        if i + 1 <= nr - 2:
            A[row, row + 1] = -cond[i]
    psi_inner = spsolve(A.tocsr(), b)
    psi = np.concatenate([[1.0], psi_inner, [0.0]])
    energy = float(np.sum(cond * np.diff(psi) ** 2))
    return CapacityProfile(r=float(r_nodes[0]), R=float(r_nodes[-1]),
                           radii=r_nodes, psi=psi, energy=energy,
                           method="polar-fd")


def log_cutoff_energy(R: float) -> float:
    """Dirichlet energy of the explicit flat-plane logarithmic cutoff.

    The cutoff equals 1 up to radius R, decays like
    (1 - log R / R)^{-1} (log R / log t - log R / R) for R < t < e^R, and
    vanishes beyond; its energy has the closed form

        2 pi (1 - log R/R)^{-2} (1/(3 log R) - (log R)^2 / (3 R^3)),

    which is bounded by 2 pi (4/3) / log R and tends to 0 as R grows: the
    capacity route to parabolicity of the plane.
    """
    if not R > 3.0:
        raise ValueError("log cutoff needs R > 3")
    lr = log(R)
    norm = 1.0 / (1.0 - lr / R)
    return 2.0 * pi * norm * norm * (1.0 / (3.0 * lr) - lr * lr / (3.0 * R ** 3))


def log_cutoff_profile(R: float):
    """The cutoff itself and its derivative (for quadrature cross-checks)."""
    lr = log(R)
    norm = 1.0 / (1.0 - lr / R)
    eR = np.exp(min(R, 700.0))      # beyond float range the cutoff support
    # is effectively unbounded; comparisons below stay correct

    def sigma(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        out[t <= R] = 1.0
        mid = (t > R) & (t < eR)
        out[mid] = norm * (lr / np.log(t[mid]) - lr / R)
        return out

    def dsigma(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        mid = (t > R) & (t < eR)
        out[mid] = -norm * lr / (t[mid] * np.log(t[mid]) ** 2)
        return out

    return sigma, dsigma


# --------------------------------------------------------------------------
# isoperimetric ratios and the total-curvature residual
# --------------------------------------------------------------------------

def _aitken_limit(seq: np.ndarray) -> float:
    """Aitken delta-squared acceleration; falls back to the last element
    when differences vanish (already-converged sequences)."""
    q = np.asarray(seq, dtype=float)
    best = q[-1]
    for j in range(q.size - 2):
        d1 = q[j + 1] - q[j]
        d2 = q[j + 2] - q[j + 1]
        den = d2 - d1
        if abs(den) > 1e-14 * max(1.0, abs(q[j + 2])):
            best = q[j + 2] - d2 * d2 / den
    return float(best)


def isoperimetric_constants(chart: SurfaceChart, radii) -> EndData:
    """Limiting area ratios lambda_i = lim A_i(t) / (pi t^2) per end.

    A_i are geodesic-ball areas (this toolkit's catalog charts have one
    end); the limit is accelerated with Aitken's delta-squared from the
    sampled tail.
    """
    if chart.n != 2:
        raise UnsupportedChart("isoperimetric ratios are a 2-d end notion")
    curve = volume_growth(chart, radii)
    ratios = curve.volumes / (pi * curve.radii ** 2)
    lam = _aitken_limit(ratios[len(ratios) // 2:])
    # one chart = one scanned end in this catalog
    return EndData(lambda_iso=np.array([lam]),
                   A_i=curve.volumes[None, :], radii=curve.radii)


def total_gauss_curvature(chart: SurfaceChart, truncation: float) -> float:
    """integral of K over the chart ball of chart radius `truncation`,
    by composite Gauss quadrature of the radial reduction."""
    prof = radial_profile_of(chart)
    if prof is None:
        raise UnsupportedChart("total curvature reduction needs radial chart")
    nodes = np.concatenate([np.linspace(0.0, 1.0, 65),
                            geometric_nodes(1.0, truncation, 257)[1:]])
    pts_r, wts = gauss_points(nodes)
    params = np.stack([pts_r, np.zeros_like(pts_r)], axis=-1)
    from .catalog import polar_chart
    pchart = polar_chart(chart, min(1e-9, nodes[1] * 0.5), truncation * 1.001)
    S = shape_data(fundamental_forms(pchart, params))
    K = S.K_gauss
    dens = 2.0 * pi * pts_r * np.sqrt(1.0 + prof.d1(pts_r) ** 2)
    return float(np.sum(K * dens * wts))


def hartman_residual(chart: SurfaceChart, truncation: float = 80.0,
                     detail: bool = False):
    """Defect of the total-curvature identity for finite-total-curvature
    surfaces: (1/2 pi) * integral(K) - (euler_char - sum_i lambda_i).

    Small residuals certify that the truncated scans are already in the
    asymptotic regime. Raises UnknownEulerChar when the chart does not
    declare its Euler characteristic.
    """
    if chart.euler_char is None:
        raise UnknownEulerChar(f"chart {chart.name!r} declares no Euler "
                               "characteristic")
    if truncation < 50.0:
        raise ValueError("truncation below 50 is not in the asymptotic "
                         "regime for the catalog surfaces")
    total = total_gauss_curvature(chart, truncation)
    radii = np.geomspace(1.0, truncation, 24)
    ends = isoperimetric_constants(chart, radii)
    lam_sum = float(np.sum(ends.lambda_iso))
    residual = total / (2.0 * pi) - (chart.euler_char - lam_sum)
    if detail:
        return {"residual": residual, "total_curvature": total,
                "euler_char": chart.euler_char, "lambda_sum": lam_sum,
                "truncation": truncation}
    return residual
