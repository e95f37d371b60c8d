"""Built-in surface catalog.

Each entry builds a SurfaceChart with analytic derivatives and enough
structural metadata (symmetry, Euler characteristic, end count, radial
profile closures) for the asymptotic and certificate pipelines to pick
their specialized code paths. Entries:

- plane            : the flat reference, zero shape operator
- paraboloid       : z = x^2 + y^2, the strictly convex workhorse
- radial-graph     : z = P(x^2 + y^2) for a user polynomial P
- gaussian-bump    : z = height * exp(-r^2); asymptotically flat with zero
                     total curvature (the borderline case for binding)
- s1xr2-logtube    : a 3-dimensional product-of-circles surface in R^4 whose
                     profile is constant near the axis and logarithmic
                     outside, giving finite (negative) total curvature
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import log, pi, sqrt
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .geometry import GraphFunction, Interval, SurfaceChart, graph_chart

__all__ = ["CatalogEntry", "RadialProfile", "TubeCurvatureReport",
           "list_catalog", "get_entry", "build_chart", "polar_chart",
           "radial_profile_of", "tube_sigma_functions",
           "tube_curvature_report"]


@dataclass(frozen=True)
class RadialProfile:
    """Radial graph profile f(r) with two derivatives, vectorized in r."""
    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    summary: str
    n: int
    euler_char: Optional[int]
    end_count: int
    sup_normA: Optional[float]      # exact when known, else None (scan)
    build: Callable[..., SurfaceChart]
    defaults: dict = field(default_factory=dict)
    flags: tuple = ()


# --------------------------------------------------------------------------
# radial graphs z = P(s), s = x^2 + y^2
# --------------------------------------------------------------------------

def _graph_from_s_profile(P, dP, d2P, name):
    """GraphFunction for z = P(x^2+y^2) with analytic chain-rule derivatives."""

    def value(x):
        s = x[..., 0] ** 2 + x[..., 1] ** 2
        return P(s)

    def grad(x):
        s = x[..., 0] ** 2 + x[..., 1] ** 2
        return 2.0 * dP(s)[..., None] * x

    def hess(x):
        s = x[..., 0] ** 2 + x[..., 1] ** 2
        b = x.shape[:-1]
        H = np.zeros(b + (2, 2))
        d1, d2 = dP(s), d2P(s)
        H[..., 0, 0] = 2.0 * d1 + 4.0 * x[..., 0] ** 2 * d2
        H[..., 1, 1] = 2.0 * d1 + 4.0 * x[..., 1] ** 2 * d2
        off = 4.0 * x[..., 0] * x[..., 1] * d2
        H[..., 0, 1] = off
        H[..., 1, 0] = off
        return H

    return GraphFunction(value=value, grad=grad, hess=hess, name=name)


def _radial_profile_from_s(P, dP, d2P):
    """f(r) = P(r^2): f' = 2r P', f'' = 2P' + 4r^2 P''."""
    return RadialProfile(
        value=lambda r: P(np.asarray(r, float) ** 2),
        d1=lambda r: 2.0 * np.asarray(r, float) * dP(np.asarray(r, float) ** 2),
        d2=lambda r: (2.0 * dP(np.asarray(r, float) ** 2)
                      + 4.0 * np.asarray(r, float) ** 2
                      * d2P(np.asarray(r, float) ** 2)),
    )


def _build_radial_graph(P, dP, d2P, *, truncation, euler_char, name,
                        end_count=1):
    f = _graph_from_s_profile(P, dP, d2P, name)
    dom = (Interval(-truncation, truncation), Interval(-truncation, truncation))
    chart = graph_chart(f, dom, euler_char=euler_char, symmetry="radial",
                        end_count=end_count, name=name)
    chart.extra["radial_profile"] = _radial_profile_from_s(P, dP, d2P)
    chart.extra["truncation"] = truncation
    return chart


def _plane(truncation=100.0):
    zero = lambda s: np.zeros_like(np.asarray(s, float))
    return _build_radial_graph(zero, zero, zero, truncation=truncation,
                               euler_char=1, name="plane")


def _paraboloid(truncation=100.0):
    return _build_radial_graph(
        lambda s: np.asarray(s, float),
        lambda s: np.ones_like(np.asarray(s, float)),
        lambda s: np.zeros_like(np.asarray(s, float)),
        truncation=truncation, euler_char=1, name="paraboloid")


def _radial_graph(coeffs=(1.0,), truncation=100.0):
    """z = sum_k coeffs[k-1] * (x^2+y^2)^k."""
    c = np.asarray(coeffs, dtype=float)

    def P(s):
        return sum(c[k] * np.asarray(s, float) ** (k + 1) for k in range(len(c)))

    def dP(s):
        return sum((k + 1) * c[k] * np.asarray(s, float) ** k
                   for k in range(len(c)))

    def d2P(s):
        s = np.asarray(s, float)
        out = np.zeros_like(s)
        for k in range(1, len(c)):
            out = out + (k + 1) * k * c[k] * s ** (k - 1)
        return out

    return _build_radial_graph(P, dP, d2P, truncation=truncation,
                               euler_char=1, name="radial-graph")


def _gaussian_bump(height=1.0, truncation=100.0):
    h = float(height)
    return _build_radial_graph(
        lambda s: h * np.exp(-np.asarray(s, float)),
        lambda s: -h * np.exp(-np.asarray(s, float)),
        lambda s: h * np.exp(-np.asarray(s, float)),
        truncation=truncation, euler_char=1, name="gaussian-bump")


def polar_chart(chart: SurfaceChart, r_min: float, r_max: float
                ) -> SurfaceChart:
    """Polar-coordinate chart (r, theta) of a radial graph.

    Position (r cos t, r sin t, f(r)); valid for r > 0 (the polar origin is
    a coordinate singularity). Radial quadratures use this chart along a
    single ray with an explicit 2*pi factor.
    """
    prof = radial_profile_of(chart)
    if prof is None:
        raise ValueError("chart has no radial profile")

    def position(x):
        r, th = x[..., 0], x[..., 1]
        return np.stack([r * np.cos(th), r * np.sin(th), prof.value(r)],
                        axis=-1)

    def jac(x):
        r, th = x[..., 0], x[..., 1]
        b = x.shape[:-1]
        J = np.zeros(b + (3, 2))
        c, s = np.cos(th), np.sin(th)
        J[..., 0, 0] = c
        J[..., 1, 0] = s
        J[..., 2, 0] = prof.d1(r)
        J[..., 0, 1] = -r * s
        J[..., 1, 1] = r * c
        return J

    def hess(x):
        r, th = x[..., 0], x[..., 1]
        b = x.shape[:-1]
        P = np.zeros(b + (3, 2, 2))
        c, s = np.cos(th), np.sin(th)
        P[..., 2, 0, 0] = prof.d2(r)
        P[..., 0, 0, 1] = -s
        P[..., 1, 0, 1] = c
        P[..., 0, 1, 0] = -s
        P[..., 1, 1, 0] = c
        P[..., 0, 1, 1] = -r * c
        P[..., 1, 1, 1] = -r * s
        return P

    return SurfaceChart(
        n=2, domain=(Interval(r_min, r_max), Interval(0.0, 2.0 * np.pi,
                                                      periodic=True)),
        position=position, analytic_jacobian=jac, analytic_hessian=hess,
        euler_char=chart.euler_char, symmetry="radial",
        end_count=chart.end_count, name=chart.name + "-polar",
        extra={"radial_profile": prof})


def radial_profile_of(chart: SurfaceChart) -> Optional[RadialProfile]:
    return chart.extra.get("radial_profile")


# --------------------------------------------------------------------------
# S^1 x R^2 log tube in R^4
# --------------------------------------------------------------------------

_JOIN_LO, _JOIN_HI = 3.0, 3.1


def _tube_join_coeffs():
    """Quintic join coefficients in s = (t - 3)/0.1 matching value and two
    derivatives of the constant piece at s=0 and the log piece at s=1.

    The derivative's quadratic factor has negative discriminant, so the join
    is strictly increasing on (0, 1) by construction.
    """
    d = _JOIN_HI - _JOIN_LO
    rhs = np.array([
        log(_JOIN_HI) - log(_JOIN_LO),
        d / _JOIN_HI,
        -d * d / (_JOIN_HI * _JOIN_HI),
    ])
    M = np.array([[1.0, 1.0, 1.0],
                  [3.0, 4.0, 5.0],
                  [6.0, 12.0, 20.0]])
    return np.linalg.solve(M, rhs)     # (c3, c4, c5)


_C3, _C4, _C5 = _tube_join_coeffs()


def tube_sigma_functions():
    """(sigma, sigma', sigma'') of the log-tube profile, vectorized in t.

    sigma = log 3 for t <= 3, log t for t >= 3.1, with a C^2 monotone
    quintic bridge between.
    """
    d = _JOIN_HI - _JOIN_LO

    def split(t):
        t = np.asarray(t, dtype=float)
        s = (t - _JOIN_LO) / d
        lo = t <= _JOIN_LO
        hi = t >= _JOIN_HI
        mid = ~(lo | hi)
        return t, s, lo, mid, hi

    def sigma(t):
        t, s, lo, mid, hi = split(t)
        out = np.empty_like(t)
        out[lo] = log(_JOIN_LO)
        sm = s[mid]
        out[mid] = log(_JOIN_LO) + sm ** 3 * (_C3 + sm * (_C4 + sm * _C5))
        out[hi] = np.log(t[hi])
        return out

    def dsigma(t):
        t, s, lo, mid, hi = split(t)
        out = np.zeros_like(t)
        sm = s[mid]
        out[mid] = sm ** 2 * (3 * _C3 + sm * (4 * _C4 + sm * 5 * _C5)) / d
        out[hi] = 1.0 / t[hi]
        return out

    def d2sigma(t):
        t, s, lo, mid, hi = split(t)
        out = np.zeros_like(t)
        sm = s[mid]
        out[mid] = sm * (6 * _C3 + sm * (12 * _C4 + sm * 20 * _C5)) / (d * d)
        out[hi] = -1.0 / t[hi] ** 2
        return out

    return sigma, dsigma, d2sigma


def _logtube(t_max=1000.0, t_min=1e-3):
    sigma, dsigma, d2sigma = tube_sigma_functions()

    def position(x):
        t, th, ph = x[..., 0], x[..., 1], x[..., 2]
        sg = sigma(t)
        return np.stack([sg * np.cos(th), sg * np.sin(th),
                         t * np.cos(ph), t * np.sin(ph)], axis=-1)

    def jac(x):
        t, th, ph = x[..., 0], x[..., 1], x[..., 2]
        b = x.shape[:-1]
        J = np.zeros(b + (4, 3))
        sg, ds = sigma(t), dsigma(t)
        cth, sth = np.cos(th), np.sin(th)
        cph, sph = np.cos(ph), np.sin(ph)
        J[..., 0, 0] = ds * cth
        J[..., 1, 0] = ds * sth
        J[..., 2, 0] = cph
        J[..., 3, 0] = sph
        J[..., 0, 1] = -sg * sth
        J[..., 1, 1] = sg * cth
        J[..., 2, 2] = -t * sph
        J[..., 3, 2] = t * cph
        return J

    def hess(x):
        t, th, ph = x[..., 0], x[..., 1], x[..., 2]
        b = x.shape[:-1]
        P = np.zeros(b + (4, 3, 3))
        sg, ds, d2s = sigma(t), dsigma(t), d2sigma(t)
        cth, sth = np.cos(th), np.sin(th)
        cph, sph = np.cos(ph), np.sin(ph)
        P[..., 0, 0, 0] = d2s * cth
        P[..., 1, 0, 0] = d2s * sth
        P[..., 0, 0, 1] = P[..., 0, 1, 0] = -ds * sth
        P[..., 1, 0, 1] = P[..., 1, 1, 0] = ds * cth
        P[..., 2, 0, 2] = P[..., 2, 2, 0] = -sph
        P[..., 3, 0, 2] = P[..., 3, 2, 0] = cph
        P[..., 0, 1, 1] = -sg * cth
        P[..., 1, 1, 1] = -sg * sth
        P[..., 2, 2, 2] = -t * cph
        P[..., 3, 2, 2] = -t * sph
        return P

    chart = SurfaceChart(
        n=3,
        domain=(Interval(t_min, t_max),
                Interval(0.0, 2.0 * np.pi, periodic=True),
                Interval(0.0, 2.0 * np.pi, periodic=True)),
        position=position, analytic_jacobian=jac, analytic_hessian=hess,
        euler_char=0, symmetry="product", end_count=1, name="s1xr2-logtube",
        extra={"tube_sigma": tube_sigma_functions(), "t_max": t_max})
    return chart


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

_ENTRIES = (
    CatalogEntry(
        name="plane", summary="flat plane z = 0", n=2, euler_char=1,
        end_count=1, sup_normA=0.0, build=_plane,
        defaults={"truncation": 100.0}, flags=("flat",)),
    CatalogEntry(
        name="paraboloid", summary="convex graph z = x^2 + y^2", n=2,
        euler_char=1, end_count=1, sup_normA=2.0, build=_paraboloid,
        defaults={"truncation": 100.0}, flags=("convex",)),
    CatalogEntry(
        name="radial-graph", summary="z = P(x^2 + y^2), polynomial P", n=2,
        euler_char=1, end_count=1, sup_normA=None, build=_radial_graph,
        defaults={"coeffs": (1.0,), "truncation": 100.0}, flags=()),
    CatalogEntry(
        name="gaussian-bump", summary="z = h exp(-r^2), zero total curvature",
        n=2, euler_char=1, end_count=1, sup_normA=2.0, build=_gaussian_bump,
        defaults={"height": 1.0, "truncation": 100.0},
        flags=("zero-total-curvature", "equality-case")),
    CatalogEntry(
        name="s1xr2-logtube",
        summary="3d product-of-circles tube with log profile in R^4", n=3,
        euler_char=0, end_count=1, sup_normA=None, build=_logtube,
        defaults={"t_max": 1000.0, "t_min": 1e-3}, flags=("negative-total",)),
)

_BY_NAME = {e.name: e for e in _ENTRIES}


def list_catalog() -> tuple[CatalogEntry, ...]:
    """All catalog entries in registration order."""
    return _ENTRIES


def get_entry(name: str) -> CatalogEntry:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown catalog surface {name!r}; "
                       f"available: {sorted(_BY_NAME)}") from None


def build_chart(name: str, **params) -> SurfaceChart:
    """Build a catalog chart with defaults overridden by params."""
    entry = get_entry(name)
    kw = dict(entry.defaults)
    kw.update(params)
    return entry.build(**kw)


@dataclass(frozen=True)
class TubeCurvatureReport:
    """Total second-symmetric curvature of the log tube, split into the
    pieces that make its negativity checkable in closed form.

    For the product tube the integrand factorizes over the angles, so

        integral of c2(A) = 4 pi^2 * (J + boundary)

    with J = integral of sigma sigma' sigma'' / (1+sigma'^2)^{3/2} dt and
    boundary = -[t sigma'/sqrt(1+sigma'^2)] (an exact derivative) -> -1 as
    t_max grows. For the log profile J stays below
    log 6 - log(3 + sqrt(10)), so the total is strictly negative.
    """
    J: float
    boundary: float
    total: float
    J_bound: float
    total_bound: float
    t_max: float
    tail_cauchy: float


def tube_curvature_report(t_max: float = 1000.0) -> TubeCurvatureReport:
    """Evaluate the log tube's total c2(A) and the closed-form bounds."""
    if t_max < 100.0:
        raise ValueError("t_max below 100 truncates the tail too early")
    sigma, dsigma, d2sigma = tube_sigma_functions()

    def integrand(t):
        t = np.asarray(t, float)
        s1 = dsigma(t)
        return sigma(t) * s1 * d2sigma(t) / (1.0 + s1 * s1) ** 1.5

    def J_to(T):
        j_mid, _ = quad(integrand, _JOIN_LO, _JOIN_HI, limit=200)
        j_tail, _ = quad(integrand, _JOIN_HI, T, limit=400)
        return j_mid + j_tail           # sigma' = 0 below the join

    def boundary_at(T):
        s1 = float(dsigma(np.array([T]))[0])
        return -T * s1 / sqrt(1.0 + s1 * s1)

    J = J_to(t_max)
    boundary = boundary_at(t_max)
    total = 4.0 * pi ** 2 * (J + boundary)
    J_bound = log(6.0) - log(3.0 + sqrt(10.0))
    total_bound = 4.0 * pi ** 2 * (J_bound - 1.0) + 0.05
    far = 2.0 * t_max
    tail_cauchy = abs(4.0 * pi ** 2 * (J_to(far) + boundary_at(far)) - total)
    return TubeCurvatureReport(J=J, boundary=boundary, total=total,
                               J_bound=J_bound, total_bound=total_bound,
                               t_max=t_max, tail_cauchy=tail_cauchy)
