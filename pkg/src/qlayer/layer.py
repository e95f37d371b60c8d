"""Metric and measure of the layer built over a hypersurface.

The layer of half-width a over Sigma is the image of Sigma x (-a, a) under
(x, u) -> p(x) + u N(x). Pulling the Euclidean metric back gives a block
structure: the tangential block (I - uA)^T g (I - uA) in chart coordinates,
a unit coefficient in the transverse direction, and exactly zero coupling
between the two (the normal's derivative stays tangent). Its determinant
factorizes as det(I - uA)^2 det g, and the density det(I - uA) expands in
the elementary symmetric functions of the principal curvatures:

    det(I - uA) = sum_k (-u)^k c_k(A),   for n = 2:  1 - H u + K u^2.

The layer is an embedded product (and everything downstream is meaningful)
as long as a ||A|| stays below 1; the toolkit enforces the stricter margin
a ||A|| < C0 < 1 everywhere it integrates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi
from typing import Optional

import numpy as np

from .errors import ValidityError
from .geometry import (FundamentalForms, ShapeData, SurfaceChart,
                       fundamental_forms, shape_data)

__all__ = ["LayerConfig", "LayerMetric", "ValidityReport", "layer_metric",
           "measure_density", "measure_bounds_check", "validity_scan"]


@dataclass(frozen=True)
class LayerConfig:
    """Half-width a and curvature margin C0 of a layer.

    kappa1 = pi / (2a) is the first transverse Dirichlet frequency; it is
    always recomputed from a, never stored.
    """
    a: float
    C0: float = 0.9

    def __post_init__(self):
        if not (self.a > 0):
            raise ValueError("layer half-width a must be positive")
        if not (0 < self.C0 < 1):
            raise ValueError("curvature margin C0 must lie in (0, 1)")

    @property
    def kappa1(self) -> float:
        return pi / (2.0 * self.a)

    @property
    def threshold(self) -> float:
        """kappa1^2, the bottom of the transverse spectrum."""
        k = self.kappa1
        return k * k


@dataclass(frozen=True)
class LayerMetric:
    """Layer metric at fixed (x, u): tangential block, determinant, density.

    G_tangent is the chart-coordinate tangential block
    (I - uA)^T g (I - uA); detG is its determinant (the transverse direction
    contributes a factor 1); density is det(I - uA), the ratio of the layer
    volume element to du dSigma.
    """
    G_tangent: np.ndarray
    detG: np.ndarray
    density: np.ndarray

    def full_matrix(self) -> np.ndarray:
        """The (n+1) x (n+1) block metric; the off-block entries vanish
        identically because the normal's derivative is tangent to Sigma."""
        n = self.G_tangent.shape[-1]
        batch = self.G_tangent.shape[:-2]
        G = np.zeros(batch + (n + 1, n + 1))
        G[..., :n, :n] = self.G_tangent
        G[..., n, n] = 1.0
        return G


def measure_density(shape: ShapeData, u) -> np.ndarray:
    """det(I - uA) via the elementary symmetric expansion sum_k (-u)^k c_k."""
    u = np.asarray(u, dtype=float)
    elem = shape.elem_sym
    n = elem.shape[-1] - 1
    # Horner in (-u): p = c_0 + c_1 (-u) + ... + c_n (-u)^n
    out = np.zeros(np.broadcast_shapes(u.shape, elem.shape[:-1]))
    for k in range(n, 0, -1):
        out = (out + elem[..., k]) * (-u)
    return out + elem[..., 0]


def layer_metric(forms: FundamentalForms, shape: ShapeData, u,
                 config: Optional[LayerConfig] = None) -> LayerMetric:
    """Layer metric blocks at transverse offset(s) u.

    u broadcasts against the batch of forms/shape. When a config is given,
    its half-width and margin are enforced (|u| < a and a ||A|| < C0); with
    no config only pointwise invertibility |u| ||A|| < 1 is required.
    """
    u = np.asarray(u, dtype=float)
    if config is not None:
        if np.any(np.abs(u) >= config.a):
            raise ValidityError("transverse offset |u| must stay below a")
        worst = float(np.max(config.a * shape.normA))
        if worst >= config.C0:
            raise ValidityError(
                f"a*||A|| = {worst:.6g} >= C0 = {config.C0}")
    else:
        if np.any(np.abs(u) * shape.normA >= 1.0):
            raise ValidityError("|u| ||A|| >= 1: layer map not invertible")

    n = forms.n
    eye = np.eye(n)
    B = eye - u[..., None, None] * shape.A if u.ndim else eye - u * shape.A
    G = np.einsum("...ki,...kl,...lj->...ij", B, forms.g, B)
    detG = np.linalg.det(G)
    density = measure_density(shape, u)
    return LayerMetric(G_tangent=G, detG=detG, density=density)


def measure_bounds_check(shape: ShapeData, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Density value with its two-sided norm bounds.

    Returns (lower, value, upper) where
    lower = (1 - |u| ||A||)^n, value = det(I - uA),
    upper = (1 + |u| ||A||)^n; the sandwich
    lower <= |value| <= upper holds whenever |u| ||A|| < 1.
    """
    u = np.asarray(u, dtype=float)
    n = shape.n
    t = np.abs(u) * shape.normA
    value = measure_density(shape, u)
    lower = (1.0 - t) ** n
    upper = (1.0 + t) ** n
    return lower, value, upper


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of a curvature-smallness scan over a sample grid."""
    sup_a_normA: float
    argmax: np.ndarray
    margin: float
    C0: float
    a: float
    passed: bool
    tail_exponent: Optional[float]
    tail_radii: np.ndarray = field(default_factory=lambda: np.empty(0))
    tail_norms: np.ndarray = field(default_factory=lambda: np.empty(0))


def validity_scan(chart: SurfaceChart, config: LayerConfig, sample_grid,
                  *, strict: bool = True) -> ValidityReport:
    """Scan a ||A|| over a grid of parameter points.

    sample_grid is an (m, n) array of points. The report carries the
    supremum and its location, the margin to C0, and a log-log decay fit of
    ||A|| against the parameter radius over the outer third of the sample
    (tail_exponent; None when the tail has no spread or vanishing norms).
    With strict=True (default) a supremum at or above C0 raises
    ValidityError; strict=False returns the failing report for diagnostics.
    """
    pts = np.asarray(sample_grid, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != chart.n:
        raise ValueError("sample_grid must be (m, n)")
    shape = shape_data(fundamental_forms(chart, pts))
    vals = config.a * shape.normA
    imax = int(np.argmax(vals))
    sup = float(vals[imax])
    margin = config.C0 - sup

    radii = np.linalg.norm(pts, axis=1)
    order = np.argsort(radii)
    tail = order[2 * len(order) // 3:]
    tail_r = radii[tail]
    tail_n = shape.normA[tail]
    exponent = None
    good = (tail_r > 0) & (tail_n > 1e-300)
    if np.count_nonzero(good) >= 4 and np.ptp(np.log(tail_r[good])) > 1e-6:
        slope = np.polyfit(np.log(tail_r[good]), np.log(tail_n[good]), 1)[0]
        exponent = float(slope)

    passed = sup < config.C0
    report = ValidityReport(sup_a_normA=sup, argmax=pts[imax], margin=margin,
                            C0=config.C0, a=config.a, passed=passed,
                            tail_exponent=exponent, tail_radii=tail_r,
                            tail_norms=tail_n)
    if strict and not passed:
        raise ValidityError(
            f"sup a||A|| = {sup:.6g} >= C0 = {config.C0} at {pts[imax]}")
    return report
