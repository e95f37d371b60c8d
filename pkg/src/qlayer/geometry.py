"""Extrinsic geometry of parametrized hypersurfaces in R^{n+1}.

A hypersurface is given as a chart: a smooth position map from a product of
parameter intervals into R^{n+1}. From the position map (or user-supplied
analytic derivatives) this module produces the induced metric, second
fundamental form, oriented unit normal, shape operator with its spectral
invariants, and the intrinsic curvature tensor obtained by substituting the
second fundamental form into the Gauss equation.

All operations accept either a single parameter point of shape ``(n,)`` or a
batch of shape ``(m, n)`` and return correspondingly batched arrays; the
heavy consumers (quadrature, discretization) always call the batched form.

Orientation convention: the unit normal is the normalized generalized cross
product of the coordinate tangents, signed so that the (n+1)-frame
``[tangents | normal]`` is positively oriented. For graph charts
``x -> (x, f(x))`` this is the upward normal (positive last component).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, SingularChart, UnsupportedDimension

__all__ = [
    "Interval", "SurfaceChart", "FundamentalForms", "ShapeData",
    "CurvatureData", "GraphFunction", "fundamental_forms", "shape_data",
    "curvature_data", "mean_curvature_graph", "graph_chart",
]

_COND_LIMIT = 1e12


# --------------------------------------------------------------------------
# chart description
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """One parameter interval, optionally periodic (e.g. an angle)."""
    lo: float
    hi: float
    periodic: bool = False

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("interval needs hi > lo")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class SurfaceChart:
    """A parametrized hypersurface patch Sigma in R^{n+1}.

    position maps parameter points to ambient points, vectorized over a
    leading batch axis: ``(..., n) -> (..., n+1)``. analytic_jacobian and
    analytic_hessian, when given, must return the first and second
    derivatives of the position map with shapes ``(..., n+1, n)`` and
    ``(..., n+1, n, n)``; otherwise both are approximated by
    Richardson-extrapolated central differences.

    symmetry is a structural hint ("radial", "product", "none") used by the
    asymptotic routines to pick closed-form reductions; it never changes the
    pointwise geometry. euler_char may be None when unknown. end_count is
    the number of ends of the complete surface the chart truncates.
    """
    n: int
    domain: tuple[Interval, ...]
    position: Callable[[np.ndarray], np.ndarray]
    analytic_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    euler_char: Optional[int] = None
    symmetry: str = "none"
    end_count: int = 1
    name: str = ""
    # free-form structural hints for specialized pipelines (e.g. the radial
    # profile of a graph); never consulted by the pointwise geometry ops
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need n >= 1")
        if len(self.domain) != self.n:
            raise ValueError("domain must have one interval per parameter")
        if self.symmetry not in ("radial", "product", "none"):
            raise ValueError("symmetry must be radial, product or none")
        if self.end_count < 1:
            raise ValueError("end_count must be positive")

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    def domain_scale(self) -> float:
        """Smallest finite axis width (1.0 if all axes are unbounded)."""
        widths = [iv.width for iv in self.domain if np.isfinite(iv.width)]
        return min(widths) if widths else 1.0

    def contains(self, x: np.ndarray, margin: float = 1e-9) -> np.ndarray:
        """Pointwise domain membership (periodic axes always pass)."""
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i, iv in enumerate(self.domain):
            if iv.periodic:
                continue
            w = iv.width if np.isfinite(iv.width) else 1.0
            ok &= (x[..., i] >= iv.lo - margin * w)
            ok &= (x[..., i] <= iv.hi + margin * w)
        return ok

    def require_inside(self, x: np.ndarray) -> None:
        inside = self.contains(x)
        if not np.all(inside):
            bad = np.asarray(x, dtype=float)[~inside]
            raise DomainError(
                f"{np.count_nonzero(~inside)} point(s) outside chart domain, "
                f"first offender {bad.reshape(-1, self.n)[0]}")


# --------------------------------------------------------------------------
# result containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalForms:
    """Induced metric g, second fundamental form h, oriented unit normal N.

    Shapes: g and h are (..., n, n), N is (..., n+1); a leading batch axis
    mirrors the evaluation points.
    """
    g: np.ndarray
    h: np.ndarray
    N: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[-1]


@dataclass(frozen=True)
class ShapeData:
    """Spectral data of the shape operator A = g^{-1} h.

    principal holds the eigenvalues of the g-symmetrized operator in
    ascending order; elem_sym holds the elementary symmetric functions
    c_0..c_n of those eigenvalues, so det(I - u A) = sum_k (-u)^k c_k.
    H = c_1 is the (unnormalized) mean curvature; K_gauss = det A for n = 2,
    None otherwise. A_frame is the symmetric representation L^{-1} h L^{-T}
    (L the Cholesky factor of g), reused by the curvature routine.
    """
    A: np.ndarray
    principal: np.ndarray
    normA: np.ndarray
    elem_sym: np.ndarray
    H: np.ndarray
    K_gauss: Optional[np.ndarray]
    A_frame: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[-1]


@dataclass(frozen=True)
class CurvatureData:
    """Intrinsic curvature from the Gauss equation, in a g-orthonormal frame.

    R has shape (..., n, n, n, n); Ric and rho are its contractions. traces
    maps p to the p-th curvature trace invariant, normalized so that on a
    hypersurface it equals the elementary symmetric function c_{2p} of the
    principal curvatures.
    """
    R: np.ndarray
    Ric: np.ndarray
    rho: np.ndarray
    traces: dict[int, np.ndarray]
    norm_ric_sq: np.ndarray
    norm_R_sq: np.ndarray


@dataclass(frozen=True)
class GraphFunction:
    """A scalar graph profile z = f(x) over a plane domain.

    grad and hess are optional analytic derivatives with shapes (..., 2) and
    (..., 2, 2); missing ones fall back to Richardson central differences.
    """
    value: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(np.asarray(x, dtype=float))

    def grad_at(self, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return _fd_jacobian(lambda p: self.value(p)[..., None], x, step)[..., 0, :]

    def hess_at(self, x: np.ndarray, step: float = 1e-3) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        return _fd_hessian(lambda p: self.value(p)[..., None], x, step)[..., 0, :, :]


# --------------------------------------------------------------------------
# finite differences (Richardson-extrapolated central stencils)
# --------------------------------------------------------------------------

def _fd_jacobian(position, x, step):
    """First derivatives of a vectorized map, 4th order in step.

    x: (..., n); returns (..., dim_out, n).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]

    def central(h):
        cols = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            cols.append((position(x + e) - position(x - e)) / (2.0 * h))
        return np.stack(cols, axis=-1)

    d1, d2 = central(step), central(step / 2.0)
    return (4.0 * d2 - d1) / 3.0


def _fd_hessian(position, x, step):
    """Second derivatives of a vectorized map, 4th order in step.

    Returns (..., dim_out, n, n), symmetric in the last two axes.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    f0 = position(x)

    def diag(i, h):
        e = np.zeros(n)
        e[i] = h
        return (position(x + e) - 2.0 * f0 + position(x - e)) / (h * h)

    def mixed(i, j, h):
        ei, ej = np.zeros(n), np.zeros(n)
        ei[i] = h
        ej[j] = h
        return (position(x + ei + ej) - position(x + ei - ej)
                - position(x - ei + ej) + position(x - ei - ej)) / (4.0 * h * h)

    out_shape = f0.shape + (n, n)
    hess = np.zeros(out_shape)
    for i in range(n):
        d = (4.0 * diag(i, step / 2.0) - diag(i, step)) / 3.0
        hess[..., i, i] = d
        for j in range(i + 1, n):
            m = (4.0 * mixed(i, j, step / 2.0) - mixed(i, j, step)) / 3.0
            hess[..., i, j] = m
            hess[..., j, i] = m
    return hess


def _oriented_normal(J):
    """Positively oriented unit normal from the Jacobian (..., n+1, n).

    Component j is the signed maximal minor (-1)^{j+n} det(J with row j
    removed); this sign puts det[J | N] = sum_j minor_j^2 > 0. The Euclidean
    norm of the minor vector equals sqrt(det g) (Cauchy-Binet), which the
    caller reuses.
    """
    m = J.shape[-2]          # n+1
    n = J.shape[-1]
    comps = []
    # exactly singular minors are legitimate (their component is 0); some
    # LAPACK builds emit spurious divide warnings for them
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(m):
            rows = [r for r in range(m) if r != j]
            sub = J[..., rows, :]
            comps.append(((-1.0) ** (j + n)) * np.linalg.det(sub))
    N = np.stack(comps, axis=-1)
    norm = np.linalg.norm(N, axis=-1)
    return N, norm


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def fundamental_forms(chart: SurfaceChart, x, step: float | None = None
                      ) -> FundamentalForms:
    """First and second fundamental forms and oriented normal at x.

    x is one parameter point (n,) or a batch (m, n). step controls the
    finite-difference stencils when the chart has no analytic derivatives;
    by default the first-derivative step is 1e-5 times the chart's domain
    scale and the second-derivative step is 1e-3 times it (the wider stencil
    keeps the roundoff of the double division in check). A chart whose
    metric is degenerate, indefinite, or conditioned worse than 1e12 raises
    SingularChart.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != chart.n:
        raise DomainError(f"points have dim {x.shape[-1]}, chart has n={chart.n}")
    chart.require_inside(x)

    scale = min(max(chart.domain_scale(), 0.5), 4.0)
    jac_step = 1e-5 * scale if step is None else float(step)
    hess_step = 1e-3 * scale if step is None else float(step)

    if chart.analytic_jacobian is not None:
        J = np.asarray(chart.analytic_jacobian(x), dtype=float)
    else:
        J = _fd_jacobian(chart.position, x, jac_step)
    if chart.analytic_hessian is not None:
        P = np.asarray(chart.analytic_hessian(x), dtype=float)
    else:
        P = _fd_hessian(chart.position, x, hess_step)

    g = np.einsum("...ci,...cj->...ij", J, J)
    N, norm = _oriented_normal(J)
    detg = norm * norm

    if np.any(~np.isfinite(detg)) or np.any(detg <= 0.0):
        raise SingularChart("degenerate induced metric (det g <= 0)")
    ev = np.linalg.eigvalsh(g)
    if np.any(ev[..., 0] <= 0.0):
        raise SingularChart("induced metric not positive definite")
    cond = ev[..., -1] / ev[..., 0]
    if np.any(cond > _COND_LIMIT):
        raise SingularChart(
            f"metric condition number {float(np.max(cond)):.3e} exceeds "
            f"{_COND_LIMIT:.0e}")

    N = N / norm[..., None]
    h = np.einsum("...cij,...c->...ij", P, N)
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    return FundamentalForms(g=g, h=h, N=N)


def shape_data(forms: FundamentalForms) -> ShapeData:
    """Shape operator A = g^{-1} h and its spectral invariants.

    principal curvatures are computed from the symmetric conjugate
    L^{-1} h L^{-T} (L = chol(g)), which shares A's spectrum but keeps the
    eigenproblem symmetric; they come back in ascending order. elem_sym is
    built by the stable sequential expansion of prod_i (1 + lambda_i t).
    """
    g, h = forms.g, forms.h
    n = g.shape[-1]
    L = np.linalg.cholesky(g)
    # A_frame = L^{-1} h L^{-T}; two triangular-style solves via solve()
    Z = np.linalg.solve(L, h)
    A_frame = np.linalg.solve(L, np.swapaxes(Z, -1, -2))
    A_frame = 0.5 * (A_frame + np.swapaxes(A_frame, -1, -2))
    principal = np.linalg.eigvalsh(A_frame)

    batch = principal.shape[:-1]
    elem = np.zeros(batch + (n + 1,))
    elem[..., 0] = 1.0
    for i in range(n):
        lam = principal[..., i]
        # c_k <- c_k + lambda_i * c_{k-1}, top-down so each lambda enters once
        for k in range(min(i + 1, n), 0, -1):
            elem[..., k] = elem[..., k] + lam * elem[..., k - 1]

    A = np.linalg.solve(g, h)
    normA = np.max(np.abs(principal), axis=-1)
    H = elem[..., 1]
    K_gauss = elem[..., 2].copy() if n == 2 else None
    return ShapeData(A=A, principal=principal, normA=normA, elem_sym=elem,
                     H=H, K_gauss=K_gauss, A_frame=A_frame)


def _trace_invariant(R, p):
    """Curvature trace of order p via the generalized Kronecker contraction.

    (1 / (2^p (2p)!)) * sum over permutations s of {1..2p} of sign(s) times
    the full index contraction of p copies of R. Normalized so the value
    equals c_{2p} of the principal curvatures when R comes from the Gauss
    equation of a hypersurface.
    """
    from itertools import permutations
    from math import factorial

    letters = "abcdefghijkl"
    upper = letters[:2 * p]
    batch = R.shape[:-4]
    acc = np.zeros(batch)
    operands = [R] * p
    for perm in permutations(range(2 * p)):
        # permutation sign by counting inversions
        inv = sum(1 for i in range(2 * p) for j in range(i + 1, 2 * p)
                  if perm[i] > perm[j])
        sign = -1.0 if inv % 2 else 1.0
        subs = []
        for s in range(p):
            i1, i2 = upper[2 * s], upper[2 * s + 1]
            j1, j2 = upper[perm[2 * s]], upper[perm[2 * s + 1]]
            subs.append(f"...{i1}{i2}{j1}{j2}")
        expr = ",".join(subs) + "->..."
        acc = acc + sign * np.einsum(expr, *operands)
    return acc / (2.0 ** p * factorial(2 * p))


def curvature_data(shape: ShapeData, forms: FundamentalForms) -> CurvatureData:
    """Intrinsic curvature tensor of the hypersurface, orthonormal frame.

    Substitutes the frame representation of the second fundamental form into
    the Gauss equation R_{ijkl} = h_{ik} h_{jl} - h_{il} h_{jk}. Dense
    storage of R is quartic in n; dimensions above 6 are refused.
    """
    n = shape.n
    if n > 6:
        raise UnsupportedDimension(
            f"dense curvature tensor not stored for n={n} > 6")
    hf = shape.A_frame
    R = (np.einsum("...ik,...jl->...ijkl", hf, hf)
         - np.einsum("...il,...jk->...ijkl", hf, hf))
    # Ric_{jl} = sum_i R_{ijil} = H h_{jl} - (h^2)_{jl}
    Ric = np.einsum("...ijil->...jl", R)
    rho = np.einsum("...jj->...", Ric)
    traces = {}
    for p in range(1, n // 2 + 1):
        traces[p] = _trace_invariant(R, p)
    norm_ric_sq = np.einsum("...ij,...ij->...", Ric, Ric)
    norm_R_sq = np.einsum("...ijkl,...ijkl->...", R, R)
    return CurvatureData(R=R, Ric=Ric, rho=rho, traces=traces,
                         norm_ric_sq=norm_ric_sq, norm_R_sq=norm_R_sq)


def mean_curvature_graph(f, x, step: float | None = None) -> np.ndarray:
    """Mean curvature of the graph z = f(x, y) with the upward normal.

    Uses the divergence-form expression
    ((1 + f_y^2) f_xx - 2 f_x f_y f_xy + (1 + f_x^2) f_yy)
    / (1 + |grad f|^2)^{3/2},
    which agrees with the trace of the shape operator of the graph chart.
    f may be a GraphFunction (analytic derivatives used when present) or a
    plain vectorized callable.
    """
    if not isinstance(f, GraphFunction):
        f = GraphFunction(value=f)
    x = np.asarray(x, dtype=float)
    gstep = 1e-6 if step is None else step
    hstep = 1e-3 if step is None else step
    grad = f.grad_at(x, step=gstep)
    hess = f.hess_at(x, step=hstep)
    fx, fy = grad[..., 0], grad[..., 1]
    fxx, fyy = hess[..., 0, 0], hess[..., 1, 1]
    fxy = hess[..., 0, 1]
    num = (1.0 + fy * fy) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx * fx) * fyy
    return num / (1.0 + fx * fx + fy * fy) ** 1.5


def graph_chart(f, domain: tuple[Interval, Interval], *, euler_char=None,
                symmetry: str = "none", end_count: int = 1, name: str = ""
                ) -> SurfaceChart:
    """Chart (x, y) -> (x, y, f(x, y)) for a graph profile.

    When f is a GraphFunction with analytic derivatives, the chart gets an
    analytic Jacobian/Hessian assembled from them.
    """
    if not isinstance(f, GraphFunction):
        f = GraphFunction(value=f)

    def position(x):
        x = np.asarray(x, dtype=float)
        z = f(x)
        return np.concatenate([x, z[..., None]], axis=-1)

    jac = None
    hess = None
    if f.grad is not None:
        def jac(x):
            x = np.asarray(x, dtype=float)
            batch = x.shape[:-1]
            J = np.zeros(batch + (3, 2))
            J[..., 0, 0] = 1.0
            J[..., 1, 1] = 1.0
            J[..., 2, :] = f.grad(x)
            return J
    if f.hess is not None:
        def hess(x):
            x = np.asarray(x, dtype=float)
            batch = x.shape[:-1]
            P = np.zeros(batch + (3, 2, 2))
            P[..., 2, :, :] = f.hess(x)
            return P

    return SurfaceChart(n=2, domain=domain, position=position,
                        analytic_jacobian=jac, analytic_hessian=hess,
                        euler_char=euler_char, symmetry=symmetry,
                        end_count=end_count, name=name,
                        extra={"graph_function": f})
