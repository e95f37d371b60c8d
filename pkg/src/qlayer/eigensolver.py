"""Discrete spectrum of the layer Laplacian by tensor-product finite elements.

The layer over a 2-d chart carries coordinates (x, y, u) with block metric
diag(G_tangent(x, y, u), 1) and volume weight |det(I - uA)| sqrt(det g).
This module meshes the box (chart window) x (-a, a) with trilinear
hexahedral elements, assembles the stiffness/mass pair of the Dirichlet
Laplacian, and drives LOBPCG to the lowest eigenvalues. A discrete
eigenvalue is a Rayleigh quotient over a conforming subspace, hence an
upper bound for the bottom of the spectrum: lambda_min < kappa1^2 on any
mesh certifies a bound state below the essential-spectrum threshold
(up to assembly quadrature), independently of the variational route.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, lobpcg

from .catalog import radial_profile_of
from .errors import (AssemblyError, Inconsistent, NoConvergence,
                     UnsupportedDimension, ZeroVector)
from .forms import QuadFormReport
from .geometry import SurfaceChart, fundamental_forms, shape_data
from .layer import LayerConfig

__all__ = [
    "TensorMesh", "DiscretePair", "EigenReport", "ThresholdReport",
    "Certificate", "graded_axis", "assemble", "solve_lowest", "rayleigh",
    "essential_threshold", "bound_state_certificate", "solve_ladder",
    "dump_matrix", "load_matrix",
]

_GAUSS = 1.0 / sqrt(3.0)          # 2-point Gauss abscissae on [-1, 1]


def graded_axis(lo: float, hi: float, count: int, power: float = 1.6,
                center: Optional[float] = None) -> np.ndarray:
    """Node axis refined toward `center` (default midpoint) by the map
    s -> sign(s) |s|^power of the uniform parameter."""
    if count < 2:
        raise ValueError("an axis needs at least 2 nodes")
    c = 0.5 * (lo + hi) if center is None else float(center)
    half = max(hi - c, c - lo)
    s = np.linspace(-1.0, 1.0, count)
    t = np.sign(s) * np.abs(s) ** power
    nodes = c + half * t
    return np.clip(nodes, lo, hi)


@dataclass(frozen=True)
class TensorMesh:
    """Tensor-product hexahedral mesh of (chart box) x (-a, a)."""
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    u_nodes: np.ndarray

    def __post_init__(self):
        for name, arr in (("x", self.x_nodes), ("y", self.y_nodes),
                          ("u", self.u_nodes)):
            arr = np.asarray(arr, float)
            if arr.ndim != 1 or arr.size < 2 or np.any(np.diff(arr) <= 0):
                raise AssemblyError(
                    f"{name}-axis must be strictly increasing, >= 2 nodes")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.x_nodes.size, self.y_nodes.size, self.u_nodes.size)

    @property
    def node_count(self) -> int:
        nx, ny, nu = self.shape
        return nx * ny * nu

    @classmethod
    def box(cls, half_width: float, a: float, nx: int, ny: int, nu: int,
            grade_power: Optional[float] = None) -> "TensorMesh":
        """Square window [-half_width, half_width]^2 times (-a, a); a
        grade power refines the horizontal axes toward the origin."""
        if grade_power is None:
            ax = np.linspace(-half_width, half_width, nx)
            ay = np.linspace(-half_width, half_width, ny)
        else:
            ax = graded_axis(-half_width, half_width, nx, grade_power)
            ay = graded_axis(-half_width, half_width, ny, grade_power)
        return cls(ax, ay, np.linspace(-a, a, nu))


@dataclass(frozen=True)
class DiscretePair:
    """Stiffness/mass matrices on the interior (Dirichlet) nodes."""
    K: sparse.csr_matrix
    M: sparse.csr_matrix
    mesh: TensorMesh
    keep: np.ndarray               # flat indices of interior nodes

    @property
    def dof_count(self) -> int:
        return self.K.shape[0]


def _reference_shape():
    """Trilinear shape values/gradients at the 8 Gauss points.

    Node k has corner bits (bx, by, bu) = (k>>2 & 1, k>>1 & 1, k & 1);
    returns N (8 gauss, 8 nodes) and dN (8 gauss, 8 nodes, 3 dirs) on
    the reference cube [-1, 1]^3.
    """
    corners = np.array([[(k >> 2) & 1, (k >> 1) & 1, k & 1]
                        for k in range(8)], float) * 2.0 - 1.0
    gauss = corners * _GAUSS                 # 8 gauss points, same layout
    N = np.empty((8, 8))
    dN = np.empty((8, 8, 3))
    for gi, (gx, gy, gu) in enumerate(gauss):
        for k, (cx, cy, cu) in enumerate(corners):
            fx, fy, fu = 1 + cx * gx, 1 + cy * gy, 1 + cu * gu
            N[gi, k] = fx * fy * fu / 8.0
            dN[gi, k] = np.array([cx * fy * fu, fx * cy * fu,
                                  fx * fy * cu]) / 8.0
    return gauss, N, dN


def _horizontal_geometry(chart: SurfaceChart, pts: np.ndarray):
    """g^{-1}, A, elementary symmetric c, sqrt(det g) batched over pts."""
    forms = fundamental_forms(chart, pts)
    shp = shape_data(forms)
    g = forms.g
    detg = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
    ginv = np.empty_like(g)
    ginv[:, 0, 0] = g[:, 1, 1]
    ginv[:, 1, 1] = g[:, 0, 0]
    ginv[:, 0, 1] = -g[:, 0, 1]
    ginv[:, 1, 0] = -g[:, 1, 0]
    ginv /= detg[:, None, None]
    return ginv, shp.A, shp.elem_sym, np.sqrt(detg), shp.normA


def assemble(chart: SurfaceChart, config: LayerConfig, mesh: TensorMesh,
             chunk: int = 50000) -> DiscretePair:
    """Assemble the Dirichlet stiffness/mass pair of the layer Laplacian.

    2x2x2 Gauss quadrature per element; per Gauss point the integrand
    carries the inverse tangent metric (I-uA)^{-1} g^{-1} (I-uA)^{-T},
    the unit transverse direction, and the weight |det(I-uA)| sqrt(det g).
    All boundary faces (chart window and u = +-a) are eliminated.
    Raises AssemblyError if the measure density is not strictly positive
    at a quadrature point (curvature-smallness violated) or a mass
    diagonal fails positivity.
    """
    if chart.n != 2:
        raise UnsupportedDimension(
            "the discrete solver meshes 2-d charts only")
    xs, ys, us = (np.asarray(mesh.x_nodes, float),
                  np.asarray(mesh.y_nodes, float),
                  np.asarray(mesh.u_nodes, float))
    a = config.a
    if us[0] < -a - 1e-12 or us[-1] > a + 1e-12:
        raise AssemblyError("u-axis must lie inside (-a, a) closure")
    nx, ny, nu = mesh.shape
    nox, noy = nx - 1, ny - 1
    neh = nox * noy                          # horizontal elements
    _, N, dN = _reference_shape()

    # horizontal element layout and connectivity offsets
    iex, iey = np.divmod(np.arange(neh), noy)
    hx = xs[iex + 1] - xs[iex]
    hy = ys[iey + 1] - ys[iey]
    xm = 0.5 * (xs[iex + 1] + xs[iex])
    ym = 0.5 * (ys[iey + 1] + ys[iey])
    corner_bits = np.array([[(k >> 2) & 1, (k >> 1) & 1, k & 1]
                            for k in range(8)])
    base_flat = (iex[:, None] + corner_bits[None, :, 0]) * (ny * nu) \
        + (iey[:, None] + corner_bits[None, :, 1]) * nu

    # geometry cache: 4 horizontal Gauss points (gx, gy in {-s, +s})
    geo = {}
    for sx in (-1, 1):
        for sy in (-1, 1):
            px = xm + 0.5 * hx * sx * _GAUSS
            py = ym + 0.5 * hy * sy * _GAUSS
            pts = np.stack([px, py], axis=-1)
            geo[(sx, sy)] = _horizontal_geometry(chart, pts)
    sup_normA = max(v[4].max() for v in geo.values())
    if a * sup_normA >= 1.0:
        raise AssemblyError(
            f"a ||A|| reaches {a * sup_normA:.3f} >= 1 at quadrature "
            "points; the layer map degenerates on this window")

    ndof = nx * ny * nu
    k_data, m_data, r_idx, c_idx = [], [], [], []
    eye = np.eye(2)
    for iu in range(nu - 1):
        hu = us[iu + 1] - us[iu]
        um = 0.5 * (us[iu + 1] + us[iu])
        conn = base_flat + (iu + corner_bits[None, :, 2])
        Ke = np.zeros((neh, 8, 8))
        Me = np.zeros((neh, 8, 8))
        detJ = 0.125 * hx * hy * hu
        for gi in range(8):
            bits = corner_bits[gi] * 2 - 1
            ginv, A, c, sqg, _ = geo[(bits[0], bits[1])]
            u = um + 0.5 * hu * bits[2] * _GAUSS
            dens = 1.0 - u * c[:, 1] + u * u * c[:, 2]
            if np.any(dens <= 0.0):
                raise AssemblyError(
                    "measure density det(I - uA) vanishes inside an "
                    "element; refine the window or reduce the depth")
            B = eye[None] - u * A
            detB = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
            Binv = np.empty_like(B)
            Binv[:, 0, 0] = B[:, 1, 1]
            Binv[:, 1, 1] = B[:, 0, 0]
            Binv[:, 0, 1] = -B[:, 0, 1]
            Binv[:, 1, 0] = -B[:, 1, 0]
            Binv /= detB[:, None, None]
            Ginv = np.einsum("mik,mkl,mjl->mij", Binv, ginv, Binv)
            W = np.abs(dens) * sqg * detJ            # gauss weight 1^3
            # physical shape gradients: dN/dx_a = dN/dxi_a * 2/h_a
            dNx = dN[gi][None, :, 0] * (2.0 / hx)[:, None]
            dNy = dN[gi][None, :, 1] * (2.0 / hy)[:, None]
            dNu = np.broadcast_to(dN[gi][None, :, 2] * (2.0 / hu),
                                  (neh, 8))
            Ke += np.einsum("e,ei,ej->eij", W * Ginv[:, 0, 0], dNx, dNx)
            Ke += np.einsum("e,ei,ej->eij", W * Ginv[:, 0, 1], dNx, dNy)
            Ke += np.einsum("e,ei,ej->eij", W * Ginv[:, 1, 0], dNy, dNx)
            Ke += np.einsum("e,ei,ej->eij", W * Ginv[:, 1, 1], dNy, dNy)
            Ke += np.einsum("e,ei,ej->eij", W, dNu, dNu)
            Me += W[:, None, None] * np.outer(N[gi], N[gi])[None]
        for lo in range(0, neh, chunk):
            sl = slice(lo, min(lo + chunk, neh))
            r_idx.append(np.repeat(conn[sl], 8, axis=1).ravel()
                         .astype(np.int64))
            c_idx.append(np.tile(conn[sl], (1, 8)).ravel()
                         .astype(np.int64))
            k_data.append(Ke[sl].ravel())
            m_data.append(Me[sl].ravel())
    rows = np.concatenate(r_idx)
    cols = np.concatenate(c_idx)
    K = sparse.coo_matrix((np.concatenate(k_data), (rows, cols)),
                          shape=(ndof, ndof)).tocsr()
    M = sparse.coo_matrix((np.concatenate(m_data), (rows, cols)),
                          shape=(ndof, ndof)).tocsr()

    # Dirichlet elimination on every boundary face
    ix, iy, iu = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nu),
                             indexing="ij")
    interior = ((ix > 0) & (ix < nx - 1) & (iy > 0) & (iy < ny - 1)
                & (iu > 0) & (iu < nu - 1)).ravel()
    keep = np.nonzero(interior)[0]
    K = K[np.ix_(keep, keep)].tocsr()
    M = M[np.ix_(keep, keep)].tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    dmass = M.diagonal()
    if np.any(dmass <= 0):
        raise AssemblyError("mass matrix diagonal is not positive")
    return DiscretePair(K=K.tocsr(), M=M.tocsr(), mesh=mesh, keep=keep)


@dataclass(frozen=True)
class EigenReport:
    """Lowest discrete eigenvalues of the layer pair.

    gap = eigenvalues[0] - kappa1_sq: negative gap certifies a bound
    state below the essential-spectrum threshold (Rayleigh upper bound).
    residuals are relative: ||K v - lambda M v|| / (||K v|| + |l| ||M v||).
    """
    eigenvalues: np.ndarray
    residuals: np.ndarray
    mesh_shape: tuple[int, int, int]
    dof_count: int
    kappa1_sq: float
    gap: float
    preconditioner: str
    converged: bool


def _preconditioner(K: sparse.csr_matrix, kind: str, seed: int = 1234):
    if kind in ("auto", "amg"):
        try:
            import pyamg
            # the AMG setup estimates spectral radii with power iterations
            # started from the global numpy random state; pin it so repeated
            # runs build the identical preconditioner
            state = np.random.get_state()
            try:
                np.random.seed(seed)
                ml = pyamg.smoothed_aggregation_solver(K.tocsr(),
                                                       max_coarse=500)
            finally:
                np.random.set_state(state)
            return ml.aspreconditioner(cycle="V"), "amg"
        except ImportError:
            if kind == "amg":
                raise
    d = K.diagonal()
    if np.any(d <= 0):
        raise AssemblyError("stiffness diagonal not positive")
    dinv = 1.0 / d

    def mv(v):
        return dinv * v if v.ndim == 1 else dinv[:, None] * v

    return LinearOperator(K.shape, matvec=mv, matmat=mv), "jacobi"


def solve_lowest(pair: DiscretePair, config: LayerConfig, k: int = 1,
                 tol: float = 1e-6, maxiter: int = 400, seed: int = 1234,
                 preconditioner: str = "auto",
                 residual_limit: float = 1e-4) -> EigenReport:
    """Lowest k eigenvalues of K v = lambda M v by preconditioned LOBPCG.

    Uses an algebraic-multigrid V-cycle on K when pyamg is available and
    a Jacobi (diagonal) preconditioner otherwise; the block carries two
    guard vectors beyond k. Raises NoConvergence (with the partial report
    attached) when the relative residual of a requested eigenpair exceeds
    residual_limit.
    """
    if not 1 <= k <= 10:
        raise ValueError("k must be between 1 and 10")
    if tol < 1e-10:
        raise ValueError("tol below 1e-10 is beyond double-precision "
                         "assembly accuracy")
    n = pair.dof_count
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k + 2))
    Mpre, kind = _preconditioner(pair.K, preconditioner, seed=seed)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, vecs = lobpcg(pair.K, X, B=pair.M, M=Mpre, tol=tol,
                            maxiter=maxiter, largest=False)
    order = np.argsort(vals)
    vals, vecs = vals[order][:k], vecs[:, order][:, :k]
    res = np.empty(k)
    for i in range(k):
        v = vecs[:, i]
        Kv = pair.K @ v
        Mv = pair.M @ v
        res[i] = np.linalg.norm(Kv - vals[i] * Mv) / (
            np.linalg.norm(Kv) + abs(vals[i]) * np.linalg.norm(Mv))
    kap2 = config.kappa1 ** 2
    rep = EigenReport(eigenvalues=vals, residuals=res,
                      mesh_shape=pair.mesh.shape, dof_count=n,
                      kappa1_sq=kap2, gap=float(vals[0] - kap2),
                      preconditioner=kind,
                      converged=bool(res.max() <= residual_limit))
    if not rep.converged:
        raise NoConvergence(
            f"LOBPCG residual {res.max():.2e} above {residual_limit:.0e} "
            f"after {maxiter} iterations", report=rep)
    return rep


def rayleigh(pair: DiscretePair, v: np.ndarray) -> float:
    """Rayleigh quotient v' K v / v' M v (an upper bound for the bottom
    of the spectrum for any nonzero v)."""
    v = np.asarray(v, float).ravel()
    if v.size != pair.dof_count:
        raise ValueError(f"vector length {v.size} != dofs {pair.dof_count}")
    nrm = np.linalg.norm(v)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ZeroVector("Rayleigh quotient of the zero vector")
    denom = float(v @ (pair.M @ v))
    if denom <= 0:
        raise ZeroVector("vector has nonpositive mass norm")
    return float(v @ (pair.K @ v)) / denom


def solve_ladder(chart: SurfaceChart, config: LayerConfig,
                 meshes: Sequence[TensorMesh], **kw) -> list[EigenReport]:
    """solve_lowest over a refinement ladder (coarse to fine)."""
    return [solve_lowest(assemble(chart, config, m), config, **kw)
            for m in meshes]


@dataclass(frozen=True)
class ThresholdReport:
    """Lower bound for the essential-spectrum threshold from tail data.

    epsilon = sup ||A|| outside radius K_radius; the measure sandwich
    squeezes every Rayleigh quotient outside that radius, giving

        sigma_ess >= kappa1^2 ((1 - a eps) / (1 + a eps))^n.

    ratio is the bound over kappa1^2 (1 would be the flat value).
    """
    bound: float
    epsilon: float
    K_radius: float
    ratio: float
    kappa1_sq: float


def essential_threshold(chart: SurfaceChart, config: LayerConfig,
                        K_radius: float, samples: int = 400
                        ) -> ThresholdReport:
    """Certified lower bound for the essential spectrum of the layer,
    from the curvature supremum outside the compact core B(K_radius)."""
    if K_radius <= 0:
        raise ValueError("K_radius must be positive")
    trunc = float(chart.extra.get("truncation", 10.0 * K_radius))
    radii = np.geomspace(K_radius, max(trunc, K_radius * 1.0001), samples)
    prof = radial_profile_of(chart)
    if prof is not None:
        d1, d2 = prof.d1(radii), prof.d2(radii)
        grr = 1.0 + d1 * d1
        kr = d2 / grr ** 1.5
        kt = d1 / (radii * np.sqrt(grr))
        eps = float(np.max(np.maximum(np.abs(kr), np.abs(kt))))
    else:
        th = np.linspace(0.0, 2.0 * pi, 33)[:-1]
        pts = radii[:, None, None] * np.stack(
            [np.cos(th), np.sin(th)], axis=-1)[None]
        flat = pts.reshape(-1, 2)
        if chart.n != 2:
            raise UnsupportedDimension(
                "tail scan on circles needs a 2-d chart")
        shp = shape_data(fundamental_forms(chart, flat))
        eps = float(np.max(shp.normA))
    ae = config.a * eps
    if ae >= 1.0:
        bound = 0.0
    else:
        bound = config.kappa1 ** 2 * ((1.0 - ae) / (1.0 + ae)) ** chart.n
    return ThresholdReport(bound=bound, epsilon=eps, K_radius=K_radius,
                           ratio=bound / config.kappa1 ** 2,
                           kappa1_sq=config.kappa1 ** 2)


@dataclass(frozen=True)
class Certificate:
    """Combined adjudication of the two independent bound-state routes.

    granted requires the variational witness (Q_min < -quadrature_error)
    and the discrete confirmation (gap < -gap_tol). A variational witness
    with a nonbinding coarse mesh is denied as "unresolved" (discretization
    only raises discrete eigenvalues, so that is not a contradiction); the
    converse, a converged fine ladder sitting far above threshold against
    a variational witness, raises Inconsistent.
    """
    granted: bool
    reason: str
    variational: bool
    discrete: bool
    gap: float
    Q_min: float
    quadrature_error: float
    threshold: float
    gap_tol: float
    tail_ok: Optional[bool] = None


def bound_state_certificate(eig: EigenReport, q: QuadFormReport,
                            threshold: float,
                            gap_tol: Optional[float] = None,
                            tail_ok: Optional[bool] = None,
                            ladder_stable: bool = False) -> Certificate:
    """Adjudicate bound-state existence from an eigensolver report and a
    quadratic-form report against the threshold kappa1^2.

    gap_tol defaults to max(5e-4 * threshold, residual scale). tail_ok,
    when supplied, records the essential-spectrum prerequisite (curvature
    decay toward the ends); False vetoes the grant since the threshold
    identification is then unsupported. ladder_stable marks eig as the
    converged end of a refinement ladder, arming the Inconsistent check.
    """
    if gap_tol is None:
        gap_tol = max(5e-4 * threshold,
                      10.0 * float(eig.residuals[0]) * abs(
                          float(eig.eigenvalues[0])))
    variational = bool(q.Q_min < -q.quadrature_error)
    discrete = bool(eig.gap < -gap_tol)
    if variational and ladder_stable and eig.gap > 0.02 * threshold:
        raise Inconsistent(
            f"variational witness Q_min = {q.Q_min:.6g} < "
            f"-{q.quadrature_error:.2g} but a converged ladder sits "
            f"{eig.gap / threshold:.1%} above threshold")
    if tail_ok is False:
        return Certificate(False, "threshold-unsupported", variational,
                           discrete, eig.gap, q.Q_min, q.quadrature_error,
                           threshold, gap_tol, tail_ok)
    if variational and discrete:
        return Certificate(True, "confirmed", variational, discrete,
                           eig.gap, q.Q_min, q.quadrature_error,
                           threshold, gap_tol, tail_ok)
    if variational:
        return Certificate(False, "unresolved", variational, discrete,
                           eig.gap, q.Q_min, q.quadrature_error,
                           threshold, gap_tol, tail_ok)
    if discrete:
        return Certificate(False, "discrete-only", variational, discrete,
                           eig.gap, q.Q_min, q.quadrature_error,
                           threshold, gap_tol, tail_ok)
    return Certificate(False, "no-witness", variational, discrete,
                       eig.gap, q.Q_min, q.quadrature_error, threshold,
                       gap_tol, tail_ok)


# --------------------------------------------------------------------------
# sparse matrix interchange (QLMX1)
# --------------------------------------------------------------------------

_QLMX_MAGIC = b"QLMX1"
_QLMX_REC = np.dtype([("i", "<u4"), ("j", "<u4"), ("v", "<f8")])


def dump_matrix(matrix: sparse.spmatrix, path) -> None:
    """Write a sparse matrix as QLMX1: magic "QLMX1", three little-endian
    u64 (rows, cols, nnz), then nnz records (u32 row, u32 col, f64 value)
    sorted row-major."""
    coo = sparse.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    rec = np.empty(coo.nnz, dtype=_QLMX_REC)
    rec["i"] = coo.row[order]
    rec["j"] = coo.col[order]
    rec["v"] = coo.data[order]
    with open(path, "wb") as fh:
        fh.write(_QLMX_MAGIC)
        fh.write(struct.pack("<QQQ", coo.shape[0], coo.shape[1], coo.nnz))
        rec.tofile(fh)


def load_matrix(path) -> sparse.csr_matrix:
    """Read a QLMX1 file back into CSR form."""
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != _QLMX_MAGIC:
            raise ValueError(f"not a QLMX1 file (magic {magic!r})")
        rows, cols, nnz = struct.unpack("<QQQ", fh.read(24))
        rec = np.fromfile(fh, dtype=_QLMX_REC, count=nnz)
    if rec.size != nnz:
        raise ValueError("truncated QLMX1 payload")
    return sparse.coo_matrix(
        (rec["v"], (rec["i"], rec["j"])), shape=(rows, cols)).tocsr()
