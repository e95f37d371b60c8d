"""Discrete layer Laplacian: meshes, assembly, LOBPCG, certificates, QLMX."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from qlayer.errors import (AssemblyError, Inconsistent, UnsupportedDimension,
                           ZeroVector)
from qlayer.eigensolver import (DiscretePair, EigenReport, TensorMesh,
                                assemble, bound_state_certificate,
                                dump_matrix, essential_threshold,
                                graded_axis, load_matrix, rayleigh,
                                solve_ladder, solve_lowest)
from qlayer.forms import QuadFormReport
from qlayer.layer import LayerConfig


# ---------------------------------------------------------------------------
# axes and meshes
# ---------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(count=st.integers(5, 80), power=st.floats(1.0, 3.5),
       half=st.floats(0.5, 20.0))
def test_graded_axis_properties(count, power, half):
    ax = graded_axis(-half, half, count, power=power)
    assert len(ax) == count
    assert ax[0] == pytest.approx(-half, rel=1e-12)
    assert ax[-1] == pytest.approx(half, rel=1e-12)
    assert np.all(np.diff(ax) > 0)
    assert np.allclose(ax, -ax[::-1], atol=1e-12 * half)
    if count % 2 == 1 and power > 1.05:
        gaps = np.diff(ax)
        # grading packs the smallest cells around the center
        assert gaps[len(gaps) // 2] <= gaps[0]


def test_graded_axis_power_one_is_uniform():
    ax = graded_axis(-2.0, 2.0, 9, power=1.0)
    assert np.allclose(np.diff(ax), np.diff(ax)[0], rtol=1e-12)


def test_tensor_mesh_box():
    mesh = TensorMesh.box(8.0, 0.4, 21, 21, 9, grade_power=1.6)
    assert mesh.x_nodes.shape == (21,) and mesh.u_nodes.shape == (9,)
    assert mesh.x_nodes[0] == -8.0 and mesh.x_nodes[-1] == 8.0
    assert mesh.u_nodes[0] == -0.4 and mesh.u_nodes[-1] == 0.4
    # transverse axis stays uniform; grading applies horizontally
    assert np.allclose(np.diff(mesh.u_nodes), np.diff(mesh.u_nodes)[0],
                       rtol=1e-12)
    uni = TensorMesh.box(8.0, 0.4, 21, 21, 9)
    assert np.allclose(np.diff(uni.x_nodes), np.diff(uni.x_nodes)[0],
                       rtol=1e-12)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_assemble_flat_matrices_are_spd(plane_chart):
    cfg = LayerConfig(a=0.4)
    pair = assemble(plane_chart, cfg, TensorMesh.box(4.0, 0.4, 9, 9, 7))
    for A in (pair.K, pair.M):
        assert (abs(A - A.T) > 1e-12).nnz == 0
    lo = sparse.linalg.eigsh(pair.M, k=1, which="SA",
                             return_eigenvectors=False)
    assert lo[0] > 0
    assert pair.dof_count == 7 * 7 * 5         # interior nodes only


def test_assemble_rejects_unsupported_dimension():
    from qlayer.catalog import build_chart
    tube = build_chart("s1xr2-logtube")
    with pytest.raises(UnsupportedDimension):
        assemble(tube, LayerConfig(a=0.1), TensorMesh.box(2, 0.1, 5, 5, 5))


def test_assemble_rejects_singular_layer(paraboloid_chart):
    deep = LayerConfig(a=0.55, C0=0.999999)   # a ||A|| = 1.1 at the origin
    with pytest.raises(AssemblyError):
        assemble(paraboloid_chart, deep, TensorMesh.box(3.0, 0.55, 9, 9, 7))


# ---------------------------------------------------------------------------
# eigenvalues (frozen reference values)
# ---------------------------------------------------------------------------

def test_flat_box_eigenvalue_matches_separation_of_variables(plane_chart):
    cfg = LayerConfig(a=1.0)
    pair = assemble(plane_chart, cfg, TensorMesh.box(8.0, 1.0, 32, 32, 32))
    rep = solve_lowest(pair, cfg)
    exact = (np.pi / 2.0) ** 2 + 2.0 * (np.pi / 16.0) ** 2
    assert rep.eigenvalues[0] == pytest.approx(2.546686, abs=2e-5)
    assert rep.eigenvalues[0] == pytest.approx(exact, rel=1e-3)
    # conforming elements: discrete value sits above the true eigenvalue
    assert rep.eigenvalues[0] > exact
    assert rep.converged
    assert rep.residuals[0] < 1e-5


def test_plane_layer_stays_at_or_above_threshold(plane_chart,
                                                 shallow_config):
    pair = assemble(plane_chart, shallow_config,
                    TensorMesh.box(8.0, 0.4, 21, 21, 9))
    rep = solve_lowest(pair, shallow_config)
    assert rep.eigenvalues[0] == pytest.approx(15.697703, abs=2e-4)
    assert rep.gap > 0
    assert rep.kappa1_sq == pytest.approx(shallow_config.threshold,
                                          rel=1e-12)


def test_paraboloid_graded_mesh_binds(paraboloid_chart, shallow_config):
    mesh = TensorMesh.box(12.0, 0.4, 53, 53, 17, grade_power=1.6)
    pair = assemble(paraboloid_chart, shallow_config, mesh)
    rep = solve_lowest(pair, shallow_config)
    assert rep.eigenvalues[0] == pytest.approx(15.426012, abs=2e-4)
    assert rep.preconditioner in ("amg", "jacobi")
    assert rep.mesh_shape == (53, 53, 17)


def test_solve_ladder_monotone(plane_chart, shallow_config):
    meshes = [TensorMesh.box(6.0, 0.4, 13, 13, 7),
              TensorMesh.box(6.0, 0.4, 17, 17, 9)]
    reps = solve_ladder(plane_chart, shallow_config, meshes)
    # conforming refinement on nested boxes can only lower the eigenvalue
    assert reps[1].eigenvalues[0] < reps[0].eigenvalues[0]


def test_rayleigh_quotient_dominates_lowest(plane_chart, shallow_config):
    pair = assemble(plane_chart, shallow_config,
                    TensorMesh.box(6.0, 0.4, 11, 11, 7))
    rep = solve_lowest(pair, shallow_config)
    rng = np.random.default_rng(8)
    for _ in range(5):
        v = rng.standard_normal(pair.dof_count)
        assert rayleigh(pair, v) >= rep.eigenvalues[0] - 1e-8
    with pytest.raises(ZeroVector):
        rayleigh(pair, np.zeros(pair.dof_count))


def test_jacobi_fallback_agrees_with_amg(plane_chart, shallow_config):
    pair = assemble(plane_chart, shallow_config,
                    TensorMesh.box(6.0, 0.4, 11, 11, 7))
    amg = solve_lowest(pair, shallow_config, preconditioner="auto")
    jac = solve_lowest(pair, shallow_config, preconditioner="jacobi")
    assert jac.preconditioner == "jacobi"
    assert jac.eigenvalues[0] == pytest.approx(amg.eigenvalues[0], rel=1e-7)


# ---------------------------------------------------------------------------
# essential-spectrum threshold
# ---------------------------------------------------------------------------

def test_essential_threshold_plane_is_exact(plane_chart, shallow_config):
    thr = essential_threshold(plane_chart, shallow_config, K_radius=10.0)
    assert thr.epsilon == 0.0
    assert thr.ratio == pytest.approx(1.0, rel=1e-12)
    assert thr.bound == pytest.approx(shallow_config.threshold, rel=1e-12)


def test_essential_threshold_paraboloid(paraboloid_chart, shallow_config):
    thr = essential_threshold(paraboloid_chart, shallow_config,
                              K_radius=10.0)
    # tail curvature ~ 1/r: epsilon ~ 0.1 at radius 10
    assert thr.epsilon == pytest.approx(0.099875, abs=1e-4)
    assert thr.ratio == pytest.approx(0.8522, abs=1e-3)
    ratios = [essential_threshold(paraboloid_chart, shallow_config,
                                  K_radius=K).ratio for K in (10, 20, 40)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert all(r < 1.0 for r in ratios)


# ---------------------------------------------------------------------------
# certificate adjudication on synthetic reports
# ---------------------------------------------------------------------------

def _eig(gap, thr, lam=None):
    lam = thr + gap if lam is None else lam
    return EigenReport(eigenvalues=np.array([lam]),
                       residuals=np.array([1e-8]), mesh_shape=(9, 9, 9),
                       dof_count=343, kappa1_sq=thr, gap=gap,
                       preconditioner="amg", converged=True)


def _q(views, qerr=1e-7):
    return QuadFormReport(Q1=1.0, Q2=0.0, Q=views, cross=None, quad=None,
                          epsilon_star=None, Q_min=views,
                          quadrature_error=qerr, Q2_expansion=None,
                          cross_identity=None, Q_base=views)


def test_certificate_decision_table(shallow_config):
    thr = shallow_config.threshold
    confirmed = bound_state_certificate(_eig(-0.1, thr), _q(-0.5), thr,
                                        tail_ok=True, ladder_stable=True)
    assert confirmed.granted and confirmed.reason == "confirmed"
    unresolved = bound_state_certificate(_eig(+0.05, thr), _q(-0.5), thr,
                                         tail_ok=True)
    assert not unresolved.granted and unresolved.reason == "unresolved"
    no_wit = bound_state_certificate(_eig(+0.05, thr), _q(+0.4), thr,
                                     tail_ok=True)
    assert not no_wit.granted and no_wit.reason == "no-witness"
    disc = bound_state_certificate(_eig(-0.1, thr), _q(+0.4), thr,
                                   tail_ok=True)
    assert not disc.granted and disc.reason == "discrete-only"
    veto = bound_state_certificate(_eig(-0.1, thr), _q(-0.5), thr,
                                   tail_ok=False, ladder_stable=True)
    assert not veto.granted and veto.reason == "threshold-unsupported"


def test_certificate_flags_strong_disagreement(shallow_config):
    thr = shallow_config.threshold
    # converged ladder far above threshold against a certified witness:
    # impossible for conforming elements, so it must raise
    with pytest.raises(Inconsistent):
        bound_state_certificate(_eig(0.05 * thr, thr), _q(-0.5), thr,
                                tail_ok=True, ladder_stable=True)
    # same gap without ladder convergence: merely unresolved
    cert = bound_state_certificate(_eig(0.05 * thr, thr), _q(-0.5), thr,
                                   tail_ok=True, ladder_stable=False)
    assert cert.reason == "unresolved"


# ---------------------------------------------------------------------------
# sparse matrix interchange
# ---------------------------------------------------------------------------

def test_qlmx_roundtrip_is_exact(tmp_path, plane_chart, shallow_config):
    pair = assemble(plane_chart, shallow_config,
                    TensorMesh.box(3.0, 0.4, 7, 7, 5))
    path = tmp_path / "stiffness.qlmx"
    dump_matrix(pair.K, path)
    back = load_matrix(path)
    assert back.shape == pair.K.shape
    diff = (back - pair.K).tocoo()
    assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0
    # header sanity: magic + three uint64 counters
    raw = path.read_bytes()
    assert raw[:5] == b"QLMX1"
    import struct
    rows, cols, nnz = struct.unpack("<QQQ", raw[5:29])
    assert (rows, cols) == pair.K.shape
    assert nnz == pair.K.nnz


def test_qlmx_rejects_corrupt_header(tmp_path):
    path = tmp_path / "bad.qlmx"
    path.write_bytes(b"NOTMX" + b"\x00" * 24)
    with pytest.raises(Exception):
        load_matrix(path)
