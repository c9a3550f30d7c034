import warnings

import numpy as np
import pytest

from plasmonls import (BlockVector, DenseCapError, GridConfig, OperatorHandle, RegularizationPolicy, SolverError,
                       ValidationError, assemble_wave_operator, born_series, build_grids, first_order_psi,
                       scattering_matrix, solve_ls)
from plasmonls import lssolver
from plasmonls.exceptions import DomainError, ShapeMismatchError, SingularNodeError
from plasmonls.lssolver import local_spacing, resolvent_solve, shell_mask, wave_operator_column
from plasmonls.quadrature import MINUS, PLUS

LAMBDA = RegularizationPolicy()
GRID = RegularizationPolicy.grid_scaled()
PV = RegularizationPolicy("pv_split")


def test_policy_validation():
    with pytest.raises(ValidationError):
        RegularizationPolicy("magic")
    with pytest.raises(ValidationError):
        RegularizationPolicy(eta_rel=(1e-3, 1e-2))
    with pytest.raises(ValidationError):
        RegularizationPolicy(sign=0)
    assert LAMBDA.flipped().sign == MINUS


@pytest.mark.parametrize("reg", [LAMBDA, GRID, PV])
def test_zero_coupling_gives_identity(small_op, reg):
    W = assemble_wave_operator(small_op.scaled(0.0), reg)
    np.testing.assert_allclose(W.matrix, np.eye(small_op.size), rtol=0, atol=1e-14)
    assert W.unitarity_defect <= 1e-14 and W.residuals.max() <= 1e-14


@pytest.mark.parametrize("reg", [LAMBDA, GRID, PV])
def test_incoming_is_conjugate_of_outgoing(small_op, reg):
    op = small_op.scaled(0.5)
    wp = assemble_wave_operator(op, reg).matrix
    wm = assemble_wave_operator(op, reg.flipped()).matrix
    np.testing.assert_allclose(wm, wp.conj(), atol=1e-12)


def test_eigen_residual_off_shell_is_small(tiny_config, one_voxel):
    op = OperatorHandle(one_voxel, build_grids(tiny_config, one_voxel))
    W = assemble_wave_operator(op, LAMBDA)
    assert W.residuals.max() <= 1e-6


def test_grid_scaled_residual_decreases_under_refinement(one_voxel, small_config):
    res = []
    cfg = small_config
    for _ in range(3):
        op = OperatorHandle(one_voxel, build_grids(cfg, one_voxel)).scaled(0.1)
        res.append(assemble_wave_operator(op, GRID).shell_residuals.max())
        cfg = cfg.refined(2)
    assert res[0] > res[1] > res[2]


def test_dense_and_iterative_agree(small_op):
    op = small_op.scaled(0.3)
    for a in (0, 17, small_op.grid.n_field + 2):
        fam, idx = ("e", a) if a < op.grid.n_field else ("m", a - op.grid.n_field)
        d = solve_ls(op, fam, idx, GRID, method="dense")
        it = solve_ls(op, fam, idx, GRID, method="iterative")
        np.testing.assert_allclose(it.weighted, d.weighted, atol=1e-10)
        assert d.info["method"] == "dense" and it.info["method"] == "iterative"


def test_solve_ls_matches_wave_operator_column(small_op):
    op = small_op.scaled(0.4)
    W = assemble_wave_operator(op, GRID)
    for a in (3, op.grid.n_field + 5):
        fam, idx = ("e", a) if a < op.grid.n_field else ("m", a - op.grid.n_field)
        psi = solve_ls(op, fam, idx, GRID)
        np.testing.assert_allclose(psi.weighted, W.matrix[:, a], atol=1e-12)
        col = wave_operator_column(W, op, a)
        np.testing.assert_allclose(col.blocks.flat(), psi.blocks.flat(), atol=1e-10)
        assert psi.global_index == a and psi.family == fam


def test_worker_count_does_not_change_result(small_op):
    op = small_op.scaled(0.7)
    w1 = assemble_wave_operator(op, GRID, workers=1).matrix
    w4 = assemble_wave_operator(op, GRID, workers=4).matrix
    np.testing.assert_array_equal(w1, w4)


@pytest.mark.parametrize("reg", [LAMBDA, GRID])
def test_born_series_converges_to_ls_solution(small_op, reg):
    op = small_op.scaled(0.05)
    for fam, idx in (("e", 9), ("m", 4)):
        born = born_series(op, fam, idx, reg, tol=1e-14)
        ls = solve_ls(op, fam, idx, reg)
        assert born.info["converged"]
        np.testing.assert_allclose(born.weighted, ls.weighted, atol=1e-11)


def test_born_order_one_is_first_order_closed_form(small_op):
    op = small_op.scaled(0.2)
    for reg in (LAMBDA, GRID, PV):
        for fam, idx in (("e", 2), ("m", 7)):
            b1 = born_series(op, fam, idx, reg, max_order=1)
            f1 = first_order_psi(op, fam, idx, reg)
            np.testing.assert_allclose(b1.weighted, f1.weighted, atol=1e-13)


def test_born_zero_coupling_terminates(small_op):
    b = born_series(small_op.scaled(0.0), "e", 0)
    assert b.info["converged"] and b.info["order"] == 0


def test_first_order_error_is_quadratic(small_op):
    errs = []
    for s in (0.04, 0.02):
        op = small_op.scaled(s)
        errs.append(np.linalg.norm(solve_ls(op, "m", 3, GRID).weighted - first_order_psi(op, "m", 3, GRID).weighted))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_scattering_matrix(small_op):
    op0 = small_op.scaled(0.0)
    S0 = scattering_matrix(assemble_wave_operator(op0, GRID), assemble_wave_operator(op0, GRID.flipped()))
    np.testing.assert_allclose(S0.matrix, np.eye(op0.size), rtol=0, atol=1e-14)
    op = small_op.scaled(0.1)
    S = scattering_matrix(assemble_wave_operator(op, GRID), assemble_wave_operator(op, GRID.flipped()))
    assert S.unitarity_defect < 1e-2
    assert S.off_shell_max < 0.2
    other = OperatorHandle(small_op.model, build_grids(GridConfig(2, 2, 2, 2, 6.0, 5.0, 0.5), small_op.model))
    with pytest.raises(ShapeMismatchError):
        scattering_matrix(assemble_wave_operator(op, GRID), assemble_wave_operator(other, GRID))


def test_resolvent_solve(small_op):
    g = small_op.grid
    rhs = BlockVector.from_flat(g, np.ones(g.size, dtype=complex))
    lam = 1.2345
    out = resolvent_solve(small_op, lam, rhs, GRID).flat()
    etas = lssolver.shift_values(small_op, lam, GRID)
    assert etas[0] == pytest.approx(4.0 * 2 * lam * local_spacing(small_op, lam))
    assert np.all(np.isfinite(out))
    node = float(np.sqrt(small_op.diag[0]))
    with pytest.warns(RuntimeWarning):
        resolvent_solve(small_op, node, rhs, LAMBDA)
    with pytest.raises(SingularNodeError):
        resolvent_solve(small_op, node, rhs, PV)
    with pytest.raises(DomainError):
        resolvent_solve(small_op, -1.0, rhs, GRID)


def test_shell_mask_contains_label(small_op):
    for a in (0, 40, small_op.size - 1):
        mask = shell_mask(small_op, float(np.sqrt(small_op.diag[a])))
        assert mask[a]


def test_label_range_checks(small_op):
    with pytest.raises(DomainError):
        solve_ls(small_op, "e", small_op.grid.n_field)
    with pytest.raises(DomainError):
        solve_ls(small_op, "x", 0)


def test_dense_cap(small_op):
    op = OperatorHandle(small_op.model, small_op.grid, dense_cap=10)
    with pytest.raises(DenseCapError):
        assemble_wave_operator(op, GRID, method="dense")
    W = assemble_wave_operator(op.scaled(0.1), GRID)  # auto falls back to GMRES
    assert W.unitarity_defect < 1e-2


def test_failures_are_aggregated(small_op, monkeypatch):
    def boom(self, r, rhs, context):
        raise SolverError("singular", context)
    monkeypatch.setattr(lssolver._System, "solve", boom)
    with pytest.raises(SolverError, match="label solves failed") as info:
        assemble_wave_operator(small_op, GRID)
    assert len(info.value.detail["failed"]) > 0


def test_report_fields(small_op):
    rep = assemble_wave_operator(small_op.scaled(0.1), GRID).report()
    for key in ("unitarity_defect", "completeness_defect", "conjugation_defect", "max_residual", "sign"):
        assert key in rep
    assert rep["sign"] == PLUS


def test_conjugation_defect_tracks_full_residual(small_op):
    W = assemble_wave_operator(small_op.scaled(0.1), GRID)
    assert W.conjugation_defect <= 10 * W.shell_residuals.max()


def test_pv_split_eigen_residual(small_op):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        W = assemble_wave_operator(small_op.scaled(0.1), PV)
    assert W.unitarity_defect < 2e-2
