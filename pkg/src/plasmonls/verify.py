"""
Property battery over the solver and kernels, with a deterministic verdict.

Each check fixes its tolerance before anything is computed and returns a
:class:`CheckResult`. :func:`run_battery` runs the configured checks and
:func:`verdict_json` serializes them with sorted keys, so two runs with the
same configuration produce identical bytes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import DenseCapError
from .lssolver import RegularizationPolicy, assemble_wave_operator, shell_mask
from .model import MediumModel, voxelize
from .observables import bulk_identity_residual, efield_mode_map, free_field_coefficients
from .operator import DEFAULT_DENSE_CAP, OperatorHandle
from .perturbation import (KernelQuadrature, delta_T_quadrature, first_order_psi, kernel_L, near_field_F,
                           transverse_delta_far)
from .quadrature import MINUS, PLUS, gauss_legendre, pv_quadrature, richardson_complex_shift
from .spectral import GridConfig, build_grids

__all__ = [
    "CheckResult",
    "BatteryConfig",
    "check_zero_coupling",
    "check_orthonormality",
    "check_unitarity_refinement",
    "check_order_scaling",
    "check_kernel_identities",
    "check_delta_T",
    "check_pv_consistency",
    "check_dense_oracle",
    "check_bulk_identity",
    "smoothed_density_l1",
    "run_battery",
    "verdict_json",
]


def _clean(x):
    """Plain Python numbers/lists for JSON."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


@dataclass
class CheckResult:
    name: str
    value: object
    tol: object
    passed: bool
    trend: Optional[list] = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"value": _clean(self.value), "tol": _clean(self.tol), "pass": bool(self.passed),
               "trend": _clean(self.trend)}
        if self.detail:
            out["detail"] = _clean(self.detail)
        return out


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _grid_for(model, cfg):
    return build_grids(cfg, model)


# ---------------------------------------------------------------------------
# wave operator


def check_zero_coupling(model: MediumModel, grid_config: GridConfig, points=None, tol: float = 1e-14,
                        coeff_tol: float = 1e-12) -> CheckResult:
    """With the coupling switched off: ``W = I``, no m-family field, vacuum e-family coefficients."""
    g = _grid_for(model, grid_config)
    op = OperatorHandle(model, g).scaled(0.0)
    W = assemble_wave_operator(op)
    dev = float(np.abs(W.matrix - np.eye(g.size)).max())
    if points is None:
        points = model.centers.max(axis=0) + np.array([[1.0, 0.5, 0.25], [2.0, -1.0, 0.5]])
    fm = efield_mode_map(op, W, points)
    m_max = float(np.abs(fm.coeff_m).max())
    free = free_field_coefficients(g, fm.points, model.constants)
    e_dev = float(np.abs(fm.coeff_e - free).max() / max(np.abs(free).max(), 1e-300))
    value = {"identity_deviation": dev, "unitarity_defect": W.unitarity_defect, "m_family_max": m_max,
             "e_family_deviation": e_dev}
    ok = dev <= tol and W.unitarity_defect <= tol and m_max == 0.0 and e_dev <= coeff_tol
    return CheckResult("zero_coupling", value, {"identity": tol, "coefficients": coeff_tol}, ok)


def check_orthonormality(W, tol: float = 1e-3) -> CheckResult:
    """``|W^dagger W - I|_max`` (orthonormality) and ``|W W^dagger - I|_max`` (completeness)."""
    value = {"unitarity_defect": W.unitarity_defect, "completeness_defect": W.completeness_defect}
    ok = W.unitarity_defect <= tol and W.completeness_defect <= tol
    return CheckResult("orthonormality", value, tol, ok)


def check_unitarity_refinement(model: MediumModel, grid_config: GridConfig, coupling_scale: float = 0.1,
                               levels: int = 3, final_tol: float = 1e-3,
                               reg: RegularizationPolicy = RegularizationPolicy.grid_scaled(),
                               workers: int = 1) -> CheckResult:
    """
    Unitarity and completeness defects over ``levels`` grids, each a factor-2
    refinement of the radial and ``nu`` rules. Passes iff both decrease
    strictly at every step and end below ``final_tol``.
    """
    trend = []
    cfg = grid_config
    for _ in range(levels):
        op = OperatorHandle(model, _grid_for(model, cfg)).scaled(coupling_scale)
        W = assemble_wave_operator(op, reg, workers=workers)
        trend.append({"size": op.size, "unitarity": W.unitarity_defect, "completeness": W.completeness_defect})
        cfg = cfg.refined(2)
    u = [t["unitarity"] for t in trend]
    c = [t["completeness"] for t in trend]
    ok = _strictly_decreasing(u) and _strictly_decreasing(c) and u[-1] <= final_tol and c[-1] <= final_tol
    value = {"final_unitarity": u[-1], "final_completeness": c[-1]}
    return CheckResult("unitarity_refinement", value, {"final": final_tol, "trend": "strictly decreasing"}, ok,
                       trend)


def _first_order_matrix(op, reg):
    g = op.grid
    cols = [first_order_psi(op, "e", a, reg).weighted for a in range(g.n_field)]
    cols += [first_order_psi(op, "m", b, reg).weighted for b in range(g.n_medium)]
    return np.stack(cols, axis=1)


def check_order_scaling(model: MediumModel, grid_config: GridConfig, scales: Sequence[float] = (0.1, 0.05, 0.025),
                        slope_range=(1.9, 2.1), reg: RegularizationPolicy = RegularizationPolicy.grid_scaled(),
                        workers: int = 1) -> CheckResult:
    """
    ``|Psi_full(s) - Psi_first(s)|_F`` over all labels against the coupling
    scale ``s``; passes iff the log-log slope lies in ``slope_range`` and the
    errors decrease with ``s``. A zero scale must give an exact zero.
    """
    g = _grid_for(model, grid_config)
    base = OperatorHandle(model, g)
    errs = []
    for s in scales:
        op = base.scaled(s)
        W = assemble_wave_operator(op, reg, workers=workers).matrix
        errs.append(float(np.linalg.norm(W - _first_order_matrix(op, reg))))
    pairs = [(s, e) for s, e in zip(scales, errs) if s > 0]
    zero_ok = all(e <= 1e-14 for s, e in zip(scales, errs) if s == 0)
    slope = float("nan")
    if len(pairs) >= 2 and all(e > 0 for _, e in pairs):
        ls, le = np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs])
        slope = float(np.polyfit(ls, le, 1)[0])
    order = np.argsort([-p[0] for p in pairs])
    monotone = _strictly_decreasing([pairs[i][1] for i in order])
    ok = zero_ok and monotone and slope_range[0] <= slope <= slope_range[1]
    trend = [{"scale": s, "error": e} for s, e in zip(scales, errs)]
    return CheckResult("order_scaling", {"slope": slope}, {"slope_range": list(slope_range)}, ok, trend,
                       {"monotone": monotone, "size": g.size})


# ---------------------------------------------------------------------------
# kernels


def _sample_pairs(model: MediumModel, n_pairs: int, rng, d_lo: float, d_hi: float):
    """Seeded (source in medium, exterior target) pairs with separations in [d_lo, d_hi]."""
    pairs = []
    while len(pairs) < n_pairs:
        src = model.centers[rng.integers(model.n_voxels)]
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        d = rng.uniform(d_lo, d_hi)
        tgt = src + d * direction
        if model.locate(tgt)[0] < 0:
            pairs.append((src, tgt, d))
    return pairs


def check_kernel_identities(model: MediumModel, seed: int = 42, n_pairs: int = 4, nu_range=(0.5, 2.0),
                            tol: float = 1e-6, quad: KernelQuadrature = KernelQuadrature()) -> CheckResult:
    """
    Direct quadrature of ``L`` against ``(nu/c)**2 (G0 + F_nf)`` at seeded
    pairs with separations in ``[2 h, 10 h]``, both signs.
    """
    rng = np.random.default_rng(seed)
    h = model.h
    pairs = _sample_pairs(model, n_pairs, rng, 2 * h, 10 * h)
    errs, traces = [], []
    for src, tgt, d in pairs:
        nu = float(rng.uniform(*nu_range))
        for sign in (PLUS, MINUS):
            a = kernel_L(nu, src, tgt, "direct", sign, quad, model.constants)
            b = kernel_L(nu, src, tgt, "decomposed", sign, quad, model.constants)
            errs.append(float(np.abs(a - b).max() / np.abs(b).max()))
        traces.append(abs(float(np.trace(near_field_F(nu, src, tgt, model.constants)))))
    value = {"max_rel_diff": max(errs), "max_F_trace": max(traces)}
    ok = max(errs) <= tol and max(traces) <= 1e-12 * max(1.0, 1 / h**3)
    return CheckResult("kernel_L_paths", value, tol, ok, errs)


def check_delta_T(model: MediumModel, seed: int = 42, n_pairs: int = 4, tol: float = 1e-3,
                  kd_min: float = 50.0) -> CheckResult:
    """
    Windowed ``int g dw`` against the closed-form far part of the transverse
    delta, with ``k_max`` fixed so that ``k_max d >= kd_min`` at the smallest
    separation ``2 h``. The same pairs at half that ``k_max`` are reported as
    the cutoff control.
    """
    rng = np.random.default_rng(seed + 1)
    h = model.h
    k_max = kd_min / (2 * h)
    pairs = _sample_pairs(model, n_pairs, rng, 2 * h, 10 * h)
    errs, coarse = [], []
    for src, tgt, d in pairs:
        exact = transverse_delta_far(tgt - src)
        scale = np.abs(exact).max()
        q = delta_T_quadrature(src, tgt, KernelQuadrature(k_max=k_max), model.constants)
        errs.append(float(np.abs(q - exact).max() / scale))
        q2 = delta_T_quadrature(src, tgt, KernelQuadrature(k_max=k_max / 2), model.constants)
        coarse.append(float(np.abs(q2 - exact).max() / scale))
    value = {"max_rel_error": max(errs), "half_kmax_max_rel_error": max(coarse), "k_max": k_max}
    return CheckResult("delta_T_far", value, tol, max(errs) <= tol, errs, {"half_kmax": coarse})


def check_pv_consistency(seed: int = 42, n_cases: int = 4, tol: float = 1e-4, n_nodes: int = 64) -> CheckResult:
    """Complex-shift extrapolation against the PV + delta split for Gaussian integrands."""
    rng = np.random.default_rng(seed + 2)
    rule = gauss_legendre(n_nodes, 0.0, 6.0)
    errs = []
    for _ in range(n_cases):
        center, width = rng.uniform(1.5, 4.5), rng.uniform(0.4, 1.0)
        lam = float(rng.uniform(1.0, 5.0))
        f = lambda w, c0=center, s0=width: np.exp(-0.5 * ((w - c0) / s0) ** 2)
        for sign in (PLUS, MINUS):
            a = richardson_complex_shift(f, lam, rule.a, rule.b, sign)
            b = pv_quadrature(f(rule.nodes), lam, rule, sign)
            errs.append(float(abs(a - b) / abs(b)))
    return CheckResult("pv_consistency", {"max_rel_diff": max(errs)}, tol, max(errs) <= tol, errs)


# ---------------------------------------------------------------------------
# dense oracle


def smoothed_density_l1(a, b, sigma: float) -> float:
    """``int |rho_a - rho_b| / int rho_b`` for Gaussian-smoothed point sets."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    lo = min(a.min(), b.min()) - 8 * sigma
    hi = max(a.max(), b.max()) + 8 * sigma
    x = np.linspace(lo, hi, 8001)

    def rho(p):
        return np.exp(-0.5 * ((x[:, None] - p[None, :]) / sigma) ** 2).sum(axis=1) / (math.sqrt(2 * math.pi) * sigma)

    ra, rb = rho(a), rho(b)
    return float(np.trapezoid(np.abs(ra - rb), x) / np.trapezoid(rb, x))


def check_dense_oracle(model: MediumModel, grid_config: GridConfig, coupling_scale: float = 1.0,
                       dense_cap: int = 500, seed: int = 42, density_tol: float = 0.02,
                       neg_tol: float = 1e-8, two_point_tol: float = 1e-3, residual_tol: float = 1e-6,
                       projector_tol: float = 1e-6) -> CheckResult:
    """
    Brute-force comparison with the dense eigendecomposition of ``Omega**2``.

    (a) smallest eigenvalue ``>= -neg_tol |M|``;
    (b) Gaussian-smoothed density of ``sqrt(eig)`` against the LS inventory,
        with ``sigma`` the mean spacing of the distinct uncoupled frequencies;
    (c) exterior two-point function ``sum_a w_a C_a C_a^dagger`` from the
        outgoing wave operator against the dense ``M**-1/2`` field block;
    (d) eigen-residuals of the extrapolated complex-shift solutions;
    (e) those solutions against the resolvent reconstruction
        ``G[:, S] G[S, S]**-1 e_a`` (``S`` the label's shell).
    """
    g = _grid_for(model, grid_config)
    if g.size > dense_cap:
        raise DenseCapError(f"dense oracle limited to {dense_cap} labels, grid has {g.size}")
    op = OperatorHandle(model, g, dense_cap=max(dense_cap, DEFAULT_DENSE_CAP)).scaled(coupling_scale)
    M = op.dense()
    ev, U = np.linalg.eigh(M)
    norm = float(np.abs(ev).max())
    min_ok = ev.min() >= -neg_tol * norm

    lam_ls = np.sqrt(op.diag)
    shells = np.unique(np.round(lam_ls, 12))
    sigma = float((shells.max() - shells.min()) / max(len(shells) - 1, 1))
    l1 = smoothed_density_l1(np.sqrt(np.clip(ev, 0.0, None)), lam_ls, sigma)

    rng = np.random.default_rng(seed + 3)
    ext = model.centers.max(axis=0) + model.h + rng.uniform(0.2, 1.0, size=(2, 3))
    W_out = assemble_wave_operator(op, RegularizationPolicy.grid_scaled())
    fm = efield_mode_map(op, W_out, ext)
    co = fm.coefficients
    modes = np.einsum("a,pai,paj->pij", g.weights, co, co.conj())
    beta = (-math.sqrt(model.constants.hbar / (2 * model.constants.eps0)) * g.omega
            * np.sqrt(g.field_weight))[None, :, None] * g.basis_at(ext)
    if ev.min() > 0:
        Mi = (U / np.sqrt(ev)) @ U.T
        dense = np.einsum("pki,kl,plj->pij", beta, Mi[: g.n_field, : g.n_field], beta)
        two_point = float(np.abs(modes - dense).max() / np.abs(dense).max())
    else:
        two_point = float("inf")

    W_ls = assemble_wave_operator(op, RegularizationPolicy())
    res = float(W_ls.residuals.max())
    proj = 0.0
    for a in rng.choice(g.size, size=min(6, g.size), replace=False):
        lam = lam_ls[a]
        S = np.flatnonzero(shell_mask(op, lam))
        # a tiny offset keeps G finite when a shell combination decouples from the medium exactly
        G = (U / (ev - lam * lam * (1 + 1e-10j))) @ U.T
        rhs = (S == a).astype(float)
        psi = G[:, S] @ np.linalg.solve(G[np.ix_(S, S)], rhs)
        proj = max(proj, float(np.abs(psi - W_ls.matrix[:, a]).max()))

    value = {"min_eigenvalue": float(ev.min()), "norm": norm, "density_l1": l1, "sigma": sigma,
             "two_point_rel": two_point, "max_residual": res, "projector_max_diff": proj}
    tol = {"negativity": neg_tol, "density_l1": density_tol, "two_point_rel": two_point_tol,
           "residual": residual_tol, "projector": projector_tol}
    ok = (min_ok and l1 <= density_tol and two_point <= two_point_tol and res <= residual_tol
          and proj <= projector_tol)
    return CheckResult("dense_oracle", value, tol, bool(ok), None, {"size": g.size})


# ---------------------------------------------------------------------------
# bulk relation


def check_bulk_identity(dielectric, h: float, sides: Sequence[float], nu: float = 1.0, offset: float = 1.5,
                        min_ratio: float = 0.5) -> CheckResult:
    """
    Bulk Green-tensor relation for cubes of growing side: passes iff the
    smallest cube violates it by at least ``min_ratio`` and the violation
    ratio decreases strictly with size.
    """
    trend = []
    for side in sides:
        model = voxelize({"kind": "box", "size": (side, side, side)}, h, dielectric)
        ra = np.array([0.5 * side + offset, 0.0, 0.0])
        rb = ra + np.array([0.0, 0.3, 0.0])
        r = bulk_identity_residual(model, nu, ra, rb)
        trend.append({"side": side, "n_voxels": model.n_voxels, "ratio": r.ratio})
    ratios = [t["ratio"] for t in trend]
    ok = ratios[0] >= min_ratio and _strictly_decreasing(ratios)
    return CheckResult("bulk_identity", {"ratios": ratios}, {"min_ratio": min_ratio, "trend": "strictly decreasing"},
                       ok, trend)


# ---------------------------------------------------------------------------
# battery


@dataclass
class BatteryConfig:
    """Everything :func:`run_battery` needs; see the CLI config for the file form."""

    model: MediumModel
    grid: GridConfig
    dense_grid: GridConfig
    weak_scale: float = 0.1
    dense_scale: float = 1.0
    order_scales: tuple = (0.1, 0.05, 0.025)
    refinement_levels: int = 3
    unitarity_tol: float = 1e-3
    seed: int = 42
    n_pairs: int = 4
    bulk_dielectric: object = None
    bulk_sides: tuple = ()
    workers: int = 1
    checks: tuple = ("zero_coupling", "unitarity_refinement", "order_scaling", "kernel_L_paths", "delta_T_far",
                     "pv_consistency", "dense_oracle", "bulk_identity")


def run_battery(cfg: BatteryConfig) -> dict:
    """Run the selected checks in name order; returns ``{name: CheckResult}``."""
    runners = {
        "zero_coupling": lambda: check_zero_coupling(cfg.model, cfg.dense_grid),
        "unitarity_refinement": lambda: check_unitarity_refinement(
            cfg.model, cfg.grid, cfg.weak_scale, cfg.refinement_levels, cfg.unitarity_tol, workers=cfg.workers),
        "order_scaling": lambda: check_order_scaling(cfg.model, cfg.grid, cfg.order_scales, workers=cfg.workers),
        "kernel_L_paths": lambda: check_kernel_identities(cfg.model, cfg.seed, cfg.n_pairs),
        "delta_T_far": lambda: check_delta_T(cfg.model, cfg.seed, cfg.n_pairs),
        "pv_consistency": lambda: check_pv_consistency(cfg.seed),
        "dense_oracle": lambda: check_dense_oracle(cfg.model, cfg.dense_grid, cfg.dense_scale, seed=cfg.seed),
        "bulk_identity": lambda: check_bulk_identity(cfg.bulk_dielectric or cfg.model.dielectric, cfg.model.h,
                                                     cfg.bulk_sides or (cfg.model.h, 2 * cfg.model.h,
                                                                        3 * cfg.model.h)),
    }
    unknown = set(cfg.checks) - set(runners)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    return {name: runners[name]() for name in sorted(cfg.checks)}


def verdict_json(results: dict) -> str:
    payload = {name: res.to_dict() for name, res in sorted(results.items())}
    payload["all_pass"] = all(r.passed for r in results.values())
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
