"""
Physical outputs: electric-field mode coefficients at exterior points, the
two-family spectral inventory and the bulk-relation diagnostic.

Outside the medium the field is ``E(r) = -eps0**-0.5 sum_kappa w_kappa omega phi_kappa(r) q_kappa``.
Expanding ``q`` on the coupled eigenfunctions gives, for a mode ``a`` of
frequency ``lam_a``, the coefficient

    C_a(r) = lam_a**-0.5 * sum_kappa w_kappa beta_kappa(r) u_a(kappa),
    beta_kappa(r) = -sqrt(hbar / (2 eps0)) omega_kappa phi_kappa(r),

which is a density with respect to the mode measure (``w_a`` on the grid).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import DomainError, InteriorPointError, ValidationError
from .lssolver import PolaritonEigenfunction, WaveOperatorMatrix
from .model import MediumModel, PhysicalConstants, epsilon_imag
from .operator import OperatorHandle
from .perturbation import KernelQuadrature, green_vacuum, near_field_F
from .quadrature import MINUS, PLUS
from .spectral import SpectralGrid

__all__ = [
    "FieldModeMap",
    "SpectralReport",
    "BulkIdentityResult",
    "check_exterior",
    "efield_mode_map",
    "free_field_coefficients",
    "first_order_field_kernel",
    "bulk_identity_residual",
    "spectral_report",
    "solution_matrix",
]

CSV_FORMAT = "%.16e"


def check_exterior(model: MediumModel, points) -> np.ndarray:
    """Return the points as an (n, 3) array; raise listing every row inside a voxel."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise ValidationError("points must have three coordinates")
    inside = np.flatnonzero(model.locate(pts) >= 0)
    if inside.size:
        raise InteriorPointError(f"points inside the medium at rows {inside.tolist()}", inside.tolist())
    return pts


def solution_matrix(grid: SpectralGrid, solutions) -> np.ndarray:
    """
    Symmetrized-coordinate columns for every grid label.

    Accepts a :class:`WaveOperatorMatrix` or a sequence of eigenfunctions
    covering the grid; missing labels are an error.
    """
    if isinstance(solutions, WaveOperatorMatrix):
        if solutions.matrix.shape != (grid.size, grid.size):
            raise ValidationError("wave operator does not match the grid")
        return solutions.matrix
    W = np.zeros((grid.size, grid.size), complex)
    seen = np.zeros(grid.size, bool)
    for sol in solutions:
        W[:, sol.global_index] = sol.weighted
        seen[sol.global_index] = True
    if not seen.all():
        missing = np.flatnonzero(~seen)
        raise ValidationError(f"solutions missing for labels {missing.tolist()}")
    return W


def _beta_weighted(grid: SpectralGrid, points, constants: PhysicalConstants):
    """``sqrt(w_kappa) beta_kappa(r)``, shape (P, n_field, 3)."""
    phi = grid.basis_at(points)
    pref = -np.sqrt(constants.hbar / (2 * constants.eps0)) * grid.omega * np.sqrt(grid.field_weight)
    return pref[None, :, None] * phi


@dataclass
class FieldModeMap:
    """
    Mode coefficients ``C_a(r)`` at exterior points, split by family.

    ``coeff_e`` has shape (P, n_field, 3) and ``coeff_m`` (P, n_medium, 3).
    """

    points: np.ndarray
    coeff_e: np.ndarray
    coeff_m: np.ndarray
    grid: SpectralGrid
    metadata: dict = field(default_factory=dict)

    @property
    def coefficients(self) -> np.ndarray:
        """All modes, field modes first."""
        return np.concatenate([self.coeff_e, self.coeff_m], axis=1)

    def family_arrays(self):
        """Family contributions padded to the full mode axis; they sum to :attr:`coefficients`."""
        zeros_e = np.zeros_like(self.coeff_e)
        zeros_m = np.zeros_like(self.coeff_m)
        return (np.concatenate([self.coeff_e, zeros_m], axis=1),
                np.concatenate([zeros_e, self.coeff_m], axis=1))

    def family_norms(self) -> dict:
        """Measure-weighted L2 size of each family per point."""
        g = self.grid
        ne = np.sqrt(np.einsum("a,pai->p", g.field_weight, np.abs(self.coeff_e) ** 2))
        nm = np.sqrt(np.einsum("a,pai->p", g.medium_weight, np.abs(self.coeff_m) ** 2))
        return {"e": ne, "m": nm}

    def rows(self):
        g = self.grid
        for p, pt in enumerate(self.points):
            for a in range(g.n_field):
                ik, it, ie, sg, pa = g.field_indices(a)
                yield (p, pt, "e", a, g.omega[a], f"{ik}:{it}:{ie}:{sg:+d}:{pa}", self.coeff_e[p, a])
            for a in range(g.n_medium):
                inu, vox, j = g.medium_indices(a)
                yield (p, pt, "m", a, g.nu[a], f"{inu}:{vox}:{j}", self.coeff_m[p, a])

    def to_csv(self, path, header_comment: str = "") -> int:
        """One row per point and mode; returns the number of data rows."""
        fmt = lambda x: CSV_FORMAT % x
        n = 0
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["point", "x", "y", "z", "family", "mode", "frequency", "label",
                        "re_x", "im_x", "re_y", "im_y", "re_z", "im_z"])
            for p, pt, fam, a, freq, label, c in self.rows():
                vals = [v for z in c for v in (z.real, z.imag)]
                w.writerow([p, *map(fmt, pt), fam, a, fmt(freq), label, *map(fmt, vals)])
                n += 1
        return n

    def sidecar(self) -> dict:
        g = self.grid
        out = dict(self.metadata)
        out.update({"n_points": int(len(self.points)), "n_field": int(g.n_field), "n_medium": int(g.n_medium),
                    "grid": json.loads(g.to_json())})
        return out

    def write_sidecar(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @staticmethod
    def read_csv(path):
        """Read back ``(point, family, mode, coefficient)`` arrays from :meth:`to_csv` output."""
        rows = []
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        reader = csv.DictReader(lines)
        for row in reader:
            c = np.array([complex(float(row[f"re_{ax}"]), float(row[f"im_{ax}"])) for ax in "xyz"])
            rows.append((int(row["point"]), row["family"], int(row["mode"]), c))
        return rows


def efield_mode_map(op: OperatorHandle, solutions, points, sign: Optional[int] = None) -> FieldModeMap:
    """
    Coefficients of the exterior electric field on every coupled mode.

    ``solutions`` is a :class:`WaveOperatorMatrix` or a full list of
    eigenfunctions. Points inside any voxel are rejected.
    """
    g = op.grid
    constants = op.model.constants
    pts = check_exterior(op.model, points)
    W = solution_matrix(g, solutions)
    b = _beta_weighted(g, pts, constants)
    # sum over field labels of sqrt(w) beta psi~, then undo the symmetrization of the mode index
    raw = np.einsum("pki,ka->pai", b, W[: g.n_field, :])
    scale = 1.0 / (np.sqrt(g.frequencies) * op.sqrt_w)
    coeff = raw * scale[None, :, None]
    if sign is None:
        sign = solutions.sign if isinstance(solutions, WaveOperatorMatrix) else (
            solutions[0].sign if len(solutions) else PLUS)
    meta = {"sign": int(sign), "coupling_scale": op.coupling_scale, "k_max": g.config.k_max,
            "nu_max": g.config.nu_max, "nu_lo": g.config.nu_lo, "n_voxels": op.model.n_voxels,
            "h": op.model.h, "unit_system": constants.unit_system}
    return FieldModeMap(pts, coeff[:, : g.n_field], coeff[:, g.n_field:], g, meta)


def free_field_coefficients(grid: SpectralGrid, points, constants: PhysicalConstants = PhysicalConstants()):
    """Vacuum coefficients ``-sqrt(hbar w / (2 eps0)) phi_kappa(r)``, shape (P, n_field, 3)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    pref = -np.sqrt(constants.hbar * grid.omega / (2 * constants.eps0))
    return pref[None, :, None] * grid.basis_at(pts)


def first_order_field_kernel(model: MediumModel, nu: float, r_src, r, sign: int = PLUS,
                             quad: KernelQuadrature = KernelQuadrature()) -> np.ndarray:
    """
    ``sqrt(hbar mu0 / (pi c**2)) nu**2 eps_i(nu, r')**0.5 (G0 + F_nf)``.

    ``r_src`` must lie in the medium and ``r`` outside it. Row ``j`` is the
    field vector produced by a medium oscillator of orientation ``j`` at ``r_src``.
    """
    k = model.constants
    idx = int(model.locate(r_src)[0])
    if idx < 0:
        raise DomainError("source point lies outside the medium")
    check_exterior(model, r)
    eps_i = float(epsilon_imag(model.voxel_model(idx), nu))
    if eps_i == 0.0:
        return np.zeros((3, 3), complex)
    pref = np.sqrt(k.hbar * k.mu0 / (np.pi * k.c**2)) * nu**2 * np.sqrt(eps_i)
    return pref * (green_vacuum(nu, r_src, r, sign, quad, k) + near_field_F(nu, r_src, r, k))


@dataclass
class BulkIdentityResult:
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    ratio: float


def bulk_identity_residual(model: MediumModel, nu: float, r_a, r_b, sign: int = MINUS,
                           quad: KernelQuadrature = KernelQuadrature()) -> BulkIdentityResult:
    """
    Compare ``(nu/c)**2 int_Vm eps_i G0(r, rA)^T conj(G0(r, rB)) d^3r`` with ``Im G0(rA, rB)``.

    The volume integral is the voxel-center rule. The default ``sign=MINUS``
    selects the tensor whose imaginary part is positive semidefinite, which
    is the one for which both sides have the same sign. The relation is a
    bulk-medium statement; for a finite medium the ratio
    ``|LHS - RHS| / |RHS|`` measures how far it is from holding.
    """
    c = model.constants.c
    pts = check_exterior(model, np.vstack([r_a, r_b]))
    ra, rb = pts
    eps = model.eps_i_table([nu])[0]
    lhs = np.zeros((3, 3), complex)
    for v, center in enumerate(model.centers):
        if eps[v] == 0.0:
            continue
        ga = green_vacuum(nu, center, ra, sign, quad, model.constants)
        gb = green_vacuum(nu, center, rb, sign, quad, model.constants)
        lhs += eps[v] * model.h**3 * ga.T @ np.conj(gb)
    lhs *= (nu / c) ** 2
    rhs = green_vacuum(nu, ra, rb, sign, quad, model.constants).imag
    res = lhs - rhs
    return BulkIdentityResult(lhs, rhs, res, float(np.linalg.norm(res) / np.linalg.norm(rhs)))


@dataclass
class SpectralReport:
    """Two-family inventory of the diagonal form of the coupled operator."""

    e_modes: list
    m_modes: list
    n_field: int
    n_medium: int

    @property
    def max_residual(self) -> float:
        vals = [m["residual"] for m in self.e_modes + self.m_modes]
        return float(max(vals)) if vals else 0.0

    def frequencies(self) -> np.ndarray:
        return np.array([m["omega"] for m in self.e_modes] + [m["nu"] for m in self.m_modes])

    def to_dict(self) -> dict:
        return {"n_field": self.n_field, "n_medium": self.n_medium, "max_residual": self.max_residual,
                "e_modes": self.e_modes, "m_modes": self.m_modes}


def spectral_report(grid: SpectralGrid, solutions: Union[WaveOperatorMatrix, Sequence[PolaritonEigenfunction]]
                    ) -> SpectralReport:
    """
    Inventory of solved modes: ``(omega, kappa indices)`` for the e-family and
    ``(nu, voxel, j)`` for the m-family, with norms and eigen-residuals.
    """
    W = solution_matrix(grid, solutions)
    if isinstance(solutions, WaveOperatorMatrix):
        res = solutions.residuals
    else:
        res = np.zeros(grid.size)
        for s in solutions:
            res[s.global_index] = s.residual
    norms = np.linalg.norm(W, axis=0)
    e_modes, m_modes = [], []
    for a in range(grid.n_field):
        ik, it, ie, sg, pa = grid.field_indices(a)
        e_modes.append({"omega": float(grid.omega[a]), "ik": ik, "itheta": it, "ieta": ie, "sigma": sg,
                        "parity": pa, "norm": float(norms[a]), "residual": float(res[a])})
    for b in range(grid.n_medium):
        inu, vox, j = grid.medium_indices(b)
        a = grid.n_field + b
        m_modes.append({"nu": float(grid.nu[b]), "inu": inu, "voxel": vox, "j": j,
                        "norm": float(norms[a]), "residual": float(res[a])})
    if len(e_modes) != grid.n_field or len(m_modes) != grid.n_medium:
        raise ValidationError("family counts do not match the grid")
    return SpectralReport(e_modes, m_modes, grid.n_field, grid.n_medium)
