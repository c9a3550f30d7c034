"""
Lippmann-Schwinger solves for the coupled eigenfunctions.

For a label ``a`` with uncoupled frequency ``lam`` the coupled eigenfunction solves

    psi = phi_a - R0(lam) V psi,    R0(lam) = (Omega0**2 - lam**2 + sign * i0)**-1 .

Everything is done in symmetrized coordinates (``x~ = W**(1/2) x``) where
``phi_a`` is the unit vector ``e_a``.

Two realizations of ``+/- i0`` are provided.

``complex_shift``
    ``R0`` is evaluated at ``eta = eta_rel * lam**2`` for each entry of the
    list and the solutions are extrapolated to ``eta -> 0`` (Neville). The
    labels sharing the frequency ``lam`` (the singular shell, which contains
    ``a`` itself) are removed from the range of ``R0``: on a grid that shell
    is a set of isolated points where the resolvent has a genuine pole,
    whereas in the continuum it carries zero measure. The result is the
    grid's standing-wave solution; it satisfies the eigen-equation exactly on
    every row outside the shell, and the columns form a wave-operator matrix
    whose unitarity defect vanishes under grid refinement.

``pv_split``
    ``R0`` acts through quadrature-effective weights: principal value by
    singularity subtraction along the radial (``w``) and ``nu`` rules plus the
    delta term ``-sign * i pi / (2 lam)`` placed through the interpolation row
    at ``lam`` (the nearest shell when ``lam`` is a node). The resulting
    blocks are in effective form: sums against smooth functions with the
    grid weights reproduce the continuum integrals including the on-shell
    term.

With ``eta_scale="grid"`` the complex shift is instead tied to the local node
spacing ``D`` (the quadrature weight of the nearest radial or ``nu`` node):
``eta = eta_rel * 2 lam D``. The Lorentzian is then resolved by the grid and
the shell is kept; as the grid is refined ``eta -> 0`` and the columns tend
to the continuum outgoing (``PLUS``) or incoming (``MINUS``) waves, which is
what the unitarity of the wave operator refers to. Standing waves are not
normalized that way: their discrete norm grows under refinement.
"""
from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .exceptions import DomainError, ShapeMismatchError, SolverError, ValidationError
from .operator import BlockVector, OperatorHandle
from .quadrature import MINUS, PLUS, neville_zero, pv_weights

log = logging.getLogger(__name__)

__all__ = [
    "RegularizationPolicy",
    "PolaritonEigenfunction",
    "WaveOperatorMatrix",
    "ScatteringMatrix",
    "effective_resolvent",
    "resolvent_solve",
    "solve_ls",
    "born_series",
    "assemble_wave_operator",
    "scattering_matrix",
    "shell_mask",
    "global_index",
    "local_spacing",
    "shift_values",
    "wave_operator_column",
]

SHELL_RTOL = 1e-12
TIE_BREAK = 1e-9


@dataclass(frozen=True)
class RegularizationPolicy:
    """How ``+/- i0`` is realized; ``sign=PLUS`` means ``+i0`` in the resolvent."""

    variant: str = "complex_shift"
    sign: int = PLUS
    eta_rel: tuple = (1e-2, 1e-3, 1e-4)
    eta_scale: str = "lambda"

    def __post_init__(self):
        if self.variant not in ("complex_shift", "pv_split"):
            raise ValidationError(f"unknown regularization {self.variant!r}")
        if self.eta_scale not in ("lambda", "grid"):
            raise ValidationError(f"unknown eta scale {self.eta_scale!r}")
        if self.sign not in (PLUS, MINUS):
            raise ValidationError("sign must be +1 or -1")
        eta = np.asarray(self.eta_rel, dtype=float)
        if self.variant == "complex_shift":
            if eta.size < 2 or np.any(eta <= 0) or np.any(np.diff(eta) >= 0):
                raise ValidationError("eta list must be positive, strictly decreasing, length >= 2")
        object.__setattr__(self, "eta_rel", tuple(float(e) for e in eta))

    def flipped(self) -> "RegularizationPolicy":
        return RegularizationPolicy(self.variant, -self.sign, self.eta_rel, self.eta_scale)

    @classmethod
    def grid_scaled(cls, sign: int = PLUS, eta_rel=(4.0, 2.0)) -> "RegularizationPolicy":
        """Complex shift in units of the local node spacing (continuum in/outgoing waves)."""
        return cls("complex_shift", sign, tuple(eta_rel), "grid")


@dataclass
class PolaritonEigenfunction:
    """
    Coupled generalized eigenfunction of one family.

    ``blocks`` holds continuum values (``phi_a`` is ``e_a / W_a``);
    ``weighted`` holds the symmetrized coordinates (``phi_a`` is ``e_a``).
    """

    family: str
    index: int
    global_index: int
    eigenvalue: float
    blocks: BlockVector
    weighted: np.ndarray
    sign: int
    variant: str
    residual: float = float("nan")
    shell_residual: float = float("nan")
    info: dict = field(default_factory=dict)


@dataclass
class WaveOperatorMatrix:
    """Columns are the solved eigenfunctions in symmetrized coordinates."""

    matrix: np.ndarray
    frequencies: np.ndarray
    sign: int
    variant: str
    residuals: np.ndarray
    shell_residuals: np.ndarray
    n_field: int
    unitarity_defect: float
    completeness_defect: float
    conjugation_defect: float

    @property
    def n_medium(self) -> int:
        return len(self.frequencies) - self.n_field

    def report(self) -> dict:
        return {
            "size": int(len(self.frequencies)),
            "n_field": int(self.n_field),
            "n_medium": int(self.n_medium),
            "sign": int(self.sign),
            "variant": self.variant,
            "unitarity_defect": float(self.unitarity_defect),
            "completeness_defect": float(self.completeness_defect),
            "conjugation_defect": float(self.conjugation_defect),
            "max_residual": float(np.max(self.residuals)),
            "max_shell_residual": float(np.max(self.shell_residuals)),
        }


@dataclass
class ScatteringMatrix:
    matrix: np.ndarray
    unitarity_defect: float
    off_shell_max: float


# ---------------------------------------------------------------------------
# helpers


def global_index(op: OperatorHandle, family: str, index: int) -> int:
    g = op.grid
    if family == "e":
        if not 0 <= index < g.n_field:
            raise DomainError(f"field label {index} outside the grid")
        return int(index)
    if family == "m":
        if not 0 <= index < g.n_medium:
            raise DomainError(f"medium label {index} outside the grid")
        return g.n_field + int(index)
    raise DomainError(f"unknown family {family!r}")


def shell_mask(op: OperatorHandle, lam: float) -> np.ndarray:
    """Labels whose uncoupled frequency equals ``lam`` (the singular shell)."""
    lam2 = lam * lam
    return np.abs(op.diag - lam2) <= SHELL_RTOL * max(lam2, 1e-300)


def _pv_resolvent(op: OperatorHandle, lam: float, sign: int, allow_node: bool) -> np.ndarray:
    g = op.grid
    wf = pv_weights(g.omega_rule, lam, sign, allow_node) / g.omega_rule.weights
    wm = pv_weights(g.nu_rule, lam, sign, allow_node) / g.nu_rule.weights
    return np.concatenate([wf[g.f_ik], wm[g.m_inu]])


def local_spacing(op: OperatorHandle, lam: float) -> float:
    """Quadrature weight of the node nearest ``lam`` in the radial and ``nu`` rules (largest)."""
    g = op.grid
    best = 0.0
    for rule in (g.omega_rule, g.nu_rule):
        if rule.a <= lam <= rule.b:
            best = max(best, float(rule.weights[np.abs(rule.nodes - lam).argmin()]))
    if best == 0.0:
        best = min(float(r.weights[np.abs(r.nodes - lam).argmin()]) for r in (g.omega_rule, g.nu_rule))
    return best


def shift_values(op: OperatorHandle, lam: float, reg: RegularizationPolicy) -> list:
    """The ``eta`` list used at ``lam``."""
    if reg.eta_scale == "grid":
        return [e * 2 * lam * local_spacing(op, lam) for e in reg.eta_rel]
    return [e * lam * lam for e in reg.eta_rel]


def _exclusion(op, lam, reg):
    return shell_mask(op, lam) if reg.eta_scale == "lambda" else None


def _shift_resolvent(op: OperatorHandle, lam: float, eta: float, sign: int, exclude: np.ndarray):
    r = 1.0 / (op.diag - lam * lam + sign * 1j * eta)
    if exclude is not None:
        r[exclude] = 0.0
    return r


def effective_resolvent(op: OperatorHandle, lam: float, reg: RegularizationPolicy,
                        exclude_shell: bool = True) -> np.ndarray:
    """
    Diagonal factor ``R0(lam)`` per label as used by the solvers.

    Under ``complex_shift`` this is the Neville extrapolation of the shifted
    resolvents (shell excluded); under ``pv_split`` the effective-weight ratios.
    """
    if reg.variant == "pv_split":
        return _pv_resolvent(op, lam, reg.sign, allow_node=True)
    excl = _exclusion(op, lam, reg) if exclude_shell else None
    etas = shift_values(op, lam, reg)
    return neville_zero(etas, [_shift_resolvent(op, lam, e, reg.sign, excl) for e in etas])


def resolvent_solve(op: OperatorHandle, lam: float, rhs: BlockVector, reg: RegularizationPolicy) -> BlockVector:
    """
    Apply ``R0(lam)`` to a block vector.

    ``complex_shift`` divides elementwise by ``(d - lam**2 + sign i eta)`` and
    extrapolates over the eta list; a ``lam`` sitting exactly on a node is moved
    by a relative 1e-9 with a warning. ``pv_split`` refuses such a ``lam``.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if not rhs.conforms(op.grid):
        raise ShapeMismatchError("right-hand side does not conform to the grid")
    x = rhs.flat()
    if reg.variant == "pv_split":
        r = _pv_resolvent(op, lam, reg.sign, allow_node=False)
        return BlockVector.from_flat(op.grid, r * x)
    if reg.eta_scale == "lambda" and shell_mask(op, lam).any():
        warnings.warn(f"lambda={lam!r} coincides with a grid node; perturbed by {TIE_BREAK} relative",
                      RuntimeWarning, stacklevel=2)
        lam = lam * (1 + TIE_BREAK)
    etas = shift_values(op, lam, reg)
    vals = [x * _shift_resolvent(op, lam, e, reg.sign, None) for e in etas]
    return BlockVector.from_flat(op.grid, neville_zero(etas, vals))


# ---------------------------------------------------------------------------
# shell solves


class _System:
    """Dense symmetrized coupling when under the cap, matrix-free otherwise."""

    def __init__(self, op: OperatorHandle, method: str = "auto"):
        self.op = op
        if method == "auto":
            method = "dense" if op.size <= op.dense_cap else "iterative"
        self.method = method
        self.Vt = op.dense_coupling() if method == "dense" else None

    def apply_V(self, x):
        if self.Vt is not None:
            return self.Vt @ x
        if x.ndim == 1:
            return self.op.coupling_sym(x)
        return np.stack([self.op.coupling_sym(col) for col in x.T], axis=1)

    def solve(self, r: np.ndarray, rhs: np.ndarray, context: dict) -> np.ndarray:
        n = len(r)
        if self.Vt is not None:
            A = np.eye(n, dtype=complex) + r[:, None] * self.Vt
            try:
                lu = sla.lu_factor(A, check_finite=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SolverError(f"LS system factorization failed: {exc}", context) from exc
            if np.any(np.abs(np.diag(lu[0])) < 1e-14 * np.abs(np.diag(lu[0])).max()):
                cond = float(np.linalg.cond(A))
                raise SolverError(f"singular LS system (condition estimate {cond:.3e})",
                                  dict(context, condition=cond))
            return sla.lu_solve(lu, rhs)
        out = np.empty(rhs.shape, dtype=complex)
        lin = LinearOperator((n, n), matvec=lambda x: x + r * self.op.coupling_sym(x), dtype=complex)
        for c in range(rhs.shape[1]):
            trace = []
            sol, info = gmres(lin, rhs[:, c], rtol=1e-13, atol=0.0, restart=min(n, 200), maxiter=50,
                              callback=lambda res: trace.append(float(res)), callback_type="pr_norm")
            if info != 0:
                raise SolverError(f"GMRES did not converge (info={info})",
                                  dict(context, column=c, iteration_trace=trace[-20:]))
            out[:, c] = sol
        return out


def _solve_shell(system: _System, lam: float, columns: Sequence[int], reg: RegularizationPolicy):
    op = system.op
    n = op.size
    rhs = np.zeros((n, len(columns)), dtype=complex)
    rhs[list(columns), np.arange(len(columns))] = 1.0
    context = {"lambda": lam, "labels": list(map(int, columns))}
    if reg.variant == "pv_split":
        return system.solve(_pv_resolvent(op, lam, reg.sign, allow_node=True), rhs, context)
    excl = _exclusion(op, lam, reg)
    etas = shift_values(op, lam, reg)
    sols = [system.solve(_shift_resolvent(op, lam, eta, reg.sign, excl), rhs, context) for eta in etas]
    return neville_zero(etas, sols)


def _residuals(system: _System, lam: float, psi: np.ndarray):
    """Eigen-residual norms (outside the shell, and including it) per column."""
    op = system.op
    res = op.diag[:, None] * psi + system.apply_V(psi) - lam * lam * psi
    norm = np.linalg.norm(psi, axis=0)
    excl = shell_mask(op, lam)
    full = np.linalg.norm(res, axis=0) / norm
    off = np.linalg.norm(res[~excl], axis=0) / norm
    return off, full


def _make_eigenfunction(op, a, lam, psi_t, reg, off, full, info=None):
    g = op.grid
    family = "e" if a < g.n_field else "m"
    index = a if family == "e" else a - g.n_field
    cont = psi_t / (op.sqrt_w * op.sqrt_w[a])
    return PolaritonEigenfunction(family, int(index), int(a), float(lam), BlockVector.from_flat(g, cont),
                                  psi_t, reg.sign, reg.variant, float(off), float(full), info or {})


def solve_ls(op: OperatorHandle, family: str, label: int, reg: RegularizationPolicy = RegularizationPolicy(),
             method: str = "auto") -> PolaritonEigenfunction:
    """
    Solve ``(I + R0(lam) V) psi = phi`` for one label of family ``"e"`` or ``"m"``.

    ``method`` is ``"dense"`` (LU), ``"iterative"`` (matrix-free GMRES) or ``"auto"``.
    """
    a = global_index(op, family, label)
    lam = float(np.sqrt(op.diag[a]))
    system = _System(op, method)
    psi = _solve_shell(system, lam, [a], reg)
    off, full = _residuals(system, lam, psi)
    return _make_eigenfunction(op, a, lam, psi[:, 0], reg, off[0], full[0], {"method": system.method})


def born_series(op: OperatorHandle, family: str, label: int, reg: RegularizationPolicy = RegularizationPolicy(),
                max_order: int = 50, tol: float = 1e-12) -> PolaritonEigenfunction:
    """
    Partial sums of ``[1 - R0 V + (R0 V)**2 - ...] phi``.

    Stops when the (extrapolated) change between orders drops below ``tol``;
    ``info`` carries ``order`` and ``converged``. A non-converged result is
    still returned for diagnostics.
    """
    a = global_index(op, family, label)
    lam = float(np.sqrt(op.diag[a]))
    system = _System(op)
    n = op.size
    e_a = np.zeros(n, dtype=complex)
    e_a[a] = 1.0
    if reg.variant == "pv_split":
        rs, etas = [_pv_resolvent(op, lam, reg.sign, allow_node=True)], None
    else:
        excl = _exclusion(op, lam, reg)
        etas = shift_values(op, lam, reg)
        rs = [_shift_resolvent(op, lam, eta, reg.sign, excl) for eta in etas]
    terms = [e_a.copy() for _ in rs]
    sums = [e_a.copy() for _ in rs]
    total = e_a.copy()
    converged = False
    order = 0
    history = []
    for order in range(1, max_order + 1):
        for i, r in enumerate(rs):
            terms[i] = -r * system.apply_V(terms[i])
            sums[i] = sums[i] + terms[i]
        new = sums[0] if etas is None else neville_zero(etas, sums)
        delta = float(np.linalg.norm(new - total))
        history.append(delta)
        total = new
        if not np.isfinite(delta):
            break
        if delta < tol:
            converged = True
            break
    if np.all(np.asarray(terms[0]) == 0):
        converged = True
        order = 0 if not history or history[0] == 0 else order
    off, full = _residuals(system, lam, total[:, None])
    info = {"order": order, "converged": converged, "increments": history}
    if not converged:
        log.warning("Born series for label %d not converged after %d orders", a, order)
    return _make_eigenfunction(op, a, lam, total, reg, off[0], full[0], info)


def _shells(op: OperatorHandle):
    """Groups of labels sharing an uncoupled frequency, ordered by first label."""
    groups = {}
    order = []
    d = op.diag
    sorted_idx = np.argsort(d, kind="stable")
    current = [int(sorted_idx[0])]
    for i in sorted_idx[1:]:
        if abs(d[i] - d[current[0]]) <= SHELL_RTOL * max(d[current[0]], 1e-300):
            current.append(int(i))
        else:
            order.append(sorted(current))
            current = [int(i)]
    order.append(sorted(current))
    order.sort(key=lambda c: c[0])
    for cols in order:
        groups[cols[0]] = cols
    return list(groups.values())


def assemble_wave_operator(op: OperatorHandle, reg: RegularizationPolicy = RegularizationPolicy(),
                           workers: Optional[int] = 1, method: str = "auto") -> WaveOperatorMatrix:
    """
    Solve every label and collect the columns.

    Labels sharing a frequency are solved together (one factorization per
    shell and eta). Shells are independent and mapped over ``workers`` threads;
    results are placed by label index, so the outcome does not depend on the
    worker count.
    """
    system = _System(op, method)
    n = op.size
    W = np.zeros((n, n), dtype=complex)
    residuals = np.zeros(n)
    shell_res = np.zeros(n)
    shells = _shells(op)
    failures = {}

    def run(cols):
        lam = float(np.sqrt(op.diag[cols[0]]))
        psi = _solve_shell(system, lam, cols, reg)
        off, full = _residuals(system, lam, psi)
        return cols, psi, off, full

    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run, cols) for cols in shells]
            results = []
            for cols, fut in zip(shells, futures):
                try:
                    results.append(fut.result())
                except SolverError as exc:
                    failures[tuple(cols)] = str(exc)
    else:
        results = []
        for cols in shells:
            try:
                results.append(run(cols))
            except SolverError as exc:
                failures[tuple(cols)] = str(exc)
    if failures:
        labels = sorted(i for cols in failures for i in cols)
        raise SolverError(f"{len(labels)} label solves failed: {labels}", {"failed": failures})
    for cols, psi, off, full in results:
        W[:, cols] = psi
        residuals[cols] = off
        shell_res[cols] = full

    eye = np.eye(n)
    unit = float(np.abs(W.conj().T @ W - eye).max())
    comp = float(np.abs(W @ W.conj().T - eye).max())
    conj = float(np.abs((W * op.diag[None, :]) @ W.conj().T - (np.diag(op.diag) + system.apply_V(eye))).max())
    return WaveOperatorMatrix(W, np.sqrt(op.diag), reg.sign, reg.variant, residuals, shell_res,
                              op.grid.n_field, unit, comp, conj)


def wave_operator_column(W: WaveOperatorMatrix, op: OperatorHandle, a: int) -> PolaritonEigenfunction:
    """Eigenfunction view of column ``a``."""
    reg = RegularizationPolicy(W.variant, W.sign)
    return _make_eigenfunction(op, a, float(W.frequencies[a]), W.matrix[:, a], reg,
                               W.residuals[a], W.shell_residuals[a])


def scattering_matrix(w_plus: WaveOperatorMatrix, w_minus: WaveOperatorMatrix) -> ScatteringMatrix:
    """``S = W+^dagger W-`` with its unitarity defect and largest cross-shell entry."""
    if w_plus.matrix.shape != w_minus.matrix.shape or not np.array_equal(w_plus.frequencies, w_minus.frequencies):
        raise ShapeMismatchError("wave operators were assembled on different grids")
    S = w_plus.matrix.conj().T @ w_minus.matrix
    defect = float(np.abs(S.conj().T @ S - np.eye(len(S))).max())
    lam = w_plus.frequencies
    cross = np.abs(lam[:, None] - lam[None, :]) > SHELL_RTOL * np.maximum(lam[:, None], 1e-300)
    off = float(np.abs(S[cross]).max()) if cross.any() else 0.0
    return ScatteringMatrix(S, defect, off)
