"""
Squared frequency operator ``Omega**2 = Omega0**2 + V`` on the discretized labels.

Vectors hold continuum function values ``(u(kappa), v(nu, r, j))``; the
natural inner product is quadrature-weighted,
``<y, x> = sum_kappa w_kappa conj(y) x + sum_m W_m conj(y) x``.
``V`` is symmetric for that product. The dense matrix is built in the
symmetrized coordinates ``x~ = W**(1/2) x`` where it is symmetric in the
Euclidean sense and has the same spectrum.

The coupling entering ``V`` is ``alpha / sqrt(eps0) = sqrt(2 nu eps_i / pi)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DenseCapError, ShapeMismatchError
from .model import MediumModel
from .spectral import SpectralGrid

__all__ = [
    "BlockVector",
    "OperatorHandle",
    "apply_omega0_sq",
    "apply_coupling_V",
    "assemble_dense",
    "weighted_inner",
    "DEFAULT_DENSE_CAP",
]

DEFAULT_DENSE_CAP = 4000


@dataclass
class BlockVector:
    """Field block ``u`` over field labels, medium block ``v`` over medium labels."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u)
        self.v = np.asarray(self.v)

    @classmethod
    def zeros(cls, grid: SpectralGrid, dtype=complex):
        return cls(np.zeros(grid.n_field, dtype), np.zeros(grid.n_medium, dtype))

    @classmethod
    def from_flat(cls, grid: SpectralGrid, flat):
        flat = np.asarray(flat)
        if flat.shape[0] != grid.size:
            raise ShapeMismatchError(f"expected {grid.size} entries, got {flat.shape[0]}")
        return cls(flat[: grid.n_field], flat[grid.n_field:])

    @classmethod
    def unit(cls, grid: SpectralGrid, index: int):
        """Uncoupled eigenfunction at one label: the discrete delta ``e_index / W_index``."""
        flat = np.zeros(grid.size, complex)
        flat[index] = 1.0 / grid.weights[index]
        return cls.from_flat(grid, flat)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def conforms(self, grid: SpectralGrid) -> bool:
        return self.u.shape == (grid.n_field,) and self.v.shape == (grid.n_medium,)

    def __add__(self, other):
        return BlockVector(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return BlockVector(self.u - other.u, self.v - other.v)

    def __mul__(self, scalar):
        return BlockVector(self.u * scalar, self.v * scalar)

    __rmul__ = __mul__


def weighted_inner(grid: SpectralGrid, y: BlockVector, x: BlockVector) -> complex:
    return complex(np.sum(grid.field_weight * np.conj(y.u) * x.u)
                   + np.sum(grid.medium_weight * np.conj(y.v) * x.v))


class OperatorHandle:
    """
    Medium plus grid with the cached overlap table ``T[kappa, voxel, j] = phi_kappa(r_voxel)_j``.

    Parameters
    ----------
    coupling_scale : float
        Multiplies ``alpha`` everywhere (``s * alpha`` scaling studies).
    """

    def __init__(self, model: MediumModel, grid: SpectralGrid, coupling_scale: float = 1.0,
                 dense_cap: int = DEFAULT_DENSE_CAP):
        if grid.n_voxels != model.n_voxels:
            raise ShapeMismatchError("grid and medium disagree on the voxel count")
        self.model = model
        self.grid = grid
        self.coupling_scale = float(coupling_scale)
        self.dense_cap = int(dense_cap)
        self.T = np.ascontiguousarray(grid.basis_at(model.centers).transpose(1, 0, 2))
        self.T.setflags(write=False)
        # rescaled coupling on the nu nodes, shape (n_nu, n_vox)
        self.alpha = model.alpha_table(grid.nu_rule.nodes, scale=self.coupling_scale, rescaled=True)
        self.alpha.setflags(write=False)
        self.diag = np.concatenate([grid.omega**2, grid.nu**2])
        self.sqrt_w = np.sqrt(grid.weights)

    @property
    def size(self) -> int:
        return self.grid.size

    def scaled(self, s: float) -> "OperatorHandle":
        """Same medium and grid with the coupling multiplied by ``s``."""
        new = object.__new__(OperatorHandle)
        new.__dict__.update(self.__dict__)
        new.coupling_scale = self.coupling_scale * s
        new.alpha = self.alpha * s
        return new

    def _check(self, x: BlockVector):
        if not x.conforms(self.grid):
            raise ShapeMismatchError(
                f"block vector shapes {x.u.shape}, {x.v.shape} do not match grid "
                f"({self.grid.n_field}, {self.grid.n_medium})")

    def _medium_view(self, v):
        g = self.grid
        return v.reshape(g.config.n_nu, g.n_voxels, 3)

    # continuum-valued actions
    def coupling(self, x: BlockVector) -> BlockVector:
        self._check(x)
        g = self.grid
        v = self._medium_view(x.v)
        w_nu = g.nu_rule.weights
        # sums over nu are done per (voxel, j) before touching the field labels
        s_vj = np.einsum("n,nv,nvj->vj", w_nu * g.h**3, self.alpha, v)
        bu = g.omega * np.einsum("kvj,vj->k", self.T, s_vj)
        p_vj = np.einsum("k,kvj->vj", g.field_weight * g.omega * x.u, self.T)
        q_vj = np.einsum("n,nv,nvj->vj", w_nu, self.alpha, v)
        bv = self.alpha[:, :, None] * (p_vj + q_vj)[None, :, :]
        return BlockVector(bu, bv.reshape(-1))

    def omega0_sq(self, x: BlockVector) -> BlockVector:
        self._check(x)
        return BlockVector(self.grid.omega**2 * x.u, self.grid.nu**2 * x.v)

    # symmetrized-coordinate actions
    def coupling_sym(self, xt: np.ndarray) -> np.ndarray:
        """``W^(1/2) V W^(-1/2)`` applied to flat symmetrized coordinates."""
        x = BlockVector.from_flat(self.grid, xt / self.sqrt_w)
        return self.sqrt_w * self.coupling(x).flat()

    def dense_coupling(self) -> np.ndarray:
        """Symmetrized dense ``V`` (real symmetric)."""
        g = self.grid
        n = g.size
        if n > self.dense_cap:
            raise DenseCapError(f"system size {n} exceeds the dense cap {self.dense_cap}; "
                                f"reduce n_k/n_theta/n_eta/n_nu or the voxel count")
        nf = g.n_field
        V = np.zeros((n, n))
        sw_f = np.sqrt(g.field_weight)
        sw_m = np.sqrt(g.medium_weight)
        a_m = self.alpha[g.m_inu, g.m_voxel]
        t_m = self.T[:, g.m_voxel, g.m_j]  # (n_field, n_medium)
        block = (sw_f * g.omega)[:, None] * t_m * (a_m * sw_m)[None, :]
        V[:nf, nf:] = block
        V[nf:, :nf] = block.T
        same = (g.m_voxel[:, None] == g.m_voxel[None, :]) & (g.m_j[:, None] == g.m_j[None, :])
        sw_nu = np.sqrt(g.nu_rule.weights[g.m_inu])
        V[nf:, nf:] = same * np.outer(a_m * sw_nu, a_m * sw_nu)
        return V

    def dense(self) -> np.ndarray:
        V = self.dense_coupling()
        V[np.diag_indices_from(V)] += self.diag
        return V


def apply_omega0_sq(op: OperatorHandle, x: BlockVector) -> BlockVector:
    """``Omega0**2`` is diagonal: ``w_kappa**2`` on the field block, ``nu**2`` on the medium."""
    return op.omega0_sq(x)


def apply_coupling_V(op: OperatorHandle, x: BlockVector) -> BlockVector:
    """Matrix-free ``V x`` with blocks ``(B v, B^T u + A v)``."""
    return op.coupling(x)


def assemble_dense(op: OperatorHandle) -> np.ndarray:
    """Dense symmetrized ``Omega**2``; refuses systems above ``op.dense_cap``."""
    return op.dense()
