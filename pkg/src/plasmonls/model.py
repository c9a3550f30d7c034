"""
Medium geometry, dielectric response and the field-medium coupling.

The medium is a finite set of cubic voxels. Each voxel carries an
absorptive dielectric response ``eps_i(nu)`` (the imaginary part of the
dielectric function), and the medium oscillators couple to the field
through

    alpha(r, nu)**2 = 2 * eps0 * nu * eps_i(r, nu) / pi

which vanishes identically outside the voxels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import DomainError, EmptyMediumError, ValidationError

__all__ = [
    "PhysicalConstants",
    "ConstantDielectric",
    "DrudeLorentz",
    "Oscillator",
    "TabulatedDielectric",
    "MediumModel",
    "epsilon_imag",
    "coupling_alpha",
    "voxelize",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """Vacuum constants; ``eps0 * mu0 * c**2 == 1`` is enforced."""

    eps0: float = 1.0
    mu0: float = 1.0
    c: float = 1.0
    hbar: float = 1.0
    unit_system: str = "natural"

    def __post_init__(self):
        for name in ("eps0", "mu0", "c", "hbar"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.unit_system not in ("natural", "SI"):
            raise ValidationError(f"unknown unit system {self.unit_system!r}")
        if abs(self.eps0 * self.mu0 * self.c**2 - 1.0) > 1e-9:
            raise ValidationError("eps0 * mu0 * c**2 must equal 1")
        if self.unit_system == "natural" and (self.eps0, self.mu0, self.c, self.hbar) != (1.0, 1.0, 1.0, 1.0):
            raise ValidationError("natural units require eps0 = mu0 = c = hbar = 1")

    @classmethod
    def natural(cls) -> "PhysicalConstants":
        return cls()

    @classmethod
    def si(cls) -> "PhysicalConstants":
        from scipy import constants as sc

        c = 1.0 / math.sqrt(sc.epsilon_0 * sc.mu_0)
        return cls(eps0=sc.epsilon_0, mu0=sc.mu_0, c=c, hbar=sc.hbar, unit_system="SI")


# ---------------------------------------------------------------------------
# dielectric models


@dataclass(frozen=True)
class ConstantDielectric:
    """Constant ``eps_i`` inside the band ``[nu_lo, nu_hi]``, zero outside."""

    value: float
    nu_lo: float = 0.0
    nu_hi: float = math.inf

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("eps_i must be nonnegative")
        if not self.nu_hi > self.nu_lo:
            raise ValidationError("empty frequency band")

    def __call__(self, nu):
        nu = np.asarray(nu, dtype=float)
        inside = (nu >= self.nu_lo) & (nu <= self.nu_hi)
        return np.where(inside, self.value, 0.0)


@dataclass(frozen=True)
class Oscillator:
    plasma_freq: float
    damping: float
    resonance: float = 0.0


@dataclass(frozen=True)
class DrudeLorentz:
    """
    Sum of Drude-Lorentz terms,

        eps(nu) = 1 + sum_n wp_n**2 / (nu0_n**2 - nu**2 - i gamma_n nu)

    so that ``eps_i = sum_n wp**2 gamma nu / ((nu0**2 - nu**2)**2 + gamma**2 nu**2)``.
    A term with ``resonance == 0`` is the Drude response.
    """

    terms: tuple[Oscillator, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValidationError("DrudeLorentz needs at least one term")
        for t in self.terms:
            if t.damping < 0 or t.plasma_freq < 0 or t.resonance < 0:
                raise ValidationError("Drude-Lorentz parameters must be nonnegative")

    @classmethod
    def drude(cls, plasma_freq, damping):
        return cls((Oscillator(plasma_freq, damping, 0.0),))

    def __call__(self, nu):
        nu = np.asarray(nu, dtype=float)
        out = np.zeros_like(nu)
        for t in self.terms:
            out = out + t.plasma_freq**2 * t.damping * nu / (
                (t.resonance**2 - nu**2) ** 2 + (t.damping * nu) ** 2
            )
        return out


@dataclass(frozen=True)
class TabulatedDielectric:
    """Linear interpolation of tabulated ``eps_i``; zero outside the table."""

    nu: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if nu.ndim != 1 or nu.shape != vals.shape or nu.size < 2:
            raise ValidationError("tabulated grid and values must be 1-d of equal length >= 2")
        if np.any(np.diff(nu) <= 0):
            raise ValidationError("tabulated frequencies must be strictly increasing")
        if np.any(vals < 0):
            raise ValidationError("tabulated eps_i has negative entries")

    def __call__(self, nu):
        return np.interp(np.asarray(nu, dtype=float), self.nu, self.values, left=0.0, right=0.0)


DielectricModel = Union[ConstantDielectric, DrudeLorentz, TabulatedDielectric]


def epsilon_imag(model: DielectricModel, nu):
    """Evaluate ``eps_i(nu)`` for ``nu > 0`` (scalar or array)."""
    arr = np.asarray(nu, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("frequency must be positive")
    out = model(arr)
    return float(out) if np.ndim(nu) == 0 else out


# ---------------------------------------------------------------------------
# medium


@dataclass(frozen=True)
class MediumModel:
    """
    Voxelized medium.

    Attributes
    ----------
    centers : ndarray, shape (n_vox, 3)
    h : float
        Common voxel edge length.
    dielectric : model or tuple of models
        One shared model, or one per voxel.
    constants : PhysicalConstants
    strict_positivity : bool
        When set, ``eps_i`` must be strictly positive on the probe frequencies
        handed to :meth:`check_positivity`.
    """

    centers: np.ndarray
    h: float
    dielectric: Union[DielectricModel, tuple]
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    strict_positivity: bool = False

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, 3)
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        if not self.h > 0:
            raise ValidationError("voxel edge length must be positive")
        if len(centers) == 0:
            raise EmptyMediumError("medium has no voxels")
        if isinstance(self.dielectric, (list, tuple)):
            object.__setattr__(self, "dielectric", tuple(self.dielectric))
            if len(self.dielectric) != len(centers):
                raise ValidationError("need one dielectric model per voxel")
        tree = cKDTree(centers)
        object.__setattr__(self, "_tree", tree)
        if len(centers) > 1:
            # cubes of equal size overlap iff the Chebyshev distance of their centers is < h
            if tree.query_pairs(self.h * (1 - 1e-12), p=np.inf):
                raise ValidationError("voxels overlap")

    @property
    def n_voxels(self) -> int:
        return len(self.centers)

    @property
    def volume(self) -> float:
        return self.n_voxels * self.h**3

    def voxel_model(self, index: int) -> DielectricModel:
        if isinstance(self.dielectric, tuple):
            return self.dielectric[index]
        return self.dielectric

    def eps_i_table(self, nu) -> np.ndarray:
        """``eps_i`` at every voxel and frequency, shape (len(nu), n_vox)."""
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        if isinstance(self.dielectric, tuple):
            return np.stack([epsilon_imag(m, nu) for m in self.dielectric], axis=1)
        col = epsilon_imag(self.dielectric, nu)
        return np.repeat(col[:, None], self.n_voxels, axis=1)

    def alpha_table(self, nu, scale: float = 1.0, rescaled: bool = False) -> np.ndarray:
        """
        Coupling ``alpha`` at every (nu, voxel), shape (len(nu), n_vox).

        With ``rescaled=True`` the factor ``sqrt(eps0)`` is divided out, which
        is the form entering the frequency operator.
        """
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        eps0 = 1.0 if rescaled else self.constants.eps0
        return scale * np.sqrt(2.0 * eps0 * nu[:, None] * self.eps_i_table(nu) / math.pi)

    def locate(self, points) -> np.ndarray:
        """Index of the voxel containing each point, -1 when exterior (closed cubes)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dist, idx = self._tree.query(pts, p=np.inf)
        return np.where(dist <= 0.5 * self.h * (1 + 1e-12), idx, -1)

    def check_positivity(self, nu) -> None:
        if self.strict_positivity and np.any(self.eps_i_table(nu) <= 0):
            raise ValidationError("eps_i vanishes at a probed frequency under strict positivity")


def coupling_alpha(model: MediumModel, r, nu: float) -> float:
    """Physical coupling ``alpha(r, nu)``; zero when ``r`` is outside the medium."""
    if not nu > 0:
        raise DomainError("frequency must be positive")
    idx = int(model.locate(r)[0])
    if idx < 0:
        return 0.0
    eps_i = epsilon_imag(model.voxel_model(idx), nu)
    return math.sqrt(2.0 * model.constants.eps0 * nu * eps_i / math.pi)


# ---------------------------------------------------------------------------
# voxelization


def _lattice(extent_lo, extent_hi, h):
    """Cell centers (i + 1/2) h covering [lo, hi] along one axis."""
    i0 = math.floor(extent_lo / h - 0.5) - 1
    i1 = math.ceil(extent_hi / h - 0.5) + 1
    return (np.arange(i0, i1 + 1) + 0.5) * h


def voxelize(shape: dict, h: float, dielectric, constants: PhysicalConstants | None = None,
             strict_positivity: bool = False) -> MediumModel:
    """
    Voxelize a box, sphere or slab on the lattice of centers ``(i + 1/2) h``.

    A voxel belongs to the medium iff its center lies inside the shape. Box and
    slab faces are half-open (lower face in, upper face out) so that centers
    lying exactly on a face are counted once per pair of faces.

    Parameters
    ----------
    shape : dict
        ``{"kind": "box", "size": (Lx, Ly, Lz)}``,
        ``{"kind": "sphere", "radius": R}`` or
        ``{"kind": "slab", "thickness": t, "lateral": (Lx, Ly)}``;
        optional ``"center"`` (defaults to the origin).
    h : float
        Voxel edge length.
    """
    if not h > 0:
        raise ValidationError("voxel edge length must be positive")
    kind = shape.get("kind")
    center = np.asarray(shape.get("center", (0.0, 0.0, 0.0)), dtype=float)
    if kind == "box":
        half = 0.5 * np.asarray(shape["size"], dtype=float)
        smallest = 2 * half.min()
    elif kind == "sphere":
        radius = float(shape["radius"])
        half = np.full(3, radius)
        smallest = 2 * radius
    elif kind == "slab":
        lx, ly = shape["lateral"]
        half = 0.5 * np.array([lx, ly, shape["thickness"]], dtype=float)
        smallest = 2 * half.min()
    else:
        raise ValidationError(f"unknown shape kind {kind!r}")
    if not np.all(half > 0):
        raise ValidationError("shape dimensions must be positive")
    if h > smallest:
        raise EmptyMediumError(f"voxel size {h} exceeds the smallest shape dimension {smallest}")

    axes = [_lattice(center[a] - half[a], center[a] + half[a], h) for a in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    rel = grid - center
    eps = 1e-12 * h
    if kind == "sphere":
        keep = np.einsum("ij,ij->i", rel, rel) <= radius**2 + eps
    else:
        # half-open faces, so a box whose faces sit on lattice centers keeps its exact volume
        keep = np.all((rel >= -half - eps) & (rel < half - eps), axis=1)
    centers = grid[keep]
    if len(centers) == 0:
        raise EmptyMediumError("no voxel center falls inside the shape")
    return MediumModel(centers, h, dielectric, constants or PhysicalConstants(), strict_positivity)
