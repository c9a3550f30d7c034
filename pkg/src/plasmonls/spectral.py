"""
Real transverse plane-wave basis and the grids discretizing both continua.

Field labels are ``kappa = (k, theta, eta, sigma, parity)`` with the polar
angle restricted to the half sphere ``theta in [0, pi/2]``; the cos/sin
parity index supplies the other hemisphere. Field weights carry the measure
``k**2 dk sin(theta) dtheta deta`` (equivalently ``w**2/c**3 dw dOmega``).

Medium labels are ``(nu, voxel, j)`` with weight ``w_nu * h**3``.

Ordering is row-major in the tuples above (k slowest, parity fastest;
nu slowest, orientation fastest).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .exceptions import ConfigurationError, DomainError, ValidationError
from .model import MediumModel
from .quadrature import Rule, gauss_legendre

__all__ = [
    "BASIS_NORM",
    "FieldLabel",
    "MediumLabel",
    "GridConfig",
    "SpectralGrid",
    "polarization_vectors",
    "basis_eval",
    "build_grids",
]

BASIS_NORM = 1.0 / (2.0 * math.pi**1.5)
_POLE_TOL = 1e-12


def polarization_vectors(direction):
    """
    Deterministic real polarization pair for the wave vector direction.

    ``e_plus = normalize(k x z)`` (``k x x`` within 1e-12 of the poles) and
    ``e_minus = k x e_plus``, so ``(k, e_plus, e_minus)`` is a right-handed
    orthonormal triad.
    """
    k = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(k)
    if not norm > 0:
        raise DomainError("polarization undefined for a zero wave vector")
    k = k / norm
    axis = np.array([0.0, 0.0, 1.0])
    if abs(k[2]) > 1 - _POLE_TOL:
        axis = np.array([1.0, 0.0, 0.0])
    ep = np.cross(k, axis)
    ep /= np.linalg.norm(ep)
    return ep, np.cross(k, ep)


def _polarizations_batch(khat):
    khat = np.asarray(khat, dtype=float)
    axis = np.where((np.abs(khat[:, 2]) > 1 - _POLE_TOL)[:, None], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    ep = np.cross(khat, axis)
    ep /= np.linalg.norm(ep, axis=1)[:, None]
    return ep, np.cross(khat, ep)


@dataclass(frozen=True)
class FieldLabel:
    k: float
    theta: float
    eta: float
    sigma: int  # +1 or -1
    parity: str  # "c" or "s"
    weight: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValidationError("field label needs k > 0")
        if self.sigma not in (1, -1) or self.parity not in ("c", "s"):
            raise ValidationError("invalid polarization or parity index")

    @property
    def direction(self):
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.eta), st * math.sin(self.eta), math.cos(self.theta)])

    @property
    def wavevector(self):
        return self.k * self.direction

    def omega(self, c: float = 1.0) -> float:
        return c * self.k

    def polarization(self):
        ep, em = polarization_vectors(self.direction)
        return ep if self.sigma == 1 else em


@dataclass(frozen=True)
class MediumLabel:
    nu: float
    voxel: int
    j: int  # 0, 1, 2
    weight: float = 1.0


def basis_eval(label: FieldLabel, r) -> np.ndarray:
    """Real transverse eigenfunction ``phi_kappa(r)`` (a 3-vector)."""
    phase = float(np.dot(label.wavevector, np.asarray(r, dtype=float)))
    trig = math.cos(phase) if label.parity == "c" else math.sin(phase)
    return BASIS_NORM * label.polarization() * trig


@dataclass(frozen=True)
class GridConfig:
    n_k: int
    n_theta: int
    n_eta: int
    n_nu: int
    k_max: float
    nu_max: float
    nu_lo: float = 0.0
    pv_mode: bool = False

    def __post_init__(self):
        for name in ("n_k", "n_theta", "n_eta", "n_nu"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if not self.k_max > 0 or not self.nu_max > self.nu_lo or self.nu_lo < 0:
            raise ConfigurationError("cutoffs must satisfy k_max > 0 and nu_max > nu_lo >= 0")

    def refined(self, factor: int = 2, spectral_only: bool = True) -> "GridConfig":
        """Refine the radial and nu rules (and the angular ones unless ``spectral_only``)."""
        kw = asdict(self)
        kw["n_k"] *= factor
        kw["n_nu"] *= factor
        if not spectral_only:
            kw["n_theta"] *= factor
            kw["n_eta"] *= factor
        return GridConfig(**kw)


class SpectralGrid:
    """
    Discretized spectral labels of both continua with their weights.

    Field arrays have length ``n_field``; medium arrays length ``n_medium``.
    The grid is immutable after construction.
    """

    def __init__(self, config: GridConfig, n_voxels: int, h: float, c: float = 1.0):
        self.config = config
        self.c = float(c)
        self.n_voxels = int(n_voxels)
        self.h = float(h)
        self.k_rule = gauss_legendre(config.n_k, 0.0, config.k_max)
        self.theta_rule = gauss_legendre(config.n_theta, 0.0, math.pi / 2)
        self.eta_rule = gauss_legendre(config.n_eta, 0.0, 2 * math.pi)
        self.nu_rule = gauss_legendre(config.n_nu, config.nu_lo, config.nu_max)
        # same rule in the frequency variable w = c k
        self.omega_rule = Rule(self.c * self.k_rule.nodes, self.c * self.k_rule.weights,
                               0.0, self.c * config.k_max)

        ik, it, ie, isg, ipa = np.meshgrid(
            np.arange(config.n_k), np.arange(config.n_theta), np.arange(config.n_eta),
            np.arange(2), np.arange(2), indexing="ij")
        self.f_ik = ik.ravel()
        self.f_itheta = it.ravel()
        self.f_ieta = ie.ravel()
        self.f_sigma = np.where(isg.ravel() == 0, 1, -1)
        self.f_parity = ipa.ravel()  # 0 -> cos, 1 -> sin
        self.k = self.k_rule.nodes[self.f_ik]
        self.theta = self.theta_rule.nodes[self.f_itheta]
        self.eta = self.eta_rule.nodes[self.f_ieta]
        st = np.sin(self.theta)
        self.khat = np.stack([st * np.cos(self.eta), st * np.sin(self.eta), np.cos(self.theta)], axis=1)
        ep, em = _polarizations_batch(self.khat)
        self.pol = np.where((self.f_sigma == 1)[:, None], ep, em)
        self.omega = self.c * self.k
        self.field_weight = (self.k_rule.weights[self.f_ik] * self.k**2
                             * self.theta_rule.weights[self.f_itheta] * st
                             * self.eta_rule.weights[self.f_ieta])

        inu, iv, ij = np.meshgrid(np.arange(config.n_nu), np.arange(self.n_voxels), np.arange(3),
                                  indexing="ij")
        self.m_inu = inu.ravel()
        self.m_voxel = iv.ravel()
        self.m_j = ij.ravel()
        self.nu = self.nu_rule.nodes[self.m_inu]
        self.medium_weight = self.nu_rule.weights[self.m_inu] * self.h**3

        for arr in (self.k, self.omega, self.khat, self.pol, self.field_weight, self.nu, self.medium_weight):
            arr.setflags(write=False)

    # -- sizes -----------------------------------------------------------------
    @property
    def n_field(self) -> int:
        return len(self.k)

    @property
    def n_medium(self) -> int:
        return len(self.nu)

    @property
    def size(self) -> int:
        return self.n_field + self.n_medium

    @property
    def frequencies(self) -> np.ndarray:
        """Uncoupled eigenfrequency of every label, field block first."""
        return np.concatenate([self.omega, self.nu])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.field_weight, self.medium_weight])

    # -- label maps ------------------------------------------------------------
    def field_index(self, ik, itheta, ieta, sigma, parity) -> int:
        cfg = self.config
        isg = 0 if sigma == 1 else 1
        ipa = {"c": 0, "s": 1}.get(parity, parity)
        return (((ik * cfg.n_theta + itheta) * cfg.n_eta + ieta) * 2 + isg) * 2 + ipa

    def field_indices(self, pos: int) -> tuple:
        return (int(self.f_ik[pos]), int(self.f_itheta[pos]), int(self.f_ieta[pos]),
                int(self.f_sigma[pos]), "cs"[self.f_parity[pos]])

    def medium_index(self, inu, voxel, j) -> int:
        return (inu * self.n_voxels + voxel) * 3 + j

    def medium_indices(self, pos: int) -> tuple:
        return int(self.m_inu[pos]), int(self.m_voxel[pos]), int(self.m_j[pos])

    def field_label(self, pos: int) -> FieldLabel:
        return FieldLabel(float(self.k[pos]), float(self.theta[pos]), float(self.eta[pos]),
                          int(self.f_sigma[pos]), "cs"[self.f_parity[pos]], float(self.field_weight[pos]))

    def medium_label(self, pos: int) -> MediumLabel:
        return MediumLabel(float(self.nu[pos]), int(self.m_voxel[pos]), int(self.m_j[pos]),
                           float(self.medium_weight[pos]))

    # -- basis -----------------------------------------------------------------
    def basis_at(self, points) -> np.ndarray:
        """``phi_kappa(r)`` for all field labels, shape (n_points, n_field, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        phase = pts @ (self.k[:, None] * self.khat).T
        trig = np.where(self.f_parity[None, :] == 0, np.cos(phase), np.sin(phase))
        return BASIS_NORM * trig[:, :, None] * self.pol[None, :, :]

    def to_json(self) -> str:
        cfg = asdict(self.config)
        payload = {
            "config": cfg,
            "c": self.c,
            "n_field": self.n_field,
            "n_medium": self.n_medium,
            "k_nodes": self.k_rule.nodes.tolist(),
            "k_weights": self.k_rule.weights.tolist(),
            "theta_nodes": self.theta_rule.nodes.tolist(),
            "theta_weights": self.theta_rule.weights.tolist(),
            "eta_nodes": self.eta_rule.nodes.tolist(),
            "eta_weights": self.eta_rule.weights.tolist(),
            "nu_nodes": self.nu_rule.nodes.tolist(),
            "nu_weights": self.nu_rule.weights.tolist(),
        }
        return json.dumps(payload, sort_keys=True, indent=1)


def build_grids(config: GridConfig, model: MediumModel) -> SpectralGrid:
    """
    Build the product grids for a medium.

    Under ``pv_mode`` any nu node coinciding with a field frequency node is
    a configuration error, since the PV split needs the pole off the grid.
    """
    grid = SpectralGrid(config, model.n_voxels, model.h, model.constants.c)
    if config.pv_mode:
        om = grid.omega_rule.nodes
        nu = grid.nu_rule.nodes
        close = np.abs(nu[:, None] - om[None, :]) <= 1e-9 * np.maximum(nu[:, None], 1e-300)
        if close.any():
            pairs = [(int(i), int(j), float(nu[i])) for i, j in zip(*np.nonzero(close))]
            raise ConfigurationError(f"nu nodes collide with field frequency nodes (nu_idx, k_idx, value): {pairs}")
    model.check_positivity(grid.nu_rule.nodes)
    return grid
