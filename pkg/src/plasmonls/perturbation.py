"""
First-order eigenfunctions and the free-space kernels built from the field basis.

The kernels are all integrals over the field continuum of

    g(w; r', r) = sum_{d^w} phi_{w, d}(r') (x) phi_{w, d}(r)

(the degeneracy sum at fixed frequency). Summing the parity pair gives
``cos(k . (r' - r))`` and summing the polarizations gives ``I - k k``, so with
``n = (r - r') / d`` and ``mu = cos(angle(k, n))``

    g = w**2 / (8 pi**3 c**3) * [T(w) (I - n n) + L(w) n n],
    T = int_{-1}^{1} pi (1 + mu**2) cos(k d mu) dmu,
    L = int_{-1}^{1} 2 pi (1 - mu**2) cos(k d mu) dmu,

where the azimuth has been integrated analytically and the ``mu`` integral is
done by Gauss-Legendre. Frequency integrals use a smooth window
``exp(-(w / w_c)**4)``: the integrand of ``int g dw`` only decays as an
oscillation of growing amplitude, so a sharp cutoff at ``k_max`` leaves an
O(1) error, whereas the smooth window converges once ``k_max d`` is large.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import DomainError, SingularityError
from .lssolver import PolaritonEigenfunction, RegularizationPolicy, effective_resolvent, global_index, shell_mask
from .model import PhysicalConstants
from .operator import BlockVector, OperatorHandle
from .quadrature import MINUS, PLUS, gauss_legendre, pv_weights

__all__ = [
    "KernelQuadrature",
    "TensorKernel",
    "first_order_psi",
    "g_tensor",
    "green_vacuum",
    "near_field_F",
    "transverse_delta_far",
    "kernel_L",
    "delta_T_quadrature",
    "tail_estimate",
]

_NATURAL = PhysicalConstants.natural()


# ---------------------------------------------------------------------------
# first order


def first_order_psi(op: OperatorHandle, family: str, label: int,
                    reg: RegularizationPolicy = RegularizationPolicy()) -> PolaritonEigenfunction:
    """
    ``psi = phi - R0 V phi`` from the closed-form blocks.

    e-family (field label ``kappa``)::

        u = delta_kappa,      v(nu, r, j) = -w phi_kappa(r)_j alpha(nu, r) R0(nu)

    m-family (medium label ``(nu, r, j)``)::

        u(kappa) = -w phi_kappa(r)_j alpha(nu, r) R0(w)
        v(nu', r', j') = delta - alpha(nu, r) alpha(nu', r) R0(nu') delta_{r r'} delta_{j j'}

    ``R0`` is the diagonal factor of the given regularization at the label's
    frequency, so the result coincides with the order-1 Born partial sum.
    """
    a = global_index(op, family, label)
    g = op.grid
    lam = float(np.sqrt(op.diag[a]))
    r = effective_resolvent(op, lam, reg)
    rf, rm = r[: g.n_field], r[g.n_field:]
    alpha_m = op.alpha[g.m_inu, g.m_voxel]
    u = np.zeros(g.n_field, complex)
    v = np.zeros(g.n_medium, complex)
    if family == "e":
        u[label] = 1.0 / g.field_weight[label]
        phi = op.T[label, g.m_voxel, g.m_j]
        v = -g.omega[label] * phi * alpha_m * rm
    else:
        vox, j = g.m_voxel[label], g.m_j[label]
        u = -g.omega * op.T[:, vox, j] * alpha_m[label] * rf
        same = (g.m_voxel == vox) & (g.m_j == j)
        v = np.where(same, -alpha_m[label] * alpha_m * rm / g.h**3, 0.0).astype(complex)
        v[label] += 1.0 / g.medium_weight[label]
    blocks = BlockVector(u, v)
    weighted = blocks.flat() * op.sqrt_w * op.sqrt_w[a]
    res = op.diag * weighted + op.coupling_sym(weighted) - lam * lam * weighted
    excl = shell_mask(op, lam)
    nrm = np.linalg.norm(weighted)
    return PolaritonEigenfunction(family, int(label), int(a), lam, blocks, weighted, reg.sign, reg.variant,
                                  float(np.linalg.norm(res[~excl]) / nrm), float(np.linalg.norm(res) / nrm),
                                  {"order": 1})


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class KernelQuadrature:
    """
    Radial and angular resolution for the frequency integrals.

    ``k_max`` defaults to ``target_kd / d`` for separation ``d``; the window
    edge is ``k_max / window_ratio``; ``n_radial`` defaults to
    ``1.2 k_max d + 80`` Gauss nodes on ``[0, c k_max]``.
    """

    k_max: Optional[float] = None
    target_kd: float = 100.0
    n_radial: Optional[int] = None
    window_order: int = 4
    window_ratio: float = 2.3

    def __post_init__(self):
        if self.k_max is not None and not self.k_max > 0:
            raise DomainError("k_max must be positive")
        if self.target_kd <= 0 or self.window_order < 1 or self.window_ratio <= 1:
            raise DomainError("invalid kernel quadrature parameters")

    def resolve(self, d: float) -> tuple:
        k_max = self.k_max if self.k_max is not None else self.target_kd / d
        n = self.n_radial if self.n_radial is not None else int(1.2 * k_max * d) + 80
        return float(k_max), int(n)

    def window(self, k, k_max):
        return np.exp(-(np.asarray(k) / (k_max / self.window_ratio)) ** self.window_order)


def _separation(r_src, r):
    r_src = np.asarray(r_src, dtype=float)
    r = np.asarray(r, dtype=float)
    delta = r - r_src
    d = float(np.linalg.norm(delta))
    if d <= 1e-14 * max(1.0, float(np.linalg.norm(r))):
        raise SingularityError("kernel evaluated at coincident points")
    return delta, d


def g_tensor(omega, r_src, r, constants: PhysicalConstants = _NATURAL, n_mu: Optional[int] = None) -> np.ndarray:
    """Degeneracy-summed ``phi (x) phi`` at frequencies ``omega``, shape (n, 3, 3)."""
    c = constants.c
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    delta, d = _separation(r_src, r)
    n = delta / d
    k = omega / c
    if n_mu is None:
        n_mu = int(k.max() * d / 2) + 40
    mu, wmu = leggauss(n_mu)
    cosm = np.cos(np.outer(k * d, mu))
    T = cosm @ (wmu * np.pi * (1 + mu**2))
    L = cosm @ (wmu * 2 * np.pi * (1 - mu**2))
    pref = omega**2 / (8 * np.pi**3 * c**3)
    nn = np.outer(n, n)
    return pref[:, None, None] * (T[:, None, None] * (np.eye(3) - nn) + L[:, None, None] * nn)


def _radial(quad: KernelQuadrature, d: float, c: float):
    k_max, n = quad.resolve(d)
    rule = gauss_legendre(n, 0.0, c * k_max)
    chi = quad.window(rule.nodes / c, k_max)
    return rule, chi, k_max


def _pv_integral(nu, samples, rule, sign):
    """``int f(w) / (w**2 - nu**2 + sign i0) dw`` for ``f`` sampled on ``rule`` (tensor-valued)."""
    c = pv_weights(rule, nu, sign, allow_node=True)
    return np.tensordot(c, samples, axes=(0, 0))


def green_vacuum(nu: float, r_src, r, sign: int = PLUS, quad: KernelQuadrature = KernelQuadrature(),
                 constants: PhysicalConstants = _NATURAL) -> np.ndarray:
    """
    ``c**2 int dw g(w) / (w**2 - nu**2 + sign i0)`` by PV plus the delta term.

    ``sign=PLUS`` gives the outgoing tensor of the radiation condition; the
    other sign is its complex conjugate.
    """
    if not nu > 0:
        raise DomainError("nu must be positive")
    _, d = _separation(r_src, r)
    c = constants.c
    rule, chi, _ = _radial(quad, d, c)
    if nu >= rule.b:
        raise DomainError("nu lies above the radial cutoff; increase k_max")
    gs = g_tensor(rule.nodes, r_src, r, constants) * chi[:, None, None]
    return c**2 * _pv_integral(nu, gs, rule, sign)


def near_field_F(nu: float, r_src, r, constants: PhysicalConstants = _NATURAL) -> np.ndarray:
    """``-c**2 / (4 pi nu**2 d**3) (I - 3 n n)``, real symmetric and traceless."""
    if not nu > 0:
        raise DomainError("nu must be positive")
    delta, d = _separation(r_src, r)
    n = delta / d
    c = constants.c
    return -c**2 / (4 * np.pi * nu**2 * d**3) * (np.eye(3) - 3 * np.outer(n, n))


def transverse_delta_far(delta_r) -> np.ndarray:
    """
    Far part ``-(I - 3 n n) / (4 pi d**3)`` of the transverse delta.

    The contact part ``(2/3) I delta(dr)`` is never evaluated: the kernels are
    only used between a medium point and an exterior point.
    """
    delta_r = np.asarray(delta_r, dtype=float)
    d = float(np.linalg.norm(delta_r))
    if d == 0.0:
        raise SingularityError("transverse delta evaluated at zero separation")
    n = delta_r / d
    return -(np.eye(3) - 3 * np.outer(n, n)) / (4 * np.pi * d**3)


def delta_T_quadrature(r_src, r, quad: KernelQuadrature = KernelQuadrature(),
                       constants: PhysicalConstants = _NATURAL) -> np.ndarray:
    """Windowed quadrature of ``int_0^inf g(w; r', r) dw``."""
    _, d = _separation(r_src, r)
    rule, chi, _ = _radial(quad, d, constants.c)
    gs = g_tensor(rule.nodes, r_src, r, constants)
    return np.tensordot(rule.weights * chi, gs, axes=(0, 0))


def tail_estimate(r_src, r, quad: KernelQuadrature = KernelQuadrature(),
                  constants: PhysicalConstants = _NATURAL) -> float:
    """
    Stationary-phase size of the neglected large-``w`` part of ``int g dw``.

    ``g`` oscillates as ``cos(w d / c)`` with amplitude ``w / (2 pi**2 c**2 d)``;
    the endpoint contribution at the window edge ``w_c`` is about that
    amplitude times ``c / d``, damped by the window over its own width.
    """
    _, d = _separation(r_src, r)
    c = constants.c
    k_max, _ = quad.resolve(d)
    wc = c * k_max / quad.window_ratio
    amp = wc / (2 * np.pi**2 * c**2 * d) * c / d
    return float(amp * quad.window(k_max, k_max))


def kernel_L(nu: float, r_src, r, path: str = "direct", sign: int = PLUS,
             quad: KernelQuadrature = KernelQuadrature(), constants: PhysicalConstants = _NATURAL) -> np.ndarray:
    """
    ``L = int d^3k w**2 / (w**2 - nu**2 + sign i0) sum phi (x) phi``.

    ``path="direct"`` integrates ``w**2 g(w)`` through the pole (PV plus delta
    term); ``path="decomposed"`` returns ``(nu / c)**2 (G0 + F_nf)``.
    """
    if not nu > 0:
        raise DomainError("nu must be positive")
    c = constants.c
    if path == "decomposed":
        return (nu / c) ** 2 * (green_vacuum(nu, r_src, r, sign, quad, constants)
                                + near_field_F(nu, r_src, r, constants))
    if path != "direct":
        raise DomainError(f"unknown path {path!r}")
    _, d = _separation(r_src, r)
    rule, chi, _ = _radial(quad, d, c)
    if nu >= rule.b:
        raise DomainError("nu lies above the radial cutoff; increase k_max")
    gs = g_tensor(rule.nodes, r_src, r, constants) * (chi * rule.nodes**2)[:, None, None]
    return _pv_integral(nu, gs, rule, sign)


@dataclass(frozen=True)
class TensorKernel:
    """A kernel bound to ``(nu, sign, constants)``: call with ``(r_src, r)``."""

    kind: str
    nu: float = 1.0
    sign: int = PLUS
    constants: PhysicalConstants = field(default_factory=PhysicalConstants.natural)
    quad: KernelQuadrature = KernelQuadrature()

    def __post_init__(self):
        if self.kind not in ("green", "near_field", "delta_far", "L_direct", "L_decomposed"):
            raise DomainError(f"unknown kernel {self.kind!r}")
        if self.sign not in (PLUS, MINUS):
            raise DomainError("sign must be +1 or -1")

    def __call__(self, r_src, r) -> np.ndarray:
        if self.kind == "green":
            return green_vacuum(self.nu, r_src, r, self.sign, self.quad, self.constants)
        if self.kind == "near_field":
            return near_field_F(self.nu, r_src, r, self.constants)
        if self.kind == "delta_far":
            return transverse_delta_far(np.asarray(r, float) - np.asarray(r_src, float))
        path = "direct" if self.kind == "L_direct" else "decomposed"
        return kernel_L(self.nu, r_src, r, path, self.sign, self.quad, self.constants)
