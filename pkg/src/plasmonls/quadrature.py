"""
One-dimensional quadrature rules and the singular-integral machinery.

Integrals through the resolvent pole are written with

    1 / (w**2 - lam**2 -/+ i0) = PV 1/(w**2 - lam**2) +/- i pi delta(w - lam) / (2 lam)

for ``w, lam > 0``. The principal value uses singularity subtraction: the
regular part ``(f(w) - f(lam)) / (w**2 - lam**2)`` goes through the Gauss
rule and ``f(lam)`` multiplies the analytic PV of the rational factor.
When ``f`` is only known at the nodes, ``f(lam)`` (and ``f'(lam)`` when
``lam`` is itself a node) come from barycentric interpolation on the
Legendre nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import DomainError, SingularNodeError

__all__ = [
    "Rule",
    "gauss_legendre",
    "barycentric_weights",
    "interpolation_row",
    "derivative_row",
    "pv_log",
    "pv_weights",
    "pv_quadrature",
    "neville_zero",
    "complex_shift_integral",
    "richardson_complex_shift",
    "PLUS",
    "MINUS",
]

PLUS = +1
MINUS = -1


@dataclass(frozen=True)
class Rule:
    """Quadrature nodes and weights on ``[a, b]``."""

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values):
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def gauss_legendre(n: int, a: float, b: float) -> Rule:
    if n < 1:
        raise DomainError("need at least one node")
    if not b > a:
        raise DomainError("empty interval")
    x, w = leggauss(n)
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Rule(nodes, weights, float(a), float(b))


def barycentric_weights(rule: Rule) -> np.ndarray:
    """Barycentric weights of the Legendre nodes, ``(-1)**j sqrt((1 - x_j**2) w_j)``."""
    n = len(rule)
    x = (2 * rule.nodes - (rule.a + rule.b)) / (rule.b - rule.a)
    w = 2 * rule.weights / (rule.b - rule.a)
    # leggauss returns ascending nodes; the alternating sign follows the ordering
    return (-1.0) ** np.arange(n) * np.sqrt((1 - x**2) * w)


def interpolation_row(rule: Rule, t: float) -> np.ndarray:
    """Row ``l`` with ``sum_j l_j f(x_j)`` the polynomial interpolant at ``t``."""
    x = rule.nodes
    diff = t - x
    hit = np.flatnonzero(np.abs(diff) <= 1e-14 * max(1.0, abs(t)))
    if hit.size:
        row = np.zeros(len(x))
        row[hit[0]] = 1.0
        return row
    lam = barycentric_weights(rule)
    q = lam / diff
    return q / q.sum()


def derivative_row(rule: Rule, j0: int) -> np.ndarray:
    """Row ``D`` with ``sum_j D_j f(x_j)`` the interpolant's derivative at node ``j0``."""
    x = rule.nodes
    lam = barycentric_weights(rule)
    row = np.zeros(len(x))
    others = np.arange(len(x)) != j0
    row[others] = (lam[others] / lam[j0]) / (x[j0] - x[others])
    row[j0] = -row[others].sum()
    return row


def pv_log(lam: float, a: float, b: float) -> float:
    """``PV int_a^b dw / (w**2 - lam**2)`` for ``lam > 0`` and ``0 <= a < b``."""
    def anti(w):
        return np.log(abs(w - lam)) - np.log(w + lam)

    return float((anti(b) - anti(a)) / (2 * lam))


def pv_weights(rule: Rule, lam: float, sign: int = PLUS, allow_node: bool = False) -> np.ndarray:
    """
    Effective weights ``c_j`` with ``sum_j c_j f(x_j)`` approximating
    ``int_a^b f(w) / (w**2 - lam**2 + sign * i0) dw`` for smooth ``f``.

    ``sign=PLUS`` places the shift as ``+i0`` (delta term ``-i pi f(lam)/(2 lam)``).
    When ``lam`` lies outside ``[a, b]`` the plain weights ``w_j / (x_j**2 - lam**2)``
    are returned. A ``lam`` on a node raises unless ``allow_node`` is set, in which
    case the node's regular-part value is the interpolated derivative limit.
    """
    if not lam > 0:
        raise DomainError("spectral parameter must be positive")
    x, w = rule.nodes, rule.weights
    if lam < rule.a or lam > rule.b:
        return (w / (x**2 - lam**2)).astype(complex)
    dist = np.abs(x - lam)
    j0 = int(dist.argmin())
    on_node = dist[j0] <= 1e-12 * lam
    if on_node and not allow_node:
        raise SingularNodeError(f"lambda={lam!r} coincides with quadrature node {j0} ({x[j0]!r})")
    denom = x**2 - lam**2
    c = np.zeros(len(x), dtype=complex)
    if on_node:
        off = np.arange(len(x)) != j0
        c[off] = w[off] / denom[off]
        ell = np.zeros(len(x))
        ell[j0] = 1.0
        # regular part at the node: lim (f(w) - f(lam)) / (w**2 - lam**2) = f'(lam) / (2 lam)
        c += w[j0] * derivative_row(rule, j0) / (2 * lam)
        subtract = (w[off] / denom[off]).sum()
    else:
        c[:] = w / denom
        ell = interpolation_row(rule, lam)
        subtract = (w / denom).sum()
    c += ell * (pv_log(lam, rule.a, rule.b) - subtract)
    c += ell * (-sign) * 1j * np.pi / (2 * lam)
    return c


def pv_quadrature(f, lam: float, rule: Rule, sign: int = PLUS):
    """
    ``int_a^b f(w) / (w**2 - lam**2 + sign * i0) dw`` by singularity subtraction.

    ``f`` is either sampled on the rule nodes (array whose first axis runs over
    nodes) or a callable; a callable is evaluated at ``lam`` directly instead of
    interpolated.
    """
    if not (rule.a < lam < rule.b):
        raise DomainError("lambda must lie inside the quadrature interval")
    if callable(f):
        fx = np.asarray(f(rule.nodes))
        flam = np.asarray(f(np.array([lam])))[0]
        denom = rule.nodes**2 - lam**2
        if np.any(np.abs(denom) <= 1e-14 * lam**2):
            raise SingularNodeError("lambda coincides with a quadrature node")
        shape = (-1,) + (1,) * (fx.ndim - 1)
        regular = np.tensordot(rule.weights, (fx - flam) / denom.reshape(shape), axes=(0, 0))
        return regular + flam * pv_log(lam, rule.a, rule.b) - sign * 1j * np.pi * flam / (2 * lam)
    fx = np.asarray(f)
    return np.tensordot(pv_weights(rule, lam, sign), fx, axes=(0, 0))


def neville_zero(xs: Sequence[float], ys: Sequence) -> np.ndarray:
    """Value at 0 of the polynomial through ``(xs[i], ys[i])`` (Neville's scheme)."""
    xs = np.asarray(xs, dtype=float)
    p = [np.asarray(y) for y in ys]
    n = len(xs)
    for m in range(1, n):
        p = [(-xs[i + m] * p[i] + xs[i] * p[i + 1]) / (xs[i] - xs[i + m]) for i in range(n - m)]
    return p[0]


def _graded_rule(a, b, lam, width, n_per_panel=16):
    """Composite Gauss rule with panels graded geometrically towards ``lam``."""
    edges = {a, b}
    if a < lam < b:
        edges.add(lam)
        for side, limit in ((-1, lam - a), (1, b - lam)):
            step = width
            while step < limit:
                edges.add(lam + side * step)
                step *= 2.0
    edges = np.array(sorted(edges))
    x, w = leggauss(n_per_panel)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def complex_shift_integral(f: Callable, lam: float, eta: float, a: float, b: float,
                           sign: int = PLUS, n_per_panel: int = 16) -> complex:
    """
    ``int_a^b f(w) / (w**2 - lam**2 + sign * i eta) dw`` with a rule graded to
    resolve the Lorentzian of width ``eta / (2 lam)``.
    """
    width = 0.05 * eta / (2 * lam)
    x, w = _graded_rule(a, b, lam, width, n_per_panel)
    return complex(np.sum(w * f(x) / (x**2 - lam**2 + sign * 1j * eta)))


def richardson_complex_shift(f: Callable, lam: float, a: float, b: float, sign: int = PLUS,
                             eta_rel: Sequence[float] = (1e-2, 1e-3, 1e-4)) -> complex:
    """Complex-shift integrals at ``eta = eta_rel * lam**2`` extrapolated to ``eta -> 0``."""
    etas = [e * lam**2 for e in eta_rel]
    vals = [complex_shift_integral(f, lam, e, a, b, sign) for e in etas]
    return complex(neville_zero(etas, vals))
