"""
Frequency-domain kernels assembled from the plane-wave basis.

The Green tensor obtained by integrating the basis through the pole, plus
the quasi-static near-field term, reproduces the closed-form dyadic Green
tensor. Integrating the basis over all frequencies gives the far part of the
transverse delta once the bandwidth is large enough.
"""
import numpy as np

from plasmonls import KernelQuadrature, green_vacuum, kernel_L
from plasmonls.perturbation import delta_T_quadrature, near_field_F, transverse_delta_far


def dyadic(q, r):
    R = np.linalg.norm(r)
    n = r / R
    x = q * R
    return (((1 + 1j / x - 1 / x**2) * np.eye(3) + (-1 - 3j / x + 3 / x**2) * np.outer(n, n))
            * np.exp(1j * x) / (4 * np.pi * R))


src = np.zeros(3)
for r in ([0.9, 0.3, -0.2], [0.0, 0.0, 2.0]):
    r = np.array(r)
    for nu in (0.5, 1.5):
        G = green_vacuum(nu, src, r) + near_field_F(nu, src, r)
        ref = dyadic(nu, r).conj()
        paths = np.abs(kernel_L(nu, src, r, "direct") - kernel_L(nu, src, r, "decomposed")).max()
        print(f"|r| = {np.linalg.norm(r):.2f}, nu = {nu}: Green vs closed form {np.abs(G - ref).max() / np.abs(ref).max():.1e},"
              f" L paths {paths / np.abs(nu**2 * ref).max():.1e}")

r = np.array([0.6, 0.2, 0.1])
exact = transverse_delta_far(r)
for kd in (12.5, 25.0, 50.0, 100.0):
    q = delta_T_quadrature(src, r, KernelQuadrature(k_max=kd / np.linalg.norm(r)))
    print(f"k_max d = {kd:5.1f}: far transverse delta error {np.abs(q - exact).max() / np.abs(exact).max():.1e}")
