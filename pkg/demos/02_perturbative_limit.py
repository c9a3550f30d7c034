"""
Weak-coupling limit.

Scaling the coupling by s, the full solution differs from the first-order
closed form by O(s**2). The log-log slope of that difference is printed for
one and for eight voxels.
"""
import numpy as np

from plasmonls import (DrudeLorentz, GridConfig, MediumModel, OperatorHandle, RegularizationPolicy,
                       assemble_wave_operator, build_grids, first_order_psi, voxelize)

reg = RegularizationPolicy.grid_scaled()
config = GridConfig(4, 2, 2, 4, 6.0, 5.0, 0.5)
drude = DrudeLorentz.drude(1.0, 0.3)
media = {
    "one voxel": MediumModel([[0.3, 0.0, 0.0]], 0.3, drude),
    "2x2x2 cube": voxelize({"kind": "box", "size": (0.6, 0.6, 0.6)}, 0.3, drude),
}
scales = np.array([0.1, 0.05, 0.025])

for name, medium in media.items():
    base = OperatorHandle(medium, build_grids(config, medium))
    errors = []
    for s in scales:
        op = base.scaled(s)
        full = assemble_wave_operator(op, reg).matrix
        g = op.grid
        first = np.stack([first_order_psi(op, "e", a, reg).weighted for a in range(g.n_field)]
                         + [first_order_psi(op, "m", b, reg).weighted for b in range(g.n_medium)], axis=1)
        errors.append(np.linalg.norm(full - first))
    slope = np.polyfit(np.log(scales), np.log(errors), 1)[0]
    print(f"{name:>11}: N = {base.size:4d}, errors " + ", ".join(f"{e:.3e}" for e in errors)
          + f", slope {slope:.4f}")
