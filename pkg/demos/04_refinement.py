"""
How the +i0 prescription interacts with grid refinement.

Extrapolating a small complex shift to zero on a fixed grid gives standing
waves: every row outside the label's own frequency shell satisfies the
eigen-equation, but the discrete norms are not those of scattering states
and the wave-operator matrix does not become unitary. Tying the shift to the
local node spacing resolves the Lorentzian on the grid; the columns then
approach the outgoing waves and the unitarity defect falls with refinement.
"""
from plasmonls import (DrudeLorentz, GridConfig, MediumModel, OperatorHandle, RegularizationPolicy,
                       assemble_wave_operator, build_grids)

medium = MediumModel([[0.3, 0.0, 0.0]], 0.3, DrudeLorentz.drude(1.0, 0.3))
policies = {"shift ~ lambda**2": RegularizationPolicy(), "shift ~ spacing": RegularizationPolicy.grid_scaled()}

config = GridConfig(4, 2, 2, 4, 6.0, 5.0, 0.5)
print(f"{'N':>5} " + " ".join(f"{name:>34}" for name in policies))
print(f"{'':>5} " + " ".join(f"{'unitarity':>12} {'residual':>10} {'shell':>10}" for _ in policies))
for _ in range(4):
    op = OperatorHandle(medium, build_grids(config, medium)).scaled(0.1)
    cells = []
    for reg in policies.values():
        W = assemble_wave_operator(op, reg, workers=4)
        cells.append(f"{W.unitarity_defect:12.2e} {W.residuals.max():10.2e} {W.shell_residuals.max():10.2e}")
    print(f"{op.size:5d} " + " ".join(cells))
    config = config.refined(2)
