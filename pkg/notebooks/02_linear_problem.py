# %% [markdown]
# # The linearized problem: convergence and energy
#
# The effective linear problem is posed in the good unknown around a basic
# state. A manufactured solution gives its data exactly, so the error of
# the solver can be measured directly while the grid is refined.

# %%
import numpy as np

from vacuum_front.calculus import l2_norm
from vacuum_front.diagnostics import burst_forcing, mms_grid
from vacuum_front.geometry import ShiftProfile
from vacuum_front.grid import Grid
from vacuum_front.linsolve import energy_functionals, gronwall_rate
from vacuum_front.manufactured import build_linear_mms
from vacuum_front.problem import FreeBoundaryProblem
from vacuum_front.thermo import FluidModel, StiffenedGas

model = FluidModel(StiffenedGas())

# %% [markdown]
# Halve the time step and the x1 spacing together, solve with RK4 and
# watch the L2 error.

# %%
errors = []
for level in range(3):
    g = mms_grid(level)
    mm = build_linear_mms(FreeBoundaryProblem(model, ShiftProfile(), g))
    sol = mm.linear.solve(mm.data, "rk4")
    err = l2_norm(sol.U - mm.U, g) + l2_norm(sol.phi - mm.phi, g, "boundary")
    errors.append(err)
    print(f"level {level}: n1={g.n1:3d} dt={g.dt:.4f} error={err:.3e}  cfl={sol.cfl:.2f}")

orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
print("observed orders:", orders)

# %% [markdown]
# ## Energy after a burst of forcing
#
# Force the problem for t in (0, 0.3) and let it run freely until t = 1.
# Past the burst the energy should follow a Gronwall-type exponential.

# %%
g = Grid(nt=24, n1=17, n2=8, n3=1, T=1.0, X1=0.8, ghost=3)  # keeps RK4 inside its CFL limit
mm = build_linear_mms(FreeBoundaryProblem(model, ShiftProfile(), g))
sol = mm.linear.solve(burst_forcing(g, 0.0, 0.3), "rk4")
energy = energy_functionals(sol, mm.linear)
for t, e in zip(energy.t[::4], energy.total[::4]):
    print(f"t={t:+.3f}  E={e:.4e}")
print("fitted rate after the burst:", gronwall_rate(energy, 0.3))
