# %% [markdown]
# # The symmetrized system and the straightened front
#
# A tour of the pointwise pieces of the model. We build both fluid models,
# look at the coefficient matrices for one state, and then check what
# happens to the boundary matrix once the front moves with the fluid.

# %%
import numpy as np

from vacuum_front.geometry import boundary_matrix, lift_front, make_cutoff
from vacuum_front.grid import Grid
from vacuum_front.thermo import FluidModel, StiffenedGas

np.set_printoptions(precision=4, suppress=True)

classical = FluidModel(StiffenedGas())
relativistic = FluidModel(StiffenedGas(c0=0.6), relativistic=True)

# %% [markdown]
# Unknowns are ordered (p, u1, u2, u3, S). For the classical model the
# middle entries are plain velocities; the relativistic one stores the
# spatial part of the four-velocity.

# %%
U = np.array([0.3, 0.1, -0.05, 0.02, 0.1])
for model in (classical, relativistic):
    sysm = model.system(U)
    print("relativistic" if model.relativistic else "classical")
    print("A0 =\n", np.real(sysm.A0))
    print("eigenvalues of A0:", np.linalg.eigvalsh(np.real(sysm.A0)))

# %% [markdown]
# ## Rank of the boundary matrix
#
# Choose a front slope, then set the front speed to v . N. The boundary
# matrix at x1 = 0 should then lose three of its five singular values.

# %%
d2, d3 = np.array([0.2]), np.array([-0.1])
v = classical.velocity(U[None])
dt = v[:, 0] - v[:, 1] * d2 - v[:, 2] * d3
At = boundary_matrix(classical.system(U[None]), dt, d2, d3, np.ones(1))
print("singular values:", np.linalg.svd(np.real(At[0]), compute_uv=False))

# %% [markdown]
# ## Straightening
#
# The cutoff chi is 1 near the boundary and vanishes past its support
# radius; its slope stays below 1/2, so d1 Phi >= 1/2 whenever |phi| <= 1.

# %%
chi = make_cutoff(4.0)
print("max |chi'| =", chi.max_slope)

grid = Grid(nt=12, n1=81, n2=16, n3=1, T=1.0, X1=5.0, ghost=3)
t, x2, _ = grid.boundary_mesh()
phi = 0.9 * np.cos(x2) * np.cos(t)
geom = lift_front(phi, chi, grid)
print("min d1 Phi =", geom.min_d1Phi)
print("trace error at x1 = 0:", np.abs(geom.Psi[:, 0] - phi).max())
