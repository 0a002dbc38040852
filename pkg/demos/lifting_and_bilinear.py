"""
Lifting maps and bilinear lifted dynamics
=========================================

Build the 33-dimensional cartpole embedding, evaluate it with its Jacobian,
and step a bilinear model ``y+ = A y + B u + u C y`` in lifted and projected
form.
"""

# %%
import numpy as np

from jdmd.bilinear import BilinearModel, lifted_jacobian_structs, stack_z, z_dim
from jdmd.lifting import build_cartpole_map, lift, lift_jacobian

lifting = build_cartpole_map()
print("N_x =", lifting.n_x, " N_y =", lifting.n_y)

# %%
# The first five observables are the constant and the state itself, so the
# unlift G is a row selection.
x = np.array([0.1, np.pi - 0.2, 0.0, 0.5])
y = lift(lifting, x)
print("phi(x)[:5] =", y[:5])
print("G phi(x) == x:", np.allclose(lifting.G @ y, x))

# %%
# Analytic Jacobian against central differences.
h = 1e-6
J = lift_jacobian(lifting, x)
J_fd = np.column_stack([(lift(lifting, x + h * e) - lift(lifting, x - h * e)) / (2 * h)
                        for e in np.eye(4)])
print("max |Phi - Phi_fd| =", np.abs(J - J_fd).max())

# %%
# A random bilinear model. ``projected_jacobians`` gives the linearization
# in the original state space used by the tracking controller.
rng = np.random.default_rng(0)
n_z = z_dim(lifting.n_y, 1)
model = BilinearModel(0.01 * rng.standard_normal((lifting.n_y, n_z)), lifting, 1, 0.04)
u = np.array([0.5])
print("z has", stack_z(y, u).size, "entries")
A, B = model.projected_jacobians(x, u)
A_hat, B_hat = lifted_jacobian_structs(lifting, x, u)
print("A_bar", A.shape, " B_bar", B.shape, " A_hat", A_hat.shape, " B_hat", B_hat.shape)
