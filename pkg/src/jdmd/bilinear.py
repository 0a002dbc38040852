"""Bilinear lifted dynamics ``y+ = A y + B u + sum_i u_i C_i y`` and projections.

The coefficient matrices are stored concatenated as ``E = [A B C_1 ... C_m]``
of shape ``(n_y, n_z)`` with ``n_z = n_y + n_u + n_u * n_y``. Every function
here accepts batched ``(..., dim)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .lifting import LiftingMap, lift, lift_with_jacobian


def z_dim(n_y: int, n_u: int) -> int:
    return n_y + n_u + n_u * n_y


def stack_z(y, u) -> np.ndarray:
    """Return ``[y; u; u_1 y; ...; u_m y]`` along the last axis."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if y.ndim == 0 or u.ndim == 0:
        raise InvalidInputError("y and u must be at least one-dimensional")
    batch = np.broadcast_shapes(y.shape[:-1], u.shape[:-1])
    y = np.broadcast_to(y, batch + y.shape[-1:])
    u = np.broadcast_to(u, batch + u.shape[-1:])
    bil = (u[..., :, None] * y[..., None, :]).reshape(y.shape[:-1] + (-1,))
    return np.concatenate([y, u, bil], axis=-1)


def lifted_jacobian_structs(lifting: LiftingMap, x, u):
    """Return ``(A_hat, B_hat)`` with ``d z / dx`` and ``d z / du`` for ``z = stack_z(phi(x), u)``.

    Shapes are ``(..., n_z, n_x)`` and ``(..., n_z, n_u)``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        raise InvalidInputError("u must be at least one-dimensional")
    y, Phi = lift_with_jacobian(lifting, x)
    batch = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
    y = np.broadcast_to(y, batch + y.shape[-1:])
    Phi = np.broadcast_to(Phi, batch + Phi.shape[-2:])
    u = np.broadcast_to(u, batch + u.shape[-1:])
    n_y, n_x = Phi.shape[-2:]
    n_u = u.shape[-1]
    n_z = z_dim(n_y, n_u)

    A_hat = np.zeros(batch + (n_z, n_x))
    A_hat[..., :n_y, :] = Phi
    scaled = u[..., :, None, None] * Phi[..., None, :, :]
    A_hat[..., n_y + n_u:, :] = scaled.reshape(batch + (n_u * n_y, n_x))

    B_hat = np.zeros(batch + (n_z, n_u))
    B_hat[..., n_y:n_y + n_u, :] = np.eye(n_u)
    for i in range(n_u):
        start = n_y + n_u + i * n_y
        B_hat[..., start:start + n_y, i] = y
    return A_hat, B_hat


@dataclass(frozen=True)
class BilinearModel:
    """Discrete-time bilinear lifted model with a fixed embedding.

    Parameters
    ----------
    E : ndarray, shape (n_y, n_z)
        Concatenated coefficients ``[A B C_1 ... C_m]``.
    lifting : LiftingMap
        Embedding ``phi`` and unlift ``G``.
    n_u : int
        Number of controls ``m``.
    dt : float
        Sampling period the model was identified at, in seconds.
    """

    E: np.ndarray
    lifting: LiftingMap
    n_u: int
    dt: float

    def __post_init__(self):
        E = np.array(self.E, dtype=float)
        n_y = self.lifting.n_y
        if E.shape != (n_y, z_dim(n_y, self.n_u)):
            raise InvalidInputError(
                f"E has shape {E.shape}, expected {(n_y, z_dim(n_y, self.n_u))}"
            )
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        E.setflags(write=False)
        object.__setattr__(self, "E", E)

    @classmethod
    def from_matrices(cls, A, B, C: Sequence, lifting: LiftingMap, dt: float):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if len(C) != B.shape[1]:
            raise InvalidInputError("need one C matrix per control")
        E = np.hstack([np.asarray(A, dtype=float), B] + [np.asarray(c, float) for c in C])
        return cls(E, lifting, B.shape[1], dt)

    @property
    def n_x(self) -> int:
        return self.lifting.n_x

    @property
    def n_y(self) -> int:
        return self.lifting.n_y

    @property
    def n_z(self) -> int:
        return self.E.shape[1]

    @property
    def A(self) -> np.ndarray:
        return self.E[:, :self.n_y]

    @property
    def B(self) -> np.ndarray:
        return self.E[:, self.n_y:self.n_y + self.n_u]

    @property
    def C(self) -> list:
        start = self.n_y + self.n_u
        return [self.E[:, start + i * self.n_y:start + (i + 1) * self.n_y]
                for i in range(self.n_u)]

    @property
    def angle_indices(self) -> tuple:
        return ()

    def _check_u(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1:] != (self.n_u,):
            raise InvalidInputError(f"expected control of dimension {self.n_u}")
        return u

    def lifted_step(self, y, u) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[-1:] != (self.n_y,):
            raise InvalidInputError(f"expected lifted state of dimension {self.n_y}")
        return stack_z(y, self._check_u(u)) @ self.E.T

    def projected_step(self, x, u) -> np.ndarray:
        """``G g(phi(x), u)``: one step of the learned dynamics in state space."""
        u = self._check_u(u)
        y = lift(self.lifting, x)
        # G selects rows 1..n_x of E
        return stack_z(y, u) @ self.E[1:self.n_x + 1].T

    def projected_jacobians(self, x, u):
        """Return ``(A_bar, B_bar) = (G E A_hat, G E B_hat)``."""
        u = self._check_u(u)
        A_hat, B_hat = lifted_jacobian_structs(self.lifting, x, u)
        GE = self.E[1:self.n_x + 1]
        return GE @ A_hat, GE @ B_hat

    # DifferentiableModel interface
    def step(self, x, u) -> np.ndarray:
        return self.projected_step(x, u)

    def jacobians(self, x, u):
        return self.projected_jacobians(x, u)
