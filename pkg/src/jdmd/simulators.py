"""True and nominal plant models with RK4 discretization.

Every model exposes the discrete-time interface used by regression and
control: ``n_x``, ``n_u``, ``dt``, ``angle_indices``, ``step(x, u)`` and
``jacobians(x, u)``. All of them accept batched ``(..., dim)`` arrays.

Cartpole state is ``[x, theta, xdot, thetadot]`` with ``theta = 0`` hanging
down and ``theta = pi`` upright. Planar multirotor state is
``[px, pz, theta, vx, vz, omega]`` with controls the two rotor thrusts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, SimulationDivergenceError

FRICTION_EPS = 1e-2
# longest internal RK4 step for the cartpole; keeps energy drift of the
# frictionless model near 1e-6 per second
CARTPOLE_MAX_STEP = 0.02


def _rk4(f, x, u, dt):
    k1 = f(x, u)
    k2 = f(x + 0.5 * dt * k1, u)
    k3 = f(x + 0.5 * dt * k2, u)
    k4 = f(x + dt * k3, u)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(f, x, u, dt, step_index=None):
    """One explicit RK4 step of ``xdot = f(x, u)`` with zero-order-hold ``u``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        out = _rk4(f, np.asarray(x, dtype=float), np.asarray(u, dtype=float), dt)
    if not np.all(np.isfinite(out)):
        raise SimulationDivergenceError(step_index if step_index is not None else -1)
    return out


def finite_difference_jacobians(step, x, u, rel_step=1e-6):
    """Central-difference Jacobians of ``step`` with step ``rel_step * (1 + |v|)``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    batch = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
    x = np.broadcast_to(x, batch + x.shape[-1:])
    u = np.broadcast_to(u, batch + u.shape[-1:])
    n_x, n_u = x.shape[-1], u.shape[-1]
    v = np.concatenate([x, u], axis=-1)
    h = rel_step * (1.0 + np.abs(v))
    # all 2 (n_x + n_u) perturbations in one batched call
    eye = np.eye(n_x + n_u)
    dv = h[..., None, :] * eye
    vp = np.concatenate([v[..., None, :] + dv, v[..., None, :] - dv], axis=-2)
    out = step(vp[..., :n_x], vp[..., n_x:])
    n = n_x + n_u
    diff = (out[..., :n, :] - out[..., n:, :]) / (2.0 * h[..., :, None])
    J = np.swapaxes(diff, -1, -2)
    return J[..., :n_x], J[..., n_x:]


class ContinuousModel:
    """Base for continuous dynamics discretized by (sub-stepped) RK4."""

    n_x: int
    n_u: int
    angle_indices: tuple = ()

    def __init__(self, dt: float, substeps: int = 1):
        if not dt > 0:
            raise ConfigError("dt must be positive", "dt")
        self.dt = float(dt)
        self.substeps = int(substeps)

    def dynamics(self, x, u):
        raise NotImplementedError

    def step(self, x, u):
        """Advance one sample period. Non-finite results are returned as-is."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        h = self.dt / self.substeps
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(self.substeps):
                x = _rk4(self.dynamics, x, u, h)
        return x

    def jacobians(self, x, u):
        return finite_difference_jacobians(self.step, x, u)


def model_jacobians(model, x, u):
    """Finite-difference Jacobians ``(A, B)`` of ``model.step`` at ``(x, u)``."""
    return finite_difference_jacobians(model.step, x, u)


@dataclass(frozen=True)
class CartpoleParams:
    """Physical parameters of the *true* cartpole.

    ``damping`` is the viscous coefficient applied at both joints and
    ``deadband`` the input magnitude below which no force is applied.
    The Coulomb normal force is ``(mc + mp) g``.
    """

    mc: float = 1.0
    mp: float = 0.2
    l: float = 0.5
    g: float = 9.81
    mu: float = 0.0
    damping: float = 0.0
    deadband: float = 0.0

    def __post_init__(self):
        for name in ("mc", "mp", "l", "g"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be positive", name)
        for name in ("mu", "damping", "deadband"):
            if getattr(self, name) < 0:
                raise ConfigError("must be nonnegative", name)


class Cartpole(ContinuousModel):
    n_x = 4
    n_u = 1
    angle_indices = (1,)

    def __init__(self, params: CartpoleParams, dt: float, substeps=None,
                 friction_eps: float = FRICTION_EPS):
        self.params = params
        self.friction_eps = friction_eps
        if substeps is None:
            substeps = self.stable_substeps(dt)
        super().__init__(dt, substeps)

    def stable_substeps(self, dt):
        # real-axis RK4 stability ~ -2.78; keep the smoothed friction well inside
        p = self.params
        stiffness = (p.mu * (p.mc + p.mp) * p.g / self.friction_eps + p.damping) / p.mc
        return max(math.ceil(dt / CARTPOLE_MAX_STEP - 1e-9), math.ceil(dt * stiffness / 2.0))

    def friction(self, v):
        p = self.params
        return p.mu * (p.mc + p.mp) * p.g * np.tanh(v / self.friction_eps)

    def applied_force(self, u):
        u = u[..., 0]
        if self.params.deadband > 0:
            return np.where(np.abs(u) < self.params.deadband, 0.0, u)
        return u

    def dynamics(self, x, u):
        p = self.params
        th, xd, thd = x[..., 1], x[..., 2], x[..., 3]
        s, c = np.sin(th), np.cos(th)
        f = self.applied_force(u) - p.damping * xd
        if p.mu > 0:
            f = f - self.friction(xd)
        tau = -p.mp * p.g * p.l * s - p.damping * thd
        # M qdd = rhs with M = [[mc+mp, mp l c], [mp l c, mp l^2]]
        r1 = f + p.mp * p.l * thd**2 * s
        m11, m12, m22 = p.mc + p.mp, p.mp * p.l * c, p.mp * p.l**2
        det = m11 * m22 - m12**2
        xdd = (m22 * r1 - m12 * tau) / det
        thdd = (m11 * tau - m12 * r1) / det
        return np.stack([xd, thd, xdd, thdd], axis=-1)

    def energy(self, x):
        p = self.params
        th, xd, thd = x[..., 1], x[..., 2], x[..., 3]
        kin = 0.5 * (p.mc + p.mp) * xd**2 + p.mp * p.l * np.cos(th) * xd * thd \
            + 0.5 * p.mp * p.l**2 * thd**2
        return kin - p.mp * p.g * p.l * np.cos(th)


def cartpole_true(params: CartpoleParams, dt: float) -> Cartpole:
    return Cartpole(params, dt)


def cartpole_nominal(params: CartpoleParams, dt: float) -> Cartpole:
    """Frictionless, damping-free, deadband-free model with lighter masses."""
    nominal = replace(params, mc=params.mc / 1.20, mp=params.mp / 1.25,
                      mu=0.0, damping=0.0, deadband=0.0)
    return Cartpole(nominal, dt)


@dataclass(frozen=True)
class PlanarMultirotorParams:
    """Nominal parameters of a two-rotor planar vehicle.

    The true model scales mass and inertia up and the arm length down by
    ``perturbation`` and adds linear drag ``-drag * v`` on both translational
    velocities.
    """

    mass: float = 1.0
    inertia: float = 0.01
    arm: float = 0.25
    g: float = 9.81
    drag: float = 0.3
    perturbation: float = 0.05

    def __post_init__(self):
        for name in ("mass", "inertia", "arm", "g"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be positive", name)
        if self.drag < 0 or not 0 <= self.perturbation < 1:
            raise ConfigError("invalid drag or perturbation")


class PlanarMultirotor(ContinuousModel):
    n_x = 6
    n_u = 2
    angle_indices = (2,)

    def __init__(self, mass, inertia, arm, g, drag, dt, substeps=1):
        self.mass, self.inertia, self.arm, self.g, self.drag = mass, inertia, arm, g, drag
        super().__init__(dt, substeps)

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.g / 2.0

    def dynamics(self, x, u):
        th, vx, vz, om = x[..., 2], x[..., 3], x[..., 4], x[..., 5]
        total = u[..., 0] + u[..., 1]
        ax = -total * np.sin(th) / self.mass - self.drag * vx / self.mass
        az = total * np.cos(th) / self.mass - self.g - self.drag * vz / self.mass
        alpha = self.arm * (u[..., 1] - u[..., 0]) / self.inertia
        return np.stack([vx, vz, om, ax, az, alpha], axis=-1)


def multirotor_true(params: PlanarMultirotorParams, dt: float) -> PlanarMultirotor:
    e = params.perturbation
    return PlanarMultirotor(params.mass * (1 + e), params.inertia * (1 + e),
                            params.arm * (1 - e), params.g, params.drag, dt)


def multirotor_nominal(params: PlanarMultirotorParams, dt: float) -> PlanarMultirotor:
    return PlanarMultirotor(params.mass, params.inertia, params.arm, params.g, 0.0, dt)


class LinearModel:
    """Discrete model ``x+ = A x + B u``; used for tests and oracles."""

    angle_indices = ()

    def __init__(self, A, B, dt=1.0):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.n_x, self.n_u = self.B.shape
        self.dt = float(dt)

    def step(self, x, u):
        return np.asarray(x) @ self.A.T + np.asarray(u) @ self.B.T

    def jacobians(self, x, u):
        batch = np.broadcast_shapes(np.shape(x)[:-1], np.shape(u)[:-1])
        return (np.broadcast_to(self.A, batch + self.A.shape).copy(),
                np.broadcast_to(self.B, batch + self.B.shape).copy())
