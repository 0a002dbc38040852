"""Reference generation (iLQR) and time-varying LQR tracking.

Any object with ``n_x``, ``n_u``, ``dt``, ``step`` and ``jacobians`` can be
linearized here, including :class:`~jdmd.bilinear.BilinearModel` (whose
``jacobians`` are the projected Jacobians).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ControllabilityError,
    InvalidInputError,
    NonConvergenceError,
    SimulationDivergenceError,
)

log = logging.getLogger(__name__)

# states beyond this norm are treated as diverged
DIVERGENCE_LIMIT = 1e6


def wrap_angles(dx, angle_indices: Sequence[int] = ()):
    """Replace angle components of a state difference by the shortest arc."""
    if not len(angle_indices):
        return dx
    dx = np.array(dx, dtype=float, copy=True)
    idx = list(angle_indices)
    dx[..., idx] = (dx[..., idx] + np.pi) % (2.0 * np.pi) - np.pi
    return dx


@dataclass(frozen=True)
class LQRWeights:
    """Diagonal quadratic weights."""

    Q: np.ndarray
    R: np.ndarray
    Qf: np.ndarray

    def __post_init__(self):
        for name in ("Q", "R", "Qf"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.ndim != 1 or np.any(v < 0):
                raise InvalidInputError(f"{name} must be a nonnegative diagonal")
            object.__setattr__(self, name, v)
        if np.any(self.R <= 0):
            raise InvalidInputError("R must be positive definite")

    def scaled(self, c: float) -> "LQRWeights":
        return LQRWeights(c * self.Q, c * self.R, c * self.Qf)


@dataclass
class ReferenceTrajectory:
    states: np.ndarray
    controls: np.ndarray
    dt: float

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float).reshape(len(self.states) - 1, -1)

    @property
    def T(self) -> int:
        return len(self.controls)

    def extended(self, hold_steps: int, u_hold=None) -> "ReferenceTrajectory":
        """Append ``hold_steps`` copies of the final state with control ``u_hold``."""
        if hold_steps <= 0:
            return self
        u_hold = np.zeros(self.controls.shape[1]) if u_hold is None else np.asarray(u_hold)
        xs = np.vstack([self.states, np.repeat(self.states[-1:], hold_steps, axis=0)])
        us = np.vstack([self.controls, np.repeat(u_hold[None], hold_steps, axis=0)])
        return ReferenceTrajectory(xs, us, self.dt)


def rollout(model, x0, controls):
    xs = [np.asarray(x0, dtype=float)]
    for u in controls:
        xs.append(model.step(xs[-1], u))
    return np.array(xs)


def _cost(X, U, x_goal, w: LQRWeights):
    dx = X - x_goal
    return 0.5 * (np.sum(dx[:-1] ** 2 * w.Q) + np.sum(U ** 2 * w.R) + np.sum(dx[-1] ** 2 * w.Qf))


def ilqr_reference(model, x0, x_goal, T: int, weights: LQRWeights, u_init=None,
                   max_iter: int = 200, tol: float = 1e-6) -> ReferenceTrajectory:
    """Locally optimal trajectory from ``x0`` toward ``x_goal`` over ``T`` steps.

    Gauss-Newton iLQR with an adaptive ``Quu`` regularizer and a backtracking
    line search. Stops when the cost decrease falls below ``tol``.
    """
    if T < 2:
        raise InvalidInputError("horizon must be at least 2")
    x0 = np.asarray(x0, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    n_u = model.n_u
    U = np.zeros((T, n_u)) if u_init is None else np.array(u_init, dtype=float).reshape(T, n_u)
    X = rollout(model, x0, U)
    J = _cost(X, U, x_goal, weights)
    Q, R, Qf = np.diag(weights.Q), np.diag(weights.R), np.diag(weights.Qf)
    reg = 1e-6

    for it in range(max_iter):
        A, B = model.jacobians(X[:-1], U)
        K = np.zeros((T, n_u, model.n_x))
        d = np.zeros((T, n_u))
        P = Qf
        p = Qf @ (X[-1] - x_goal)
        expected = 0.0
        for k in reversed(range(T)):
            qx = Q @ (X[k] - x_goal) + A[k].T @ p
            qu = R @ U[k] + B[k].T @ p
            Qxx = Q + A[k].T @ P @ A[k]
            Quu = R + B[k].T @ P @ B[k] + reg * np.eye(n_u)
            Qux = B[k].T @ P @ A[k]
            K[k] = -np.linalg.solve(Quu, Qux)
            d[k] = -np.linalg.solve(Quu, qu)
            P = Qxx + K[k].T @ Quu @ K[k] + K[k].T @ Qux + Qux.T @ K[k]
            P = 0.5 * (P + P.T)
            p = qx + K[k].T @ Quu @ d[k] + K[k].T @ qu + Qux.T @ d[k]
            expected += d[k] @ qu

        if -expected < tol:
            log.debug("iLQR converged in %d iterations, cost %.6g", it, J)
            break
        accepted = False
        for step in 0.5 ** np.arange(12):
            Xn = np.empty_like(X)
            Un = np.empty_like(U)
            Xn[0] = x0
            for k in range(T):
                Un[k] = U[k] + step * d[k] + K[k] @ (Xn[k] - X[k])
                Xn[k + 1] = model.step(Xn[k], Un[k])
            if not np.all(np.isfinite(Xn)):
                continue
            Jn = _cost(Xn, Un, x_goal, weights)
            # Armijo-style acceptance against the predicted decrease
            if J - Jn > -0.1 * step * expected:
                accepted = True
                break
        if not accepted:
            reg *= 10.0
            if reg > 1e8:
                raise NonConvergenceError("iLQR line search failed",
                                          ReferenceTrajectory(X, U, model.dt))
            continue
        reg = max(reg / 10.0, 1e-8) if step == 1.0 else reg * 2.0
        decrease = J - Jn
        X, U, J = Xn, Un, Jn
        if decrease < tol:
            log.debug("iLQR converged in %d iterations, cost %.6g", it + 1, J)
            break
    else:
        raise NonConvergenceError(f"iLQR did not converge in {max_iter} iterations",
                                  ReferenceTrajectory(X, U, model.dt))
    return ReferenceTrajectory(X, U, model.dt)


@dataclass
class TrackingController:
    """Time-varying affine feedback ``u_k = u_ff[k] + K[k] (x - x_ref[k])``.

    ``u_ff`` equals the reference control plus the correction that cancels
    the linearized model's defect along the reference.
    """

    gains: np.ndarray
    feedforward: np.ndarray
    reference: ReferenceTrajectory
    weights: LQRWeights
    u_min: Optional[np.ndarray] = None
    u_max: Optional[np.ndarray] = None
    angle_indices: tuple = ()
    cost_to_go: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return self.reference.dt

    def control(self, k: int, x, angle_indices=None):
        angles = self.angle_indices if angle_indices is None else angle_indices
        dx = wrap_angles(np.asarray(x) - self.reference.states[k], angles)
        u = self.feedforward[k] + dx @ self.gains[k].T
        if self.u_min is not None or self.u_max is not None:
            u = np.clip(u, self.u_min, self.u_max)
        return u


def riccati_gains(A, B, weights: LQRWeights, defects=None):
    """Backward Riccati recursion for ``dx+ = A_k dx + B_k du + c_k``.

    Returns ``(K, d, P)`` with the policy ``du = K_k dx + d_k`` and the
    cost-to-go Hessians ``P_0..P_T``.
    """
    T, n_x, n_u = B.shape
    Q, R, Qf = np.diag(weights.Q), np.diag(weights.R), np.diag(weights.Qf)
    c = np.zeros((T, n_x)) if defects is None else defects
    K = np.zeros((T, n_u, n_x))
    d = np.zeros((T, n_u))
    Ps = np.zeros((T + 1, n_x, n_x))
    P, p = Qf, np.zeros(n_x)
    Ps[T] = P
    for k in reversed(range(T)):
        Ak, Bk = A[k], B[k]
        g = P @ c[k] + p
        Quu = R + Bk.T @ P @ Bk
        Qux = Bk.T @ P @ Ak
        qu = Bk.T @ g
        try:
            K[k] = -np.linalg.solve(Quu, Qux)
            d[k] = -np.linalg.solve(Quu, qu)
        except np.linalg.LinAlgError:
            raise ControllabilityError(k) from None
        P = Q + Ak.T @ P @ Ak + Qux.T @ K[k]
        P = 0.5 * (P + P.T)
        p = Ak.T @ g + Qux.T @ d[k]
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(p))):
            raise ControllabilityError(k)
        Ps[k] = P
    return K, d, Ps


def build_tvlqr(model, reference: ReferenceTrajectory, weights: LQRWeights,
                u_min=None, u_max=None, affine: bool = True) -> TrackingController:
    """Linearize ``model`` about ``reference`` and compute tracking gains.

    With ``affine=True`` the zeroth-order mismatch
    ``model.step(x_ref[k], u_ref[k]) - x_ref[k+1]`` enters the recursion, so
    the feedforward compensates for a reference that is infeasible for the
    model.
    """
    if not np.isclose(model.dt, reference.dt):
        raise InvalidInputError(f"model dt {model.dt} differs from reference dt {reference.dt}")
    xs, us = reference.states, reference.controls
    A, B = model.jacobians(xs[:-1], us)
    defects = None
    if affine:
        defects = wrap_angles(model.step(xs[:-1], us) - xs[1:],
                              getattr(model, "angle_indices", ()))
    K, d, P = riccati_gains(A, B, weights, defects)
    return TrackingController(
        gains=K,
        feedforward=us + d,
        reference=reference,
        weights=weights,
        u_min=None if u_min is None else np.asarray(u_min, dtype=float),
        u_max=None if u_max is None else np.asarray(u_max, dtype=float),
        cost_to_go=P,
    )


@dataclass
class ClosedLoopResult:
    """Closed-loop rollout(s); arrays carry a leading batch axis when batched."""

    states: np.ndarray
    controls: np.ndarray
    tracking_error: np.ndarray
    diverged: np.ndarray
    dt: float


def track(controller: TrackingController, plant, x0, noise_std: float = 0.0,
          rng: Optional[np.random.Generator] = None,
          on_divergence: str = "raise") -> ClosedLoopResult:
    """Simulate the controller on ``plant`` from ``x0``.

    ``x0`` may be a single state or a ``(batch, n_x)`` array. Gaussian noise
    with standard deviation ``noise_std`` is added to the commanded control.
    With ``on_divergence="mark"`` diverged rollouts are frozen, flagged and
    given an infinite tracking error instead of raising.
    """
    if not np.isclose(plant.dt, controller.dt):
        raise InvalidInputError("plant and controller sample periods differ")
    angles = getattr(plant, "angle_indices", ())
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    x = np.atleast_2d(x0).copy()
    nb, T = len(x), controller.reference.T
    n_u = controller.gains.shape[1]
    X = np.empty((nb, T + 1, x.shape[1]))
    U = np.zeros((nb, T, n_u))
    X[:, 0] = x
    diverged = np.zeros(nb, dtype=bool)
    if noise_std > 0 and rng is None:
        raise InvalidInputError("noise requires an explicit random generator")
    for k in range(T):
        u = controller.control(k, x, angles)
        if noise_std > 0:
            u = u + noise_std * rng.standard_normal(u.shape)
        U[:, k] = u
        xn = plant.step(x, u)
        with np.errstate(invalid="ignore", over="ignore"):
            bad = ~(np.linalg.norm(xn, axis=1) <= DIVERGENCE_LIMIT)
        new_bad = bad & ~diverged
        if new_bad.any():
            if on_divergence == "raise":
                raise SimulationDivergenceError(k + 1)
            diverged |= new_bad
        xn[diverged] = x[diverged]
        x = xn
        X[:, k + 1] = x
    err = np.linalg.norm(wrap_angles(X - controller.reference.states, angles), axis=-1).mean(axis=1)
    err[diverged] = np.inf
    if single:
        return ClosedLoopResult(X[0], U[0], err[0], diverged[0], controller.dt)
    return ClosedLoopResult(X, U, err, diverged, controller.dt)


def is_stabilized(result: ClosedLoopResult, goal, tol: float = 0.2,
                  window_s: float = 1.0, angle_indices: Sequence[int] = ()):
    """True iff every state in the final ``window_s`` seconds is within ``tol`` of ``goal``.

    The comparison is strict. Returns an array for batched results.
    """
    X = result.states
    n = int(round(window_s / result.dt)) + 1
    dist = np.linalg.norm(wrap_angles(X[..., -n:, :] - goal, angle_indices), axis=-1)
    ok = np.all(dist < tol, axis=-1) & ~np.asarray(result.diverged)
    return bool(ok) if np.ndim(ok) == 0 else ok
