"""EDMD and Jacobian-regularized DMD (JDMD) fitting of bilinear models.

Unknowns are ``vec(E)``, the column-stacking of ``E``. With that ordering a
sample contributes

* dynamics rows ``sqrt(1 - alpha) (z^T kron I)`` against ``sqrt(1 - alpha) y+``,
* state-Jacobian rows ``sqrt(alpha) (A_hat^T kron G)`` against ``sqrt(alpha) vec(A~)``,
* control-Jacobian rows ``sqrt(alpha) (B_hat^T kron G)`` against ``sqrt(alpha) vec(B~)``,

plus ``lam |E|^2`` from the solver's base case. Because ``G`` selects rows of
``E`` the problem splits into independent problems per row of ``E`` that
share one coefficient matrix; :func:`fit_coefficients` exploits this and
carries all rows as right-hand-side columns through one recursive QR.
The dense Kronecker assembly is kept for small problems and as a check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from . import rls
from .bilinear import BilinearModel, lifted_jacobian_structs, stack_z, z_dim
from .errors import ConfigError, InvalidInputError
from .lifting import LiftingMap, lift
from .simulators import model_jacobians

log = logging.getLogger(__name__)


@dataclass
class Trajectory:
    """States ``x_0..x_T`` and controls ``u_0..u_{T-1}`` sampled at a fixed rate."""

    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.controls = np.asarray(self.controls, dtype=float).reshape(
            len(self.states) - 1, -1
        )

    def __len__(self):
        return len(self.controls)


class Sample(NamedTuple):
    x_next: np.ndarray
    x: np.ndarray
    u: np.ndarray
    jac_x: Optional[np.ndarray] = None
    jac_u: Optional[np.ndarray] = None


@dataclass
class TrajectoryDataset:
    """Trajectories plus optional prior Jacobians for every transition.

    Samples are ordered trajectory by trajectory; ``jac_x[j]`` and
    ``jac_u[j]`` belong to sample ``j``.
    """

    trajectories: List[Trajectory]
    sample_rate_hz: float
    jac_x: Optional[np.ndarray] = None
    jac_u: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.jac_x is None) != (self.jac_u is None):
            raise InvalidInputError("prior Jacobians must cover states and controls")
        if self.jac_x is not None and len(self.jac_x) != self.num_samples:
            raise InvalidInputError("prior Jacobians must be given for every sample")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def num_samples(self) -> int:
        return sum(len(t) for t in self.trajectories)

    @property
    def has_prior(self) -> bool:
        return self.jac_x is not None

    def arrays(self):
        """Return ``(x_next, x, u)`` stacked over all samples."""
        if not self.trajectories:
            raise InvalidInputError("dataset is empty")
        x = np.concatenate([t.states[:-1] for t in self.trajectories])
        x_next = np.concatenate([t.states[1:] for t in self.trajectories])
        u = np.concatenate([t.controls for t in self.trajectories])
        return x_next, x, u

    def sample(self, j: int) -> Sample:
        x_next, x, u = self.arrays()
        if self.has_prior:
            return Sample(x_next[j], x[j], u[j], self.jac_x[j], self.jac_u[j])
        return Sample(x_next[j], x[j], u[j])

    def all_states(self) -> np.ndarray:
        return np.concatenate([t.states for t in self.trajectories])

    def subset(self, n: int) -> "TrajectoryDataset":
        """First ``n`` trajectories, keeping the matching prior Jacobians."""
        trajs = self.trajectories[:n]
        p = sum(len(t) for t in trajs)
        jx = None if self.jac_x is None else self.jac_x[:p]
        ju = None if self.jac_u is None else self.jac_u[:p]
        return TrajectoryDataset(trajs, self.sample_rate_hz, jx, ju, dict(self.metadata))

    def attach_prior(self, prior) -> "TrajectoryDataset":
        """Compute and cache prior Jacobians at every sample if absent."""
        if not self.has_prior:
            _, x, u = self.arrays()
            self.jac_x, self.jac_u = model_jacobians(prior, x, u)
        return self


@dataclass(frozen=True)
class FitConfig:
    alpha: float = 0.0
    lam: float = 1e-6
    batch_samples: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}", "alpha")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative", "lambda")
        if self.batch_samples < 1:
            raise ConfigError("batch_samples must be at least 1", "batch_samples")


def _prior_for(sample: Sample, alpha: float):
    if alpha > 0 and (sample.jac_x is None or sample.jac_u is None):
        raise ConfigError("alpha > 0 requires prior Jacobians at every sample", "alpha")


def assemble_sample_blocks(lifting: LiftingMap, sample: Sample, alpha: float):
    """Row blocks over ``vec(E)`` contributed by one sample.

    Returns a list of ``(rows, rhs)`` pairs: the dynamics block (omitted
    when ``alpha == 1``) followed by the state- and control-Jacobian blocks
    (omitted when ``alpha == 0``).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]", "alpha")
    _prior_for(sample, alpha)
    G = lifting.G
    n_y = lifting.n_y
    u = np.atleast_1d(np.asarray(sample.u, dtype=float))
    blocks = []
    if alpha < 1.0:
        w = np.sqrt(1.0 - alpha)
        z = stack_z(lift(lifting, sample.x), u)
        y_next = lift(lifting, sample.x_next)
        blocks.append((w * np.kron(z[None, :], np.eye(n_y)), w * y_next))
    if alpha > 0.0:
        w = np.sqrt(alpha)
        A_hat, B_hat = lifted_jacobian_structs(lifting, sample.x, u)
        blocks.append((w * np.kron(A_hat.T, G), w * np.ravel(sample.jac_x, order="F")))
        blocks.append((w * np.kron(B_hat.T, G), w * np.ravel(sample.jac_u, order="F")))
    return blocks


def jdmd_objective(E, lifting: LiftingMap, dataset: TrajectoryDataset,
                   alpha: float, lam: float = 0.0) -> float:
    """Evaluate the regularized JDMD objective for coefficients ``E`` directly."""
    x_next, x, u = dataset.arrays()
    Z = stack_z(lift(lifting, x), u)
    Y = lift(lifting, x_next)
    val = (1.0 - alpha) * np.sum((Z @ E.T - Y) ** 2)
    if alpha > 0:
        G = lifting.G
        A_hat, B_hat = lifted_jacobian_structs(lifting, x, u)
        val += alpha * np.sum((G @ E @ A_hat - dataset.jac_x) ** 2)
        val += alpha * np.sum((G @ E @ B_hat - dataset.jac_u) ** 2)
    return float(val + lam * np.sum(E ** 2))


def _chunks(n, size):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def fit_coefficients(dataset: TrajectoryDataset, lifting: LiftingMap,
                     config: FitConfig, method: str = "rowwise") -> np.ndarray:
    """Solve for ``E``.

    ``method="rowwise"`` solves the row-separable problem with two shared
    factors of size ``n_z``; ``method="kron"`` assembles the full problem over
    ``vec(E)`` and is only practical for small ``n_y``.
    """
    x_next, x, u = dataset.arrays()
    if len(x) == 0:
        raise InvalidInputError("dataset has no samples")
    alpha = config.alpha
    if alpha > 0 and not dataset.has_prior:
        raise ConfigError("alpha > 0 requires prior Jacobians at every sample", "alpha")
    n_x, n_y, n_u = lifting.n_x, lifting.n_y, u.shape[-1]
    n_z = z_dim(n_y, n_u)
    if method == "kron":
        return _fit_kron(dataset, lifting, config, n_y, n_z)
    if method != "rowwise":
        raise ValueError(f"unknown method {method!r}")

    sel = np.arange(1, n_x + 1)
    unsel = np.setdiff1d(np.arange(n_y), sel)
    state_sel = rls.init(n_z, config.lam, n_rhs=n_x)
    state_rest = rls.init(n_z, config.lam, n_rhs=len(unsel))
    wd, wj = np.sqrt(1.0 - alpha), np.sqrt(alpha)

    for chunk in _chunks(len(x), config.batch_samples):
        z = stack_z(lift(lifting, x[chunk]), u[chunk])
        y_next = lift(lifting, x_next[chunk])
        rows, rhs = [], []
        if alpha < 1.0:
            rows.append(wd * z[:, None, :])
            rhs.append(wd * y_next[:, None, sel])
            state_rest = rls.update(state_rest, wd * z, wd * y_next[:, unsel])
        if alpha > 0.0:
            A_hat, B_hat = lifted_jacobian_structs(lifting, x[chunk], u[chunk])
            rows += [wj * np.swapaxes(A_hat, -1, -2), wj * np.swapaxes(B_hat, -1, -2)]
            rhs += [wj * np.swapaxes(dataset.jac_x[chunk], -1, -2),
                    wj * np.swapaxes(dataset.jac_u[chunk], -1, -2)]
        # keep each sample's rows contiguous
        F = np.concatenate(rows, axis=1).reshape(-1, n_z)
        d = np.concatenate(rhs, axis=1).reshape(-1, n_x)
        state_sel = rls.update(state_sel, F, d)

    E = np.empty((n_y, n_z))
    E[sel] = rls.solve_multi_rhs(state_sel).T
    E[unsel] = rls.solve_multi_rhs(state_rest).T
    return E


def _fit_kron(dataset, lifting, config, n_y, n_z):
    state = rls.init(n_y * n_z, config.lam)
    pending_rows, pending_rhs, count = [], [], 0
    for j in range(dataset.num_samples):
        for rows, rhs in assemble_sample_blocks(lifting, dataset.sample(j), config.alpha):
            pending_rows.append(rows)
            pending_rhs.append(rhs)
        count += 1
        if count == config.batch_samples or j == dataset.num_samples - 1:
            state = rls.update(state, np.vstack(pending_rows), np.concatenate(pending_rhs))
            pending_rows, pending_rhs, count = [], [], 0
    return rls.solve(state).reshape(n_z, n_y).T


def fit_edmd(dataset: TrajectoryDataset, lifting: LiftingMap,
             config: FitConfig = FitConfig(), method: str = "rowwise") -> BilinearModel:
    """Tikhonov-regularized EDMD: ``min |E Z - Y+|^2 + lam |E|^2``."""
    config = FitConfig(0.0, config.lam, config.batch_samples)
    E = fit_coefficients(dataset, lifting, config, method)
    return BilinearModel(E, lifting, dataset.arrays()[2].shape[-1], dataset.dt)


def fit_jdmd(dataset: TrajectoryDataset, lifting: LiftingMap, prior,
             config: FitConfig, method: str = "rowwise") -> BilinearModel:
    """JDMD: EDMD plus a penalty pulling projected Jacobians toward ``prior``'s.

    ``prior`` is any discrete model with a ``step`` method; its Jacobians are
    evaluated at every sample and cached on ``dataset``.
    """
    if config.alpha > 0:
        dataset.attach_prior(prior)
    E = fit_coefficients(dataset, lifting, config, method)
    return BilinearModel(E, lifting, dataset.arrays()[2].shape[-1], dataset.dt)
