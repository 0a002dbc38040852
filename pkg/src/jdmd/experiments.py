"""End-to-end pipelines: data collection, training, evaluation and sweeps.

Every random draw comes from a generator seeded by ``(config.seed, cell
key)`` so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .bilinear import BilinearModel
from .config import ExperimentConfig
from .control import (
    LQRWeights,
    ReferenceTrajectory,
    TrackingController,
    build_tvlqr,
    ilqr_reference,
    is_stabilized,
    track,
    wrap_angles,
)
from .errors import ConfigError, ControllabilityError
from .lifting import (
    CARTPOLE_BOUNDS,
    MULTIROTOR_BOUNDS,
    bounds_from_data,
    build_cartpole_map,
    build_planar_multirotor_map,
)
from .regression import FitConfig, Trajectory, TrajectoryDataset, fit_edmd, fit_jdmd
from .simulators import (
    CartpoleParams,
    PlanarMultirotorParams,
    cartpole_nominal,
    cartpole_true,
    model_jacobians,
    multirotor_nominal,
    multirotor_true,
)

log = logging.getLogger(__name__)

# stream identifiers for seeding
_TRAIN, _TEST, _VALIDATION, _HIST = 1, 2, 3, 4


def rng_for(config: ExperimentConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, *key]))


@dataclass
class Task:
    """A plant pair, a reference and the tracking weights for one experiment."""

    config: ExperimentConfig
    true_plant: object
    nominal: object
    reference: ReferenceTrajectory
    goal: np.ndarray
    weights: LQRWeights
    u_min: Optional[np.ndarray]
    u_max: Optional[np.ndarray]

    @property
    def angle_indices(self):
        return self.true_plant.angle_indices

    def controller(self, model) -> TrackingController:
        return build_tvlqr(model, self.reference, self.weights, self.u_min, self.u_max)

    def sample_initial_conditions(self, rng, n: int, scale: float = 1.0) -> np.ndarray:
        half = scale * np.asarray(self.config.ic_halfwidth)
        return self.reference.states[0] + rng.uniform(-1.0, 1.0, (n, len(half))) * half


def _plants(config: ExperimentConfig):
    dt = config.dt
    if config.system == "cartpole":
        params = CartpoleParams(config.cart_mass, config.pole_mass, config.pole_length,
                                mu=config.mu, damping=config.damping,
                                deadband=config.deadband)
        return cartpole_true(params, dt), cartpole_nominal(params, dt)
    params = PlanarMultirotorParams(config.mr_mass, config.mr_inertia, config.mr_arm,
                                    drag=config.mr_drag,
                                    perturbation=config.mr_perturbation)
    return multirotor_true(params, dt), multirotor_nominal(params, dt)


@lru_cache(maxsize=16)
def _cartpole_swingup(cart_mass, pole_mass, pole_length, dt, T, ref_Q, ref_R, ref_Qf):
    params = CartpoleParams(cart_mass, pole_mass, pole_length)
    nominal = cartpole_nominal(params, dt)
    goal = np.array([0.0, np.pi, 0.0, 0.0])
    return ilqr_reference(nominal, np.zeros(4), goal, T, LQRWeights(ref_Q, ref_R, ref_Qf))


def build_task(config: ExperimentConfig) -> Task:
    """Plants, reference and weights for ``config``.

    Cartpole: iLQR swing-up on the nominal model from rest hanging down,
    followed by a hold at the upright goal. Planar multirotor: hover at the
    origin from perturbed initial conditions.
    """
    true_plant, nominal = _plants(config)
    T = int(round(config.trajectory_length_s * config.sample_rate_hz))
    hold = int(round(config.hold_s * config.sample_rate_hz))
    if config.system == "cartpole":
        ref = _cartpole_swingup(config.cart_mass, config.pole_mass, config.pole_length,
                                config.dt, T, config.ref_Q, config.ref_R, config.ref_Qf)
        ref = ref.extended(hold)
        goal = np.array([0.0, np.pi, 0.0, 0.0])
    else:
        goal = np.zeros(6)
        u_hover = np.full(2, nominal.hover_thrust)
        ref = ReferenceTrajectory(np.repeat(goal[None], T + hold + 1, axis=0),
                                  np.repeat(u_hover[None], T + hold, axis=0), config.dt)
    n_x = len(goal)
    weights = LQRWeights(config.Q, config.R, config.Qf_scale * np.asarray(config.Q))
    if config.u_limit is None:
        u_min = u_max = None
    else:
        n_u = len(config.R)
        u_max = np.full(n_u, config.u_limit)
        u_min = -u_max if config.system == "cartpole" else np.zeros(n_u)
    assert len(weights.Q) == n_x
    return Task(config, true_plant, nominal, ref, goal, weights, u_min, u_max)


# ---------------------------------------------------------------------------
# data


def collect_training_data(config: ExperimentConfig, n: Optional[int] = None,
                          task: Optional[Task] = None,
                          rng: Optional[np.random.Generator] = None) -> TrajectoryDataset:
    """Roll out the nominal tracking controller on the true plant with control noise.

    Diverged rollouts are discarded and redrawn, up to five times the
    requested number of attempts.
    """
    n = config.num_train_trajectories if n is None else n
    task = build_task(config) if task is None else task
    rng = rng_for(config, _TRAIN) if rng is None else rng
    controller = task.controller(task.nominal)
    kept: List[Trajectory] = []
    attempts = 0
    while len(kept) < n:
        want = n - len(kept)
        if attempts + want > 5 * n:
            raise RuntimeError(f"only {len(kept)} of {n} training rollouts stayed finite")
        attempts += want
        x0 = task.sample_initial_conditions(rng, want)
        res = track(controller, task.true_plant, x0, noise_std=config.control_noise_std,
                    rng=rng, on_divergence="mark")
        for i in range(want):
            if res.diverged[i]:
                log.info("discarding diverged training rollout")
                continue
            kept.append(Trajectory(res.states[i], res.controls[i]))
    return TrajectoryDataset(kept, config.sample_rate_hz,
                             metadata={"control_noise_std": config.control_noise_std,
                                       "ic_halfwidth": list(config.ic_halfwidth)})


def canonical_lifting(config: ExperimentConfig, dataset: Optional[TrajectoryDataset] = None):
    if config.lifting_bounds == "data" and dataset is not None:
        bounds = bounds_from_data(dataset.all_states(), config.bound_inflation)
    else:
        bounds = CARTPOLE_BOUNDS if config.system == "cartpole" else MULTIROTOR_BOUNDS
    if config.system == "cartpole":
        return build_cartpole_map(bounds)
    return build_planar_multirotor_map(bounds)


# ---------------------------------------------------------------------------
# training and evaluation


def fit_learner(learner: str, dataset: TrajectoryDataset, task: Task, lam: float,
                alpha: Optional[float] = None) -> BilinearModel:
    config = task.config
    lifting = canonical_lifting(config, dataset)
    if learner == "edmd":
        return fit_edmd(dataset, lifting, FitConfig(0.0, lam, config.batch_samples))
    if learner == "jdmd":
        alpha = config.alpha if alpha is None else alpha
        return fit_jdmd(dataset, lifting, task.nominal,
                        FitConfig(alpha, lam, config.batch_samples))
    raise ConfigError(f"unknown learner {learner!r}", "learner")


@dataclass
class Evaluation:
    tracking_error: np.ndarray
    stabilized: np.ndarray

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.stabilized))

    @property
    def all_stabilized(self) -> bool:
        return bool(np.all(self.stabilized))


def evaluate_model(model, task: Task, x0: np.ndarray) -> Evaluation:
    """Closed-loop tracking of ``task.reference`` on the true plant from each ``x0``."""
    try:
        controller = task.controller(model)
    except ControllabilityError as exc:
        log.info("controller synthesis failed: %s", exc)
        return Evaluation(np.full(len(x0), np.inf), np.zeros(len(x0), dtype=bool))
    res = track(controller, task.true_plant, x0, on_divergence="mark")
    ok = is_stabilized(res, task.goal, task.config.stabilize_tol,
                       task.config.stabilize_window_s, task.angle_indices)
    return Evaluation(res.tracking_error, np.atleast_1d(ok))


def train(learner: str, dataset: TrajectoryDataset, task: Task, alpha=None):
    """Fit ``learner``; with a lambda grid pick the value with the lowest validation error.

    Returns ``(model, lam)``.
    """
    config = task.config
    lams = config.lam if isinstance(config.lam, tuple) else (config.lam,)
    if len(lams) == 1:
        return fit_learner(learner, dataset, task, lams[0], alpha), lams[0]
    x_val = task.sample_initial_conditions(rng_for(config, _VALIDATION),
                                           max(config.num_validation_trajectories, 1))
    best = None
    for lam in lams:
        model = fit_learner(learner, dataset, task, lam, alpha)
        err = float(np.median(evaluate_model(model, task, x_val).tracking_error))
        if best is None or err < best[0]:
            best = (err, lam, model)
    log.info("%s: selected lambda=%g (validation error %.4g)", learner, best[1], best[0])
    return best[2], best[1]


def open_loop_error(model, trajectory: Trajectory, angle_indices: Sequence[int] = ()) -> float:
    """Mean L2 error over the predicted states ``x_1..x_T`` of the model
    rolled out from ``x_0`` under the recorded controls.

    Returns ``inf`` if the prediction diverges.
    """
    x = trajectory.states[0]
    errs = []
    with np.errstate(all="ignore"):
        for k, u in enumerate(trajectory.controls):
            x = model.step(x, u)
            if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e6:
                return float("inf")
            errs.append(np.linalg.norm(wrap_angles(x - trajectory.states[k + 1], angle_indices)))
    return float(np.mean(errs)) if errs else 0.0


def jacobian_error(model, plant, x, u) -> float:
    """Mean over points of ``|A_model - A_true|_F + |B_model - B_true|_F``."""
    A, B = model.jacobians(x, u)
    At, Bt = model_jacobians(plant, x, u)
    return float(np.mean(np.linalg.norm(A - At, axis=(-2, -1))
                         + np.linalg.norm(B - Bt, axis=(-2, -1))))


def quantile(values, q: float) -> float:
    """Linearly interpolated quantile that tolerates ``inf`` divergence sentinels."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    pos = q * (len(v) - 1)
    lo, hi = int(np.floor(pos)), int(np.ceil(pos))
    if v[lo] == v[hi]:
        return float(v[lo])
    return float(v[lo] + (pos - lo) * (v[hi] - v[lo]))


def summarize(values) -> dict:
    return {"median": quantile(values, 0.5), "q05": quantile(values, 0.05),
            "q95": quantile(values, 0.95)}


# ---------------------------------------------------------------------------
# sweeps


def run_cells(fn: Callable, cells: Sequence, workers: int = 1) -> Dict:
    """Run ``fn(cell)`` for every cell; results are keyed by cell, not completion order."""
    if workers <= 1:
        return {cell: fn(cell) for cell in cells}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {cell: pool.submit(fn, cell) for cell in cells}
        return {cell: futures[cell].result() for cell in cells}


def _friction_cell(args):
    config, mu_index = args
    config = config.replace(mu=config.mu_grid[mu_index])
    task = build_task(config)
    n_max = max(config.n_grid)
    data = collect_training_data(config, n_max, task, rng_for(config, _TRAIN, mu_index))
    x_test = task.sample_initial_conditions(rng_for(config, _TEST, mu_index),
                                            config.num_test_trajectories,
                                            config.test_ic_scale)
    nominal = evaluate_model(task.nominal, task, x_test)
    record = {"mu": config.mu, "nominal": nominal.all_stabilized,
              "nominal_success_rate": nominal.success_rate, "runs": []}
    for learner in ("edmd", "jdmd"):
        record[learner] = None
        for n in sorted(config.n_grid):
            model, lam = train(learner, data.subset(n), task)
            ev = evaluate_model(model, task, x_test)
            record["runs"].append({"learner": learner, "n": n, "lambda": lam,
                                   "success_rate": ev.success_rate,
                                   "median_error": float(np.median(ev.tracking_error))})
            if ev.all_stabilized:
                record[learner] = n
                break
    log.info("mu=%.2f nominal=%s edmd=%s jdmd=%s", config.mu, record["nominal"],
             record["edmd"], record["jdmd"])
    return record


def friction_sweep(config: ExperimentConfig) -> List[dict]:
    """Smallest number of training trajectories that stabilizes every test, per friction level.

    Returns one record per friction coefficient with keys ``mu``,
    ``nominal`` (bool), ``edmd`` and ``jdmd`` (int, or ``None`` for failure)
    plus the per-``N`` evaluation runs.
    """
    cells = [(config, i) for i in range(len(config.mu_grid))]
    results = run_cells(_friction_cell, cells, config.workers)
    return [results[c] for c in cells]


def _sample_cell(args):
    config, seed_index = args
    task = build_task(config)
    n_max = max(config.sample_grid)
    data = collect_training_data(config, n_max, task, rng_for(config, _TRAIN, seed_index))
    x_test = task.sample_initial_conditions(rng_for(config, _TEST, seed_index),
                                            config.num_test_trajectories,
                                            config.test_ic_scale)
    out = {}
    for n in sorted(config.sample_grid):
        for learner in ("edmd", "jdmd"):
            model, lam = train(learner, data.subset(n), task)
            ev = evaluate_model(model, task, x_test)
            out[(learner, n)] = (ev, lam)
    return out


def sample_efficiency_sweep(config: ExperimentConfig) -> List[dict]:
    """Tracking-error quantiles versus training-set size for EDMD and JDMD.

    Test errors are pooled over ``config.sweep_seeds`` independent datasets.
    """
    cells = [(config, s) for s in range(config.sweep_seeds)]
    results = run_cells(_sample_cell, cells, config.workers)
    rows = []
    for learner in ("edmd", "jdmd"):
        for n in sorted(config.sample_grid):
            evs = [results[c][(learner, n)] for c in cells]
            errs = np.concatenate([ev.tracking_error for ev, _ in evs])
            ok = np.concatenate([ev.stabilized for ev, _ in evs])
            rows.append({"learner": learner, "n": n, **summarize(errs),
                         "success_rate": float(np.mean(ok)),
                         "lambda": [lam for _, lam in evs]})
    return rows


def collect_test_data(config: ExperimentConfig, n: Optional[int] = None,
                      task: Optional[Task] = None, stream: int = _TEST) -> TrajectoryDataset:
    """Held-out trajectories recorded like the training data but from their own seed stream."""
    n = config.num_test_trajectories if n is None else n
    return collect_training_data(config, n, task, rng_for(config, stream))


@dataclass
class EvalReport:
    """Per-test-trajectory metrics plus their aggregates.

    Aggregates use linearly interpolated quantiles and are recomputed from
    the per-trajectory arrays, never stored independently.
    """

    learner: str
    tracking_error: np.ndarray
    stabilized: np.ndarray
    open_loop_error: np.ndarray
    jacobian_error: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.stabilized))

    def aggregates(self) -> dict:
        return {
            "tracking_error": summarize(self.tracking_error),
            "open_loop_error": summarize(self.open_loop_error),
            "jacobian_error": summarize(self.jacobian_error),
            "success_rate": self.success_rate,
        }

    def to_dict(self) -> dict:
        return {
            "learner": self.learner,
            "per_trajectory": {
                "tracking_error": [float(v) for v in self.tracking_error],
                "stabilized": [bool(v) for v in self.stabilized],
                "open_loop_error": [float(v) for v in self.open_loop_error],
                "jacobian_error": [float(v) for v in self.jacobian_error],
            },
            "aggregates": self.aggregates(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        per = d["per_trajectory"]
        return cls(d["learner"], np.array(per["tracking_error"], dtype=float),
                   np.array(per["stabilized"], dtype=bool),
                   np.array(per["open_loop_error"], dtype=float),
                   np.array(per["jacobian_error"], dtype=float), d.get("metadata", {}))


def evaluate(model, task: Task, tests: TrajectoryDataset, learner: str = "") -> EvalReport:
    """All metrics of ``model`` on recorded test trajectories.

    Closed-loop tracking starts from each test trajectory's initial state;
    open-loop and Jacobian errors use its recorded states and controls.
    """
    trajs = tests.trajectories
    x0 = np.array([t.states[0] for t in trajs])
    closed = evaluate_model(model, task, x0)
    ol = np.array([open_loop_error(model, t, task.angle_indices) for t in trajs])
    jac = np.array([jacobian_error(model, task.true_plant, t.states[:-1], t.controls)
                    for t in trajs])
    return EvalReport(learner, closed.tracking_error, closed.stabilized, ol, jac)


def histogram(values, edges) -> list:
    """Counts over ``edges``; non-finite values fall in the last bin so counts sum to the total."""
    vals = np.asarray(values, dtype=float)
    vals = np.where(np.isfinite(vals), np.clip(vals, edges[0], edges[-1]), edges[-1])
    return np.histogram(vals, bins=edges)[0].tolist()


def error_histograms(config: ExperimentConfig) -> dict:
    """Open-loop, closed-loop and Jacobian error distributions for EDMD and JDMD.

    EDMD is trained on ``hist_edmd_n`` trajectories and JDMD on
    ``hist_jdmd_n``; both are tested on ``hist_tests`` fresh trajectories
    recorded with the nominal controller on the true plant.
    """
    task = build_task(config)
    n_train = max(config.hist_edmd_n, config.hist_jdmd_n)
    data = collect_training_data(config, n_train, task, rng_for(config, _TRAIN))
    tests = collect_test_data(config, config.hist_tests, task, _HIST)
    reports = {}
    for name, n in (("edmd", config.hist_edmd_n), ("jdmd", config.hist_jdmd_n)):
        model, lam = train(name, data.subset(n), task)
        rep = evaluate(model, task, tests, name)
        rep.metadata.update({"n_train": n, "lambda": lam})
        reports[name] = rep
    out = {"learners": {k: r.to_dict() for k, r in reports.items()}, "histograms": {}}
    for metric in ("open_loop_error", "tracking_error", "jacobian_error"):
        pooled = np.concatenate([getattr(r, metric) for r in reports.values()])
        pooled = pooled[np.isfinite(pooled)]
        edges = (np.histogram_bin_edges(pooled, bins=config.hist_bins) if pooled.size
                 else np.linspace(0.0, 1.0, config.hist_bins + 1))
        out["histograms"][metric] = {
            "edges": edges.tolist(),
            **{k: histogram(getattr(r, metric), edges) for k, r in reports.items()},
        }
    return out
