import numpy as np
import pytest

from jdmd.config import ExperimentConfig
from jdmd.regression import Trajectory, TrajectoryDataset
from jdmd.simulators import CartpoleParams, cartpole_nominal, cartpole_true


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def cartpole_pair():
    params = CartpoleParams(mu=0.1, damping=0.005, deadband=0.1)
    return cartpole_true(params, 0.04), cartpole_nominal(params, 0.04)


def random_rollouts(plant, n_traj, T, rng, x_scale=(0.5, 3.0, 1.0, 2.0), u_scale=3.0):
    """Open-loop rollouts under random controls; cheap data for fitting tests."""
    trajs = []
    for _ in range(n_traj):
        x = rng.uniform(-1, 1, plant.n_x) * np.asarray(x_scale)
        u = u_scale * rng.standard_normal((T, plant.n_u))
        xs = [x]
        for k in range(T):
            xs.append(plant.step(xs[-1], u[k]))
        trajs.append(Trajectory(np.array(xs), u))
    return TrajectoryDataset(trajs, 1.0 / plant.dt)


@pytest.fixture(scope="session")
def cartpole_dataset(cartpole_pair):
    true, _ = cartpole_pair
    return random_rollouts(true, 5, 30, np.random.default_rng(5))


@pytest.fixture
def small_config():
    return ExperimentConfig(num_train_trajectories=2, num_test_trajectories=2,
                            num_validation_trajectories=1, lam=1e-4)


# one summary line per acceptance criterion, printed after the test run
_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for name, value in report.user_properties:
        if name == "criterion":
            _CRITERIA[value[0]] = (value[1], value[2], report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, detail, outcome = _CRITERIA[num]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}  {status}  {title}: {detail}")


@pytest.fixture
def criterion(record_property):
    """Record ``(number, title, measured detail)`` before asserting."""
    def record(num, title, detail):
        record_property("criterion", (num, title, detail))
        print(f"criterion {num}: {title}: {detail}")
    return record
