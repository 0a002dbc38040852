import numpy as np
import pytest

from jdmd.errors import ConfigError, SimulationDivergenceError
from jdmd.simulators import (
    Cartpole,
    CartpoleParams,
    LinearModel,
    PlanarMultirotorParams,
    cartpole_nominal,
    finite_difference_jacobians,
    multirotor_nominal,
    multirotor_true,
    rk4_step,
)


def test_rk4_is_fourth_order_on_exponential():
    # x' = x: one RK4 step equals the degree-4 Taylor polynomial of e^h
    h = 0.1
    x1 = rk4_step(lambda x, u: x, np.array([1.0]), np.zeros(1), h)
    assert x1[0] == pytest.approx(1 + h + h**2 / 2 + h**3 / 6 + h**4 / 24, abs=1e-12)


def test_rk4_reports_divergence():
    with pytest.raises(SimulationDivergenceError) as info:
        rk4_step(lambda x, u: x * 1e300, np.array([1e10]), np.zeros(1), 1.0, step_index=7)
    assert info.value.step == 7


@pytest.mark.parametrize("x0", [[0.0, 2.0, 0.5, -1.0], [0.3, 0.4, 0.0, 0.0],
                                [0.0, 3.0, -1.0, 2.0], [-1.0, 1.0, 2.0, 3.0]])
def test_frictionless_energy_conservation(x0):
    plant = Cartpole(CartpoleParams(), 0.04)
    x = np.array(x0)
    e0 = plant.energy(x)
    for _ in range(25):  # one second
        x = plant.step(x, np.zeros(1))
    assert abs(plant.energy(x) - e0) <= 1e-5 * abs(e0)


def test_hanging_and_upright_are_equilibria():
    plant = Cartpole(CartpoleParams(mu=0.3, damping=0.01), 0.04)
    for th in (0.0, np.pi):
        x = np.array([0.5, th, 0.0, 0.0])
        np.testing.assert_allclose(plant.dynamics(x, np.zeros(1)), 0.0, atol=1e-12)


def test_friction_is_odd_and_bounded():
    plant = Cartpole(CartpoleParams(mu=0.4), 0.04)
    v = np.linspace(-3, 3, 61)
    f = plant.friction(v)
    np.testing.assert_allclose(f, -plant.friction(-v), atol=1e-15)
    bound = 0.4 * (1.0 + 0.2) * 9.81
    assert np.all(np.abs(f) <= bound) and abs(f[-1]) == pytest.approx(bound)


def test_friction_opposes_motion():
    plant = Cartpole(CartpoleParams(mu=0.3), 0.04)
    x = np.array([0.0, 0.0, 1.0, 0.0])
    free = Cartpole(CartpoleParams(), 0.04)
    assert plant.dynamics(x, np.zeros(1))[2] < free.dynamics(x, np.zeros(1))[2]


def test_deadband_suppresses_small_inputs():
    plant = Cartpole(CartpoleParams(deadband=0.2), 0.04)
    x = np.zeros(4)
    np.testing.assert_array_equal(plant.step(x, np.array([0.15])), x)
    assert plant.step(x, np.array([0.25]))[0] > 0


def test_nominal_is_lighter_and_frictionless():
    nominal = cartpole_nominal(CartpoleParams(mu=0.5, damping=0.1, deadband=0.1), 0.04)
    p = nominal.params
    assert p.mc == pytest.approx(1.0 / 1.2) and p.mp == pytest.approx(0.2 / 1.25)
    assert (p.mu, p.damping, p.deadband) == (0.0, 0.0, 0.0)


def test_substeps_grow_with_friction():
    assert Cartpole(CartpoleParams(mu=0.6), 0.04).substeps > 2
    assert Cartpole(CartpoleParams(), 0.04).substeps == 2
    assert Cartpole(CartpoleParams(), 0.01).substeps == 1


def test_batched_step_matches_single(rng):
    plant = Cartpole(CartpoleParams(mu=0.2), 0.04)
    X = rng.standard_normal((6, 4))
    U = rng.standard_normal((6, 1))
    batched = plant.step(X, U)
    for i in range(6):
        np.testing.assert_allclose(batched[i], plant.step(X[i], U[i]), atol=1e-14)


def test_multirotor_hover_and_drag():
    params = PlanarMultirotorParams()
    nominal = multirotor_nominal(params, 0.04)
    u = np.full(2, nominal.hover_thrust)
    np.testing.assert_allclose(nominal.step(np.zeros(6), u), 0.0, atol=1e-14)
    true = multirotor_true(params, 0.04)
    x = np.array([0, 0, 0, 1.0, 0, 0])
    uh = np.full(2, true.hover_thrust)
    assert true.dynamics(x, uh)[3] == pytest.approx(-params.drag / true.mass)
    # heavier true vehicle sinks at the nominal hover thrust
    assert true.dynamics(np.zeros(6), u)[4] < 0


def test_finite_difference_jacobians_exact_on_linear(rng):
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))
    lin = LinearModel(A, B)
    Ad, Bd = finite_difference_jacobians(lin.step, rng.standard_normal(3),
                                         rng.standard_normal(2))
    np.testing.assert_allclose(Ad, A, atol=1e-8)
    np.testing.assert_allclose(Bd, B, atol=1e-8)


def test_parameter_validation():
    with pytest.raises(ConfigError):
        CartpoleParams(mu=-0.1)
    with pytest.raises(ConfigError):
        CartpoleParams(l=0.0)
    with pytest.raises(ConfigError):
        Cartpole(CartpoleParams(), 0.0)
    with pytest.raises(ConfigError):
        PlanarMultirotorParams(perturbation=1.0)
