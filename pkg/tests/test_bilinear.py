import numpy as np
import pytest

from jdmd.bilinear import BilinearModel, lifted_jacobian_structs, stack_z, z_dim
from jdmd.errors import InvalidInputError
from jdmd.lifting import build_cartpole_map, build_planar_multirotor_map, lift, make_lifting_map
from oracles import central_difference


def test_stack_z_layout():
    z = stack_z(np.array([1.0, 2.0, 3.0]), np.array([10.0, -1.0]))
    np.testing.assert_array_equal(z, [1, 2, 3, 10, -1, 10, 20, 30, -1, -2, -3])
    assert z.size == z_dim(3, 2)


def test_stack_z_broadcasts():
    y = np.ones((4, 3))
    u = np.array([2.0])
    assert stack_z(y, u).shape == (4, z_dim(3, 1))
    with pytest.raises(InvalidInputError):
        stack_z(np.float64(1.0), u)


def test_lifted_step_matches_matrix_form(rng):
    lifting = make_lifting_map(2)
    n_y, n_u = 3, 2
    A = rng.standard_normal((n_y, n_y))
    B = rng.standard_normal((n_y, n_u))
    C = [rng.standard_normal((n_y, n_y)) for _ in range(n_u)]
    model = BilinearModel.from_matrices(A, B, C, lifting, 0.1)
    y, u = rng.standard_normal(n_y), rng.standard_normal(n_u)
    expected = A @ y + B @ u + u[0] * C[0] @ y + u[1] * C[1] @ y
    np.testing.assert_allclose(model.lifted_step(y, u), expected, atol=1e-14)
    np.testing.assert_array_equal(model.A, A)
    np.testing.assert_array_equal(model.C[1], C[1])


@pytest.mark.parametrize("build,n_u", [(build_cartpole_map, 1), (build_planar_multirotor_map, 2)])
def test_lifted_jacobian_structs(build, n_u, rng):
    lifting = build()
    for _ in range(5):
        x = rng.uniform(-1, 1, lifting.n_x)
        u = rng.standard_normal(n_u)
        A_hat, B_hat = lifted_jacobian_structs(lifting, x, u)
        fx = central_difference(lambda v: stack_z(lift(lifting, v), u), x)
        fu = central_difference(lambda v: stack_z(lift(lifting, x), v), u)
        np.testing.assert_allclose(A_hat, fx, atol=1e-6)
        np.testing.assert_allclose(B_hat, fu, atol=1e-6)


def test_projected_jacobians_match_differences(rng):
    lifting = build_cartpole_map()
    E = 0.1 * rng.standard_normal((lifting.n_y, z_dim(lifting.n_y, 1)))
    model = BilinearModel(E, lifting, 1, 0.04)
    x, u = rng.uniform(-1, 1, 4), rng.standard_normal(1)
    A, B = model.projected_jacobians(x, u)
    np.testing.assert_allclose(A, central_difference(lambda v: model.projected_step(v, u), x),
                               atol=1e-6)
    np.testing.assert_allclose(B, central_difference(lambda v: model.projected_step(x, v), u),
                               atol=1e-6)


def test_projected_step_is_G_of_lifted_step(rng):
    lifting = build_cartpole_map()
    E = rng.standard_normal((lifting.n_y, z_dim(lifting.n_y, 1)))
    model = BilinearModel(E, lifting, 1, 0.04)
    x, u = rng.standard_normal(4), rng.standard_normal(1)
    np.testing.assert_allclose(model.projected_step(x, u),
                               lifting.G @ model.lifted_step(lift(lifting, x), u))


def test_shape_checks(rng):
    lifting = make_lifting_map(2)
    with pytest.raises(InvalidInputError):
        BilinearModel(np.zeros((3, 5)), lifting, 1, 0.1)
    model = BilinearModel(np.zeros((3, z_dim(3, 1))), lifting, 1, 0.1)
    with pytest.raises(InvalidInputError):
        model.projected_step(np.zeros(2), np.zeros(2))
