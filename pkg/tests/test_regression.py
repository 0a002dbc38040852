import numpy as np
import pytest

from jdmd.bilinear import BilinearModel, z_dim
from jdmd.errors import ConfigError, InvalidInputError
from jdmd.lifting import BasisTerm, build_cartpole_map, make_lifting_map
from jdmd.regression import (
    FitConfig,
    Trajectory,
    TrajectoryDataset,
    assemble_sample_blocks,
    fit_coefficients,
    fit_edmd,
    fit_jdmd,
    jdmd_objective,
)
from oracles import rel_err


@pytest.fixture
def small_lifting():
    return make_lifting_map(4, [BasisTerm("sin", (1,)), BasisTerm("cos", (1,))])


def test_rowwise_matches_kron(cartpole_dataset, cartpole_pair, small_lifting):
    _, nominal = cartpole_pair
    ds = cartpole_dataset.subset(2)
    ds.attach_prior(nominal)
    for alpha in (0.0, 0.3, 1.0):
        cfg = FitConfig(alpha, 1e-4, batch_samples=7)
        a = fit_coefficients(ds, small_lifting, cfg, "rowwise")
        b = fit_coefficients(ds, small_lifting, cfg, "kron")
        assert rel_err(a, b) <= 1e-9


def test_batch_size_does_not_change_fit(cartpole_dataset, small_lifting):
    a = fit_edmd(cartpole_dataset, small_lifting, FitConfig(lam=1e-6, batch_samples=1))
    b = fit_edmd(cartpole_dataset, small_lifting, FitConfig(lam=1e-6, batch_samples=64))
    assert rel_err(a.E, b.E) <= 1e-8


def test_solution_is_stationary_point(cartpole_dataset, cartpole_pair):
    _, nominal = cartpole_pair
    lifting = build_cartpole_map()
    ds = cartpole_dataset.subset(3)
    model = fit_jdmd(ds, lifting, nominal, FitConfig(0.1, 1e-3, 16))
    f0 = jdmd_objective(model.E, lifting, ds, 0.1, 1e-3)
    rng = np.random.default_rng(3)
    for _ in range(5):
        D = rng.standard_normal(model.E.shape)
        D *= 1e-4 / np.linalg.norm(D)
        assert jdmd_objective(model.E + D, lifting, ds, 0.1, 1e-3) >= f0 * (1 - 1e-12)


def test_stacked_rows_reproduce_objective(cartpole_dataset, cartpole_pair, small_lifting, rng):
    _, nominal = cartpole_pair
    ds = cartpole_dataset.subset(1)
    ds.attach_prior(nominal)
    E = rng.standard_normal((small_lifting.n_y, z_dim(small_lifting.n_y, 1)))
    lam, alpha = 0.05, 0.4
    total = lam * np.sum(E**2)
    for j in range(ds.num_samples):
        for rows, rhs in assemble_sample_blocks(small_lifting, ds.sample(j), alpha):
            total += np.sum((rows @ E.ravel(order="F") - rhs) ** 2)
    assert total == pytest.approx(jdmd_objective(E, small_lifting, ds, alpha, lam), rel=1e-10)


def test_jacobian_only_fit_matches_prior_on_linear_plant(rng):
    # with alpha = 1 and a linear prior, projected Jacobians of the fit equal the prior's
    A = np.array([[1.0, 0.1], [-0.2, 0.9]])
    B = np.array([[0.0], [0.1]])
    from jdmd.simulators import LinearModel

    prior = LinearModel(A, B, 0.1)
    x = rng.standard_normal((20, 2))
    u = rng.standard_normal((19, 1))
    ds = TrajectoryDataset([Trajectory(x, u)], 10.0)
    model = fit_jdmd(ds, make_lifting_map(2), prior, FitConfig(1.0, 1e-10))
    Ab, Bb = model.projected_jacobians(x[:-1], u)
    np.testing.assert_allclose(Ab, np.broadcast_to(A, Ab.shape), atol=1e-6)
    np.testing.assert_allclose(Bb, np.broadcast_to(B, Bb.shape), atol=1e-6)


def test_fit_returns_model_with_dataset_rate(cartpole_dataset, small_lifting):
    model = fit_edmd(cartpole_dataset, small_lifting)
    assert isinstance(model, BilinearModel)
    assert model.dt == pytest.approx(0.04)
    assert model.n_u == 1


def test_alpha_requires_prior(cartpole_dataset, small_lifting):
    ds = TrajectoryDataset(list(cartpole_dataset.trajectories), 25.0)
    with pytest.raises(ConfigError):
        fit_coefficients(ds, small_lifting, FitConfig(0.5, 1e-6))


def test_fit_config_validation():
    with pytest.raises(ConfigError):
        FitConfig(alpha=1.5)
    with pytest.raises(ConfigError):
        FitConfig(lam=-1.0)
    with pytest.raises(ConfigError):
        FitConfig(batch_samples=0)


def test_dataset_bookkeeping(cartpole_dataset, cartpole_pair):
    ds = TrajectoryDataset(list(cartpole_dataset.trajectories), 25.0)
    assert ds.num_samples == 5 * 30
    ds.attach_prior(cartpole_pair[1])
    sub = ds.subset(2)
    assert sub.num_samples == 60 and sub.jac_x.shape == (60, 4, 4)
    np.testing.assert_array_equal(sub.jac_u, ds.jac_u[:60])
    with pytest.raises(InvalidInputError):
        TrajectoryDataset(ds.trajectories, 25.0, ds.jac_x, None)
    with pytest.raises(InvalidInputError):
        TrajectoryDataset([], 25.0).arrays()


def test_b_and_constant_c_column_are_not_identifiable(rng):
    # u_i appears twice in z: as itself and as u_i times the constant observable
    lifting = make_lifting_map(2)
    n_y, n_u = 3, 1
    E = rng.standard_normal((n_y, z_dim(n_y, n_u)))
    shifted = E.copy()
    shifted[:, n_y] += 0.7
    shifted[:, n_y + n_u] -= 0.7
    a = BilinearModel(E, lifting, n_u, 0.1)
    b = BilinearModel(shifted, lifting, n_u, 0.1)
    x, u = rng.standard_normal((5, 2)), rng.standard_normal((5, 1))
    np.testing.assert_allclose(a.projected_step(x, u), b.projected_step(x, u), atol=1e-13)


def test_rows_per_sample_for_cartpole(cartpole_dataset, cartpole_pair):
    ds = cartpole_dataset.subset(1)
    ds.attach_prior(cartpole_pair[1])
    blocks = assemble_sample_blocks(build_cartpole_map(), ds.sample(0), 0.5)
    assert [b[0].shape for b in blocks] == [(33, 33 * 67), (16, 33 * 67), (4, 33 * 67)]
    assert len(assemble_sample_blocks(build_cartpole_map(), ds.sample(0), 0.0)) == 1


def test_sample_order_invariance(cartpole_dataset, cartpole_pair, small_lifting):
    ds = cartpole_dataset.subset(3)
    ds.attach_prior(cartpole_pair[1])
    trajs = ds.trajectories[::-1]
    flipped = TrajectoryDataset(list(trajs), ds.sample_rate_hz)
    cfg = FitConfig(0.2, 1e-2, 5)
    a = fit_jdmd(ds, small_lifting, cartpole_pair[1], cfg)
    b = fit_jdmd(flipped, small_lifting, cartpole_pair[1], cfg)
    assert rel_err(a.E, b.E) <= 1e-8
