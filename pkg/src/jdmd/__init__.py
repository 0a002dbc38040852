"""Bilinear Koopman models learned with EDMD and Jacobian-regularized DMD.

Submodules: ``lifting`` (observables), ``bilinear`` (the model), ``rls``
(recursive QR least squares), ``regression`` (EDMD/JDMD fits),
``simulators`` (true and nominal plants), ``control`` (iLQR references and
TVLQR tracking), ``experiments`` (pipelines and sweeps), ``config`` and
``io`` (configuration and file formats).
"""

from .bilinear import BilinearModel, lifted_jacobian_structs, stack_z, z_dim
from .config import ExperimentConfig, config_from_dict, load_config
from .control import (
    ClosedLoopResult,
    LQRWeights,
    ReferenceTrajectory,
    TrackingController,
    build_tvlqr,
    ilqr_reference,
    is_stabilized,
    track,
)
from .errors import (
    ConfigError,
    ControllabilityError,
    InvalidInputError,
    NonConvergenceError,
    RankDeficiencyError,
    SchemaError,
    SimulationDivergenceError,
)
from .lifting import (
    BasisTerm,
    LiftingMap,
    build_cartpole_map,
    build_planar_multirotor_map,
    lift,
    lift_jacobian,
    make_lifting_map,
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
    rk4_step,
)

__version__ = "0.1.0"
