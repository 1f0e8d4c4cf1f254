"""Vectorized rigid-body dynamics for kinematic trees."""
from ._backend import get_backend, use_backend
from .autodiff import Dual, jacobian_fwd, jvp
from .dynamics import (STANDARD_GRAVITY, base_acceleration, coriolis_vector, crba, crba_loop,
                       forward_dynamics, gravity_vector, rnea, rnea_loop)
from .errors import (DimensionError, ModelError, SingularInertiaError, UnknownFrameError,
                     UnsupportedFeatureError, UnsupportedStructureError, UrdfParseError,
                     VecRBDError)
from .kinematics import (forward_kinematics, forward_kinematics_scan, frame_transform,
                         geometric_jacobian, manipulability)
from .model import ModelBuilder, RobotModel, build_ancestor_mask, build_model, floating_base
from .robots import chain7, humanoid, humanoid_floating, load_builtin
from .urdf import load_urdf, parse_urdf

__version__ = "0.1.0"
