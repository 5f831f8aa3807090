"""Cluster-based articulated-body dynamics for mechanisms with closed loops."""

from .cluster import cluster_joint_model, duality_residuals
from .counting import CountingScalar, OpCounter, counted_array, values_of
from .dynamics import (GRAVITY, DynamicsState, SingularClusterError, Workspace, approximate_aba,
                       approximate_tree, cluster_aba, cluster_rnea, unconstrained_tree)
from .joints import ConstraintError
from .model import Model, ModelError, load_model, model_from_dict, validate_model
from .oracle import KKTConvergenceError, kkt_forward_dynamics

__all__ = [
    "GRAVITY", "ConstraintError", "CountingScalar", "DynamicsState", "KKTConvergenceError",
    "Model", "ModelError", "OpCounter", "SingularClusterError", "Workspace", "approximate_aba",
    "approximate_tree", "cluster_aba", "cluster_joint_model", "cluster_rnea", "counted_array",
    "duality_residuals", "kkt_forward_dynamics", "load_model", "model_from_dict",
    "unconstrained_tree", "validate_model", "values_of",
]
__version__ = "0.1.0"
