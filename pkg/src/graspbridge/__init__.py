"""Schrodinger-bridge transport between grasp-configuration distributions.

Library + CLI: physics-informed OT ground costs, log-domain Sinkhorn,
Brownian-bridge score/flow matching with from-scratch MLP regressors,
and SDE/ODE samplers, runnable end-to-end on a synthetic toy-hand scene.
"""

from .bridge import (
    BridgeSample,
    bridge_params,
    cond_flow_target,
    cond_score_target,
    lambda_schedule,
    sample_bridge,
    training_targets,
)
from .costs import CostKind, GraspAnnotation, cost_matrix, d_contact, d_jac, d_pose, d_wrench, max_effect
from .errors import GraspBridgeError
from .geometry import (
    BasePose,
    ContactMap,
    GraspConfig,
    chamfer,
    extract_contact_map,
    farthest_point_sample,
    rot6d_decode,
    rot6d_encode,
)
from .nets import MLPParams, OptimState, loss_grads, net_forward, net_init, opt_init, opt_step
from .ot import TransportPlan, default_eps, sample_pairs, sinkhorn
from .pipeline import (
    Checkpoint,
    Dataset,
    LatentCodec,
    RunConfig,
    ToyHandSpec,
    diversity,
    eval_alignment,
    gen_dataset,
    train,
    translate,
)
from .sampler import Trajectory, em_integrate, ode_integrate
from .wrench import ContactPoint, WrenchHull, build_wrenches, hull_membership, mc_hull_iou

__version__ = "0.1.0"
