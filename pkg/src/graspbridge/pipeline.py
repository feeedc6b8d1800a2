"""End-to-end orchestration on a synthetic desk-scale scene.

A toy radial hand (K straight fingers on evenly spaced azimuths) grasps
a unit sphere sampled as a Fibonacci point cloud. Grasp configurations
are encoded by an identity latent codec (zero-padded to a shared width),
transported with minibatch entropic OT couplings, and regressed with the
score/flow networks. Translation integrates the learned SDE forward and
decodes for the target hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .bridge import make_training_batch
from .costs import CostKind, GraspAnnotation, cost_matrix, d_contact, d_jac, d_pose, max_effect
from .errors import ConfigError, DegenerateHullError, EmptyInputError, InputError
from .geometry import (
    BasePose,
    GraspConfig,
    extract_contact_map,
    rot6d_decode,
    rot6d_encode,
)
from .nets import MLPParams, OptimState, loss_grads, net_init, opt_init, opt_step
from .ot import default_eps, sample_pairs, sinkhorn
from .sampler import em_integrate
from .wrench import ContactPoint, WrenchHull, build_wrenches, mc_hull_iou

__all__ = [
    "ToyHandSpec",
    "Dataset",
    "LatentCodec",
    "RunConfig",
    "Checkpoint",
    "fibonacci_sphere",
    "fingertip_positions",
    "make_annotation",
    "gen_dataset",
    "fit_bridge",
    "train",
    "translate",
    "diversity",
    "eval_alignment",
    "METRICS_SCHEMA_VERSION",
]

METRICS_SCHEMA_VERSION = 1

OBJECT_POINTS = 2000
BASE_RADIUS = 1.9
CONTACT_TAU = 0.08
GEN_MAX_RETRIES = 50


@dataclass
class ToyHandSpec:
    """Radial toy hand: K straight fingers of length L on even azimuths."""

    hand_id: str
    n_fingers: int
    finger_length: float = 1.0
    joint_low: float = 0.2
    joint_high: float = 0.5

    def __post_init__(self):
        if self.n_fingers < 2:
            raise InputError("toy hand needs at least 2 fingers")
        if not self.finger_length > 0:
            raise InputError("finger length must be positive")
        if not self.joint_low < self.joint_high:
            raise InputError("joint range is empty")

    @property
    def azimuths(self) -> np.ndarray:
        return np.arange(self.n_fingers) * (2 * np.pi / self.n_fingers)

    @property
    def dof(self) -> int:
        """Configuration width: position(3) + rot6d(6) + joints."""
        return 9 + self.n_fingers

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ToyHandSpec":
        return cls(**d)


@dataclass
class Dataset:
    """A hand spec, the shared object cloud, and annotated grasps."""

    spec: ToyHandSpec
    object_points: np.ndarray
    object_normals: np.ndarray
    annotations: list
    seed: int


@dataclass
class LatentCodec:
    """Identity codec over config vectors, zero-padded to a shared width."""

    dim: int
    tag: str = "identity"

    def encode(self, config: GraspConfig) -> np.ndarray:
        vec = config.as_vector()
        if vec.size > self.dim:
            raise InputError(f"config width {vec.size} exceeds latent dim {self.dim}")
        return np.concatenate([vec, np.zeros(self.dim - vec.size)])

    def decode(self, z, spec: ToyHandSpec) -> GraspConfig:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != self.dim:
            raise InputError(f"latent width {z.size} != codec dim {self.dim}")
        return GraspConfig.from_vector(z[: spec.dof], spec.n_fingers, spec.hand_id)


@dataclass
class RunConfig:
    """Everything a training run needs; JSON-mirrorable."""

    cost: str = "contact"
    steps: int = 3000
    batch_size: int = 64
    sigma: float = 0.1
    eps: Optional[float] = None  # absolute override
    eps_scale: float = 0.1
    sinkhorn_tol: float = 1e-6
    sinkhorn_iters: int = 10_000
    hidden_sizes: tuple = (64, 64)
    lr: float = 2e-4
    warmup: int = 256
    clip_norm: float = 1.0
    ema_decay: float = 0.999
    ema_start: Optional[int] = None  # default: half of steps
    t_min: float = 1e-3
    iou_samples: int = 100_000
    flow_convention: str = "derived"
    lambda_variant: str = "rescaled"
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.flow_convention not in ("derived", "literal"):
            raise ConfigError(f"unknown flow convention {self.flow_convention!r}")
        if self.lambda_variant not in ("rescaled", "unitvar"):
            raise ConfigError(f"unknown lambda variant {self.lambda_variant!r}")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)

    @property
    def score_scale(self) -> str:
        """Sampler convention implied by the training-time weighting."""
        return "rescaled" if self.lambda_variant == "rescaled" else "unitvar"

    def resolved_ema_start(self) -> int:
        return self.steps // 2 if self.ema_start is None else self.ema_start

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


@dataclass
class Checkpoint:
    """Trained nets plus everything translation and resumption need."""

    v_params: MLPParams
    s_params: MLPParams
    v_state: OptimState
    s_state: OptimState
    latent_dim: int
    sigma: float
    t_min: float
    score_scale: str
    cost: str
    source_spec: Optional[ToyHandSpec]
    target_spec: Optional[ToyHandSpec]
    fingerprint: dict = field(default_factory=dict)

    @property
    def step(self) -> int:
        return self.v_state.step


def fibonacci_sphere(n: int = OBJECT_POINTS):
    """Unit-sphere Fibonacci lattice with outward normals."""
    if n < 1:
        raise InputError("need at least one object point")
    i = np.arange(n, dtype=float)
    z = 1 - (2 * i + 1) / n
    r = np.sqrt(np.maximum(0.0, 1 - z * z))
    golden = math.pi * (3 - math.sqrt(5))
    theta = golden * i
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    normals = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    return pts, normals


def _approach_rotation(d_hat: np.ndarray, roll: float) -> np.ndarray:
    """Proper rotation mapping local +z to -d_hat, with the given roll."""
    d = d_hat / np.linalg.norm(d_hat)
    ref = np.array([1.0, 0.0, 0.0])
    if abs(d @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    a = ref - (ref @ d) * d
    a /= np.linalg.norm(a)
    b = np.cross(a, d)  # a x b = -d, so det(+[a b -d]) = +1
    ca, sa = np.cos(roll), np.sin(roll)
    return np.column_stack([ca * a + sa * b, -sa * a + ca * b, -d])


def fingertip_positions(spec: ToyHandSpec, config: GraspConfig) -> np.ndarray:
    """World positions of the K fingertips for one configuration."""
    if config.joints.size != spec.n_fingers:
        raise InputError(
            f"config has {config.joints.size} joints, hand expects {spec.n_fingers}"
        )
    R = rot6d_decode(config.base.rot6d)
    alpha = config.joints
    phi = spec.azimuths
    local = spec.finger_length * np.column_stack([
        np.sin(alpha) * np.cos(phi),
        np.sin(alpha) * np.sin(phi),
        np.cos(alpha),
    ])
    return config.base.position + local @ R.T


def _tip_pose_summary(spec: ToyHandSpec, position, R, joints) -> np.ndarray:
    """6-D pose-like summary of the fingertip stack in the object frame.

    Translation block: mean fingertip position. Rotation block: mean
    moment of the tips about the (joint-independent) approach axis.
    """
    cfg = GraspConfig(BasePose(position, rot6d_encode(R)), joints, spec.hand_id)
    tips = fingertip_positions(spec, cfg)
    approach = R @ np.array([0.0, 0.0, 1.0])
    return np.concatenate([tips.mean(axis=0),
                           np.cross(tips, approach).mean(axis=0)])


def toy_jacobian(spec: ToyHandSpec, config: GraspConfig, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of the tip pose summary wrt joints."""
    R = rot6d_decode(config.base.rot6d)
    pos = config.base.position
    K = spec.n_fingers
    J = np.empty((6, K))
    for k in range(K):
        up = config.joints.copy()
        dn = config.joints.copy()
        up[k] += h
        dn[k] -= h
        J[:, k] = (_tip_pose_summary(spec, pos, R, up)
                   - _tip_pose_summary(spec, pos, R, dn)) / (2 * h)
    return J


def make_annotation(spec: ToyHandSpec, config: GraspConfig, object_points,
                    object_normals, tau: float = CONTACT_TAU) -> GraspAnnotation:
    """Contact map, wrenches, and max-effect vector for one grasp.

    Grasps without contact yield an annotation with contact=None and
    wrenches=None; the manip vector is always computed.
    """
    tips = fingertip_positions(spec, config)
    contact = extract_contact_map(object_points, object_normals, tips, tau)
    wrenches = None
    if len(contact) > 0:
        contacts = []
        for p in contact.points:
            n = -p / np.linalg.norm(p)  # inward force through the center
            contacts.append(ContactPoint(c=p, n=n, alpha=1.0))
        wrenches = build_wrenches(contacts)
    manip = max_effect(toy_jacobian(spec, config))
    return GraspAnnotation(
        config=config,
        contact=contact if len(contact) > 0 else None,
        wrenches=wrenches,
        manip=manip,
    )


def gen_dataset(spec: ToyHandSpec, n: int, seed: int) -> Dataset:
    """Sample n grasps with nonempty contact maps (bounded retries)."""
    if n < 1:
        raise InputError("dataset size must be >= 1")
    obj_pts, obj_nrm = fibonacci_sphere(OBJECT_POINTS)
    rng = np.random.default_rng(seed)
    annotations = []
    for _ in range(n):
        for attempt in range(GEN_MAX_RETRIES):
            d_hat = rng.standard_normal(3)
            d_hat /= np.linalg.norm(d_hat)
            roll = rng.uniform(0, 2 * np.pi)
            joints = rng.uniform(spec.joint_low, spec.joint_high, size=spec.n_fingers)
            R = _approach_rotation(d_hat, roll)
            config = GraspConfig(
                BasePose(BASE_RADIUS * d_hat, rot6d_encode(R)), joints, spec.hand_id
            )
            ann = make_annotation(spec, config, obj_pts, obj_nrm)
            if ann.contact is not None:
                annotations.append(ann)
                break
        else:
            raise InputError(
                f"failed to generate a contacting grasp in {GEN_MAX_RETRIES} tries"
            )
    return Dataset(spec, obj_pts, obj_nrm, annotations, seed)


def fit_bridge(z_source, z_target, minibatch_cost, cfg: RunConfig,
               latent_dim: Optional[int] = None):
    """Core minibatch-OT score/flow training loop.

    minibatch_cost(idx_s, idx_t) must return the ground-cost matrix for
    the selected index batches. Returns (v_params, s_params, v_state,
    s_state, loss_log).
    """
    z_source = np.asarray(z_source, dtype=float)
    z_target = np.asarray(z_target, dtype=float)
    if z_source.ndim != 2 or z_target.ndim != 2:
        raise InputError("latent sets must be 2-D arrays")
    if z_source.shape[1] != z_target.shape[1]:
        raise ConfigError("source and target latent widths differ")
    dim = latent_dim or z_source.shape[1]

    rng = np.random.default_rng(cfg.seed)
    in_dim = dim + 3  # state + time features; context empty by default
    v_params = net_init(in_dim, cfg.hidden_sizes, dim, seed=cfg.seed)
    s_params = net_init(in_dim, cfg.hidden_sizes, dim, seed=cfg.seed + 1)
    ema_start = cfg.resolved_ema_start()
    v_state = opt_init(v_params, lr=cfg.lr, warmup=cfg.warmup,
                       clip_norm=cfg.clip_norm, ema_decay=cfg.ema_decay,
                       ema_start=ema_start)
    s_state = opt_init(s_params, lr=cfg.lr, warmup=cfg.warmup,
                       clip_norm=cfg.clip_norm, ema_decay=cfg.ema_decay,
                       ema_start=ema_start)

    ns, nt = len(z_source), len(z_target)
    bs = min(cfg.batch_size, ns)
    bt = min(cfg.batch_size, nt)
    loss_log = []
    for _ in range(cfg.steps):
        idx_s = rng.choice(ns, size=bs, replace=False)
        idx_t = rng.choice(nt, size=bt, replace=False)
        C = minibatch_cost(idx_s, idx_t)
        eps = cfg.eps if cfg.eps is not None else default_eps(C, cfg.eps_scale)
        plan = sinkhorn(C, np.full(bs, 1 / bs), np.full(bt, 1 / bt), eps,
                        max_iter=cfg.sinkhorn_iters, tol=cfg.sinkhorn_tol)
        pairs = sample_pairs(plan, cfg.batch_size,
                             seed=int(rng.integers(2**63)))
        rows = idx_s[[i for i, _ in pairs]]
        cols = idx_t[[j for _, j in pairs]]
        batch = make_training_batch(z_source[rows], z_target[cols],
                                    cfg.sigma, rng, t_min=cfg.t_min,
                                    flow_convention=cfg.flow_convention,
                                    lambda_variant=cfg.lambda_variant)
        loss, v_grads, s_grads = loss_grads(v_params, s_params, batch)
        v_params, v_state = opt_step(v_params, v_grads, v_state)
        s_params, s_state = opt_step(s_params, s_grads, s_state)
        loss_log.append(loss)
    return v_params, s_params, v_state, s_state, loss_log


def train(source: Dataset, target: Dataset, cfg: RunConfig):
    """Alg.-style latent SB training between two grasp datasets.

    Returns (checkpoint, loss_log).
    """
    if not source.annotations or not target.annotations:
        raise EmptyInputError("both datasets must be nonempty")
    dim = max(source.spec.dof, target.spec.dof)
    codec = LatentCodec(dim)
    z0 = np.stack([codec.encode(a.config) for a in source.annotations])
    z1 = np.stack([codec.encode(a.config) for a in target.annotations])

    seed_rng = np.random.default_rng(cfg.seed ^ 0x5EED)

    def minibatch_cost(idx_s, idx_t):
        kind = CostKind(cfg.cost, n_samples=cfg.iou_samples,
                        seed=int(seed_rng.integers(2**63)), dims=3)
        batch_a = [source.annotations[i] for i in idx_s]
        batch_b = [target.annotations[j] for j in idx_t]
        return cost_matrix(batch_a, batch_b, kind)

    v_params, s_params, v_state, s_state, loss_log = fit_bridge(
        z0, z1, minibatch_cost, cfg, latent_dim=dim
    )
    ckpt = Checkpoint(
        v_params=v_params, s_params=s_params, v_state=v_state, s_state=s_state,
        latent_dim=dim, sigma=cfg.sigma, t_min=cfg.t_min,
        score_scale=cfg.score_scale, cost=cfg.cost,
        source_spec=source.spec, target_spec=target.spec,
        fingerprint=cfg.to_dict(),
    )
    return ckpt, loss_log


def translate(ckpt: Checkpoint, configs, n_steps: int, seed: int,
              score_scale: Optional[str] = None) -> list:
    """Encode, evolve the learned SDE forward, decode for the target hand.

    Inference uses the EMA weights. A score_scale argument, when given,
    must match the convention recorded in the checkpoint.
    """
    if not configs:
        return []
    if score_scale is not None and score_scale != ckpt.score_scale:
        raise ConfigError(
            f"requested score scale {score_scale!r} but checkpoint was "
            f"trained with {ckpt.score_scale!r}"
        )
    if ckpt.source_spec is None or ckpt.target_spec is None:
        raise ConfigError("checkpoint carries no hand specifications")
    for c in configs:
        if c.joints.size != ckpt.source_spec.n_fingers:
            raise ConfigError("input config does not match the source hand spec")
    codec = LatentCodec(ckpt.latent_dim)
    z0 = np.stack([codec.encode(c) for c in configs])
    rng = np.random.default_rng(seed)
    v_ema = ckpt.v_state.ema_params()
    s_ema = ckpt.s_state.ema_params()
    traj = em_integrate(v_ema, s_ema, z0, ckpt.sigma, n_steps, rng,
                        t_min=ckpt.t_min, score_scale=ckpt.score_scale)
    return [codec.decode(z, ckpt.target_spec) for z in traj.endpoint]


def diversity(configs) -> float:
    """Mean per-joint sample standard deviation (n-1 denominator)."""
    if len(configs) < 2:
        raise InputError("diversity needs at least two configurations")
    joints = np.stack([c.joints for c in configs])
    return float(joints.std(axis=0, ddof=1).mean())


def _pair_iou(a: GraspAnnotation, b: GraspAnnotation, n_samples: int, seed: int):
    """(iou, dims) for one pair; falls back from 6-D to the 3-D force
    reduction when the full wrench set is flat. Returns (None, None)
    when no non-degenerate comparison exists."""
    if a.wrenches is None or b.wrenches is None:
        return None, None
    for dims in (6, 3):
        try:
            ha = WrenchHull(a.wrenches.vertices, dims=dims)
            hb = WrenchHull(b.wrenches.vertices, dims=dims)
            return mc_hull_iou(ha, hb, n_samples, seed), dims
        except DegenerateHullError:
            continue
    return None, None


def eval_alignment(source, translated, n_samples: int, seed: int) -> dict:
    """Per-pair wrench-hull IoU plus pose/contact/jacobian distances.

    source and translated are equal-length lists of GraspAnnotation.
    Degenerate or contact-free pairs are excluded from the IoU mean and
    counted separately.
    """
    if len(source) != len(translated):
        raise InputError("source and translated lists differ in length")
    if len(source) == 0:
        raise EmptyInputError("nothing to evaluate")
    pairs = []
    for a, b in zip(source, translated):
        iou, dims = _pair_iou(a, b, n_samples, seed)
        entry = {
            "iou": iou,
            "iou_dims": dims,
            "d_pose": d_pose(a.config, b.config),
            "d_contact": (d_contact(a.contact, b.contact)
                          if a.contact is not None and b.contact is not None
                          else None),
            "d_jac": d_jac(a.manip, b.manip),
        }
        pairs.append(entry)
    ious = [p["iou"] for p in pairs if p["iou"] is not None]
    contacts = [p["d_contact"] for p in pairs if p["d_contact"] is not None]
    return {
        "schema_version": METRICS_SCHEMA_VERSION,
        "n_pairs": len(pairs),
        "pairs": pairs,
        "mean_iou": float(np.mean(ious)) if ious else None,
        "iou_pairs": len(ious),
        "iou_reduced_pairs": sum(1 for p in pairs if p["iou_dims"] == 3),
        "iou_missing_pairs": len(pairs) - len(ious),
        "mean_d_pose": float(np.mean([p["d_pose"] for p in pairs])),
        "mean_d_contact": float(np.mean(contacts)) if contacts else None,
        "contact_pairs": len(contacts),
        "mean_d_jac": float(np.mean([p["d_jac"] for p in pairs])),
        "iou_samples": n_samples,
        "seed": seed,
    }
