"""Persistence: dataset/metrics JSON, binary checkpoints, CSV clouds.

Checkpoint layout (all multi-byte values little-endian):

    bytes 0..3   magic b"GBCK"
    bytes 4..7   uint32 format version (currently 1)
    bytes 8..11  uint32 header length H
    bytes 12..   H bytes of UTF-8 JSON header (layer sizes, activation,
                 step counts, schedules, hand specs, config fingerprint)
    then         float64 arrays, in this exact order, for the flow net
                 and then the score net:
                   weights/biases per layer (W0, b0, W1, b1, ...),
                   Adam first moments (same interleaving),
                   Adam second moments,
                   EMA shadow parameters.

Any size mismatch raises FormatError with the offending byte offset.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .costs import GraspAnnotation
from .errors import FormatError, InputError
from .geometry import ContactMap, GraspConfig
from .nets import MLPParams, OptimState
from .pipeline import Checkpoint, Dataset, ToyHandSpec
from .wrench import build_wrenches, ContactPoint

__all__ = [
    "save_dataset",
    "load_dataset",
    "save_checkpoint",
    "load_checkpoint",
    "save_metrics",
    "load_metrics",
    "save_point_cloud_csv",
    "load_point_cloud_csv",
]

CHECKPOINT_MAGIC = b"GBCK"
CHECKPOINT_VERSION = 1
DATASET_SCHEMA_VERSION = 1


# ---------------------------------------------------------------- datasets

def _annotation_to_dict(ann: GraspAnnotation) -> dict:
    d = {"config": ann.config.as_vector().tolist(),
         "hand_id": ann.config.hand_id,
         "manip": ann.manip.tolist() if ann.manip is not None else None}
    if ann.contact is not None:
        d["contact_points"] = ann.contact.points.tolist()
        d["contact_normals"] = ann.contact.normals.tolist()
    else:
        d["contact_points"] = None
        d["contact_normals"] = None
    return d


def _annotation_from_dict(d: dict, n_joints: int) -> GraspAnnotation:
    config = GraspConfig.from_vector(d["config"], n_joints, d["hand_id"])
    contact = None
    wrenches = None
    if d.get("contact_points"):
        contact = ContactMap(np.array(d["contact_points"]),
                             np.array(d["contact_normals"]))
        contacts = [ContactPoint(c=p, n=-p / np.linalg.norm(p), alpha=1.0)
                    for p in contact.points]
        wrenches = build_wrenches(contacts)
    manip = np.array(d["manip"]) if d.get("manip") is not None else None
    return GraspAnnotation(config=config, contact=contact,
                           wrenches=wrenches, manip=manip)


def save_dataset(ds: Dataset, path):
    doc = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "hand": ds.spec.to_dict(),
        "seed": ds.seed,
        "object_points": ds.object_points.tolist(),
        "object_normals": ds.object_normals.tolist(),
        "annotations": [_annotation_to_dict(a) for a in ds.annotations],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_dataset(path) -> Dataset:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"dataset file is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != DATASET_SCHEMA_VERSION:
        raise FormatError(
            f"unknown dataset schema version {doc.get('schema_version')!r}"
        )
    spec = ToyHandSpec.from_dict(doc["hand"])
    anns = [_annotation_from_dict(d, spec.n_fingers) for d in doc["annotations"]]
    return Dataset(
        spec=spec,
        object_points=np.array(doc["object_points"]),
        object_normals=np.array(doc["object_normals"]),
        annotations=anns,
        seed=doc["seed"],
    )


# -------------------------------------------------------------- checkpoints

def _net_arrays(params: MLPParams, state: OptimState):
    arrays = []
    for W, b in zip(params.weights, params.biases):
        arrays += [W, b]
    for m_w, m_b in ((state.m_w, state.m_b), (state.v_w, state.v_b),
                     (state.ema_w, state.ema_b)):
        for W, b in zip(m_w, m_b):
            arrays += [W, b]
    return arrays


def _opt_meta(state: OptimState) -> dict:
    return {"step": state.step, "lr": state.lr, "warmup": state.warmup,
            "clip_norm": state.clip_norm, "ema_decay": state.ema_decay,
            "ema_start": state.ema_start, "beta1": state.beta1,
            "beta2": state.beta2, "adam_eps": state.adam_eps}


def save_checkpoint(ckpt: Checkpoint, path):
    header = {
        "layer_sizes_v": ckpt.v_params.layer_sizes,
        "layer_sizes_s": ckpt.s_params.layer_sizes,
        "activation": ckpt.v_params.activation,
        "opt_v": _opt_meta(ckpt.v_state),
        "opt_s": _opt_meta(ckpt.s_state),
        "latent_dim": ckpt.latent_dim,
        "sigma": ckpt.sigma,
        "t_min": ckpt.t_min,
        "score_scale": ckpt.score_scale,
        "cost": ckpt.cost,
        "source_spec": ckpt.source_spec.to_dict() if ckpt.source_spec else None,
        "target_spec": ckpt.target_spec.to_dict() if ckpt.target_spec else None,
        "fingerprint": ckpt.fingerprint,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in (_net_arrays(ckpt.v_params, ckpt.v_state)
                    + _net_arrays(ckpt.s_params, ckpt.s_state)):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _layer_shapes(sizes):
    shapes = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        shapes += [(fan_in, fan_out), (fan_out,)]
    return shapes


def _read_net(buf, offset, sizes, activation, opt_meta):
    shapes = _layer_shapes(sizes)
    groups = []
    for _ in range(4):  # params, adam m, adam v, ema
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            nbytes = count * 8
            if offset + nbytes > len(buf):
                raise FormatError("checkpoint truncated", offset=offset)
            arrays.append(np.frombuffer(buf, dtype="<f8", count=count,
                                        offset=offset).reshape(shape).copy())
            offset += nbytes
        groups.append(arrays)
    def split(arrays):
        return arrays[0::2], arrays[1::2]
    pw, pb = split(groups[0])
    mw, mb = split(groups[1])
    vw, vb = split(groups[2])
    ew, eb = split(groups[3])
    params = MLPParams(pw, pb, activation)
    state = OptimState(step=opt_meta["step"], m_w=mw, v_w=vw, m_b=mb, v_b=vb,
                       ema_w=ew, ema_b=eb, lr=opt_meta["lr"],
                       warmup=opt_meta["warmup"],
                       clip_norm=opt_meta["clip_norm"],
                       ema_decay=opt_meta["ema_decay"],
                       ema_start=opt_meta["ema_start"],
                       beta1=opt_meta["beta1"], beta2=opt_meta["beta2"],
                       adam_eps=opt_meta["adam_eps"])
    return params, state, offset


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 12:
        raise FormatError("checkpoint shorter than its fixed header", offset=0)
    if buf[:4] != CHECKPOINT_MAGIC:
        raise FormatError("bad checkpoint magic", offset=0)
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unknown checkpoint format version {version}", offset=4)
    (hlen,) = struct.unpack_from("<I", buf, 8)
    if 12 + hlen > len(buf):
        raise FormatError("checkpoint header truncated", offset=12)
    try:
        header = json.loads(buf[12:12 + hlen].decode())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}", offset=12) from exc
    offset = 12 + hlen
    v_params, v_state, offset = _read_net(buf, offset, header["layer_sizes_v"],
                                          header["activation"], header["opt_v"])
    s_params, s_state, offset = _read_net(buf, offset, header["layer_sizes_s"],
                                          header["activation"], header["opt_s"])
    if offset != len(buf):
        raise FormatError("trailing bytes after checkpoint payload", offset=offset)
    return Checkpoint(
        v_params=v_params, s_params=s_params, v_state=v_state, s_state=s_state,
        latent_dim=header["latent_dim"], sigma=header["sigma"],
        t_min=header["t_min"], score_scale=header["score_scale"],
        cost=header["cost"],
        source_spec=(ToyHandSpec.from_dict(header["source_spec"])
                     if header["source_spec"] else None),
        target_spec=(ToyHandSpec.from_dict(header["target_spec"])
                     if header["target_spec"] else None),
        fingerprint=header["fingerprint"],
    )


# ------------------------------------------------------------------ metrics

def save_metrics(report: dict, path):
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_metrics(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"metrics file is not valid JSON: {exc}") from exc
    if "schema_version" not in doc:
        raise FormatError("metrics file lacks a schema_version")
    return doc


# --------------------------------------------------------------- CSV clouds

def save_point_cloud_csv(path, points, normals=None):
    """x,y,z[,nx,ny,nz] per line, '.' decimal, no header."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if normals is not None:
        normals = np.asarray(normals, dtype=float).reshape(-1, 3)
        if len(normals) != len(points):
            raise InputError("points and normals differ in length")
        data = np.concatenate([points, normals], axis=1)
    else:
        data = points
    with open(path, "w") as fh:
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_point_cloud_csv(path):
    """Returns (points, normals); normals is None for 3-column files."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) not in (3, 6):
                raise FormatError(
                    f"line {lineno}: expected 3 or 6 columns, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    if not rows:
        return np.empty((0, 3)), None
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise FormatError("mixed column counts in point-cloud CSV")
    data = np.array(rows)
    if data.shape[1] == 3:
        return data, None
    return data[:, :3], data[:, 3:]
