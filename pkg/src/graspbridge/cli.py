"""Command-line entry point.

Subcommands: gen, train, translate, eval, report. Exit codes: 0 ok,
2 input error, 3 numeric/divergence error, 4 format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import io as gio
from . import pipeline
from .errors import FormatError, InputError, NumericError
from .geometry import GraspConfig
from .pipeline import RunConfig, ToyHandSpec

TRANSLATED_SCHEMA_VERSION = 1


def _threads_cap() -> int:
    """GRASPBRIDGE_THREADS caps worker parallelism; 0 forces the
    deterministic single-threaded path. Computation is currently
    single-threaded either way, so results do not depend on this."""
    raw = os.environ.get("GRASPBRIDGE_THREADS", "0")
    try:
        val = int(raw)
    except ValueError as exc:
        raise InputError(f"GRASPBRIDGE_THREADS must be an integer, got {raw!r}") from exc
    if val < 0:
        raise InputError("GRASPBRIDGE_THREADS must be >= 0")
    return val


def _load_hand_spec(path) -> ToyHandSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"hand spec is not valid JSON: {exc}") from exc
    try:
        return ToyHandSpec.from_dict(doc)
    except TypeError as exc:
        raise FormatError(f"hand spec has wrong fields: {exc}") from exc


def _cmd_gen(args):
    spec = _load_hand_spec(args.hand)
    ds = pipeline.gen_dataset(spec, args.n, args.seed)
    gio.save_dataset(ds, args.out)
    print(f"wrote {len(ds.annotations)} grasps to {args.out}")


def _cmd_train(args):
    source = gio.load_dataset(args.source)
    target = gio.load_dataset(args.target)
    cfg = RunConfig(
        cost=args.cost, steps=args.steps, batch_size=args.batch_size,
        sigma=args.sigma, eps=args.eps, eps_scale=args.eps_scale,
        sinkhorn_tol=args.sinkhorn_tol, sinkhorn_iters=args.sinkhorn_iters,
        t_min=args.t_min, iou_samples=args.iou_samples,
        flow_convention=args.flow_convention,
        lambda_variant=args.lambda_variant, seed=args.seed,
    )
    ckpt, loss_log = pipeline.train(source, target, cfg)
    gio.save_checkpoint(ckpt, args.out)
    if loss_log:
        print(f"step 0 loss {loss_log[0]:.6f} -> final loss {loss_log[-1]:.6f}")
    print(f"wrote checkpoint ({ckpt.step} steps) to {args.out}")


def _cmd_translate(args):
    ckpt = gio.load_checkpoint(args.ckpt)
    source = gio.load_dataset(args.infile)
    configs = [a.config for a in source.annotations]
    out = pipeline.translate(ckpt, configs, args.steps, args.seed,
                             score_scale=args.score_scale)
    doc = {
        "schema_version": TRANSLATED_SCHEMA_VERSION,
        "hand": ckpt.target_spec.to_dict(),
        "configs": [c.as_vector().tolist() for c in out],
        "n_steps": args.steps,
        "seed": args.seed,
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
    print(f"translated {len(out)} grasps -> {args.out}")


def _cmd_eval(args):
    source = gio.load_dataset(args.source)
    try:
        with open(args.translated) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"translated file is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != TRANSLATED_SCHEMA_VERSION:
        raise FormatError(
            f"unknown translated schema version {doc.get('schema_version')!r}"
        )
    spec = ToyHandSpec.from_dict(doc["hand"])
    translated = [
        pipeline.make_annotation(
            spec,
            GraspConfig.from_vector(v, spec.n_fingers, spec.hand_id),
            source.object_points, source.object_normals,
        )
        for v in doc["configs"]
    ]
    src_anns = source.annotations[: len(translated)]
    if len(src_anns) != len(translated):
        raise InputError("source dataset has fewer grasps than the translation")
    report = pipeline.eval_alignment(src_anns, translated,
                                     args.iou_samples, args.seed)
    gio.save_metrics(report, args.out)
    print(f"mean IoU {report['mean_iou']} over {report['iou_pairs']} pairs "
          f"-> {args.out}")


def _cmd_report(args):
    report = gio.load_metrics(args.metrics)
    rows = report.get("pairs", [])
    with open(args.out_csv, "w") as fh:
        fh.write("pair,iou,iou_dims,d_pose,d_contact,d_jac\n")
        for i, p in enumerate(rows):
            fh.write(",".join(
                "" if v is None else repr(v)
                for v in (i, p["iou"], p["iou_dims"], p["d_pose"],
                          p["d_contact"], p["d_jac"])
            ) + "\n")
    print(f"wrote {len(rows)} rows to {args.out_csv}")
    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        ious = [p["iou"] for p in rows if p["iou"] is not None]
        fig, ax = plt.subplots(figsize=(5, 3))
        if ious:
            ax.hist(ious, bins=20, range=(0, 1), color="#4878b0")
        ax.set_xlabel("wrench-hull IoU")
        ax.set_ylabel("pairs")
        mean_iou = report.get("mean_iou")
        title = "alignment" if mean_iou is None else f"alignment (mean {mean_iou:.3f})"
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(args.plot)
        print(f"wrote plot to {args.plot}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graspbridge")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic grasp dataset")
    g.add_argument("--hand", required=True, help="hand spec JSON")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    t = sub.add_parser("train", help="train the score/flow bridge")
    t.add_argument("--source", required=True)
    t.add_argument("--target", required=True)
    t.add_argument("--cost", choices=["pose", "contact", "wrench", "jacobian"],
                   default="contact")
    t.add_argument("--sigma", type=float, default=0.1)
    t.add_argument("--steps", type=int, default=3000)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--eps", type=float, default=None,
                   help="absolute entropic regularization override")
    t.add_argument("--eps-scale", type=float, default=0.1)
    t.add_argument("--sinkhorn-tol", type=float, default=1e-6)
    t.add_argument("--sinkhorn-iters", type=int, default=10_000)
    t.add_argument("--t-min", type=float, default=1e-3)
    t.add_argument("--iou-samples", type=int, default=100_000)
    t.add_argument("--flow-convention", choices=["derived", "literal"],
                   default="derived")
    t.add_argument("--lambda-variant", choices=["rescaled", "unitvar"],
                   default="rescaled")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_train)

    tr = sub.add_parser("translate", help="translate source grasps")
    tr.add_argument("--ckpt", required=True)
    tr.add_argument("--in", dest="infile", required=True,
                    help="dataset JSON of source grasps")
    tr.add_argument("--steps", type=int, default=100)
    tr.add_argument("--method", choices=["em"], default="em")
    tr.add_argument("--score-scale", choices=["rescaled", "unitvar"],
                    default=None, help="must match the checkpoint")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=_cmd_translate)

    e = sub.add_parser("eval", help="alignment metrics source vs translated")
    e.add_argument("--source", required=True)
    e.add_argument("--translated", required=True)
    e.add_argument("--iou-samples", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_eval)

    r = sub.add_parser("report", help="CSV/SVG summaries of a metrics file")
    r.add_argument("--metrics", required=True)
    r.add_argument("--out-csv", required=True)
    r.add_argument("--plot", default=None, help="optional SVG output path")
    r.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _threads_cap()
        args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except FormatError as exc:
        where = f" (offset {exc.offset})" if exc.offset is not None else ""
        print(f"format error: {exc}{where}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
