"""Command-line front end.

One binary, one subcommand per pipeline stage. Every run writes a JSON
manifest next to its primary output (atomically) recording the resolved
configuration, seed, inputs, outputs, versions, and wall time. Outputs
never overwrite existing files unless ``--force`` is given, and inputs
are never mutated.

Setting precedence: command-line flags > config file (``--config`` or the
``SKELMOTION_CONFIG`` environment variable; JSON keyed by subcommand) >
built-in defaults. Failures print a single JSON error object to stderr
and exit nonzero.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, builtin_skeleton, compute_2d_rotations, load_skeleton
from . import dsi as dsi_mod
from . import qgcn
from .io import (
    apply_res,
    emit_aad_report,
    export_bvh,
    load_keypoints,
    read_qseq,
    synth_dataset,
    to_pose2d,
    training_items,
    write_qseq,
)
from .io.qseq import dump_qseq
from .quat import maad
from .skeleton import OrientationSequence

MANIFEST_FORMAT = "skelmotion-manifest/1"


class CliError(Exception):
    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


def _atomic_write(path, text):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _check_output(path, force):
    if os.path.exists(path) and not force:
        raise CliError(f"output exists: {path} (use --force to overwrite)", path=str(path))


def _read_text(path):
    if not os.path.exists(path):
        raise CliError(f"cannot read input: {path}", path=str(path))
    with open(path) as fh:
        return fh.read()


def _load_skel(spec):
    if spec is None:
        raise CliError("a skeleton is required (--skeleton)")
    if spec.startswith("builtin:"):
        return builtin_skeleton(spec.split(":", 1)[1])
    return load_skeleton(_read_text(spec))


def _write_manifest(command, settings, inputs, outputs, started, manifest_path):
    doc = {
        "format": MANIFEST_FORMAT,
        "command": command,
        "config": settings,
        "seed": settings.get("seed"),
        "inputs": inputs,
        "outputs": outputs,
        "versions": {"skelmotion": __version__},
        "wall_time_s": round(time.time() - started, 6),
    }
    _atomic_write(manifest_path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _settings(args, command, defaults):
    """defaults <- config-file section <- explicitly set flags."""
    merged = dict(defaults)
    cfg_path = args.config or os.environ.get("SKELMOTION_CONFIG")
    if cfg_path:
        section = json.loads(_read_text(cfg_path)).get(command, {})
        unknown = set(section) - set(defaults)
        if unknown:
            raise CliError(f"unknown config keys for {command}: {sorted(unknown)}")
        merged.update(section)
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            merged[key] = val
    return merged


def _interp_params(s):
    return dsi_mod.InterpolationParams(
        threshold=s["threshold"], delta=s["delta"], eta=s["eta"],
        variants=s["variants"], variation_sigma=s["sigma"], seed=s["seed"],
    )


def _parse_channels(text):
    ch = tuple(int(v) for v in str(text).split(","))
    return ch


_LIFT_DEFAULTS = {"confidence_floor": 0.3, "fps": 30.0, "seed": 0}


def cmd_lift(args):
    started = time.time()
    s = _settings(args, "lift", _LIFT_DEFAULTS)
    skel = _load_skel(args.skeleton)
    model = qgcn.load_checkpoint(args.checkpoint)
    if model.n_joints != skel.n_joints or model.n_bones != skel.n_bones:
        raise CliError(
            f"checkpoint sizes (J={model.n_joints}, B={model.n_bones}) do not "
            f"match the skeleton (J={skel.n_joints}, B={skel.n_bones})"
        )
    kf = load_keypoints(_read_text(args.keypoints), skel=skel,
                        confidence_floor=s["confidence_floor"])
    pose, kept = to_pose2d(kf, skel)
    rots = compute_2d_rotations(pose, skel)
    quats, root = qgcn.forward(model, pose, rots)
    seq = OrientationSequence(root_positions=root, quats=quats)
    _check_output(args.out, args.force)
    _atomic_write(args.out, dump_qseq(seq, skel.content_hash(), s["fps"]))
    _write_manifest("lift", s,
                    {"keypoints": args.keypoints, "checkpoint": args.checkpoint,
                     "skeleton": args.skeleton, "frames_used": kept},
                    {"sequence": args.out}, started, args.manifest or args.out + ".manifest.json")
    return 0


_TRAIN_DEFAULTS = {
    "samples": 64, "frames": 24, "epochs": 200, "seed": 0, "channels": "2,16,16,16",
    "fc_hidden": 32, "temporal_kernel": 5, "dropout": 0.1, "learning_rate": 0.02,
    "momentum": 0.9, "loss_mix": 0.5,
}


def cmd_train_toy(args):
    started = time.time()
    s = _settings(args, "train-toy", _TRAIN_DEFAULTS)
    skel = _load_skel(args.skeleton)
    config = qgcn.QGCNConfig(
        channels=_parse_channels(s["channels"]), fc_hidden=int(s["fc_hidden"]),
        temporal_kernel=int(s["temporal_kernel"]), dropout=float(s["dropout"]),
        learning_rate=float(s["learning_rate"]), momentum=float(s["momentum"]),
        loss_mix=float(s["loss_mix"]), epochs=int(s["epochs"]), seed=int(s["seed"]),
    )
    data = training_items(synth_dataset(int(s["samples"]), skel, int(s["seed"]),
                                        frames=int(s["frames"])))
    model, history = qgcn.train(data, config, skel=skel)
    _check_output(args.out, args.force)
    qgcn.save_checkpoint(model, args.out)
    loss_csv = args.loss_csv or args.out + ".loss.csv"
    _check_output(loss_csv, args.force)
    _atomic_write(loss_csv, "epoch,loss\n" + "".join(
        f"{i},{v!r}\n" for i, v in enumerate(history)))
    _write_manifest("train-toy", s, {"skeleton": args.skeleton},
                    {"checkpoint": args.out, "loss_csv": loss_csv},
                    started, args.manifest or args.out + ".manifest.json")
    return 0


_GRADCHECK_DEFAULTS = {
    "frames": 12, "channels": "2,8,8,8", "fc_hidden": 16, "temporal_kernel": 5,
    "dropout": 0.0, "n_params": 200, "tolerance": 1e-4, "seed": 0,
}


def cmd_gradcheck(args):
    s = _settings(args, "gradcheck", _GRADCHECK_DEFAULTS)
    skel = _load_skel(args.skeleton)
    config = qgcn.QGCNConfig(
        channels=_parse_channels(s["channels"]), fc_hidden=int(s["fc_hidden"]),
        temporal_kernel=int(s["temporal_kernel"]), dropout=float(s["dropout"]),
        seed=int(s["seed"]),
    )
    model = qgcn.init_model(config, skel=skel)
    sample = synth_dataset(1, skel, int(s["seed"]), frames=int(s["frames"]))[0]
    item = (sample.pose, sample.rots, sample.orientations, sample.depths())
    report = qgcn.gradient_check(model, item, tolerance=float(s["tolerance"]),
                                 n_params=int(s["n_params"]), seed=int(s["seed"]))
    print(json.dumps({
        "n_checked": report.n_checked,
        "max_rel_error": report.max_rel_error,
        "tolerance": report.tolerance,
        "worst_parameter": report.worst.name,
        "passed": report.passed,
    }, indent=1))
    return 0 if report.passed else 1


_INTERP_DEFAULTS = {
    "threshold": 0.3, "delta": 0.2, "eta": 25.0, "variants": 1, "sigma": 0.03,
    "seed": 0, "fps": 30.0,
}


def cmd_interp(args):
    started = time.time()
    s = _settings(args, "interp", _INTERP_DEFAULTS)
    seq, meta = read_qseq(args.seq)
    result = dsi_mod.dsi(seq, _interp_params(s))
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for v, vseq in enumerate(result.sequences):
        path = outdir / f"variant_{v:02d}.qseq"
        _check_output(path, args.force)
        write_qseq(vseq, path, meta["skeleton"], s["fps"])
        outputs[f"variant_{v:02d}"] = str(path)
    _write_manifest("interp", s, {"sequence": args.seq}, outputs, started,
                    args.manifest or str(outdir / "interp.manifest.json"))
    return 0


def cmd_compare_interp(args):
    started = time.time()
    s = _settings(args, "compare-interp", _INTERP_DEFAULTS)
    seq, _ = read_qseq(args.seq)
    params = _interp_params(s)
    result = dsi_mod.dsi(seq, params)
    pi_seq, _boundaries = dsi_mod.baseline_pi(seq, delta=params.delta)
    pwpi_seq = dsi_mod.baseline_pwpi(seq, delta=params.delta)
    csv = emit_aad_report({
        "original": seq, "pi": pi_seq, "pwpi": pwpi_seq,
        "dsi": result.sequences[0],
    })
    _check_output(args.out, args.force)
    _atomic_write(args.out, csv)
    _write_manifest("compare-interp", s, {"sequence": args.seq},
                    {"report": args.out}, started,
                    args.manifest or args.out + ".manifest.json")
    return 0


def cmd_export_bvh(args):
    started = time.time()
    s = _settings(args, "export-bvh", {"fps": 30.0, "seed": 0})
    seq, meta = read_qseq(args.seq)
    skel = _load_skel(args.skeleton)
    if meta["skeleton"] and meta["skeleton"] != skel.content_hash():
        raise CliError(
            f"sequence was written for skeleton {meta['skeleton']}, "
            f"got {skel.content_hash()}"
        )
    _check_output(args.out, args.force)
    _atomic_write(args.out, export_bvh(seq, skel, fps=s["fps"]))
    _write_manifest("export-bvh", s, {"sequence": args.seq, "skeleton": args.skeleton},
                    {"bvh": args.out}, started,
                    args.manifest or args.out + ".manifest.json")
    return 0


def cmd_res(args):
    started = time.time()
    s = _settings(args, "res", {"seed": 0, "fps": 30.0})
    seq, meta = read_qseq(args.seq)
    extracted, kept = apply_res(seq, int(s["seed"]))
    _check_output(args.out, args.force)
    _atomic_write(args.out, dump_qseq(extracted, meta["skeleton"], s["fps"]))
    _write_manifest("res", s, {"sequence": args.seq},
                    {"sequence": args.out, "kept_frames": [int(i) for i in kept]},
                    started, args.manifest or args.out + ".manifest.json")
    return 0


def _bone_groups(skel):
    def maybe(fn, *a):
        try:
            return set(fn(*a))
        except Exception:
            return set()

    hands = maybe(skel.descendant_bones, "wrist_l") | maybe(skel.descendant_bones, "wrist_r")
    lower = maybe(skel.descendant_bones, "hip_l") | maybe(skel.descendant_bones, "hip_r")
    for name in ("hip_l", "hip_r"):
        try:
            lower.add(skel.bone_index(name))
        except Exception:
            pass
    feet = maybe(skel.descendant_bones, "ankle_l") | maybe(skel.descendant_bones, "ankle_r")
    everything = set(range(skel.n_bones))
    return {
        "whole": everything,
        "hands": hands,
        "lower": lower,
        "upper": everything - lower,
        "major": everything - hands - feet,
    }


def _resolve_subset(spec, skel):
    if spec == "whole" or spec is None:
        return sorted(range(skel.n_bones)), "whole"
    groups = _bone_groups(skel) if skel is not None else {}
    if spec in groups:
        ids = sorted(groups[spec])
        if not ids:
            raise CliError(f"subset {spec!r} is empty for this skeleton")
        return ids, spec
    ids = []
    for token in spec.split(","):
        token = token.strip()
        if token.isdigit():
            ids.append(int(token))
        elif skel is not None:
            ids.append(skel.bone_index(token))
        else:
            raise CliError(f"named bone {token!r} needs --skeleton")
    return sorted(set(ids)), spec


def cmd_eval(args):
    s = _settings(args, "eval", {"scale": 1000.0, "seed": 0})
    pred, _ = read_qseq(args.pred)
    gt, _ = read_qseq(args.gt)
    if pred.quats.shape != gt.quats.shape:
        raise CliError(
            f"shape mismatch: pred {pred.quats.shape} vs gt {gt.quats.shape}"
        )
    skel = _load_skel(args.skeleton) if args.skeleton else None
    specs = (args.subset or "whole").split("+")
    rows = []
    for spec in specs:
        ids, label = _resolve_subset(spec.strip(), skel)
        value = maad(pred.quats, gt.quats, ids) * s["scale"]
        rows.append((label, len(ids), value))
    print(f"{'subset':<12}{'bones':>6}{'mAAD x10^3':>14}")
    for label, nb, value in rows:
        print(f"{label:<12}{nb:>6}{value:>14.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skelmotion",
        description="Skeletal-motion toolkit: pose lifting, interpolation, export.",
    )
    parser.add_argument("--config", help="JSON settings file (or set SKELMOTION_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(fn=fn)
        p.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")
        p.add_argument("--manifest", help="manifest path (default: beside the output)")
        p.add_argument("--seed", type=int)
        return p

    p = add("lift", cmd_lift, help="lift 2D keypoints to bone orientations")
    p.add_argument("--keypoints", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--confidence-floor", type=float)
    p.add_argument("--fps", type=float)

    p = add("train-toy", cmd_train_toy, help="train on synthetic samples")
    p.add_argument("--skeleton", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-csv")
    p.add_argument("--samples", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--channels")
    p.add_argument("--fc-hidden", type=int)
    p.add_argument("--temporal-kernel", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--loss-mix", type=float)

    p = add("gradcheck", cmd_gradcheck, help="verify gradients against finite differences")
    p.add_argument("--skeleton", required=True)
    p.add_argument("--frames", type=int)
    p.add_argument("--channels")
    p.add_argument("--fc-hidden", type=int)
    p.add_argument("--temporal-kernel", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--n-params", type=int)
    p.add_argument("--tolerance", type=float)

    p = add("interp", cmd_interp, help="dynamic skeletal interpolation")
    p.add_argument("--seq", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--variants", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--fps", type=float)

    p = add("compare-interp", cmd_compare_interp,
            help="AAD comparison of interpolation methods")
    p.add_argument("--seq", required=True)
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--threshold", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--variants", type=int)
    p.add_argument("--sigma", type=float)

    p = add("export-bvh", cmd_export_bvh, help="write a BVH file")
    p.add_argument("--seq", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fps", type=float)

    p = add("res", cmd_res, help="random extraction (keep one frame in ten)")
    p.add_argument("--seq", required=True)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, help="mAAD between sequences, scaled by 10^3")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--subset", help="whole|major|upper|lower|hands, ids, or names; "
                                    "join groups with '+'")
    p.add_argument("--skeleton")
    p.add_argument("--scale", type=float)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(json.dumps({"error": str(exc), **exc.info}), file=sys.stderr)
        return 1
    except Exception as exc:  # surface all failures as machine-readable
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
