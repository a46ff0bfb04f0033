"""``servokit`` command line.

Exit codes: 0 success, 1 domain error, 2 usage error. Data goes to files or
stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, ServokitError

VISION_KEYS = ("vision.sigma", "vision.low", "vision.high", "vision.slope", "vision.refine")
GLOBAL_KEYS = ("seed",)
IMAGE_SUFFIXES = (".pgm", ".ppm")


def _known_keys():
    from .camera import CAMERA_KEYS
    from .kinematics import DH_KEYS
    from .servo import SERVO_KEYS
    return set(CAMERA_KEYS) | set(DH_KEYS) | set(SERVO_KEYS) | set(VISION_KEYS) | set(GLOBAL_KEYS)


class _Ctx:
    """Merged settings (config file, then flags) plus logging helpers."""

    def __init__(self, args):
        self.args = args
        self.settings = cfgmod.load_config(args.config) if args.config else {}
        cfgmod.check_known(self.settings, _known_keys())
        if args.seed is not None:
            self.settings["seed"] = str(args.seed)
        self.seed = cfgmod.as_int(self.settings, "seed", 0)
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def set(self, key, value):
        if value is not None:
            self.settings[key] = str(value)

    def log(self, msg):
        if not self.args.quiet:
            print(msg, file=sys.stderr)


def _csv_floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what}: expected {n} comma-separated numbers") from None
    if len(vals) != n:
        raise argparse.ArgumentTypeError(f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


def _joint_list(text):
    return _csv_floats(text, 4, "joint vector")


def _quad_list(text):
    return _csv_floats(text, 8, "corners")


def _list_images(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise ServokitError(f"{directory}: not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


# --- subcommands -------------------------------------------------------------

def cmd_servo(ctx: _Ctx) -> int:
    from .camera import CameraIntrinsics
    from .kinematics import dh_from_config
    from .servo import (NOMINAL_Q, mount_from, read_desired_csv, run_servo, scene_from,
                        servo_config_from)

    a = ctx.args
    ctx.set("servo.lambda", a.gain)
    ctx.set("servo.dt", a.dt)
    ctx.set("servo.iterations", a.iterations)
    ctx.set("servo.stop_tolerance", a.stop_tol)
    ctx.set("servo.depth_mode", a.depth_mode)
    ctx.set("servo.z_star", a.z_star)
    if a.q_start is not None:
        ctx.set("servo.q_start", ",".join(map(repr, a.q_start)))
    if a.q_goal is not None:
        ctx.set("servo.q_goal", ",".join(map(repr, a.q_goal)))
    ctx.set("servo.desired_csv", a.desired)
    s = ctx.settings

    cfg = servo_config_from(s)
    dh = dh_from_config(s)
    K = CameraIntrinsics.from_config(s)
    scene = scene_from(s)
    mount = mount_from(s)
    q_start = cfgmod.as_floats(s, "servo.q_start", list(NOMINAL_Q + np.array([0.08, -0.06, 0.05, 0.07])))
    q_goal = cfgmod.as_floats(s, "servo.q_goal", list(NOMINAL_Q))
    if len(q_start) != 4 or len(q_goal) != 4:
        raise ConfigError("servo.q_start and servo.q_goal need 4 joint angles")
    desired = read_desired_csv(s["servo.desired_csv"], len(scene.points)) if "servo.desired_csv" in s else None

    trace = run_servo(cfg, dh, K, scene, q_start, q_goal, desired=desired, mount=mount)
    trace.write_csv(a.trace)
    if a.plots:
        from .plotting import plot_error_norms, plot_feature_paths
        plot_feature_paths(trace, f"{a.plots}_features.svg", K)
        plot_error_norms(trace, f"{a.plots}_error.svg")
    e = trace.total_error
    print(f"iterations: {len(trace)}")
    print(f"initial error: {e[0]:.6f} px")
    print(f"final error: {e[-1]:.6f} px")
    print(f"reduction: {100 * (1 - e[-1] / e[0]) if e[0] > 0 else 100.0:.4f} %")
    return 0


def _vision_params(ctx: _Ctx) -> dict:
    from . import vision
    a = ctx.args
    ctx.set("vision.sigma", a.sigma)
    ctx.set("vision.low", a.low)
    ctx.set("vision.high", a.high)
    ctx.set("vision.slope", a.slope)
    if a.no_refine:
        ctx.set("vision.refine", "false")
    s = ctx.settings
    refine = s.get("vision.refine", "true").strip().lower()
    if refine not in ("true", "false"):
        raise ConfigError("vision.refine must be true or false")
    return dict(
        sigma=cfgmod.as_float(s, "vision.sigma", vision.DEFAULT_SIGMA),
        low=cfgmod.as_float(s, "vision.low", vision.DEFAULT_LOW),
        high=cfgmod.as_float(s, "vision.high", vision.DEFAULT_HIGH),
        slope=cfgmod.as_float(s, "vision.slope", vision.DEFAULT_SLOPE),
        refine=refine == "true",
    )


def cmd_annotate(ctx: _Ctx) -> int:
    from .datapipe import LabeledImage, write_labels
    from .pnm import read_pnm
    from .vision import annotate

    params = _vision_params(ctx)
    if not params["sigma"] > 0 or not 0 <= params["low"] <= params["high"]:
        raise ValueError("need sigma > 0 and 0 <= low <= high")
    paths = _list_images(Path(ctx.args.inp))
    if not paths:
        raise ServokitError(f"no images (*.pgm, *.ppm) in {ctx.args.inp}")

    def work(p):
        try:
            return p, annotate(read_pnm(p), **params), None
        except ServokitError as exc:
            return p, None, exc

    with ThreadPoolExecutor(max_workers=max(1, ctx.args.workers)) as pool:
        results = list(pool.map(work, paths))
    items, failed = [], 0
    for p, corners, exc in results:
        if exc is not None:
            failed += 1
            print(f"{p.name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        else:
            items.append(LabeledImage(p.name, corners, "pixels"))
    write_labels(ctx.args.out, items)
    ctx.log(f"annotated {len(items)} of {len(paths)} images")
    return 1 if failed else 0


def cmd_augment(ctx: _Ctx) -> int:
    from .datapipe import AUG_OPS, augment_dataset, read_labels, write_labels
    from .pnm import read_pnm, write_pnm

    ops = [o.strip() for o in ctx.args.ops.split(",") if o.strip()]
    bad = [o for o in ops if o not in AUG_OPS]
    if bad:
        raise ValueError(f"unknown ops {bad}; choose from {','.join(AUG_OPS)}")
    src = Path(ctx.args.inp)
    items = read_labels(ctx.args.labels)
    if not items:
        raise ServokitError("label file is empty")
    samples = []
    for it in items:
        path = src / it.id
        if not path.exists():
            raise ServokitError(f"image for label {it.id!r} not found in {src}")
        samples.append((read_pnm(path), it))
    out = Path(ctx.args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = augment_dataset(samples, ops)
    for img, it in result:
        write_pnm(out / it.id, img)
    write_labels(out / "labels.csv", [it for _, it in result])
    ctx.log(f"{len(items)} images -> {len(result)} images in {out}")
    return 0


def cmd_split(ctx: _Ctx) -> int:
    import csv
    from .datapipe import read_labels, split_train_val

    ids = [it.id for it in read_labels(ctx.args.labels)]
    ctx.log(f"seed={ctx.seed}")
    train, val = split_train_val(ids, ctx.args.val_frac, ctx.seed)
    val_set = set(val)
    fh = open(ctx.args.out, "w", newline="") if ctx.args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "set"])
        for x in ids:
            w.writerow([x, "val" if x in val_set else "train"])
    finally:
        if fh is not sys.stdout:
            fh.close()
    ctx.log(f"train {len(train)}, val {len(val)}")
    return 0


def cmd_kfold(ctx: _Ctx) -> int:
    from .datapipe import kfold_partition, read_labels

    ids = [it.id for it in read_labels(ctx.args.labels)]
    ctx.log(f"seed={ctx.seed}")
    plan = kfold_partition(ids, ctx.args.k, ctx.seed)
    plan.write_csv(ctx.args.out)
    ctx.log("fold sizes: " + ",".join(map(str, plan.sizes())))
    return 0


def cmd_eval(ctx: _Ctx) -> int:
    from .datapipe import evaluate, read_labels

    report = evaluate(read_labels(ctx.args.pred), read_labels(ctx.args.truth))
    print(report.format())
    return 0


def cmd_archcheck(ctx: _Ctx) -> int:
    from .archcheck import arch_csv, build_modified_vgg19, verify_table

    arch = build_modified_vgg19(ctx.args.pool)
    report = verify_table(arch)
    print(report.format(), end="")
    if ctx.args.csv:
        Path(ctx.args.csv).write_text(arch_csv(arch))
    return 0 if report.ok else 1


def cmd_lr(ctx: _Ctx) -> int:
    from .archcheck import LrSchedule, lr_at

    a = ctx.args
    if a.step < 0:
        raise ValueError("step must be >= 0")
    print(repr(lr_at(LrSchedule(a.initial, a.factor, a.every), a.step)))
    return 0


def cmd_render_quad(ctx: _Ctx) -> int:
    from .datapipe import LabeledImage, write_labels
    from .pnm import write_pnm
    from .vision import render_quad

    a = ctx.args
    corners = np.array(a.corners).reshape(4, 2)
    rng = np.random.default_rng(ctx.seed)
    img = render_quad(a.width, a.height, corners, a.fg, a.bg, a.noise, a.shading, rng)
    write_pnm(a.out, img)
    if a.labels:
        write_labels(a.labels, [LabeledImage(Path(a.out).name, corners, "pixels")])
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value settings file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="unsigned 64-bit seed")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress diagnostics")

    p = argparse.ArgumentParser(prog="servokit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"servokit {__version__}")
    p.add_argument("--config", default=None, help="key = value settings file")
    p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    p.add_argument("--quiet", action="store_true", default=False, help="suppress diagnostics")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    s = sub.add_parser("servo", parents=[common], help="simulate the IBVS loop")
    s.add_argument("--trace", default="trace.csv", help="output trace CSV (default trace.csv)")
    s.add_argument("--plots", metavar="PREFIX", help="write PREFIX_features.svg and PREFIX_error.svg")
    s.add_argument("--q-start", type=_joint_list, help="start joint angles q1,q2,q3,q4 (rad)")
    s.add_argument("--q-goal", type=_joint_list, help="goal joint angles q1,q2,q3,q4 (rad)")
    s.add_argument("--desired", metavar="CSV", help="desired pixels u1,v1,...,u4,v4 instead of rendering q-goal")
    s.add_argument("--lambda", dest="gain", type=float, help="control gain (default 1)")
    s.add_argument("--dt", type=float, help="time step in s (default 0.005)")
    s.add_argument("--iterations", type=int, help="iteration count (default 1500)")
    s.add_argument("--stop-tol", help="early-stop threshold in px, or 'none' (default none)")
    s.add_argument("--depth-mode", choices=["true", "constant"], help="interaction depth source")
    s.add_argument("--z-star", type=float, help="constant depth estimate in m")
    s.set_defaults(func=cmd_servo)

    s = sub.add_parser("annotate", parents=[common], help="auto-label quadrilateral corners")
    s.add_argument("--in", dest="inp", required=True, help="directory of PGM/PPM images")
    s.add_argument("--out", required=True, help="output label CSV")
    s.add_argument("--sigma", type=float, help="Gaussian blur std-dev in px (default 1.4)")
    s.add_argument("--low", type=float, help="hysteresis low threshold (default 50)")
    s.add_argument("--high", type=float, help="hysteresis high threshold (default 100)")
    s.add_argument("--slope", type=float, help="slope of the intercept line family (default 1)")
    s.add_argument("--no-refine", action="store_true", help="skip the per-corner bisector pass")
    s.add_argument("--workers", type=int, default=1, help="worker threads (output order is fixed)")
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("augment", parents=[common], help="flip/rotate images and their labels")
    s.add_argument("--in", dest="inp", required=True, help="directory of source images")
    s.add_argument("--labels", required=True, help="pixel-unit label CSV")
    s.add_argument("--ops", default="rot180,hflip,vflip", help="comma list of rot180,hflip,vflip")
    s.add_argument("--out", required=True, help="output directory (images + labels.csv)")
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("split", parents=[common], help="seeded train/validation split")
    s.add_argument("--labels", required=True, help="label CSV")
    s.add_argument("--val-frac", type=float, default=0.1, help="validation fraction (default 0.1)")
    s.add_argument("--out", help="write id,set CSV here instead of stdout")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("kfold", parents=[common], help="seeded k-fold partition")
    s.add_argument("--labels", required=True, help="label CSV")
    s.add_argument("--k", type=int, default=7, help="number of folds (default 7)")
    s.add_argument("--out", required=True, help="output id,fold CSV")
    s.set_defaults(func=cmd_kfold)

    s = sub.add_parser("eval", parents=[common], help="per-corner MAE of predictions")
    s.add_argument("--pred", required=True, help="prediction CSV (normalized units)")
    s.add_argument("--truth", required=True, help="ground-truth CSV (normalized units)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("archcheck", parents=[common], help="verify the modified VGG-19 shape table")
    s.add_argument("--pool", choices=["avg", "max"], default="avg", help="pooling mode (default avg)")
    s.add_argument("--csv", help="also write the architecture as CSV")
    s.set_defaults(func=cmd_archcheck)

    s = sub.add_parser("lr", parents=[common], help="learning rate at a training step")
    s.add_argument("--step", type=int, required=True, help="optimizer step (>= 0)")
    s.add_argument("--initial", type=float, default=1e-5, help="initial rate (default 1e-5)")
    s.add_argument("--factor", type=float, default=0.95, help="decay factor (default 0.95)")
    s.add_argument("--every", type=int, default=2500, help="decay period in steps (default 2500)")
    s.set_defaults(func=cmd_lr)

    s = sub.add_parser("render-quad", parents=[common], help="draw a synthetic quadrilateral image")
    s.add_argument("--width", type=int, default=320, help="image width (default 320)")
    s.add_argument("--height", type=int, default=240, help="image height (default 240)")
    s.add_argument("--corners", type=_quad_list, required=True, help="u1,v1,...,u4,v4 (convex, in order)")
    s.add_argument("--fg", type=int, default=200, help="quad gray level (default 200)")
    s.add_argument("--bg", type=int, default=50, help="background gray level (default 50)")
    s.add_argument("--noise", type=float, default=0.0, help="Gaussian noise std-dev (default 0)")
    s.add_argument("--shading", type=float, default=0.0, help="horizontal ramp amplitude (default 0)")
    s.add_argument("--out", required=True, help="output PGM")
    s.add_argument("--labels", help="also write the ground-truth corners as a label CSV")
    s.set_defaults(func=cmd_render_quad)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(_Ctx(args))
    except ServokitError as exc:
        print(f"servokit {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"servokit {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"servokit {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
