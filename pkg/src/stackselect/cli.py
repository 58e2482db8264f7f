"""Command-line interface: ``stackselect <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import errors as E
from . import io
from .assess import AssessConfig, Method, assess, select_reference
from .cpd import AlsConfig
from .evalmetrics import ordering_inversions, rank_sweep, run_method_suites, success_rate
from .metrics import dssim_map, nrmse, ssim
from .motion import (
    LINEAR_MODES,
    RandomMotionConfig,
    acquire_stack,
    apply_motion,
    linear_trajectory,
    random_trajectory,
    stack_geometry,
)
from .volume import Mask, Volume, make_phantom

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_USAGE_ERRORS = (E.InvalidParameter, E.RankTooLarge, E.InsufficientStacks, E.IndexOutOfRange)
_NUMERIC_ERRORS = (E.DegenerateTensor, E.SingularSystem, E.InvalidMatrix)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def exit_code_for(exc: BaseException) -> int:
    while isinstance(exc, (E.StackError, E.TrialError)):
        exc = exc.cause
    if isinstance(exc, UsageError) or isinstance(exc, _USAGE_ERRORS):
        return EXIT_USAGE
    if isinstance(exc, _NUMERIC_ERRORS):
        return EXIT_NUMERIC
    return EXIT_DATA


# helpers --------------------------------------------------------------------


def _read_volume(path) -> Volume:
    obj = io.read_native(path)
    if not isinstance(obj, Volume):
        raise E.InvalidVolume(f"{path}: expected an intensity volume, found a mask")
    return obj


def _read_mask(path) -> Mask:
    obj = io.read_native(path)
    if not isinstance(obj, Mask):
        raise E.InvalidVolume(f"{path}: expected a mask, found an intensity volume")
    return obj


def _read_pair(stack_path, mask_path) -> tuple[Volume, Mask]:
    for p in (stack_path, mask_path):
        if not Path(p).exists():
            raise E.IoError(f"no such file: {p}")
    return _read_volume(stack_path), _read_mask(mask_path)


def _als(args) -> AlsConfig:
    return AlsConfig(init_scheme=args.init, init_seed=args.als_seed,
                     max_iterations=args.max_iterations, fit_tolerance=args.fit_tolerance)


def _assess_cfg(args, method=None) -> AssessConfig:
    return AssessConfig(Method.parse(method or args.method), getattr(args, "rank", None),
                        getattr(args, "spacing", None), _als(args))


def _report_dict(report, timing: bool) -> dict:
    d = report.to_dict()
    if not timing:
        d["elapsed_ms"] = 0.0
    return d


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def parse_ranks(text: str) -> list[int]:
    """``"1..50"``, ``"5..5"`` or ``"1,2,4"``."""
    try:
        if ".." in text:
            lo, hi = (int(t) for t in text.split("..", 1))
            ranks = list(range(lo, hi + 1))
        else:
            ranks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise E.InvalidParameter(f"bad rank list {text!r}") from exc
    if not ranks or min(ranks) < 1:
        raise E.InvalidParameter(f"rank list {text!r} must hold ranks >= 1")
    return ranks


def parse_corruption(text: str) -> tuple[float, float]:
    """``"linear:R,T"`` -> (rotation step, translation step)."""
    kind, _, rest = text.partition(":")
    if kind != "linear":
        raise E.InvalidParameter(f"only linear corruption is supported, got {text!r}")
    try:
        rot, trans = (float(t) for t in rest.split(","))
    except ValueError as exc:
        raise E.InvalidParameter(f"bad corruption {text!r}, expected linear:ROT,TRANS") from exc
    return rot, trans


# subcommands -------------------------------------------------------------------


def cmd_phantom(args) -> int:
    vol, mask = make_phantom(args.size, args.seed, args.spacing)
    io.write_native(args.output, vol)
    if args.mask_out:
        io.write_native(args.mask_out, mask, vol.spacing, vol.orientation)
    return EXIT_OK


def cmd_simulate(args) -> int:
    vol, mask = _read_pair(args.input, args.mask)
    _, _, n, _ = stack_geometry(vol, args.orientation, args.thickness)
    if args.mode == "linear":
        traj = linear_trajectory(n, args.rot_step, args.trans_step, args.linear_mode)
    else:
        cfg = RandomMotionConfig(local_max_rot_deg=args.local_rot, local_max_trans_mm=args.local_trans,
                                 seed=args.seed)
        traj = random_trajectory(n, cfg)
    stack, smask = apply_motion(vol, mask, traj, args.orientation, args.thickness)
    io.write_native(args.output, stack)
    if args.mask_out:
        io.write_native(args.mask_out, smask, stack.spacing, stack.orientation)
    io.write_trajectory_json(traj, args.traj_out)
    return EXIT_OK


def cmd_assess(args) -> int:
    stack, mask = _read_pair(args.input, args.mask)
    report = assess(stack, mask, _assess_cfg(args), Path(args.input).stem)
    _emit(io.dumps(_report_dict(report, not args.no_timing)))
    return EXIT_OK


def cmd_select(args) -> int:
    paths = args.stacks
    if len(paths) % 2:
        raise UsageError("stacks must be given as STACK MASK pairs")
    if len(paths) < 4:
        raise E.InsufficientStacks(f"need at least 2 stack/mask pairs, got {len(paths) // 2}")
    stacks = []
    for s, m in zip(paths[::2], paths[1::2]):
        v, mk = _read_pair(s, m)
        stacks.append((v, mk, Path(s).stem))
    winner, reports = select_reference(stacks, _assess_cfg(args))
    mis = [r.mi for r in reports]
    doc = {
        "schema": io.REPORT_SCHEMA,
        "winner": winner,
        "tie": mis.count(min(mis)) > 1,
        "tie_break": "first",
        "items": [_report_dict(r, not args.no_timing) for r in reports],
    }
    if args.json:
        _emit(io.dumps(doc))
    else:
        _emit(winner + "\n" + io.dumps(doc["items"]))
    return EXIT_OK


def cmd_rank_sweep(args) -> int:
    vol, mask = _read_pair(args.input, args.mask)
    method = Method.parse(args.method)
    if method is Method.SVD_FS:
        raise E.InvalidParameter("rank-sweep supports cp and svd-rss")
    ranks = parse_ranks(args.ranks)
    rot, trans = parse_corruption(args.corrupt)
    _, _, n, _ = stack_geometry(vol, args.orientation, args.thickness)
    before = acquire_stack(vol, mask, args.orientation, args.thickness)
    traj = linear_trajectory(n, rot, trans, args.linear_mode)
    after = apply_motion(vol, mask, traj, args.orientation, args.thickness)
    points = rank_sweep(before, after, ranks, replace(_assess_cfg(args, method), rank=None))
    timing = not args.no_timing
    if args.csv:
        lines = ["rank,rmi,elapsed_ms"]
        for p in points:
            lines.append(f"{p.rank},{p.rmi:.9g},{p.elapsed_ms if timing else 0.0:.9g}")
        _emit("\n".join(lines) + "\n")
    else:
        items = [{"rank": p.rank, "rmi": p.rmi, "elapsed_ms": p.elapsed_ms if timing else 0.0}
                 for p in points]
        _emit(io.dumps({"schema": io.REPORT_SCHEMA, "method": method.value, "items": items}))
    return EXIT_OK


def cmd_trial_suite(args) -> int:
    methods = list(Method) if args.method == "all" else [Method.parse(args.method)]
    motion = RandomMotionConfig(local_max_rot_deg=args.local_rot, local_max_trans_mm=args.local_trans)
    cfgs = [_assess_cfg(args, m) for m in methods]
    seeds = [args.seed + i for i in range(args.trials)]
    outcomes = run_method_suites(seeds, motion, cfgs, args.trials, args.size, args.thickness)
    timing = not args.no_timing
    doc = {
        "schema": io.REPORT_SCHEMA,
        "trials": args.trials,
        "seed": args.seed,
        "success_rate": {m.value: success_rate(outcomes[m]) for m in methods},
        "inversions": ordering_inversions(outcomes) if len(methods) > 1 else [],
        "items": [
            {"method": m.value, "outcomes": [
                {**o.to_dict(), "success": o.success,
                 "reports": [_report_dict(r, timing) for r in o.reports]}
                for o in outcomes[m]]}
            for m in methods
        ],
    }
    text = io.dumps(doc)
    if args.output:
        io._write_text(args.output, text)
        _emit(io.dumps({"success_rate": doc["success_rate"]}))
    else:
        _emit(text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    a = _read_volume(args.a)
    b = _read_volume(args.b)
    if a.dims != b.dims:
        raise E.ShapeMismatch(f"dims differ: {a.dims} vs {b.dims}")
    mask = _read_mask(args.mask) if args.mask else None
    if args.metric == "ssim":
        value = ssim(a, b, mask=mask)
    elif args.metric == "nrmse":
        value = nrmse(a, b, mask=mask)
    else:
        d = dssim_map(a, b, mask=mask)
        if args.output:
            io.write_native(args.output, d)
        value = float(d.data.mean())
    if args.json:
        _emit(io.dumps({"metric": args.metric, "value": value}))
    else:
        _emit(f"{value:.9g}\n")
    return EXIT_OK


# parser ---------------------------------------------------------------------------


def _add_als(p) -> None:
    p.add_argument("--init", choices=("random", "svd"), default="random", help="CP-ALS initialisation")
    p.add_argument("--als-seed", type=int, default=0)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--fit-tolerance", type=float, default=1e-5)
    p.add_argument("--no-timing", action="store_true", help="write elapsed_ms as 0 for byte-stable output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stackselect", description="Motion assessment and reference-stack selection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="write a synthetic brain phantom")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mask-out")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("simulate", help="acquire a stack with simulated slice motion")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--mode", choices=("linear", "random"), default="linear")
    p.add_argument("--orientation", choices=("axial", "coronal", "sagittal"), default="axial")
    p.add_argument("--thickness", type=float, default=2.0)
    p.add_argument("--rot-step", type=float, default=0.0)
    p.add_argument("--trans-step", type=float, default=0.0)
    p.add_argument("--linear-mode", choices=LINEAR_MODES, default="cumulative")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--local-rot", type=float, default=5.0)
    p.add_argument("--local-trans", type=float, default=1.0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mask-out")
    p.add_argument("--traj-out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("assess", help="motion indicator of one stack")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--method", choices=("cp", "svd-rss", "svd-fs"), default="cp")
    p.add_argument("--rank", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--json", action="store_true", help="JSON output (the default)")
    _add_als(p)
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("select", help="pick the stack with the least motion")
    p.add_argument("stacks", nargs="+", metavar="STACK MASK")
    p.add_argument("--method", choices=("cp", "svd-rss", "svd-fs"), default="cp")
    p.add_argument("--rank", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--json", action="store_true")
    _add_als(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("rank-sweep", help="RMI and timing against rank")
    p.add_argument("-i", "--input", required=True, help="isotropic volume")
    p.add_argument("--mask", required=True)
    p.add_argument("--method", choices=("cp", "svd-rss"), default="cp")
    p.add_argument("--ranks", default="1..50")
    p.add_argument("--corrupt", default="linear:5,1")
    p.add_argument("--linear-mode", choices=LINEAR_MODES, default="cumulative")
    p.add_argument("--orientation", choices=("axial", "coronal", "sagittal"), default="axial")
    p.add_argument("--thickness", type=float, default=2.0)
    p.add_argument("--spacing", type=float)
    p.add_argument("--csv", action="store_true")
    _add_als(p)
    p.set_defaults(func=cmd_rank_sweep)

    p = sub.add_parser("trial-suite", help="seeded random-motion selection trials")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("all", "cp", "svd-rss", "svd-fs"), default="all")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--thickness", type=float, default=2.0)
    p.add_argument("--local-rot", type=float, default=5.0)
    p.add_argument("--local-trans", type=float, default=1.0)
    p.add_argument("--json", action="store_true", help="JSON output (the default)")
    p.add_argument("-o", "--output")
    _add_als(p)
    p.set_defaults(func=cmd_trial_suite)

    p = sub.add_parser("evaluate", help="SSIM, NRMSE or DSSIM between two volumes")
    p.add_argument("--metric", choices=("ssim", "nrmse", "dssim"), required=True)
    p.add_argument("a")
    p.add_argument("b", help="ground truth")
    p.add_argument("--mask")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", help="DSSIM map output file")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"stackselect: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except E.StackSelectError as exc:
        code = exit_code_for(exc)
        print(f"stackselect: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
