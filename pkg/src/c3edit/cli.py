"""Command-line entry points for every pipeline phase.

Exit codes: 0 success, 2 usage or input validation, 3 phase violation or
session lock conflict, 4 numeric fault.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from filelock import FileLock, Timeout

from .errors import ConflictError, NumericFault, ParseError, PhaseError, ValidationError
from .pipeline import EditSession, RunConfig
from .scene import load_png, load_scene, make_ring_scene, save_scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PHASE = 3
EXIT_NUMERIC = 4

LOCK_TIMEOUT = 0.5  # seconds to wait for the session lock before giving up


def _session_lock(directory: Path) -> FileLock:
    return FileLock(directory / "session.lock")


def _load_session(directory: str) -> EditSession:
    path = Path(directory)
    if not path.exists():
        raise ValidationError(f"session directory {directory} does not exist")
    return EditSession.load(path)


def _print_progress(info: dict) -> None:
    iteration = info.get("iteration")
    total = info.get("total")
    loss = info.get("latest_loss")
    parts = [f"[{info.get('phase')}]"]
    if iteration is not None and total is not None:
        parts.append(f"{iteration}/{total}")
    if info.get("view_id") is not None:
        parts.append(f"view={info['view_id']}")
    if loss is not None:
        parts.append(f"loss={loss:.6f}")
    print(" ".join(parts), file=sys.stderr)


def _progress_printer(every: int = 10):
    state = {"count": 0}

    def cb(info: dict):
        state["count"] += 1
        if info.get("iteration") == info.get("total") or state["count"] % every == 0:
            _print_progress(info)

    return cb


def _load_masks(mask_dir: str, session: EditSession) -> dict:
    masks = {}
    directory = Path(mask_dir)
    if not directory.is_dir():
        raise ValidationError(f"mask directory {mask_dir} does not exist")
    for cam in session.cameras:
        path = directory / f"view{cam.id}.png"
        if path.exists():
            masks[cam.id] = load_png(path)[:, :, 0]
    if not masks:
        raise ValidationError(f"no view*.png masks found in {mask_dir}")
    return masks


# -- subcommand implementations ----------------------------------------------


def cmd_make_scene(args) -> int:
    scene, cameras = make_ring_scene(
        args.views, args.splats, args.seed, resolution=(args.resolution, args.resolution)
    )
    save_scene(args.out, scene, cameras)
    print(f"wrote {args.views}-view, {args.splats}-splat scene to {args.out}")
    return EXIT_OK


def cmd_init(args) -> int:
    directory = Path(args.session)
    if (directory / "manifest.json").exists() and not args.force:
        raise ValidationError(
            f"{directory} already holds a session; pass --force to overwrite"
        )
    scene, cameras = load_scene(args.scene)
    config = RunConfig()
    if args.config:
        with open(args.config) as fh:
            config = RunConfig.from_dict(json.load(fh))
    session = EditSession(
        scene, cameras, args.prompt, args.seed, config=config, directory=directory
    )
    directory.mkdir(parents=True, exist_ok=True)
    session.save()
    print(f"initialized session {session.session_id} at {directory} (phase: created)")
    return EXIT_OK


def _run_phase(args, runner) -> int:
    directory = Path(args.session)
    session = _load_session(args.session)
    try:
        with _session_lock(directory).acquire(timeout=LOCK_TIMEOUT):
            runner(session)
            session.save()
    except Timeout:
        raise ConflictError(f"another job holds the lock for session {directory}") from None
    print(f"session now in phase: {session.phase}")
    return EXIT_OK


def cmd_candidates(args) -> int:
    return _run_phase(args, lambda s: s.generate_candidates(_progress_printer()))


def cmd_select_gt(args) -> int:
    override = load_png(args.image) if args.image else None

    def runner(session: EditSession):
        session.select_gt(args.view, override_image=override, candidate_seed=args.candidate_seed)

    return _run_phase(args, runner)


def cmd_fit(args) -> int:
    return _run_phase(args, lambda s: s.fit_gt(_progress_printer()))


def cmd_propagate(args) -> int:
    return _run_phase(args, lambda s: s.propagate(_progress_printer()))


def cmd_edit(args) -> int:
    return _run_phase(args, lambda s: s.edit_all_views(_progress_printer()))


def cmd_lift(args) -> int:
    def runner(session: EditSession):
        masks = _load_masks(args.mask_dir, session) if args.mask_dir else None
        session.lift_to_3d(masks=masks, progress_cb=_progress_printer(50))

    return _run_phase(args, runner)


def cmd_run(args) -> int:
    """Scripted full run: created -> lifted without interaction."""
    directory = Path(args.session)
    session = _load_session(args.session)
    override = load_png(args.gt_image) if args.gt_image else None

    def runner(s: EditSession):
        masks = _load_masks(args.mask_dir, s) if args.mask_dir else None
        s.run_all((args.gt_view, override), masks=masks, progress_cb=_progress_printer(25))

    try:
        with _session_lock(directory).acquire(timeout=LOCK_TIMEOUT):
            runner(session)
    except Timeout:
        raise ConflictError(f"another job holds the lock for session {directory}") from None
    print(f"session now in phase: {session.phase}")
    return EXIT_OK


def cmd_eval(args) -> int:
    directory = Path(args.session)
    session = _load_session(args.session)
    try:
        with _session_lock(directory).acquire(timeout=LOCK_TIMEOUT):
            report = session.eval_report()
    except Timeout:
        raise ConflictError(f"another job holds the lock for session {directory}") from None
    print(json.dumps(
        {
            "image_text_score": report["image_text_score"],
            "image_image_score": report["image_image_score"],
            "frechet_distance": report["frechet_distance"],
        },
        indent=1,
    ))
    print(f"report written to {directory / 'report.json'}")
    return EXIT_OK


def cmd_report(args) -> int:
    directory = Path(args.session)
    report_path = directory / "report.json"
    session = _load_session(args.session)
    if report_path.exists():
        with open(report_path) as fh:
            report = json.load(fh)
    else:
        report = session.eval_report()

    # Scores are stored raw in [-1, 1]; print x100 to match the usual 0-100
    # presentation of such tables.
    print(f"{'Metric':<28}{'Value':>10}")
    print("-" * 38)
    print(f"{'Image-Text Score (x100)':<28}{report['image_text_score'] * 100:>10.2f}")
    print(f"{'Image-Image Score (x100)':<28}{report['image_image_score'] * 100:>10.2f}")
    print(f"{'Frechet Distance':<28}{report['frechet_distance']:>10.4f}")

    out_dir = directory / "report"
    out_dir.mkdir(exist_ok=True)
    fit_rows = [r for r in session.loss_log if r["phase"] == "fit"]
    with open(out_dir / "loss_curve.csv", "w") as fh:
        fh.write("iteration,loss,l1,perceptual\n")
        for row in fit_rows:
            comp = row["components"]
            fh.write(f"{row['iteration']},{row['loss']},{comp['l1']},{comp['perceptual']}\n")
    with open(out_dir / "scatter.csv", "w") as fh:
        fh.write("group,x,y\n")
        for point in report["scatter"]:
            fh.write(f"{point['group']},{point['x']},{point['y']}\n")
    print(f"loss curve and scatter data written to {out_dir}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(Path(args.session))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="c3edit",
        description="Controllable, view-consistent 2D-lifting 3D scene editing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-scene", help="generate a synthetic ring scene file")
    p.add_argument("--out", required=True)
    p.add_argument("--views", type=int, default=8)
    p.add_argument("--splats", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_make_scene)

    p = sub.add_parser("init", help="create a session directory")
    p.add_argument("--scene", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--session", required=True)
    p.add_argument("--config", help="JSON file with run-config overrides")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init)

    for name, func, help_text in (
        ("candidates", cmd_candidates, "generate per-view candidate edits"),
        ("fit", cmd_fit, "fit the GT view (phase 2)"),
        ("propagate", cmd_propagate, "propagate edits across views (phase 3)"),
        ("edit", cmd_edit, "produce final consistent edits for all views"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--session", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("select-gt", help="choose the GT view and image")
    p.add_argument("--session", required=True)
    p.add_argument("--view", type=int, required=True)
    p.add_argument("--image", help="optional manually edited replacement PNG")
    p.add_argument("--candidate-seed", type=int, default=None)
    p.set_defaults(func=cmd_select_gt)

    p = sub.add_parser("lift", help="lift edits into the 3D scene")
    p.add_argument("--session", required=True)
    p.add_argument("--mask-dir", help="directory of per-view binary masks (view<id>.png)")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("run", help="scripted full run to phase 'lifted'")
    p.add_argument("--session", required=True)
    p.add_argument("--gt-view", type=int, required=True)
    p.add_argument("--gt-image", help="optional GT override PNG")
    p.add_argument("--mask-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="compute metrics and write report.json")
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="print metric summary; export curve/scatter data")
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the session HTTP API (and web UI if built)")
    p.add_argument("--session", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PhaseError as exc:
        hint = f" (requires phase '{exc.required_phase}')" if exc.required_phase else ""
        print(f"error: {exc}{hint}", file=sys.stderr)
        return EXIT_PHASE
    except ConflictError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHASE
    except NumericFault as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
