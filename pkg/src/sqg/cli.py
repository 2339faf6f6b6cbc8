"""``sqg`` command line: run, sweep, resume, diag, export, verify.

Exit codes: 0 success, 2 configuration error, 3 blow-up or resolution loss,
4 corrupted artifacts.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io as sio
from .solver import BlowUpError, ConfigError, viscosity_sequence

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_CORRUPT = 0, 2, 3, 4

log = logging.getLogger("sqg")


def _run_dir(args, cfg, config_path) -> Path:
    root = Path(args.output_dir) if args.output_dir else sio.output_root()
    name = cfg.name or Path(config_path).stem
    return root / name


def cmd_run(args) -> int:
    cfg = sio.parse_config(args.config)
    run_dir = _run_dir(args, cfg, args.config)
    if cfg.flags:
        log.warning("flags: %s", ", ".join(cfg.flags))
    traj = sio.run_to_directory(cfg, run_dir, stop_at_step=args.stop_at_step)
    last = traj.frames[-1]
    print(f"{traj.status}: {run_dir} (t={last.t:.6g}, energy={last.energy:.6g}, Q={last.Q})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = sio.parse_config(args.config)
    root = _run_dir(args, cfg, args.config)

    def sinks(i, member):
        return [sio.RunWriter(root / f"eps_{i}", member)]

    seq = viscosity_sequence(cfg, args.epsilons, sinks_factory=sinks)
    lines = ["t,i,j,eps_i,eps_j,distance"]
    for (i, j), dist in sorted(seq.distances.items()):
        for t, d in zip(seq.times, dist):
            lines.append(",".join([sio.fmt(t), str(i), str(j), sio.fmt(seq.epsilons[i]),
                                   sio.fmt(seq.epsilons[j]), sio.fmt(d)]))
    (root / "distances.csv").write_text("\n".join(lines) + "\n")
    print(f"sweep of {len(seq.epsilons)} runs in {root}")
    return EXIT_OK


def cmd_resume(args) -> int:
    traj = sio.resume(args.run, stop_at_step=args.stop_at_step)
    print(f"{traj.status}: {args.run}")
    return EXIT_OK


def cmd_diag(args) -> int:
    frames = sio.recompute_diagnostics(args.run)
    for fr in frames:
        print(f"t={fr.t:.6g} energy={fr.energy:.6g} Q={fr.Q} resolved={fr.resolved} f={fr.f:.6g}")
    return EXIT_OK


def cmd_export(args) -> int:
    path = sio.export_plotdata(args.run, args.kind, args.out)
    print(path)
    return EXIT_OK


def cmd_verify(args) -> int:
    checked = sio.verify(args.run)
    print(f"ok: {len(checked)} artifacts verified")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate a configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--output-dir", help="output root (default: $SQG_OUTPUT_DIR or ./runs)")
    r.add_argument("--stop-at-step", type=int, default=None, help="interrupt after this step")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="viscosity sequence over several epsilons")
    s.add_argument("--config", required=True)
    s.add_argument("--epsilons", type=float, nargs="+", required=True)
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("resume", help="continue an interrupted run")
    c.add_argument("run", help="run directory or manifest.json")
    c.add_argument("--stop-at-step", type=int, default=None)
    c.set_defaults(func=cmd_resume)

    d = sub.add_parser("diag", help="recompute diagnostics from stored snapshots")
    d.add_argument("run")
    d.set_defaults(func=cmd_diag)

    e = sub.add_parser("export", help="write plot data as CSV")
    e.add_argument("run")
    e.add_argument("--kind", required=True, choices=sio.EXPORT_KINDS)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_export)

    v = sub.add_parser("verify", help="audit artifact checksums")
    v.add_argument("run")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"{exc.status}: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except sio.CorruptionError as exc:
        print(f"corruption: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
