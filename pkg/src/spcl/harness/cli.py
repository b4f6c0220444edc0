"""Command line: run experiments, report on them, generate worlds and data.

    spcl run <config-file-or-preset>
    spcl report <experiment-dir>
    spcl gen-world --rooms-x 3 --rooms-y 3 --room-size 4 --door-density 0.35 --seed 7 --out world.txt
    spcl gen-data --world world.txt --counts 1:20,2:20 --seed 3 --out data.txt

Exit code 0 on full success, nonzero when any run cell failed. The
SPCL_OUTPUT_ROOT environment variable re-roots relative output directories.
"""

from __future__ import annotations

import argparse
import os
import sys

from spcl.harness.config import available_presets, load_experiment_config, preset_path
from spcl.harness.experiment import (
    compare_report,
    emit_plot_series,
    load_artifacts,
    resolve_output_dir,
    run_experiment,
)
from spcl.tasks import (
    generate_nav_dataset,
    generate_room_grid,
    load_world,
    save_nav_dataset,
    save_world,
)


def _resolve_config_arg(arg: str) -> str:
    if os.path.exists(arg):
        return arg
    try:
        return preset_path(arg)
    except ValueError:
        raise SystemExit(
            f"config {arg!r} is neither a file nor a preset "
            f"(presets: {', '.join(available_presets())})"
        ) from None


def _cmd_run(args) -> int:
    config = load_experiment_config(_resolve_config_arg(args.config))
    artifacts = run_experiment(config)
    table = compare_report(artifacts)
    exp_dir = resolve_output_dir(config)
    print(f"experiment written to {exp_dir}")
    print(table)
    failures = [a for a in artifacts if a.failed]
    for a in failures:
        print(f"FAILED {a.run_id}: {a.error}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_report(args) -> int:
    artifacts = load_artifacts(args.experiment_dir)
    table = compare_report(artifacts)
    print(table)
    for artifact in artifacts:
        if not artifact.failed:
            emit_plot_series(artifact)
    failures = [a for a in artifacts if a.failed]
    for a in failures:
        print(f"FAILED {a.run_id}: {a.error}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_gen_world(args) -> int:
    world = generate_room_grid(
        args.rooms_x, args.rooms_y, args.room_size, args.door_density, args.seed
    )
    save_world(world, args.out)
    print(f"wrote {args.out}: {world.n_rooms} rooms, {len(world.doors)} doors")
    return 0


def _parse_counts(text: str) -> dict[int, int]:
    counts = {}
    for part in text.split(","):
        r, n = part.split(":")
        counts[int(r)] = int(n)
    return counts


def _cmd_gen_data(args) -> int:
    world = load_world(args.world)
    dataset = generate_nav_dataset(
        world, _parse_counts(args.counts), args.seed, max_attempts=args.max_attempts
    )
    save_nav_dataset(dataset, args.out)
    print(f"wrote {args.out}: {len(dataset)} samples, rounds {dataset.counts}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spcl", description="self-paced curriculum learning experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config or preset")
    p_run.add_argument("config", help="path to a config file, or a preset name")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="re-print the summary and emit plot series")
    p_rep.add_argument("experiment_dir", help="directory written by `spcl run`")
    p_rep.set_defaults(func=_cmd_report)

    p_world = sub.add_parser("gen-world", help="generate a room-grid world file")
    p_world.add_argument("--rooms-x", type=int, default=3)
    p_world.add_argument("--rooms-y", type=int, default=3)
    p_world.add_argument("--room-size", type=int, default=4)
    p_world.add_argument("--door-density", type=float, default=0.35)
    p_world.add_argument("--seed", type=int, default=0)
    p_world.add_argument("--out", required=True)
    p_world.set_defaults(func=_cmd_gen_world)

    p_data = sub.add_parser("gen-data", help="generate a navigation dataset file")
    p_data.add_argument("--world", required=True, help="world file from gen-world")
    p_data.add_argument("--counts", required=True, help="round:count pairs, e.g. 1:20,2:20")
    p_data.add_argument("--seed", type=int, default=0)
    p_data.add_argument("--max-attempts", type=int, default=None)
    p_data.add_argument("--out", required=True)
    p_data.set_defaults(func=_cmd_gen_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
