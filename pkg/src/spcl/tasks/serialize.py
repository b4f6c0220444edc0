"""Text formats for worlds and navigation datasets.

Both files start with a versioned header line. The world file stores the
grid of room ids row by row, the per-room type list, and the door list; the
dataset file stores one self-describing record per line with fields
id, round, instruction tokens, start, goal, and trajectory.
"""

from __future__ import annotations

import os

import numpy as np

from spcl.tasks.bucketing import StratifiedDataset
from spcl.tasks.gridworld import Cell, NavSample, RoomGrid

__all__ = ["save_world", "load_world", "save_nav_dataset", "load_nav_dataset"]

WORLD_MAGIC = "navgrid-world"
DATA_MAGIC = "navgrid-data"
FORMAT_VERSION = 1


def _fmt_cell(cell: Cell) -> str:
    return f"{cell[0]},{cell[1]}"


def _parse_cell(text: str) -> Cell:
    r, c = text.split(",")
    return (int(r), int(c))


def save_world(world: RoomGrid, path: str | os.PathLike) -> None:
    lines = [
        f"{WORLD_MAGIC} v{FORMAT_VERSION}",
        f"rooms {world.rooms_x} {world.rooms_y} {world.room_size}",
        "grid",
    ]
    for r in range(world.height):
        lines.append(" ".join(str(world.room_of((r, c))) for c in range(world.width)))
    lines.append("types " + " ".join(str(t) for t in world.room_types))
    lines.append("doors")
    for a, b in sorted(world.doors):
        lines.append(f"{_fmt_cell(a)} {_fmt_cell(b)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _check_header(line: str, magic: str) -> None:
    parts = line.strip().split()
    if len(parts) < 2 or parts[0] != magic:
        raise ValueError(f"not a {magic} file (header {line.strip()!r})")
    if parts[1] != f"v{FORMAT_VERSION}":
        raise ValueError(f"unsupported {magic} version {parts[1]}")


def load_world(path: str | os.PathLike) -> RoomGrid:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    _check_header(lines[0], WORLD_MAGIC)
    _, rooms_x, rooms_y, room_size = lines[1].split()
    rooms_x, rooms_y, room_size = int(rooms_x), int(rooms_y), int(room_size)
    if lines[2] != "grid":
        raise ValueError("malformed world file: missing grid block")
    height = rooms_y * room_size
    grid_rows = [list(map(int, lines[3 + r].split())) for r in range(height)]
    types_line = lines[3 + height]
    if not types_line.startswith("types "):
        raise ValueError("malformed world file: missing types line")
    room_types = np.array([int(t) for t in types_line.split()[1:]])
    if lines[4 + height] != "doors":
        raise ValueError("malformed world file: missing doors block")
    doors = set()
    for ln in lines[5 + height :]:
        if not ln.strip():
            continue
        a, b = ln.split()
        doors.add((_parse_cell(a), _parse_cell(b)))
    world = RoomGrid(
        rooms_x=rooms_x,
        rooms_y=rooms_y,
        room_size=room_size,
        room_types=room_types,
        doors=frozenset(doors),
    )
    # The stored grid is derivable from the room layout; verify it matches.
    for r in range(world.height):
        for c in range(world.width):
            if grid_rows[r][c] != world.room_of((r, c)):
                raise ValueError(f"grid room id at ({r},{c}) contradicts the room layout")
    return world


def save_nav_dataset(dataset: StratifiedDataset, path: str | os.PathLike) -> None:
    lines = [f"{DATA_MAGIC} v{FORMAT_VERSION} seed={dataset.seed} n={len(dataset)}"]
    for sample in dataset:
        lines.append(
            f"id={sample.id} round={sample.round} "
            f"instr={','.join(sample.instruction) if sample.instruction else '-'} "
            f"start={_fmt_cell(sample.start)} goal={_fmt_cell(sample.goal)} "
            f"traj={';'.join(_fmt_cell(c) for c in sample.gt_trajectory)}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_nav_dataset(path: str | os.PathLike) -> StratifiedDataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    _check_header(lines[0], DATA_MAGIC)
    header_fields = dict(part.split("=") for part in lines[0].split()[2:])
    seed = int(header_fields["seed"])
    n = int(header_fields["n"])
    splits: dict[int, list[NavSample]] = {}
    records = [ln for ln in lines[1:] if ln.strip()]
    if len(records) != n:
        raise ValueError(f"header promises {n} records, file has {len(records)}")
    for ln in records:
        fields = dict(part.split("=", 1) for part in ln.split())
        instr = fields["instr"]
        sample = NavSample(
            id=int(fields["id"]),
            round=int(fields["round"]),
            instruction=tuple(instr.split(",")) if instr != "-" else (),
            start=_parse_cell(fields["start"]),
            goal=_parse_cell(fields["goal"]),
            gt_trajectory=tuple(_parse_cell(c) for c in fields["traj"].split(";")),
        )
        splits.setdefault(sample.round, []).append(sample)
    return StratifiedDataset(splits=splits, seed=seed)
