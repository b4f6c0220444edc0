"""Experiment configuration: flat key-value text with section headers.

One [experiment] section (task, seeds, output_dir), an optional [train]
section overriding the desk-scale training defaults, an optional [task]
section with task-specific knobs, and one [paradigm:<name>] section per
paradigm to compare.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from importlib import resources

from spcl.core import SelfPacedScheme
from spcl.trainer import Paradigm, ParadigmKind, TrainConfig

__all__ = [
    "SyntheticParams",
    "NavgridParams",
    "ExperimentConfig",
    "load_experiment_config",
    "preset_path",
    "available_presets",
]

# Desk-scale defaults, scaled down from the full-size 200/200/64 protocol so
# a whole comparison matrix finishes in minutes.
DESK_EPOCHS = 40
DESK_ITERATIONS = 50
DESK_BATCH = 32

DATA_SEED_OFFSET = 100_003
EVAL_SEED_OFFSET = 200_003


@dataclass(frozen=True)
class SyntheticParams:
    n_per_round: int = 120
    eval_per_round: int = 60

    def __post_init__(self) -> None:
        if self.n_per_round < 1 or self.eval_per_round < 1:
            raise ValueError("synthetic sample counts must be positive")


@dataclass(frozen=True)
class NavgridParams:
    rooms_x: int = 3
    rooms_y: int = 3
    room_size: int = 4
    door_density: float = 0.35
    world_seed: int = 7
    train_per_round: int = 60
    eval_per_round: int = 20
    hidden_dim: int = 32
    window: int = 4

    def __post_init__(self) -> None:
        if min(self.rooms_x, self.rooms_y, self.room_size) < 1:
            raise ValueError("world dimensions must be positive")
        if not 0.0 < self.door_density <= 1.0:
            raise ValueError("door_density must be in (0, 1]")
        if min(self.train_per_round, self.eval_per_round) < 1:
            raise ValueError("sample counts must be positive")
        if self.hidden_dim < 1 or self.window < 1:
            raise ValueError("hidden_dim and window must be positive")


@dataclass
class ExperimentConfig:
    task: str
    seeds: tuple[int, ...]
    output_dir: str
    train: TrainConfig
    paradigms: dict[str, Paradigm]
    task_params: SyntheticParams | NavgridParams
    source_text: str = field(default="", repr=False)

    def __post_init__(self) -> None:
        if self.task not in ("synthetic", "navgrid"):
            raise ValueError(f"unknown task {self.task!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.paradigms:
            raise ValueError("at least one paradigm is required")
        if not self.output_dir:
            raise ValueError("output_dir must be set")


_DEFAULT_LR = {"synthetic": 0.05, "navgrid": 0.5}

_SCHEMES = {
    "binary": SelfPacedScheme.BINARY,
    "linear": SelfPacedScheme.LINEAR,
}


def _parse_paradigm(name: str, section) -> Paradigm:
    kind_name = section.get("kind", name).strip().lower()
    try:
        kind = ParadigmKind(kind_name)
    except ValueError:
        raise ValueError(f"paradigm {name!r}: unknown kind {kind_name!r}") from None
    if kind is ParadigmKind.SPCL:
        scheme_name = section.get("scheme", "linear").strip().lower()
        if scheme_name not in _SCHEMES:
            raise ValueError(f"paradigm {name!r}: unknown scheme {scheme_name!r}")
        return Paradigm.spcl(
            scheme=_SCHEMES[scheme_name],
            w0=section.getfloat("w0", 0.2),
            mu=section.getfloat("mu", 3.0),
            c_fraction=section.getfloat("c_fraction", 0.95),
            update_interval=(
                section.getint("update_interval") if "update_interval" in section else None
            ),
            lambda0=section.getfloat("lambda0", 2.0),
        )
    stage_epochs = section.getint("stage_epochs") if "stage_epochs" in section else None
    return Paradigm(kind=kind, stage_epochs=stage_epochs)


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def load_experiment_config(path: str | os.PathLike) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    parser.read_string(text)

    if "experiment" not in parser:
        raise ValueError("config needs an [experiment] section")
    exp = parser["experiment"]
    task = exp.get("task", "synthetic").strip().lower()
    seeds = _parse_ints(exp.get("seeds", ""))
    output_dir = exp.get("output_dir", "").strip()

    train_sec = parser["train"] if "train" in parser else {}
    lr_default = _DEFAULT_LR.get(task, 0.05)
    train = TrainConfig(
        epochs=int(train_sec.get("epochs", DESK_EPOCHS)),
        iterations_per_epoch=int(train_sec.get("iterations_per_epoch", DESK_ITERATIONS)),
        batch_size=int(train_sec.get("batch_size", DESK_BATCH)),
        learning_rate=float(train_sec.get("learning_rate", lr_default)),
        seed=0,
    )

    task_sec = parser["task"] if "task" in parser else {}
    if task == "navgrid":
        params = NavgridParams(
            rooms_x=int(task_sec.get("rooms_x", NavgridParams.rooms_x)),
            rooms_y=int(task_sec.get("rooms_y", NavgridParams.rooms_y)),
            room_size=int(task_sec.get("room_size", NavgridParams.room_size)),
            door_density=float(task_sec.get("door_density", NavgridParams.door_density)),
            world_seed=int(task_sec.get("world_seed", NavgridParams.world_seed)),
            train_per_round=int(task_sec.get("train_per_round", NavgridParams.train_per_round)),
            eval_per_round=int(task_sec.get("eval_per_round", NavgridParams.eval_per_round)),
            hidden_dim=int(task_sec.get("hidden_dim", NavgridParams.hidden_dim)),
            window=int(task_sec.get("window", NavgridParams.window)),
        )
    else:
        params = SyntheticParams(
            n_per_round=int(task_sec.get("n_per_round", SyntheticParams.n_per_round)),
            eval_per_round=int(task_sec.get("eval_per_round", SyntheticParams.eval_per_round)),
        )

    paradigms: dict[str, Paradigm] = {}
    for section_name in parser.sections():
        if not section_name.startswith("paradigm:"):
            continue
        name = section_name.split(":", 1)[1].strip()
        if not name:
            raise ValueError("paradigm sections need a name, like [paradigm:ml]")
        if name in paradigms:
            raise ValueError(f"duplicate paradigm name {name!r}")
        paradigms[name] = _parse_paradigm(name, parser[section_name])

    return ExperimentConfig(
        task=task,
        seeds=seeds,
        output_dir=output_dir,
        train=train,
        paradigms=paradigms,
        task_params=params,
        source_text=text,
    )


def available_presets() -> list[str]:
    files = resources.files("spcl").joinpath("configs")
    return sorted(p.name[: -len(".ini")] for p in files.iterdir() if p.name.endswith(".ini"))


def preset_path(name: str) -> str:
    """Filesystem path of a shipped preset config, e.g. 'default'."""
    candidate = resources.files("spcl").joinpath("configs", f"{name}.ini")
    if not candidate.is_file():
        raise ValueError(
            f"unknown preset {name!r}; available: {', '.join(available_presets())}"
        )
    return str(candidate)
