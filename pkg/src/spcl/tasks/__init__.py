"""Desk-scale curricula: synthetic stratified data and room-grid navigation."""

from spcl.tasks.bucketing import N_ROUNDS, StratifiedDataset, assign_round
from spcl.tasks.gridworld import (
    Cell,
    DatasetGenerationError,
    EpisodeResult,
    FirstErrorKind,
    NavFeaturizer,
    NavSample,
    RolloutOutcome,
    RoomGrid,
    classify_first_error,
    generate_nav_dataset,
    generate_room_grid,
    imitation_examples,
    instruction_for_path,
    nav_predictor_spec,
    rollout,
    rollout_policy,
    room_length,
    shortest_path,
    success_rate_by_round,
    world_connected,
)
from spcl.tasks.serialize import (
    load_nav_dataset,
    load_world,
    save_nav_dataset,
    save_world,
)
from spcl.tasks.synthetic import generate_synthetic_dataset

__all__ = [
    "N_ROUNDS",
    "StratifiedDataset",
    "assign_round",
    "Cell",
    "DatasetGenerationError",
    "EpisodeResult",
    "FirstErrorKind",
    "NavFeaturizer",
    "NavSample",
    "RolloutOutcome",
    "RoomGrid",
    "classify_first_error",
    "generate_nav_dataset",
    "generate_room_grid",
    "imitation_examples",
    "instruction_for_path",
    "nav_predictor_spec",
    "rollout",
    "rollout_policy",
    "room_length",
    "shortest_path",
    "success_rate_by_round",
    "world_connected",
    "load_nav_dataset",
    "load_world",
    "save_nav_dataset",
    "save_world",
    "generate_synthetic_dataset",
]
