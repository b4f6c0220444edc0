"""Procedurally generated room-grid navigation with imitation trajectories.

The world is a lattice of square rooms. Cells inside a room are freely
connected by 4-neighbor moves; crossing between rooms is only possible
through door edges, of which a spanning set always exists so the whole grid
is connected. A navigation sample pairs a start and goal cell with the
shortest path between them and a symbolic instruction: one heading token
(N/E/S/W) per step, preceded by a room-type token whenever that step enters
a new room. Task difficulty is the number of distinct rooms the ground-truth
path covers, bucketed into rounds 1..5.

Policies observe a fixed window of upcoming instruction tokens plus a local
view of the current cell (room one-hot and door directions) and pick one of
five actions: the four headings or stop. In-room steps only need the first
window token; steps that enter a room see the room-type token first and the
heading second, which is the part a policy has to learn the hard way.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from spcl.learners import LabeledExample, PredictorKind, PredictorSpec, predict
from spcl.tasks.bucketing import N_ROUNDS, StratifiedDataset, assign_round

__all__ = [
    "Cell",
    "RoomGrid",
    "NavSample",
    "NavFeaturizer",
    "RolloutOutcome",
    "EpisodeResult",
    "FirstErrorKind",
    "DatasetGenerationError",
    "generate_room_grid",
    "world_connected",
    "shortest_path",
    "room_length",
    "generate_nav_dataset",
    "instruction_for_path",
    "imitation_examples",
    "nav_predictor_spec",
    "rollout",
    "rollout_policy",
    "classify_first_error",
    "success_rate_by_round",
    "DIR_NAMES",
    "STOP_ACTION",
    "N_ACTIONS",
    "N_ROOM_TYPES",
]

Cell = tuple[int, int]

# Fixed direction priority; also the BFS tie-break order.
DIR_OFFSETS: tuple[Cell, ...] = ((-1, 0), (0, 1), (1, 0), (0, -1))
DIR_NAMES = ("N", "E", "S", "W")
STOP_ACTION = 4
N_ACTIONS = 5
N_ROOM_TYPES = 6


class DatasetGenerationError(RuntimeError):
    """Rejection sampling hit its attempt cap before filling a round."""

    def __init__(self, starved_round: int, attempts: int):
        super().__init__(
            f"could not generate enough round-{starved_round} samples "
            f"after {attempts} attempts; the world may not support that difficulty"
        )
        self.starved_round = starved_round


@dataclass
class RoomGrid:
    """Rectangular lattice of square rooms joined by door edges.

    Treated as immutable after construction; adjacency lookups are built once.
    """

    rooms_x: int
    rooms_y: int
    room_size: int
    room_types: np.ndarray
    doors: frozenset[tuple[Cell, Cell]]
    _door_map: dict[Cell, set[Cell]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.room_types = np.asarray(self.room_types, dtype=int)
        if self.room_types.shape != (self.n_rooms,):
            raise ValueError("room_types must hold one type per room")
        if np.any(self.room_types < 0) or np.any(self.room_types >= N_ROOM_TYPES):
            raise ValueError(f"room types must lie in 0..{N_ROOM_TYPES - 1}")
        door_map: dict[Cell, set[Cell]] = {}
        for a, b in self.doors:
            if not (self.in_bounds(a) and self.in_bounds(b)):
                raise ValueError(f"door {a}-{b} outside the grid")
            if self.room_of(a) == self.room_of(b):
                raise ValueError(f"door {a}-{b} does not cross a room boundary")
            door_map.setdefault(a, set()).add(b)
            door_map.setdefault(b, set()).add(a)
        self._door_map = door_map

    @property
    def height(self) -> int:
        return self.rooms_y * self.room_size

    @property
    def width(self) -> int:
        return self.rooms_x * self.room_size

    @property
    def n_rooms(self) -> int:
        return self.rooms_x * self.rooms_y

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def room_of(self, cell: Cell) -> int:
        r, c = cell
        return (r // self.room_size) * self.rooms_x + (c // self.room_size)

    def cells(self) -> list[Cell]:
        return [(r, c) for r in range(self.height) for c in range(self.width)]

    def passable(self, a: Cell, b: Cell) -> bool:
        """True when a single move from a to b is legal."""
        if not (self.in_bounds(a) and self.in_bounds(b)):
            return False
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
            return False
        if self.room_of(a) == self.room_of(b):
            return True
        return b in self._door_map.get(a, ())

    def neighbors(self, cell: Cell) -> list[Cell]:
        """Passable neighbor cells in N, E, S, W order."""
        out = []
        for dr, dc in DIR_OFFSETS:
            nxt = (cell[0] + dr, cell[1] + dc)
            if self.passable(cell, nxt):
                out.append(nxt)
        return out

    def door_directions(self, cell: Cell) -> np.ndarray:
        """Four flags, one per heading, set when that move passes a door."""
        flags = np.zeros(4)
        for k, (dr, dc) in enumerate(DIR_OFFSETS):
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt in self._door_map.get(cell, ()):
                flags[k] = 1.0
        return flags


def _canonical_door(a: Cell, b: Cell) -> tuple[Cell, Cell]:
    return (a, b) if a <= b else (b, a)


def generate_room_grid(
    rooms_x: int,
    rooms_y: int,
    room_size: int,
    door_density: float,
    seed: int,
) -> RoomGrid:
    """Sample a connected world: spanning-tree doors always, extras by density.

    Each doored pair of adjacent rooms gets exactly one door at a seeded
    offset along the shared wall. Deterministic for a fixed seed.
    """
    if rooms_x < 1 or rooms_y < 1 or room_size < 1:
        raise ValueError("room counts and room_size must be >= 1")
    if not 0.0 < door_density <= 1.0:
        raise ValueError(f"door_density must be in (0, 1], got {door_density}")
    rng = np.random.default_rng(seed)
    n_rooms = rooms_x * rooms_y
    room_types = rng.integers(0, N_ROOM_TYPES, n_rooms)

    # Room-lattice edges in fixed scan order: (room_index_a, room_index_b, axis).
    lattice_edges: list[tuple[int, int, str]] = []
    for ry in range(rooms_y):
        for rx in range(rooms_x):
            idx = ry * rooms_x + rx
            if rx + 1 < rooms_x:
                lattice_edges.append((idx, idx + 1, "h"))
            if ry + 1 < rooms_y:
                lattice_edges.append((idx, idx + rooms_x, "v"))

    parent = list(range(n_rooms))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tree: set[tuple[int, int, str]] = set()
    for j in rng.permutation(len(lattice_edges)):
        ea, eb, axis = lattice_edges[j]
        ra, rb = find(ea), find(eb)
        if ra != rb:
            parent[ra] = rb
            tree.add((ea, eb, axis))

    doored = []
    for edge in lattice_edges:
        if edge in tree or rng.random() < door_density:
            doored.append(edge)

    doors: set[tuple[Cell, Cell]] = set()
    for ea, eb, axis in doored:
        offset = int(rng.integers(room_size))
        ry, rx = divmod(ea, rooms_x)
        if axis == "h":
            row = ry * room_size + offset
            col = (rx + 1) * room_size - 1
            pair = ((row, col), (row, col + 1))
        else:
            row = (ry + 1) * room_size - 1
            col = rx * room_size + offset
            pair = ((row, col), (row + 1, col))
        doors.add(_canonical_door(*pair))

    return RoomGrid(
        rooms_x=rooms_x,
        rooms_y=rooms_y,
        room_size=room_size,
        room_types=room_types,
        doors=frozenset(doors),
    )


def world_connected(world: RoomGrid) -> bool:
    cells = world.cells()
    seen = {cells[0]}
    queue = deque([cells[0]])
    while queue:
        cur = queue.popleft()
        for nxt in world.neighbors(cur):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == len(cells)


def shortest_path(world: RoomGrid, start: Cell, goal: Cell) -> tuple[Cell, ...]:
    """Breadth-first shortest path, ties broken by N, E, S, W priority."""
    if not (world.in_bounds(start) and world.in_bounds(goal)):
        raise ValueError("start and goal must lie inside the grid")
    if start == goal:
        return (start,)
    parent: dict[Cell, Cell] = {start: start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in world.neighbors(cur):
            if nxt not in parent:
                parent[nxt] = cur
                if nxt == goal:
                    path = [goal]
                    while path[-1] != start:
                        path.append(parent[path[-1]])
                    return tuple(reversed(path))
                queue.append(nxt)
    raise ValueError(f"no path from {start} to {goal}; world is not connected")


def _validate_trajectory(world: RoomGrid, trajectory: Sequence[Cell]) -> None:
    if len(trajectory) == 0:
        raise ValueError("trajectory must be nonempty")
    for cell in trajectory:
        if not world.in_bounds(cell):
            raise ValueError(f"trajectory cell {cell} outside the grid")
    for a, b in zip(trajectory, trajectory[1:]):
        # A repeated cell records a blocked move and is allowed.
        if a != b and not world.passable(a, b):
            raise ValueError(f"trajectory step {a} -> {b} is not passable")


def room_length(trajectory: Sequence[Cell], world: RoomGrid) -> int:
    """Number of distinct rooms the trajectory covers (revisits not recounted)."""
    _validate_trajectory(world, trajectory)
    return len({world.room_of(cell) for cell in trajectory})


@dataclass(frozen=True)
class NavSample:
    """One navigation task: instruction, endpoints, ground truth, difficulty."""

    id: int
    instruction: tuple[str, ...]
    start: Cell
    goal: Cell
    gt_trajectory: tuple[Cell, ...]
    round: int


def _direction_index(a: Cell, b: Cell) -> int:
    delta = (b[0] - a[0], b[1] - a[1])
    return DIR_OFFSETS.index(delta)


def instruction_for_path(world: RoomGrid, path: Sequence[Cell]) -> tuple[str, ...]:
    """Per-step headings, each prefixed by the entered room's type token when
    the step crosses a door."""
    tokens: list[str] = []
    for a, b in zip(path, path[1:]):
        if world.room_of(a) != world.room_of(b):
            tokens.append(f"R{world.room_types[world.room_of(b)]}")
        tokens.append(DIR_NAMES[_direction_index(a, b)])
    return tuple(tokens)


def generate_nav_dataset(
    world: RoomGrid,
    counts: Mapping[int, int],
    seed: int,
    max_attempts: int | None = None,
) -> StratifiedDataset:
    """Rejection-sample navigation tasks until every requested round is filled.

    Start and goal cells are drawn uniformly; a draw is kept when its
    shortest path lands in a round that still needs samples. Raises
    DatasetGenerationError naming the starved round if the attempt cap is
    reached first.
    """
    need = {int(r): int(cnt) for r, cnt in counts.items() if int(cnt) > 0}
    if not need:
        raise ValueError("counts must request at least one sample")
    for r in need:
        if not 1 <= r <= N_ROUNDS:
            raise ValueError(f"round {r} outside 1..{N_ROUNDS}")
    total = sum(need.values())
    if max_attempts is None:
        max_attempts = 500 * total + 2000

    rng = np.random.default_rng(seed)
    cells = world.cells()
    splits: dict[int, list[NavSample]] = {r: [] for r in need}
    next_id = 0
    attempts = 0
    while attempts < max_attempts:
        unfilled = [r for r in need if len(splits[r]) < need[r]]
        if not unfilled:
            break
        attempts += 1
        start = cells[int(rng.integers(len(cells)))]
        goal = cells[int(rng.integers(len(cells)))]
        path = shortest_path(world, start, goal)
        rd = assign_round(room_length(path, world))
        if rd in need and len(splits[rd]) < need[rd]:
            splits[rd].append(
                NavSample(
                    id=next_id,
                    instruction=instruction_for_path(world, path),
                    start=start,
                    goal=goal,
                    gt_trajectory=path,
                    round=rd,
                )
            )
            next_id += 1
    unfilled = [r for r in need if len(splits[r]) < need[r]]
    if unfilled:
        raise DatasetGenerationError(starved_round=min(unfilled), attempts=attempts)
    return StratifiedDataset(splits=splits, seed=seed)


@dataclass(frozen=True)
class NavFeaturizer:
    """Observation builder shared by teacher forcing and rollouts.

    Features concatenate a fixed window of upcoming instruction tokens
    (one-hot per position, absent tokens all-zero) with the current room
    one-hot and the four door-direction flags.
    """

    n_rooms: int
    window: int = 4

    @classmethod
    def for_world(cls, world: RoomGrid, window: int = 4) -> "NavFeaturizer":
        return cls(n_rooms=world.n_rooms, window=window)

    @property
    def vocab(self) -> tuple[str, ...]:
        return DIR_NAMES + tuple(f"R{t}" for t in range(N_ROOM_TYPES))

    @property
    def input_dim(self) -> int:
        return self.window * len(self.vocab) + self.n_rooms + 4

    def _token_index(self, token: str) -> int:
        if token in DIR_NAMES:
            return DIR_NAMES.index(token)
        return 4 + int(token[1:])

    def features(
        self,
        world: RoomGrid,
        instruction: Sequence[str],
        cursor: int,
        cell: Cell,
    ) -> np.ndarray:
        v = len(self.vocab)
        vec = np.zeros(self.input_dim)
        for j in range(self.window):
            i = cursor + j
            if i < len(instruction):
                vec[j * v + self._token_index(instruction[i])] = 1.0
        base = self.window * v
        vec[base + world.room_of(cell)] = 1.0
        vec[base + self.n_rooms :] = world.door_directions(cell)
        return vec

    def next_action(self, instruction: Sequence[str], cursor: int) -> int:
        """Ground-truth action at this cursor: the upcoming heading, or stop."""
        if cursor >= len(instruction):
            return STOP_ACTION
        token = instruction[cursor]
        if token not in DIR_NAMES:
            token = instruction[cursor + 1]
        return DIR_NAMES.index(token)

    def advance(self, instruction: Sequence[str], cursor: int) -> int:
        """Cursor after executing one step (skips the room token if present)."""
        if cursor >= len(instruction):
            return cursor
        return cursor + (1 if instruction[cursor] in DIR_NAMES else 2)


def nav_predictor_spec(
    world: RoomGrid, hidden_dim: int = 32, window: int = 4
) -> PredictorSpec:
    feat = NavFeaturizer.for_world(world, window=window)
    return PredictorSpec(
        kind=PredictorKind.MLP,
        input_dim=feat.input_dim,
        output_dim=N_ACTIONS,
        hidden_dim=hidden_dim,
    )


def imitation_examples(
    world: RoomGrid,
    samples: Iterable[NavSample],
    featurizer: NavFeaturizer | None = None,
) -> list[LabeledExample]:
    """Teacher-forced step features and action labels for each sample."""
    feat = featurizer or NavFeaturizer.for_world(world)
    out = []
    for sample in samples:
        path = sample.gt_trajectory
        cursor = 0
        rows = []
        actions = []
        for a, b in zip(path, path[1:]):
            rows.append(feat.features(world, sample.instruction, cursor, a))
            actions.append(_direction_index(a, b))
            cursor = feat.advance(sample.instruction, cursor)
        rows.append(feat.features(world, sample.instruction, cursor, path[-1]))
        actions.append(STOP_ACTION)
        out.append(
            LabeledExample(x=np.stack(rows), y=np.array(actions), round=sample.round)
        )
    return out


@dataclass(frozen=True)
class RolloutOutcome:
    trajectory: tuple[Cell, ...]
    success: bool


def rollout(
    world: RoomGrid,
    sample: NavSample,
    max_steps: int,
    action_fn: Callable[[int, int, Cell], int],
) -> RolloutOutcome:
    """Run one episode with actions from action_fn(step, cursor, cell).

    A move into a wall keeps the agent in place but still consumes a step
    and advances the instruction cursor. The episode ends on the stop action
    or after max_steps; it succeeds when the final cell is the goal.
    """
    if max_steps < len(sample.gt_trajectory):
        raise ValueError(
            f"max_steps {max_steps} is below the ground-truth length "
            f"{len(sample.gt_trajectory)}"
        )
    feat = NavFeaturizer.for_world(world)
    cell = sample.start
    cursor = 0
    trajectory = [cell]
    for step in range(max_steps):
        action = int(action_fn(step, cursor, cell))
        if action == STOP_ACTION:
            break
        if not 0 <= action < len(DIR_OFFSETS):
            raise ValueError(f"action index {action} out of range")
        dr, dc = DIR_OFFSETS[action]
        nxt = (cell[0] + dr, cell[1] + dc)
        if world.passable(cell, nxt):
            cell = nxt
        trajectory.append(cell)
        cursor = feat.advance(sample.instruction, cursor)
    return RolloutOutcome(trajectory=tuple(trajectory), success=cell == sample.goal)


def rollout_policy(
    spec: PredictorSpec,
    theta: np.ndarray,
    world: RoomGrid,
    sample: NavSample,
    max_steps: int,
    featurizer: NavFeaturizer | None = None,
) -> RolloutOutcome:
    """Greedy argmax rollout of a trained policy on one sample."""
    feat = featurizer or NavFeaturizer.for_world(world)

    def policy_action(step: int, cursor: int, cell: Cell) -> int:
        scores = predict(spec, theta, feat.features(world, sample.instruction, cursor, cell))
        return int(np.argmax(scores))

    return rollout(world, sample, max_steps, policy_action)


class FirstErrorKind(enum.Enum):
    """Taxonomy of the first point where a rollout leaves the ground truth."""

    IN = "in"          # correct next cell was inside the current room
    CROSS = "cross"    # correct next cell was through a door
    OTHERS = "others"  # ground truth fully traversed but stop misplaced
    NONE = "none"      # exact match including the stop


def classify_first_error(
    predicted: Sequence[Cell],
    gt: Sequence[Cell],
    world: RoomGrid,
    goal: Cell,
) -> FirstErrorKind:
    """Label an episode by its first deviation from the ground-truth path.

    Stopping early counts as a deviation at the first missing step. Behavior
    after a deviation (including rejoining the path) never changes the label.
    """
    _validate_trajectory(world, predicted)
    _validate_trajectory(world, gt)
    if predicted[0] != gt[0]:
        raise ValueError("predicted and ground-truth trajectories must share a start")

    shared = min(len(predicted), len(gt))
    deviation = None
    for i in range(shared):
        if predicted[i] != gt[i]:
            deviation = i
            break
    if deviation is None:
        if len(predicted) == len(gt):
            return FirstErrorKind.NONE
        if len(predicted) > len(gt):
            return FirstErrorKind.OTHERS
        deviation = len(predicted)  # stopped before finishing the path

    correct_next = gt[deviation]
    current_room = world.room_of(gt[deviation - 1])
    if world.room_of(correct_next) == current_room:
        return FirstErrorKind.IN
    return FirstErrorKind.CROSS


@dataclass(frozen=True)
class EpisodeResult:
    round: int
    success: bool
    first_error: FirstErrorKind | None = None


def success_rate_by_round(results: Sequence[EpisodeResult]) -> dict[int, float]:
    """Fraction of successful episodes per round present in the results."""
    if len(results) == 0:
        raise ValueError("results must be nonempty")
    totals: dict[int, int] = {}
    wins: dict[int, int] = {}
    for res in results:
        totals[res.round] = totals.get(res.round, 0) + 1
        wins[res.round] = wins.get(res.round, 0) + int(res.success)
    return {r: wins[r] / totals[r] for r in sorted(totals)}
