from collections import deque

import numpy as np
import pytest

from spcl.learners import init_parameters
from spcl.tasks import (
    DatasetGenerationError,
    EpisodeResult,
    FirstErrorKind,
    NavFeaturizer,
    assign_round,
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
from spcl.tasks.gridworld import DIR_NAMES, STOP_ACTION, _direction_index


def bfs_distance(world, start, goal):
    """Independent distance oracle, deliberately not reusing shortest_path."""
    seen = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            return seen[cur]
        r, c = cur
        for nxt in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if world.passable(cur, nxt) and nxt not in seen:
                seen[nxt] = seen[cur] + 1
                queue.append(nxt)
    raise AssertionError("goal unreachable")


def gt_actions(sample):
    path = sample.gt_trajectory
    return [_direction_index(a, b) for a, b in zip(path, path[1:])] + [STOP_ACTION]


class TestWorldGeneration:
    def test_single_room_has_no_doors(self):
        world = generate_room_grid(1, 1, 5, 1.0, seed=3)
        assert world.doors == frozenset()
        assert world.n_rooms == 1
        assert world_connected(world)

    def test_two_rooms_single_door(self):
        world = generate_room_grid(2, 1, 3, 1.0, seed=3)
        assert len(world.doors) == 1
        assert world_connected(world)

    def test_deterministic(self):
        a = generate_room_grid(3, 3, 4, 0.5, seed=11)
        b = generate_room_grid(3, 3, 4, 0.5, seed=11)
        assert a.doors == b.doors
        np.testing.assert_array_equal(a.room_types, b.room_types)

    def test_always_connected(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            world = generate_room_grid(
                int(rng.integers(1, 5)),
                int(rng.integers(1, 5)),
                int(rng.integers(1, 5)),
                float(rng.uniform(0.05, 1.0)),
                seed=int(rng.integers(1 << 30)),
            )
            assert world_connected(world)

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            generate_room_grid(0, 1, 3, 0.5, seed=0)
        with pytest.raises(ValueError):
            generate_room_grid(1, 1, 3, 0.0, seed=0)


class TestPathsAndRooms:
    def test_room_length_single_room(self):
        world = generate_room_grid(1, 1, 4, 1.0, seed=0)
        assert room_length([(0, 0), (0, 1), (0, 2)], world) == 1

    def test_room_length_counts_distinct(self):
        world = generate_room_grid(2, 1, 2, 1.0, seed=1)
        (a, b) = sorted(world.doors)[0]
        assert room_length([a, b, a], world) == 2

    def test_room_length_long_path(self):
        world = generate_room_grid(6, 1, 2, 1.0, seed=5)
        path = shortest_path(world, (0, 0), (0, world.width - 1))
        assert room_length(path, world) == 6

    def test_invalid_trajectory_raises(self):
        world = generate_room_grid(2, 2, 3, 1.0, seed=2)
        with pytest.raises(ValueError):
            room_length([(0, 0), (2, 2)], world)
        with pytest.raises(ValueError):
            room_length([], world)

    def test_assign_round(self):
        assert assign_round(2) == 2
        assert assign_round(1) == 1
        assert assign_round(7) == 5
        assert [assign_round(r) for r in (3, 4, 5)] == [3, 4, 5]
        with pytest.raises(ValueError):
            assign_round(0)

    def test_shortest_path_matches_bfs_oracle(self):
        rng = np.random.default_rng(7)
        world = generate_room_grid(3, 3, 3, 0.4, seed=9)
        cells = world.cells()
        for _ in range(100):
            s = cells[int(rng.integers(len(cells)))]
            g = cells[int(rng.integers(len(cells)))]
            path = shortest_path(world, s, g)
            assert path[0] == s and path[-1] == g
            assert len(path) - 1 == bfs_distance(world, s, g)

    def test_shortest_path_deterministic_tiebreak(self):
        world = generate_room_grid(1, 1, 5, 1.0, seed=0)
        assert shortest_path(world, (2, 2), (2, 2)) == ((2, 2),)
        # N before E in the priority order
        assert shortest_path(world, (2, 2), (1, 3))[1] == (1, 2)


class TestDatasetGeneration:
    def test_single_room_world_fills_round_one(self):
        world = generate_room_grid(1, 1, 4, 1.0, seed=1)
        ds = generate_nav_dataset(world, {1: 10}, seed=2)
        assert ds.counts == {1: 10}
        assert all(s.round == 1 for s in ds)

    def test_bucketing_invariant(self):
        world = generate_room_grid(3, 3, 3, 0.4, seed=21)
        ds = generate_nav_dataset(world, {1: 6, 2: 6, 3: 6, 4: 6, 5: 6}, seed=3)
        for sample in ds:
            assert assign_round(room_length(sample.gt_trajectory, world)) == sample.round
            assert sample.gt_trajectory[0] == sample.start
            assert sample.gt_trajectory[-1] == sample.goal

    def test_partition_is_exact(self):
        world = generate_room_grid(2, 2, 3, 0.6, seed=4)
        ds = generate_nav_dataset(world, {1: 5, 2: 5, 3: 5}, seed=5)
        ids = [s.id for s in ds]
        assert len(ids) == len(set(ids)) == 15
        assert sum(ds.counts.values()) == len(ds)

    def test_deterministic(self):
        world = generate_room_grid(2, 2, 3, 0.6, seed=4)
        a = generate_nav_dataset(world, {1: 4, 2: 4}, seed=6)
        b = generate_nav_dataset(world, {1: 4, 2: 4}, seed=6)
        assert a.samples == b.samples

    def test_starved_round_named(self):
        world = generate_room_grid(1, 1, 4, 1.0, seed=1)
        with pytest.raises(DatasetGenerationError) as err:
            generate_nav_dataset(world, {5: 3}, seed=0, max_attempts=200)
        assert err.value.starved_round == 5
        assert "round-5" in str(err.value)


class TestInstructionsAndFeatures:
    def test_instruction_tokens_follow_path(self):
        world = generate_room_grid(2, 1, 2, 1.0, seed=8)
        door = sorted(world.doors)[0]
        path = shortest_path(world, (0, 0), (door[1][0], door[1][1]))
        instr = instruction_for_path(world, path)
        headings = [t for t in instr if t in DIR_NAMES]
        assert len(headings) == len(path) - 1
        room_tokens = [t for t in instr if t not in DIR_NAMES]
        assert len(room_tokens) == 1  # exactly one room entry
        entered_type = world.room_types[world.room_of(path[-1])]
        assert room_tokens[0] == f"R{entered_type}"

    def test_cursor_walks_instruction(self):
        world = generate_room_grid(3, 1, 2, 1.0, seed=13)
        ds = generate_nav_dataset(world, {3: 3}, seed=14)
        feat = NavFeaturizer.for_world(world)
        for sample in ds:
            cursor = 0
            actions = gt_actions(sample)
            for expected in actions[:-1]:
                assert feat.next_action(sample.instruction, cursor) == expected
                cursor = feat.advance(sample.instruction, cursor)
            assert cursor == len(sample.instruction)
            assert feat.next_action(sample.instruction, cursor) == STOP_ACTION

    def test_imitation_examples_shapes(self):
        world = generate_room_grid(2, 2, 3, 0.6, seed=4)
        ds = generate_nav_dataset(world, {1: 3, 2: 3}, seed=5)
        feat = NavFeaturizer.for_world(world)
        examples = imitation_examples(world, ds, feat)
        assert len(examples) == 6
        for ex, sample in zip(examples, ds):
            assert ex.x.shape == (len(sample.gt_trajectory), feat.input_dim)
            assert ex.y[-1] == STOP_ACTION
            assert ex.round == sample.round


class TestRollout:
    def make(self, seed=15):
        world = generate_room_grid(2, 2, 3, 0.7, seed=seed)
        ds = generate_nav_dataset(world, {2: 4, 3: 4}, seed=seed + 1)
        return world, ds.samples

    def test_memorizing_policy_succeeds(self):
        world, samples = self.make()
        for sample in samples:
            actions = gt_actions(sample)
            out = rollout(world, sample, 30, lambda step, cur, cell: actions[step])
            assert out.success
            assert out.trajectory == sample.gt_trajectory

    def test_timeout_away_from_goal_fails(self):
        world, samples = self.make()
        sample = samples[0]
        out = rollout(world, sample, len(sample.gt_trajectory), lambda s, c, cell: 0)
        assert not out.success

    def test_random_policy_rarely_succeeds(self):
        world = generate_room_grid(3, 3, 3, 0.4, seed=33)
        ds = generate_nav_dataset(world, {4: 10, 5: 10}, seed=34)
        rng = np.random.default_rng(35)
        wins = 0
        episodes = 0
        for sample in ds:
            for _ in range(50):
                out = rollout(world, sample, 25, lambda s, c, cell: int(rng.integers(5)))
                wins += out.success
                episodes += 1
        assert wins / episodes < 0.05

    def test_rollout_policy_runs_untrained(self):
        world, samples = self.make()
        spec = nav_predictor_spec(world, hidden_dim=8)
        theta = init_parameters(spec, 0)
        out = rollout_policy(spec, theta, world, samples[0], max_steps=30)
        assert isinstance(out.success, bool)
        assert out.trajectory[0] == samples[0].start

    def test_max_steps_precondition(self):
        world, samples = self.make()
        with pytest.raises(ValueError):
            rollout(world, samples[0], 1, lambda s, c, cell: 0)


class TestFirstError:
    def world_and_sample(self):
        world = generate_room_grid(2, 1, 3, 1.0, seed=40)
        ds = generate_nav_dataset(world, {2: 3}, seed=41)
        sample = max(ds.samples, key=lambda s: len(s.gt_trajectory))
        return world, sample

    def test_exact_match_is_none(self):
        world, sample = self.world_and_sample()
        gt = sample.gt_trajectory
        assert classify_first_error(gt, gt, world, sample.goal) is FirstErrorKind.NONE

    def test_overshoot_is_others(self):
        world, sample = self.world_and_sample()
        gt = list(sample.gt_trajectory)
        extra = gt + [world.neighbors(gt[-1])[0]]
        assert (
            classify_first_error(extra, gt, world, sample.goal) is FirstErrorKind.OTHERS
        )

    def test_in_room_deviation(self):
        world = generate_room_grid(1, 1, 4, 1.0, seed=1)
        gt = [(0, 0), (0, 1), (0, 2), (0, 3)]
        predicted = [(0, 0), (1, 0)]
        assert classify_first_error(predicted, gt, world, (0, 3)) is FirstErrorKind.IN

    def test_cross_room_deviation(self):
        world, sample = self.world_and_sample()
        gt = sample.gt_trajectory
        # find the step that crosses the door and deviate right there
        k = next(
            i for i, (a, b) in enumerate(zip(gt, gt[1:])) if world.room_of(a) != world.room_of(b)
        )
        wrong = [c for c in ([*world.neighbors(gt[k]), gt[k]]) if c != gt[k + 1]][0]
        predicted = list(gt[: k + 1]) + [wrong]
        assert classify_first_error(predicted, gt, world, sample.goal) is FirstErrorKind.CROSS

    def test_early_stop_classified_by_next_cell(self):
        world = generate_room_grid(1, 1, 4, 1.0, seed=1)
        gt = [(0, 0), (0, 1), (0, 2)]
        assert classify_first_error([(0, 0)], gt, world, (0, 2)) is FirstErrorKind.IN

    def test_every_episode_gets_exactly_one_label(self):
        world = generate_room_grid(2, 2, 3, 0.7, seed=44)
        ds = generate_nav_dataset(world, {2: 5, 3: 5}, seed=45)
        rng = np.random.default_rng(46)
        for sample in ds:
            out = rollout(world, sample, 20, lambda s, c, cell: int(rng.integers(5)))
            kind = classify_first_error(
                out.trajectory, sample.gt_trajectory, world, sample.goal
            )
            assert isinstance(kind, FirstErrorKind)


class TestSuccessRates:
    def test_all_successes(self):
        results = [EpisodeResult(round=r, success=True) for r in (1, 1, 2, 5)]
        assert success_rate_by_round(results) == {1: 1.0, 2: 1.0, 5: 1.0}

    def test_partial(self):
        results = [EpisodeResult(round=1, success=s) for s in (True, True, True, False)]
        assert success_rate_by_round(results) == {1: 0.75}

    def test_absent_rounds_absent(self):
        results = [EpisodeResult(round=3, success=False)]
        assert success_rate_by_round(results) == {3: 0.0}

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            success_rate_by_round([])
