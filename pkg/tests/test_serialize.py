import pytest

from spcl.tasks import (
    generate_nav_dataset,
    generate_room_grid,
    load_nav_dataset,
    load_world,
    save_nav_dataset,
    save_world,
)


@pytest.fixture
def world():
    return generate_room_grid(3, 2, 3, 0.5, seed=77)


def test_world_round_trip(world, tmp_path):
    path = tmp_path / "world.txt"
    save_world(world, path)
    loaded = load_world(path)
    assert loaded.doors == world.doors
    assert (loaded.room_types == world.room_types).all()
    assert (loaded.rooms_x, loaded.rooms_y, loaded.room_size) == (3, 2, 3)


def test_world_file_byte_stable(world, tmp_path):
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    save_world(world, p1)
    save_world(load_world(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_world_header_versioned(world, tmp_path):
    path = tmp_path / "world.txt"
    save_world(world, path)
    first = path.read_text().splitlines()[0]
    assert first == "navgrid-world v1"
    bad = path.read_text().replace("navgrid-world v1", "navgrid-world v9")
    path.write_text(bad)
    with pytest.raises(ValueError, match="version"):
        load_world(path)


def test_dataset_round_trip(world, tmp_path):
    ds = generate_nav_dataset(world, {1: 4, 2: 4, 3: 4}, seed=5)
    path = tmp_path / "data.txt"
    save_nav_dataset(ds, path)
    loaded = load_nav_dataset(path)
    assert loaded.seed == ds.seed
    assert loaded.samples == ds.samples


def test_dataset_byte_stable(world, tmp_path):
    ds = generate_nav_dataset(world, {1: 3, 2: 3}, seed=6)
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    save_nav_dataset(ds, p1)
    save_nav_dataset(load_nav_dataset(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_dataset_rejects_wrong_magic(world, tmp_path):
    ds = generate_nav_dataset(world, {1: 2}, seed=6)
    path = tmp_path / "data.txt"
    save_nav_dataset(ds, path)
    path.write_text(path.read_text().replace("navgrid-data", "navgrid-other"))
    with pytest.raises(ValueError):
        load_nav_dataset(path)


def test_dataset_record_count_checked(world, tmp_path):
    ds = generate_nav_dataset(world, {1: 3}, seed=6)
    path = tmp_path / "data.txt"
    save_nav_dataset(ds, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError, match="records"):
        load_nav_dataset(path)
