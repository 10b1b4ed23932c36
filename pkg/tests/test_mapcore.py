import numpy as np
import pytest

from swarmexp.dynamics import AgentState
from swarmexp.mapcore import (
    ExplorationMask,
    MapFormatError,
    MapInvariantError,
    WorldMap,
    load_map,
    project_to_grid,
    save_map,
)

from conftest import brute_range_scan, random_world


def tiny_map() -> WorldMap:
    free = np.array([[0.5, 0.5], [1.5, 0.5]])
    obst = np.array([[2.5, 0.5]])
    return WorldMap("tiny", 1.0, (0, 0, 4, 4), free, obst)


class TestMapFile:
    def test_roundtrip_counts(self, tmp_path):
        path = tmp_path / "t.mxm"
        save_map(tiny_map(), path)
        m = load_map(path)
        assert (m.n_free, m.n_obstacle) == (2, 1)
        assert m.name == "tiny"

    def test_empty_free_section_rejected(self, tmp_path):
        path = tmp_path / "bad.mxm"
        path.write_text("MAEXP 1\nNAME x\nRESOLUTION 1.0\nBOUNDS 0 0 4 4\n"
                        "FREE 0\nOBSTACLE 0\n")
        with pytest.raises(MapInvariantError, match="no free space"):
            load_map(path)

    def test_malformed_point_line(self, tmp_path):
        path = tmp_path / "bad.mxm"
        path.write_text("MAEXP 1\nNAME x\nRESOLUTION 1.0\nBOUNDS 0 0 4 4\n"
                        "FREE 1\n0.5 oops\nOBSTACLE 0\n")
        with pytest.raises(MapFormatError):
            load_map(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.mxm"
        path.write_text("NOPE 1\n")
        with pytest.raises(MapFormatError):
            load_map(path)

    def test_roundtrip_random_maps_bit_for_bit(self, tmp_path):
        rng = np.random.default_rng(7)
        for i in range(100):
            n_free = int(rng.integers(1, 60))
            n_obst = int(rng.integers(0, 30))
            free = rng.uniform(0, 100, (n_free, 2))
            obst = rng.uniform(100.5, 200, (n_obst, 2))
            m = WorldMap(f"r{i}", 0.25, (0, 0, 200, 200), free, obst)
            path = tmp_path / f"r{i}.mxm"
            save_map(m, path)
            back = load_map(path)
            assert np.array_equal(back.free, m.free)
            assert np.array_equal(back.obstacle, m.obstacle)
            assert back.bounds == m.bounds
            assert back.resolution == m.resolution
            # and the file itself is stable
            save_map(back, tmp_path / "again.mxm")
            assert (tmp_path / "again.mxm").read_bytes() == path.read_bytes()

    def test_save_zero_obstacles(self, tmp_path):
        m = WorldMap("noobs", 1.0, (0, 0, 4, 4), np.array([[1.0, 1.0]]), np.empty((0, 2)))
        path = tmp_path / "e.mxm"
        save_map(m, path)
        assert "OBSTACLE 0" in path.read_text()
        assert load_map(path).n_obstacle == 0

    def test_save_to_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            save_map(tiny_map(), tmp_path / "missing_dir" / "x.mxm")


class TestInvariants:
    def test_point_outside_bounds(self):
        with pytest.raises(MapInvariantError) as exc:
            WorldMap("bad", 1.0, (0, 0, 4, 4), np.array([[0.5, 0.5], [9.0, 0.5]]),
                     np.empty((0, 2)))
        assert exc.value.index == 1

    def test_overlapping_free_obstacle(self):
        with pytest.raises(MapInvariantError) as exc:
            WorldMap("bad", 1.0, (0, 0, 4, 4), np.array([[0.5, 0.5]]),
                     np.array([[0.6, 0.5]]))
        assert exc.value.index == 0

    def test_point_budget(self):
        with pytest.raises(MapInvariantError, match="exceeds limit"):
            WorldMap("big", 1.0, (0, 0, 4, 4), np.zeros((10, 2)) + 0.5,
                     np.empty((0, 2)), max_points=5)


class TestRangeQuery:
    def test_radius_covers_everything(self):
        m = tiny_map()
        assert np.array_equal(m.range_query((2, 2), 100.0, "free"), [0, 1])
        assert np.array_equal(m.range_query((2, 2), 100.0, "obstacle"), [0])

    def test_radius_must_be_positive(self):
        m = tiny_map()
        with pytest.raises(ValueError):
            m.range_query((1, 1), 0.0)
        # an epsilon radius returns only coincident points
        assert np.array_equal(m.range_query((0.5, 0.5), 1e-12), [0])

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(42)
        m = random_world(rng, n_free=800, n_obst=150)
        for _ in range(300):
            c = rng.uniform(-5, 45, 2)
            r = float(rng.uniform(0.1, 25.0))
            pts = m.free if rng.integers(2) == 0 else m.obstacle
            which = "free" if pts is m.free else "obstacle"
            got = m.range_query(c, r, which)
            want = brute_range_scan(pts, c, r)
            assert np.array_equal(got, want)


class TestExplorationMask:
    def test_first_marks(self):
        mask = ExplorationMask(2, 100)
        assert mask.mark(0, np.arange(5)) == (5, 5)

    def test_remark_is_idempotent(self):
        mask = ExplorationMask(2, 100)
        mask.mark(0, np.arange(5))
        assert mask.mark(0, np.arange(5)) == (0, 0)

    def test_cross_agent_credit(self):
        mask = ExplorationMask(2, 100)
        mask.mark(0, np.array([1, 2]))
        new_agent, new_global = mask.mark(1, np.array([1, 2, 3]))
        assert (new_agent, new_global) == (3, 1)

    def test_agent_out_of_range(self):
        mask = ExplorationMask(2, 10)
        with pytest.raises(IndexError):
            mask.mark(2, np.array([0]))

    def test_union_consistency_under_interleaving(self):
        rng = np.random.default_rng(3)
        mask = ExplorationMask(4, 500)
        prev_union = mask.union_mask.copy()
        for _ in range(200):
            agent = int(rng.integers(4))
            idx = rng.integers(0, 500, size=rng.integers(0, 30))
            mask.mark(agent, idx)
            union = np.logical_or.reduce(mask.per_agent, axis=0)
            assert np.array_equal(union, mask.union_mask)
            assert mask.explored_count == int(mask.union_mask.sum())
            # monotone: previously set bits stay set
            assert np.all(mask.union_mask[prev_union])
            prev_union = mask.union_mask.copy()
            assert 0.0 <= mask.coverage <= 1.0


class TestGridProjection:
    def agent_at(self, x, y):
        return AgentState(x, y, 0.0)

    def test_unexplored_map_center_agent(self):
        m = tiny_map()
        mask = ExplorationMask(1, m.n_free)
        g = project_to_grid(m, mask, [self.agent_at(2.0, 2.0)], [[(2.0, 2.0)]], 0,
                            width=8, height=8)
        assert g.channels[0].sum() == 0
        assert g.channels[2].sum() == 1
        assert g.channels[3].sum() == 1
        # position and trajectory agree when the trajectory is one pose
        assert np.array_equal(g.channels[2], g.channels[3])

    def test_fully_explored_equals_occupancy(self):
        m = tiny_map()
        mask = ExplorationMask(1, m.n_free)
        mask.mark(0, np.arange(m.n_free))
        g = project_to_grid(m, mask, [self.agent_at(2.0, 2.0)], [[(2.0, 2.0)]], 0,
                            width=8, height=8)
        occupied = np.zeros((8, 8), dtype=np.uint8)
        for x, y in m.free:
            occupied[int(y / 0.5), int(x / 0.5)] = 1
        assert np.array_equal(g.channels[0], occupied)

    def test_matches_naive_binning(self):
        rng = np.random.default_rng(9)
        m = random_world(rng, n_free=300, n_obst=80)
        mask = ExplorationMask(2, m.n_free)
        explored = rng.choice(m.n_free, size=120, replace=False)
        mask.mark(0, explored)
        traj = rng.uniform(0, 40, (25, 2))
        state = self.agent_at(traj[-1][0], traj[-1][1])
        g = project_to_grid(m, mask, [state, state], [traj, traj], 0,
                            width=125, height=125)

        W = H = 125
        cw = 40.0 / W
        naive = np.zeros((4, H, W), dtype=np.uint8)
        for i in explored:
            x, y = m.free[i]
            naive[0, min(int(y / cw), H - 1), min(int(x / cw), W - 1)] = 1
        for x, y in m.obstacle:
            naive[1, min(int(y / cw), H - 1), min(int(x / cw), W - 1)] = 1
        naive[2, min(int(state.y / cw), H - 1), min(int(state.x / cw), W - 1)] = 1
        for x, y in traj:
            naive[3, min(int(y / cw), H - 1), min(int(x / cw), W - 1)] = 1
        assert np.array_equal(g.channels, naive)

    def test_agent_index_checked(self):
        m = tiny_map()
        mask = ExplorationMask(1, m.n_free)
        with pytest.raises(IndexError):
            project_to_grid(m, mask, [self.agent_at(1, 1)], [[(1, 1)]], 1)
