import numpy as np
import pytest

from rwre import env as E
from rwre import walk as W


def test_deterministic_walk_path():
    law = E.deterministic((1, 2), u_hat=(1, 0))
    p = W.run_quenched(E.Environment(law, 0), (3, -1), 5, 7)
    assert p.positions[-1].tolist() == [8, 9]
    assert len(p) == 5
    assert np.all(W.regeneration_times(p, law.u_hat) == np.arange(6))


def test_walk_is_reproducible_and_never_moves_backwards(onetwo):
    env = E.Environment(onetwo, 4)
    a = W.run_quenched(env, (0,), 500, 11)
    b = W.run_quenched(env, (0,), 500, 11)
    assert np.array_equal(a.steps, b.steps)
    assert np.all(a.steps >= 1) and np.all(a.steps <= 2)


def test_walk_respects_site_table(lazy):
    env = E.Environment(lazy, 8)
    p = W.run_quenched(env, (0,), 2000, 2)
    pos = p.positions[:-1, 0]
    for x, z in zip(pos, p.steps[:, 0]):
        if env.site_env((int(x),)).prob((1,)) == 1.0:
            assert z == 1


def test_regeneration_times_threshold():
    proj = np.array([0, 0, 1, 1, 1, 3, 4, 4.5, 5.0])
    from rwre.kernels import regeneration_indices
    assert regeneration_indices(proj, 1.0).tolist() == [0, 2, 5, 6, 8]


def test_blocks_match_path_replay(lazy):
    bs = W.sample_blocks(lazy, count=300, master_seed=5, per_replicate=100)
    assert len(bs) == 300
    blocks = bs.blocks()
    for blk, t, x in zip(blocks, bs.duration, bs.displacement):
        assert blk.duration == t == blk.increments.shape[0]
        assert tuple(blk.increments.sum(axis=0)) == tuple(x)
        # a block ends on its only advance
        assert blk.increments[-1, 0] == 1 and blk.increments[:-1, 0].sum() == 0


def test_blocks_independent_of_worker_count(onetwo):
    a = W.sample_blocks(onetwo, count=3500, master_seed=9, per_replicate=1000, workers=1)
    b = W.sample_blocks(onetwo, count=3500, master_seed=9, per_replicate=1000, workers=4)
    assert np.array_equal(a.duration, b.duration)
    assert np.array_equal(a.displacement, b.displacement)
    assert np.array_equal(a.replicate, b.replicate)


def test_block_csv(tmp_path, lazy):
    bs = W.sample_blocks(lazy, count=10, master_seed=1)
    out = tmp_path / "b.csv"
    bs.to_csv(out)
    raw = out.read_bytes()
    assert raw.startswith(b"replicate,block_index,duration,dx0\r\n")
    assert raw.count(b"\r\n") == 11


def test_step_cap_reported():
    law = E.si_infty()
    bs = W.sample_blocks(law, count=200, master_seed=3, step_cap=5, per_replicate=100)
    assert bs.aborted
    assert all(t <= 5 for t in bs.duration)


def test_first_regeneration_lazy_mean(lazy):
    s = W.first_regeneration_times(lazy, 20_000, master_seed=2)
    # E sigma_1 = E[1/pi_01] = 1.5
    assert abs(s.mean() - 1.5) < 4 * s.std() / np.sqrt(s.size)


def test_common_points_nearest_neighbour(lazy):
    cp = W.two_walker_common_points(lazy, replicates=3, horizon=200)
    assert np.all(cp.increments == 1)


def test_common_points_need_1d():
    with pytest.raises(ValueError):
        W.two_walker_common_points(E.abscont())


def test_run_quenched_checks_dimension():
    import pytest
    from rwre import env as E
    from rwre.walk import run_quenched

    with pytest.raises(ValueError):
        run_quenched(E.Environment(E.abscont(), 0), 0, 5, 1)
