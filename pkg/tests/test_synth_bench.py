import numpy as np
import pytest

from drivecone import bench, synth
from drivecone.scenario import RoadKind, audit


def test_bench_scene_shape(bench_scene):
    assert len(bench_scene.objects) == 30
    assert sum(len(r.points) for r in bench_scene.roads) == 16000
    assert sum(r.kind is RoadKind.STOP_SIGN for r in bench_scene.roads) == 8
    rep = audit(bench_scene)
    assert not (rep.infeasible or rep.initial_collision or rep.invalid_at_start)


def test_corridor_scene_deterministic():
    from drivecone.scenario import save_scenario
    assert save_scenario(synth.corridor_scene(seed=3)) == save_scenario(synth.corridor_scene(seed=3))


def test_zigzag_crossing_count():
    z = synth.zigzag(0, 80, 0.0, 3.0, 5)
    signs = np.sign(z[:, 1])
    assert np.count_nonzero(np.diff(signs[signs != 0]) != 0) == 5


def test_linear_r2():
    assert bench.linear_r2([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
    assert bench.linear_r2([1, 2, 3, 4], [1, 4, 9, 16]) < 1.0
    with pytest.raises(ValueError):
        bench.linear_r2([1, 2], [1, 2])


def test_single_bench_work_is_seeded(corridor):
    a = bench.bench([corridor], "single", repeats=2, seed=1)
    b = bench.bench([corridor], "single", repeats=2, seed=1)
    assert a.digests == b.digests and len(a.digests) == 2
    assert a.to_dict(timing=False) == b.to_dict(timing=False)
    assert a.sps_mean > 0 and len(a.repeat_sps) == 2


def test_multi_bench_curve(corridor):
    res = bench.bench([corridor], "multi", repeats=1, agent_counts=(1, 2, 4, 8, 100))
    assert [c["agents"] for c in res.curve] == [1, 2, 4, 8]
    assert "linear_r2" in res.to_dict()


def test_bench_argument_checks(corridor):
    with pytest.raises(ValueError):
        bench.bench([], "single")
    with pytest.raises(ValueError):
        bench.bench([corridor], "sideways")
