import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from drivecone import synth  # noqa: E402
from drivecone.scenario import save_scenario_file  # noqa: E402


# compiled kernels make the first example slow, so per-example deadlines are off
settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def corridor():
    return synth.corridor_scene(n_vehicles=12, n_points=4000, seed=1, n_corridors=2, length=300.0)


@pytest.fixture(scope="session")
def bench_scene():
    return synth.corridor_scene()


@pytest.fixture
def scenario_file(tmp_path, corridor):
    path = tmp_path / "corridor.json"
    save_scenario_file(corridor, path)
    return path
