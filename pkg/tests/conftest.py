import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from mobsim.fixtures import make_desk_fixture
from mobsim.io.config import RunConfig
from mobsim.pipeline import build_world, load_inputs


@pytest.fixture(scope="session")
def desk_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("desk")
    make_desk_fixture(d, seed=7, agents=1000)
    return d


@pytest.fixture(scope="session")
def desk_config(desk_dir):
    return RunConfig.load(desk_dir / "config.json")


@pytest.fixture(scope="session")
def desk_inputs(desk_config):
    return load_inputs(desk_config)


@pytest.fixture(scope="session")
def desk_world(desk_config, desk_inputs):
    return build_world(desk_config, desk_inputs)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
