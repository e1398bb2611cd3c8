import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from copilot.model import default_template, generate_tasks  # noqa: E402


@pytest.fixture(scope="session")
def template():
    return default_template()


@pytest.fixture()
def four_robot_graph(template):
    return generate_tasks(template, [f"spot{i}" for i in range(1, 5)])


ROBOTS6 = [f"spot{i}" for i in range(1, 7)]
