import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import circle_contour  # noqa: E402


@pytest.fixture(scope="session")
def cube_mesh():
    from freesketch.contour import unit_cube
    return unit_cube()


@pytest.fixture(scope="session")
def cube_views(cube_mesh):
    from freesketch.pipeline import render_views
    return render_views(cube_mesh)


@pytest.fixture(scope="session")
def circle_run():
    """The 500-step circle regression run, shared by several modules."""
    from freesketch.optimizer import OptimizerConfig, optimize_sketch
    return optimize_sketch(circle_contour(), 16, OptimizerConfig(steps=500, rng_seed=0))


# a small but complete cube run: 16 strokes, 2 views, 16 optimizer steps
CUBE_RUN_FLAGS = ["--strokes", "16", "--views", "2", "--steps", "16", "--seed", "7"]


@pytest.fixture(scope="session")
def cube_stl(tmp_path_factory):
    from freesketch.contour import unit_cube, write_stl
    path = tmp_path_factory.mktemp("mesh") / "cube.stl"
    write_stl(unit_cube(), path)
    return path


@pytest.fixture(scope="session")
def cube_runs(cube_stl, tmp_path_factory):
    """Two independent ``run`` invocations with identical settings."""
    from freesketch.cli import main
    outs = []
    for label in ("a", "b"):
        out = tmp_path_factory.mktemp(f"run_{label}")
        code = main(["run", "--input", str(cube_stl), "--out", str(out), *CUBE_RUN_FLAGS])
        assert code == 0
        outs.append(out)
    return outs


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
