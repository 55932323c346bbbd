import numpy as np
import pytest

from placesynth.data import load_demos, load_library, load_similarity
from placesynth.eval_harness import BenchmarkSpec, gen_benchmark
from placesynth.scene_graph import graph_from_scene

# lines printed by the acceptance module, echoed again in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def demos():
    return load_demos()


@pytest.fixture(scope="session")
def demo_graphs(demos):
    return [graph_from_scene(s, "demo") for s in demos]


@pytest.fixture(scope="session")
def library():
    return load_library()


@pytest.fixture(scope="session")
def table():
    return load_similarity()


@pytest.fixture(scope="session")
def small_bench(demo_graphs, library, table):
    return gen_benchmark(BenchmarkSpec.named("syn_easy", 6, seed=5), demo_graphs, library, table)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
