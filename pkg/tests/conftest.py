import numpy as np
import pytest

from sarpu.simulate import SimulationConfig, make_blobs, make_experiment_instances


@pytest.fixture(scope="session")
def blobs():
    return make_blobs(600, 3, 3.0, seed=11)


@pytest.fixture(scope="session")
def sar_instance(blobs):
    cfg = SimulationConfig(n_splits=1, n_labelings=1, seed=11)
    return make_experiment_instances(blobs, cfg)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
