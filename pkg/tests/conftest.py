import numpy as np
import pytest

from invpot.net import NetworkSpec, init_params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_net(rng, input_dim, layers=2, width=5, time_input=False, scale=1.0):
    spec = NetworkSpec(input_dim, (width,) * layers, time_input=time_input)
    params = init_params(spec, rng)
    if scale != 1.0:
        params = params.with_vector(params.to_vector() * scale)
    # nonzero biases so the jets are not accidentally symmetric
    params = params.with_vector(params.to_vector() + 0.1 * rng.standard_normal(params.size()))
    return spec, params


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
