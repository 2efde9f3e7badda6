import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ocpkit.distribution import BackgroundFeature, DistributionSpec, DriverFeature, NoisyFeature, dist1, dist2

settings.register_profile("ocpkit", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ocpkit")


@pytest.fixture(scope="session")
def d1():
    return dist1()


@pytest.fixture(scope="session")
def d2():
    return dist2()


probs = st.floats(0.05, 0.95)


@st.composite
def specs(draw, max_drivers=3, max_noisy=2, max_background=2, max_tau=6, reversible=True):
    """Small random specs; with ``reversible`` every background is stationary."""
    tau = draw(st.integers(2, max_tau))
    n_drv = draw(st.integers(1, max_drivers))
    drivers = [DriverFeature(draw(probs)) for _ in range(n_drv)]
    noisy = [NoisyFeature(draw(st.integers(0, n_drv - 1)), draw(probs)) for _ in range(draw(st.integers(0, max_noisy)))]
    background = []
    for _ in range(draw(st.integers(0, max_background))):
        kind = draw(st.sampled_from(["periodic", "markov_stay", "iid", "markov"] if not reversible else ["periodic", "markov_stay", "iid"]))
        if kind == "periodic":
            background.append(BackgroundFeature(kind))
        elif kind == "markov":
            background.append(BackgroundFeature(kind, (draw(probs), draw(probs), draw(probs))))
        else:
            background.append(BackgroundFeature(kind, draw(probs)))
    return DistributionSpec(tau=tau, drivers=drivers, noisy=noisy, background=background, name="random")


def empirical_table(x_first, x_second, k):
    """Normalized 2^k x 2^k histogram of already-encoded codes."""
    out = np.zeros((1 << k, 1 << k))
    np.add.at(out, (x_first, x_second), 1.0)
    return out / len(x_first)


ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, line: str) -> None:
    """Keep one line per acceptance check for the terminal summary."""
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
