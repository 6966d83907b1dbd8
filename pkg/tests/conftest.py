import numpy as np
import pytest

from poshawkes import kernels
from poshawkes.simulate import SyntheticTruth, default_calendar, generate_synthetic

DAY = 86400.0
ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, ok, detail)``; the lines are printed in the terminal summary."""

    def record(number, ok, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def available_backends():
    names = ["python"]
    try:
        from poshawkes import _core  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


@pytest.fixture(params=available_backends())
def backend(request):
    previous = kernels.backend_name()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(previous)


@pytest.fixture(scope="session")
def cal():
    return default_calendar(90)


@pytest.fixture(scope="session")
def synth30(cal):
    """30 days from the default synthetic truth."""
    return generate_synthetic(SyntheticTruth(), cal, (0.0, 30 * DAY), 11)


@pytest.fixture(scope="session")
def synth90(cal):
    return generate_synthetic(SyntheticTruth(), cal, (0.0, 90 * DAY), 5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


CV_SEEDS = 20


@pytest.fixture(scope="session")
def cv_runs(cal):
    """Per seed: {model: CVResult} on a fresh 90-day synthetic dataset, plus run seconds."""
    import time
    import warnings

    from poshawkes.evaluate import CVConfig, run_cv

    runs = []
    for seed in range(CV_SEEDS):
        ds = generate_synthetic(SyntheticTruth(), cal, (0.0, 90 * DAY), 1000 + seed)
        start = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = {k: run_cv(ds, cal, k, CVConfig(), seed) for k in ("hawkes", "nhpp", "regression")}
        runs.append((res, time.perf_counter() - start))
    return runs
