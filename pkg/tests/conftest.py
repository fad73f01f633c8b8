import numpy as np
import pytest

from fatoushadow.blaschke import BlaschkeProduct

_ACCEPTANCE: dict[str, str] = {}


def random_products(count, seed, max_degree=6, max_modulus=0.9, with_origin=True):
    """Random Blaschke products; the first zero sits at 0 when ``with_origin``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = int(rng.integers(2, max_degree + 1))
        rad = max_modulus * np.sqrt(rng.random(m))
        zeros = rad * np.exp(2j * np.pi * rng.random(m))
        if with_origin:
            zeros[0] = 0
        out.append(BlaschkeProduct(float(rng.uniform(0, 2 * np.pi)), list(zeros)))
    return out


def random_disk(rng, n, max_modulus=0.999):
    return max_modulus * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        name = report.nodeid.split("::")[-1].removeprefix("test_")
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")
