"""Shared fixtures and the acceptance-criteria terminal summary."""
import numpy as np
import pytest

# populated by tests/test_acceptance.py through the `acceptance` fixture
_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Recorder for acceptance-criterion outcomes.

    Call record(num, label, passed, detail="") BEFORE the asserts so the
    terminal summary shows one line per criterion even when one fails.
    """
    def record(num: int, label: str, passed: bool, detail: str = ""):
        _ACCEPTANCE[int(num)] = (label, bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        label, passed, detail = _ACCEPTANCE[num]
        mark = "PASS" if passed else "FAIL"
        line = f"[{mark}] criterion {num:2d}: {label}"
        if detail:
            line += f" | {detail}"
        tr.write_line(line)


# ---------------------------------------------------------------------------
# shared geometry fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def plane_chart():
    from qlayer.catalog import build_chart
    return build_chart("plane")


@pytest.fixture(scope="session")
def paraboloid_chart():
    from qlayer.catalog import build_chart
    return build_chart("paraboloid")


@pytest.fixture(scope="session")
def bump_chart():
    from qlayer.catalog import build_chart
    return build_chart("gaussian-bump")


@pytest.fixture(scope="session")
def shallow_config():
    from qlayer.layer import LayerConfig
    return LayerConfig(a=0.4)


def random_forms(rng: np.random.Generator, n: int, scale: float = 1.0):
    """A random (g, h) pair: g symmetric positive definite with unit-order
    conditioning, h symmetric of the given scale."""
    from qlayer.geometry import FundamentalForms
    B = rng.standard_normal((n, n))
    g = B @ B.T + n * np.eye(n)
    h = scale * (lambda S: 0.5 * (S + S.T))(rng.standard_normal((n, n)))
    N = np.zeros(n + 1)
    return FundamentalForms(g=g[None], h=h[None], N=N[None])
