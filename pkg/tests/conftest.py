import numpy as np
import pytest

from qiansheng.coefficients import MaterialCoefficients

# One line per acceptance criterion, filled in by test_acceptance.py and
# printed at the end of the session.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def coeffs():
    """Coefficients satisfying the entropy inequality and the strengthened condition."""
    return MaterialCoefficients(a=1.0, b=0.5, c=1.0, J=0.5, L=1.0, beta1=0.1, beta4=2.0,
                                beta5=-0.5, beta6=0.5, mu1=1.0, mu2=1.0, mu2_tilde=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sym_traceless(rng, d, shape=()):
    m = rng.standard_normal((d, d) + shape)
    m = 0.5 * (m + np.swapaxes(m, 0, 1))
    return m - np.trace(m, axis1=0, axis2=1) / d * np.eye(d).reshape((d, d) + (1,) * len(shape))


def random_skew(rng, d, shape=()):
    m = rng.standard_normal((d, d) + shape)
    return 0.5 * (m - np.swapaxes(m, 0, 1))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
