"""Independent oracles shared by the test modules.

Hermite values come from numpy's HermiteE series and integrals from
scipy quadrature, so none of them go through the package's own
recurrence or Monte Carlo code.
"""
import math

import numpy as np
import pytest
from numpy.polynomial import hermite_e
from scipy import integrate, stats


def he_normalized(n, x):
    """He_n(x) / sqrt(n!) via numpy's HermiteE series."""
    c = np.zeros(n + 1)
    c[n] = 1.0
    return hermite_e.hermeval(x, c) / math.sqrt(math.factorial(n))


def gauss_hermite(deg):
    """Nodes and weights integrating against the standard normal density."""
    x, w = hermite_e.hermegauss(deg)
    return x, w / math.sqrt(2.0 * math.pi)


def interval_mass(lo, hi, mean=0.0, sd=1.0):
    val, _ = integrate.quad(lambda t: stats.norm.pdf(t, mean, sd), lo, hi)
    return val


def interval_expectation(f, lo, hi, mean=0.0, sd=1.0):
    """E[f(x)] for x ~ N(mean, sd^2) conditioned on [lo, hi], by quadrature."""
    num, _ = integrate.quad(lambda t: f(t) * stats.norm.pdf(t, mean, sd), lo, hi, limit=200)
    return num / interval_mass(lo, hi, mean, sd)


def halfline_coefficient(n, lo, mean=0.0, sd=1.0):
    """c_n = E[H_n(x)] for N(mean, sd^2) restricted to [lo, inf)."""
    return interval_expectation(lambda t: he_normalized(n, t), lo, np.inf, mean, sd)


def halfline_psi_norm2(lo, mean=0.0, sd=1.0):
    """E_{N(0,1)}[psi^2] for psi = 1_[lo,inf) N(mean, sd^2) / (alpha N(0,1))."""
    alpha = interval_mass(lo, np.inf, mean, sd)

    def f(t):
        return np.exp(2.0 * stats.norm.logpdf(t, mean, sd) - stats.norm.logpdf(t))

    val, _ = integrate.quad(f, lo, np.inf, limit=200)
    return val / alpha**2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    """Print and keep one pass/fail line for an acceptance criterion."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
