import numpy as np
import pytest

from kpde.chaos import StochasticData
from kpde.grid import GridSpec
from kpde.multi_index import TruncationSet
from kpde.parabolic import OperatorSpec
from kpde.regularization import PotentialSpec
from kpde.verification import StochasticProblem


def gaussian_initial(n_fluct=5, amp=0.2):
    """Mean exp(-x^2) plus bumps centred at -2..2 on the unit vectors."""
    centres = np.linspace(-2, 2, n_fluct) if n_fluct > 1 else [1.0]
    fl = [(lambda x, c=c: amp * np.exp(-(x - c) ** 2)) for c in centres]
    return StochasticData.gaussian(lambda x: np.exp(-x**2), fl)


@pytest.fixture
def delta_noise_problem():
    spec = GridSpec(1, 8.0, 512)
    return StochasticProblem(OperatorSpec.laplacian(), PotentialSpec.delta(0.0),
                             StochasticData.time_white_noise(5), gaussian_initial(),
                             spec, 0.5, 0.01, TruncationSet(2, 5))


_CRITERIA: dict[int, tuple[str, bool, str]] = {}


def record_criterion(number, title, ok, detail):
    _CRITERIA[number] = (title, ok, detail)
    print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}: {detail}")
