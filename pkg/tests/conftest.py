import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from risknet.levy_core import ClaimLaw, LevyModel
from risknet.map_scale import MapModel

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", deadline=None, max_examples=15)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def exp_model():
    """c=2, lambda=1, Exp(1) claims: rho = 1/2."""
    return LevyModel(2.0, 1.0, ClaimLaw.exponential(1.0))


@pytest.fixture
def hyp_model():
    return LevyModel(3.0, 1.5, ClaimLaw.hyperexponential([0.3, 0.7], [0.5, 3.0]))


@pytest.fixture
def erlang_model():
    """Erlang(2, 2) claims in phase-type form (mean 1)."""
    law = ClaimLaw.phase_type([1.0, 0.0], [[-2.0, 2.0], [0.0, -2.0]])
    return LevyModel(2.5, 1.0, law)


@pytest.fixture
def toy_map():
    """Two-phase Markov-modulated Cramer-Lundberg model with a transition jump."""
    return MapModel(
        Q=np.array([[-1.0, 1.0], [2.0, -2.0]]),
        c=[2.0, 1.0],
        lam=[1.0, 0.5],
        claims=[ClaimLaw.exponential(1.5), ClaimLaw.exponential(1.0)],
        jumps={(0, 1): ClaimLaw.exponential(2.0)},
    )


@pytest.fixture
def models_dir():
    return Path(__file__).resolve().parent.parent / "models"


ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    results = request.config.stash[ACCEPTANCE_KEY]

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        results[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
