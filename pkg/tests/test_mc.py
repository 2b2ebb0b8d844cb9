import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from risknet.compendium import finite_time_ruin_exponential
from risknet.levy_core import ClaimLaw, DomainError, LevyModel
from risknet.mc import (
    USE_NUMBA,
    SimConfig,
    SimEstimate,
    infinite_horizon_proxy,
    simulate_ladder,
    simulate_ruin,
    simulate_two_sided_exit,
)
from risknet.mc.oracle import adjustment_coefficient, pack_law, scalar_rows
from risknet.mc.rng import uniforms

SNIPPET = """
import json, numpy as np
from risknet.levy_core import ClaimLaw, LevyModel
from risknet.mc import SimConfig
from risknet.mc.oracle import scalar_rows
m = LevyModel(3.0, 1.5, ClaimLaw.hyperexponential([0.3, 0.7], [0.5, 3.0]))
rows = scalar_rows(m, SimConfig(64, seed=99), 1.0, b=4.0, t_max=50.0, level_cap=np.inf)
print(json.dumps(rows.tolist()))
"""


def run_snippet(disable: str) -> np.ndarray:
    env = dict(os.environ, RISKNET_DISABLE_NUMBA=disable)
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True, check=True)
    return np.array(json.loads(out.stdout.strip().splitlines()[-1]))


class TestRng:
    def test_uniform_range_and_moments(self):
        u = uniforms(7, 0, 200_000)
        assert np.all((u > 0) & (u < 1))
        assert stats.kstest(u, "uniform").pvalue > 1e-3

    def test_substreams_differ(self):
        assert not np.array_equal(uniforms(7, 0, 16), uniforms(7, 1, 16))
        assert np.array_equal(uniforms(7, 3, 16), uniforms(7, 3, 16))

    def test_substreams_uncorrelated(self):
        a, b = uniforms(11, 0, 50_000), uniforms(11, 1, 50_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimConfig(0)
        with pytest.raises(ValueError):
            SimConfig(10, seed=-1)
        with pytest.raises(ValueError):
            SimConfig(10, q=-0.1)

    def test_estimate(self):
        est = SimEstimate.from_samples([0.0, 1.0, 0.0, 1.0])
        assert est.mean == 0.5
        assert est.agrees(0.5)
        assert set(est.to_dict()) == {"mean", "stderr", "n", "elapsed"}


class TestPacking:
    def test_phase_type_tables(self, hyp_model):
        m, beta_cum, rates, trans = pack_law(hyp_model.claim)
        assert m == 2
        assert beta_cum == pytest.approx([0.3, 1.0])
        assert rates == pytest.approx([0.5, 3.0])

    def test_row_width(self, erlang_model):
        rows = scalar_rows(erlang_model, SimConfig(1, seed=1), 0.0)
        assert rows.shape[1] == 7


class TestProxy:
    def test_adjustment_coefficient(self, exp_model):
        # Exp(1) claims, c = 2, lambda = 1: R = mu - lambda/c
        assert adjustment_coefficient(exp_model) == pytest.approx(0.5, rel=1e-10)

    def test_caps(self, exp_model):
        cap, tcap = infinite_horizon_proxy(exp_model)
        assert cap == pytest.approx(60.0, rel=1e-9)
        assert tcap > cap / exp_model.c

    def test_non_positive_drift(self):
        m = LevyModel(1.0, 1.0, ClaimLaw.exponential(1.0))
        assert infinite_horizon_proxy(m)[0] == math.inf

    def test_sigma_rejected(self):
        m = LevyModel(2.0, 1.0, ClaimLaw.exponential(1.0), sigma=0.5)
        with pytest.raises(DomainError):
            simulate_ruin(m, 1.0, SimConfig(10))


class TestReproducibility:
    def test_same_seed_same_rows(self, hyp_model):
        cfg = SimConfig(2_000, seed=5)
        a = scalar_rows(hyp_model, cfg, 1.0, b=3.0)
        b = scalar_rows(hyp_model, cfg, 1.0, b=3.0)
        assert np.array_equal(a, b)

    def test_seed_changes_rows(self, hyp_model):
        a = scalar_rows(hyp_model, SimConfig(500, seed=5), 1.0, b=3.0)
        b = scalar_rows(hyp_model, SimConfig(500, seed=6), 1.0, b=3.0)
        assert not np.array_equal(a, b)

    def test_prefix_stability(self, hyp_model):
        # path i uses its own substream, so growing n leaves earlier rows untouched
        a = scalar_rows(hyp_model, SimConfig(300, seed=5), 1.0, b=3.0)
        b = scalar_rows(hyp_model, SimConfig(900, seed=5), 1.0, b=3.0)
        assert np.array_equal(a, b[:300])

    @pytest.mark.skipif(not USE_NUMBA, reason="compares the compiled kernels with the interpreter")
    def test_compiled_matches_interpreter(self):
        jit_rows, py_rows = run_snippet("0"), run_snippet("1")
        assert jit_rows.shape == py_rows.shape == (64, 7)
        np.testing.assert_allclose(jit_rows, py_rows, rtol=1e-12, atol=1e-14)


class TestEstimators:
    def test_finite_time_ruin(self, exp_model):
        cfg = SimConfig(100_000, seed=12, horizon=4.0)
        assert simulate_ruin(exp_model, 1.0, cfg).agrees(finite_time_ruin_exponential(exp_model, 1.0, 4.0))

    def test_infinite_time_ruin(self, exp_model):
        est = simulate_ruin(exp_model, 1.0, SimConfig(100_000, seed=13))
        assert est.agrees(0.5 * math.exp(-0.5))

    def test_two_sided_exit_next_to_barrier(self):
        m = LevyModel(2.0, 1.0, ClaimLaw.exponential(1.0))
        est = simulate_two_sided_exit(m, 1.0, 1.0 + 1e-12, SimConfig(1_000, seed=1))
        assert est.mean > 0.99

    def test_ladder_censoring(self, exp_model):
        times, depths, censored = simulate_ladder(exp_model, 5_000, seed=2, t_max=1e-6)
        assert censored > 0.99
        assert times.size == round((1 - censored) * 5_000)
