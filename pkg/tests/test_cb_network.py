import math

import numpy as np
import pytest
from scipy import integrate

from risknet.cb_network import (
    CbMap,
    CbNetwork,
    SubsidiarySpec,
    build_cb_map,
    cb_dividend_value,
    dividend_barrier_scan,
    first_bailout_density,
    optimal_allocation,
    reduce_chain,
    reduce_deterministic_cb,
)
from risknet.compendium import Compendium
from risknet.ladder import two_point_pade3
from risknet.levy_core import ClaimLaw, DomainError
from risknet.map_scale import MapModel
from risknet.mc import SimConfig, simulate_map_rows, simulate_network_ruin, simulate_network_rows
from risknet.mc import kernels as K

EXP1 = ClaimLaw.exponential(1.0)


def single(u0=1.0, c0=2.0, u1=0.0, c1=1.0, k=2.0, lam=1.0, claim=EXP1):
    return CbNetwork(u0, c0, [SubsidiarySpec(u1, c1, k, lam, claim)])


@pytest.fixture
def fig_sub():
    """Subsidiary of the dividend figure: lambda = mu = k = 1, c1 = 4."""
    return SubsidiarySpec(0.0, 4.0, 1.0, 1.0, EXP1)


class TestNetwork:
    def test_validation(self):
        with pytest.raises(ValueError):
            CbNetwork(1.0, 1.0, [])
        with pytest.raises(ValueError):
            SubsidiarySpec(0.0, 1.0, 0.5, 1.0, EXP1)
        with pytest.raises(ValueError):
            CbNetwork(-1.0, 1.0, [SubsidiarySpec(0.0, 1.0, 1.0, 1.0, EXP1)])


class TestReduction:
    def test_single_subsidiary(self):
        red = reduce_deterministic_cb(single())
        assert (red.u, red.c, red.exact) == (0.5, 2.0, True)
        assert red.ruin_probability() == pytest.approx(0.5 * math.exp(-0.25), rel=1e-12)
        assert red.ruin_probability() == pytest.approx(0.389400, abs=5e-7)

    def test_unit_cost_is_pooling(self):
        red = reduce_deterministic_cb(single(u0=0.7, c0=1.2, u1=0.4, c1=0.9, k=1.0))
        assert red.u == pytest.approx(1.1) and red.c == pytest.approx(2.1)
        rng = np.random.default_rng(4)
        values = []
        for _ in range(5):
            s = rng.uniform(0, 1.1)
            values.append(reduce_deterministic_cb(single(u0=s, c0=1.2, u1=1.1 - s, c1=0.9, k=1.0))
                          .ruin_probability())
        assert np.ptp(values) < 1e-12

    def test_two_subsidiaries_bound(self):
        net = CbNetwork(1.0, 1.0, [SubsidiarySpec(0.5, 1.5, 2.0, 1.0, EXP1),
                                   SubsidiarySpec(0.5, 1.0, 1.5, 0.5, EXP1)])
        red = reduce_deterministic_cb(net)
        assert not red.exact
        assert red.u == pytest.approx(1.0 + 2.0 * 0.5 + 1.5 * 0.5)
        assert red.c == pytest.approx(1.0 + 2.0 * 1.5 + 1.5 * 1.0)
        assert red.model.lam == pytest.approx(1.5)

    def test_monte_carlo_infinite_horizon(self):
        net = single()
        est = simulate_network_ruin(net, SimConfig(100_000, seed=41))
        assert est.agrees(reduce_deterministic_cb(net).ruin_probability())

    @pytest.mark.parametrize("reset,level", [("zero", 0.0), ("fixed", 0.5), ("uniform", 1.0)])
    def test_reset_policies(self, reset, level):
        net = single(u0=0.5, c0=1.0, u1=0.3, c1=1.2)
        cfg = SimConfig(100_000, seed=42, horizon=5.0)
        expected = reduce_deterministic_cb(net).ruin_probability(5.0)
        assert simulate_network_ruin(net, cfg, reset=reset, reset_level=level).agrees(expected)

    def test_pathwise_dominance(self):
        net = CbNetwork(1.0, 1.0, [SubsidiarySpec(0.5, 1.5, 2.0, 1.0, EXP1),
                                   SubsidiarySpec(0.5, 1.0, 1.5, 0.5, EXP1)])
        rows = simulate_network_rows(net, SimConfig(20_000, seed=43, horizon=20.0))
        assert np.all(rows.tau_network <= rows.tau_pooled)
        assert np.isfinite(rows.tau_network).any()


def simulate_chain(u, c, ks, lam, mu, horizon, n_paths, seed):
    """Event loop for a linear chain: level i pays ks[i] times the deficit of level i + 1."""
    rng = np.random.default_rng(seed)
    ruined = 0
    for _ in range(n_paths):
        x = np.array(u, dtype=float)
        t = 0.0
        while True:
            e = rng.exponential(1 / lam)
            if t + e > horizon:
                break
            t += e
            x += np.asarray(c) * e
            x[-1] -= rng.exponential(1 / mu)
            for i in range(len(x) - 1, 0, -1):
                if x[i] < 0:
                    x[i - 1] -= ks[i - 1] * (-x[i])
                    x[i] = 0.0
            if x[0] < 0:
                ruined += 1
                break
    p = ruined / n_paths
    return p, math.sqrt(p * (1 - p) / n_paths)


class TestChain:
    def test_three_levels(self):
        net = CbNetwork(1.0, 0.8, [SubsidiarySpec(0.6, 0.5, 2.0, 1.0, EXP1),
                                   SubsidiarySpec(0.4, 0.9, 2.0, 1.0, EXP1)], chain=True)
        red = reduce_chain(net)
        assert red.u == pytest.approx(1.0 / 4 + 0.6 / 2 + 0.4)
        assert red.c == pytest.approx(0.8 / 4 + 0.5 / 2 + 0.9)
        p, se = simulate_chain([1.0, 0.6, 0.4], [0.8, 0.5, 0.9], [2.0, 2.0], 1.0, 1.0, 3.0, 20_000, 44)
        assert abs(p - red.ruin_probability(3.0)) < 3 * se

    def test_unit_costs_sum(self):
        net = CbNetwork(1.0, 0.8, [SubsidiarySpec(0.6, 0.5, 1.0, 1.0, EXP1),
                                   SubsidiarySpec(0.4, 0.9, 1.0, 1.0, EXP1)], chain=True)
        red = reduce_chain(net)
        assert (red.u, red.c) == pytest.approx((2.0, 2.2))

    def test_single_level_matches(self):
        net = single(u0=0.7, c0=1.5, u1=0.2, c1=0.8, k=1.5)
        chained = CbNetwork(net.u0, net.c0, net.subsidiaries, chain=True)
        a, b = reduce_chain(chained), reduce_deterministic_cb(net)
        assert (a.u, a.c) == pytest.approx((b.u, b.c))


class TestAllocation:
    def test_costly_bailouts_favour_subsidiary(self):
        alloc = optimal_allocation(single(k=2.0), 1.0, 2.0)
        assert (alloc["u0"], alloc["u1"], alloc["c0"], alloc["c1"]) == (0.0, 1.0, 0.0, 2.0)
        best = reduce_deterministic_cb(single(u0=0.0, c0=0.0 + 1e-12, u1=1.0, c1=2.0)).ruin_probability()
        for s in (0.1, 0.3, 0.5, 0.7, 1.0):
            split = reduce_deterministic_cb(single(u0=s, c0=1e-12, u1=1.0 - s, c1=2.0))
            assert split.ruin_probability() > best

    def test_unit_cost_indifferent(self):
        assert optimal_allocation(single(k=1.0), 1.0, 2.0)["unique"] is False

    def test_no_capital(self):
        red = reduce_deterministic_cb(single(u0=0.0, c0=1e-12, u1=0.0, c1=2.0))
        assert red.ruin_probability() == pytest.approx(red.model.rho, rel=1e-10)

    def test_many_subsidiaries_unsupported(self):
        net = CbNetwork(1.0, 1.0, [SubsidiarySpec(0.0, 1.0, 1.0, 1.0, EXP1)] * 2)
        with pytest.raises(DomainError):
            optimal_allocation(net, 1.0, 1.0)


class TestFirstBailout:
    def test_single_subsidiary_form(self):
        net = CbNetwork(0.0, 1.0, [SubsidiarySpec(0.0, 2.0, 2.0, 1.0, EXP1)])
        from risknet.ladder import exact_ladder_density
        t, x = 0.8, 0.3
        expected = 2.0 * exact_ladder_density(0.5, 2.0 * t) * 0.5 * math.exp(-0.5 * x)
        assert first_bailout_density(net, t, x) == pytest.approx(expected, rel=1e-12)

    def test_total_mass(self):
        net = CbNetwork(0.0, 1.0, [SubsidiarySpec(0.0, 2.0, 2.0, 1.0, EXP1)])
        mass, _ = integrate.dblquad(lambda x, t: first_bailout_density(net, t, x), 0, 80, 0, 80,
                                    epsabs=1e-10)
        assert mass == pytest.approx(0.5, abs=1e-6)

    def test_swap_symmetry(self):
        a = SubsidiarySpec(0.0, 2.0, 1.5, 1.0, EXP1)
        b = SubsidiarySpec(0.0, 3.0, 1.0, 1.2, ClaimLaw.exponential(0.8))
        t, x = np.array([0.2, 1.0, 3.0]), np.array([0.5, 0.1, 2.0])
        assert first_bailout_density(CbNetwork(0, 1, [a, b]), t, x) == pytest.approx(
            first_bailout_density(CbNetwork(0, 1, [b, a]), t, x), rel=1e-14)

    def test_needs_exponential(self, hyp_model):
        net = CbNetwork(0.0, 1.0, [SubsidiarySpec(0.0, 3.0, 1.0, 1.5, hyp_model.claim)])
        with pytest.raises(DomainError):
            first_bailout_density(net, 1.0, 1.0)


class TestCbMap:
    def test_defective_symbol_entries(self, fig_sub):
        cb = build_cb_map(fig_sub, 24.0, quiet_state=False)
        pade = two_point_pade3(0.25)
        lam, alpha = pade.rates * 4.0, pade.weights
        s, r = 0.7, 1.0
        hat = r / (s + r)
        expected = np.diag(24.0 * s - lam) + np.outer(lam, alpha) * hat
        assert cb.map.symbol(s) == pytest.approx(expected, rel=1e-13)
        assert cb.initial == pytest.approx(alpha)

    def test_fluid_form(self, fig_sub):
        cb = build_cb_map(fig_sub, 24.0, quiet_state=False)
        lam, alpha, r, s = cb.ladder_rates, cb.ladder_weights, 1.0, 0.4
        top = np.hstack([np.diag(24.0 * s - lam), np.outer(lam, alpha)])
        bottom = np.hstack([r * np.eye(3), (-s - r) * np.eye(3)])
        assert cb.mmbm().symbol(s) == pytest.approx(np.vstack([top, bottom]), abs=1e-13)
        # eliminating the stages returns the jump form
        Ks = cb.mmbm().symbol(s)
        schur = Ks[:3, :3] - Ks[:3, 3:] @ np.linalg.solve(Ks[3:, 3:], Ks[3:, :3])
        assert schur == pytest.approx(cb.map.symbol(s), rel=1e-12)

    def test_quiet_state(self, fig_sub):
        cb = build_cb_map(fig_sub, 24.0)
        m = cb.map
        assert m.symbol(0.0) @ np.ones(4) == pytest.approx(np.zeros(4), abs=1e-14)
        assert cb.initial.sum() == pytest.approx(1.0)
        rho = 0.25
        for i in range(3):
            off = m.Q[i].sum() - m.Q[i, i]
            assert off + m.lam[i] == pytest.approx(cb.ladder_rates[i], rel=1e-13)
            assert m.Q[i, 3] == pytest.approx(cb.ladder_rates[i] * (1 - rho), rel=1e-12)

    def test_rejects_fixed_cost(self, fig_sub):
        with pytest.raises(DomainError):
            build_cb_map(fig_sub, 24.0, K=0.5)


class TestDividendScan:
    def test_single_phase_reduces_to_definetti(self, exp_model):
        cb = CbMap(MapModel.from_levy(exp_model), np.ones(1), np.ones(1), np.ones(1), 1.0, False)
        C = Compendium(exp_model)
        for b in (0.5, 2.0):
            assert cb_dividend_value(cb, 0.1, b) == pytest.approx(C.definetti_dividends(0.1, 0.0, b), rel=1e-10)
        scan = dividend_barrier_scan(cb, 0.1, np.linspace(0.1, 8.0, 80))
        best = max(C.definetti_dividends(0.1, 0.0, b) for b in np.linspace(0.1, 8.0, 2000))
        assert scan.v_star == pytest.approx(best, rel=1e-6)

    def test_figure_curve_is_unimodal(self, fig_sub):
        cb = build_cb_map(fig_sub, 24.0)
        scan = dividend_barrier_scan(cb, 0.1, np.linspace(0.01, 10.0, 400))
        assert scan.unimodal
        assert 0.01 < scan.b_star < 10.0

    def test_grid_validation(self, fig_sub):
        cb = build_cb_map(fig_sub, 24.0)
        with pytest.raises(DomainError):
            dividend_barrier_scan(cb, 0.0, [0.1, 0.2])
        with pytest.raises(DomainError):
            dividend_barrier_scan(cb, 0.1, [0.2, 0.1])

    def test_monte_carlo(self, fig_sub):
        q, b = 0.5, 1.0
        cb = build_cb_map(fig_sub, 24.0)
        value = cb_dividend_value(cb, q, b)
        rows = simulate_map_rows(cb.with_discount(q), SimConfig(100_000, seed=45), 0.0, b,
                                 initial=cb.initial, upper=K.UPPER_REFLECT)
        from risknet.mc import SimEstimate
        assert SimEstimate.from_samples(rows.dividends.sum(axis=1)).agrees(value)
