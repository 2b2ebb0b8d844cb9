"""Brute-force path simulation used to cross-check the analytic modules."""
from ._jit import USE_NUMBA
from .oracle import (
    MapRows,
    NetworkRows,
    SimConfig,
    SimEstimate,
    infinite_horizon_proxy,
    simulate_dividends,
    simulate_ladder,
    simulate_map_rows,
    simulate_network_ruin,
    simulate_network_rows,
    simulate_parisian_severity,
    simulate_regulated_ruin,
    simulate_ruin,
    simulate_severity,
    simulate_total_dividends,
    simulate_two_sided_exit,
    total_dividend_samples,
)

__all__ = [
    "USE_NUMBA",
    "MapRows",
    "NetworkRows",
    "SimConfig",
    "SimEstimate",
    "infinite_horizon_proxy",
    "simulate_dividends",
    "simulate_ladder",
    "simulate_map_rows",
    "simulate_network_ruin",
    "simulate_network_rows",
    "simulate_parisian_severity",
    "simulate_regulated_ruin",
    "simulate_ruin",
    "simulate_severity",
    "simulate_total_dividends",
    "simulate_two_sided_exit",
    "total_dividend_samples",
]
