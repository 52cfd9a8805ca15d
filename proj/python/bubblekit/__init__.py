"""Option pricing under price bubbles.

Thin Python layer over the C++ core: smooth price maps and their Schwarzian derivatives,
reflected-path Monte Carlo, the fundraiser boundary scheme and its rivals, and closed-form
reference prices for the Brownian and reciprocal-Bessel models.
"""

from ._core import (
    ConfigError,
    DomainError,
    NumericError,
    Payoff,
    Sigma,
    SmoothMap,
    affine_map,
    compose,
    config_hash,
    estimate_theta,
    f_from_sigma,
    fundraiser_delta_mc,
    is_strict_local_martingale,
    log_map,
    map_from_json,
    mobius_map,
    normal_cdf,
    oracle,
    oracle_cases,
    power_law_map,
    pre_schwarzian,
    price_fundraiser_mc,
    price_investor_mc,
    reciprocal_map,
    resolve_config,
    run_compare_schemes,
    run_convergence,
    run_price,
    run_simulate,
    run_theta,
    schwarzian,
    schwarzian_process,
    simulate_bessel3_dual,
    simulate_skorokhod,
)

__version__ = "0.1.0"
