"""Tests for the Rényi-DP mechanisms, the ledger and the conversion to (epsilon, delta)."""

import math

import numpy as np
import pytest

from fairsynth.dp_core import (
    DEFAULT_ALPHAS,
    RdpAccountant,
    RdpCost,
    alphas_for_target,
    derive_rng,
    dp_to_rho,
    exponential_mechanism,
    exponential_probabilities,
    gaussian_mechanism,
    gaussian_sigma,
    rdp_to_dp,
)
from fairsynth.errors import BudgetExceededError, ConfigError


def test_gaussian_cost_formula(rng: np.random.Generator) -> None:
    _, cost = gaussian_mechanism(5.0, 1.0, 1.0, rng)
    assert cost.rho == 0.5
    assert cost.gamma(4.0) == 2.0


def test_gaussian_cost_vanishes_with_large_sigma(rng: np.random.Generator) -> None:
    _, cost = gaussian_mechanism(0.0, 1.0, 1e6, rng)
    assert cost.rho < 1e-12


def test_gaussian_rejects_bad_sigma(rng: np.random.Generator) -> None:
    with pytest.raises(ConfigError, match="sigma"):
        gaussian_mechanism(0.0, 1.0, 0.0, rng)


def test_gaussian_vector_shape(rng: np.random.Generator) -> None:
    noisy, _ = gaussian_mechanism(np.zeros(7), 1.0, 2.0, rng)
    assert np.asarray(noisy).shape == (7,)


@pytest.mark.slow
def test_gaussian_mean(rng: np.random.Generator) -> None:
    noisy, _ = gaussian_mechanism(np.zeros(1_000_000), 1.0, 2.0, rng)
    assert abs(float(np.mean(noisy))) <= 0.01


def test_gaussian_sigma_spends_exactly() -> None:
    for rho in (0.01, 0.5, 3.0):
        sigma = gaussian_sigma(rho)
        assert 1.0 / (2 * sigma**2) == pytest.approx(rho, rel=1e-12)


def test_exponential_single_candidate(rng: np.random.Generator) -> None:
    for _ in range(20):
        index, cost = exponential_mechanism(["only"], [3.0], 1.0, 1.0, rng)
        assert index == 0
        assert cost.rho == pytest.approx(1.0 / 8)


def test_exponential_empty_candidates(rng: np.random.Generator) -> None:
    with pytest.raises(ConfigError, match="at least one candidate"):
        exponential_mechanism([], [], 1.0, 1.0, rng)


def test_exponential_score_count_mismatch(rng: np.random.Generator) -> None:
    with pytest.raises(ConfigError):
        exponential_mechanism(["a", "b"], [1.0], 1.0, 1.0, rng)


def test_exponential_probabilities_closed_form() -> None:
    probabilities = exponential_probabilities([0.0, 10.0], 2.0, 1.0)
    assert probabilities[1] == pytest.approx(math.exp(10) / (1 + math.exp(10)), rel=1e-12)


def test_exponential_probabilities_stable_for_large_scores() -> None:
    probabilities = exponential_probabilities([1e6, 1e6 + 1.0], 2.0, 1.0)
    assert np.isfinite(probabilities).all()
    assert probabilities.sum() == pytest.approx(1.0)


@pytest.mark.slow
def test_exponential_equal_scores_frequency(rng: np.random.Generator) -> None:
    draws = [exponential_mechanism(["a", "b"], [1.0, 1.0], 1.0, 1.0, rng)[0] for _ in range(100_000)]
    assert abs(np.mean(draws) - 0.5) <= 0.01


@pytest.mark.slow
def test_exponential_frequency_matches_softmax(rng: np.random.Generator) -> None:
    draws = [exponential_mechanism(["a", "b"], [0.0, 10.0], 2.0, 1.0, rng)[0] for _ in range(100_000)]
    expected = math.exp(10) / (1 + math.exp(10))
    assert abs(np.mean(draws) - expected) <= 0.005


def test_rdp_to_dp_direct_formula() -> None:
    epsilon, alpha = rdp_to_dp(0.5, 0.01, [2.0])
    assert epsilon == pytest.approx(1 + math.log(100), abs=1e-12)
    assert alpha == 2.0


def test_rdp_to_dp_zero_rho_uses_largest_alpha() -> None:
    epsilon, alpha = rdp_to_dp(0.0, 1e-5)
    assert alpha == max(DEFAULT_ALPHAS)
    assert epsilon == pytest.approx(math.log(1e5) / (max(DEFAULT_ALPHAS) - 1))


def test_rdp_to_dp_is_grid_minimum() -> None:
    grid = np.linspace(1.25, 64, 60)
    rho, delta = 0.3, 1e-6
    epsilon, _ = rdp_to_dp(rho, delta, grid)
    for alpha in grid:
        assert epsilon <= alpha * rho + math.log(1 / delta) / (alpha - 1) + 1e-12


def test_rdp_to_dp_ties_go_to_smaller_alpha() -> None:
    # with rho = 0 and delta = 1 every alpha converts to epsilon = 0
    epsilon, alpha = rdp_to_dp(0.0, 1.0, [3.0, 2.0, 8.0])
    assert epsilon == 0.0
    assert alpha == 2.0


def test_rdp_to_dp_monotone() -> None:
    rhos = [0.0, 0.01, 0.1, 1.0, 10.0]
    epsilons = [rdp_to_dp(r, 1e-6)[0] for r in rhos]
    assert epsilons == sorted(epsilons)
    deltas = [1e-9, 1e-6, 1e-3, 0.5]
    by_delta = [rdp_to_dp(0.2, d)[0] for d in deltas]
    assert by_delta == sorted(by_delta, reverse=True)


@pytest.mark.parametrize(
    ("delta", "alphas"),
    [(0.0, DEFAULT_ALPHAS), (1.5, DEFAULT_ALPHAS), (1e-5, ()), (1e-5, (1.0,))],
)
def test_rdp_to_dp_rejects_bad_inputs(delta: float, alphas: tuple[float, ...]) -> None:
    with pytest.raises(ConfigError):
        rdp_to_dp(0.1, delta, alphas)


@pytest.mark.parametrize("rho", [0.001, 0.05, 0.5, 2.0, 40.0])
def test_dp_to_rho_round_trip(rho: float) -> None:
    epsilon, _ = rdp_to_dp(rho, 1e-6)
    assert dp_to_rho(epsilon, 1e-6) == pytest.approx(rho, abs=1e-8)


def test_dp_to_rho_monotone() -> None:
    rhos = [dp_to_rho(eps, 1e-6) for eps in (1.0, 10.0, 100.0, 1000.0)]
    assert rhos == sorted(rhos)
    assert rhos[-1] > 10


def test_dp_to_rho_without_log_term() -> None:
    rho = dp_to_rho(1.0, 1.0)
    assert rdp_to_dp(rho, 1.0)[0] == pytest.approx(1.0, abs=1e-9)
    assert rho == pytest.approx(1.0 / min(DEFAULT_ALPHAS), abs=1e-9)


def test_dp_to_rho_unattainable() -> None:
    with pytest.raises(ConfigError, match="unattainable"):
        dp_to_rho(0.01, 1e-12, [2.0])


def test_alpha_grid_kept_when_epsilon_fits() -> None:
    assert alphas_for_target(1.0, 1e-6) == DEFAULT_ALPHAS
    assert alphas_for_target(0.1, 1.0) == DEFAULT_ALPHAS


def test_alpha_grid_extended_for_small_epsilon() -> None:
    """Test that epsilon 0.1 at delta 1e-6 gets orders up to 512, where ln(1e6)/511 leaves room for rho."""
    with pytest.raises(ConfigError, match="unattainable"):
        dp_to_rho(0.1, 1e-6)
    grid = alphas_for_target(0.1, 1e-6)
    assert grid[: len(DEFAULT_ALPHAS)] == DEFAULT_ALPHAS
    assert grid[len(DEFAULT_ALPHAS) :] == (128.0, 256.0, 512.0)
    rho = dp_to_rho(0.1, 1e-6, grid)
    assert rho > 0
    assert rdp_to_dp(rho, 1e-6, grid)[0] == pytest.approx(0.1, abs=1e-9)


@pytest.mark.parametrize(("epsilon", "share"), [(0.0, 0.5), (-1.0, 0.5), (0.1, 0.0), (0.1, 1.0)])
def test_alpha_grid_extension_rejects_bad_inputs(epsilon: float, share: float) -> None:
    with pytest.raises(ConfigError):
        alphas_for_target(epsilon, 1e-6, log_term_share=share)


def test_accountant_additivity() -> None:
    accountant = RdpAccountant()
    for i in range(7):
        accountant.charge(f"step[{i}]", RdpCost(1.0 / 7))
    assert accountant.total_rho == pytest.approx(1.0, abs=1e-12)
    accountant.assert_total(1.0)


def test_accountant_order_free() -> None:
    costs = [0.1, 0.25, 0.003, 1.7, 0.04]
    forward, backward = RdpAccountant(), RdpAccountant()
    for c in costs:
        forward.charge("x", RdpCost(c))
    for c in reversed(costs):
        backward.charge("x", RdpCost(c))
    assert forward.total_rho == backward.total_rho


def test_greedy_plan_spends_exactly() -> None:
    """Test that r - 1 exponential calls at epsilon = sqrt(8 rho / (r - 1)) spend rho."""
    rho, r = 0.7, 12
    epsilon = math.sqrt(8 * rho / (r - 1))
    accountant = RdpAccountant()
    rng = np.random.default_rng(0)
    for step in range(r - 1):
        _, cost = exponential_mechanism([0, 1], [0.0, 1.0], epsilon, 1.0, rng)
        accountant.charge(f"select[{step}]", cost)
    assert abs(accountant.total_rho - rho) <= 1e-12


def test_gaussian_plan_spends_exactly() -> None:
    """Test that r Gaussian calls at sigma = sqrt(r / (2 rho)) spend rho."""
    rho, r = 0.7, 10
    sigma = math.sqrt(r / (2 * rho))
    accountant = RdpAccountant()
    rng = np.random.default_rng(0)
    for i in range(r):
        _, cost = gaussian_mechanism(1.0, 1.0, sigma, rng)
        accountant.charge(f"measure[{i}]", cost)
    assert abs(accountant.total_rho - rho) <= 1e-12


def test_assert_total_raises_over_budget() -> None:
    accountant = RdpAccountant()
    accountant.charge("a", RdpCost(0.6))
    accountant.charge("b", RdpCost(0.5))
    with pytest.raises(BudgetExceededError, match="exceeded"):
        accountant.assert_total(1.0)


def test_negative_cost_rejected() -> None:
    with pytest.raises(ConfigError):
        RdpCost(-0.1)


def test_ledger_report() -> None:
    accountant = RdpAccountant()
    accountant.charge("one_way[0]", RdpCost(0.2), "gaussian", 1.58)
    report = accountant.to_dict(1e-6)
    assert report["total_rho"] == 0.2
    assert report["entries"] == [{"label": "one_way[0]", "rho": 0.2, "mechanism": "gaussian", "parameter": 1.58}]
    assert report["epsilon"] == rdp_to_dp(0.2, 1e-6)[0]


def test_derive_rng_is_deterministic_and_label_split() -> None:
    first = derive_rng(42, "selection").random(5)
    again = derive_rng(42, "selection").random(5)
    other = derive_rng(42, "measure").random(5)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
