import math

import numpy as np
import pytest

from actnet.errors import (
    CooperationInfeasibleError,
    DisconnectedGraphError,
    InvalidParameterError,
)
from actnet.graphs import from_edges, gen_rrg, gen_wsn, generate_connected
from actnet.sampling import ActivationRates, stream_rng
from actnet.theory import (
    activation_probability,
    activated_moments,
    coalescence_solve,
    critical_bc,
    fixation_first_order,
    one_step_walk_prob,
    stationary_log_pmf,
    stationary_log_pmf_vector,
    subgraph_pmf,
    walk_matrix,
)

RATES = ActivationRates(lam=3.5, mu=2.6)


def rates_quiet(lam, mu):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ActivationRates(lam=lam, mu=mu)


# -- activation probability -------------------------------------------------

def test_activation_probability_symmetry():
    assert activation_probability(rates_quiet(3.5, 3.5)) == pytest.approx(0.5)
    assert activation_probability(rates_quiet(2.6, 2.6)) == pytest.approx(0.5)


def test_activation_probability_values():
    assert activation_probability(RATES) == pytest.approx(2.4 / 3.9, rel=1e-12)
    assert activation_probability(RATES) == pytest.approx(0.61538, abs=1e-5)
    assert activation_probability(ActivationRates(3.5, 3.7)) == pytest.approx(
        4.05 / 8.3, rel=1e-12
    )


# -- stationary law ---------------------------------------------------------

def test_log_pmf_small_case():
    lp = [stationary_log_pmf(2, i, rates_quiet(3.5, 3.5)) for i in range(3)]
    assert np.exp(lp) == pytest.approx([0.25, 0.5, 0.25], rel=1e-12)


@pytest.mark.parametrize("n", [100, 1000, 5000])
def test_log_pmf_normalizes(n):
    total = np.exp(stationary_log_pmf_vector(n, RATES)).sum()
    assert abs(total - 1.0) < 1e-10


def test_log_pmf_mode_matches_binomial_mode():
    lp = stationary_log_pmf_vector(1000, RATES)
    p = activation_probability(RATES)
    # (n+1)p = 616 exactly, the tied-mode boundary case: 615 and 616 share it
    assert 1001 * p == pytest.approx(616.0, abs=1e-9)
    assert int(np.argmax(lp)) in (615, 616)
    assert lp[615] == pytest.approx(lp[616], abs=1e-12)


def test_log_pmf_range_check():
    with pytest.raises(InvalidParameterError):
        stationary_log_pmf(10, 11, RATES)


def test_moments_against_pmf_oracle():
    n = 1000
    mean, var = activated_moments(n, RATES)
    assert mean == pytest.approx(615.38, abs=0.01)
    assert var == pytest.approx(236.69, abs=0.01)
    pmf = np.exp(stationary_log_pmf_vector(n, RATES))
    i = np.arange(n + 1)
    mean_oracle = float((i * pmf).sum())
    var_oracle = float(((i - mean_oracle) ** 2 * pmf).sum())
    assert abs(mean / mean_oracle - 1.0) < 1e-9
    assert abs(var / var_oracle - 1.0) < 1e-9


def test_moments_symmetric_case_and_variance_peak():
    n = 1000
    mean, var = activated_moments(n, rates_quiet(3.5, 3.5))
    assert mean == pytest.approx(n / 2)
    assert var == pytest.approx(n / 4)
    # p=1/2 maximizes p(1-p): symmetric rates beat any other mu at fixed lam
    for mu in (2.6, 3.0, 4.5, 6.4):
        assert activated_moments(n, rates_quiet(3.5, mu))[1] <= var + 1e-12


def test_subgraph_pmf():
    p = activation_probability(RATES)
    assert subgraph_pmf(1, 1, RATES) == pytest.approx(p, rel=1e-12)
    probs = np.array([subgraph_pmf(8, i, RATES) for i in range(9)])
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert (np.arange(9) * probs).sum() == pytest.approx(8 * p, rel=1e-12)
    assert (np.arange(9) * probs).sum() == pytest.approx(4.923, abs=1e-3)


# -- one-step walk ----------------------------------------------------------

def test_walk_prob_limits():
    assert one_step_walk_prob(4, 1.0) == pytest.approx(0.25, rel=1e-12)
    assert one_step_walk_prob(1, 0.3) == pytest.approx(0.3, rel=1e-12)
    assert one_step_walk_prob(8, 2.4 / 3.9) == pytest.approx(0.124940, abs=1e-6)
    with pytest.raises(InvalidParameterError):
        one_step_walk_prob(0, 0.5)


def test_walk_prob_equals_binomial_sum_oracle():
    # pre-simplification form: sum_d (1/k) C(k,d) p^d (1-p)^(k-d)
    for k in range(1, 65):
        for p in np.linspace(0.05, 0.99, 20):
            oracle = sum(
                math.comb(k, d) * p**d * (1.0 - p) ** (k - d) / k
                for d in range(1, k + 1)
            )
            assert one_step_walk_prob(k, p) == pytest.approx(oracle, rel=1e-12)


# -- critical ratio ---------------------------------------------------------

def test_critical_bc_values():
    assert critical_bc(1000, 4, RATES) == pytest.approx(998 / 242.529, abs=2e-3)
    assert critical_bc(1000, 4, RATES) == pytest.approx(4.1150, abs=1e-4)
    # direct evaluation of the same expression at n=100
    p = activation_probability(RATES)
    expected = 98.0 / (100.0 * (1.0 - (1.0 - p) ** 4) / 4.0 - 2.0)
    assert critical_bc(100, 4, RATES) == pytest.approx(expected, rel=1e-12)
    assert critical_bc(100, 4, RATES) == pytest.approx(4.36469, abs=1e-4)


def test_critical_bc_recovers_classic_limit():
    # mu -> 2+ gives p -> 1, so (b/c)* -> (n-2)/(n/k - 2) -> k for large n
    rates = rates_quiet(3.5, 2.0 + 1e-9)
    n, k = 10_000, 4
    assert critical_bc(n, k, rates) == pytest.approx(
        (n - 2) / (n / k - 2), rel=1e-6
    )
    assert critical_bc(10_000_000, k, rates) == pytest.approx(k, rel=1e-3)


def test_critical_bc_decreasing_in_p():
    ps = []
    bcs = []
    for mu in (2.6, 3.0, 3.5, 4.5, 6.4):
        rates = rates_quiet(3.5, mu)
        ps.append(activation_probability(rates))
        bcs.append(critical_bc(1000, 8, rates))
    order = np.argsort(ps)
    assert all(np.diff(np.array(bcs)[order]) < 0)


def test_critical_bc_infeasible_regime():
    # tiny activation probability starves the denominator
    rates = rates_quiet(2.0 + 1e-9, 6.4)
    assert activation_probability(rates) < 1e-8
    with pytest.raises(CooperationInfeasibleError):
        critical_bc(100, 4, rates)


# -- coalescence ------------------------------------------------------------

def test_two_vertex_full_activation():
    g = from_edges(2, [(0, 1)])
    sol = coalescence_solve(g, p=1.0)
    assert sol.tau[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert sol.tau[1, 0] == pytest.approx(1.0, abs=1e-12)


def test_two_vertex_general_p_closed_form():
    # one unknown: tau = 1 + (1-p) tau  ->  tau = 1/p
    g = from_edges(2, [(0, 1)])
    sol = coalescence_solve(g, p=0.4)
    assert sol.tau[0, 1] == pytest.approx(1.0 / 0.4, rel=1e-12)


def test_walk_matrix_conventions():
    g = gen_rrg(20, 4, stream_rng(3))
    p = activation_probability(RATES)
    lazy = walk_matrix(g, p, "lazy")
    assert np.allclose(lazy.sum(axis=1), 1.0)
    assert np.allclose(np.diag(lazy), (1.0 - p) ** 4)
    sub = walk_matrix(g, p, "substochastic")
    assert np.allclose(sub.sum(axis=1), 1.0 - (1.0 - p) ** 4)
    simple = walk_matrix(g, p, "simple")
    assert np.allclose(simple.sum(axis=1), 1.0)
    assert np.allclose(np.diag(simple), 0.0)
    with pytest.raises(InvalidParameterError):
        walk_matrix(g, p, "bogus")


def test_coalescence_solution_shape_and_residual():
    g = generate_connected("rrg", 60, 2, k=4)
    sol = coalescence_solve(g, RATES)
    assert np.allclose(sol.tau, sol.tau.T)
    assert np.allclose(np.diag(sol.tau), 0.0)
    off = sol.tau[~np.eye(g.n, dtype=bool)]
    assert off.min() >= 1.0
    assert sol.residual() < 1e-8
    assert sol.tau_n[0] == 0.0


def test_fixed_point_solver_agrees_with_direct():
    g = from_edges(6, [(i, (i + 1) % 6) for i in range(6)])  # cycle C6
    direct = coalescence_solve(g, RATES)
    iterative = coalescence_solve(g, RATES, solver_bound=1)
    assert np.allclose(direct.tau, iterative.tau, atol=1e-7)


def test_coalescence_rejects_disconnected():
    g = from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(DisconnectedGraphError):
        coalescence_solve(g, RATES)


def test_fixation_first_order_neutral_and_symmetry():
    g = generate_connected("rrg", 50, 6, k=4)
    sol = coalescence_solve(g, RATES)
    rho_c, rho_d = fixation_first_order(sol, b=5.0, c=1.0, w=0.0)
    assert rho_c == pytest.approx(1 / 50, rel=1e-12)
    assert rho_d == pytest.approx(1 / 50, rel=1e-12)
    rho_c, rho_d = fixation_first_order(sol, b=5.0, c=1.0, w=0.01)
    assert rho_c + rho_d == pytest.approx(2 / 50, rel=1e-12)
    assert sol.rho_c == rho_c and sol.rho_d == rho_d


def test_fixation_sign_change_is_internally_consistent():
    # the root in b/c of rho_c - rho_d matches the aggregate formula
    g = generate_connected("rrg", 40, 8, k=4)
    sol = coalescence_solve(g, RATES)
    l2 = sol.walk @ sol.walk
    ratio = (sol.tau_i.mean() - 2 * sol.p) / (
        (sol.tau_i * np.diag(l2)).mean() - 2 * sol.p
    )
    lo, hi = fixation_first_order(sol, ratio - 1e-9, 1.0, 0.01), None
    hi = fixation_first_order(sol, ratio + 1e-9, 1.0, 0.01)
    assert lo[0] - lo[1] < 0 < hi[0] - hi[1]


def test_mean_tau_diagnostic_on_regular_graphs():
    # under row-stochastic conventions sum(tau_i) = n^2 exactly on regular
    # graphs; recorded as a diagnostic (the source's p*n^2 claim fails)
    g = generate_connected("rrg", 30, 5, k=4)
    sol = coalescence_solve(g, RATES)
    assert sol.tau_i.sum() == pytest.approx(30**2, rel=1e-9)


def test_coalescence_on_nonregular_graph_still_solves():
    g = gen_wsn(40, 4, 0.4, stream_rng(8))
    sol = coalescence_solve(g, RATES, convention="lazy")
    assert sol.residual() < 1e-8
