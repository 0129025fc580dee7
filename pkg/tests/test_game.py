import numpy as np
import pytest

from actnet.errors import InvalidParameterError, MutationConflictError
from actnet.game import (
    COOPERATE,
    DEFECT,
    GameParams,
    GameRun,
    Outcome,
    StrategyVector,
    adoption_distribution,
    apply_update,
    death_birth_update,
    fitness_of,
    maybe_mutate,
    payoff_of,
    run_mutation_samples,
    run_until_absorption,
    schedule_update_times,
)
from actnet.graphs import ActiveMask, from_edges, generate_connected
from actnet.sampling import ActivationRates, stream_rng

RATES = ActivationRates(lam=3.5, mu=2.6)


def star_graph(k):
    """Vertex 0 joined to 1..k."""
    return from_edges(k + 1, [(0, j) for j in range(1, k + 1)])


def all_active(n):
    return ActiveMask(bits=np.ones(n, dtype=bool))


# -- parameters -------------------------------------------------------------

def test_pdg_matrix_ordering():
    params = GameParams.pdg(b=12.0, c=1.0)
    assert params.R == 11.0 and params.S == -1.0
    assert params.T == 12.0 and params.P == 0.0
    assert params.T > params.R > params.P > params.S


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        GameParams(payoff=np.eye(3))
    with pytest.raises(InvalidParameterError):
        GameParams.pdg(b=5.0, c=1.0, w=-0.1)
    with pytest.raises(InvalidParameterError):
        GameParams.pdg(b=5.0, c=1.0, delta=0.0)
    with pytest.raises(InvalidParameterError):
        GameParams.pdg(b=5.0, c=1.0, v=1.5)


def test_fitness_positivity_gate():
    g = star_graph(8)
    GameParams.pdg(b=12.0, c=1.0, w=0.01).check_fitness_positive(g)
    with pytest.raises(InvalidParameterError):
        GameParams.pdg(b=12.0, c=1.0, w=0.2).check_fitness_positive(g)


# -- payoffs and fitness ----------------------------------------------------

def test_payoff_examples():
    params = GameParams.pdg(b=12.0, c=1.0)
    g = star_graph(3)
    s = StrategyVector(s=np.array([1, 1, 1, 1]))
    assert payoff_of(0, s, all_active(4), g, params) == pytest.approx(3 * params.R)

    # cooperator with no activated neighbors
    mask = ActiveMask(bits=np.array([True, False, False, False]))
    assert payoff_of(0, s, mask, g, params) == 0.0

    # defector with 2 activated C and 1 activated D neighbors: 2*T + P
    s = StrategyVector(s=np.array([0, 1, 1, 0]))
    assert payoff_of(0, s, all_active(4), g, params) == pytest.approx(24.0)

    with pytest.raises(InvalidParameterError):
        payoff_of(1, s, mask, g, params)


def test_fitness_linear_map():
    params = GameParams.pdg(b=12.0, c=1.0, w=0.01)
    assert fitness_of(24.0, params) == pytest.approx(1.24)
    assert fitness_of(-16.0, params) == pytest.approx(0.84)
    assert fitness_of(999.0, GameParams.pdg(b=12.0, c=1.0, w=0.0)) == 1.0


# -- update scheduling ------------------------------------------------------

def test_schedule_empty_interval():
    assert schedule_update_times((3.0, 3.0), 1.0, stream_rng(0)) == []


def test_schedule_times_inside_interval():
    rng = stream_rng(1)
    for _ in range(200):
        times = schedule_update_times((5.0, 9.0), 1.5, rng)
        assert all(5.0 < t <= 9.0 for t in times)
        assert times == sorted(times)


def test_schedule_expected_count():
    rng = stream_rng(2)
    delta, length, reps = 1.5, 2.0, 20_000
    counts = [len(schedule_update_times((0.0, length), delta, rng))
              for _ in range(reps)]
    mean = np.mean(counts)
    se = np.sqrt(delta * length / reps)
    assert abs(mean - delta * length) < 3 * se


def test_schedule_rejects_bad_args():
    with pytest.raises(InvalidParameterError):
        schedule_update_times((2.0, 1.0), 1.0, stream_rng(0))
    with pytest.raises(InvalidParameterError):
        schedule_update_times((0.0, 1.0), 0.0, stream_rng(0))


# -- death-birth ------------------------------------------------------------

def test_death_birth_unanimous_neighbors():
    g = star_graph(4)
    params = GameParams.pdg(b=5.0, c=1.0, w=0.01)
    s = StrategyVector(s=np.array([0, 1, 1, 1, 1]))
    for seed in range(20):
        assert death_birth_update(0, s, all_active(5), g, params,
                                  stream_rng(seed)) == COOPERATE


def test_death_birth_no_activated_neighbors_is_noop():
    g = star_graph(2)
    params = GameParams.pdg(b=5.0, c=1.0)
    s = StrategyVector(s=np.array([0, 1, 1]))
    mask = ActiveMask(bits=np.array([True, False, False]))
    assert death_birth_update(0, s, mask, g, params, stream_rng(0)) == DEFECT


def test_adoption_uniform_under_neutral_drift():
    g = star_graph(3)
    params = GameParams.pdg(b=5.0, c=1.0, w=0.0)
    s = StrategyVector(s=np.array([0, 1, 0, 1]))
    cands, probs = adoption_distribution(0, s, all_active(4), g, params)
    assert cands == [1, 2, 3]
    assert np.allclose(probs, 1 / 3)


def test_adoption_proportional_to_fitness():
    # two activated neighbors engineered to fitness exactly 1.2 and 0.8:
    # with R=6, S=-2, neighbor 1 (C, sees D0 + C3) earns -2+6=4 and
    # neighbor 2 (C, sees D0 + D4) earns -4; w=0.05 maps to 1.2 / 0.8
    g = from_edges(5, [(0, 1), (0, 2), (1, 3), (2, 4)])
    params = GameParams(payoff=np.array([[0.0, 1.0], [-2.0, 6.0]]), w=0.05)
    s = StrategyVector(s=np.array([0, 1, 1, 1, 0]))
    mask = all_active(5)
    f1 = fitness_of(payoff_of(1, s, mask, g, params), params)
    f2 = fitness_of(payoff_of(2, s, mask, g, params), params)
    assert f1 == pytest.approx(1.2)
    assert f2 == pytest.approx(0.8)
    cands, probs = adoption_distribution(0, s, mask, g, params)
    assert cands == [1, 2]
    assert probs == pytest.approx([0.6, 0.4])


def test_quiescent_neighbor_strategy_is_irrelevant():
    # flipping a quiescent neighbor's strategy leaves the update law alone
    g = star_graph(4)
    params = GameParams.pdg(b=7.0, c=1.0, w=0.02)
    mask = ActiveMask(bits=np.array([True, True, True, False, True]))
    s1 = StrategyVector(s=np.array([0, 1, 0, 1, 1]))
    s2 = StrategyVector(s=np.array([0, 1, 0, 0, 1]))  # vertex 3 flipped
    d1 = adoption_distribution(0, s1, mask, g, params)
    d2 = adoption_distribution(0, s2, mask, g, params)
    assert d1[0] == d2[0]
    assert np.allclose(d1[1], d2[1])


# -- mutation ---------------------------------------------------------------

def test_maybe_mutate_edge_cases():
    rng = stream_rng(3)
    never = GameParams.pdg(b=5.0, c=1.0, v=0.0)
    assert all(maybe_mutate(0, never, rng) == (False, None) for _ in range(100))

    always = GameParams.pdg(b=5.0, c=1.0, v=1.0)
    outcomes = [maybe_mutate(0, always, rng) for _ in range(2000)]
    assert all(m for m, _ in outcomes)
    frac_c = np.mean([st == COOPERATE for _, st in outcomes])
    assert abs(frac_c - 0.5) < 0.04


def test_maybe_mutate_rate():
    rng = stream_rng(4)
    params = GameParams.pdg(b=5.0, c=1.0, v=0.1)
    hits = sum(maybe_mutate(0, params, rng)[0] for _ in range(100_000))
    se = np.sqrt(0.1 * 0.9 / 100_000)
    assert abs(hits / 100_000 - 0.1) < 3 * se


# -- absorption runs --------------------------------------------------------

def test_monomorphic_starts_absorb_immediately():
    g = generate_connected("rrg", 20, 1, k=4)
    params = GameParams.pdg(b=12.0, c=1.0, w=0.01)
    for backend in ("fast", "reference"):
        r = run_until_absorption(g, RATES, params,
                                 StrategyVector.monomorphic(20, COOPERATE),
                                 1e4, 5, backend=backend)
        assert r.outcome is Outcome.FIXED_C and r.time == 0.0
        r = run_until_absorption(g, RATES, params,
                                 StrategyVector.monomorphic(20, DEFECT),
                                 1e4, 5, backend=backend)
        assert r.outcome is Outcome.FIXED_D and r.final_p_c == 0.0


def test_absorbing_states_are_never_exited():
    # bypass the early return: drive the co-simulation directly
    g = generate_connected("rrg", 12, 2, k=4)
    params = GameParams.pdg(b=5.0, c=1.0, w=0.01)
    for strat in (COOPERATE, DEFECT):
        run = GameRun(g, RATES, params, StrategyVector.monomorphic(12, strat),
                      stream_rng(6))
        for _ in range(100):
            run.step()
        assert run.coop_count == (12 if strat == COOPERATE else 0)


def test_coop_count_changes_by_at_most_one_per_event():
    g = generate_connected("rrg", 16, 3, k=4)
    params = GameParams.pdg(b=8.0, c=1.0, w=0.02)
    s0 = StrategyVector(s=(stream_rng(7).random(16) < 0.5).astype(np.uint8))
    run = GameRun(g, RATES, params, s0, stream_rng(8))
    prev = run.coop_count
    for _ in range(3000):
        run.step()
        assert abs(run.coop_count - prev) <= 1
        prev = run.coop_count
        assert run.coop_count == int(run.strategies.s.sum())


def test_timeout_reported_not_folded():
    g = generate_connected("rrg", 30, 4, k=4)
    params = GameParams.pdg(b=5.0, c=1.0, w=0.01)
    s0 = StrategyVector.single_invader(30, 0, COOPERATE)
    r = run_until_absorption(g, RATES, params, s0, horizon=2.0, seed=9)
    if r.outcome is Outcome.TIMEOUT:  # overwhelmingly likely at horizon 2
        assert r.time == 2.0
        assert 0 < r.final_coop_count < 30


def test_mutation_flag_conflicts():
    g = generate_connected("rrg", 10, 5, k=4)
    with_mut = GameParams.pdg(b=5.0, c=1.0, v=0.1)
    s0 = StrategyVector.single_invader(10, 0, COOPERATE)
    with pytest.raises(MutationConflictError):
        run_until_absorption(g, RATES, with_mut, s0, 1e3, 0)
    without = GameParams.pdg(b=5.0, c=1.0, v=0.0)
    with pytest.raises(MutationConflictError):
        run_mutation_samples(g, RATES, without, s0, 10.0, 100.0, 1.0, 0)


def test_backends_agree_statistically():
    # neutral invasion frequency: compiled kernel vs reference co-simulation
    from actnet.experiments import run_fixation_replicates, summarize_fixation

    g = generate_connected("rrg", 30, 19, k=4)
    params = GameParams.pdg(b=5.0, c=1.0, w=0.0)
    ref = summarize_fixation(run_fixation_replicates(
        g, RATES, params, COOPERATE, 3000, 77, 1e5, backend="reference"))
    fast = summarize_fixation(run_fixation_replicates(
        g, RATES, params, COOPERATE, 3000, 77, 1e5, backend="fast"))
    pooled_se = np.sqrt(ref.probability * (1 - ref.probability) / 3000
                        + fast.probability * (1 - fast.probability) / 3000)
    assert abs(ref.probability - fast.probability) < 4 * pooled_se
    assert ref.timeouts == 0 and fast.timeouts == 0


def test_strategy_vector_invariants():
    sv = StrategyVector(s=np.array([1, 0, 1]))
    assert sv.coop_count == 2 and sv.p_c == pytest.approx(2 / 3)
    with pytest.raises(InvalidParameterError):
        StrategyVector(s=np.array([1, 0]), coop_count=2)
    inv = StrategyVector.single_invader(5, 2, COOPERATE)
    assert inv.coop_count == 1 and inv.s[2] == 1


def test_apply_update_keeps_count_in_sync():
    g = star_graph(3)
    params = GameParams.pdg(b=5.0, c=1.0, w=0.01, v=0.5)
    s = StrategyVector(s=np.array([0, 1, 1, 0]))
    rng = stream_rng(10)
    for _ in range(200):
        apply_update(0, s, all_active(4), g, params, rng)
        assert s.coop_count == int(s.s.sum())
