"""Evolutionary prisoner's-dilemma engine on the activated subgraph.

Only activated vertices play: payoffs sum over activated neighbors, strategy
updates fire at Poisson rate delta while a vertex is activated, and the
death-birth rule copies an activated neighbor with probability proportional
to that neighbor's fitness. Quiescent vertices keep their strategies frozen
and are invisible to updates.

run_until_absorption has two interchangeable backends: a compiled fused
event loop ("fast") and a pure-Python co-simulation built from the public
operations ("reference"); the tests hold them to the same statistics.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .activation import ActivationEngine, Phase
from .errors import InvalidParameterError, MutationConflictError
from .graphs import ActiveMask, Graph
from .sampling import ActivationRates, sample_exponential, stream_rng

COOPERATE = 1
DEFECT = 0


@dataclass(frozen=True, eq=False)
class GameParams:
    """Payoff matrix, selection intensity, update rate, mutation probability.

    payoff is indexed [own_strategy][other_strategy] with 1 = cooperator,
    so payoff[1][1]=R, payoff[1][0]=S, payoff[0][1]=T, payoff[0][0]=P.
    """

    payoff: np.ndarray
    w: float = 0.01
    delta: float = 1.0
    v: float = 0.0
    b: float | None = field(default=None)
    c: float | None = field(default=None)

    def __post_init__(self):
        m = np.asarray(self.payoff, dtype=float)
        if m.shape != (2, 2):
            raise InvalidParameterError("payoff must be a 2x2 matrix")
        object.__setattr__(self, "payoff", m)
        self.payoff.setflags(write=False)
        if self.w < 0.0:
            raise InvalidParameterError(f"selection intensity must be >= 0, got {self.w}")
        if self.delta <= 0.0:
            raise InvalidParameterError(f"update rate must be positive, got {self.delta}")
        if not 0.0 <= self.v <= 1.0:
            raise InvalidParameterError(f"mutation probability must lie in [0,1], got {self.v}")

    @classmethod
    def pdg(cls, b: float, c: float, w: float = 0.01, delta: float = 1.0,
            v: float = 0.0) -> "GameParams":
        """Prisoner's dilemma shortcut: R=b-c, S=-c, T=b, P=0."""
        payoff = np.array([[0.0, b], [-c, b - c]])
        return cls(payoff=payoff, w=w, delta=delta, v=v, b=b, c=c)

    @property
    def R(self) -> float:
        return float(self.payoff[1, 1])

    @property
    def S(self) -> float:
        return float(self.payoff[1, 0])

    @property
    def T(self) -> float:
        return float(self.payoff[0, 1])

    @property
    def P(self) -> float:
        return float(self.payoff[0, 0])

    def check_fitness_positive(self, g: Graph) -> None:
        """Fail fast if some payoff sum could push fitness to zero or below."""
        max_deg = int(g.degrees().max()) if g.n else 0
        bound = self.w * float(np.abs(self.payoff).max()) * max_deg
        if bound >= 1.0:
            raise InvalidParameterError(
                f"w * max|payoff| * max_degree = {bound:.4g} >= 1: "
                f"fitness positivity is not guaranteed"
            )


@dataclass(eq=False)
class StrategyVector:
    """Per-vertex strategy bits (1 = cooperator) with a cached count."""

    s: np.ndarray
    coop_count: int = -1

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.uint8)
        actual = int(self.s.sum())
        if self.coop_count < 0:
            self.coop_count = actual
        elif self.coop_count != actual:
            raise InvalidParameterError(
                f"coop_count {self.coop_count} != popcount {actual}"
            )

    @classmethod
    def monomorphic(cls, n: int, strategy: int) -> "StrategyVector":
        return cls(s=np.full(n, strategy, dtype=np.uint8))

    @classmethod
    def single_invader(cls, n: int, vertex: int, strategy: int) -> "StrategyVector":
        s = np.full(n, 1 - strategy, dtype=np.uint8)
        s[vertex] = strategy
        return cls(s=s)

    @property
    def p_c(self) -> float:
        return self.coop_count / len(self.s)


class Outcome(Enum):
    FIXED_C = "fixed_c"
    FIXED_D = "fixed_d"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class AbsorptionResult:
    outcome: Outcome
    time: float
    final_coop_count: int
    n: int

    @property
    def final_p_c(self) -> float:
        return self.final_coop_count / self.n


# ---------------------------------------------------------------------------
# Single-step operations
# ---------------------------------------------------------------------------

def payoff_of(vertex: int, s: StrategyVector, mask: ActiveMask, g: Graph,
              params: GameParams) -> float:
    """Total payoff of an activated vertex against its activated neighbors."""
    if not mask.bits[vertex]:
        raise InvalidParameterError(f"vertex {vertex} is not activated")
    total = 0.0
    own = int(s.s[vertex])
    for j in g.neighbors(vertex):
        if mask.bits[j]:
            total += params.payoff[own, int(s.s[j])]
    return total


def fitness_of(payoff: float, params: GameParams) -> float:
    """Linear fitness 1 + w * payoff."""
    return 1.0 + params.w * payoff


def schedule_update_times(interval: tuple[float, float], delta: float,
                          rng: np.random.Generator) -> list[float]:
    """Poisson(delta) event times in (t_start, t_end]; empty when the
    interval is empty (length zero included)."""
    t_start, t_end = interval
    if t_start > t_end:
        raise InvalidParameterError(f"need t_start <= t_end, got {interval}")
    if delta <= 0.0:
        raise InvalidParameterError(f"update rate must be positive, got {delta}")
    times = []
    t = t_start + float(sample_exponential(delta, rng))
    while t <= t_end:
        times.append(t)
        t += float(sample_exponential(delta, rng))
    return times


def adoption_distribution(vertex: int, s: StrategyVector, mask: ActiveMask,
                          g: Graph, params: GameParams):
    """Activated neighbors of `vertex` and their adoption probabilities."""
    candidates = [int(j) for j in g.neighbors(vertex) if mask.bits[j]]
    if not candidates:
        return candidates, np.empty(0)
    fit = np.array(
        [fitness_of(payoff_of(j, s, mask, g, params), params) for j in candidates]
    )
    return candidates, fit / fit.sum()


def death_birth_update(vertex: int, s: StrategyVector, mask: ActiveMask,
                       g: Graph, params: GameParams,
                       rng: np.random.Generator) -> int:
    """New strategy for an updating activated vertex.

    Copies an activated neighbor with probability proportional to that
    neighbor's fitness; keeps the current strategy when no neighbor is
    activated.
    """
    if not mask.bits[vertex]:
        raise InvalidParameterError(f"vertex {vertex} is not activated")
    candidates, probs = adoption_distribution(vertex, s, mask, g, params)
    if not candidates:
        return int(s.s[vertex])
    r = rng.random()
    acc = 0.0
    for j, pj in zip(candidates, probs):
        acc += pj
        if r < acc:
            return int(s.s[j])
    return int(s.s[candidates[-1]])


def maybe_mutate(vertex: int, params: GameParams,
                 rng: np.random.Generator) -> tuple[bool, int | None]:
    """With probability v pick C or D uniformly; otherwise defer to the
    death-birth rule (returns (False, None))."""
    if params.v > 0.0 and rng.random() < params.v:
        return True, COOPERATE if rng.random() < 0.5 else DEFECT
    return False, None


def apply_update(vertex: int, s: StrategyVector, mask: ActiveMask, g: Graph,
                 params: GameParams, rng: np.random.Generator) -> int:
    """One full update event: mutation gate, then death-birth."""
    mutated, strat = maybe_mutate(vertex, params, rng)
    if not mutated:
        strat = death_birth_update(vertex, s, mask, g, params, rng)
    old = int(s.s[vertex])
    if strat != old:
        s.s[vertex] = strat
        s.coop_count += strat - old
    return strat


# ---------------------------------------------------------------------------
# Co-simulation
# ---------------------------------------------------------------------------

_KIND_TRANSITION = 0
_KIND_UPDATE = 1


class GameRun:
    """Reference co-simulation: merges the activation engine's transitions
    with per-activation Poisson update schedules in one event stream.

    Tie order is (time, kind, vertex) with transitions before updates, so a
    vertex quiescing at exactly an update instant wins and the update is
    skipped.
    """

    def __init__(self, g: Graph, rates: ActivationRates, params: GameParams,
                 s0: StrategyVector, rng: np.random.Generator):
        params.check_fitness_positive(g)
        if len(s0.s) != g.n:
            raise InvalidParameterError("strategy vector length must equal n")
        self.graph = g
        self.params = params
        self.rng = rng
        self.engine = ActivationEngine(g, rates, rng)
        self.strategies = StrategyVector(s=s0.s.copy())
        self._updates: list[tuple[float, int, int]] = []
        for v in range(g.n):
            if self.engine.phase[v] == 1:
                self._schedule_updates(v, 0.0)

    def _schedule_updates(self, v: int, start: float) -> None:
        end = float(self.engine.next_time[v])
        if start >= end:
            return
        for t in schedule_update_times((start, end), self.params.delta, self.rng):
            heapq.heappush(self._updates, (t, _KIND_UPDATE, v))

    def next_event_time(self) -> float:
        t_tr = self.engine.peek_time()
        t_up = self._updates[0][0] if self._updates else np.inf
        return min(t_tr, t_up)

    def step(self) -> None:
        """Process exactly one event (transition or update)."""
        t_tr = self.engine.peek_time()
        t_up = self._updates[0][0] if self._updates else np.inf
        if t_tr <= t_up:
            ev = self.engine.step()
            if ev.new_phase == Phase.ACTIVATED:
                self._schedule_updates(ev.vertex, ev.time)
        else:
            t, _, v = heapq.heappop(self._updates)
            if self.engine.phase[v] != 1:
                return  # vertex quiesced at exactly this instant
            mask = ActiveMask(bits=self.engine.phase.astype(bool),
                              count=self.engine.activated_count)
            apply_update(v, self.strategies, mask, self.graph, self.params,
                         self.rng)
            self.engine.now = t

    @property
    def coop_count(self) -> int:
        return self.strategies.coop_count


def _run_absorption_reference(g, rates, params, s0, horizon, rng):
    n = g.n
    if s0.coop_count in (0, n):
        outcome = Outcome.FIXED_C if s0.coop_count == n else Outcome.FIXED_D
        return AbsorptionResult(outcome, 0.0, s0.coop_count, n)
    run = GameRun(g, rates, params, s0, rng)
    while True:
        if run.next_event_time() > horizon:
            return AbsorptionResult(Outcome.TIMEOUT, horizon, run.coop_count, n)
        run.step()
        if run.coop_count in (0, n):
            outcome = Outcome.FIXED_C if run.coop_count == n else Outcome.FIXED_D
            return AbsorptionResult(outcome, run.engine.now, run.coop_count, n)


_OUTCOME_BY_CODE = {
    _kernels.OUTCOME_FIXED_C: Outcome.FIXED_C,
    _kernels.OUTCOME_FIXED_D: Outcome.FIXED_D,
    _kernels.OUTCOME_TIMEOUT: Outcome.TIMEOUT,
}


def run_until_absorption(g: Graph, rates: ActivationRates, params: GameParams,
                         s0: StrategyVector, horizon: float, seed: int,
                         backend: str = "fast") -> AbsorptionResult:
    """Co-simulate activation and strategy updates until the population is
    monomorphic or `horizon` is exceeded (reported as TIMEOUT, never folded
    into a fixation count). Requires mutation to be disabled."""
    if params.v != 0.0:
        raise MutationConflictError("absorption runs require mutation v=0")
    if horizon <= 0.0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    params.check_fitness_positive(g)
    if backend == "reference":
        return _run_absorption_reference(g, rates, params, s0, horizon,
                                         stream_rng(seed))
    if backend != "fast":
        raise InvalidParameterError(f"unknown backend {backend!r}")
    code, t_end, coop, _, _ = _kernels.cosim(
        g.indptr, g.indices, rates.lam, rates.mu, rates.t0, rates.cap,
        params.payoff, params.w, params.delta, 0.0, s0.s, horizon,
        seed & 0xFFFFFFFF, True, 0.0, 1.0, 0,
    )
    return AbsorptionResult(_OUTCOME_BY_CODE[code], float(t_end), int(coop), g.n)


def run_mutation_samples(g: Graph, rates: ActivationRates, params: GameParams,
                         s0: StrategyVector, burn_in: float, horizon: float,
                         sample_dt: float, seed: int) -> np.ndarray:
    """Cooperation fraction sampled at burn_in + k*sample_dt up to horizon,
    with mutation-selection dynamics running throughout."""
    if params.v <= 0.0:
        raise MutationConflictError("mutation harness requires v > 0")
    if not burn_in < horizon:
        raise InvalidParameterError("need burn_in < horizon")
    params.check_fitness_positive(g)
    max_samples = int(np.floor((horizon - burn_in) / sample_dt)) + 1
    _, _, _, filled, samples = _kernels.cosim(
        g.indptr, g.indices, rates.lam, rates.mu, rates.t0, rates.cap,
        params.payoff, params.w, params.delta, params.v, s0.s, horizon,
        seed & 0xFFFFFFFF, False, burn_in, sample_dt, max_samples,
    )
    return samples[:filled]
