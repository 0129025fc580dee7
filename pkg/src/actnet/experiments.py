"""Monte Carlo harnesses: size distributions with KL goodness-of-fit, degree
statistics, component resilience, fixation sweeps, mutation-selection
frequency.

Every harness is a deterministic function of (inputs, master seed):
replicates map to RNG streams by replicate index, so results do not depend
on worker count or scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import _kernels
from .activation import ActivationEngine
from .errors import InvalidParameterError, MutationConflictError
from .game import (
    COOPERATE,
    AbsorptionResult,
    GameParams,
    Outcome,
    StrategyVector,
    run_mutation_samples,
    run_until_absorption,
)
from .graphs import ActiveMask, Graph, largest_component_relative_size
from .sampling import ActivationRates, RngStream, stream_rng
from .theory import stationary_log_pmf

DEFAULTS_VERSION = "1"

# Protocol defaults mirroring the source experiments' captions.
DEFAULTS = {
    "size": {"burn_in": 50.0, "horizon": 600.0, "dt": 0.1},
    "moments": {"burn_in": 50.0, "horizon": 1.0e4, "dt": 1.0},
    "degree": {"burn_in": 20.0, "horizon": 200.0, "dt": 10.0},
    "sweep": {"burn_in": 50.0, "horizon": 150.0, "dt": 1.0},
    "fixation": {"horizon": 1.0e5},
    "mutation": {"burn_in": 1.0e3, "samples": 10_000, "dt": 1.0},
    "game": {"w": 0.01, "delta": 1.0, "c": 1.0},
    "rates": {"t0": 1.0, "cap": 1.0e4},
}


@dataclass(frozen=True)
class SamplingSpec:
    """Observation protocol: sample at burn_in, burn_in+dt, ..., horizon."""

    burn_in: float
    horizon: float
    dt: float

    def __post_init__(self):
        if not (self.burn_in < self.horizon and self.dt > 0.0):
            raise InvalidParameterError(
                f"need burn_in < horizon and dt > 0, got {self}"
            )

    def times(self) -> np.ndarray:
        count = int(np.floor((self.horizon - self.burn_in) / self.dt)) + 1
        return self.burn_in + self.dt * np.arange(count)


@dataclass(frozen=True)
class SummaryStats:
    """Population (uncorrected) moments of a pooled sample."""

    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float

    @classmethod
    def from_sample(cls, x: np.ndarray) -> "SummaryStats":
        x = np.asarray(x, dtype=float)
        if len(x) == 0:
            raise InvalidParameterError("empty sample")
        return cls(
            mean=float(x.mean()),
            variance=float(x.var()),
            skewness=float(sps.skew(x, bias=True)),
            excess_kurtosis=float(sps.kurtosis(x, fisher=True, bias=True)),
        )


@dataclass(frozen=True, eq=False)
class Histogram:
    """Counts over integer bin values 0..len(counts)-1."""

    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "counts", np.asarray(self.counts, dtype=np.int64)
        )

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n(self) -> int:
        return len(self.counts) - 1

    def frequencies(self) -> np.ndarray:
        return self.counts / self.total

    def mean(self) -> float:
        return float(np.average(np.arange(len(self.counts)), weights=self.counts))

    def variance(self) -> float:
        vals = np.arange(len(self.counts))
        m = self.mean()
        return float(np.average((vals - m) ** 2, weights=self.counts))

    @classmethod
    def from_values(cls, values, n: int) -> "Histogram":
        return cls(counts=np.bincount(np.asarray(values, dtype=np.int64),
                                      minlength=n + 1))


# ---------------------------------------------------------------------------
# Activated-size statistics
# ---------------------------------------------------------------------------

def collect_size_distribution(g: Graph, rates: ActivationRates, burn_in: float,
                              horizon: float, dt: float, seed: int,
                              backend: str = "fast") -> Histogram:
    """Histogram of the activated count sampled every dt in [burn_in, horizon]."""
    spec = SamplingSpec(burn_in, horizon, dt)
    if backend == "fast":
        sizes = _kernels.activation_sizes(
            g.n, rates.lam, rates.mu, rates.t0, rates.cap,
            burn_in, horizon, dt, RngStream(seed).kernel_seed(),
        )
    elif backend == "python":
        engine = ActivationEngine(g, rates, stream_rng(seed))
        sizes = []
        for t in spec.times():
            engine.run_until(float(t))
            sizes.append(engine.activated_count)
    else:
        raise InvalidParameterError(f"unknown backend {backend!r}")
    return Histogram.from_values(sizes, g.n)


def kl_divergence(empirical: Histogram, rates: ActivationRates) -> float:
    """KL(empirical || stationary law), log-space theory side.

    Sums Q_i (log Q_i - log P_i) over bins with Q_i > 0; non-negative by
    Gibbs' inequality even though P is not renormalized to the support.
    """
    if empirical.total <= 0:
        raise InvalidParameterError("empirical histogram is empty")
    support = np.flatnonzero(empirical.counts)
    q = empirical.counts[support] / empirical.total
    log_p = stationary_log_pmf(empirical.n, support, rates)
    return float(np.sum(q * (np.log(q) - log_p)))


def single_vertex_activation_fraction(rates: ActivationRates, horizon: float,
                                      seed: int) -> float:
    """Exact time-average activation of one renewal vertex over [0, horizon]."""
    from .graphs import from_edges

    engine = ActivationEngine(from_edges(1, []), rates, stream_rng(seed))
    t_prev = 0.0
    active_time = 0.0
    while engine.peek_time() <= horizon:
        was_active = engine.phase[0] == 1
        ev = engine.step()
        if was_active:
            active_time += ev.time - t_prev
        t_prev = ev.time
    if engine.phase[0] == 1:
        active_time += horizon - t_prev
    return active_time / horizon


# ---------------------------------------------------------------------------
# Activated-subgraph topology
# ---------------------------------------------------------------------------

def _induced_degrees(g: Graph, bits: np.ndarray) -> np.ndarray:
    """Degrees of activated vertices within the activated-induced subgraph."""
    out = []
    for v in np.flatnonzero(bits):
        out.append(int(bits[g.neighbors(v)].sum()))
    return np.asarray(out, dtype=np.int64)


def activated_degree_stats(g: Graph, rates: ActivationRates,
                           sampling: SamplingSpec, seed: int):
    """Pooled induced-degree sample across snapshots -> (stats, histogram)."""
    engine = ActivationEngine(g, rates, stream_rng(seed))
    pooled = []
    for t in sampling.times():
        engine.run_until(float(t))
        pooled.append(_induced_degrees(g, engine.phase == 1))
    degrees = np.concatenate(pooled) if pooled else np.empty(0, dtype=np.int64)
    max_deg = int(g.degrees().max()) if g.n else 0
    return SummaryStats.from_sample(degrees), Histogram.from_values(degrees, max_deg)


def _snapshot_sweep(g: Graph, lam_values, mu_values, sampling: SamplingSpec,
                    seed: int, measure) -> list[dict]:
    """Run one engine per (lam, mu) cell and average `measure` over snapshots."""
    rows = []
    for cell, (lam, mu) in enumerate(
        (lam, mu) for lam in lam_values for mu in mu_values
    ):
        rates = ActivationRates(lam=lam, mu=mu)
        engine = ActivationEngine(g, rates, stream_rng(seed + cell))
        vals = []
        for t in sampling.times():
            engine.run_until(float(t))
            vals.append(measure(g, engine.phase == 1))
        rows.append({"lam": lam, "mu": mu, "value": float(np.mean(vals))})
    return rows


def _mean_induced_degree(g: Graph, bits: np.ndarray) -> float:
    deg = _induced_degrees(g, bits)
    return float(deg.mean()) if len(deg) else 0.0


def _largest_rel(g: Graph, bits: np.ndarray) -> float:
    return largest_component_relative_size(g, ActiveMask(bits=bits))


def mean_degree_sweep(g: Graph, lam_values, mu_values, sampling: SamplingSpec,
                      seed: int) -> list[dict]:
    """Mean activated-subgraph degree per (lam, mu) grid point."""
    return _snapshot_sweep(g, lam_values, mu_values, sampling, seed,
                           _mean_induced_degree)


def largest_component_sweep(g: Graph, lam_values, mu_values,
                            sampling: SamplingSpec, seed: int) -> list[dict]:
    """Mean relative size of the largest activated component per grid point."""
    return _snapshot_sweep(g, lam_values, mu_values, sampling, seed,
                           _largest_rel)


def lazy_walk_probe(g: Graph, rates: ActivationRates, trials: int, dt: float,
                    burn_in: float, seed: int) -> tuple[float, float]:
    """Empirical one-step walk at stationary snapshots.

    Each trial advances dt, picks a uniform focal vertex, then steps to a
    uniform activated neighbor (staying put if none). Returns the frequency
    of landing on the focal vertex's first-listed neighbor — the
    per-neighbor transition probability — and the stay frequency.
    """
    engine = ActivationEngine(g, rates, stream_rng(seed))
    walk_rng = stream_rng(seed, 1)
    engine.run_until(burn_in)
    t = burn_in
    slot0 = stays = 0
    for _ in range(trials):
        t += dt
        engine.run_until(t)
        focal = int(walk_rng.integers(g.n))
        nbrs = g.neighbors(focal)
        active = nbrs[engine.phase[nbrs] == 1]
        if len(active) == 0:
            stays += 1
            continue
        choice = active[int(walk_rng.integers(len(active)))]
        if choice == nbrs[0]:
            slot0 += 1
    return slot0 / trials, stays / trials


# ---------------------------------------------------------------------------
# Fixation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    invader_strategy: int
    invader_vertex: int
    outcome: Outcome
    time: float
    final_p_c: float

    @property
    def invader_fixed(self) -> bool:
        want = Outcome.FIXED_C if self.invader_strategy == COOPERATE else Outcome.FIXED_D
        return self.outcome is want


@dataclass(frozen=True)
class FixationEstimate:
    probability: float
    ci_low: float
    ci_high: float
    fixations: int
    extinctions: int
    timeouts: int
    replicates: int


def _one_fixation_replicate(g, rates, params, invader_strategy, horizon,
                            master_seed, rep, backend) -> ReplicateRecord:
    stream = RngStream(master_seed, rep)
    vertex = int(stream.generator().integers(g.n))
    s0 = StrategyVector.single_invader(g.n, vertex, invader_strategy)
    res: AbsorptionResult = run_until_absorption(
        g, rates, params, s0, horizon, stream.kernel_seed(), backend=backend
    )
    return ReplicateRecord(rep, invader_strategy, vertex, res.outcome,
                           res.time, res.final_p_c)


def _replicate_block(args):
    g, rates, params, invader, horizon, seed, lo, hi, backend = args
    return [
        _one_fixation_replicate(g, rates, params, invader, horizon, seed, r, backend)
        for r in range(lo, hi)
    ]


def run_fixation_replicates(g: Graph, rates: ActivationRates,
                            params: GameParams, invader_strategy: int,
                            replicates: int, seed: int, horizon: float,
                            workers: int = 1,
                            backend: str = "fast") -> list[ReplicateRecord]:
    """Independent invasion replicates; replicate r always uses stream r, so
    the outcome list is identical for any worker count."""
    if replicates < 1:
        raise InvalidParameterError("replicates must be >= 1")
    if params.v != 0.0:
        raise MutationConflictError("fixation estimates require v=0")
    if workers <= 1:
        return _replicate_block(
            (g, rates, params, invader_strategy, horizon, seed, 0, replicates,
             backend)
        )
    bounds = np.linspace(0, replicates, workers + 1, dtype=int)
    jobs = [
        (g, rates, params, invader_strategy, horizon, seed, int(lo), int(hi),
         backend)
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    out: list[ReplicateRecord] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for block in pool.map(_replicate_block, jobs):
            out.extend(block)
    out.sort(key=lambda r: r.replicate)
    return out


def summarize_fixation(records: list[ReplicateRecord]) -> FixationEstimate:
    """Fixation frequency with a normal-approximation binomial interval.

    Timeouts are excluded from both numerator and denominator and reported
    separately: absorption is guaranteed, so a timeout means the horizon was
    too short, not a third outcome.
    """
    timeouts = sum(1 for r in records if r.outcome is Outcome.TIMEOUT)
    fixations = sum(1 for r in records if r.invader_fixed)
    effective = len(records) - timeouts
    extinctions = effective - fixations
    if effective == 0:
        return FixationEstimate(float("nan"), float("nan"), float("nan"),
                                fixations, extinctions, timeouts, len(records))
    p = fixations / effective
    se = float(np.sqrt(p * (1.0 - p) / effective))
    return FixationEstimate(p, max(0.0, p - 1.96 * se), min(1.0, p + 1.96 * se),
                            fixations, extinctions, timeouts, len(records))


def estimate_fixation(g: Graph, rates: ActivationRates, params: GameParams,
                      invader_strategy: int, replicates: int, seed: int,
                      horizon: float = DEFAULTS["fixation"]["horizon"],
                      workers: int = 1) -> FixationEstimate:
    records = run_fixation_replicates(g, rates, params, invader_strategy,
                                      replicates, seed, horizon, workers)
    return summarize_fixation(records)


# ---------------------------------------------------------------------------
# Mutation-selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MutationFrequencyResult:
    mean_p_c: float
    samples: np.ndarray


def mutation_stationary_frequency(g: Graph, rates: ActivationRates,
                                  params: GameParams, burn_in: float,
                                  samples: int, seed: int,
                                  dt: float = 1.0) -> MutationFrequencyResult:
    """Mean cooperation frequency over `samples` post-burn-in snapshots.

    Starts from a fair random strategy vector; with mutation on, the chain
    is ergodic so the window average estimates the stationary frequency.
    """
    if params.v <= 0.0:
        raise MutationConflictError("mutation harness requires v > 0")
    stream = RngStream(seed)
    s0 = StrategyVector(
        s=(stream.generator().random(g.n) < 0.5).astype(np.uint8)
    )
    horizon = burn_in + samples * dt
    vals = run_mutation_samples(g, rates, params, s0, burn_in, horizon, dt,
                                stream.kernel_seed())
    vals = vals[:samples]
    return MutationFrequencyResult(float(vals.mean()), vals)
