"""Closed-form predictions and the coalescing-random-walk solver.

Everything here is a pure function of its inputs; simulation modules are
validated against these values, never the other way around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from .errors import (
    CooperationInfeasibleError,
    DisconnectedGraphError,
    InvalidParameterError,
)
from .graphs import Graph, is_connected
from .sampling import ActivationRates

WALK_CONVENTIONS = ("lazy", "substochastic", "simple")
DEFAULT_SOLVER_BOUND = 500
_FIXED_POINT_TOL = 1e-10
_FIXED_POINT_MAX_ITER = 2_000_000


def activation_probability(rates: ActivationRates) -> float:
    """Stationary probability that a single vertex is activated.

    Ratio of the mean activated sojourn to the mean cycle length:
    (mu-1)(lam-2) / [(mu-1)(lam-2) + (lam-1)(mu-2)].
    """
    a = (rates.mu - 1.0) * (rates.lam - 2.0)
    b = (rates.lam - 1.0) * (rates.mu - 2.0)
    return a / (a + b)


def stationary_log_pmf(n: int, i, rates: ActivationRates):
    """Log-probability of finding i activated vertices among n, stationary.

    Binomial(n, p) evaluated in log space (log-gamma binomials) so n in the
    thousands cannot overflow. Accepts a scalar or array i.
    """
    i_arr = np.asarray(i)
    if np.any(i_arr < 0) or np.any(i_arr > n):
        raise InvalidParameterError(f"i must lie in [0, {n}]")
    a = (rates.mu - 1.0) * (rates.lam - 2.0)
    b = (rates.lam - 1.0) * (rates.mu - 2.0)
    log_binom = gammaln(n + 1) - gammaln(i_arr + 1) - gammaln(n - i_arr + 1)
    out = (
        log_binom
        + i_arr * np.log(a)
        + (n - i_arr) * np.log(b)
        - n * np.log(a + b)
    )
    return out if out.shape else float(out)


def stationary_log_pmf_vector(n: int, rates: ActivationRates) -> np.ndarray:
    """log P_i for every i in 0..n."""
    return stationary_log_pmf(n, np.arange(n + 1), rates)


def activated_moments(n: int, rates: ActivationRates) -> tuple[float, float]:
    """Mean and variance of the stationary activated count: n*p, n*p*(1-p)."""
    p = activation_probability(rates)
    return n * p, n * p * (1.0 - p)


def subgraph_pmf(n_prime: int, i: int, rates: ActivationRates) -> float:
    """Probability that i of an n_prime-vertex subgraph are activated.

    Same binomial law as the whole network (activation is vertex-independent).
    """
    if n_prime < 1:
        raise InvalidParameterError(f"subgraph size must be >= 1, got {n_prime}")
    return float(np.exp(stationary_log_pmf(n_prime, i, rates)))


def one_step_walk_prob(k_i: int, p: float) -> float:
    """Per-neighbor probability of the activated-neighbor walk.

    A walker at a degree-k_i vertex steps to a specific neighbor iff that
    neighbor is activated and is the uniform pick among activated neighbors:
    [1 - (1-p)^k_i] / k_i.
    """
    if k_i < 1:
        raise InvalidParameterError(f"degree must be >= 1, got {k_i}")
    return (1.0 - (1.0 - p) ** k_i) / k_i


def critical_bc(n: int, k: int, rates: ActivationRates) -> float:
    """Critical benefit-to-cost ratio on a degree-k homogeneous network.

    (b/c)* = (n-2) / (n*[1-(1-p)^k]/k - 2); above it, a cooperator invader
    fixes more often than a defector invader under weak selection.
    """
    p = activation_probability(rates)
    denom = n * one_step_walk_prob(k, p) - 2.0
    if denom <= 0.0:
        raise CooperationInfeasibleError(
            f"n*[1-(1-p)^k]/k - 2 = {denom:.6g} <= 0: cooperation cannot be favored"
        )
    return (n - 2.0) / denom


# ---------------------------------------------------------------------------
# Coalescing random walks
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CoalescenceSolution:
    """Pairwise coalescence times and their aggregates for one walk matrix."""

    walk: np.ndarray  # n x n one-step matrix l_ij
    tau: np.ndarray  # n x n symmetric meeting times, zero diagonal
    tau_i: np.ndarray  # per-vertex tau_i = 1 + sum_k l_ik tau_ik
    tau_n: tuple[float, float, float, float]  # (1/n) sum_ij l^(m)_ij tau_ij, m=0..3
    p: float
    convention: str
    rho_c: float | None = field(default=None)
    rho_d: float | None = field(default=None)

    @property
    def n(self) -> int:
        return self.walk.shape[0]

    def residual(self) -> float:
        """Max violation of the recurrence tau_ij = 1 + avg one-step tau."""
        n = self.n
        rec = 1.0 + 0.5 * (self.walk @ self.tau + self.tau @ self.walk.T)
        diff = np.abs(self.tau - rec)
        diff[np.diag_indices(n)] = 0.0
        return float(diff.max())


def walk_matrix(g: Graph, p: float, convention: str = "lazy") -> np.ndarray:
    """One-step walk matrix for the activated-neighbor walk.

    lazy: residual mass (1-p)^k stays put, rows sum to 1.
    substochastic: no self-loop, rows sum to 1-(1-p)^k.
    simple: uniform neighbor walk, activation ignored.
    """
    if convention not in WALK_CONVENTIONS:
        raise InvalidParameterError(f"unknown convention {convention!r}")
    L = np.zeros((g.n, g.n))
    for v in range(g.n):
        k = g.degree(v)
        if k == 0:
            L[v, v] = 1.0
            continue
        if convention == "simple":
            L[v, g.neighbors(v)] = 1.0 / k
        else:
            L[v, g.neighbors(v)] = one_step_walk_prob(k, p)
            if convention == "lazy":
                L[v, v] = (1.0 - p) ** k
    return L


def _pair_index(n: int):
    """Map (i, j) with i<j to a dense pair id."""
    idx = {}
    c = 0
    for i in range(n):
        for j in range(i + 1, n):
            idx[(i, j)] = c
            c += 1
    return idx


def _solve_pairs_sparse(g: Graph, L: np.ndarray) -> np.ndarray:
    n = g.n
    pidx = _pair_index(n)
    rows, cols, vals = [], [], []

    def add(r, i, j, v):
        if i == j or v == 0.0:
            return
        rows.append(r)
        cols.append(pidx[(min(i, j), max(i, j))])
        vals.append(v)

    for (i, j), r in pidx.items():
        diag = 1.0 - 0.5 * (L[i, i] + L[j, j])
        rows.append(r)
        cols.append(r)
        vals.append(diag)
        for k in g.neighbors(i):
            add(r, j, int(k), -0.5 * L[i, k])
        for k in g.neighbors(j):
            add(r, i, int(k), -0.5 * L[j, k])

    m = len(pidx)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(m, m))
    x = sparse.linalg.spsolve(A, np.ones(m))
    T = np.zeros((n, n))
    for (i, j), r in pidx.items():
        T[i, j] = T[j, i] = x[r]
    return T


def _solve_pairs_fixed_point(L: np.ndarray, tol: float) -> np.ndarray:
    n = L.shape[0]
    T = np.ones((n, n))
    np.fill_diagonal(T, 0.0)
    for _ in range(_FIXED_POINT_MAX_ITER):
        nxt = 1.0 + 0.5 * (L @ T + T @ L.T)
        np.fill_diagonal(nxt, 0.0)
        delta = np.abs(nxt - T).max()
        T = nxt
        if delta < tol:
            return T
    raise InvalidParameterError("coalescence fixed-point iteration did not converge")


def coalescence_solve(
    g: Graph,
    rates: ActivationRates | None = None,
    *,
    p: float | None = None,
    convention: str = "lazy",
    solver_bound: int = DEFAULT_SOLVER_BOUND,
) -> CoalescenceSolution:
    """Solve tau_ij = 1 + (1/2) sum_k (l_ik tau_jk + l_jk tau_ik), tau_ii = 0.

    Takes either rates (p derived) or an explicit p. Uses a sparse direct
    solve over the n(n-1)/2 unordered pairs up to `solver_bound` vertices and
    fixed-point iteration beyond.
    """
    if (rates is None) == (p is None):
        raise InvalidParameterError("pass exactly one of rates / p")
    if p is None:
        p = activation_probability(rates)
    if not 0.0 < p <= 1.0:
        raise InvalidParameterError(f"p must lie in (0, 1], got {p}")
    if not is_connected(g):
        raise DisconnectedGraphError("coalescence times need a connected graph")

    L = walk_matrix(g, p, convention)
    if g.n <= solver_bound:
        T = _solve_pairs_sparse(g, L)
    else:
        T = _solve_pairs_fixed_point(L, _FIXED_POINT_TOL)

    tau_i = 1.0 + np.einsum("ik,ik->i", L, T)
    Lm = np.eye(g.n)
    tau_n = []
    for _ in range(4):
        tau_n.append(float(np.sum(Lm * T) / g.n))
        Lm = Lm @ L
    return CoalescenceSolution(
        walk=L,
        tau=T,
        tau_i=tau_i,
        tau_n=tuple(tau_n),
        p=p,
        convention=convention,
    )


def fixation_first_order(
    sol: CoalescenceSolution, b: float, c: float, w: float, n: int | None = None
) -> tuple[float, float]:
    """First-order fixation probabilities of a single invader.

    rho_C = 1/n + (w/2n) [ -c ((1/n) sum tau_i - 2p)
                           + b ((1/n) sum tau_i l^(2)_ii - 2p) ]
    and rho_D with the signs of b and c flipped, so rho_C + rho_D = 2/n.
    """
    if w < 0.0:
        raise InvalidParameterError(f"selection intensity must be >= 0, got {w}")
    if n is None:
        n = sol.n
    l2_diag = np.einsum("ik,ki->i", sol.walk, sol.walk)
    mean_tau = float(sol.tau_i.mean())
    mean_tau_l2 = float((sol.tau_i * l2_diag).mean())
    gain = -c * (mean_tau - 2.0 * sol.p) + b * (mean_tau_l2 - 2.0 * sol.p)
    rho_c = 1.0 / n + w / (2.0 * n) * gain
    rho_d = 1.0 / n - w / (2.0 * n) * gain
    sol.rho_c, sol.rho_d = rho_c, rho_d
    return rho_c, rho_d
