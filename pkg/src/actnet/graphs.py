"""Underlying network construction, ingestion, and structural analysis.

Graphs are immutable, simple, and undirected; vertex ids are dense 0..n-1.
Adjacency is stored CSR-style (indptr/indices) so both the Python engine and
the compiled kernels can walk neighbor lists without conversion.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EdgeListParseError,
    GraphGenerationError,
    InfeasibleGraphError,
    InvalidParameterError,
)
from .sampling import stream_rng

logger = logging.getLogger(__name__)

_RRG_MAX_RESTARTS = 1000


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph with sorted CSR neighbor lists."""

    n: int
    indptr: np.ndarray  # int64, length n+1
    indices: np.ndarray  # int64, length 2*edge_count, sorted per vertex

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return i < len(nb) and nb[i] == v

    def edges(self):
        """Yield each undirected edge once, as (u, v) with u < v."""
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < int(v):
                    yield u, int(v)


@dataclass(eq=False)
class ActiveMask:
    """Per-vertex activation snapshot; count caches the number of True bits."""

    bits: np.ndarray  # bool, length n
    count: int = field(default=-1)

    def __post_init__(self):
        actual = int(np.count_nonzero(self.bits))
        if self.count < 0:
            self.count = actual
        elif self.count != actual:
            raise InvalidParameterError(
                f"mask count {self.count} != number of true bits {actual}"
            )


def from_edges(n: int, edges) -> Graph:
    """Build a Graph from an iterable of (u, v) pairs (one direction each)."""
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise InvalidParameterError("edge endpoint out of range")
    if len(edges) and np.any(edges[:, 0] == edges[:, 1]):
        raise InvalidParameterError("self-loop in edge list")
    both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else edges
    order = np.lexsort((both[:, 1], both[:, 0])) if len(both) else []
    both = both[order] if len(both) else both.reshape(0, 2)
    if len(both) > 1 and np.any(np.all(both[1:] == both[:-1], axis=1)):
        raise InvalidParameterError("duplicate edge in edge list")
    counts = np.bincount(both[:, 0], minlength=n) if len(both) else np.zeros(n, int)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = both[:, 1].copy() if len(both) else np.empty(0, dtype=np.int64)
    return Graph(n=n, indptr=indptr, indices=indices)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_rrg(n: int, k: int, rng: np.random.Generator) -> Graph:
    """Random k-regular simple graph via the stub-pairing model.

    Clashing pairs are re-drawn within a pass; a pass that makes no progress
    deadlocks and restarts the pairing, bounded at 1000 restarts.
    """
    if k >= n:
        raise InfeasibleGraphError(f"k={k} must be smaller than n={n}")
    if (n * k) % 2 != 0:
        raise InfeasibleGraphError(f"n*k must be even, got n={n}, k={k}")
    if k == 0:
        return from_edges(n, [])

    for _ in range(_RRG_MAX_RESTARTS):
        edges = _try_pairing(n, k, rng)
        if edges is not None:
            return from_edges(n, edges)
    raise GraphGenerationError(
        f"stub pairing failed {_RRG_MAX_RESTARTS} times for n={n}, k={k}"
    )


def _try_pairing(n: int, k: int, rng: np.random.Generator):
    stubs = np.repeat(np.arange(n, dtype=np.int64), k)
    edge_set = set()
    edges = []
    while len(stubs):
        rng.shuffle(stubs)
        leftover = []
        progress = False
        for i in range(0, len(stubs), 2):
            u, v = int(stubs[i]), int(stubs[i + 1])
            if u == v or (min(u, v), max(u, v)) in edge_set:
                leftover.extend((u, v))
                continue
            edge_set.add((min(u, v), max(u, v)))
            edges.append((u, v))
            progress = True
        if not progress:
            return None  # deadlocked: remaining stubs only form clashes
        stubs = np.asarray(leftover, dtype=np.int64)
    return edges


def gen_wsn(n: int, k: int, p_rewire: float, rng: np.random.Generator) -> Graph:
    """Small-world network: ring lattice of degree k, each clockwise lattice
    edge rewired with probability p_rewire, redrawing targets that would
    create a self-loop or a duplicate. Edge count is always n*k/2."""
    if k % 2 != 0 or k >= n or k <= 0:
        raise InvalidParameterError(f"k must be even and 0 < k < n, got k={k}, n={n}")
    if not 0.0 <= p_rewire <= 1.0:
        raise InvalidParameterError(f"p_rewire must be in [0,1], got {p_rewire}")

    adj = [set() for _ in range(n)]
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= p_rewire:
                continue
            if len(adj[u]) >= n - 1:
                continue  # u saturated, no valid new endpoint
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    return from_edges(n, [(u, v) for u in range(n) for v in adj[u] if u < v])


def gen_ban(n: int, m: int, rng: np.random.Generator) -> Graph:
    """Scale-free network by growth and preferential attachment.

    Seeded with a clique on m+1 vertices so every arrival has m valid
    targets; each arrival attaches to m distinct vertices with probability
    proportional to current degree. Mean degree tends to 2m.
    """
    if not 1 <= m < n:
        raise InvalidParameterError(f"need 1 <= m < n, got m={m}, n={n}")

    edges = [(u, v) for u in range(m + 1) for v in range(u + 1, m + 1)]
    # flat list with each vertex repeated once per incident edge end
    endpoint_pool = [v for e in edges for v in e]
    for new in range(m + 1, n):
        targets = set()
        while len(targets) < m:
            targets.add(endpoint_pool[int(rng.integers(len(endpoint_pool)))])
        for t in targets:
            edges.append((new, t))
            endpoint_pool.extend((new, t))
    return from_edges(n, edges)


# ---------------------------------------------------------------------------
# Edge-list I/O
# ---------------------------------------------------------------------------

def load_edge_list(text: str) -> Graph:
    """Parse whitespace-separated vertex-id pairs, one edge per line.

    '#'-prefixed lines and blank lines are ignored; ids may be arbitrary
    tokens and are mapped to dense ids in first-seen order. Duplicate edges
    and self-loops are dropped with a logged warning count.
    """
    ids: dict[str, int] = {}
    edge_set = set()
    edges = []
    dup = loops = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListParseError(
                f"expected exactly two tokens, got {len(tokens)}: {line!r}", lineno
            )
        u = ids.setdefault(tokens[0], len(ids))
        v = ids.setdefault(tokens[1], len(ids))
        if u == v:
            loops += 1
            continue
        key = (min(u, v), max(u, v))
        if key in edge_set:
            dup += 1
            continue
        edge_set.add(key)
        edges.append(key)
    if dup or loops:
        logger.warning(
            "edge list: dropped %d duplicate edge(s) and %d self-loop(s)", dup, loops
        )
    return from_edges(len(ids), edges)


def write_edge_list(g: Graph) -> str:
    """Serialize in the same format load_edge_list accepts."""
    return "".join(f"{u} {v}\n" for u, v in g.edges())


# ---------------------------------------------------------------------------
# Component analysis
# ---------------------------------------------------------------------------

def _component_sizes(n: int, indptr, indices, alive: np.ndarray) -> list[int]:
    """Sizes of connected components of the subgraph induced by `alive`."""
    seen = np.zeros(n, dtype=bool)
    sizes = []
    stack = np.empty(n, dtype=np.int64)
    for s in range(n):
        if seen[s] or not alive[s]:
            continue
        top = 0
        stack[top] = s
        top += 1
        seen[s] = True
        size = 0
        while top:
            top -= 1
            v = stack[top]
            size += 1
            for w in indices[indptr[v] : indptr[v + 1]]:
                if alive[w] and not seen[w]:
                    seen[w] = True
                    stack[top] = w
                    top += 1
        sizes.append(size)
    return sizes


def largest_component_relative_size(g: Graph, mask: ActiveMask) -> float:
    """Largest activated component size divided by the full vertex count.

    The induced subgraph keeps an edge only when both endpoints are
    activated; returns 0.0 when nothing is activated.
    """
    if len(mask.bits) != g.n:
        raise InvalidParameterError("mask length does not match graph size")
    if mask.count == 0:
        return 0.0
    sizes = _component_sizes(g.n, g.indptr, g.indices, mask.bits)
    return max(sizes) / g.n


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return True
    alive = np.ones(g.n, dtype=bool)
    return _component_sizes(g.n, g.indptr, g.indices, alive)[0] == g.n


def generate(kind: str, n: int, rng: np.random.Generator, *, k: int | None = None,
             m: int | None = None, p_rewire: float = 0.4) -> Graph:
    """Dispatch to a generator by name: 'rrg', 'wsn', or 'ban'."""
    if kind == "rrg":
        if k is None:
            raise InvalidParameterError("rrg needs k")
        return gen_rrg(n, k, rng)
    if kind == "wsn":
        if k is None:
            raise InvalidParameterError("wsn needs k")
        return gen_wsn(n, k, p_rewire, rng)
    if kind == "ban":
        if m is None:
            raise InvalidParameterError("ban needs m")
        return gen_ban(n, m, rng)
    raise InvalidParameterError(f"unknown graph kind {kind!r}")


def generate_connected(kind: str, n: int, graph_seed: int, *, k: int | None = None,
                       m: int | None = None, p_rewire: float = 0.4,
                       max_tries: int = 100) -> Graph:
    """Deterministically generate a connected instance.

    Tries graph_seed, graph_seed+1, ... so the result is a pure function of
    the arguments; fixation-style dynamics never absorb on a disconnected
    graph.
    """
    for offset in range(max_tries):
        g = generate(kind, n, stream_rng(graph_seed + offset), k=k, m=m,
                     p_rewire=p_rewire)
        if is_connected(g):
            return g
    raise GraphGenerationError(
        f"no connected {kind} instance within {max_tries} seeds from {graph_seed}"
    )
