"""Event-driven engine for the activated/quiescent switching process.

Each vertex alternates phases independently; the sojourn in the phase just
entered is drawn when the transition happens (exponent mu while activated,
lam while quiescent). A binary min-heap keyed by (time, vertex id) holds
exactly one pending transition per vertex, so pops are globally
time-ordered with deterministic tie-breaking.
"""

from __future__ import annotations

import csv
import heapq
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError
from .graphs import ActiveMask, Graph
from .sampling import ActivationRates, sample_power_law


class Phase(IntEnum):
    QUIESCENT = 0
    ACTIVATED = 1


class VertexState(NamedTuple):
    phase: Phase
    next_transition: float


class TransitionEvent(NamedTuple):
    vertex: int
    time: float
    new_phase: Phase


class ActivationEngine:
    """Mutable simulation state; single-threaded, owns its rng."""

    def __init__(self, graph: Graph, rates: ActivationRates,
                 rng: np.random.Generator, initial_phase=None):
        self.graph = graph
        self.rates = rates
        self.rng = rng
        self.now = 0.0
        n = graph.n
        if initial_phase is None:
            self.phase = (rng.random(n) < 0.5).astype(np.uint8)
        else:
            self.phase = np.asarray(initial_phase, dtype=np.uint8).copy()
            if self.phase.shape != (n,):
                raise InvalidParameterError("initial_phase length must equal n")
        self.activated_count = int(self.phase.sum())

        self.next_time = np.empty(n)
        act = np.flatnonzero(self.phase == 1)
        qui = np.flatnonzero(self.phase == 0)
        self.next_time[act] = sample_power_law(
            rates.mu, rates.t0, rates.cap, rng, size=len(act)
        )
        self.next_time[qui] = sample_power_law(
            rates.lam, rates.t0, rates.cap, rng, size=len(qui)
        )
        self._heap = [(float(self.next_time[v]), v) for v in range(n)]
        heapq.heapify(self._heap)

    # -- inspection -------------------------------------------------------

    def state_of(self, v: int) -> VertexState:
        return VertexState(Phase(int(self.phase[v])), float(self.next_time[v]))

    def peek_time(self) -> float:
        return self._heap[0][0]

    def snapshot(self) -> ActiveMask:
        return ActiveMask(bits=self.phase.astype(bool), count=self.activated_count)

    # -- evolution --------------------------------------------------------

    def step(self) -> TransitionEvent:
        """Pop the earliest transition, flip that vertex, schedule its next."""
        t, v = self._heap[0]
        new_phase = 1 - int(self.phase[v])
        self.phase[v] = new_phase
        self.activated_count += 1 if new_phase else -1
        self.now = t
        alpha = self.rates.mu if new_phase else self.rates.lam
        d = float(sample_power_law(alpha, self.rates.t0, self.rates.cap, self.rng))
        self.next_time[v] = t + d
        heapq.heapreplace(self._heap, (t + d, v))
        return TransitionEvent(v, t, Phase(new_phase))

    def advance_to(self, t: float) -> list[TransitionEvent]:
        """Apply step until the next pending event exceeds t; returns events."""
        if t < self.now:
            raise InvalidParameterError(f"cannot advance to {t} < now {self.now}")
        events = []
        while self._heap[0][0] <= t:
            events.append(self.step())
        self.now = t
        return events

    def run_until(self, t: float) -> None:
        """advance_to without accumulating the event list."""
        if t < self.now:
            raise InvalidParameterError(f"cannot advance to {t} < now {self.now}")
        while self._heap[0][0] <= t:
            self.step()
        self.now = t


def init_states(graph: Graph, rates: ActivationRates, rng: np.random.Generator,
                initial_phase=None) -> ActivationEngine:
    """Start an engine at t=0: fair-coin phases (unless overridden), first
    transition drawn from the sojourn law of each vertex's initial phase."""
    return ActivationEngine(graph, rates, rng, initial_phase=initial_phase)


def write_event_trace(events, fileobj) -> None:
    """Emit CSV rows (time, vertex, new_phase) for debugging and replay."""
    writer = csv.writer(fileobj)
    writer.writerow(["time", "vertex", "new_phase"])
    for ev in events:
        writer.writerow([repr(ev.time), ev.vertex, int(ev.new_phase)])


def replay_mask(n: int, initial_phase, events) -> ActiveMask:
    """Reconstruct the final activation mask from an initial phase vector and
    an event list, for trace verification."""
    bits = np.asarray(initial_phase, dtype=bool).copy()
    if bits.shape != (n,):
        raise InvalidParameterError("initial_phase length must equal n")
    for ev in events:
        bits[ev.vertex] = bool(ev.new_phase)
    return ActiveMask(bits=bits)
