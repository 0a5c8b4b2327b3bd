"""Cleared/contaminated labels on critical points and how moves change them.

The intruder is modelled on the visibility-graph skeleton: it can slip from a
contaminated critical point to a neighbouring one whenever the connecting
segment is not fully observed.  A critical point that is *watched* (seen
together with both of its adjacent edges) can never hold the intruder.

Labels are bitsets: bit ``i`` set means critical point ``i`` is cleared.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .geometry import (
    DEFAULT_EDGE_SAMPLES,
    DEFAULT_SWEEP_SAMPLES,
    CriticalPoint,
    Environment,
    detect_critical_points,
    sample_segment,
    visible_many,
    watch_targets,
)
from .visgraph import VisibilityGraph, build_visibility_graph


@dataclass(frozen=True)
class LabelVector:
    bits: int
    n: int

    @classmethod
    def from_string(cls, s: str) -> "LabelVector":
        bits = 0
        for i, ch in enumerate(s):
            if ch == "N":
                bits |= 1 << i
            elif ch != "C":
                raise ValueError(f"label must be N or C, got {ch!r}")
        return cls(bits, len(s))

    @classmethod
    def from_ids(cls, cleared: Iterable[int], n: int) -> "LabelVector":
        bits = 0
        for i in cleared:
            bits |= 1 << i
        return cls(bits, n)

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def cleared(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def cleared_ids(self) -> list[int]:
        return [i for i in range(self.n) if self.bits >> i & 1]

    def contaminated_ids(self) -> list[int]:
        return [i for i in range(self.n) if not self.bits >> i & 1]

    @property
    def all_cleared(self) -> bool:
        return self.bits == self.full

    def __str__(self) -> str:
        return "".join("N" if self.bits >> i & 1 else "C" for i in range(self.n))


class SurveillanceState(NamedTuple):
    position: int | None
    labels: LabelVector
    guards: frozenset = frozenset()


def _pack(mask: np.ndarray) -> int:
    if mask.size == 0:
        return 0
    return int.from_bytes(np.packbits(mask.astype(np.uint8), bitorder="little").tobytes(), "little")


def _ids(bits: int) -> list[int]:
    out = []
    i = 0
    while bits:
        if bits & 1:
            out.append(i)
        bits >>= 1
        i += 1
    return out


class Surveillance:
    """Precomputed visibility facts for one environment plus the label rules.

    ``samples`` is the number of points used both for sweeping a move and for
    checking that a transit segment is observed; ``edge_samples`` is the
    number of points per adjacent edge used to decide that an edge is
    totally visible.
    """

    def __init__(
        self,
        env: Environment,
        cps: list[CriticalPoint] | None = None,
        g_v: VisibilityGraph | None = None,
        samples: int = DEFAULT_SWEEP_SAMPLES,
        edge_samples: int = DEFAULT_EDGE_SAMPLES,
    ):
        if samples < 1 or edge_samples < 2:
            raise ValueError("samples must be >= 1 and edge_samples >= 2")
        self.env = env
        self.cps = cps if cps is not None else detect_critical_points(env)
        self.g_v = g_v if g_v is not None else build_visibility_graph(env, self.cps)
        self.samples = samples
        self.edge_samples = edge_samples
        self.n = len(self.cps)
        self.full = (1 << self.n) - 1
        self.edges = [(a, b) for a, b, _ in self.g_v.edges]
        self.edge_index = {frozenset(e): k for k, e in enumerate(self.edges)}
        self.incident = {u: [] for u in range(self.n)}
        for k, (a, b) in enumerate(self.edges):
            self.incident[a].append((k, b))
            self.incident[b].append((k, a))
        loc = [c.location for c in self.cps]
        chunks = [sample_segment(loc[a], loc[b], samples) for a, b in self.edges]
        self.transit_points = np.vstack(chunks) if chunks else np.zeros((0, 2))
        self.edge_masks = [((1 << samples) - 1) << (k * samples) for k in range(len(self.edges))]
        per = 1 + 2 * edge_samples
        self._per_cp = per
        self.watch_points = (
            np.vstack([watch_targets(c, edge_samples) for c in self.cps]) if self.cps else np.zeros((0, 2))
        )
        self._cp_view = [self.view(c.location) for c in self.cps]
        self._move_cache: dict = {}
        self._open_cache: dict = {}

    # -- geometric facts ----------------------------------------------------

    def view(self, point) -> tuple[int, int]:
        """(watched CP bits, visible transit-point bits) for an arbitrary viewpoint."""
        if self.n == 0:
            return 0, 0
        w = visible_many(self.env, point, self.watch_points).reshape(self.n, self._per_cp).all(axis=1)
        t = visible_many(self.env, point, self.transit_points) if len(self.transit_points) else np.zeros(0, bool)
        return _pack(w), _pack(t)

    def watched_bits(self, positions: Iterable[int]) -> int:
        bits = 0
        for p in positions:
            bits |= self._cp_view[p][0] | (1 << p)
        return bits

    def watched_set(self, positions: Iterable[int]) -> set[int]:
        return set(_ids(self.watched_bits(positions)))

    def _transit_view(self, positions: Iterable[int]) -> int:
        bits = 0
        for p in positions:
            bits |= self._cp_view[p][1]
        return bits

    def _unobserved(self, view_bits: int) -> int:
        """Bitset over G_v edge indices of transit segments not fully observed."""
        out = 0
        for k, m in enumerate(self.edge_masks):
            if view_bits & m != m:
                out |= 1 << k
        return out

    def edge_observed(self, a: int, b: int, watchers: Iterable[int]) -> bool:
        k = self.edge_index[frozenset((a, b))]
        m = self.edge_masks[k]
        return self._transit_view(watchers) & m == m

    def _move(self, u: int, d: int):
        key = (u, d)
        hit = self._move_cache.get(key)
        if hit is None:
            pts = sample_segment(self.cps[u].location, self.cps[d].location, self.samples)
            views = [self.view(p) for p in pts]
            always = self.full
            for w, _ in views:
                always &= w
            hit = (always, [t for _, t in views])
            self._move_cache[key] = hit
        return hit

    # -- label rules --------------------------------------------------------

    def _spread(self, cleared: int, open_edges: int, immune: int) -> int:
        contaminated = self.full & ~cleared & ~immune
        stack = _ids(contaminated)
        while stack:
            c = stack.pop()
            for k, q in self.incident[c]:
                if open_edges >> k & 1 and not contaminated >> q & 1 and not immune >> q & 1:
                    contaminated |= 1 << q
                    stack.append(q)
        return self.full & ~contaminated

    def propagate(self, labels: int, watchers: Iterable[int]) -> int:
        watchers = list(watchers)
        immune = self.watched_bits(watchers)
        open_edges = self._unobserved(self._transit_view(watchers))
        return self._spread(labels, open_edges, immune) | immune

    def initial_labels(self, positions: Iterable[int]) -> int:
        return self.propagate(self.watched_bits(positions), positions)

    def transition_labels(self, u: int, d: int, labels: int, guards: frozenset) -> int:
        key = (u, d, guards)
        cached = self._open_cache.get(key)
        if cached is None:
            always, sweep = self._move(u, d)
            g_view = self._transit_view(guards)
            open_edges = 0
            for t in sweep:
                open_edges |= self._unobserved(t | g_view)
            immune = self.watched_bits(guards) | always
            cached = (open_edges, immune)
            self._open_cache[key] = cached
        open_edges, immune = cached
        during = self._spread(labels, open_edges, immune)
        return self.propagate(during, set(guards) | {d})

    def step_team(self, positions: dict, moves: dict, labels: int, static=()) -> tuple[int, dict]:
        """Apply simultaneous one-edge moves, movers taken in id order.

        Each mover sees every other robot (at its current position, already
        updated for earlier movers) plus ``static`` positions as stationary
        watchers.  Returns the new labels and positions.
        """
        pos = dict(positions)
        static = frozenset(static)
        if not moves:
            return self.propagate(labels, set(pos.values()) | static), pos
        for rid in sorted(moves):
            d = moves[rid]
            u = pos[rid]
            if not self.g_v.has_edge(u, d):
                raise ValueError(f"move {u} -> {d} is not an edge of the visibility graph")
            others = frozenset(p for r, p in pos.items() if r != rid) | static
            labels = self.transition_labels(u, d, labels, others)
            pos[rid] = d
        return labels, pos

    # -- state level --------------------------------------------------------

    def initial_state(self, start: int, guards: Iterable[int] = ()) -> SurveillanceState:
        if not (isinstance(start, int) and 0 <= start < self.n):
            raise ValueError(f"start {start!r} is not a critical point id")
        guards = frozenset(guards)
        bits = self.initial_labels(set(guards) | {start})
        return SurveillanceState(start, LabelVector(bits, self.n), guards)

    def state_from_labels(self, position: int, labels: LabelVector | int, guards: Iterable[int] = ()) -> SurveillanceState:
        """A state at rest from externally supplied labels (normalised to a fixpoint)."""
        guards = frozenset(guards)
        bits = labels.bits if isinstance(labels, LabelVector) else labels
        bits = self.propagate(bits, set(guards) | {position})
        return SurveillanceState(position, LabelVector(bits, self.n), guards)

    def transition(self, state: SurveillanceState, dest: int) -> SurveillanceState:
        u = state.position
        if not self.g_v.has_edge(u, dest):
            raise ValueError(f"move {u} -> {dest} is not an edge of the visibility graph")
        bits = self.transition_labels(u, dest, state.labels.bits, state.guards)
        return SurveillanceState(dest, LabelVector(bits, self.n), state.guards)


def is_final(state: SurveillanceState) -> bool:
    return state.labels.all_cleared


# -- functional surface keyed on the environment ----------------------------


@functools.lru_cache(maxsize=16)
def model(env: Environment, samples: int = DEFAULT_SWEEP_SAMPLES, edge_samples: int = DEFAULT_EDGE_SAMPLES) -> Surveillance:
    return Surveillance(env, samples=samples, edge_samples=edge_samples)


def _model_for(env, cps, g_v, samples, edge_samples=DEFAULT_EDGE_SAMPLES) -> Surveillance:
    m = model(env, samples, edge_samples)
    if cps is not None and [c.location for c in cps] != [c.location for c in m.cps]:
        raise ValueError("critical points do not belong to this environment")
    return m


def watched_set(env, cps, positions, edge_samples: int = DEFAULT_EDGE_SAMPLES) -> set[int]:
    return _model_for(env, cps, None, DEFAULT_SWEEP_SAMPLES, edge_samples).watched_set(positions)


def initial_state(env, cps, g_v, start: int) -> SurveillanceState:
    return _model_for(env, cps, g_v, DEFAULT_SWEEP_SAMPLES).initial_state(start)


def propagate_contamination(env, cps, g_v, labels: LabelVector, watchers, samples: int = DEFAULT_SWEEP_SAMPLES) -> LabelVector:
    m = _model_for(env, cps, g_v, samples)
    return LabelVector(m.propagate(labels.bits, watchers), m.n)


def transition(env, cps, g_v, state: SurveillanceState, dest: int, samples: int = DEFAULT_SWEEP_SAMPLES) -> SurveillanceState:
    return _model_for(env, cps, g_v, samples).transition(state, dest)
