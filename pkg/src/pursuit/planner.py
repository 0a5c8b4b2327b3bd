"""Single-pursuer search over the surveillance graph and delegation points."""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass, field

from .surveillance import LabelVector, Surveillance, SurveillanceState

TIE_TOL = 1e-12


class BudgetExhausted(RuntimeError):
    """Graph construction hit the node or time limit; ``graph`` holds the partial result."""

    def __init__(self, message, graph=None):
        super().__init__(message)
        self.graph = graph


class NoDelegationPoint(ValueError):
    pass


@dataclass(frozen=True)
class Limits:
    max_nodes: int | None = None  # default 2 * n * 2**n
    seconds: float = 60.0


@dataclass
class SurveillanceGraph:
    nodes: list[SurveillanceState]
    transitions: dict[int, list[tuple[int, float]]]
    goal: int
    initial: int = 0
    index: dict = field(default_factory=dict)

    def is_final(self, node: int) -> bool:
        bits = self.nodes[node].labels.bits
        return bits & self.goal == self.goal

    @property
    def final_nodes(self) -> list[int]:
        return [i for i in range(len(self.nodes)) if self.is_final(i)]

    def out_degree(self, node: int) -> int:
        return len(self.transitions.get(node, ()))

    def n_transitions(self) -> int:
        return sum(len(v) for v in self.transitions.values())

    def to_json(self) -> dict:
        return {
            "initial": self.initial,
            "nodes": [
                {"id": i, "position": s.position, "labels": str(s.labels), "guards": sorted(s.guards)}
                for i, s in enumerate(self.nodes)
            ],
            "transitions": [
                {"from": u, "to": v, "distance": w}
                for u in sorted(self.transitions)
                for v, w in self.transitions[u]
            ],
        }


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[int, ...]
    total_distance: float
    terminal_state: SurveillanceState
    cumulative: tuple[float, ...] = ()


@dataclass(frozen=True)
class DelegationPoint:
    cp_id: int
    reaching_trajectory: Trajectory
    state_at_arrival: SurveillanceState


def build_surveillance_graph(
    model: Surveillance,
    start: int | SurveillanceState,
    limits: Limits = Limits(),
    guards=(),
    goal: int | None = None,
) -> SurveillanceGraph:
    """Breadth-first enumeration of every state reachable by one moving pursuer.

    ``start`` is a critical point id (labels from what it watches) or an
    explicit state to resume from.  ``goal`` is the bitset of points that must
    be cleared for a node to count as final; by default all of them.
    """
    n = model.n
    if goal is None:
        goal = model.full
    if n == 0:
        s0 = SurveillanceState(None, LabelVector(0, 0), frozenset())
        return SurveillanceGraph([s0], {}, 0, 0, {s0: 0})
    if isinstance(start, SurveillanceState):
        s0 = start
    else:
        s0 = model.initial_state(start, guards)
    max_nodes = limits.max_nodes if limits.max_nodes is not None else 2 * n * 2**n
    deadline = time.monotonic() + limits.seconds
    nodes = [s0]
    index = {s0: 0}
    transitions: dict[int, list[tuple[int, float]]] = {}
    queue = deque([0])
    g_v = model.g_v
    while queue:
        i = queue.popleft()
        s = nodes[i]
        out = []
        for d in g_v.neighbors(s.position):
            t = model.transition(s, d)
            j = index.get(t)
            if j is None:
                if len(nodes) >= max_nodes or time.monotonic() > deadline:
                    graph = SurveillanceGraph(nodes, transitions, goal, 0, index)
                    raise BudgetExhausted(f"surveillance graph exceeded budget at {len(nodes)} nodes", graph)
                j = len(nodes)
                nodes.append(t)
                index[t] = j
                queue.append(j)
            out.append((j, g_v.weight(s.position, d)))
        transitions[i] = out
    return SurveillanceGraph(nodes, transitions, goal, 0, index)


def _dijkstra(g_s: SurveillanceGraph, targets=None):
    """Shortest (distance, step sequence) from the initial node.

    With ``targets`` the search stops at the first target settled; otherwise
    all reachable nodes are settled.  Returns (best, hit).
    """
    start = g_s.initial
    key0 = (0.0, (g_s.nodes[start].position,))
    best = {start: key0}
    heap = [(0.0, key0[1], start)]
    done = set()
    while heap:
        d, steps, u = heapq.heappop(heap)
        if u in done or best[u] != (d, steps):
            continue
        done.add(u)
        if targets is not None and u in targets:
            return best, u
        for v, w in g_s.transitions.get(u, ()):
            if v in done:
                continue
            nd = d + w
            nsteps = steps + (g_s.nodes[v].position,)
            cur = best.get(v)
            if cur is None or nd < cur[0] - TIE_TOL or (abs(nd - cur[0]) <= TIE_TOL and nsteps < cur[1]):
                best[v] = (nd, nsteps)
                heapq.heappush(heap, (nd, nsteps, v))
    return best, None


def _with_cumulative(steps, dist, state, weight) -> Trajectory:
    cum = [0.0]
    for a, b in zip(steps, steps[1:]):
        cum.append(cum[-1] + weight(a, b))
    return Trajectory(tuple(steps), dist, state, tuple(cum))


def solve_single(g_s: SurveillanceGraph, weight=None) -> Trajectory | None:
    """Cheapest route from the initial node to any final node.

    Equivalent to one Dijkstra run towards a virtual target joined to every
    final node at zero cost.
    """
    finals = set(g_s.final_nodes)
    if not finals:
        return None
    best, hit = _dijkstra(g_s, finals)
    if hit is None:
        return None
    d, steps = best[hit]
    if weight is None:
        return Trajectory(steps, d, g_s.nodes[hit])
    return _with_cumulative(steps, d, g_s.nodes[hit], weight)


def prune_recontaminating_edges(g_s: SurveillanceGraph, keep_rule: str = "strict") -> SurveillanceGraph:
    """Drop transitions that lose a cleared point.

    ``strict`` keeps u -> v only if every point cleared in u is cleared in v;
    ``weak`` keeps it if at least one point cleared in u stays cleared.
    """
    if keep_rule not in ("strict", "weak"):
        raise ValueError(f"unknown keep rule {keep_rule!r}")
    kept = {}
    for u, outs in g_s.transitions.items():
        bu = g_s.nodes[u].labels.bits
        keep = []
        for v, w in outs:
            bv = g_s.nodes[v].labels.bits
            if keep_rule == "strict":
                ok = bu & ~bv == 0
            else:
                ok = bu == 0 or bu & bv != 0
            if ok:
                keep.append((v, w))
        kept[u] = keep
    return SurveillanceGraph(g_s.nodes, kept, g_s.goal, g_s.initial, g_s.index)


def find_delegation_points(pruned: SurveillanceGraph, initial: int | None = None) -> list[DelegationPoint]:
    if initial is not None and initial != pruned.initial:
        pruned = SurveillanceGraph(pruned.nodes, pruned.transitions, pruned.goal, initial, pruned.index)
    best, _ = _dijkstra(pruned)
    out = []
    for u, (d, steps) in best.items():
        if pruned.is_final(u) or pruned.out_degree(u) > 0:
            continue
        state = pruned.nodes[u]
        out.append(DelegationPoint(state.position, Trajectory(steps, d, state), state))
    out.sort(key=lambda p: (p.reaching_trajectory.total_distance, p.cp_id, p.reaching_trajectory.steps))
    return out


def nearest_delegation(dps: list[DelegationPoint]) -> DelegationPoint:
    if not dps:
        raise NoDelegationPoint("no delegation point")
    return min(dps, key=lambda p: (p.reaching_trajectory.total_distance, p.cp_id, p.reaching_trajectory.steps))


def replay_trajectory(model: Surveillance, initial: SurveillanceState, steps) -> SurveillanceState:
    state = initial
    for d in steps[1:]:
        state = model.transition(state, d)
    return state


@dataclass(frozen=True)
class Plan:
    """Outcome of planning one pursuer's next task.

    kind is ``solved`` (trajectory reaches the goal), ``delegate`` (trajectory
    ends at the nearest delegation point) or ``dead_end`` (the pruned graph has
    no sink; the trajectory ends at the best reachable node instead).
    """

    kind: str
    trajectory: Trajectory
    graph_size: int


def plan_exploration(
    model: Surveillance,
    state: SurveillanceState,
    goal: int | None = None,
    limits: Limits = Limits(),
    keep_rule: str = "strict",
) -> Plan:
    g_s = build_surveillance_graph(model, state, limits, goal=goal)
    weight = model.g_v.weight
    traj = solve_single(g_s, weight)
    if traj is not None:
        return Plan("solved", traj, len(g_s.nodes))
    pruned = prune_recontaminating_edges(g_s, keep_rule)
    try:
        dp = nearest_delegation(find_delegation_points(pruned))
        t = dp.reaching_trajectory
        return Plan("delegate", _with_cumulative(t.steps, t.total_distance, t.terminal_state, weight), len(g_s.nodes))
    except NoDelegationPoint:
        best, _ = _dijkstra(pruned)
        goal_bits = g_s.goal

        def score(u):
            d, steps = best[u]
            return (-bin(g_s.nodes[u].labels.bits & goal_bits).count("1"), d, steps)

        u = min(best, key=score)
        d, steps = best[u]
        return Plan("dead_end", _with_cumulative(steps, d, g_s.nodes[u], weight), len(g_s.nodes))


@dataclass(frozen=True)
class JointPlan:
    """Synchronous plan for several explorers, each confined to its own region.

    ``positions[k]`` maps robot id to critical point after round k (k = 0 is
    the start); ``labels[k]`` is the predicted label bitset after round k.
    """

    robots: tuple[int, ...]
    positions: tuple[dict, ...]
    labels: tuple[int, ...]
    total_distance: float

    @property
    def rounds(self) -> int:
        return len(self.positions) - 1


def plan_joint(
    model: Surveillance,
    start: dict,
    regions: dict,
    labels: int,
    static=(),
    goal: int | None = None,
    max_nodes: int = 200_000,
) -> JointPlan | None:
    """Fewest-rounds (then shortest) joint clearing schedule.

    Every round each robot either waits or moves one visibility-graph edge
    inside its region; predicted labels follow ``Surveillance.step_team`` so
    they match what the simulator will compute.  Returns None if no joint
    state reaches the goal, raises BudgetExhausted past ``max_nodes``.
    """
    goal = model.full if goal is None else goal
    robots = tuple(sorted(start))
    static = frozenset(static)
    g_v = model.g_v

    def options(rid, u):
        return [None] + [v for v in g_v.neighbors(u) if v in regions[rid]]

    pos0 = tuple(start[r] for r in robots)
    lab0 = model.propagate(labels, set(pos0) | static)
    key0 = (pos0, lab0)
    # (rounds, distance, schedule) ordering keeps the result deterministic
    best = {key0: (0, 0.0, (pos0,))}
    heap = [(0, 0.0, (pos0,), key0)]
    done = set()
    while heap:
        r, d, sched, key = heapq.heappop(heap)
        if key in done or best[key] != (r, d, sched):
            continue
        done.add(key)
        pos, lab = key
        if lab & goal == goal:
            return _joint_result(model, robots, sched, lab0, static, d)
        if len(best) > max_nodes:
            raise BudgetExhausted(f"joint search exceeded {max_nodes} states")
        choices = [options(rid, p) for rid, p in zip(robots, pos)]
        for combo in _product(choices):
            moves = {rid: v for rid, v in zip(robots, combo) if v is not None}
            if not moves:
                continue
            nl, npos = model.step_team(dict(zip(robots, pos)), moves, lab, static)
            npos_t = tuple(npos[rid] for rid in robots)
            nk = (npos_t, nl)
            if nk in done:
                continue
            nd = d + sum(g_v.weight(pos[i], combo[i]) for i in range(len(robots)) if combo[i] is not None)
            cand = (r + 1, nd, sched + (npos_t,))
            cur = best.get(nk)
            if cur is None or cand < cur:
                best[nk] = cand
                heapq.heappush(heap, (*cand, nk))
    return None


def _product(choices):
    if not choices:
        yield ()
        return
    for head in choices[0]:
        for tail in _product(choices[1:]):
            yield (head,) + tail


def _joint_result(model, robots, sched, lab0, static, dist) -> JointPlan:
    positions = [dict(zip(robots, sched[0]))]
    labels = [lab0]
    for nxt in sched[1:]:
        cur = positions[-1]
        moves = {rid: p for rid, p in zip(robots, nxt) if cur[rid] != p}
        lab, npos = model.step_team(cur, moves, labels[-1], static)
        positions.append(npos)
        labels.append(lab)
    return JointPlan(robots, tuple(positions), tuple(labels), dist)
