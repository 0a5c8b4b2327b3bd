"""Round-based team simulation, traces, and replay checks.

Each round: the active deliberation (if any) advances one step, robots that
just got a task start it, every robot with somewhere to go moves one
visibility-graph edge, and the simulator recomputes the true labels itself.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

from . import planner
from .division import CutResult, cut_at
from .geometry import Environment, environment_from_dict
from .grid import DEFAULT_RESOLUTION, GridModel, sweep
from .protocol import (
    ADD_ROBOT,
    ASSIGNED,
    FAILED_LOOP,
    WAIT,
    Deliberation,
    MessageBus,
    RobotAgent,
    Role,
    deliberation_round,
    merge_global_state,
)
from .surveillance import LabelVector, Surveillance

log = logging.getLogger(__name__)

SOLVED = "solved"
FAILED = "failed"
BUDGET = "budget"

TRACE_MAGIC = "#pursuit-trace v1"


@dataclass(frozen=True)
class RunConfig:
    start: int = 0
    max_robots: int = 8
    samples: int = 16
    edge_samples: int = 3
    grid: int = DEFAULT_RESOLUTION
    keep_rule: str = "strict"
    cost_order: str = "recontam-first"
    max_rounds: int = 2000
    max_nodes: int | None = None
    seconds: float = 60.0
    seed: int = 0

    def __post_init__(self):
        for name in ("max_robots", "samples", "grid", "max_rounds"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.start < 0:
            raise ValueError("start must be a critical point id")
        if self.keep_rule not in ("strict", "weak"):
            raise ValueError(f"unknown keep rule {self.keep_rule!r}")
        if self.cost_order not in ("recontam-first", "distance-first"):
            raise ValueError(f"unknown cost order {self.cost_order!r}")

    def to_json(self) -> dict:
        return asdict(self)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(env: Environment, config: RunConfig) -> str:
    return hashlib.sha256(_dump({"env": env.to_dict(), "config": config.to_json()}).encode()).hexdigest()


# --------------------------------------------------------------------------
# trace


@dataclass
class PlanTrace:
    digest: str
    events: list = field(default_factory=list)  # (round, type, payload)

    def add(self, rnd: int, kind: str, payload: dict) -> None:
        self.events.append((rnd, kind, payload))

    def of_type(self, kind: str) -> list:
        return [e for e in self.events if e[1] == kind]

    @property
    def header(self) -> dict:
        return self.of_type("config")[0][2]

    def environment(self) -> Environment:
        return environment_from_dict(self.header["env"])

    def config(self) -> RunConfig:
        return RunConfig(**self.header["config"])

    @property
    def verdict(self) -> dict | None:
        v = self.of_type("verdict")
        return v[-1][2] if v else None

    @property
    def messages(self) -> list[dict]:
        return [p for _, _, p in self.of_type("message")]

    @property
    def robots(self) -> list[int]:
        return sorted({p["robot"] for _, _, p in self.of_type("spawn")})

    def positions(self) -> dict[int, list[tuple[int, int]]]:
        """Per robot, the (round, critical point) sequence it occupied."""
        out: dict[int, list] = {}
        for rnd, kind, p in self.events:
            if kind == "spawn":
                out.setdefault(p["robot"], []).append((rnd, p["cp"]))
            elif kind == "move":
                out[p["robot"]].append((rnd, p["to"]))
        return out

    def roles_at(self) -> dict[int, list[tuple[int, str]]]:
        out: dict[int, list] = {}
        for rnd, kind, p in self.events:
            if kind == "spawn":
                out.setdefault(p["robot"], []).append((rnd, p["role"]))
            elif kind == "role":
                out[p["robot"]].append((rnd, p["to"]))
        return out

    def max_simultaneous(self, role: str) -> int:
        """Largest number of robots holding ``role`` at the same time."""
        current: dict[int, str] = {}
        best = 0
        by_round: dict[int, list] = {}
        for rnd, kind, p in self.events:
            if kind in ("spawn", "role"):
                by_round.setdefault(rnd, []).append(p)
        for rnd in sorted(by_round):
            for p in by_round[rnd]:
                current[p["robot"]] = p.get("role", p.get("to"))
            best = max(best, sum(1 for r in current.values() if r == role))
        return best

    def to_text(self) -> str:
        lines = [f"{TRACE_MAGIC} sha256={self.digest}"]
        for rnd, kind, payload in self.events:
            lines.append(f"{rnd} {kind} {_dump(payload)}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "PlanTrace":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(TRACE_MAGIC):
            raise ValueError("not a pursuit trace (missing header)")
        digest = lines[0].split("sha256=", 1)[1].strip()
        events = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                rnd, kind, payload = line.split(" ", 2)
                events.append((int(rnd), kind, json.loads(payload)))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: malformed trace event") from exc
        return cls(digest, events)

    @classmethod
    def read(cls, path) -> "PlanTrace":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())


# --------------------------------------------------------------------------
# world


@dataclass
class Task:
    kind: str  # "explore" | "travel" | "joint" | "stuck"
    route: list = field(default_factory=list)  # next critical points, one per round
    predicted: list = field(default_factory=list)  # label bits expected after each step
    plan_kind: str = ""
    guards: frozenset = frozenset()
    then: str = ""  # travel: "guard" | "join"
    initiator: int | None = None
    p_d: int | None = None
    cut: CutResult | None = None
    partner: int | None = None


@dataclass
class WorldState:
    env: Environment
    model: Surveillance
    config: RunConfig
    clock: int = 0
    agents: list = field(default_factory=list)
    ground_truth: int = 0
    bus: MessageBus = field(default_factory=MessageBus)
    trace: PlanTrace | None = None
    deliberation: Deliberation | None = None
    n_deliberations: int = 0
    verdict: str | None = None
    role_log: list = field(default_factory=list)
    conservative_violations: int = 0
    deliberation_stats: list = field(default_factory=list)
    _sent: int = 0

    @property
    def truth(self) -> LabelVector:
        return LabelVector(self.ground_truth, self.model.n)

    def agent(self, rid: int) -> RobotAgent:
        return self.agents[rid]

    def positions(self) -> dict:
        return {a.id: a.position for a in self.agents}

    def guard_positions(self, exclude: int | None = None) -> frozenset:
        return frozenset(a.position for a in self.agents if a.role is Role.GUARD and a.id != exclude)

    @property
    def done(self) -> bool:
        return self.verdict is not None


def _labels_str(model, bits) -> str:
    return str(LabelVector(bits, model.n))


class Simulator:
    """Owns the world and advances it one round at a time."""

    def __init__(self, env: Environment, config: RunConfig = RunConfig(), model: Surveillance | None = None):
        self.env = env
        self.config = config
        self.model = model or Surveillance(env, samples=config.samples, edge_samples=config.edge_samples)
        n = self.model.n
        if n and not config.start < n:
            raise ValueError(f"start {config.start} is not a critical point id (have {n})")
        self.limits = planner.Limits(config.max_nodes, config.seconds)
        trace = PlanTrace(config_digest(env, config))
        trace.add(
            0,
            "config",
            {
                "env": env.to_dict(),
                "config": config.to_json(),
                "critical_points": [[c.location.x, c.location.y] for c in self.model.cps],
            },
        )
        self.world = WorldState(env, self.model, config, trace=trace)
        w = self.world
        start = config.start if n else None
        a = self._spawn(start)
        w.ground_truth = self.model.initial_labels([start]) if n else 0
        a.local_labels = LabelVector(w.ground_truth, n)
        self._event("labels", {"truth": _labels_str(self.model, w.ground_truth)})
        if n == 0 or w.ground_truth == self.model.full:
            self._finish(SOLVED)
            return
        self._set_role(a, Role.EXPLORER)
        self._begin_explore(a)
        self._flush_messages()
        self._check_verdict()

    # -- bookkeeping --------------------------------------------------------

    def _event(self, kind, payload):
        self.world.trace.add(self.world.clock, kind, payload)

    def _spawn(self, cp) -> RobotAgent:
        w = self.world
        rid = len(w.agents)
        a = RobotAgent(rid, Role.IDLE, cp, LabelVector(0, self.model.n), start=cp)
        if cp is not None:
            a.local_labels = LabelVector(self.model.propagate(0, [cp] + list(w.guard_positions())), self.model.n)
        w.agents.append(a)
        # with no critical points the room is convex: any vertex sees all of it
        at = list(self.model.cps[cp].location) if cp is not None else list(self.env.outer.vertices[0])
        self._event("spawn", {"robot": rid, "cp": cp, "at": at, "role": Role.IDLE.value})
        return a

    def _set_role(self, a: RobotAgent, role: Role):
        old = a.role
        a.set_role(role, self.world.role_log, self.world.clock)
        self._event("role", {"robot": a.id, "from": old.value, "to": role.value})

    def _flush_messages(self):
        w = self.world
        for m in w.bus.log[w._sent :]:
            self._event("message", m.to_json())
        w._sent = len(w.bus.log)

    def _finish(self, status, reason=""):
        w = self.world
        w.verdict = status
        payload = {
            "status": status,
            "robots": len(w.agents),
            "rounds": w.clock,
            "truth": _labels_str(self.model, w.ground_truth),
            "messages": w.bus.deliveries(),
        }
        if reason:
            payload["reason"] = reason
        self._event("verdict", payload)

    def _check_verdict(self):
        w = self.world
        if w.verdict is None and w.ground_truth == self.model.full:
            self._finish(SOLVED)

    # -- planning -------------------------------------------------------------

    def _plan_state(self, a: RobotAgent, guards):
        return self.model.state_from_labels(a.position, a.local_labels, guards)

    def _begin_explore(self, a: RobotAgent):
        """Plan for ``a`` with the current guards and start following it."""
        guards = self.world.guard_positions(exclude=a.id)
        state = self._plan_state(a, guards)
        a.local_labels = state.labels
        try:
            plan = planner.plan_exploration(self.model, state, limits=self.limits, keep_rule=self.config.keep_rule)
        except planner.BudgetExhausted as exc:
            self._finish(BUDGET, str(exc))
            return
        steps = list(plan.trajectory.steps)
        predicted = []
        s = state
        for d in steps[1:]:
            s = self.model.transition(s, d)
            predicted.append(s.labels.bits)
        a.task = Task("explore", steps[1:], predicted, plan.kind, guards)
        self._event(
            "plan",
            {
                "robot": a.id,
                "kind": plan.kind,
                "steps": steps,
                "distance": plan.trajectory.total_distance,
                "guards": sorted(guards),
                "nodes": plan.graph_size,
            },
        )
        if not a.task.route:
            self._end_explore(a)

    def _end_explore(self, a: RobotAgent):
        kind = a.task.plan_kind
        if kind == "solved":
            self._end_of_task(a)
            return
        self._set_role(a, Role.STUCK)
        cut = cut_at(self.model.g_v, a.position)
        a.task = Task("stuck", p_d=a.position, cut=cut)
        self._event("stuck", {"robot": a.id, "p_d": a.position, "cut": cut.to_json(), "dead_end": kind == "dead_end"})
        self._explorer_changed()

    def _end_of_task(self, a: RobotAgent):
        w = self.world
        assigner = a.task.initiator if a.task else None
        a.task = None
        a.assigned_part = None
        self._set_role(a, Role.IDLE)
        d = w.deliberation
        to = d.initiator if d is not None and d.waiting else assigner
        if to is not None and to != a.id:
            if d is not None and d.waiting:
                w.bus.deliberation = d.id
            w.bus.send("EndOfTask", a.id, to)
            w.bus.deliberation = None
        self._explorer_changed()

    def _explorer_changed(self):
        d = self.world.deliberation
        if d is not None and d.waiting:
            d.waiting = False

    # -- protocol ---------------------------------------------------------------

    def _protocol(self):
        w = self.world
        if w.deliberation is None:
            stuck = [
                a
                for a in w.agents
                if a.role is Role.STUCK and a.task is not None and a.task.kind == "stuck" and a.task.partner is None
            ]
            if not stuck:
                return
            a = min(stuck, key=lambda r: r.id)
            w.n_deliberations += 1
            w.deliberation = Deliberation(w.n_deliberations, a.id, a.task.p_d, a.task.cut)
            w.deliberation_stats.append({"id": w.n_deliberations, "team": len(w.agents), "rounds": 0})
        d = w.deliberation
        if d.waiting:
            return
        outcome = deliberation_round(d, w.agents, self.model, w.bus, self.config.cost_order)
        stats = w.deliberation_stats[-1]
        stats.update(rounds=d.round, outcome=outcome, messages=w.bus.deliveries(d.id), explorers=d.explorers_first)
        self._event(
            "deliberation",
            {
                "id": d.id,
                "initiator": d.initiator,
                "p_d": d.p_d,
                "round": d.round,
                "branch": d.branch,
                "explorers": d.explorers_first,
                "outcome": outcome,
                "cut": d.cut.to_json(),
            },
        )
        if outcome == WAIT:
            return
        w.deliberation = None
        if outcome == ASSIGNED:
            self._assign(d)
        elif outcome in (ADD_ROBOT, FAILED_LOOP):
            if len(w.agents) >= self.config.max_robots:
                self._finish(FAILED, f"needs more than {self.config.max_robots} robots")
                return
            init = w.agent(d.initiator)
            new = self._spawn(init.start)
            w.bus.deliberation = d.id
            w.bus.send("AddRobotNotice", new.id, init.id, {"position": new.position})
            w.bus.deliberation = None

    def _assign(self, d: Deliberation):
        w = self.world
        win = d.winner
        helper = w.agent(win.robot_id)
        kind = d.request.type
        if helper.role is Role.GUARD:
            self._set_role(helper, Role.IDLE)
            kind = "II"
        elif helper.role is Role.STUCK:
            self._set_role(helper, Role.IDLE)
        helper.task = Task(
            "travel",
            route=list(win.path[1:]),
            then="join" if kind == "I" else "guard",
            initiator=d.initiator,
            p_d=d.p_d,
            cut=d.cut,
        )
        if kind == "I":
            helper.assigned_part = d.request.part
        stuck = w.agent(d.initiator)
        stuck.task.partner = helper.id
        if not helper.task.route:
            self._arrived(helper)

    def _arrived(self, helper: RobotAgent):
        w = self.world
        t = helper.task
        stuck = w.agent(t.initiator)
        if t.then == "join" and self._start_joint(stuck, helper, t):
            return
        # post as guard; the stuck robot resumes with the guard in place
        helper.task = None
        helper.assigned_part = None
        self._set_role(helper, Role.GUARD)
        w.bus.send("StateReply", helper.id, stuck.id, {"position": helper.position, "labels": str(helper.local_labels)})
        if stuck.role is Role.STUCK:
            self._set_role(stuck, Role.EXPLORER)
            self._begin_explore(stuck)

    def _start_joint(self, stuck: RobotAgent, helper: RobotAgent, t: Task) -> bool:
        w = self.world
        if stuck.role is not Role.STUCK:
            return False
        part = t.cut.parts[0] if t.cut and t.cut.parts else frozenset()
        mine = frozenset(self.model.g_v.nodes) - part
        regions = {helper.id: part | {t.p_d}, stuck.id: mine}
        guards = w.guard_positions()
        labels = merge_global_state([(stuck.position, stuck.local_labels), (helper.position, helper.local_labels)])
        try:
            jp = planner.plan_joint(
                self.model, {stuck.id: stuck.position, helper.id: helper.position}, regions, labels.bits, guards
            )
        except planner.BudgetExhausted:
            jp = None
        if jp is None or jp.rounds == 0:
            self._event("plan", {"robots": sorted(regions), "kind": "joint_failed"})
            return False
        w.bus.send("StateReply", helper.id, stuck.id, {"position": helper.position, "labels": str(helper.local_labels)})
        self._event(
            "plan",
            {
                "robots": list(jp.robots),
                "kind": "joint",
                "schedule": [[p[r] for r in jp.robots] for p in jp.positions],
                "distance": jp.total_distance,
                "guards": sorted(guards),
                "regions": {str(r): sorted(v) for r, v in sorted(regions.items())},
            },
        )
        for a, other in ((stuck, helper), (helper, stuck)):
            route = [p[a.id] for p in jp.positions[1:]]
            a.task = Task("joint", route, list(jp.labels[1:]), "solved", guards, initiator=stuck.id, partner=other.id)
            a.assigned_part = frozenset(regions[a.id])
        self._set_role(stuck, Role.EXPLORER)
        self._set_role(helper, Role.EXPLORER)
        return True

    # -- per round ----------------------------------------------------------------

    def _replan_if_needed(self):
        w = self.world
        for a in w.agents:
            t = a.task
            if a.role is not Role.EXPLORER or t is None or t.kind not in ("explore", "joint"):
                continue
            now = w.guard_positions(exclude=a.id)
            if t.guards <= now:
                continue
            if t.kind == "explore":
                self._begin_explore(a)
            else:
                # a guard left under a joint schedule: both explorers stand down
                partner = w.agent(t.partner)
                for r in (a, partner):
                    if r.task is not None and r.task.kind == "joint":
                        r.task.initiator = None
                        self._end_of_task(r)

    def _fallback(self):
        """Nobody is working and the environment is not clear: restart exploring."""
        w = self.world
        if w.deliberation is not None or w.verdict is not None:
            return
        if any(a.task is not None for a in w.agents):
            return
        if any(a.role in (Role.EXPLORER, Role.STUCK) for a in w.agents):
            return
        idle = [a for a in w.agents if a.role is Role.IDLE]
        if not idle:
            idle = [a for a in w.agents if a.role is Role.GUARD]
            if not idle:
                return
            a = idle[0]
            self._set_role(a, Role.IDLE)
        a = idle[0]
        self._set_role(a, Role.EXPLORER)
        self._begin_explore(a)

    def _move(self):
        w = self.world
        moves = {}
        for a in w.agents:
            t = a.task
            if t is None or t.kind == "stuck" or not t.route:
                continue
            nxt = t.route[0]
            if nxt != a.position:
                moves[a.id] = nxt
        before = w.positions()
        w.ground_truth, after = self.model.step_team(before, moves, w.ground_truth)
        for rid in sorted(moves):
            a = w.agent(rid)
            loc_a = self.model.cps[before[rid]].location
            loc_b = self.model.cps[after[rid]].location
            self._event(
                "move",
                {"robot": rid, "from": before[rid], "to": after[rid], "a": list(loc_a), "b": list(loc_b)},
            )
        # beliefs: follow the plan where there is one, else what the robot can vouch for
        guards_all = w.guard_positions()
        for a in w.agents:
            t = a.task
            k = guards_all - {a.position} if a.role is not Role.GUARD else w.guard_positions(exclude=a.id)
            if t is not None and t.kind in ("explore", "joint") and t.route:
                a.position = after[a.id]
                a.local_labels = LabelVector(t.predicted.pop(0), self.model.n)
                t.route.pop(0)
            elif a.id in moves:
                bits = self.model.transition_labels(before[a.id], after[a.id], a.local_labels.bits, frozenset(k))
                a.position = after[a.id]
                a.local_labels = LabelVector(bits, self.model.n)
                t.route.pop(0)
            else:
                bits = self.model.propagate(a.local_labels.bits, set(k) | {a.position})
                a.local_labels = LabelVector(bits, self.model.n)
        for a in w.agents:
            if a.local_labels.bits & ~w.ground_truth:
                w.conservative_violations += 1
        return moves

    def _arrivals(self):
        w = self.world
        for a in list(w.agents):
            t = a.task
            if t is None or t.route:
                continue
            if t.kind == "explore":
                self._end_explore(a)
            elif t.kind == "travel":
                self._arrived(a)
        joint = [a for a in w.agents if a.task is not None and a.task.kind == "joint" and not a.task.route]
        for a in joint:
            self._end_of_task(a)

    def step(self) -> WorldState:
        w = self.world
        if w.verdict is not None:  # nothing left to do: time passes, nothing else changes
            w.clock += 1
            return w
        w.clock += 1
        w.bus.clock = w.clock
        old = w.ground_truth
        self._protocol()
        if w.verdict is None:
            self._replan_if_needed()
            self._fallback()
        if w.verdict is None:
            self._move()
            self._arrivals()
        self._flush_messages()
        if w.ground_truth != old:
            self._event("labels", {"truth": _labels_str(self.model, w.ground_truth)})
        self._check_verdict()
        if w.verdict is None and w.clock >= self.config.max_rounds:
            self._finish(FAILED, "round limit reached")
        return w

    def run(self) -> PlanTrace:
        while self.world.verdict is None:
            self.step()
        self._flush_messages()
        return self.world.trace


def run(env: Environment, config: RunConfig = RunConfig()) -> PlanTrace:
    return Simulator(env, config).run()


def step(sim: Simulator) -> WorldState:
    return sim.step()


# --------------------------------------------------------------------------
# replay


def _rounds_from_trace(trace: PlanTrace):
    spawns: dict[int, dict] = {}
    moves: dict[int, dict] = {}
    for rnd, kind, p in trace.events:
        if kind == "spawn":
            spawns.setdefault(rnd, {})[p["robot"]] = tuple(p["at"])
        elif kind == "move":
            moves.setdefault(rnd, {})[p["robot"]] = (tuple(p["a"]), tuple(p["b"]))
    initial = spawns.pop(0, {})
    last = max([0, *spawns, *moves])
    rounds = [(r, spawns.get(r, {}), moves.get(r, {})) for r in range(1, last + 1)]
    return initial, rounds


def grid_history(env: Environment, trace: PlanTrace, grid_resolution: int = DEFAULT_RESOLUTION, check: bool = True):
    grid = GridModel(env, grid_resolution)
    if check:
        grid.check_resolution()
    initial, rounds = _rounds_from_trace(trace)
    return grid, sweep(grid, rounds, initial)


def replay_verify(env: Environment, trace: PlanTrace, grid_resolution: int = DEFAULT_RESOLUTION) -> bool:
    """Independent check on a raster: does any intruder cell survive the run?"""
    v = trace.verdict
    if v is None or v["status"] != SOLVED:
        return False
    grid, history = grid_history(env, trace, grid_resolution)
    last = None
    for snap in history:
        last = snap
    if grid.n == 0:
        return True
    return last is not None and not last.contaminated.any()


def replay_labels(trace: PlanTrace, model: Surveillance | None = None) -> bool:
    """Feed the recorded moves back through the label rules and compare snapshots."""
    env = trace.environment()
    cfg = trace.config()
    model = model or Surveillance(env, samples=cfg.samples, edge_samples=cfg.edge_samples)
    if model.n == 0:
        return all(p["truth"] == "" for _, _, p in trace.of_type("labels"))
    pos: dict[int, int] = {}
    truth = None
    recorded = {}
    for rnd, kind, p in trace.events:
        if kind == "labels":
            recorded[rnd] = p["truth"]
    by_round: dict[int, list] = {}
    for rnd, kind, p in trace.events:
        if kind in ("spawn", "move"):
            by_round.setdefault(rnd, []).append((kind, p))
    last = max([0, *by_round, *recorded])
    for rnd in range(0, last + 1):
        moves = {}
        for kind, p in by_round.get(rnd, []):
            if kind == "spawn":
                pos[p["robot"]] = p["cp"]
            else:
                moves[p["robot"]] = p["to"]
        if rnd == 0:
            truth = model.initial_labels([pos[0]])
        elif moves or by_round.get(rnd):
            truth, pos = model.step_team(pos, moves, truth)
        if rnd in recorded and recorded[rnd] != _labels_str(model, truth):
            return False
    return True
