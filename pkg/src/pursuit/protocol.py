"""Team roles, messages and the assistance deliberation.

A stuck robot runs a deliberation: it asks everybody's role, solicits help
from idle robots (or, failing that, from guards), and as a last resort asks
the other stuck robots to give up their own tasks.  Answers carry a cost and
the cheapest wins.  When nobody can help and nobody is still exploring, the
team grows by one robot.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum

from .division import CutResult
from .surveillance import LabelVector, Surveillance
from .visgraph import shortest_path


class Role(str, Enum):
    EXPLORER = "explorer"
    GUARD = "guard"
    IDLE = "idle"
    STUCK = "stuck"


ALLOWED_TRANSITIONS = {
    (Role.IDLE, Role.EXPLORER),
    (Role.IDLE, Role.GUARD),
    (Role.EXPLORER, Role.STUCK),
    (Role.EXPLORER, Role.IDLE),
    (Role.GUARD, Role.IDLE),
    (Role.GUARD, Role.GUARD),
    (Role.STUCK, Role.EXPLORER),
    (Role.STUCK, Role.IDLE),
}

MESSAGE_KINDS = (
    "RoleQuery",
    "RoleReply",
    "StateQuery",
    "StateReply",
    "AssistRequest",
    "AssistAnswer",
    "Ack",
    "Nack",
    "EndOfTask",
    "DeliberationRequest",
    "GiveUpOffer",
    "AddRobotNotice",
)

COST_ORDERS = ("recontam-first", "distance-first")


class RoleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Message:
    id: int
    kind: str
    sender: int
    receiver: int | None  # None = broadcast
    round: int
    payload: dict = field(default_factory=dict)
    ref: int | None = None
    fanout: int = 1  # deliveries; a broadcast reaches every teammate
    deliberation: int | None = None

    @property
    def digest(self) -> str:
        blob = json.dumps(self.payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def line(self) -> str:
        recv = "*" if self.receiver is None else str(self.receiver)
        return f"{self.round} {self.sender} {recv} {self.kind} {self.digest}"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "sender": self.sender,
            "receiver": self.receiver,
            "round": self.round,
            "ref": self.ref,
            "fanout": self.fanout,
            "deliberation": self.deliberation,
            "digest": self.digest,
            "payload": self.payload,
        }


class MessageBus:
    """Reliable, order-preserving transport; it only records what was sent."""

    def __init__(self):
        self.log: list[Message] = []
        self.clock = 0
        self.deliberation: int | None = None

    def send(self, kind, sender, receiver, payload=None, ref=None, fanout=1) -> Message:
        if kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {kind}")
        m = Message(len(self.log), kind, sender, receiver, self.clock, payload or {}, ref, fanout, self.deliberation)
        self.log.append(m)
        return m

    def deliveries(self, deliberation: int | None = None) -> int:
        return sum(m.fanout for m in self.log if deliberation is None or m.deliberation == deliberation)


@dataclass(frozen=True)
class AssistCost:
    recontaminated_count: int
    distance: float
    robot_id: int

    def key(self, order: str = "recontam-first"):
        if order == "distance-first":
            return (self.distance, self.recontaminated_count, self.robot_id)
        return (self.recontaminated_count, self.distance, self.robot_id)


@dataclass
class RobotAgent:
    id: int
    role: Role
    position: int
    local_labels: LabelVector
    start: int = 0
    assigned_part: frozenset | None = None
    history: list = field(default_factory=list)
    task: object = None  # simulator-owned execution state

    def set_role(self, new: Role, log=None, clock: int = 0) -> None:
        if (self.role, new) not in ALLOWED_TRANSITIONS:
            raise RoleError(f"robot {self.id}: {self.role.value} -> {new.value} is not allowed")
        if log is not None:
            log.append((clock, self.id, self.role, new))
        self.role = new


@dataclass(frozen=True)
class AssistRequest:
    msg_id: int
    type: str  # "I" explore a part, "II" keep points watched
    service_point: int
    watch_points: frozenset
    part: frozenset | None
    global_labels: int


@dataclass(frozen=True)
class AssistAnswer:
    robot_id: int
    request_id: int
    accepted: bool
    cost: AssistCost | None = None
    path: tuple = ()
    target: int | None = None
    becomes_idle: bool = False
    loop: bool = False
    signature: tuple | None = None
    msg_id: int | None = None


# --------------------------------------------------------------------------
# individual steps


def collect_roles(stuck: RobotAgent, team: list[RobotAgent], bus: MessageBus) -> dict[int, Role]:
    if stuck.role is not Role.STUCK:
        raise RoleError(f"robot {stuck.id} is not stuck")
    roles = {}
    for r in sorted(team, key=lambda a: a.id):
        if r.id == stuck.id:
            continue
        q = bus.send("RoleQuery", stuck.id, r.id)
        bus.send("RoleReply", r.id, stuck.id, {"role": r.role.value}, ref=q.id)
        roles[r.id] = r.role
    return roles


def merge_global_state(local_states) -> LabelVector:
    """Cleared only where every robot's local vector says cleared."""
    states = list(local_states)
    if not states:
        raise ValueError("no local states to merge")
    n = states[0][1].n
    bits = (1 << n) - 1
    for _, lab in states:
        if lab.n != n:
            raise ValueError("label vectors cover different critical point sets")
        bits &= lab.bits
    return LabelVector(bits, n)


def query_states(stuck: RobotAgent, robots, bus: MessageBus) -> LabelVector:
    states = [(stuck.position, stuck.local_labels)]
    for r in sorted(robots, key=lambda a: a.id):
        q = bus.send("StateQuery", stuck.id, r.id)
        bus.send("StateReply", r.id, stuck.id, {"position": r.position, "labels": str(r.local_labels)}, ref=q.id)
        states.append((r.position, r.local_labels))
    return merge_global_state(states)


@dataclass(frozen=True)
class Dispatch:
    branch: str  # "idle" | "guards" | "broadcast" | "wait"
    recipients: tuple[int, ...]


def assess_and_dispatch(stuck: RobotAgent, roles: dict, cut: CutResult | None = None) -> Dispatch:
    idle = tuple(sorted(i for i, r in roles.items() if r is Role.IDLE))
    if idle:
        return Dispatch("idle", idle)
    guards = tuple(sorted(i for i, r in roles.items() if r is Role.GUARD))
    if guards:
        return Dispatch("guards", guards)
    if any(r is Role.EXPLORER for r in roles.values()):
        return Dispatch("wait", ())
    return Dispatch("broadcast", tuple(sorted(roles)))


def _path(model: Surveillance, a: int, b: int):
    if a == b:
        return (a,), 0.0
    hit = shortest_path(model.g_v, a, b)
    if hit is None:
        return None, None
    return tuple(hit[0]), hit[1]


def _lost_without(model: Surveillance, labels: int, robot: RobotAgent, positions: dict) -> int:
    """Cleared points that only stay cleared because ``robot`` stands where it is."""
    others = [p for rid, p in positions.items() if rid != robot.id]
    return labels & ~model.propagate(labels, others)


def idle_evaluate(robot: RobotAgent, request: AssistRequest, model: Surveillance) -> AssistAnswer:
    path, dist = _path(model, robot.position, request.service_point)
    if path is None:
        return AssistAnswer(robot.id, request.msg_id, False)
    return AssistAnswer(robot.id, request.msg_id, True, AssistCost(0, dist, robot.id), path, request.service_point)


def guard_evaluate(guard: RobotAgent, request: AssistRequest, model: Surveillance, positions: dict) -> AssistAnswer:
    """Can this guard serve the request without giving anything up?

    If leaving costs nothing it becomes idle and goes to the service point.
    Otherwise it looks for a post that keeps its own obligations and the
    requested points watched, reachable without losing a cleared point.
    """
    if guard.role is not Role.GUARD:
        raise RoleError(f"robot {guard.id} is not a guard")
    g = request.global_labels
    lost = _lost_without(model, g, guard, positions)
    if lost == 0:
        path, dist = _path(model, guard.position, request.service_point)
        if path is not None:
            return AssistAnswer(
                guard.id, request.msg_id, True, AssistCost(0, dist, guard.id), path, request.service_point, True
            )
        return AssistAnswer(guard.id, request.msg_id, False)
    need = lost
    for p in request.watch_points:
        need |= 1 << p
    candidates = []
    for q in model.g_v.nodes:
        if model.watched_bits([q]) & need != need:
            continue
        path, dist = _path(model, guard.position, q)
        if path is None:
            continue
        candidates.append((dist, q, path))
    for dist, q, path in sorted(candidates):
        if _relocation_keeps(model, g, guard.id, path, positions):
            return AssistAnswer(guard.id, request.msg_id, True, AssistCost(0, dist, guard.id), path, q)
    return AssistAnswer(guard.id, request.msg_id, False)


def _relocation_keeps(model, labels, rid, path, positions) -> bool:
    pos = dict(positions)
    lab = labels
    for d in path[1:]:
        lab, pos = model.step_team(pos, {rid: d}, lab)
        if labels & ~lab:
            return False
    return True


def abandonment_signature(robot_id: int, lost: int) -> tuple:
    ids = []
    i = 0
    while lost:
        if lost & 1:
            ids.append(i)
        lost >>= 1
        i += 1
    return (robot_id, tuple(ids))


def stuck_give_up_evaluate(robot: RobotAgent, request: AssistRequest, model: Surveillance, positions: dict) -> AssistAnswer:
    if robot.role is not Role.STUCK:
        raise RoleError(f"robot {robot.id} is not stuck")
    lost = _lost_without(model, request.global_labels, robot, positions)
    sig = abandonment_signature(robot.id, lost)
    if sig in robot.history:
        return AssistAnswer(robot.id, request.msg_id, False, loop=True, signature=sig)
    path, dist = _path(model, robot.position, request.service_point)
    if path is None:
        return AssistAnswer(robot.id, request.msg_id, False, signature=sig)
    cost = AssistCost(bin(lost).count("1"), dist, robot.id)
    return AssistAnswer(robot.id, request.msg_id, True, cost, path, request.service_point, True, signature=sig)


def choose_best(answers, order: str = "recontam-first") -> AssistAnswer | None:
    if order not in COST_ORDERS:
        raise ValueError(f"unknown cost order {order!r}")
    accepted = [a for a in answers if a.accepted]
    if not accepted:
        return None
    return min(accepted, key=lambda a: a.cost.key(order))


def acknowledge(initiator: int, answers, winner: AssistAnswer | None, bus: MessageBus) -> None:
    for a in answers:
        if not a.accepted:
            continue
        kind = "Ack" if winner is not None and a.robot_id == winner.robot_id else "Nack"
        bus.send(kind, initiator, a.robot_id, ref=a.msg_id)


# --------------------------------------------------------------------------
# the whole exchange

ASSIGNED = "assigned"
WAIT = "wait_for_explorers"
ADD_ROBOT = "add_robot"
FAILED_LOOP = "failed_loop"


@dataclass
class Deliberation:
    id: int
    initiator: int
    p_d: int
    cut: CutResult
    round: int = 0
    explorers_first: int | None = None
    waiting: bool = False
    outcome: str | None = None
    winner: AssistAnswer | None = None
    request: AssistRequest | None = None
    branch: str | None = None

    @property
    def round_bound(self) -> int:
        return (self.explorers_first or 0) + 2


def _request(stuck, cut, p_d, global_bits, model, kind, receivers, bus, fanout=1) -> tuple[AssistRequest, list]:
    watch = frozenset(model.watched_set([p_d]))
    part = cut.parts[0] if kind == "I" and cut.parts else None
    payload = {
        "type": kind,
        "service_point": p_d,
        "watch_points": sorted(watch),
        "part": sorted(part) if part is not None else None,
        "global": str(LabelVector(global_bits, model.n)),
    }
    msgs = []
    if receivers is None:
        m = bus.send("DeliberationRequest", stuck.id, None, payload, fanout=fanout)
        msgs.append(m)
        req = AssistRequest(m.id, kind, p_d, watch, part, global_bits)
        return req, msgs
    first = None
    for r in receivers:
        m = bus.send("AssistRequest", stuck.id, r, payload)
        first = m.id if first is None else first
        msgs.append(m)
    return AssistRequest(first if first is not None else -1, kind, p_d, watch, part, global_bits), msgs


def _answer(robot, ans: AssistAnswer, req_msg, bus, kind="AssistAnswer") -> AssistAnswer:
    payload = {"accepted": ans.accepted}
    if ans.accepted:
        payload.update(
            recontaminated=ans.cost.recontaminated_count, distance=ans.cost.distance, target=ans.target
        )
    if ans.loop:
        payload["loop"] = True
    m = bus.send(kind, robot.id, req_msg.sender, payload, ref=req_msg.id)
    return AssistAnswer(
        ans.robot_id, req_msg.id, ans.accepted, ans.cost, ans.path, ans.target, ans.becomes_idle, ans.loop,
        ans.signature, m.id,
    )


def deliberation_round(
    delib: Deliberation,
    team: list[RobotAgent],
    model: Surveillance,
    bus: MessageBus,
    cost_order: str = "recontam-first",
) -> str:
    """Run one round of the stuck robot's deliberation and return its outcome."""
    by_id = {a.id: a for a in team}
    stuck = by_id[delib.initiator]
    bus.deliberation = delib.id
    try:
        delib.round += 1
        delib.waiting = False
        if delib.explorers_first is not None and delib.round > delib.round_bound:
            delib.outcome = FAILED_LOOP
            return FAILED_LOOP
        roles = collect_roles(stuck, team, bus)
        n_explorers = sum(r is Role.EXPLORER for r in roles.values())
        if delib.explorers_first is None:
            delib.explorers_first = n_explorers
        positions = {a.id: a.position for a in team}
        kind = "I" if delib.cut.kind == "simple" else "II"
        dispatch = assess_and_dispatch(stuck, roles, delib.cut)
        delib.branch = dispatch.branch
        answers: list[AssistAnswer] = []

        if dispatch.branch == "idle":
            g = stuck.local_labels.bits
            req, msgs = _request(stuck, delib.cut, delib.p_d, g, model, kind, dispatch.recipients, bus)
            for m in msgs:
                ans = idle_evaluate(by_id[m.receiver], req, model)
                answers.append(_answer(by_id[m.receiver], ans, m, bus))
        elif dispatch.branch == "guards":
            g = query_states(stuck, [by_id[i] for i in dispatch.recipients], bus).bits
            req, msgs = _request(stuck, delib.cut, delib.p_d, g, model, "II", dispatch.recipients, bus)
            for m in msgs:
                ans = guard_evaluate(by_id[m.receiver], req, model, positions)
                answers.append(_answer(by_id[m.receiver], ans, m, bus))
        if dispatch.branch in ("idle", "guards"):
            delib.request = req
            winner = choose_best(answers, cost_order)
            acknowledge(stuck.id, answers, winner, bus)
            if winner is not None:
                delib.winner = winner
                delib.outcome = ASSIGNED
                return ASSIGNED
        if n_explorers:
            delib.waiting = True
            delib.outcome = WAIT
            return WAIT
        # every teammate is stuck (or a refusing guard): ask who would give up
        if dispatch.branch == "guards":
            delib.round += 1
            if delib.round > delib.round_bound:
                delib.outcome = FAILED_LOOP
                return FAILED_LOOP
        return _broadcast(delib, stuck, team, model, bus, kind, positions, cost_order)
    finally:
        bus.deliberation = None


def _broadcast(delib, stuck, team, model, bus, kind, positions, cost_order) -> str:
    others = [a for a in sorted(team, key=lambda a: a.id) if a.id != stuck.id]
    g = query_states(stuck, others, bus).bits if others else stuck.local_labels.bits
    # one broadcast reaches every teammate
    req, (bmsg,) = _request(stuck, delib.cut, delib.p_d, g, model, kind, None, bus, fanout=len(others))
    answers = []
    for r in others:
        if r.role is Role.STUCK:
            ans = stuck_give_up_evaluate(r, req, model, positions)
        else:
            ans = AssistAnswer(r.id, req.msg_id, False)
        answers.append(_answer(r, ans, bmsg, bus, "GiveUpOffer"))
    delib.request = req
    winner = choose_best(answers, cost_order)
    acknowledge(stuck.id, answers, winner, bus)
    if winner is not None:
        by_id = {a.id: a for a in team}
        by_id[winner.robot_id].history.append(winner.signature)
        delib.winner = winner
        delib.outcome = ASSIGNED
        return ASSIGNED
    delib.outcome = ADD_ROBOT
    return ADD_ROBOT
