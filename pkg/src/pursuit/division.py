"""Splitting the visibility graph at a delegation point."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .visgraph import VisibilityGraph, connected_components


@dataclass(frozen=True)
class CutResult:
    kind: str  # "simple" | "complex" | "none"
    guard_point: int | None
    parts: tuple[frozenset, ...]
    assistance_type: str  # "I" | "II" | ""
    removed: frozenset = frozenset()

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "guard_point": self.guard_point,
            "assistance_type": self.assistance_type,
            "removed": sorted(self.removed),
            "parts": [sorted(p) for p in self.parts],
        }


def subgraph(g_v: VisibilityGraph, nodes) -> VisibilityGraph:
    nodes = set(nodes)
    w = {k: v for k, v in g_v.weights.items() if k <= nodes}
    return VisibilityGraph(tuple(sorted(nodes)), w)


def _check(g_v, p_d):
    if p_d not in g_v.nodes:
        raise KeyError(f"unknown node id {p_d}")


def simple_cut(g_v: VisibilityGraph, p_d: int) -> CutResult | None:
    _check(g_v, p_d)
    parts = connected_components(g_v, {p_d})
    if len(parts) < 2:
        return None
    return CutResult("simple", None, tuple(frozenset(p) for p in parts), "I", frozenset({p_d}))


def complex_cut(g_v: VisibilityGraph, p_d: int) -> CutResult | None:
    """Remove p_d and everything it sees; a guard must then hold p_d.

    Always returns a result: with a single remaining component the guard is
    still required but exploration of the remainder cannot be split.
    """
    _check(g_v, p_d)
    removed = frozenset({p_d, *g_v.neighbors(p_d)})
    parts = tuple(frozenset(p) for p in connected_components(g_v, removed))
    return CutResult("complex", p_d, parts, "II", removed)


def cut_at(g_v: VisibilityGraph, p_d: int) -> CutResult:
    return simple_cut(g_v, p_d) or complex_cut(g_v, p_d)


@dataclass
class DivisionNode:
    nodes: frozenset
    cut: CutResult | None = None
    children: list["DivisionNode"] = field(default_factory=list)
    undivided: bool = False

    @property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.children), default=0) if self.cut else 0

    def to_json(self) -> dict:
        out = {"nodes": sorted(self.nodes), "undivided": self.undivided}
        if self.cut is not None:
            out["cut"] = self.cut.to_json()
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out

    def lines(self, indent: int = 0) -> list[str]:
        pad = "  " * indent
        if self.cut is None:
            tag = "undivided" if self.undivided else "part"
            out = [f"{pad}{tag} {sorted(self.nodes)}"]
        else:
            c = self.cut
            g = f" guard={c.guard_point}" if c.guard_point is not None else ""
            out = [f"{pad}{c.kind} cut (type {c.assistance_type}){g} removed={sorted(c.removed)}"]
        for ch in self.children:
            out.extend(ch.lines(indent + 1))
        return out


def _default_chooser(g: VisibilityGraph):
    """Next delegation point inside a reduced component: the lowest id that cuts it."""
    for u in g.nodes:
        if simple_cut(g, u) is not None:
            return u
    for u in g.nodes:
        if len(complex_cut(g, u).parts) >= 2:
            return u
    return None


def recursive_division(
    g_v: VisibilityGraph,
    p_d: int,
    depth_limit: int,
    choose: Callable[[VisibilityGraph], int | None] = _default_chooser,
) -> DivisionNode:
    """Cut at p_d, then keep cutting any single remaining component.

    ``choose`` picks the delegation point inside a reduced component; it
    returns None when the component needs no further division.
    """
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    _check(g_v, p_d)
    return _divide(g_v, p_d, depth_limit, choose)


def _divide(g, p_d, depth, choose) -> DivisionNode:
    node = DivisionNode(frozenset(g.nodes))
    if depth == 0:
        node.undivided = True
        return node
    cut = cut_at(g, p_d)
    node.cut = cut
    for part in cut.parts:
        child = DivisionNode(part)
        if cut.kind == "complex" and len(cut.parts) == 1 and len(part) > 1:
            sub = subgraph(g, part)
            nxt = choose(sub)
            if nxt is not None:
                child = _divide(sub, nxt, depth - 1, choose)
        node.children.append(child)
    return node
