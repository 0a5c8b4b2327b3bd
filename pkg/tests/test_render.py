import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import START, load
from pursuit.cli import render_svg
from pursuit.grid import GridModel, Snapshot, sweep
from pursuit.simulator import RunConfig, grid_history, run

NS = "{http://www.w3.org/2000/svg}"


def snap(grid, contaminated, seen=None, positions=None):
    seen = np.zeros(grid.n, bool) if seen is None else seen
    return Snapshot(0, positions or {}, contaminated, seen)


def by_class(svg, cls):
    root = ET.fromstring(svg.encode())
    return [e for e in root.iter() if e.get("class") == cls]


def test_all_cleared_has_no_contaminated_element():
    env = load("square_hole")
    g = GridModel(env, 50)
    svg = render_svg(env, snap(g, np.zeros(g.n, bool)), g)
    ET.fromstring(svg.encode())
    assert 'class="contaminated"' not in svg


def test_initial_square_hole_has_black_region():
    env = load("square_hole")
    g = GridModel(env, 100)
    (s,) = list(sweep(g, [], {0: (0.4, 0.4)}))
    assert s.contaminated.sum() >= 1
    svg = render_svg(env, s, g)
    assert by_class(svg, "contaminated")
    assert len(by_class(svg, "robot")) == 1
    assert len(by_class(svg, "cp")) == 4 and len(by_class(svg, "cplabel")) == 4
    assert len(by_class(svg, "frontier")) == 8


def test_no_holes_means_one_obstacle_path():
    env = load("convex")
    g = GridModel(env, 40)
    svg = render_svg(env, snap(g, np.ones(g.n, bool)), g)
    assert len(by_class(svg, "obstacle")) == 1
    env = load("square_hole")
    g = GridModel(env, 40)
    assert len(by_class(render_svg(env, snap(g, np.ones(g.n, bool)), g), "obstacle")) == 2


def _cells(svg, cls, grid):
    """Grid cells covered by the row-run rectangles of one class."""
    cw = float(re.search(r'height="([0-9.]+)"', by_class_str(svg, cls)[0]).group(1)) if by_class_str(svg, cls) else 1
    out = set()
    for e in by_class(svg, cls):
        x, y, w = float(e.get("x")), float(e.get("y")), float(e.get("width"))
        i0 = round((x - 10) / cw)
        j = round((y - 10) / cw)
        for i in range(i0, i0 + round(w / cw)):
            out.add((j, i))
    return out


def by_class_str(svg, cls):
    return [line for line in svg.splitlines() if f'class="{cls}"' in line and line.startswith("<rect")]


@pytest.mark.parametrize("seed", range(5))
def test_every_free_cell_is_white_or_black_once(seed):
    env = load("dumbbell")
    g = GridModel(env, 60)
    rng = np.random.default_rng(seed)
    cont = rng.random(g.n) < 0.5
    seen = rng.random(g.n) < 0.3
    svg = render_svg(env, snap(g, cont, seen), g)
    white, black = _cells(svg, "cleared", g), _cells(svg, "contaminated", g)
    assert not white & black
    assert len(white) == int((~cont).sum()) and len(black) == int(cont.sum())
    assert len(white | black) == g.n
    assert len(_cells(svg, "seen", g)) == int(seen.sum())


def _cp_recontamination_rounds(t):
    truth = {r: p["truth"] for r, _, p in t.of_type("labels")}
    lost, last = set(), None
    for r in sorted(truth):
        if last is not None and any(a == "N" and b == "C" for a, b in zip(last, truth[r])):
            lost.add(r)
        last = truth[r]
    return lost


def _black_history(name, res=100):
    env = load(name)
    t = run(env, RunConfig(start=START.get(name, 0)))
    grid, hist = grid_history(env, t, res)
    out = []
    for s in hist:
        black = by_class(render_svg(env, s, grid, frontiers=False), "contaminated")
        assert bool(black) == bool(s.contaminated.any())
        out.append(s)
    return t, out


@pytest.mark.parametrize("name", ["l_room", "comb", "square_hole"])
def test_black_area_shrinks_without_recontamination(name):
    t, hist = _black_history(name)
    lost = _cp_recontamination_rounds(t)
    for a, b in zip(hist, hist[1:]):
        if b.round not in lost:
            assert b.contaminated.sum() <= a.contaminated.sum()


def test_black_growth_is_always_real_recontamination():
    # Label events only track critical points; free space away from them can be
    # re-flooded from already-contaminated neighbours without a label flip.
    t, hist = _black_history("dumbbell")
    lost = _cp_recontamination_rounds(t)
    grew = set()
    for a, b in zip(hist, hist[1:]):
        if b.contaminated.sum() > a.contaminated.sum():
            grew.add(b.round)
            assert (b.contaminated & ~a.contaminated).any()
            # every newly black cell was unseen this round
            assert not (b.contaminated & b.seen).any()
    assert grew - lost == {5}


def test_rendering_is_deterministic():
    env = load("square_hole")
    t = run(env, RunConfig())
    a = [render_svg(env, s, g) for g, h in [grid_history(env, t, 80)] for s in h]
    b = [render_svg(env, s, g) for g, h in [grid_history(env, t, 80)] for s in h]
    assert a == b
