import numpy as np
import pytest

from conftest import FIXTURES, load
from oracles import ShapelyFree, grid_flood
from pursuit.geometry import make_environment
from pursuit.grid import GridModel, GridTooCoarse, sweep


@pytest.mark.parametrize("name", FIXTURES)
def test_free_cells_match_shapely(name):
    env = load(name)
    g = GridModel(env, 60)
    sh = ShapelyFree.of(env)
    ny, nx = g.lookup.shape
    x0, y0 = g.origin
    for j in range(ny):
        for i in range(nx):
            c = (x0 + (i + 0.5) * g.h, y0 + (j + 0.5) * g.h)
            assert (g.lookup[j, i] >= 0) == sh.interior(c)


@pytest.mark.parametrize("name", FIXTURES)
def test_adjacency_matches_shapely(name):
    env = load(name)
    g = GridModel(env, 60)
    sh = ShapelyFree.of(env)
    got = {tuple(sorted(e)) for e in g._edges.tolist()}
    lk = g.lookup
    expect = set()
    for (j, i), a in np.ndenumerate(lk):
        if a < 0:
            continue
        for dj, di in ((0, 1), (1, 0)):
            if j + dj < lk.shape[0] and i + di < lk.shape[1] and lk[j + dj, i + di] >= 0:
                b = lk[j + dj, i + di]
                if sh.visible(g.centers[a], g.centers[b]):
                    expect.add((min(a, b), max(a, b)))
    assert got == expect


@pytest.mark.parametrize("name", ["l_room", "square_hole", "dumbbell"])
def test_cell_visibility_matches_shapely(name):
    env = load(name)
    g = GridModel(env, 40)
    sh = ShapelyFree.of(env)
    rng = np.random.default_rng(1)
    for k in rng.choice(g.n, 5, replace=False):
        p = tuple(g.centers[k])
        vis = g.visible(p)
        for q, v in zip(g.centers, vis):
            assert v == sh.visible(p, tuple(q))


@pytest.mark.parametrize("name", ["comb", "square_hole", "dumbbell"])
def test_spread_matches_bfs_flood(name):
    g = GridModel(load(name), 50)
    rng = np.random.default_rng(2)
    for _ in range(25):
        cont = rng.random(g.n) < 0.05
        seen = rng.random(g.n) < rng.uniform(0.1, 0.9)
        expect = grid_flood(g.n, g._edges.tolist(), cont, seen)
        assert np.array_equal(g.spread(cont, seen), expect)


def test_spread_with_nothing_contaminated():
    g = GridModel(load("square_hole"), 30)
    none = np.zeros(g.n, bool)
    assert not g.spread(none, none).any()


def test_too_coarse_grid_is_reported():
    g = GridModel(load("square_hole"), 4)
    with pytest.raises(GridTooCoarse, match="too coarse"):
        g.check_resolution()
    GridModel(load("square_hole"), 200).check_resolution()
    with pytest.raises(ValueError):
        GridModel(load("convex"), 0)


def test_raster_round_trip():
    g = GridModel(load("l_room"), 30)
    mask = np.arange(g.n) % 3 == 0
    r = g.raster(mask)
    assert r.shape == g.lookup.shape
    assert np.array_equal(r[g.lookup >= 0], mask[g.lookup[g.lookup >= 0]])
    assert not r[g.lookup < 0].any()


def test_initial_sweep_state():
    env = load("square_hole")
    g = GridModel(env, 100)
    (snap,) = list(sweep(g, [], {0: (0.4, 0.4)}))
    assert snap.contaminated.any()
    assert np.array_equal(snap.contaminated, ~snap.seen)
    env = make_environment([(0, 0), (1, 0), (1, 1), (0, 1)])
    (snap,) = list(sweep(GridModel(env, 50), [], {0: (0.5, 0.5)}))
    assert not snap.contaminated.any()
