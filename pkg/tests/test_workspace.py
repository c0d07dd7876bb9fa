import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manipgp.workspace import FAR, AnalyticSDF, Box, Sphere, build_sdf, parse_obstacles

coords = st.floats(-2.0, 2.0, allow_nan=False)
point = st.tuples(coords, coords, coords).map(np.array)


def test_sphere_distance_and_gradient():
    s = Sphere(np.zeros(3), 0.5)
    d, g = s.distance(np.array([[2.0, 0, 0], [0, 0.1, 0]]))
    assert np.allclose(d, [1.5, -0.4])
    assert np.allclose(g, [[1, 0, 0], [0, 1, 0]])


def test_box_distance_outside_face_edge_corner_inside():
    b = Box(np.zeros(3), np.array([1.0, 0.5, 0.25]))
    pts = np.array([[2.0, 0, 0], [2.0, 1.5, 0], [2.0, 1.5, 1.25], [0.9, 0, 0], [0, 0, 0]])
    d, g = b.distance(pts)
    assert np.allclose(d, [1.0, np.sqrt(2), np.sqrt(3), -0.1, -0.25])
    assert np.allclose(g[0], [1, 0, 0])
    assert np.allclose(g[3], [1, 0, 0])
    assert np.allclose(g[4], [0, 0, 1])


@settings(max_examples=80, deadline=None)
@given(a=point, b=point)
def test_box_distance_is_one_lipschitz(a, b):
    box = Box(np.array([0.1, -0.2, 0.3]), np.array([0.4, 0.3, 0.2]))
    da, _ = box.distance(a[None])
    db, _ = box.distance(b[None])
    assert abs(da[0] - db[0]) <= np.linalg.norm(a - b) + 1e-12


def test_union_takes_nearest():
    sdf = AnalyticSDF([Sphere(np.array([-1.0, 0, 0]), 0.2), Sphere(np.array([1.0, 0, 0]), 0.2)])
    d, g, oob = sdf.query([[0.5, 0, 0]])
    assert d[0] == pytest.approx(0.3)
    assert np.allclose(g[0], [-1, 0, 0])
    assert not oob.any()
    assert AnalyticSDF([]).query([[0, 0, 0]])[0][0] == FAR


def test_grid_matches_analytic_inside_bounds(rng):
    prims = [Box(np.array([0.2, 0.0, 0.1]), np.array([0.3, 0.2, 0.15])), Sphere(np.array([-0.4, 0.3, 0.2]), 0.2)]
    grid = build_sdf(prims, ([-1, -1, -0.5], [1, 1, 1]), 0.02)
    exact = AnalyticSDF(prims)
    pts = rng.uniform([-0.9, -0.9, -0.4], [0.9, 0.9, 0.9], size=(500, 3))
    dg, gg, oob = grid.query(pts)
    de, _, _ = exact.query(pts)
    assert not oob.any()
    # linear interpolation of a 1-Lipschitz field on 2 cm cells
    assert np.abs(dg - de).max() < 0.02
    far = np.abs(de) > 0.1
    assert np.allclose(np.linalg.norm(gg[far], axis=1), 1.0, atol=1e-6)


def test_grid_flags_out_of_bounds():
    grid = build_sdf([Sphere(np.zeros(3), 0.1)], ([-0.5] * 3, [0.5] * 3), 0.05)
    d, g, oob = grid.query([[2.0, 0, 0], [0.3, 0, 0]])
    assert oob.tolist() == [True, False]
    assert d[0] == FAR and np.all(g[0] == 0)
    assert d[1] == pytest.approx(0.2, abs=1e-9)


def test_empty_grid_and_bad_bounds():
    grid = build_sdf([], ([0, 0, 0], [1, 1, 1]), 0.5)
    assert np.all(grid.query([[0.5, 0.5, 0.5]])[0] == FAR)
    with pytest.raises(ValueError):
        build_sdf([], ([0, 0, 0], [0, 1, 1]), 0.5)


def test_parse_obstacles():
    prims = parse_obstacles([{"type": "box", "center": [0, 0, 0], "half_extents": [1, 1, 1]},
                             {"type": "sphere", "center": [1, 0, 0], "radius": 0.3}])
    assert isinstance(prims[0], Box) and isinstance(prims[1], Sphere)
    with pytest.raises(ValueError):
        parse_obstacles([{"type": "cone"}])
