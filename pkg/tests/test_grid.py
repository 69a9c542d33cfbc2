import numpy as np
import pytest

from riccilab.geometry import Grid2D


def test_periodic_spacing():
    g = Grid2D.torus(64, 32, 2 * np.pi, 2 * np.pi)
    assert g.hx == pytest.approx(2 * np.pi / 64)
    assert g.hy == pytest.approx(2 * np.pi / 32)
    assert g.x[0] == 0.0 and g.x[-1] == pytest.approx(2 * np.pi - g.hx)


def test_truncated_axis_centered():
    g = Grid2D.cylinder(101, 16, 20.0)
    assert g.hx == pytest.approx(20.0 / 100)
    assert g.x[0] == pytest.approx(-10.0)
    assert g.x[-1] == pytest.approx(10.0)
    assert g.x[g.origin[0]] == pytest.approx(0.0)


def test_minimum_node_counts():
    with pytest.raises(ValueError):
        Grid2D.torus(4, 64)
    with pytest.raises(ValueError):
        Grid2D.torus(64, 7)


def test_bad_topology_rejected():
    with pytest.raises(ValueError):
        Grid2D(16, 16, 1.0, 1.0, "open", "periodic")


def test_diff_exact_on_linear_truncated():
    g = Grid2D.cylinder(33, 16, 4.0)
    a = np.outer(3.0 * g.x + 1.0, np.ones(16))
    d = g.diff_x(a)
    assert np.max(np.abs(d - 3.0)) < 1e-13   # one-sided ends exact on linears too


def test_diff_periodic_second_order():
    errs = []
    for n in (32, 64):
        g = Grid2D.torus(n, 8)
        X, _ = g.mesh()
        errs.append(np.max(np.abs(g.diff_x(np.sin(X)) - np.cos(X))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_quadrature_weights():
    g = Grid2D.cylinder(33, 16, 4.0)
    # trapezoid weights on the truncated axis integrate constants exactly
    assert np.sum(g.weights) == pytest.approx(4.0 * 2 * np.pi, rel=1e-12)
    gt = Grid2D.torus(16, 16, 2 * np.pi, 2 * np.pi)
    assert np.sum(gt.weights) == pytest.approx(4 * np.pi ** 2, rel=1e-12)


def test_buffer_and_interior_masks():
    g = Grid2D.cylinder(101, 16, 20.0)
    buf = g.buffer_mask()
    assert buf[0, 0] and buf[-1, 0]
    assert not buf[50, 0]
    # 15% of lx = 3 units deep on each side
    assert np.all(np.abs(g.x[buf[:, 0]]) > 7.0 - 1e-12)
    assert np.all(np.abs(g.x[~buf[:, 0]]) < 7.0 + 1e-12)
    inner = g.interior_mask()
    assert not inner[0, 0] and not inner[1, 0] and inner[2, 0]


def test_grid_hash_stable_and_distinct():
    a = Grid2D.torus(64, 64)
    b = Grid2D.torus(64, 64)
    c = Grid2D.torus(64, 32)
    assert a.hash_hex == b.hash_hex
    assert a.hash_hex != c.hash_hex


def test_refined_preserves_domain():
    g = Grid2D.cylinder(33, 16, 4.0)
    r = g.refined(4)
    assert r.x[0] == pytest.approx(g.x[0])
    assert r.x[-1] == pytest.approx(g.x[-1])
    gt = Grid2D.torus(16, 16).refined(4)
    assert gt.nx == 64 and gt.hx == pytest.approx(2 * np.pi / 64)
