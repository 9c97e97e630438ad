import numpy as np
import pytest

from mfgellip import grid as gr


def _field(grid, fn):
    x = grid.space_points()
    t = grid.times().reshape((-1,) + (1,) * grid.d)
    return fn(x, t)


def test_grid_invariants():
    with pytest.raises(ValueError):
        gr.GridSpec(1, 4, 8)
    with pytest.raises(ValueError):
        gr.GridSpec(1, 8, 2)
    g = gr.GridSpec(2, 8, 4, 2.0)
    assert g.shape == (5, 8, 8) and g.dt == 0.5 and g.n_nodes == 320


def test_index_map_examples():
    g = gr.GridSpec(1, 16, 8)
    im = gr.index_map(g)
    assert im.to_flat([0], 0) == 0
    assert im.to_flat([15], 8) == 16 * 9 - 1
    assert im.to_flat([-1], 0) == 15
    for k in range(g.n_nodes):
        i, j = im.from_flat(k)
        assert im.to_flat(i, j) == k


def test_gradient_sine_example():
    g = gr.GridSpec(1, 64, 8)
    u = _field(g, lambda x, t: np.sin(2 * np.pi * x[..., 0]) + 0 * t)
    p, s = gr.gradient(u, g)
    err = np.abs(p[..., 0] - 2 * np.pi * np.cos(2 * np.pi * g.space_points()[..., 0])).max()
    # relative to the amplitude 2 pi; the absolute error is 2 pi (2 pi dx)^2 / 6
    assert err / (2 * np.pi) <= 2.6e-3
    assert np.abs(s).max() <= 1e-12


def test_time_stencil_exact_on_quadratics():
    g = gr.GridSpec(1, 8, 6, 1.5)
    u = _field(g, lambda x, t: 2.0 * t**2 - t + 0 * x[..., 0])
    _, s = gr.gradient(u, g)
    np.testing.assert_allclose(s, np.broadcast_to(4.0 * g.times()[:, None] - 1.0, g.shape), atol=1e-12)
    H = gr.hessian(u, g)
    np.testing.assert_allclose(H[..., 1, 1], 4.0, atol=1e-10)


def test_constant_field_has_zero_derivatives():
    g = gr.GridSpec(2, 8, 4)
    u = np.full(g.shape, 3.7)
    p, s = gr.gradient(u, g)
    assert np.abs(p).max() <= 1e-12 and np.abs(s).max() <= 1e-12
    assert np.abs(gr.hessian(u, g)).max() <= 1e-10


def test_mixed_stencil_exact_on_bilinear():
    # x t is not periodic; a periodic surrogate with the same local cross term
    g = gr.GridSpec(1, 16, 8)
    f = gr.SpaceTimeField(_field(g, lambda x, t: np.sin(2 * np.pi * x[..., 0]) * t), g)
    H = gr.hessian_stencil(f, (3, 4))
    x = 3 * g.dx
    want = 2 * np.pi * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * g.dx) / (2 * np.pi * g.dx)
    assert H[0, 1] == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        gr.hessian_stencil(f, (0, 0))


def _hessian_error(nx):
    g = gr.GridSpec(1, nx, nx, 1.0)
    u = _field(g, lambda x, t: np.sin(2 * np.pi * x[..., 0]) * np.cos(np.pi * t))
    H = gr.hessian(u, g)
    x = g.space_points()[..., 0]
    t = g.times()[1:-1, None]
    sx, cx = np.sin(2 * np.pi * x), np.cos(2 * np.pi * x)
    exact = np.empty_like(H)
    exact[..., 0, 0] = -4 * np.pi**2 * sx * np.cos(np.pi * t)
    exact[..., 0, 1] = exact[..., 1, 0] = -2 * np.pi**2 * cx * np.sin(np.pi * t)
    exact[..., 1, 1] = -np.pi**2 * sx * np.cos(np.pi * t)
    return np.abs(H - exact).max()


def test_hessian_second_order():
    e1, e2 = _hessian_error(32), _hessian_error(64)
    assert 3.7 <= e1 / e2 <= 4.3


def test_gradient_second_order_including_endpoints():
    def err(n):
        g = gr.GridSpec(1, n, n)
        u = _field(g, lambda x, t: np.sin(2 * np.pi * x[..., 0]) * np.exp(t))
        p, s = gr.gradient(u, g)
        sx = np.sin(2 * np.pi * g.space_points()[..., 0])
        return np.abs(s - sx * np.exp(g.times())[:, None]).max()

    assert 3.6 <= err(32) / err(64) <= 4.4


def test_hessian_symmetric_and_periodic_shift():
    g = gr.GridSpec(2, 8, 4)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(g.shape)
    H = gr.hessian(u, g)
    assert np.array_equal(H, np.swapaxes(H, -1, -2))
    shifted = np.roll(u, 3, axis=1)
    np.testing.assert_array_equal(gr.hessian(shifted, g), np.roll(H, 3, axis=1))


def test_integrate_examples():
    g = gr.GridSpec(1, 32, 8)
    x = g.space_points()[..., 0]
    assert gr.integrate(np.ones(g.space_shape), g, "slice") == pytest.approx(1.0, abs=1e-15)
    assert abs(gr.integrate(np.sin(2 * np.pi * x), g, "slice")) <= 1e-15
    assert gr.integrate(1 + 0.5 * np.cos(2 * np.pi * x), g, "slice") == pytest.approx(1.0, abs=1e-15)
    assert gr.integrate(np.ones(g.shape), g) == pytest.approx(1.0)


def test_derivative_stencil_integrates_to_zero():
    g = gr.GridSpec(2, 8, 4)
    u = np.random.default_rng(1).standard_normal(g.shape)
    p, _ = gr.gradient(u, g)
    assert abs(gr.integrate(p[2, ..., 0], g, "slice")) <= 1e-13


def test_csv_round_trip(tmp_path):
    g = gr.GridSpec(2, 8, 4)
    rng = np.random.default_rng(2)
    u, m = rng.standard_normal(g.shape), rng.random(g.shape)
    path = tmp_path / "f.csv"
    gr.write_fields_csv(path, g, u=u, m=m)
    back = gr.read_fields_csv(path, g)
    assert np.array_equal(back["u"], u) and np.array_equal(back["m"], m)
    with pytest.raises(ValueError):
        gr.read_fields_csv(path, gr.GridSpec(2, 8, 8))
