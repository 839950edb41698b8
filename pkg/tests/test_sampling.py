import math

import numpy as np
import pytest
from scipy.integrate import quad

from artifact.errors import OutOfWindow, WindowTooSmall
from artifact.sampling import (
    Lattice,
    interpolate,
    kernel_exactness,
    kernel_radon,
    load_kernel_table,
    make_kernel,
    radon_table,
    sample,
)

from oracles import slab_average

KERNELS = ["box", "linear", "keys", "bspline2"]


@pytest.mark.parametrize("name,order", [("box", 0), ("linear", 1), ("keys", 2), ("bspline2", 1)])
def test_exactness_orders(name, order):
    k = make_kernel(name)
    got, table = kernel_exactness(k, max_order=3, n=2)
    assert got == order
    assert table["0,0"] < 1e-9
    assert abs(k.integral() - 1.0) < 1e-9


def test_unknown_kernel():
    with pytest.raises(KeyError):
        make_kernel("lanczos")


def test_kernel_table_roundtrip(tmp_path):
    u = np.linspace(-1, 1, 41)
    path = tmp_path / "tri.txt"
    np.savetxt(path, np.column_stack([u, 1 - np.abs(u)]))
    k = load_kernel_table(path)
    assert k.verified_order == 1
    assert np.allclose(k.profile(np.array([-0.25, 0.0, 0.6])), [0.75, 1.0, 0.4])


@pytest.mark.parametrize("name", KERNELS)
def test_radon_normalized(name):
    k = make_kernel(name)
    for th in ([1.0, 0.0], [0.6, 0.8], [1 / math.sqrt(2), -1 / math.sqrt(2)]):
        R = radon_table(k, th)
        S = R.support
        if R.exact:
            val = quad(lambda p: float(R(p)), -S, S, points=list(R.breakpoints()), limit=200)[0]
        else:
            grid = np.linspace(-S, S, 400_001)
            val = np.trapezoid(R(grid), grid)
        assert abs(val - 1.0) < 1e-8
        assert abs(float(R.cumulative(S + 1)) - 1.0) < 1e-8


def test_radon_linear_axis():
    k = make_kernel("linear")
    assert kernel_radon(k, [1.0, 0.0], 0.0) == pytest.approx(1.0)
    assert kernel_radon(k, [1.0, 0.0], 0.5) == pytest.approx(0.5)
    assert kernel_radon(k, [1.0, 0.0], -0.5) == pytest.approx(0.5)


def test_radon_slab_oracle():
    k = make_kernel("linear")
    th = np.array([1.0, 1.0]) / math.sqrt(2)
    for p in (0.0, 0.4):
        h = 0.02
        rich = (4 * slab_average(k, th, p, h / 2) - slab_average(k, th, p, h)) / 3
        assert abs(float(kernel_radon(k, th, p)) - rich) < 1e-5


def test_lattice_points_shear():
    D = np.array([[1.0, 0.5], [0.0, 1.0]])
    lat = Lattice(0.1, D, np.array([0.2, -0.3]))
    j = np.array([[3, -2], [0, 0], [-5, 7]])
    want = lat.origin + 0.1 * j @ D.T
    assert np.max(np.abs(lat.points(j) - want)) < 1e-15
    assert np.allclose(lat.index_coords(lat.points(j)), j)
    with pytest.raises(ValueError):
        Lattice(0.1, 2 * np.eye(2), np.zeros(2))


def _bump(y):
    r2 = np.sum(np.asarray(y) ** 2, axis=-1)
    return np.where(r2 < 1, (1 - r2) ** 3, 0.0)


def test_interpolation_reproduces_polynomials():
    lat = Lattice(0.05, np.array([[1.0, 0.3], [0.0, 1.0]]), np.array([0.01, 0.02]))
    rng = np.random.default_rng(1)
    y = rng.uniform(-0.4, 0.4, (50, 2))
    for name, poly in [("linear", lambda y: 1 + 2 * y[..., 0] - y[..., 1]), ("keys", lambda y: (y[..., 0] - y[..., 1]) ** 2)]:
        g = lambda yy: poly(yy) * 1.0
        s = sample(g, lat, ((-0.5, -0.5), (0.5, 0.5)), pad=0)
        k = make_kernel(name)
        vals = interpolate(s, k, y)
        assert np.max(np.abs(vals - poly(y))) < 1e-10


def test_interpolation_at_nodes():
    lat = Lattice(0.1, np.eye(2), np.array([0.03, -0.04]))
    s = sample(_bump, lat, ((-1.1, -1.1), (1.1, 1.1)))
    j = np.array([[2, 3], [-4, 1]])
    y = lat.points(j)
    for name in ("linear", "keys"):
        assert np.allclose(interpolate(s, make_kernel(name), y), _bump(y), atol=1e-14)


def test_sampling_constant_and_window_errors():
    lat = Lattice(0.1, np.eye(2), np.zeros(2))
    s = sample(lambda y: np.ones(y.shape[:-1]), lat, ((-0.5, -0.5), (0.5, 0.5)), pad=0)
    assert np.all(s.values == 1)
    with pytest.raises(WindowTooSmall):
        sample(lambda y: np.ones(y.shape[:-1]), lat, ((-0.5, -0.5), (0.5, 0.5)))
    s = sample(_bump, lat, ((-1.1, -1.1), (1.1, 1.1)))
    with pytest.raises(OutOfWindow):
        interpolate(s, make_kernel("linear"), np.array([[5.0, 0.0]]))
    assert interpolate(s, make_kernel("linear"), np.array([[5.0, 0.0]]), outside="zero")[0] == 0


def test_interpolation_error_shrinks():
    errs = []
    y = np.random.default_rng(3).uniform(-0.6, 0.6, (200, 2))
    for eps in (0.1, 0.05, 0.025):
        lat = Lattice(eps, np.eye(2), np.array([0.3, 0.7]) * eps)
        s = sample(_bump, lat, ((-1.2, -1.2), (1.2, 1.2)))
        errs.append(np.max(np.abs(interpolate(s, make_kernel("linear"), y) - _bump(y))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] > 3.0
