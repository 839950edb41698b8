import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from artifact.errors import ConfigError, GridTooCoarse, NyquistViolated
from artifact.families import circular_arcs, disk_surface, parallel_beam
from artifact.presets import arc_length
from artifact.signals import FilterSymbol, jump_phantom
from artifact.transform import (
    DataSource,
    FineGrid,
    ReconstructionRequest,
    apodization,
    apply_filter,
    backproject,
    continuous_interior_value,
    filter_lines,
    forward_grt,
    gl_nodes,
    linear_combination,
    reconstruct,
)


@pytest.mark.parametrize("p", [0.0, 0.3, -0.7, 0.95, 0.999])
def test_forward_chord_length(p):
    ph = jump_phantom(disk_surface((0.0, 0.0), 1.0))
    val = forward_grt(ph, parallel_beam(), np.array([p, 0.4]))
    want = 2 * math.sqrt(1 - p * p)
    assert abs(val - want) <= 1e-6 * want


def test_forward_zero_cases():
    fam = parallel_beam()
    assert forward_grt(jump_phantom(disk_surface((0, 0), 1.0), amplitude=0.0), fam, np.array([0.2, 0.1])) == 0.0
    assert forward_grt(jump_phantom(disk_surface((0, 0), 1.0)), fam, np.array([1.5, 0.1])) == 0.0


def test_forward_arcs_closed_form():
    c, R = (-0.3, 0.3), 0.35
    ph = jump_phantom(disk_surface(c, R))
    g = arc_length(c, R)
    for y in ([0.9, 0.7], [1.2, 0.5], [0.7, 1.0]):
        y = np.array(y)
        val = forward_grt(ph, circular_arcs(), y, t_range=(-math.pi, math.pi))
        assert abs(val - float(g(y))) < 1e-6 * max(1.0, val)


def _periodic(M=1024, step=0.01):
    y = step * np.arange(M)
    return y, 2 * math.pi * 40 / (M * step)


def test_filter_identity():
    y, w = _periodic()
    f = np.sin(w * y) + 0.3 * np.cos(3 * w * y)
    out = filter_lines(f, 0.01, FilterSymbol(0.0), pad=False)
    assert np.max(np.abs(out - f)) < 1e-8


def test_filter_ramp_eigenfunction():
    y, w = _periodic()
    out = filter_lines(np.sin(w * y), 0.01, FilterSymbol(1.0), pad=False)
    assert np.max(np.abs(out - w * np.sin(w * y))) < 1e-6 * w


def test_filter_hilbert():
    # F g = int g e^{i lam y}: e^{i w y} sits at lam = -w
    y, w = _periodic()
    out = filter_lines(np.cos(w * y), 0.01, FilterSymbol(0.0, 1j, -1j), pad=False)
    assert np.max(np.abs(out - np.sin(w * y))) < 1e-6
    out = filter_lines(np.cos(w * y), 0.01, FilterSymbol(0.0, -1j, 1j), pad=False)
    assert np.max(np.abs(out + np.sin(w * y))) < 1e-6


def test_apodization_profile():
    r = np.array([0.0, 0.5, 0.8, 0.9, 1.0])
    a = apodization(r, 0.2)
    assert a[0] == a[1] == a[2] == 1.0 and a[-1] == 0.0 and 0 < a[3] < 1


def test_fine_grid_dump(tmp_path):
    vals = (np.arange(12) + 1j * np.arange(12)).reshape(3, 4)
    grid = FineGrid(-0.5, 0.125, np.array([-0.1, 0.0, 0.1]), vals, 8, 1.0)
    grid.dump(tmp_path / "g")
    head = json.loads((tmp_path / "g.json").read_text())
    assert head["shape"] == [3, 4] and head["step"] == 0.125
    raw = np.fromfile(tmp_path / "g.bin", dtype="<c16").reshape(3, 4)
    assert np.array_equal(raw, vals)
    with pytest.raises(GridTooCoarse):
        apply_filter(FineGrid(-0.5, 0.125, np.zeros(3), vals, 4, 1.0), FilterSymbol(1.0), strict=True)


def test_request_validation():
    with pytest.raises(NyquistViolated):
        ReconstructionRequest(np.zeros((1, 1)), 0.01, rho=1)
    with pytest.raises(ConfigError):
        ReconstructionRequest(np.zeros((1, 1)), 0.01, mode="fast")


def test_gl_nodes_integrate():
    x, w = gl_nodes(-1.0, 1.5, 0.3, 0.05)
    assert abs(np.sum(w * np.cos(x)) - (math.sin(1.5) + math.sin(1.0))) < 1e-12


def test_constant_filtered_data(unit_disk_frame):
    c = 2.5
    src = DataSource(lambda y: c * np.ones(np.shape(y)[:-1]), ((-3.0, -2.0), (3.0, 2.0)), 0.5)
    ident = FilterSymbol(0.0, apodization=0.0)
    val, _, _, _ = backproject(unit_disk_frame, src, ident, np.zeros((1, 2)), 1 / 64, window=(-1.0, 1.0))
    want = c * quad(lambda a: math.sqrt(1 + math.sin(a) ** 2), -1, 1)[0]
    assert abs(val[0] - want) < 1e-9 * want


def test_linear_combination():
    a = DataSource(lambda y: np.ones(np.shape(y)[:-1]), ((-1, -1), (1, 1)), 0.5)
    b = DataSource(lambda y: y[..., 0], ((-2, 0), (0, 2)), 1.5)
    c = linear_combination([a, b], [2.0, -1.0])
    assert c(np.array([0.5, 0.5])) == pytest.approx(1.5)
    assert np.allclose(c.support[0], [-2, -1]) and np.allclose(c.support[1], [1, 2]) and c.s0 == 0.5


def test_zero_data_interior(unit_disk_frame):
    src = DataSource(lambda y: np.zeros(np.shape(y)[:-1]), ((-2.0, -2.0), (2.0, 2.0)), 0.5)
    iv = continuous_interior_value(unit_disk_frame, src, FilterSymbol(1.0), resolution=1 / 128)
    assert iv.value == 0


def test_reconstruct_discrete_is_real_and_scaled(built):
    b = built("crt2d-frac-k05")
    eps = 1 / 64
    req = ReconstructionRequest(np.array([[-1.0], [1.0]]), eps, chart_radius=b.scenario.chart_radius)
    res = reconstruct(req, b.source, b.kernel, b.symbol, b.frame, lattice=b.lattice(eps))
    assert res.kappa == pytest.approx(0.5)
    assert np.allclose(res.scaled, eps**0.5 * res.raw)
    assert res.info["window_clipped_to_chart"]
    assert np.max(np.abs(res.scaled.imag)) < 1e-6 * np.max(np.abs(res.scaled))
