"""Acceptance criteria 1-12. Each test records one PASS/FAIL line for the summary."""

import math
import time

import numpy as np
import pytest

from artifact.dtb import convolution_identity_check, ctb_from_prediction, dtb_via_upsilon, predict_dtb, upsilon_grid
from artifact.errors import SolverError
from artifact.families import disk_surface, parallel_beam, pencil_of_lines
from artifact.geometry import build_adapted_frame, check_genericity, q_via_hessian, q_via_x1, solve_tangency
from artifact.harness import prediction_for, run_sweep
from artifact.presets import PRESETS, chord_length, preset
from artifact.sampling import kernel_exactness, kernel_radon, make_kernel
from artifact.signals import FilterSymbol, decay_slopes, jump_phantom, push_forward_amplitudes, synthesize_g
from artifact.transform import continuous_interior_value, filter_lines, forward_grt

from oracles import slab_average


def test_criterion_01_q_routes(built, record):
    t0 = time.perf_counter()
    worst = 0.0
    for name in sorted(PRESETS):
        fr = built(name).frame
        block = math.sqrt(abs(np.linalg.det(fr.Q)))
        x1 = q_via_x1(fr).value
        hess = q_via_hessian(fr)
        worst = max(worst, abs(x1 - block) / block, abs(hess.value - block) / block,
                    float(np.max(np.abs(hess.Q_estimate - fr.Q)) / np.max(np.abs(fr.Q))))
    dt = time.perf_counter() - t0
    ok = worst < 1e-5
    record(1, ok, f"three Q routes, worst relative gap {worst:.2e} over {len(PRESETS)} presets ({dt:.2f}s)")
    assert ok


def test_criterion_02_frame_and_bolker(built, record):
    worst_res, smallest_det = 0.0, np.inf
    for name in sorted(PRESETS):
        fr = built(name).frame
        worst_res = max(worst_res, max(fr.residuals.values()), max(fr.pair.residuals.values()))
        for mat in (fr.M, fr.C, fr.psi_tt):
            smallest_det = min(smallest_det, abs(np.linalg.det(mat)))
    rejected = False
    fam, surf = pencil_of_lines((2.0, 0.0)), disk_surface((0.0, 0.0), 1.0)
    try:
        build_adapted_frame(fam, surf, solve_tangency(fam, surf, (np.array([-2.0]), np.array([math.pi - 0.5, 0.0]))))
    except SolverError:
        rejected = True
    ok = worst_res < 1e-8 and smallest_det > 1e-8 and rejected
    record(2, ok, f"max residual {worst_res:.1e}, min |det| {smallest_det:.3f}, degenerate family rejected={rejected}")
    assert ok


def test_criterion_03_kernel_contracts(record):
    want = {"box": 0, "linear": 1, "keys": 2}
    worst = 0.0
    orders = {}
    for name, order in want.items():
        k = make_kernel(name)
        got, table = kernel_exactness(k, max_order=3)
        orders[name] = got
        worst = max(worst, abs(k.integral() - 1.0))
        worst = max(worst, max(v for key, v in table.items() if sum(map(int, key.split(","))) <= order))
        u = np.linspace(-2.3, 2.7, 41) + 1e-3  # off the box-kernel discontinuities
        pou = np.abs(k.profile(u[:, None] - np.arange(-5, 6)).sum(axis=1) - 1.0)
        worst = max(worst, float(pou.max()))
    lin = make_kernel("linear")
    th = np.array([1.0, 1.0]) / math.sqrt(2)
    slab = 0.0
    for p in (0.0, 0.4):
        h = 0.02
        rich = (4 * slab_average(lin, th, p, h / 2) - slab_average(lin, th, p, h)) / 3
        slab = max(slab, abs(float(kernel_radon(lin, th, p)) - rich))
    ok = orders == want and worst < 1e-9 and slab < 1e-5
    record(3, ok, f"orders {orders}, worst contract residual {worst:.1e}, slab oracle gap {slab:.1e}")
    assert ok


def test_criterion_04_filter_eigenfunctions(record):
    M, step = 4096, 1.0 / 256
    y = step * np.arange(M)
    w = 2 * math.pi * 64 / (M * step)
    cos, sin = np.cos(w * y), np.sin(w * y)
    # under F g = int g e^{i lam y}, e^{i w y} sits at lam = -w
    cases = [
        ("identity", FilterSymbol(0.0), sin, sin),
        ("ramp", FilterSymbol(1.0), sin, w * sin),
        ("hilbert", FilterSymbol(0.0, 1j, -1j), cos, sin),
        ("hilbert-conj", FilterSymbol(0.0, -1j, 1j), cos, -sin),
    ]
    errs = {}
    for label, sym, f, want in cases:
        out = filter_lines(f, step, sym, pad=False)
        errs[label] = float(np.max(np.abs(out - want)) / np.max(np.abs(want)))
    worst = max(errs.values())
    ok = worst < 1e-6
    record(4, ok, "relative errors " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


def test_criterion_05_forward_oracle(built, record):
    fam = parallel_beam()
    ph = jump_phantom(disk_surface((0.0, 0.0), 1.0))
    chord = 0.0
    for p in (0.0, 0.3, -0.7, 0.95, 0.999):
        want = 2 * math.sqrt(1 - p * p)
        chord = max(chord, abs(forward_grt(ph, fam, np.array([p, 0.4])) - want) / want)

    def ratios(frame, data, g):
        out = []
        for P in (1e-2, 1e-3):
            ya = np.array([P, 0.0])
            out.append(abs(complex(g(frame.to_original_y(ya)[None])[0]) / complex(synthesize_g(data, ya)) - 1.0))
        return out

    surf = disk_surface((0.0, 0.0), 1.0)
    fr = build_adapted_frame(fam, surf, solve_tangency(fam, surf, (np.array([0.05]), np.array([0.97, 0.02]))))
    unit = ratios(fr, push_forward_amplitudes(jump_phantom(surf), fam, fr), chord_length((0.0, 0.0), 1.0))
    b = built("crt2d-ramp-k0")
    offset = ratios(b.frame, b.conormal(), b.source.g)
    drifts = unit[1] < unit[0] and offset[1] < offset[0]
    ok = chord < 1e-6 and drifts
    record(5, ok, f"chord rel err {chord:.1e}; |ratio-1| at P=1e-2,1e-3: unit {unit[0]:.1e}->{unit[1]:.1e}, "
                  f"offset {offset[0]:.1e}->{offset[1]:.1e}")
    assert ok


def test_criterion_06_convolution_identity(built, record):
    h = np.linspace(-5, 5, 41)
    devs = {}
    for name in ("crt2d-ramp-k0", "crt2d-frac-k05", "crt2d-lambda-k1"):
        b = built(name)
        pred = predict_dtb(b.frame, b.conormal(), b.symbol, b.kernel, b.lattice(1 / 256), interior_value=0.5)
        devs[pred.kappa] = convolution_identity_check(pred, ctb_from_prediction(pred), h_grid=h)
    worst = max(devs.values())
    ok = worst < 1e-3
    record(6, ok, "sup deviation / scale " + ", ".join(f"kappa={k:g}: {v:.1e}" for k, v in sorted(devs.items())))
    assert ok


def test_criterion_07_upsilon_route(built, record):
    b = built("crt2d-frac-k05")
    lat = b.lattice(1 / 256)
    data = b.conormal()
    h = np.concatenate([np.linspace(-4, -0.5, 15), np.linspace(0.5, 4, 15)])
    pred = predict_dtb(b.frame, data, b.symbol, b.kernel, lat)
    ref = pred.profile(h)
    scale = float(np.max(np.abs(ref)))
    u20 = dtb_via_upsilon(b.frame, data, b.symbol, b.kernel, h_grid=h, A=20.0, lattice=lat)
    u40 = dtb_via_upsilon(b.frame, data, b.symbol, b.kernel, h_grid=h, A=40.0, lattice=lat)
    gap = float(np.max(np.abs(u20.values - ref)) / scale)
    ctrl = float(np.max(np.abs(u40.values - u20.values)) / scale)
    # decay of Upsilon for a symbol that is not matched to the data amplitudes
    p, ups, _ = upsilon_grid(b.frame, data, FilterSymbol(1.5, 1.0, 1.0), b.kernel, lat)
    slopes = []
    for sgn in (1, -1):
        m = (sgn * p >= 10) & (sgn * p <= 60)
        slopes.append(float(np.polyfit(np.log(np.abs(p[m])), np.log(np.abs(ups[m])), 1)[0]))
    ok = gap < 0.02 and ctrl < 0.01 and all(abs(s + 1.0) < 0.1 for s in slopes)
    record(7, ok, f"Upsilon vs direct {gap:.1e}, A=40 control {ctrl:.1e}, tail slopes {slopes[0]:.3f}/{slopes[1]:.3f}")
    assert ok


@pytest.mark.slow
def test_criterion_08_kappa0_limit(record):
    t0 = time.perf_counter()
    rep, _ = run_sweep(preset("crt2d-ramp-k0"))
    dt = time.perf_counter() - t0
    sup = rep.sup_errors
    ctrl = max(c["delta"] for c in rep.controls.values())
    ok = rep.flags["monotone_decrease"] and sup[-1] <= 0.05 and ctrl < 0.025 and rep.status == "pass"
    record(8, ok, f"sup/|C1c1| {', '.join(f'{s:.2%}' for s in sup)}; controls max {ctrl:.2%} ({dt:.0f}s)")
    assert ok


@pytest.mark.slow
def test_criterion_09_kappa_half_limit(record):
    t0 = time.perf_counter()
    rep, _ = run_sweep(preset("crt2d-frac-k05"))
    dt = time.perf_counter() - t0
    sup = rep.sup_errors
    ok = rep.flags["monotone_decrease"] and sup[-1] <= 0.07 and rep.thresholds["exclude_below"] == 0.5
    record(9, ok, f"sup/max|DTB| on |x1|>=0.5: {', '.join(f'{s:.2%}' for s in sup)}; status {rep.status} ({dt:.0f}s)")
    assert ok


def test_criterion_10_decay_slopes(built, record):
    data = built("crt2d-ramp-k0").conormal()
    P = np.logspace(-4, -2, 9)
    slopes = decay_slopes(data, [0.0], [1.0, 0.0], P, orders=(0, 1, 2))
    gaps = {m: abs(slopes[m] - (data.s0 - m)) for m in slopes}
    ok = max(gaps.values()) <= 0.05
    record(10, ok, "slopes " + ", ".join(f"m={m}: {slopes[m]:.4f}" for m in sorted(slopes)) + f" (s0={data.s0})")
    assert ok


def test_criterion_11_genericity(built, record):
    ng = built("crt2d-nongeneric").genericity
    g = {name: built(name).genericity for name in ("crt2d-ramp-k0", "crt2d-frac-k05", "crt2d-lambda-k1", "arcs2d-ramp-k0")}
    witness_ok = not ng.condition1_pass and tuple(ng.witness) in ((1, 0), (-1, 0))
    generic_ok = all(r.generic and r.search_bound >= 10_000 for r in g.values())
    # placing the same offset disk with an explicit bound of 10^4
    again = check_genericity(built("crt2d-ramp-k0").frame, np.eye(2), search_bound=10_000)
    ok = witness_ok and generic_ok and again.generic
    record(11, ok, f"centred disk: {ng.verdict}; offset disks generic up to 10^4: {generic_ok}")
    assert ok


@pytest.mark.slow
def test_criterion_12_plateau_law(built, record):
    b = built("crt2d-ramp-k0")
    s = b.scenario
    pred = prediction_for(b, lattice=b.lattice(s.eps_list[-1]))
    jump = abs(pred.jump)
    S = pred.radon.support * pred.dX1_dy1
    far = pred.at_xcheck(np.array([S + 1.0, -S - 1.0]))
    quad_res = abs((far[1] - far[0]) - pred.jump) / jump
    ext = continuous_interior_value(b.frame, b.source, b.symbol, delta_list=tuple(s.deltas), side="exterior",
                                    chart_radius=s.chart_radius, resolution=s.interior_resolution, rho=s.rho,
                                    jump_scale=jump)
    gap = abs(ext.value - pred.plateau_exterior) / jump
    ok = quad_res < 1e-8 and gap < 0.02
    record(12, ok, f"plateau difference residual {quad_res:.1e}; continuous exterior vs predicted {gap:.2%} of |C1c1|")
    assert ok
