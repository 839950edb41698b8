import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from artifact.errors import PoleOrder
from artifact.families import disk_surface, parallel_beam
from artifact.signals import (
    ConormalData,
    FilterSymbol,
    amplitudes_from_v,
    decay_slopes,
    e_phase,
    jump_phantom,
    kappa,
    psi_a_pm,
    push_forward_amplitudes,
    stationary_amplitudes,
    synthesize_g,
    v_from_amplitudes,
    validate_compatibility,
)


def flat(vp=1.0, vm=1.0, s0=0.5, **kw):
    return ConormalData(
        psi_perp=lambda z: np.zeros(np.shape(z)[:-1]),
        v_plus=lambda y: vp * np.ones(np.shape(y)[:-1], complex),
        v_minus=lambda y: vm * np.ones(np.shape(y)[:-1], complex),
        s0=s0,
        **kw,
    )


def test_e_phase():
    assert e_phase(0) == pytest.approx(1.0)
    assert e_phase(1) == pytest.approx(1j)
    assert e_phase(2) == pytest.approx(-1.0)


@pytest.mark.parametrize("beta0,expected", [(1.0, 0.0), (2.0, 1.0), (1.5, 0.5)])
def test_kappa(beta0, expected):
    assert kappa(beta0, 0.5, 1) == pytest.approx(expected)


def test_psi_a_pm_closed_values():
    assert psi_a_pm(1.0, "+", 2.0) == pytest.approx(-1j / (4 * math.pi))
    want = math.sqrt(math.pi) / (2 * math.pi) * np.exp(-0.25j * math.pi)
    assert psi_a_pm(0.5, "+", 1.0) == pytest.approx(want)


def test_psi_a_pm_fourier_oracle():
    # (1/2pi) int_0^inf lam^(-1/2) e^{-i lam p} dlam at p = -1, by QAWF
    p = -1.0
    w = abs(p)
    head_re = quad(lambda l: math.cos(w * l), 0, 1, weight="alg", wvar=(-0.5, 0))[0]
    head_im = quad(lambda l: math.sin(w * l), 0, 1, weight="alg", wvar=(-0.5, 0))[0]
    re = head_re + quad(lambda l: l**-0.5, 1, np.inf, weight="cos", wvar=w)[0]
    im = (head_im + quad(lambda l: l**-0.5, 1, np.inf, weight="sin", wvar=w)[0]) * (-np.sign(p))
    oracle = (re + 1j * im) / (2 * math.pi)
    assert abs(psi_a_pm(0.5, "+", p) - oracle) < 1e-4


def test_psi_a_pm_conjugate_and_poles():
    p = np.array([-2.0, -0.3, 0.7, 3.0])
    for a in (0.3, 0.5, 1.7):
        assert np.allclose(psi_a_pm(a, "-", p), np.conj(psi_a_pm(a, "+", p)))
    with pytest.raises(PoleOrder):
        psi_a_pm(0.0, "+", 1.0)
    with pytest.raises(PoleOrder):
        psi_a_pm(-2.0, "+", 1.0)


def test_amplitude_maps_invert():
    vp, vm = v_from_amplitudes(1.0, 0.0, 0.5)
    ap, am = amplitudes_from_v(vp, vm, 0.5)
    assert abs(ap - 1.0) < 1e-12 and abs(am) < 1e-12


def test_synthesize_g_values():
    vp, vm = v_from_amplitudes(1.0, 0.0, 0.5)
    d = flat(vp, vm)
    assert abs(synthesize_g(d, np.array([4.0, 0.3])) - 2.0) < 1e-12
    assert abs(synthesize_g(d, np.array([0.0, 0.3]))) == 0.0
    assert abs(synthesize_g(d, np.array([-2.0, 0.3]))) < 1e-12


def test_decay_slope_matches_s0():
    vp, vm = v_from_amplitudes(1.0, 0.5, 0.5)
    d = flat(vp, vm)
    P = np.logspace(-4, -1, 7)
    sl = decay_slopes(d, [0.0], [1.0, 0.0], P, orders=(0,))
    assert abs(sl[0] - 0.5) < 0.01


def test_surface_condition_enforced():
    with pytest.raises(ValueError):
        ConormalData(lambda z: 0.1 + np.zeros(np.shape(z)[:-1]), lambda y: 1.0, lambda y: 1.0, 0.5)


def test_filter_symbol_roundtrip():
    s = FilterSymbol(1.5, e_phase(-1.5), e_phase(1.5), lower_order=(0.5, 1.0, 2.0))
    t = FilterSymbol.from_dict(s.to_dict())
    lam = np.linspace(-3, 3, 13)
    assert np.allclose(s(lam), t(lam))


def test_ramp_and_hilbert_symbol_values():
    assert np.allclose(FilterSymbol(1.0)(np.array([-2.0, 0.0, 3.0])), [2.0, 0.0, 3.0])
    h = FilterSymbol(0.0, -1j, 1j)
    assert np.allclose(h(np.array([-1.0, 1.0])), [1j, -1j])


def test_zero_phantom_has_zero_amplitudes(unit_disk_frame):
    ph = jump_phantom(unit_disk_frame.surface, amplitude=0.0)
    vp, vm, _ = stationary_amplitudes(ph, unit_disk_frame, np.zeros((1, 2)))
    assert abs(vp[0]) == 0 and abs(vm[0]) == 0


def test_signature_phase(unit_disk_frame):
    fr = unit_disk_frame
    ph = jump_phantom(disk_surface((0, 0), 1.0))
    vp, vm, sig = stationary_amplitudes(ph, fr, np.zeros((1, 2)))
    assert sig[0] == -fr.N
    assert np.isclose(vp[0] / abs(vp[0]) / (1j * np.exp(0.25j * math.pi)), 1.0) or np.isclose(
        vp[0] / abs(vp[0]) / (-1j * np.exp(0.25j * math.pi)), 1.0
    )
    assert np.isclose(vm[0], np.conj(vp[0]))


def test_unit_disk_push_forward_matches_chord():
    fam = parallel_beam()
    surf = disk_surface((0.0, 0.0), 1.0)
    from artifact.geometry import build_adapted_frame, solve_tangency

    fr = build_adapted_frame(fam, surf, solve_tangency(fam, surf, (np.array([0.0]), np.array([0.99, 0.0]))))
    data = push_forward_amplitudes(jump_phantom(surf), fam, fr)
    ap, am = data.amplitudes(np.zeros((1, 2)))
    # 2 sqrt(1 - p^2) ~ 2 sqrt(2) (1 - p)^(1/2)
    assert abs(ap[0] - 2 * math.sqrt(2)) < 1e-8 and abs(am[0]) < 1e-8


def test_compatibility_checks(built):
    b = built("crt2d-ramp-k0")
    rep = validate_compatibility(b.conormal(), b.symbol, 1)
    assert rep["pass"] and rep["checks"]["C2"]["residual"] < 1e-10
    rep = validate_compatibility(b.conormal(), FilterSymbol(0.5), 1)
    assert not rep["checks"]["C1"]["pass"]
    ok = validate_compatibility(flat(1.0, 1.0, s0=1.0), FilterSymbol(2.0), 1)
    bad = validate_compatibility(flat(1.0, -1.0, s0=1.0), FilterSymbol(2.0), 1)
    assert ok["checks"]["g4"]["pass"] and not bad["checks"]["g4"]["pass"]


def test_gamma_helper_consistency():
    # amplitudes for s0 = 1/2 use Gamma(-1/2) = -2 sqrt(pi)
    assert gamma(-0.5) == pytest.approx(-2 * math.sqrt(math.pi))
