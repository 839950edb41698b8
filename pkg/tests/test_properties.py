import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.dtb import TransitionCTB
from artifact.harness import estimate_order
from artifact.sampling import make_kernel
from artifact.signals import FilterSymbol, psi_a_pm
from artifact.transform import filter_lines

finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["box", "linear", "keys", "bspline2"]), st.floats(-3.0, 3.0, **finite))
def test_partition_of_unity(name, u):
    k = make_kernel(name)
    frac = u - np.floor(u)
    if name == "box" and abs(frac - 0.5) < 1e-9:
        return
    shifts = np.arange(-6, 7)
    assert abs(k.profile(u - shifts).sum() - 1.0) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 3.0, **finite), st.floats(0.01, 100.0, **finite), st.integers(3, 6))
def test_order_recovers_power_law(order, c, m):
    eps = 0.5 ** np.arange(2, 2 + m)
    assert abs(estimate_order(c * eps**order, eps) - order) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.05, 0.95, **finite),
    st.floats(-5, 5, **finite), st.floats(-5, 5, **finite),
    st.floats(0.01, 10, **finite),
    st.sampled_from([-1.0, 1.0]),
)
def test_ctb_conjugate_data_is_real(k, re, im, mag, side):
    c = complex(re, im)
    ctb = TransitionCTB(k, 1.3, c, c.conjugate())
    v = ctb(side * mag)
    assert abs(v.imag) <= 1e-12 * max(1.0, abs(v))


@settings(max_examples=30, deadline=None)
@given(
    st.floats(0.0, 2.5, **finite),
    st.floats(-2, 2, **finite), st.floats(-2, 2, **finite),
    st.floats(-3, 3, **finite), st.floats(-3, 3, **finite),
    st.integers(0, 2**31 - 1),
)
def test_filter_is_linear(beta, bre, bim, a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 64))
    sym = FilterSymbol(beta, complex(bre, bim), complex(bre, -bim))
    lhs = filter_lines(a * x + b * y, 0.1, sym)
    rhs = a * filter_lines(x, 0.1, sym) + b * filter_lines(y, 0.1, sym)
    scale = 1.0 + np.max(np.abs(lhs))
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * scale
    # B- = conj(B+) keeps real lines real
    assert np.max(np.abs(filter_lines(x, 0.1, sym).imag)) < 1e-10 * scale


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 3.5, **finite),
       st.floats(0.01, 20, **finite), st.sampled_from([-1.0, 1.0]))
def test_psi_conjugacy(a, mag, side):
    p = side * mag
    plus, minus = psi_a_pm(a, "+", p), psi_a_pm(a, "-", p)
    assert abs(plus - minus.conjugate()) <= 1e-12 * max(1.0, abs(plus))
