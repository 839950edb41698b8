"""Closed-form transition behaviour (discrete and continuous) and its cross-checks.

Everything here is free of the sampling step ``eps``: profiles are
functions of ``h = x1_check / (dX1/dy1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline
from scipy.special import gamma, zeta

from .errors import EvalAtSingularity, MissingInteriorValue, SlowDecay, UnsupportedKappa
from .geometry import AdaptedFrame
from .sampling import InterpolationKernel, KernelRadon, Lattice, radon_table
from .signals import ConormalData, FilterSymbol, SourcePhantom, _phantom_in_frame, e_phase, is_integer, kappa

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
QUAD_EPSABS = 1e-9


# ---------------------------------------------------------------------------
# kernel projection in adapted data coordinates


def kernel_direction(frame: AdaptedFrame, lattice: Lattice | None = None):
    """Unit direction and scale of the projected kernel.

    Samples are interpolated in lattice-index units, so the adapted normal
    ``e1`` maps to ``theta = D^T U e1``; the projection along ``e1`` is
    ``phi_hat(theta/|theta|, p/|theta|)/|theta|``.
    """
    D = np.eye(frame.n) if lattice is None else lattice.D
    theta = D.T @ frame.U[:, 0]
    s = float(np.linalg.norm(theta))
    return theta / s, s, theta


def projected_kernel(kernel: InterpolationKernel, frame: AdaptedFrame, lattice: Lattice | None = None) -> KernelRadon:
    unit, s, _ = kernel_direction(frame, lattice)
    return radon_table(kernel, unit, s)


def _segments(points, lo, hi):
    pts = np.unique(np.clip(np.concatenate([[lo, hi], np.asarray(points, float)]), lo, hi))
    return list(zip(pts[:-1], pts[1:]))


def _kernel_points(radon: KernelRadon, h: float):
    bp = radon.breakpoints()
    if not radon.exact:
        bp = np.linspace(-radon.support, radon.support, 33)
    return h - bp


# ---------------------------------------------------------------------------
# constants and predictions


@dataclass
class TransitionPrediction:
    kappa: float
    dX1_dy1: float
    C1: float
    c1_plus: complex
    c1_minus: complex
    beta0: float
    s0: float
    radon: KernelRadon = field(repr=False)
    plateau_interior: complex | None = None
    plateau_exterior: complex | None = None
    route: str = "data"
    constants: dict = field(default_factory=dict)

    @property
    def jump(self) -> complex:
        """``C1 c1`` for ``kappa = 0`` (exterior minus interior plateau)."""
        return self.C1 * self.c1_plus

    def h_of_xcheck(self, x1):
        return np.asarray(x1, float) / self.dX1_dy1

    def profile(self, h):
        h = np.atleast_1d(np.asarray(h, float))
        out = np.array([self._point(float(v)) for v in h.ravel()], complex).reshape(h.shape)
        return out

    def at_xcheck(self, x1):
        return self.profile(self.h_of_xcheck(x1))

    def _point(self, h: float) -> complex:
        k = self.kappa
        R = self.radon
        if abs(k) < 1e-12:
            tail = 1.0 - float(R.cumulative(h))
            return complex(self.plateau_interior + self.jump * tail)
        pts = _kernel_points(R, h)
        lo, hi = h - R.support, h + R.support
        cp, cm = self.c1_plus, self.c1_minus
        if abs(k - 1.0) < 1e-12:
            pv = _pv_integral(lambda p: R(h - p), lo, hi, pts)
            return complex(self.C1 * ((cp + cm) * pv + 1j * np.pi * (cp - cm) * float(R(h))))
        # (p - i0)^-k = |p|^-k on p > 0 and e(2k)|p|^-k on p < 0
        right = cp + cm
        left = cp * np.exp(1j * np.pi * k) + cm * np.exp(-1j * np.pi * k)
        pos = _weighted_integral(lambda p: R(h - p), 0.0, hi, k, pts) if hi > 0 else 0.0
        neg = _weighted_integral(lambda u: R(h + u), 0.0, -lo, k, -pts) if lo < 0 else 0.0
        return complex(self.C1 * (right * pos + left * neg))

    def to_dict(self) -> dict:
        def c(z):
            return None if z is None else [complex(z).real, complex(z).imag]

        return {
            "kappa": self.kappa,
            "route": self.route,
            "dX1_dy1": self.dX1_dy1,
            "C1": self.C1,
            "c1_plus": c(self.c1_plus),
            "c1_minus": c(self.c1_minus),
            "jump": c(self.jump) if abs(self.kappa) < 1e-12 else None,
            "plateau_interior": c(self.plateau_interior),
            "plateau_exterior": c(self.plateau_exterior),
            "beta0": self.beta0,
            "s0": self.s0,
            "constants": self.constants,
        }


def _weighted_integral(f: Callable, a: float, b: float, k: float, points) -> float | complex:
    """``int_a^b f(p) p^-k dp`` for ``a = 0 <= b`` with an algebraic-weight rule on the first panel."""
    if b <= a:
        return 0.0
    segs = _segments(np.asarray(points)[(np.asarray(points) > a) & (np.asarray(points) < b)], a, b)
    total = 0.0
    for i, (s, t) in enumerate(segs):
        if i == 0:
            v, _ = quad(lambda p: float(f(p)), s, t, weight="alg", wvar=(-k, 0.0), epsabs=QUAD_EPSABS, limit=200)
        else:
            v, _ = quad(lambda p: float(f(p)) * p ** (-k), s, t, epsabs=QUAD_EPSABS, limit=200)
        total += v
    return total


def _pv_integral(f: Callable, lo: float, hi: float, points) -> float:
    """Principal value ``p.v. int f(p)/p dp`` by folding onto ``p > 0``."""
    R = max(abs(lo), abs(hi))
    pts = np.abs(np.asarray(points, float))
    segs = _segments(pts[(pts > 0) & (pts < R)], 0.0, R)

    tiny = 1e-7 * R

    def folded(p):
        # below ``tiny`` the quotient is roundoff; use a fixed-width difference
        p = max(p, tiny)
        return (float(f(p)) - float(f(-p))) / p

    gx, gw = np.polynomial.legendre.leggauss(64)
    total = 0.0
    for s, t in segs:
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                total += quad(folded, s, t, epsabs=QUAD_EPSABS, limit=200)[0]
                continue
            except IntegrationWarning:
                pass
        # the folded integrand is bounded; roundoff-level noise defeats the adaptive estimate
        q = 0.5 * (t - s) * gx + 0.5 * (t + s)
        total += 0.5 * (t - s) * float(np.dot(gw, [folded(v) for v in q]))
    return float(total)


def _check_kappa(k: float) -> None:
    if k < -1e-12:
        raise UnsupportedKappa(f"kappa = {k} < 0")
    if k > 1 + 1e-12 or (abs(k - 1) > 1e-12 and abs(k) > 1e-12 and is_integer(k)):
        raise UnsupportedKappa(f"kappa = {k}: only kappa in {{0}}, (0, 1) and {{1}} are supported")


def _interior(value):
    if value is None:
        return None
    return complex(getattr(value, "value", value))


def data_constants(frame: AdaptedFrame, data: ConormalData, symbol: FilterSymbol) -> dict:
    """``C1`` and ``c1^pm`` from the conormal amplitudes at ``y0``."""
    N = frame.N
    k = kappa(symbol.beta0, data.s0, N)
    y0 = np.zeros((1, frame.n))
    vp = complex(np.asarray(data.v_plus(y0)).ravel()[0])
    vm = complex(np.asarray(data.v_minus(y0)).ravel()[0])
    C1 = (
        (2 * np.pi) ** (N / 2.0)
        * frame.w0
        * abs(np.linalg.det(frame.dsf)) ** 0.5
        * frame.dX1_dy1 ** (N / 2.0)
        / abs(np.linalg.det(frame.d2X1))
    )
    d = symbol.beta0 - data.s0
    if abs(k) < 1e-12:
        c1 = 1j * complex(symbol.B_plus) * vp * e_phase(-d)
        cp, cm = c1, c1
    else:
        g = gamma(k) / (2 * np.pi)
        cp = g * complex(symbol.B_plus) * vp * e_phase(-d)
        cm = g * complex(symbol.B_minus) * vm * e_phase(d)
    return {"kappa": k, "C1": float(C1), "c1_plus": cp, "c1_minus": cm, "v_plus": vp, "v_minus": vm}


def predict_dtb(
    frame: AdaptedFrame,
    data: ConormalData,
    symbol: FilterSymbol,
    kernel: InterpolationKernel,
    lattice: Lattice | None = None,
    interior_value=None,
) -> TransitionPrediction:
    k = kappa(symbol.beta0, data.s0, frame.N)
    _check_kappa(k)
    const = data_constants(frame, data, symbol)
    f_int = _interior(interior_value)
    if abs(k) < 1e-12 and f_int is None:
        raise MissingInteriorValue("kappa = 0 needs the continuous interior value")
    R = projected_kernel(kernel, frame, lattice)
    pred = TransitionPrediction(
        kappa=k,
        dX1_dy1=frame.dX1_dy1,
        C1=const["C1"],
        c1_plus=const["c1_plus"],
        c1_minus=const["c1_minus"],
        beta0=symbol.beta0,
        s0=data.s0,
        radon=R,
        route="data",
        constants={"v_plus": [const["v_plus"].real, const["v_plus"].imag], "v_minus": [const["v_minus"].real, const["v_minus"].imag]},
    )
    if abs(k) < 1e-12:
        pred.plateau_interior = f_int
        pred.plateau_exterior = f_int + pred.jump
    return pred


def predict_dtb_from_phantom(
    frame: AdaptedFrame,
    phantom: SourcePhantom,
    symbol: FilterSymbol,
    kernel: InterpolationKernel,
    lattice: Lattice | None = None,
    interior_value=None,
) -> TransitionPrediction:
    """Same limit with constants written through the phantom amplitudes ``f^pm(x0)``.

    The phase uses ``N/2``: the Hessian of ``psi o phi`` in ``t`` is
    ``N x N`` and negative definite in the adapted frame.
    """
    N, n = frame.N, frame.n
    k = kappa(symbol.beta0, phantom.s0, N)
    _check_kappa(k)
    f_int = _interior(interior_value)
    if abs(k) < 1e-12 and f_int is None:
        raise MissingInteriorValue("kappa = 0 needs the continuous interior value")
    fp, fm = _phantom_in_frame(phantom, frame, np.zeros((1, n)))
    fp, fm = complex(np.ravel(fp)[0]), complex(np.ravel(fm)[0])
    C2 = (2 * np.pi) ** N * frame.b0 * frame.w0 * frame.dX1_dy1**N / abs(np.linalg.det(frame.d2X1))
    d = symbol.beta0 - phantom.s0 - N / 2.0
    if abs(k) < 1e-12:
        c2 = 1j * complex(symbol.B_plus) * fp * e_phase(-d)
        cp, cm = c2, c2
    else:
        g = gamma(k) / (2 * np.pi)
        cp = g * complex(symbol.B_plus) * fp * e_phase(-d)
        cm = g * complex(symbol.B_minus) * fm * e_phase(d)
    R = projected_kernel(kernel, frame, lattice)
    pred = TransitionPrediction(
        kappa=k,
        dX1_dy1=frame.dX1_dy1,
        C1=float(C2),
        c1_plus=cp,
        c1_minus=cm,
        beta0=symbol.beta0,
        s0=phantom.s0,
        radon=R,
        route="phantom",
        constants={"f_plus": [fp.real, fp.imag], "f_minus": [fm.real, fm.imag], "chi": frame.chi},
    )
    if abs(k) < 1e-12:
        pred.plateau_interior = f_int
        pred.plateau_exterior = f_int + pred.jump
    return pred


# ---------------------------------------------------------------------------
# continuous transition behaviour


@dataclass
class TransitionCTB:
    kappa: float
    C1: float
    c1_plus: complex
    c1_minus: complex
    plateau_interior: complex | None = None

    @property
    def delta_weight(self) -> complex:
        """Coefficient of ``delta(h)`` (non-zero only for ``kappa = 1``)."""
        if abs(self.kappa - 1.0) < 1e-12:
            return complex(1j * np.pi * self.C1 * (self.c1_plus - self.c1_minus))
        return 0j

    def __call__(self, h):
        h = np.asarray(h, float)
        k = self.kappa
        if abs(k) < 1e-12:
            step = 0.5 * (1.0 - np.sign(h))
            return self.plateau_interior + self.C1 * self.c1_plus * step
        if np.any(h == 0):
            raise EvalAtSingularity("CTB is singular at h = 0 for kappa > 0")
        a = np.abs(h) ** (-k)
        minus_branch = np.where(h > 0, 1.0 + 0j, np.exp(1j * np.pi * k))
        plus_branch = np.where(h > 0, 1.0 + 0j, np.exp(-1j * np.pi * k))
        return self.C1 * (self.c1_plus * minus_branch + self.c1_minus * plus_branch) * a


def predict_ctb(frame: AdaptedFrame, data: ConormalData, symbol: FilterSymbol, interior_value=None) -> TransitionCTB:
    k = kappa(symbol.beta0, data.s0, frame.N)
    _check_kappa(k)
    const = data_constants(frame, data, symbol)
    f_int = _interior(interior_value)
    if abs(k) < 1e-12 and f_int is None:
        raise MissingInteriorValue("kappa = 0 needs the continuous interior value")
    return TransitionCTB(k, const["C1"], const["c1_plus"], const["c1_minus"], f_int)


def ctb_from_prediction(pred: TransitionPrediction) -> TransitionCTB:
    return TransitionCTB(pred.kappa, pred.C1, pred.c1_plus, pred.c1_minus, pred.plateau_interior)


def convolution_identity_check(prediction: TransitionPrediction, ctb: TransitionCTB, h_grid=None, order: int = 24) -> float:
    """Sup deviation between ``CTB * phi_hat`` and the DTB profile, relative to the profile scale.

    The convolution uses a substitution that removes the ``|p|^-kappa``
    singularity and composite Gauss–Legendre panels, independent of the
    adaptive rules behind :meth:`TransitionPrediction.profile`.
    """
    h_grid = np.linspace(-5, 5, 101) if h_grid is None else np.asarray(h_grid, float)
    R = prediction.radon
    x, w = np.polynomial.legendre.leggauss(order)
    k = ctb.kappa
    S = R.support
    conv = np.zeros(h_grid.size, complex)
    for i, h in enumerate(h_grid):
        pts = _kernel_points(R, h)
        lo, hi = h - S, h + S
        if abs(k) < 1e-12:
            total = 0j
            for a, b in _segments(np.append(pts, 0.0), lo, hi):
                p = 0.5 * (a + b) + 0.5 * (b - a) * x
                total += np.sum(w * 0.5 * (b - a) * R(h - p) * ctb(p))
            conv[i] = total
            continue
        if abs(k - 1.0) < 1e-12:
            # antisymmetric part needs the folded principal value, the delta part is added explicitly
            Rm = max(abs(lo), abs(hi))
            fold = np.abs(pts)
            total = 0j
            for a, b in _segments(fold[(fold > 0) & (fold < Rm)], 0.0, Rm):
                p = 0.5 * (a + b) + 0.5 * (b - a) * x
                cp, cm = ctb(p), ctb(-p)
                total += np.sum(w * 0.5 * (b - a) * (R(h - p) * cp + R(h + p) * cm))
            conv[i] = total + ctb.delta_weight * float(R(h))
            continue
        # p = +-u^(1/(1-k)) makes the integrand bounded
        e = 1.0 / (1.0 - k)
        total = 0j
        for sgn, extent, bps in ((1.0, hi, pts[pts > 0]), (-1.0, -lo, -pts[pts < 0])):
            if extent <= 0:
                continue
            ub = np.abs(bps) ** (1.0 - k)
            for a, b in _segments(ub, 0.0, extent ** (1.0 - k)):
                u = 0.5 * (a + b) + 0.5 * (b - a) * x
                p = sgn * u**e
                jac = e * u ** (e - 1.0)
                total += np.sum(w * 0.5 * (b - a) * R(h - p) * ctb(p) * jac)
        conv[i] = total
    ref = prediction.profile(h_grid)
    scale = max(float(np.max(np.abs(ref))), 1e-300)
    if abs(k) < 1e-12:
        scale = max(abs(prediction.jump), 1e-300)
    return float(np.max(np.abs(conv - ref)) / scale)


# ---------------------------------------------------------------------------
# lattice-sum route through Upsilon


def profile_fourier(kernel: InterpolationKernel, lam):
    """``int k1(u) exp(i lam u) du`` for the piecewise-polynomial 1D profile."""
    lam = np.asarray(lam, float)
    out = np.zeros(lam.shape, complex)
    bp = np.unique(np.clip(np.asarray(kernel.breakpoints, float), -kernel.radius, kernel.radius))
    small = np.abs(lam) < 1.0
    big = ~small
    xg, wg = np.polynomial.legendre.leggauss(10)
    for a, b in zip(bp[:-1], bp[1:]):
        if b <= a:
            continue
        nodes = np.linspace(a, b, 9)[1:-1]
        coef = np.polyfit(nodes, kernel.profile(nodes), 3)
        poly = np.poly1d(coef)
        # short panels: direct Gauss–Legendre
        u = 0.5 * (a + b) + 0.5 * (b - a) * xg
        ls = lam[small]
        out[small] += np.sum(wg * 0.5 * (b - a) * poly(u) * np.exp(1j * ls[:, None] * u), axis=1)
        lb = lam[big]
        il = 1j * lb
        acc = np.zeros(lb.shape, complex)
        der = poly
        sign = 1.0
        for m in range(4):
            acc += sign * (der(b) * np.exp(il * b) - der(a) * np.exp(il * a)) / il ** (m + 1)
            der = der.deriv()
            sign = -sign
        out[big] += acc
    return out


def kernel_fourier(kernel: InterpolationKernel, theta, lam):
    """``phi_tilde(lam theta)`` for the tensor-product kernel."""
    lam = np.asarray(lam, float)
    out = np.ones(lam.shape, complex)
    for c in np.asarray(theta, float):
        if c != 0.0:
            out *= profile_fourier(kernel, lam * c)
    return out


@dataclass
class UpsilonProfile:
    h: np.ndarray
    values: np.ndarray
    p: np.ndarray = field(repr=False)
    upsilon: np.ndarray = field(repr=False)
    A: float = 20.0
    deltas: tuple = ()
    tail_estimate: float = 0.0

    def decay_slope(self, side: str = "-", p_range=(10.0, 60.0)) -> float:
        sgn = -1.0 if side == "-" else 1.0
        m = (sgn * self.p >= p_range[0]) & (sgn * self.p <= p_range[1])
        return float(np.polyfit(np.log(np.abs(self.p[m])), np.log(np.abs(self.upsilon[m])), 1)[0])


def upsilon_grid(
    frame: AdaptedFrame,
    data: ConormalData,
    symbol: FilterSymbol,
    kernel: InterpolationKernel,
    lattice: Lattice | None = None,
    p_period: float = 2048.0,
    dp: float = 1.0 / 256,
    deltas=(0.04, 0.02, 0.01),
):
    """``Upsilon(p) = F^-1(phi_tilde(lam Theta) b(lam) A_tilde(lam))`` on a uniform grid.

    Each damped transform (factor ``exp(-delta |lam|)``) is a single FFT; the
    damping is removed by a quadratic fit in ``delta``.
    """
    N = frame.N
    k = kappa(symbol.beta0, data.s0, N)
    mu = symbol.beta0 - data.s0 - 1.0
    if mu <= -1.0:
        raise UnsupportedKappa("Upsilon route needs beta0 - s0 > 0")
    const = data_constants(frame, data, symbol)
    vp, vm = const["v_plus"], const["v_minus"]
    _, _, theta = kernel_direction(frame, lattice)
    M = int(round(p_period / dp))
    dl = 2 * np.pi / (M * dp)
    m = np.fft.fftfreq(M, d=1.0 / M)
    lam = m * dl
    ker = kernel_fourier(kernel, theta, lam)
    a = np.abs(lam)
    with np.errstate(divide="ignore"):
        mag = np.where(a > 0, a**mu, 0.0)
    H = frame.w0 * np.where(
        lam > 0, complex(symbol.B_plus) * vp * mag, complex(symbol.B_minus) * vm * mag
    ) * ker
    zero_fix = 0j
    if mu == 0:
        H[0] = frame.w0 * 0.5 * (complex(symbol.B_plus) * vp + complex(symbol.B_minus) * vm) * ker[0]
    elif mu < 0:
        # generalized Euler–Maclaurin term for the |lam|^mu endpoint singularity
        zero_fix = -zeta(-mu) * dl ** (1.0 + mu) * frame.w0 * ker[0].real * (
            complex(symbol.B_plus) * vp + complex(symbol.B_minus) * vm
        )
    vals = []
    for d in deltas:
        spec = H * np.exp(-d * a)
        ups = np.fft.fft(spec) * dl / (2 * np.pi) + zero_fix / (2 * np.pi)
        vals.append(ups)
    vals = np.array(vals)
    dd = np.asarray(deltas, float)
    if dd.size >= 3:
        V = np.vander(dd, 3)
        coef = np.linalg.lstsq(V, vals, rcond=None)[0]
        ups = coef[-1]
    else:
        ups = vals[-1]
    p = np.fft.fftfreq(M, d=1.0 / M) * dp
    order = np.argsort(p)
    return p[order], ups[order], k


def dtb_via_upsilon(
    frame: AdaptedFrame,
    data: ConormalData,
    symbol: FilterSymbol,
    kernel: InterpolationKernel,
    h_grid=None,
    A: float = 20.0,
    lattice: Lattice | None = None,
    tol: float = 1e-3,
    panels_per_unit: int = 40,
) -> UpsilonProfile:
    """Lattice-average limit ``int_{|v| <= A} Upsilon(h + |Q| v^2 / 2) dv`` (one transverse dimension)."""
    if frame.N != 1:
        raise UnsupportedKappa("Upsilon route implemented for N = 1")
    k = kappa(symbol.beta0, data.s0, frame.N)
    if k <= 1e-12:
        raise UnsupportedKappa("Upsilon route needs kappa > 0")
    h_grid = np.linspace(-5, 5, 101) if h_grid is None else np.asarray(h_grid, float)
    q = abs(float(frame.Q[0, 0]))
    p_max = float(np.max(np.abs(h_grid))) + 0.5 * q * A * A
    period = 2048.0
    while period < 4 * p_max + 64:
        period *= 2
    p, ups, _ = upsilon_grid(frame, data, symbol, kernel, lattice, p_period=period)
    keep = (p > -p_max - 16) & (p < p_max + 16)
    p, ups = p[keep], ups[keep]
    re, im = CubicSpline(p, ups.real), CubicSpline(p, ups.imag)
    n_pan = max(8, int(math.ceil(A * panels_per_unit)))
    x, w = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, A, n_pan + 1)
    v = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * np.diff(edges)[:, None] * x).ravel()
    wv = (0.5 * np.diff(edges)[:, None] * w).ravel()
    arg = h_grid[:, None] + 0.5 * q * v[None, :] ** 2
    vals = 2.0 * np.sum(wv * (re(arg) + 1j * im(arg)), axis=1)
    # tail past the cutoff, assuming |Upsilon| ~ c/p there
    pA = h_grid + 0.5 * q * A * A
    tail = float(np.max(np.abs(re(pA) + 1j * im(pA)) * A))
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    if tail > tol * scale * 10:
        raise SlowDecay(f"Upsilon tail {tail:.2e} at the A-cutoff exceeds tolerance; increase A")
    return UpsilonProfile(h_grid, vals, p, ups, A, (0.04, 0.02, 0.01), tail)
