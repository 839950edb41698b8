"""Special functions and the conormal singular-data model.

Fourier convention: ``F g(lam) = int g(p) exp(i lam p) dp`` with inverse
``(1/2pi) int exp(-i lam p) ...``. Data live in adapted coordinates where
the singular surface is ``y1 = psi(y_perp)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma

from .errors import DegenerateStationaryPoint, PoleOrder
from .families import GrtFamily, InterfaceSurface


def e_phase(a):
    """``exp(i pi a / 2)``."""
    return np.exp(0.5j * np.pi * np.asarray(a, float)) if np.ndim(a) else complex(np.exp(0.5j * np.pi * a))


def kappa(beta0: float, s0: float, N: int) -> float:
    return beta0 - s0 - N / 2.0


def is_integer(x: float, tol: float = 1e-12) -> bool:
    return abs(x - round(x)) < tol


def one_sided_power(p, a: float, side: str):
    """``(p - i0)^(-a)`` for ``side='-'`` and ``(p + i0)^(-a)`` for ``side='+'``."""
    p = np.asarray(p, float)
    mag = np.abs(p) ** (-a)
    if side == "-":
        phase = np.where(p > 0, 1.0 + 0j, np.exp(1j * np.pi * a))
    else:
        phase = np.where(p > 0, 1.0 + 0j, np.exp(-1j * np.pi * a))
    return mag * phase


def psi_a_pm(a: float, sign: str, p):
    """Inverse Fourier transform of ``lam_pm^(a-1)``.

    ``Psi_a^+(p) = Gamma(a)/(2 pi) e(-a) (p - i0)^(-a)`` and the ``-`` version
    with the conjugate branch.
    """
    if a <= 0 and is_integer(a):
        raise PoleOrder(f"Gamma has a pole at a={a}")
    if sign not in "+-":
        raise ValueError("sign must be '+' or '-'")
    p = np.asarray(p, float)
    if np.any(p == 0):
        raise ValueError("p must be nonzero")
    s = 1.0 if sign == "+" else -1.0
    branch = "-" if sign == "+" else "+"
    out = gamma(a) / (2 * np.pi) * np.exp(-0.5j * np.pi * s * a) * one_sided_power(p, a, branch)
    return out if out.ndim else complex(out)


def amplitudes_from_v(v_plus, v_minus, s0: float):
    """One-sided coefficients ``a^pm`` of ``a+ P_+^s0 + a- P_-^s0`` from ``v^pm``."""
    v_plus = np.asarray(v_plus, complex)
    v_minus = np.asarray(v_minus, complex)
    if is_integer(s0):
        k = int(round(s0))
        c = v_plus / (2 * math.factorial(k))
        return c * e_phase(-(k + 1)), c * e_phase(k + 1)
    c = gamma(-s0) / (2 * np.pi)
    a_plus = c * (v_plus * e_phase(s0) + v_minus * e_phase(-s0))
    a_minus = c * (v_plus * e_phase(-s0) + v_minus * e_phase(s0))
    return a_plus, a_minus


def v_from_amplitudes(a_plus, a_minus, s0: float):
    """Inverse of :func:`amplitudes_from_v` for non-integer ``s0``."""
    if is_integer(s0):
        raise ValueError("the map v -> a is not invertible for integer s0")
    c = gamma(-s0) / (2 * np.pi)
    m = c * np.array([[e_phase(s0), e_phase(-s0)], [e_phase(-s0), e_phase(s0)]])
    sol = np.linalg.solve(m, np.array([a_plus, a_minus], complex))
    return complex(sol[0]), complex(sol[1])


def _zero(y):
    return np.zeros(np.shape(y)[:-1], complex)


@dataclass(frozen=True)
class ConormalData:
    """``g = a+ P_+^s0 + a- P_-^s0 (+ remainder)`` with ``P = y1 - psi(y_perp)``.

    ``v_plus``/``v_minus`` are the Fourier-side amplitudes; only their values
    on the surface matter. ``taper`` is an optional smooth cutoff applied to
    the whole signal so that it has compact support.
    """

    psi_perp: Callable
    v_plus: Callable
    v_minus: Callable
    s0: float
    remainder: Callable | None = None
    s1: float | None = None
    taper: Callable | None = None
    n: int = 2
    support: tuple | None = None  # (lo, hi) box in adapted coordinates
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.zeros((1, self.n - 1))
        psi0 = float(np.real(np.asarray(self.psi_perp(z)).ravel()[0]))
        h = 1e-6
        dpsi = []
        for k in range(self.n - 1):
            dz = np.zeros((1, self.n - 1))
            dz[0, k] = h
            dpsi.append(float(np.asarray(self.psi_perp(dz) - self.psi_perp(-dz)).ravel()[0]) / (2 * h))
        if abs(psi0) > 1e-10 or max(abs(d) for d in dpsi) > 1e-7:
            raise ValueError(f"surface must satisfy psi(0)=0, psi'(0)=0 (got {psi0:.2e}, {dpsi})")
        if self.s0 <= 0:
            raise ValueError("s0 must be positive")
        if self.s1 is not None and (self.s1 <= self.s0 or is_integer(self.s1)):
            raise ValueError("s1 must exceed s0 and be non-integer")

    def P(self, y):
        y = np.asarray(y, float)
        return y[..., 0] - self.psi_perp(y[..., 1:])

    def foot(self, y):
        y = np.asarray(y, float)
        out = y.copy()
        out[..., 0] = self.psi_perp(y[..., 1:])
        return out

    def amplitudes(self, y):
        ybar = self.foot(y)
        return amplitudes_from_v(self.v_plus(ybar), self.v_minus(ybar), self.s0)


def synthesize_g(data: ConormalData, y):
    y = np.asarray(y, float)
    P = data.P(y)
    a_plus, a_minus = data.amplitudes(y)
    g = a_plus * np.where(P > 0, np.abs(P), 0.0) ** data.s0 + a_minus * np.where(P < 0, np.abs(P), 0.0) ** data.s0
    g = np.asarray(g, complex)
    if data.remainder is not None:
        g = g + data.remainder(y)
    if data.taper is not None:
        g = g * data.taper(y)
    return g if g.ndim else complex(g)


def decay_slopes(data: ConormalData, y_perp, direction, P_values, orders=(0, 1, 2), side: str = "+"):
    """Fitted log-log slopes of ``|d^m g|`` against ``|P|`` along ``direction``.

    Derivatives are central differences with a step proportional to ``|P|``
    so every sample sees the same relative resolution.
    """
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    y_perp = np.atleast_1d(np.asarray(y_perp, float))
    base = np.concatenate([[float(data.psi_perp(y_perp[None, :])[0])], y_perp])
    # move along y1 to reach the target P, then differentiate along direction
    sgn = 1.0 if side == "+" else -1.0
    out = {}
    for m in orders:
        mags = []
        for P in P_values:
            y = base.copy()
            y[0] += sgn * P
            h = 1e-2 * P
            if m == 0:
                val = synthesize_g(data, y)
            elif m == 1:
                val = (synthesize_g(data, y + h * direction) - synthesize_g(data, y - h * direction)) / (2 * h)
            elif m == 2:
                val = (
                    synthesize_g(data, y + h * direction) - 2 * synthesize_g(data, y) + synthesize_g(data, y - h * direction)
                ) / h**2
            else:
                raise ValueError("orders up to 2 are supported")
            mags.append(abs(val))
        slope = np.polyfit(np.log(P_values), np.log(mags), 1)[0]
        out[m] = float(slope)
    return out


@dataclass(frozen=True)
class FilterSymbol:
    """``b(lam) = B+ lam_+^beta0 + B- lam_-^beta0`` plus an optional lower-order term."""

    beta0: float
    B_plus: complex = 1.0
    B_minus: complex = 1.0
    lower_order: tuple | None = None  # (beta1, B1_plus, B1_minus)
    apodization: float = 0.2

    def __post_init__(self):
        if self.lower_order is not None and not self.lower_order[0] < self.beta0:
            raise ValueError("lower-order exponent must be below beta0")
        if not 0.0 <= self.apodization < 1.0:
            raise ValueError("apodization fraction must lie in [0, 1)")

    @staticmethod
    def _homog(lam, beta, bp, bm):
        lam = np.asarray(lam, float)
        a = np.abs(lam)
        if beta == 0:
            mag = np.ones_like(a)
        else:
            with np.errstate(divide="ignore"):
                mag = np.where(a > 0, a ** beta, 0.0 if beta > 0 else np.inf)
        out = np.where(lam > 0, bp * mag, bm * mag).astype(complex)
        if beta == 0:
            out = np.where(lam == 0, 0.5 * (bp + bm), out)
        return out

    def __call__(self, lam):
        out = self._homog(lam, self.beta0, complex(self.B_plus), complex(self.B_minus))
        if self.lower_order is not None:
            b1, p1, m1 = self.lower_order
            out = out + self._homog(lam, b1, complex(p1), complex(m1))
        return out

    def to_dict(self) -> dict:
        d = {
            "beta0": self.beta0,
            "B_plus": [complex(self.B_plus).real, complex(self.B_plus).imag],
            "B_minus": [complex(self.B_minus).real, complex(self.B_minus).imag],
            "apodization": self.apodization,
        }
        if self.lower_order is not None:
            b1, p1, m1 = self.lower_order
            d["lower_order"] = [b1, [complex(p1).real, complex(p1).imag], [complex(m1).real, complex(m1).imag]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSymbol":
        def c(v):
            return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)

        lo = d.get("lower_order")
        if lo is not None:
            lo = (float(lo[0]), c(lo[1]), c(lo[2]))
        return cls(float(d["beta0"]), c(d.get("B_plus", 1.0)), c(d.get("B_minus", 1.0)), lo, float(d.get("apodization", 0.2)))


@dataclass(frozen=True)
class SourcePhantom:
    """``f`` with a conormal singularity across ``psi = 0``.

    ``f_plus``/``f_minus`` are the Fourier-side amplitudes relative to the
    given ``surface``; ``s0`` is the exponent of the data singularity the
    phantom produces. ``indicator=True`` means ``f`` is the indicator of
    ``psi > 0`` times ``amplitude``.
    """

    surface: InterfaceSurface
    f_plus: Callable
    f_minus: Callable
    s0: float
    indicator: bool = True
    amplitude: float = 1.0
    support: tuple | None = None  # (lo, hi) box in x

    def value(self, x):
        x = np.asarray(x, float)
        if not self.indicator:
            raise NotImplementedError("pointwise values are available for indicator phantoms only")
        return np.where(self.surface.psi(x) > 0, self.amplitude, 0.0)


def jump_phantom(surface: InterfaceSurface, amplitude: float = 1.0, N: int = 1, support=None) -> SourcePhantom:
    """Indicator of ``psi > 0``: ``f_tilde^pm = +-i`` and ``s0 = N/2``."""
    return SourcePhantom(
        surface=surface,
        f_plus=lambda x: 1j * amplitude * np.ones(np.shape(x)[:-1]),
        f_minus=lambda x: -1j * amplitude * np.ones(np.shape(x)[:-1]),
        s0=N / 2.0,
        indicator=True,
        amplitude=amplitude,
        support=support,
    )


def _signature(mat) -> int:
    eig = np.linalg.eigvalsh(0.5 * (mat + np.swapaxes(mat, -1, -2)))
    return int(np.sum(eig > 0) - np.sum(eig < 0))


def _phantom_in_frame(phantom: SourcePhantom, frame, x):
    """``f_tilde^pm`` relative to the frame's rescaled interface function."""
    N = frame.N
    s = frame.psi_scale
    factor = abs(s) ** (N / 2.0 - phantom.s0)
    x_orig = frame.to_original_x(x)
    fp, fm = phantom.f_plus(x_orig), phantom.f_minus(x_orig)
    if s < 0:
        fp, fm = fm, fp
    return factor * np.asarray(fp, complex), factor * np.asarray(fm, complex)


def stationary_amplitudes(phantom: SourcePhantom, frame, y):
    """``v^pm(y)`` by stationary phase over the curve, in adapted coordinates.

    Returned relative to the defining function ``P(y) = psi(phi(t*(y), y))``.
    """
    from .geometry import psi_phi_tt, solve_t_star

    fam, surf = frame.family, frame.surface
    y = np.atleast_2d(np.asarray(y, float))
    t, _ = solve_t_star(fam, surf, y)
    x = fam.phi(t, y)
    ptt = psi_phi_tt(fam, surf, t, y)
    det_tt = np.linalg.det(ptt)
    if np.any(np.abs(det_tt) < 1e-12):
        raise DegenerateStationaryPoint("det (psi o phi)_tt vanishes at the stationary point")
    pt = fam.phi_t(t, y)
    gram = np.linalg.det(np.einsum("...ia,...ib->...ab", pt, pt))
    sig = np.array([_signature(m) for m in ptt])
    fp, fm = _phantom_in_frame(phantom, frame, x)
    b = np.asarray(fam.weight_b(x, y), float)
    base = (2 * np.pi) ** (frame.N / 2.0) * b * np.sqrt(np.abs(gram / det_tt))
    v_plus = base * fp * np.exp(-0.25j * np.pi * sig)
    v_minus = base * fm * np.exp(0.25j * np.pi * sig)
    return v_plus, v_minus, sig


def push_forward_amplitudes(
    phantom: SourcePhantom,
    family: GrtFamily,
    frame,
    chart_radius: float = 1.0,
    n_table: int = 801,
    taper: Callable | None = None,
) -> ConormalData:
    """Conormal model of ``R f`` near the tangency, in adapted coordinates.

    The singular surface ``y1 = psi(y_perp)`` is traced by Newton on
    ``P(y) = 0``; amplitudes are re-expressed relative to ``y1 - psi`` by the
    factor ``(dP/dy1)^s0`` at the foot point. For ``n = 2`` both ``psi`` and
    the amplitudes are tabulated on ``|y_perp| <= chart_radius``.
    ``family`` is the original family; the frame carries its adapted copy.
    """
    from .geometry import psi_phi_y, solve_t_star

    if frame.n != 2:
        raise NotImplementedError("push-forward tabulation is implemented for n = 2")
    fam, surf = frame.family, frame.surface
    yp = np.linspace(-chart_radius, chart_radius, n_table)
    order = np.argsort(np.abs(yp), kind="stable")
    y1 = np.zeros_like(yp)
    # march outward from the tangency, seeding each point with its neighbour
    solved = {}
    for idx in order:
        k = idx
        nb = k - 1 if yp[k] > 0 else k + 1
        seed = solved.get(nb, 0.0)
        z = seed
        for _ in range(60):
            y = np.array([[z, yp[k]]])
            t, P = solve_t_star(fam, surf, y)
            dP = psi_phi_y(fam, surf, t, y)[0, 0]
            step = P[0] / dP
            z -= step
            if abs(step) < 1e-13:
                break
        solved[k] = z
        y1[k] = z
    ybar = np.column_stack([y1, yp])
    t, _ = solve_t_star(fam, surf, ybar)
    mfac = psi_phi_y(fam, surf, t, ybar)[:, 0]
    vp, vm, _ = stationary_amplitudes(phantom, frame, ybar)
    vp = vp * mfac ** phantom.s0
    vm = vm * mfac ** phantom.s0
    y1 = y1 - y1[n_table // 2]
    psi_spl = CubicSpline(yp, y1)
    vp_re, vp_im = CubicSpline(yp, vp.real), CubicSpline(yp, vp.imag)
    vm_re, vm_im = CubicSpline(yp, vm.real), CubicSpline(yp, vm.imag)

    def psi_perp(z):
        return psi_spl(np.asarray(z, float)[..., 0])

    def v_plus(y):
        s = np.asarray(y, float)[..., 1]
        return vp_re(s) + 1j * vp_im(s)

    def v_minus(y):
        s = np.asarray(y, float)[..., 1]
        return vm_re(s) + 1j * vm_im(s)

    return ConormalData(
        psi_perp=psi_perp,
        v_plus=v_plus,
        v_minus=v_minus,
        s0=phantom.s0,
        taper=taper,
        n=2,
        meta={"source": "push-forward", "chart_radius": chart_radius},
    )


def validate_compatibility(data: ConormalData, symbol: FilterSymbol, N: int, probes=None) -> dict:
    """Machine checks of the exponent and phase conditions.

    ``probes`` are points ``y_perp`` on the singular surface (default: a few
    points near the tangency).
    """
    k = kappa(symbol.beta0, data.s0, N)
    report = {"kappa": k, "checks": {}}
    report["checks"]["C1"] = {"pass": k >= -1e-12, "value": k}
    if probes is None:
        probes = np.linspace(-0.05, 0.05, 5)
    probes = np.asarray(probes, float).reshape(-1, data.n - 1)
    ybar = data.foot(np.concatenate([np.zeros((len(probes), 1)), probes], axis=1))
    vp = np.asarray(data.v_plus(ybar), complex)
    vm = np.asarray(data.v_minus(ybar), complex)
    bp, bm = complex(symbol.B_plus), complex(symbol.B_minus)
    if abs(k) < 1e-12:
        lhs = bp * vp
        rhs = -e_phase(2 * (symbol.beta0 - data.s0)) * bm * vm
        scale = max(1e-300, float(np.max(np.abs(lhs)) + np.max(np.abs(rhs))))
        res = float(np.max(np.abs(lhs - rhs)) / scale)
        report["checks"]["C2"] = {"pass": res < 1e-10, "residual": res}
        if is_integer(symbol.beta0 - data.s0):
            report["flags"] = ["kappa=0 with integer beta0-s0: leading one-sided term vanishes"]
    if is_integer(data.s0):
        sgn = (-1) ** (int(round(data.s0)) + 1)
        res = float(np.max(np.abs(vp - sgn * vm)) / max(1e-300, float(np.max(np.abs(vp)))))
        report["checks"]["g4"] = {"pass": res < 1e-10, "residual": res}
    report["pass"] = all(c["pass"] for c in report["checks"].values())
    return report
