"""Sampling lattices, tensor-product interpolation kernels and their Radon transforms."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels
from .errors import IoFailure, OutOfWindow, WindowTooSmall

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True, eq=False)
class InterpolationKernel:
    """``phi(u) = prod_i k1(u_i)`` for a compactly supported 1D profile ``k1``."""

    name: str
    code: int
    radius: float
    smoothness: int  # number of continuous derivatives, -1 for discontinuous
    declared_order: int
    breakpoints: tuple
    table_u: np.ndarray | None = None
    table_v: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    verified_order: int = -1
    exactness_residuals: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        if self.code == _kernels.TABLE:
            return f"{self.name}:{hash(self.table_u.tobytes()) ^ hash(self.table_v.tobytes())}"
        return self.name

    def profile(self, u):
        return _kernels.profile_np(self.code, u, self.table_u, self.table_v)

    def __call__(self, u):
        u = np.asarray(u, float)
        return np.prod(self.profile(u), axis=-1)

    def integral(self) -> float:
        return float(_integrate_piecewise(self.profile, self.breakpoints, -self.radius, self.radius))

    def to_dict(self) -> dict:
        d = {"name": self.name}
        d.update(self.params)
        return d


def _integrate_piecewise(fun, breakpoints, lo, hi):
    pts = np.unique(np.clip(np.concatenate([[lo, hi], np.asarray(breakpoints, float)]), lo, hi))
    a, b = pts[:-1], pts[1:]
    x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X[None, :]
    return np.sum(fun(x) * _GL_W[None, :] * 0.5 * (b - a)[:, None])


_BUILTIN = {
    "box": dict(code=_kernels.BOX, radius=0.5, smoothness=-1, declared_order=0, breakpoints=(-0.5, 0.5)),
    "linear": dict(code=_kernels.LINEAR, radius=1.0, smoothness=0, declared_order=1, breakpoints=(-1.0, 0.0, 1.0)),
    "keys": dict(
        code=_kernels.KEYS, radius=2.0, smoothness=1, declared_order=2, breakpoints=(-2.0, -1.0, 0.0, 1.0, 2.0)
    ),
    "bspline2": dict(
        code=_kernels.BSPLINE2, radius=1.5, smoothness=1, declared_order=1, breakpoints=(-1.5, -0.5, 0.5, 1.5)
    ),
}
_ALIASES = {"nearest": "box", "cubic": "keys", "keys-cubic": "keys", "quadratic": "bspline2"}


def _finalize(kernel: InterpolationKernel, check_declared: bool) -> InterpolationKernel:
    total = kernel.integral()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"kernel {kernel.name} is not normalized (integral {total!r})")
    order, table = kernel_exactness(kernel, max_order=3, n=1)
    if check_declared and order != kernel.declared_order:
        raise ValueError(f"kernel {kernel.name}: declared order {kernel.declared_order}, verified {order}")
    object.__setattr__(kernel, "verified_order", order)
    object.__setattr__(kernel, "exactness_residuals", table)
    return kernel


def make_kernel(name: str, **params) -> InterpolationKernel:
    """Kernel from the built-in library, or ``name='table'`` with ``path=...``."""
    name = _ALIASES.get(name, name)
    if name == "table":
        return load_kernel_table(params["path"])
    if name not in _BUILTIN:
        raise KeyError(f"unknown kernel {name!r}; available: {sorted(_BUILTIN)} or 'table'")
    return _finalize(InterpolationKernel(name=name, **_BUILTIN[name]), check_declared=True)


def load_kernel_table(path) -> InterpolationKernel:
    """Custom profile from a two-column text file ``u  k1(u)``, linearly interpolated."""
    try:
        data = np.loadtxt(path, ndmin=2)
    except OSError as exc:
        raise IoFailure(f"cannot read kernel table {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise ValueError("kernel table must have two columns")
    order = np.argsort(data[:, 0])
    u, v = data[order, 0], data[order, 1]
    radius = float(max(abs(u[0]), abs(u[-1])))
    k = InterpolationKernel(
        name="table",
        code=_kernels.TABLE,
        radius=radius,
        smoothness=0,
        declared_order=-1,
        breakpoints=tuple(u.tolist()),
        table_u=np.ascontiguousarray(u),
        table_v=np.ascontiguousarray(v),
        params={"path": str(path)},
    )
    k = _finalize(k, check_declared=False)
    object.__setattr__(k, "declared_order", k.verified_order)
    return k


def kernel_exactness(kernel: InterpolationKernel, max_order: int = 3, n: int = 2, probes: int = 17):
    """Achieved polynomial-reproduction order and the residual table.

    For every multi-index ``m`` with ``|m| <= max_order`` the residual is
    ``max_u |sum_j j^m phi(u - j) - u^m|`` over a ``probes^n`` grid of
    ``u in [0, 1)^n``.
    """
    g1 = np.arange(probes) / probes
    grid = np.stack(np.meshgrid(*[g1] * n, indexing="ij"), axis=-1).reshape(-1, n)
    R = int(math.ceil(kernel.radius)) + 1
    offsets = np.array(list(itertools.product(range(-R, R + 2), repeat=n)), float)
    weights = kernel(grid[:, None, :] - offsets[None, :, :])  # (G, J)
    table = {}
    for m in itertools.product(range(max_order + 1), repeat=n):
        if sum(m) > max_order:
            continue
        mono_j = np.prod(offsets ** np.array(m), axis=-1)
        mono_u = np.prod(grid ** np.array(m), axis=-1)
        table[m] = float(np.max(np.abs(weights @ mono_j - mono_u)))
    order = -1
    for k in range(max_order + 1):
        if all(r < 1e-9 for m, r in table.items() if sum(m) <= k):
            order = k
        else:
            break
    return order, {",".join(map(str, m)): r for m, r in table.items()}


# ---------------------------------------------------------------------------
# Radon transform of the kernel


class KernelRadon:
    """``phi_hat(theta, p) = int phi(u) delta(theta.u - p) du`` with its antiderivative.

    ``scale`` implements the lattice-index reading for a non-identity
    sampling matrix: the transform of ``phi(D1^{-1} .)`` along a unit
    direction is ``phi_hat(theta, p / s) / s``.
    """

    def __init__(self, kernel: InterpolationKernel, theta, scale: float = 1.0, n_grid: int = 4096):
        theta = np.asarray(theta, float)
        if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
            raise ValueError("theta must be a unit vector")
        self.kernel = kernel
        self.theta = theta
        self.scale = float(scale)
        nz = [float(c) for c in theta if abs(c) > 1e-14]
        self.axes = nz
        self.half_support = sum(abs(c) for c in nz) * kernel.radius
        self.exact = len(nz) == 1
        bp = np.asarray(kernel.breakpoints, float)
        if self.exact:
            c = nz[0]
            self._f = lambda p: kernel.profile(p / c) / abs(c)
            self._bp = np.sort(c * bp)
        else:
            S = self.half_support
            self.grid = np.linspace(-S, S, n_grid + 1)
            vals = self._convolve_exact(self.grid, nz[0], nz[1])
            for c in nz[2:]:
                vals = self._convolve_more(self.grid, vals, c)
            vals[0] = vals[-1] = 0.0
            self._spline = CubicSpline(self.grid, vals)
            self._anti = self._spline.antiderivative()
            self._total = float(self._anti(S))

    # exact convolution of two scaled piecewise-polynomial profiles
    def _convolve_exact(self, p, c1, c2):
        k = self.kernel
        bp = np.asarray(k.breakpoints, float)

        def f1(s):
            return k.profile(s / c1) / abs(c1)

        def f2(s):
            return k.profile(s / c2) / abs(c2)

        lo, hi = -abs(c1) * k.radius, abs(c1) * k.radius
        out = np.empty_like(p)
        for start in range(0, p.size, 512):
            pc = p[start : start + 512]
            b = np.concatenate(
                [np.broadcast_to(c1 * bp, (pc.size, bp.size)), pc[:, None] - c2 * bp[None, :]], axis=1
            )
            b = np.sort(np.clip(b, lo, hi), axis=1)
            a0, a1 = b[:, :-1], b[:, 1:]
            half = 0.5 * (a1 - a0)
            x = (0.5 * (a0 + a1))[..., None] + half[..., None] * _GL_X
            vals = f1(x) * f2(pc[:, None, None] - x)
            out[start : start + 512] = np.sum(vals * _GL_W * half[..., None], axis=(1, 2))
        return out

    def _convolve_more(self, p, vals, c):
        spl = CubicSpline(p, vals)
        k = self.kernel
        bp = np.asarray(k.breakpoints, float)
        edges = np.unique(np.concatenate([np.linspace(bp[0], bp[-1], 65), bp])) * c
        edges = np.sort(edges)
        a0, a1 = edges[:-1], edges[1:]
        half = 0.5 * (a1 - a0)
        s = (0.5 * (a0 + a1))[:, None] + half[:, None] * _GL_X
        w = (k.profile(s / c) / abs(c)) * _GL_W * half[:, None]
        shifted = p[:, None, None] - s[None]
        inside = np.abs(shifted) <= p[-1]
        return np.sum(np.where(inside, spl(np.clip(shifted, p[0], p[-1])), 0.0) * w[None], axis=(1, 2))

    @property
    def support(self) -> float:
        return self.half_support * self.scale

    def _base(self, q):
        q = np.asarray(q, float)
        if self.exact:
            return self._f(q)
        inside = np.abs(q) <= self.half_support
        vals = self._spline(np.clip(q, -self.half_support, self.half_support)) / self._total
        return np.where(inside, vals, 0.0)

    def _base_cum(self, q):
        q = np.asarray(q, float)
        if self.exact:
            S = self.half_support
            qc = np.clip(q, -S, S)
            flat = np.atleast_1d(qc).ravel()
            out = np.array([_integrate_piecewise(self._f, self._bp, -S, float(v)) for v in flat])
            return out.reshape(np.shape(qc))
        qc = np.clip(q, -self.half_support, self.half_support)
        return self._anti(qc) / self._total

    def __call__(self, p):
        return self._base(np.asarray(p, float) / self.scale) / self.scale

    def cumulative(self, p):
        """``int_{-inf}^{p} phi_hat``."""
        return self._base_cum(np.asarray(p, float) / self.scale)

    def breakpoints(self) -> np.ndarray:
        if self.exact:
            return self._bp * self.scale
        return np.array([-self.support, 0.0, self.support])


_RADON_CACHE: dict = {}


def radon_table(kernel: InterpolationKernel, theta, scale: float = 1.0) -> KernelRadon:
    key = (kernel.key, tuple(np.round(np.asarray(theta, float), 14)), round(scale, 14))
    tab = _RADON_CACHE.get(key)
    if tab is None:
        tab = KernelRadon(kernel, theta, scale)
        _RADON_CACHE[key] = tab
    return tab


def kernel_radon(kernel: InterpolationKernel, theta, p):
    return radon_table(kernel, theta)(p)


# ---------------------------------------------------------------------------
# lattices and samples


@dataclass(frozen=True, eq=False)
class Lattice:
    eps: float
    D: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, float))
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "origin", np.asarray(self.origin, float))
        if abs(np.linalg.det(D) - 1.0) > 1e-12:
            raise ValueError(f"sampling matrix must have det 1 (got {np.linalg.det(D)!r})")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def n(self) -> int:
        return self.D.shape[0]

    def points(self, j):
        j = np.asarray(j, float)
        return self.origin + self.eps * j @ self.D.T

    def index_coords(self, y):
        y = np.asarray(y, float)
        return np.linalg.solve(self.eps * self.D, (y - self.origin).reshape(-1, self.n).T).T.reshape(y.shape)


@dataclass(frozen=True, eq=False)
class SampledData:
    lattice: Lattice
    j_lo: np.ndarray
    values: np.ndarray

    def index_window(self):
        return self.j_lo, self.j_lo + np.array(self.values.shape) - 1


def sample(g, lattice: Lattice, window, pad: int = 3) -> SampledData:
    """Evaluate ``g`` (vectorised, original coordinates) at the lattice points.

    ``window`` is a box ``(lo, hi)`` in original coordinates that contains
    the support of ``g``; the index window is padded by ``pad`` points.
    """
    lo, hi = (np.asarray(w, float) for w in window)
    n = lattice.n
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    u = lattice.index_coords(corners)
    j_lo = np.floor(u.min(axis=0)).astype(int) - pad
    j_hi = np.ceil(u.max(axis=0)).astype(int) + pad
    shape = tuple(int(v) for v in j_hi - j_lo + 1)
    if any(s < 2 * pad + 1 for s in shape):
        raise WindowTooSmall("sampling window collapses to fewer points than the kernel needs")
    idx = np.stack(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(j_lo, j_hi)], indexing="ij"), axis=-1)
    vals = np.asarray(g(lattice.points(idx.reshape(-1, n))), complex).reshape(shape)
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    if scale > 0 and pad > 0:
        layer = np.zeros(shape, bool)
        for ax in range(n):
            sl = [slice(None)] * n
            sl[ax] = slice(0, pad)
            layer[tuple(sl)] = True
            sl[ax] = slice(shape[ax] - pad, None)
            layer[tuple(sl)] = True
        if np.max(np.abs(vals[layer])) > 1e-12 * scale:
            raise WindowTooSmall("data do not vanish on the padding layer; enlarge the window")
    return SampledData(lattice, j_lo, vals)


def interpolate(samples: SampledData, kernel: InterpolationKernel, y, outside: str = "raise"):
    """``g_eps(y) = sum_j phi(u - j) g_j`` with ``u`` in lattice-index units."""
    y = np.asarray(y, float)
    lat = samples.lattice
    u = lat.index_coords(y).reshape(-1, lat.n) - samples.j_lo
    if lat.n == 2:
        out, nbad = _kernels.interp_lattice_2d(
            samples.values, u, kernel.code, kernel.radius, kernel.table_u, kernel.table_v, outside == "zero"
        )
    else:
        out, nbad = _interp_nd(samples.values, u, kernel, outside == "zero")
    if nbad and outside == "raise":
        raise OutOfWindow(f"{nbad} interpolation points need samples outside the index window")
    out = out.reshape(y.shape[:-1])
    return out if out.ndim else complex(out)


def _interp_nd(values, u, kernel, zero_outside):
    n = values.ndim
    width = int(math.ceil(2 * kernel.radius)) + 1
    lo = np.floor(u - kernel.radius).astype(int)
    out = np.zeros(u.shape[0], complex)
    bad = np.zeros(u.shape[0], bool)
    for off in itertools.product(range(width), repeat=n):
        j = lo + np.array(off)
        w = np.prod(kernel.profile(u - j), axis=-1)
        inside = np.all((j >= 0) & (j < np.array(values.shape)), axis=-1)
        bad |= (~inside) & (w != 0)
        jj = tuple(np.clip(j[:, a], 0, values.shape[a] - 1) for a in range(n))
        out += np.where(inside, w * values[jj], 0.0)
    return out, (0 if zero_outside else int(bad.sum()))
