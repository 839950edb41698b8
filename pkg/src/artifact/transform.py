"""Forward transform, the 1D filter and weighted backprojection.

The reconstruction pipeline works in adapted coordinates and is
implemented for hypersurface families (``N = n - 1``) where the data set
through a point is parametrised by ``y_perp`` and ``y1`` is solved for:
each backprojection node ``y_perp`` gets its own data line, uniformly
sampled in ``y1``, filtered by FFT and read off with cubic interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft as sfft
from scipy.integrate import quad
from scipy.optimize import brentq

from . import _kernels
from .errors import (
    ChartExceeded,
    ConfigError,
    GridTooCoarse,
    NonConvergentExtrapolation,
    NyquistViolated,
    QuadratureFailure,
    UnsupportedError,
)
from .families import GrtFamily
from .geometry import AdaptedFrame, gram_T, solve_T_x
from .sampling import InterpolationKernel, Lattice, SampledData, interpolate, sample
from .signals import FilterSymbol, SourcePhantom, kappa


# ---------------------------------------------------------------------------
# forward transform


def _chord_roots(phantom: SourcePhantom, family: GrtFamily, y, t_range, n_scan):
    ts = np.linspace(t_range[0], t_range[1], n_scan)
    vals = np.array([phantom.surface.psi(family.phi(np.array([t]), y)) for t in ts])
    roots = []
    for k in range(n_scan - 1):
        if vals[k] == 0.0:
            roots.append(ts[k])
        elif vals[k] * vals[k + 1] < 0:
            f = lambda t: float(phantom.surface.psi(family.phi(np.array([t]), y)))
            roots.append(brentq(f, ts[k], ts[k + 1], xtol=1e-15, rtol=1e-15))
    return ts, vals, roots


def forward_grt(
    phantom: SourcePhantom,
    family: GrtFamily,
    y,
    t_range=(-4.0, 4.0),
    n_scan: int = 257,
    exponent: float = 0.0,
    tol: float = 1e-8,
) -> float:
    """``R f(y) = int f(phi(t, y)) b (det G)^(1/2) dt`` for ``f = a * psi_+^exponent``.

    The parameter line is split where the curve crosses the interface so
    that each adaptive panel has at most endpoint singularities.
    """
    if family.N != 1:
        raise UnsupportedError("forward_grt quadrature is implemented for curve families")
    y = np.asarray(y, float)
    ts, vals, roots = _chord_roots(phantom, family, y, t_range, n_scan)
    edges = [t_range[0]] + roots + [t_range[1]]

    def integrand(t):
        tt = np.array([t])
        x = family.phi(tt, y)
        psi = float(phantom.surface.psi(x))
        if psi <= 0:
            return 0.0
        pt = family.phi_t(tt, y)
        gram = float(np.sqrt(np.linalg.det(pt.T @ pt)))
        return phantom.amplitude * psi**exponent * float(family.weight_b(x, y)) * gram

    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        if phantom.surface.psi(family.phi(np.array([mid]), y)) <= 0:
            continue
        val, e = quad(integrand, a, b, epsabs=tol, epsrel=1e-12, limit=200)
        total += val
        err += e
    if err > 10 * tol:
        raise QuadratureFailure(f"forward quadrature error estimate {err:.2e}")
    if vals[0] > 0 or vals[-1] > 0:
        raise QuadratureFailure("phantom support reaches the end of the parameter range")
    return float(total)


# ---------------------------------------------------------------------------
# filtering


def apodization(r, fraction: float):
    """Raised-cosine roll-off over the top ``fraction`` of the band, ``r = |omega| / omega_nyquist``."""
    r = np.abs(np.asarray(r, float))
    if fraction <= 0:
        return np.ones_like(r)
    lo = 1.0 - fraction
    t = np.clip((r - lo) / fraction, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * t))


def filter_lines(values, step: float, symbol: FilterSymbol, pad: bool = True, workers: int | None = None):
    """Apply ``symbol`` along the last axis of ``values`` (uniform step).

    With the convention ``F g(lam) = int g exp(i lam y) dy`` the numpy
    frequency ``omega`` corresponds to ``lam = -omega``.
    """
    values = np.asarray(values, complex)
    M = values.shape[-1]
    L = sfft.next_fast_len(2 * M if pad else M)
    omega = 2 * np.pi * np.fft.fftfreq(L, d=step)
    mult = symbol(-omega) * apodization(omega * step / np.pi, symbol.apodization)
    spec = sfft.fft(values, n=L, axis=-1, workers=workers)
    out = sfft.ifft(spec * mult, axis=-1, workers=workers)
    return out[..., :M]


@dataclass(frozen=True, eq=False)
class FineGrid:
    """Data lines in adapted coordinates: ``values[k, m]`` at ``(y1_start + m*step, nodes[k])``."""

    y1_start: float
    step: float
    nodes: np.ndarray
    values: np.ndarray
    rho: int = 8
    eps: float | None = None

    @property
    def y1(self):
        return self.y1_start + self.step * np.arange(self.values.shape[-1])

    def to_header(self) -> dict:
        return {
            "shape": list(self.values.shape),
            "step": self.step,
            "origin": [self.y1_start],
            "nodes": self.nodes.tolist(),
            "dtype": "complex128-le (re, im interleaved)",
        }

    def dump(self, path) -> None:
        import json

        with open(str(path) + ".json", "w") as fh:
            json.dump(self.to_header(), fh, indent=2, sort_keys=True)
        np.ascontiguousarray(self.values, "<c16").tofile(str(path) + ".bin")


def apply_filter(grid: FineGrid, symbol: FilterSymbol, pad: bool = True, strict: bool = False) -> FineGrid:
    if strict and grid.rho < 8:
        raise GridTooCoarse(f"oversampling rho={grid.rho} below 8")
    vals = filter_lines(grid.values, grid.step, symbol, pad=pad)
    return FineGrid(grid.y1_start, grid.step, grid.nodes, vals, grid.rho, grid.eps)


# ---------------------------------------------------------------------------
# data sources


@dataclass(frozen=True, eq=False)
class DataSource:
    """Vectorised data ``g`` on original data coordinates with a support box."""

    g: Callable
    support: tuple
    s0: float
    name: str = "data"

    def __call__(self, y):
        return np.asarray(self.g(np.asarray(y, float)), complex)


def linear_combination(sources, weights) -> DataSource:
    lo = np.min([s.support[0] for s in sources], axis=0)
    hi = np.max([s.support[1] for s in sources], axis=0)

    def g(y):
        return sum(w * s(y) for s, w in zip(sources, weights))

    return DataSource(g, (lo, hi), min(s.s0 for s in sources), name="combination")


# ---------------------------------------------------------------------------
# backprojection


def gl_nodes(a: float, b: float, panel: float, spacing: float, min_nodes: int = 8):
    """Composite Gauss–Legendre nodes and weights on ``[a, b]``."""
    if b <= a:
        return np.zeros(0), np.zeros(0)
    n_pan = max(1, int(math.ceil((b - a) / panel - 1e-12)))
    h = (b - a) / n_pan
    q = max(min_nodes, int(math.ceil(h / spacing)))
    x, w = np.polynomial.legendre.leggauss(q)
    lefts = a + h * np.arange(n_pan)
    nodes = (lefts[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
    weights = np.broadcast_to(0.5 * h * w, (n_pan, q)).ravel()
    return nodes, weights.copy()


def _solve_path(family: GrtFamily, x, nodes, chunk: int = 64):
    """``Y(y_perp, x)`` along sorted nodes, continuing outward from the node nearest 0."""
    n = family.n
    K = nodes.size
    Y = np.zeros((K, n))
    T = np.zeros((K, family.N))
    start = int(np.argmin(np.abs(nodes)))
    seed0 = np.zeros(n)
    z, t = solve_T_x(family, x, nodes[start : start + 1, None], seed=seed0, return_t=True)
    Y[start], T[start] = z[0], t[0]

    def run(idx_list, prev):
        last = prev
        for c in range(0, len(idx_list), chunk):
            idx = np.array(idx_list[c : c + chunk])
            seed = np.concatenate([T[last], Y[last, : n - family.N]])
            yy, tt = solve_T_x(family, x, nodes[idx, None], seed=seed, return_t=True)
            Y[idx], T[idx] = yy, tt
            last = idx[-1]

    run(list(range(start + 1, K)), start)
    run(list(range(start - 1, -1, -1)), start)
    return Y, T


@dataclass(frozen=True)
class ReconstructionRequest:
    x_checks: np.ndarray
    eps: float
    A: float = 20.0
    mode: str = "discrete"
    omega_split: bool = False
    rho: int = 8
    chart_radius: float = 1.0
    strict: bool = False
    panel_factor: float = 0.25
    margin: float = 0.05

    def __post_init__(self):
        if self.mode not in ("discrete", "continuous"):
            raise ConfigError(f"mode must be 'discrete' or 'continuous', got {self.mode!r}")
        if self.rho < 2:
            raise NyquistViolated("oversampling below 2 points per lattice step")


@dataclass
class ReconstructionResult:
    x_checks: np.ndarray
    raw: np.ndarray
    scaled: np.ndarray
    kappa: float
    omega1: np.ndarray | None = None
    omega2: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def _support_y1(frame: AdaptedFrame, support, pad: float):
    lo, hi = (np.asarray(v, float) for v in support)
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(frame.n, -1).T
    ad = frame.to_adapted_y(corners)
    return float(ad[:, 0].min() - pad), float(ad[:, 0].max() + pad)


def backproject(
    frame: AdaptedFrame,
    source: DataSource,
    symbol: FilterSymbol,
    x_points,
    eps: float,
    rho: int = 8,
    window: tuple = (-1.0, 1.0),
    split: float | None = None,
    lattice: Lattice | None = None,
    kernel: InterpolationKernel | None = None,
    samples: SampledData | None = None,
    panel_factor: float = 0.25,
    max_points: int = 6_000_000,
):
    """``int (B g)(Y(y_perp, x)) w (det G^T)^(1/2) dy_perp`` for adapted points ``x``.

    ``lattice`` and ``kernel`` select discrete data ``g_eps``; otherwise the
    source is evaluated directly. ``split`` marks the Omega_1 half-width
    so that the two parts can be reported separately.
    """
    fam = frame.family
    if frame.N != frame.n - 1:
        raise UnsupportedError("backprojection is implemented for hypersurface families (N = n - 1)")
    if frame.n != 2:
        raise UnsupportedError("backprojection lines are implemented for n = 2")
    x_points = np.atleast_2d(np.asarray(x_points, float))
    step = eps / rho
    nodes, weights = gl_nodes(window[0], window[1], panel_factor * math.sqrt(eps), step)
    # paths: Y(y_perp, x0) first, then each x seeded from it
    Y0, T0 = _solve_path(fam, np.zeros(frame.n), nodes)
    X = x_points.shape[0]
    K = nodes.size
    seed = np.concatenate([T0, Y0[:, :1]], axis=1)
    Yx = np.zeros((X, K, frame.n))
    Tx = np.zeros((X, K, frame.N))
    for i in range(X):
        try:
            yy, tt = solve_T_x(fam, x_points[i], nodes[:, None], seed=seed, return_t=True)
        except Exception as exc:
            raise ChartExceeded(f"backprojection paths left the chart: {exc}") from exc
        Yx[i], Tx[i] = yy, tt
    wts = np.asarray(fam.weight_w(np.broadcast_to(x_points[:, None, :], Yx.shape), Yx), float)
    gT = gram_T(fam, Tx.reshape(-1, frame.N), Yx.reshape(-1, frame.n)).reshape(X, K)
    W = weights[None, :] * wts * gT
    Y1 = Yx[..., 0]

    if lattice is not None:
        if kernel is None:
            raise ConfigError("discrete reconstruction needs an interpolation kernel")
        if samples is None:
            samples = sample(source, lattice, source.support, pad=int(math.ceil(kernel.radius)) + 2)
        pad = (kernel.radius + 2) * eps * float(np.max(np.abs(lattice.D)))
    else:
        pad = 4 * step
    lo, hi = _support_y1(frame, source.support, pad)
    lo = min(lo, float(Y1.min()) - 4 * step)
    hi = max(hi, float(Y1.max()) + 4 * step)
    start = math.floor(lo / step) * step
    M = int(math.ceil((hi - start) / step)) + 1
    y1 = start + step * np.arange(M)
    U, y0 = frame.U, frame.pair.y0
    acc1 = np.zeros(X, complex)
    acc2 = np.zeros(X, complex)
    inner = np.ones(K, bool) if split is None else np.abs(nodes) <= split + 1e-15
    chunk = max(1, max_points // max(M, 1))
    for c0 in range(0, K, chunk):
        sl = slice(c0, min(K, c0 + chunk))
        kc = nodes[sl]
        pts = np.empty((kc.size, M, 2))
        pts[..., 0] = y1[None, :]
        pts[..., 1] = kc[:, None]
        y_orig = y0 + pts.reshape(-1, 2) @ U.T
        if lattice is not None:
            vals = interpolate(samples, kernel, y_orig, outside="zero")
        else:
            vals = source(y_orig)
        lines = filter_lines(np.asarray(vals).reshape(kc.size, M), step, symbol, pad=True)
        s = _kernels.sample_lines(lines, start, step, Y1[:, sl])
        contrib = W[:, sl] * s
        acc1 += np.sum(np.where(inner[sl][None, :], contrib, 0.0), axis=1)
        acc2 += np.sum(np.where(inner[sl][None, :], 0.0, contrib), axis=1)
    info = {
        "nodes": int(K),
        "line_points": int(M),
        "step": step,
        "window": list(window),
        "backend": _kernels.backend(),
    }
    return acc1 + acc2, acc1, acc2, info


def reconstruct(
    request: ReconstructionRequest,
    source: DataSource,
    kernel: InterpolationKernel | None,
    symbol: FilterSymbol,
    frame: AdaptedFrame,
    lattice: Lattice | None = None,
    samples: SampledData | None = None,
    genericity=None,
) -> ReconstructionResult:
    """Reconstruction at ``x0 + eps * x_check`` (adapted coordinates)."""
    k = kappa(symbol.beta0, source.s0, frame.N)
    if k < -1e-12:
        raise ConfigError(f"kappa = {k} < 0")
    if request.strict and request.rho < 8:
        raise GridTooCoarse(f"oversampling rho={request.rho} below 8")
    xc = np.atleast_2d(np.asarray(request.x_checks, float))
    if xc.shape[1] == 1:
        xc = np.concatenate([xc, np.zeros((xc.shape[0], frame.n - 1))], axis=1)
    eps = request.eps
    half = request.A * math.sqrt(eps)
    chart = request.chart_radius
    clipped = half >= chart
    window = (-chart, chart) if (request.omega_split or clipped) else (-half, half)
    split = min(half, chart) if request.omega_split else None
    use_lattice = request.mode == "discrete"
    if use_lattice and lattice is None:
        raise ConfigError("discrete mode needs a lattice")
    total, om1, om2, info = backproject(
        frame,
        source,
        symbol,
        eps * xc,
        eps,
        rho=request.rho,
        window=window,
        split=split,
        lattice=lattice if use_lattice else None,
        kernel=kernel if use_lattice else None,
        samples=samples if use_lattice else None,
        panel_factor=request.panel_factor,
    )
    info.update({"omega1_half_width": min(half, chart), "window_clipped_to_chart": bool(clipped), "mode": request.mode})
    if genericity is not None and not genericity.generic:
        info["warning"] = "pair is not generic for this lattice"
    scale = eps**k
    return ReconstructionResult(
        x_checks=xc,
        raw=total,
        scaled=scale * total,
        kappa=k,
        omega1=scale * om1 if request.omega_split else None,
        omega2=scale * om2 if request.omega_split else None,
        info=info,
    )


@dataclass(frozen=True)
class InteriorValue:
    value: complex
    error_estimate: float
    deltas: tuple
    samples: tuple
    side: str

    def to_dict(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "error_estimate": self.error_estimate,
            "deltas": list(self.deltas),
            "samples": [[complex(s).real, complex(s).imag] for s in self.samples],
            "side": self.side,
        }


def continuous_interior_value(
    frame: AdaptedFrame,
    source: DataSource,
    symbol: FilterSymbol,
    delta_list=(4e-2, 2e-2, 1e-2),
    side: str = "interior",
    chart_radius: float = 1.0,
    resolution: float = 1.0 / 512,
    rho: int = 8,
    jump_scale: float | None = None,
) -> InteriorValue:
    """One-sided limit of the continuous reconstruction at ``x0``.

    Evaluates at ``x0 +- delta e1`` (``+`` is the interior side) and
    extrapolates to ``delta = 0`` with a quadratic fit; the error estimate is
    the gap to the linear fit through the two smallest offsets.
    """
    if source is None:
        raise ConfigError("no data source")
    sgn = 1.0 if side == "interior" else -1.0
    d = np.asarray(sorted(delta_list, reverse=True), float)
    pts = np.zeros((d.size, frame.n))
    pts[:, 0] = sgn * d
    vals, _, _, _ = backproject(
        frame, source, symbol, pts, resolution, rho=rho, window=(-chart_radius, chart_radius)
    )
    if d.size >= 3:
        coef = np.polyfit(d, vals, 2)
        val = complex(coef[-1])
        lin = vals[-1] - d[-1] * (vals[-2] - vals[-1]) / (d[-2] - d[-1])
        err = float(abs(val - lin))
    elif d.size == 2:
        val = complex(vals[-1] - d[-1] * (vals[-2] - vals[-1]) / (d[-2] - d[-1]))
        err = float(abs(val - vals[-1]))
    else:
        val, err = complex(vals[0]), float("inf")
    scale = jump_scale if jump_scale is not None else max(1e-300, float(np.max(np.abs(vals))))
    if err > 0.01 * scale:
        raise NonConvergentExtrapolation(f"extrapolation error {err:.3e} exceeds 1% of {scale:.3e}")
    return InteriorValue(val, err, tuple(d.tolist()), tuple(complex(v) for v in vals), side)
