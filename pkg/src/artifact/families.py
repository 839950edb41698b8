"""Defining functions of curve/surface families and interface surfaces.

All callables broadcast over leading axes: ``t`` has shape ``(..., N)``,
``y`` has shape ``(..., n)`` and points ``x`` have shape ``(..., n)``.
Derivative arrays put the output component first after the batch axes,
e.g. ``phi_ty`` has shape ``(..., n, N, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray


def _unit_weight(x: Array, y: Array) -> Array:
    return np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))


@dataclass(frozen=True)
class GrtFamily:
    n: int
    N: int
    phi: Callable[[Array, Array], Array]
    phi_t: Callable[[Array, Array], Array]
    phi_y: Callable[[Array, Array], Array]
    phi_tt: Callable[[Array, Array], Array]
    phi_ty: Callable[[Array, Array], Array]
    phi_yy: Callable[[Array, Array], Array]
    weight_b: Callable[[Array, Array], Array] = _unit_weight
    weight_w: Callable[[Array, Array], Array] = _unit_weight
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (1 <= self.N <= self.n - 1):
            raise ValueError(f"need 1 <= N <= n-1, got n={self.n}, N={self.N}")

    def derivative_check(self, points: list[tuple[Array, Array]], h: float = 1e-5) -> float:
        """Largest relative mismatch between analytic and central-difference derivatives."""
        worst = 0.0
        for t, y in points:
            t = np.asarray(t, float)
            y = np.asarray(y, float)
            pairs = [
                (self.phi_t(t, y), _fd(lambda s: self.phi(s, y), t, h)),
                (self.phi_y(t, y), _fd(lambda s: self.phi(t, s), y, h)),
                (self.phi_tt(t, y), _fd(lambda s: self.phi_t(s, y), t, h)),
                (self.phi_ty(t, y), _fd(lambda s: self.phi_t(t, s), y, h)),
                (self.phi_yy(t, y), _fd(lambda s: self.phi_y(t, s), y, h)),
            ]
            for exact, approx in pairs:
                scale = max(1.0, float(np.max(np.abs(exact))))
                worst = max(worst, float(np.max(np.abs(exact - approx))) / scale)
        return worst


def _fd(fun: Callable[[Array], Array], z: Array, h: float) -> Array:
    cols = []
    for k in range(z.shape[-1]):
        dz = np.zeros_like(z)
        dz[..., k] = h
        cols.append((fun(z + dz) - fun(z - dz)) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class InterfaceSurface:
    """Level set ``psi(x) = 0`` with analytic gradient and Hessian."""

    psi: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def scaled(self, c: float) -> "InterfaceSurface":
        return InterfaceSurface(
            psi=lambda x: c * self.psi(x),
            grad=lambda x: c * self.grad(x),
            hess=lambda x: c * self.hess(x),
            name=f"{self.name}*{c:g}",
            params=dict(self.params, scale=c * self.params.get("scale", 1.0)),
        )


def _theta(a: Array) -> Array:
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


def _theta_perp(a: Array) -> Array:
    return np.stack([-np.sin(a), np.cos(a)], axis=-1)


def parallel_beam() -> GrtFamily:
    """Lines ``x = p*theta(alpha) + t*theta_perp(alpha)`` with data ``y = (p, alpha)``."""

    def phi(t, y):
        p, a = y[..., 0], y[..., 1]
        return p[..., None] * _theta(a) + t[..., 0][..., None] * _theta_perp(a)

    def phi_t(t, y):
        return _theta_perp(y[..., 1])[..., :, None] + 0.0 * t[..., None, :]

    def phi_y(t, y):
        p, a = y[..., 0], y[..., 1]
        tt = t[..., 0]
        col_p = _theta(a)
        col_a = p[..., None] * _theta_perp(a) - tt[..., None] * _theta(a)
        return np.stack([col_p, col_a], axis=-1)

    def phi_tt(t, y):
        shape = np.broadcast_shapes(t.shape[:-1], y.shape[:-1])
        return np.zeros(shape + (2, 1, 1))

    def phi_ty(t, y):
        a = y[..., 1]
        shape = np.broadcast_shapes(t.shape[:-1], y.shape[:-1])
        out = np.zeros(shape + (2, 1, 2))
        out[..., :, 0, 1] = -_theta(a)
        return out

    def phi_yy(t, y):
        p, a = y[..., 0], y[..., 1]
        tt = t[..., 0]
        shape = np.broadcast_shapes(t.shape[:-1], y.shape[:-1])
        out = np.zeros(shape + (2, 2, 2))
        out[..., :, 0, 1] = _theta_perp(a)
        out[..., :, 1, 0] = _theta_perp(a)
        out[..., :, 1, 1] = -p[..., None] * _theta(a) - tt[..., None] * _theta_perp(a)
        return out

    return GrtFamily(2, 1, phi, phi_t, phi_y, phi_tt, phi_ty, phi_yy, name="parallel-beam")


def circular_arcs() -> GrtFamily:
    """Circles of radius ``rho`` centred at ``theta(beta)`` on the unit circle.

    Data ``y = (rho, beta)``; the point is ``theta(beta) - rho*theta(beta + t)``
    so ``t = 0`` points from the centre towards the origin.
    """

    def phi(t, y):
        r, b = y[..., 0], y[..., 1]
        w = b + t[..., 0]
        return _theta(b) - r[..., None] * _theta(w)

    def phi_t(t, y):
        r, b = y[..., 0], y[..., 1]
        w = b + t[..., 0]
        return (-r[..., None] * _theta_perp(w))[..., :, None]

    def phi_y(t, y):
        r, b = y[..., 0], y[..., 1]
        w = b + t[..., 0]
        return np.stack([-_theta(w), _theta_perp(b) - r[..., None] * _theta_perp(w)], axis=-1)

    def phi_tt(t, y):
        r, b = y[..., 0], y[..., 1]
        w = b + t[..., 0]
        return (r[..., None] * _theta(w))[..., :, None, None]

    def phi_ty(t, y):
        r, b = y[..., 0], y[..., 1]
        w = b + t[..., 0]
        cols = np.stack([-_theta_perp(w), r[..., None] * _theta(w)], axis=-1)
        return cols[..., :, None, :]

    def phi_yy(t, y):
        r, b = y[..., 0], y[..., 1]
        w = b + t[..., 0]
        shape = np.broadcast_shapes(t.shape[:-1], y.shape[:-1])
        out = np.zeros(shape + (2, 2, 2))
        out[..., :, 0, 1] = -_theta_perp(w)
        out[..., :, 1, 0] = -_theta_perp(w)
        out[..., :, 1, 1] = -_theta(b) + r[..., None] * _theta(w)
        return out

    return GrtFamily(2, 1, phi, phi_t, phi_y, phi_tt, phi_ty, phi_yy, name="circular-arcs")


def pencil_of_lines(point=(2.0, 0.0)) -> GrtFamily:
    """Lines through one fixed point; the second data coordinate is inert.

    This family violates the Bolker condition everywhere and exists to
    exercise the degeneracy checks.
    """
    xf = np.asarray(point, float)

    def phi(t, y):
        return xf + t[..., 0][..., None] * _theta(y[..., 0]) + 0.0 * y[..., 1][..., None]

    def phi_t(t, y):
        return _theta(y[..., 0])[..., :, None] + 0.0 * t[..., None, :]

    def phi_y(t, y):
        col0 = t[..., 0][..., None] * _theta_perp(y[..., 0])
        return np.stack([col0, np.zeros_like(col0)], axis=-1)

    def phi_tt(t, y):
        shape = np.broadcast_shapes(t.shape[:-1], y.shape[:-1])
        return np.zeros(shape + (2, 1, 1))

    def phi_ty(t, y):
        shape = np.broadcast_shapes(t.shape[:-1], y.shape[:-1])
        out = np.zeros(shape + (2, 1, 2))
        out[..., :, 0, 0] = _theta_perp(y[..., 0])
        return out

    def phi_yy(t, y):
        shape = np.broadcast_shapes(t.shape[:-1], y.shape[:-1])
        out = np.zeros(shape + (2, 2, 2))
        out[..., :, 0, 0] = -t[..., 0][..., None] * _theta(y[..., 0])
        return out

    return GrtFamily(
        2, 1, phi, phi_t, phi_y, phi_tt, phi_ty, phi_yy, name="pencil", params={"point": list(xf)}
    )


def disk_surface(center=(0.0, 0.0), radius: float = 1.0) -> InterfaceSurface:
    """Boundary circle with ``psi = radius - |x - center|`` (positive inside)."""
    c = np.asarray(center, float)
    n = c.size

    def psi(x):
        return radius - np.linalg.norm(x - c, axis=-1)

    def grad(x):
        d = x - c
        return -d / np.linalg.norm(d, axis=-1)[..., None]

    def hess(x):
        d = x - c
        r = np.linalg.norm(d, axis=-1)[..., None, None]
        u = d[..., :, None] / r
        return -(np.eye(n) - u * np.swapaxes(u, -1, -2)) / r

    return InterfaceSurface(psi, grad, hess, name="disk", params={"center": list(c), "radius": radius})


FAMILIES = {
    "parallel-beam": parallel_beam,
    "circular-arcs": circular_arcs,
    "pencil": pencil_of_lines,
}
