"""Tangency pairs, adapted coordinates and the matrices built from them.

Conventions
-----------
Original data coordinates ``y_orig`` and adapted ones ``y`` are related by
``y_orig = U @ y + y0``. Adapted image coordinates are ``x = R @ (x_orig - x0)``
with the first axis along ``d psi`` and the last ``N`` axes spanning the
tangent plane of the curve through the tangency point. The interface
function is rescaled by ``psi_scale`` so that ``d_y(psi o phi) = (1, 0, ...)``;
the sign of ``psi_scale`` is chosen so that the curvature difference ``dsf``
is negative definite whenever it is definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .errors import (
    BolkerViolated,
    NoConvergence,
    NondegeneracyViolated,
    OutOfChart,
    SingularJacobian,
    SplitInvalid,
    StepTooLarge,
)
from .families import GrtFamily, InterfaceSurface

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


# ---------------------------------------------------------------------------
# small Newton solvers


def _newton(fun, jac, z0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER, lstsq=False, polish=2):
    """Damped Newton with backtracking on the residual norm.

    With ``lstsq=True`` the minimum-norm step is used, which suits
    underdetermined systems. After the tolerance is met a couple of extra
    full steps push the residual down to rounding level.
    """
    z = np.array(z0, float)
    r = fun(z)
    norm = float(np.linalg.norm(r))
    extra = 0
    for _ in range(max_iter):
        if norm < tol:
            if extra >= polish:
                return z, norm
            extra += 1
        J = jac(z)
        if lstsq:
            step = np.linalg.lstsq(J, -r, rcond=None)[0]
        else:
            if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
                raise SingularJacobian(f"Jacobian is singular (cond={np.linalg.cond(J):.3g})")
            step = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            z_new = z + lam * step
            r_new = fun(z_new)
            n_new = float(np.linalg.norm(r_new))
            if n_new < norm or lam < 1e-4 or norm < tol:
                break
            lam *= 0.5
        if norm < tol and n_new >= norm:
            return z, norm
        z, r, norm = z_new, r_new, n_new
    if norm < tol:
        return z, norm
    raise NoConvergence(f"Newton did not converge in {max_iter} steps (residual {norm:.3e})")


def _batch_newton(fun_jac, z0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER, polish=1):
    """Vectorised Newton for independent square systems stacked along axis 0.

    ``fun_jac(z)`` returns residuals ``(m, k)`` and Jacobians ``(m, k, k)``.
    """
    z = np.array(z0, float)
    r, J = fun_jac(z)
    norm = np.linalg.norm(r, axis=-1)
    extra = 0
    for _ in range(max_iter):
        if np.all(norm < tol):
            if extra >= polish:
                return z, norm
            extra += 1
        det = np.linalg.det(J)
        if np.any(~np.isfinite(det)) or np.any(np.abs(det) < 1e-300):
            raise SingularJacobian("singular Jacobian in batched Newton")
        step = np.linalg.solve(J, -r[..., None])[..., 0]
        lam = np.ones(z.shape[0])
        z_new = z + step
        r_new, J_new = fun_jac(z_new)
        n_new = np.linalg.norm(r_new, axis=-1)
        for _ in range(12):
            bad = (n_new >= norm) & (norm >= tol)
            if not np.any(bad):
                break
            lam[bad] *= 0.5
            z_new = z + lam[:, None] * step
            r_new, J_new = fun_jac(z_new)
            n_new = np.linalg.norm(r_new, axis=-1)
        keep = (norm < tol) & (n_new >= norm)
        z_new[keep] = z[keep]
        z, r, J, norm = z_new, r_new, J_new, np.where(keep, norm, n_new)
        if np.all(norm < tol) and extra >= polish:
            return z, norm
    if np.all(norm < tol):
        return z, norm
    raise NoConvergence(
        f"batched Newton did not converge in {max_iter} steps (max residual {norm.max():.3e})"
    )


# ---------------------------------------------------------------------------
# composite derivatives of psi o phi


def psi_phi_t(family: GrtFamily, surface: InterfaceSurface, t, y):
    x = family.phi(t, y)
    return np.einsum("...i,...ia->...a", surface.grad(x), family.phi_t(t, y))


def psi_phi_tt(family: GrtFamily, surface: InterfaceSurface, t, y):
    x = family.phi(t, y)
    pt = family.phi_t(t, y)
    return np.einsum("...ia,...ij,...jb->...ab", pt, surface.hess(x), pt) + np.einsum(
        "...i,...iab->...ab", surface.grad(x), family.phi_tt(t, y)
    )


def psi_phi_ty(family: GrtFamily, surface: InterfaceSurface, t, y):
    x = family.phi(t, y)
    pt = family.phi_t(t, y)
    py = family.phi_y(t, y)
    return np.einsum("...ia,...ij,...jk->...ak", pt, surface.hess(x), py) + np.einsum(
        "...i,...iak->...ak", surface.grad(x), family.phi_ty(t, y)
    )


def psi_phi_y(family: GrtFamily, surface: InterfaceSurface, t, y):
    x = family.phi(t, y)
    return np.einsum("...i,...ik->...k", surface.grad(x), family.phi_y(t, y))


# ---------------------------------------------------------------------------
# tangency


@dataclass(frozen=True)
class TangencyPair:
    x0: np.ndarray
    y0: np.ndarray
    t0: np.ndarray
    xi0: np.ndarray
    residuals: dict

    def to_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "y0": self.y0.tolist(),
            "t0": self.t0.tolist(),
            "xi0": self.xi0.tolist(),
            "residuals": dict(self.residuals),
        }


def solve_tangency(
    family: GrtFamily,
    surface: InterfaceSurface,
    seed: tuple,
    x0=None,
    tol: float = NEWTON_TOL,
) -> TangencyPair:
    """Find ``(t0, y0)`` whose curve touches the interface.

    ``seed`` is ``(t, y)``. With ``x0`` given the anchored system
    ``phi(t, y) = x0, d psi(x0) . phi_t = 0`` is solved (its Jacobian is the
    Bolker matrix). Otherwise the tangency equations
    ``psi(phi) = 0, (psi o phi)_t = 0`` are solved with minimum-norm steps
    from the seed.
    """
    n, N = family.n, family.N
    t_seed, y_seed = (np.atleast_1d(np.asarray(s, float)) for s in seed)
    z0 = np.concatenate([t_seed, y_seed])

    if x0 is not None:
        x0 = np.asarray(x0, float)
        xi = surface.grad(x0)

        def fun(z):
            t, y = z[:N], z[N:]
            return np.concatenate([family.phi(t, y) - x0, xi @ family.phi_t(t, y)])

        def jac(z):
            t, y = z[:N], z[N:]
            top = np.hstack([family.phi_t(t, y), family.phi_y(t, y)])
            bottom = np.hstack(
                [np.einsum("i,iab->ab", xi, family.phi_tt(t, y)), np.einsum("i,iak->ak", xi, family.phi_ty(t, y))]
            )
            return np.vstack([top, bottom])

        z, _ = _newton(fun, jac, z0, tol=tol)
    else:

        def fun(z):
            t, y = z[:N], z[N:]
            x = family.phi(t, y)
            return np.concatenate([[surface.psi(x)], psi_phi_t(family, surface, t, y)])

        def jac(z):
            t, y = z[:N], z[N:]
            top = np.concatenate([psi_phi_t(family, surface, t, y), psi_phi_y(family, surface, t, y)])
            bottom = np.hstack([psi_phi_tt(family, surface, t, y), psi_phi_ty(family, surface, t, y)])
            return np.vstack([top[None, :], bottom])

        z, _ = _newton(fun, jac, z0, tol=tol, lstsq=True)

    t0, y0 = z[:N], z[N:]
    xs = family.phi(t0, y0)
    if x0 is None:
        x0 = xs
    ptt = psi_phi_tt(family, surface, t0, y0)
    if abs(np.linalg.det(np.atleast_2d(ptt))) < 1e-12:
        raise SingularJacobian("det (psi o phi)_tt vanishes at the tangency point")
    jac_full = np.hstack([family.phi_t(t0, y0), family.phi_y(t0, y0)])
    sv = np.linalg.svd(jac_full, compute_uv=False)
    if sv[-1] < 1e-12 * max(1.0, sv[0]):
        raise SingularJacobian("rank of phi_(t,y) is deficient at the tangency point")
    residuals = {
        "anchor": float(np.linalg.norm(xs - x0)),
        "psi": float(abs(surface.psi(xs))),
        "psi_t": float(np.linalg.norm(psi_phi_t(family, surface, t0, y0))),
    }
    if max(residuals.values()) > tol:
        raise NoConvergence(f"tangency residuals too large: {residuals}")
    return TangencyPair(x0=np.asarray(x0, float), y0=y0, t0=t0, xi0=surface.grad(x0), residuals=residuals)


# ---------------------------------------------------------------------------
# adapted chart


def adapt_family(family: GrtFamily, R, U, x0, y0, t0) -> GrtFamily:
    """Express ``family`` in adapted coordinates."""
    R = np.asarray(R, float)
    U = np.asarray(U, float)

    def orig(t, y):
        return t + t0, y0 + y @ U.T

    def phi(t, y):
        return (family.phi(*orig(t, y)) - x0) @ R.T

    def phi_t(t, y):
        return np.einsum("ij,...ja->...ia", R, family.phi_t(*orig(t, y)))

    def phi_y(t, y):
        return np.einsum("ij,...jk,kl->...il", R, family.phi_y(*orig(t, y)), U)

    def phi_tt(t, y):
        return np.einsum("ij,...jab->...iab", R, family.phi_tt(*orig(t, y)))

    def phi_ty(t, y):
        return np.einsum("ij,...jak,kl->...ial", R, family.phi_ty(*orig(t, y)), U)

    def phi_yy(t, y):
        return np.einsum("ij,...jkm,kp,mq->...ipq", R, family.phi_yy(*orig(t, y)), U, U)

    def weight_b(x, y):
        return family.weight_b(x0 + x @ R, y0 + y @ U.T)

    def weight_w(x, y):
        return family.weight_w(x0 + x @ R, y0 + y @ U.T)

    return GrtFamily(
        family.n, family.N, phi, phi_t, phi_y, phi_tt, phi_ty, phi_yy, weight_b, weight_w,
        name=family.name + "@adapted", params=family.params,
    )


def adapt_surface(surface: InterfaceSurface, R, x0, scale: float) -> InterfaceSurface:
    R = np.asarray(R, float)

    def psi(x):
        return scale * surface.psi(x0 + x @ R)

    def grad(x):
        return scale * surface.grad(x0 + x @ R) @ R.T

    def hess(x):
        return scale * np.einsum("ij,...jk,lk->...il", R, surface.hess(x0 + x @ R), R)

    return InterfaceSurface(psi, grad, hess, name=surface.name + "@adapted", params=surface.params)


@dataclass(frozen=True)
class AdaptedFrame:
    n: int
    N: int
    pair: TangencyPair
    U: np.ndarray
    x_rotation: np.ndarray
    psi_scale: float
    flipped: bool
    theta_adapted: np.ndarray
    theta_original: np.ndarray
    M: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    psi_tt: np.ndarray
    dsf: np.ndarray
    dX1_dy1: float
    d2X1: np.ndarray
    chi: float
    dY1_dx1: float
    gram_sigma_det: float
    Y0_prime: np.ndarray
    w0: float
    b0: float
    family: GrtFamily = field(repr=False)
    surface: InterfaceSurface = field(repr=False)
    residuals: dict = field(default_factory=dict)
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def M11(self):
        return self.M[: self.n, : self.n]

    @property
    def M12(self):
        return self.M[: self.n, self.n :]

    @property
    def M21(self):
        return self.M[self.n :, : self.n]

    @property
    def M22(self):
        return self.M[self.n :, self.n :]

    @property
    def dsf_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.dsf)

    def to_original_y(self, y):
        return self.pair.y0 + np.asarray(y) @ self.U.T

    def to_adapted_y(self, y_orig):
        return (np.asarray(y_orig) - self.pair.y0) @ self.U

    def to_original_x(self, x):
        return self.pair.x0 + np.asarray(x) @ self.x_rotation

    def to_adapted_x(self, x_orig):
        return (np.asarray(x_orig) - self.pair.x0) @ self.x_rotation.T

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "pair": self.pair.to_dict(),
            "U": self.U.tolist(),
            "x_rotation": self.x_rotation.tolist(),
            "psi_scale": self.psi_scale,
            "flipped": self.flipped,
            "theta_adapted": self.theta_adapted.tolist(),
            "theta_original": self.theta_original.tolist(),
            "M": self.M.tolist(),
            "det_M": float(np.linalg.det(self.M)),
            "det_M11": float(np.linalg.det(self.M11)),
            "C": self.C.tolist(),
            "det_C": float(np.linalg.det(self.C)),
            "Q": self.Q.tolist(),
            "psi_tt": self.psi_tt.tolist(),
            "dsf": self.dsf.tolist(),
            "dsf_eigenvalues": self.dsf_eigenvalues.tolist(),
            "dX1_dy1": self.dX1_dy1,
            "d2X1": self.d2X1.tolist(),
            "chi": self.chi,
            "dY1_dx1": self.dY1_dx1,
            "gram_sigma_det": self.gram_sigma_det,
            "Y0_prime": self.Y0_prime.tolist(),
            "w0": self.w0,
            "b0": self.b0,
            "residuals": dict(self.residuals),
        }


def _orient(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def build_adapted_frame(family: GrtFamily, surface: InterfaceSurface, pair: TangencyPair) -> AdaptedFrame:
    n, N = family.n, family.N
    m = n - N
    t0, y0, x0 = pair.t0, pair.y0, pair.x0

    g = surface.grad(x0)
    H = surface.hess(x0)
    pt = family.phi_t(t0, y0)
    py = family.phi_y(t0, y0)
    ptt_orig = pt.T @ H @ pt + np.einsum("i,iab->ab", g, family.phi_tt(t0, y0))
    if abs(np.linalg.det(ptt_orig)) < 1e-12:
        raise NondegeneracyViolated("det (psi o phi)_tt vanishes")
    eig = np.linalg.eigvalsh(0.5 * (ptt_orig + ptt_orig.T))
    sigma = -1.0 if np.all(eig > 0) else 1.0

    # image coordinates: x1 along sigma*grad psi, last N axes spanning phi_t
    gnorm = float(np.linalg.norm(g))
    e1 = sigma * g / gnorm
    qt, rt = np.linalg.qr(pt)
    qt = qt * np.sign(np.where(np.diag(rt) == 0, 1.0, np.diag(rt)))
    if m > 1:
        comp = null_space(np.vstack([e1, qt.T]))
        R = np.vstack([e1, comp.T, qt.T])
    else:
        R = np.vstack([e1, qt.T])

    # data coordinates from the SVD of the normal block of phi_y
    py1 = R[:m] @ py
    _, sv, V2t = np.linalg.svd(py1)
    V2 = V2t.T
    r = R[0] @ py
    rn = float(np.linalg.norm(r))
    u1 = r / rn
    cols = [u1]
    if m > 1:
        row_space = V2[:, :m]
        proj = row_space - np.outer(u1, u1 @ row_space)
        qq, _ = np.linalg.qr(proj)
        basis = []
        for k in range(qq.shape[1]):
            v = qq[:, k] - sum(np.dot(qq[:, k], b) * b for b in [u1] + basis)
            if np.linalg.norm(v) > 1e-8:
                basis.append(v / np.linalg.norm(v))
            if len(basis) == m - 1:
                break
        cols += [_orient(b) for b in basis]
    for k in range(m, n):
        cols.append(_orient(V2[:, k]))
    U = np.column_stack(cols)
    psi_scale = sigma / (gnorm * rn)

    fa = adapt_family(family, R, U, x0, y0, t0)
    sa = adapt_surface(surface, R, x0, psi_scale)
    z_t = np.zeros(N)
    z_y = np.zeros(n)
    z_x = np.zeros(n)
    A_t = fa.phi_t(z_t, z_y)
    A_y = fa.phi_y(z_t, z_y)
    A_tt = fa.phi_tt(z_t, z_y)
    A_ty = fa.phi_ty(z_t, z_y)
    ga = sa.grad(z_x)
    Ha = sa.hess(z_x)
    gan = float(np.linalg.norm(ga))
    psi_tt = A_t.T @ Ha @ A_t + np.einsum("i,iab->ab", ga, A_tt)
    psi_tt = 0.5 * (psi_tt + psi_tt.T)
    xi_tt = np.einsum("i,iab->ab", ga, A_tt)
    xi_ty = np.einsum("i,iak->ak", ga, A_ty)

    M = np.block([[A_t, A_y], [xi_tt, xi_ty]])
    M11, M12, M21, M22 = M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:]
    sv_M = np.linalg.svd(M, compute_uv=False)
    if sv_M[-1] < 1e-10 * max(1.0, sv_M[0]):
        raise BolkerViolated(f"Bolker matrix is singular (smallest singular value {sv_M[-1]:.3e})")
    if abs(np.linalg.det(M11)) < 1e-12:
        raise SplitInvalid("det phi_(t, y_hat) vanishes")
    C = M22 - M21 @ np.linalg.solve(M11, M12)
    if abs(np.linalg.det(psi_tt)) < 1e-12:
        raise NondegeneracyViolated("det (psi o phi)_tt vanishes in adapted coordinates")
    Q = C.T @ np.linalg.solve(psi_tt, C)
    Q = 0.5 * (Q + Q.T)

    phi_t2 = A_t[m:, :]
    if abs(np.linalg.det(phi_t2)) < 1e-12:
        raise NondegeneracyViolated("det phi_t^(2) vanishes")
    T_x = np.linalg.inv(phi_t2)
    T_y = -T_x @ A_y[m:, :]
    # second fundamental forms in (x1, x_tilde)
    ii_curve = T_x.T @ A_tt[0] @ T_x
    ii_surface = -Ha[m:, m:] / gan
    dsf = ii_curve - ii_surface
    dsf = 0.5 * (dsf + dsf.T)

    dX1_dy1 = float(A_y[0, 0])
    d2X1_full = T_x.T @ (A_tt[0] @ T_y + A_ty[0])
    d2X1 = d2X1_full[:, m:]
    chi = dX1_dy1**N / abs(np.linalg.det(d2X1))
    gram = float(np.linalg.det(pt.T @ pt))

    dty = -np.linalg.solve(M11, M12)
    Y0p = np.vstack([dty[N:, :], np.eye(N)])

    w0 = float(np.asarray(family.weight_w(x0, y0)))
    b0 = float(np.asarray(family.weight_b(x0, y0)))

    residuals = {
        "U_orthogonality": float(np.max(np.abs(U.T @ U - np.eye(n)))),
        "R_orthogonality": float(np.max(np.abs(R @ R.T - np.eye(n)))),
        "psi_phi_y": float(np.max(np.abs(ga @ A_y - np.eye(n)[0]))),
        "dpsi_direction": float(np.max(np.abs(ga[1:]))) if n > 1 else 0.0,
        "phi_t_normal": float(np.max(np.abs(A_t[:m, :]))),
        "phi_split": float(np.max(np.abs(A_y[:m, m:]))),
        "tangency_Y0p_first": float(np.max(np.abs(Y0p[0]))),
        "det_C_identity": float(
            abs(np.linalg.det(C) * np.linalg.det(M11) - np.linalg.det(M)) / max(1e-300, abs(np.linalg.det(M)))
        ),
        "dsf_identity": float(np.max(np.abs(psi_tt - gan * phi_t2.T @ dsf @ phi_t2))),
    }
    return AdaptedFrame(
        n=n,
        N=N,
        pair=pair,
        U=U,
        x_rotation=R,
        psi_scale=float(psi_scale),
        flipped=sigma < 0,
        theta_adapted=np.eye(n)[0],
        theta_original=U[:, 0].copy(),
        M=M,
        C=C,
        Q=Q,
        psi_tt=psi_tt,
        dsf=dsf,
        dX1_dy1=dX1_dy1,
        d2X1=d2X1,
        chi=float(chi),
        dY1_dx1=1.0 / dX1_dy1,
        gram_sigma_det=gram,
        Y0_prime=Y0p,
        w0=w0,
        b0=b0,
        family=fa,
        surface=sa,
        residuals=residuals,
        singular_values=sv,
    )


# ---------------------------------------------------------------------------
# three routes to Q


@dataclass(frozen=True)
class QRoute:
    value: float  # |det Q|^(1/2)
    Q_estimate: np.ndarray | None
    Q_block: np.ndarray
    sqrt_abs_det_block: float

    @property
    def rel_error(self) -> float:
        return abs(self.value - self.sqrt_abs_det_block) / self.sqrt_abs_det_block


def q_via_x1(frame: AdaptedFrame) -> QRoute:
    """``|det Q|^(1/2)`` from the derivatives of the curve graph function ``X1``."""
    N = frame.N
    val = abs(frame.dX1_dy1**N * np.linalg.det(frame.dsf)) ** -0.5 * abs(np.linalg.det(frame.d2X1))
    est = None
    if N == 1:
        est = np.array([[math.copysign(val**2, frame.dsf[0, 0])]])
    block = math.sqrt(abs(np.linalg.det(frame.Q)))
    return QRoute(float(val), est, frame.Q, block)


def solve_t_star(family: GrtFamily, surface: InterfaceSurface, y, t_seed=None, radius: float = 1.0):
    """Stationary point ``t*`` of ``t -> psi(phi(t, y))`` and ``P(y) = psi(phi(t*, y))``.

    ``y`` may be a single point or a batch ``(m, n)``.
    """
    y = np.asarray(y, float)
    single = y.ndim == 1
    yb = np.atleast_2d(y)
    N = family.N
    t0 = np.zeros((yb.shape[0], N)) if t_seed is None else np.broadcast_to(np.asarray(t_seed, float), (yb.shape[0], N)).copy()

    def fun_jac(t):
        return psi_phi_t(family, surface, t, yb), psi_phi_tt(family, surface, t, yb)

    t, _ = _batch_newton(fun_jac, t0)
    if np.any(np.linalg.norm(t - t0, axis=-1) > radius):
        raise OutOfChart("stationary point left the chart")
    P = surface.psi(family.phi(t, yb))
    if single:
        return t[0], float(P[0])
    return t, P


def solve_T_x(family: GrtFamily, x, yt, seed=None, return_t=False):
    """Points ``Y(yt, x)`` of the data set whose curves pass through ``x``.

    Works in adapted coordinates: the last ``N`` data coordinates are fixed
    to ``yt`` and ``(t, y_hat)`` are solved for. ``x`` and ``yt`` broadcast
    against each other along a leading batch axis.
    """
    n, N = family.n, family.N
    m = n - N
    x = np.asarray(x, float)
    yt = np.asarray(yt, float)
    single = x.ndim == 1 and yt.ndim == 1
    xb = np.atleast_2d(x)
    ytb = np.atleast_2d(yt)
    B = max(xb.shape[0], ytb.shape[0])
    xb = np.broadcast_to(xb, (B, n))
    ytb = np.broadcast_to(ytb, (B, N))
    z0 = np.zeros((B, n)) if seed is None else np.broadcast_to(np.asarray(seed, float), (B, n)).copy()

    def fun_jac(z):
        t = z[:, :N]
        y = np.concatenate([z[:, N:], ytb], axis=1)
        F = family.phi(t, y) - xb
        J = np.concatenate([family.phi_t(t, y), family.phi_y(t, y)[:, :, :m]], axis=2)
        return F, J

    try:
        z, _ = _batch_newton(fun_jac, z0)
    except SingularJacobian as exc:
        raise SplitInvalid(str(exc)) from exc
    Y = np.concatenate([z[:, N:], ytb], axis=1)
    t = z[:, :N]
    if single:
        Y, t = Y[0], t[0]
    return (Y, t) if return_t else Y


def gram_T(family: GrtFamily, t, Y):
    """``(det G^T)^(1/2)`` of the data set ``T_x`` parametrised by ``yt`` (batched)."""
    n, N = family.n, family.N
    m = n - N
    t = np.atleast_2d(t)
    Y = np.atleast_2d(Y)
    py = family.phi_y(t, Y)
    M11 = np.concatenate([family.phi_t(t, Y), py[:, :, :m]], axis=2)
    dz = -np.linalg.solve(M11, py[:, :, m:])
    dY = np.concatenate([dz[:, N:, :], np.broadcast_to(np.eye(N), (t.shape[0], N, N))], axis=1)
    G = np.einsum("bka,bkc->bac", dY, dY)
    return np.sqrt(np.linalg.det(G))


def P_along_T0(frame: AdaptedFrame, yt):
    """``P(Y0(yt))`` for a batch of transverse coordinates."""
    yt = np.atleast_2d(np.asarray(yt, float))
    Y = solve_T_x(frame.family, np.zeros(frame.n), yt)
    _, P = solve_t_star(frame.family, frame.surface, Y)
    return P


def q_via_hessian(frame: AdaptedFrame, h: float = 1e-4) -> QRoute:
    """``Q`` as minus the Hessian of ``P(Y0(yt))`` by central differences."""
    N = frame.N

    def hessian(step):
        pts = [np.zeros(N)]
        E = np.eye(N) * step
        for i in range(N):
            pts += [E[i], -E[i]]
        for i in range(N):
            for j in range(i + 1, N):
                pts += [E[i] + E[j], E[i] - E[j], -E[i] + E[j], -E[i] - E[j]]
        vals = P_along_T0(frame, np.array(pts))
        Hm = np.zeros((N, N))
        f0 = vals[0]
        for i in range(N):
            Hm[i, i] = (vals[1 + 2 * i] - 2 * f0 + vals[2 + 2 * i]) / step**2
        k = 1 + 2 * N
        for i in range(N):
            for j in range(i + 1, N):
                fpp, fpm, fmp, fmm = vals[k : k + 4]
                Hm[i, j] = Hm[j, i] = (fpp - fpm - fmp + fmm) / (4 * step**2)
                k += 4
        return Hm

    H1 = hessian(h)
    H2 = hessian(2 * h)
    err = float(np.max(np.abs(H1 - H2))) / 3.0
    if err > 1e-4 * max(1.0, float(np.max(np.abs(H1)))):
        raise StepTooLarge(f"Hessian truncation estimate {err:.3e} exceeds 1e-4")
    Qh = -0.5 * (H1 + H1.T)
    return QRoute(
        float(math.sqrt(abs(np.linalg.det(Qh)))),
        Qh,
        frame.Q,
        float(math.sqrt(abs(np.linalg.det(frame.Q)))),
    )


# ---------------------------------------------------------------------------
# genericity


@dataclass(frozen=True)
class GenericityReport:
    condition1_pass: bool
    witness: list | None
    search_bound: int
    condition2_pass: bool
    dsf_eigenvalues: list
    definiteness_sign: str
    min_residual: float
    direction: list

    @property
    def generic(self) -> bool:
        return self.condition1_pass and self.condition2_pass

    @property
    def verdict(self) -> str:
        if not self.condition1_pass:
            return f"NOT generic (m={tuple(self.witness)})"
        if not self.condition2_pass:
            return "NOT generic (curvature difference indefinite)"
        return f"generic up to search bound {self.search_bound}"

    def to_dict(self) -> dict:
        return {
            "condition1_pass": self.condition1_pass,
            "witness": self.witness,
            "search_bound": self.search_bound,
            "condition2_pass": self.condition2_pass,
            "dsf_eigenvalues": self.dsf_eigenvalues,
            "definiteness_sign": self.definiteness_sign,
            "min_residual": self.min_residual,
            "direction": self.direction,
            "verdict": self.verdict,
        }


def _normalise_witness(m):
    m = [int(v) for v in m]
    for v in m:
        if v != 0:
            return m if v > 0 else [-u for u in m]
    return m


def _convergents(x: float, bound: int):
    """Continued-fraction convergents ``(p, q)`` of ``x`` with ``q <= bound``."""
    a = math.floor(x)
    p_prev, p = 1, a
    q_prev, q = 0, 1
    yield p, q
    frac = x - a
    for _ in range(64):
        if frac < 1e-15:
            return
        x = 1.0 / frac
        a = math.floor(x)
        frac = x - a
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        if q > bound:
            return
        yield p, q


def check_genericity(frame: AdaptedFrame, D=None, search_bound: int = 10**4, tol: float = 1e-9) -> GenericityReport:
    n, N = frame.n, frame.N
    D = np.eye(n) if D is None else np.asarray(D, float)
    if abs(np.linalg.det(D) - 1.0) > 1e-12:
        raise ValueError("sampling matrix must have unit determinant")
    tangent = frame.U @ frame.Y0_prime  # columns span T_x0 in original coordinates
    V = np.linalg.solve(D, tangent)  # m^T V = 0 is the annihilation condition
    V = V / np.linalg.norm(V, axis=0)

    witness = None
    best = math.inf
    if n == 2 and N == 1:
        v = V[:, 0]
        if abs(v[0]) < tol:
            witness, best = [1, 0], abs(v[0])
        elif abs(v[1]) < tol:
            witness, best = [0, 1], abs(v[1])
        else:
            ratio = -v[1] / v[0]  # m = (p, q) with p/q = ratio
            for p, q in _convergents(ratio, search_bound):
                if abs(p) > search_bound:
                    break
                mvec = np.array([p, q], float)
                res = abs(mvec @ v) / np.linalg.norm(mvec)
                best = min(best, res)
                if res < tol:
                    witness = [p, q]
                    break
    else:
        bound = search_bound
        while (2 * bound + 1) ** n > 2_000_000:
            bound //= 2
        search_bound = bound
        grids = np.meshgrid(*[np.arange(-bound, bound + 1)] * n, indexing="ij")
        ms = np.stack([g.ravel() for g in grids], axis=1)
        ms = ms[np.any(ms != 0, axis=1)]
        res = np.linalg.norm(ms @ V, axis=1) / np.linalg.norm(ms, axis=1)
        k = int(np.argmin(res))
        best = float(res[k])
        if best < tol:
            witness = ms[k].tolist()
    cond1 = witness is None
    if witness is not None:
        witness = _normalise_witness(witness)

    eig = frame.dsf_eigenvalues
    scale = max(1.0, float(np.max(np.abs(eig))))
    if np.all(eig < -1e-12 * scale):
        sign = "negative"
    elif np.all(eig > 1e-12 * scale):
        sign = "positive"
    else:
        sign = "indefinite"
    return GenericityReport(
        condition1_pass=cond1,
        witness=witness,
        search_bound=int(search_bound),
        condition2_pass=sign != "indefinite",
        dsf_eigenvalues=[float(e) for e in eig],
        definiteness_sign=sign,
        min_residual=float(best),
        direction=V[:, 0].tolist(),
    )


def geometry_report(frame: AdaptedFrame, genericity: GenericityReport | None = None) -> dict:
    out = {"frame": frame.to_dict()}
    qx = q_via_x1(frame)
    out["q_routes"] = {
        "block": frame.Q.tolist(),
        "x1_sqrt_abs_det": qx.value,
        "block_sqrt_abs_det": qx.sqrt_abs_det_block,
    }
    try:
        qh = q_via_hessian(frame)
        out["q_routes"]["hessian"] = qh.Q_estimate.tolist()
    except Exception as exc:  # report, do not fail the document
        out["q_routes"]["hessian_error"] = str(exc)
    if genericity is not None:
        out["genericity"] = genericity.to_dict()
    return out
