"""Hot loops with a numba backend and a pure-numpy fallback.

Set ``ARTIFACT_DISABLE_NUMBA=1`` to force the numpy path. Both paths are
kept numerically identical up to rounding; tests run them against each
other.
"""

from __future__ import annotations

import math
import os

import numpy as np

# profile codes shared by both backends
BOX, LINEAR, KEYS, BSPLINE2, TABLE = 0, 1, 2, 3, 4

_DISABLE = os.environ.get("ARTIFACT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:  # pragma: no cover - import guard
    if _DISABLE:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations


def profile_np(code: int, u, tab_u=None, tab_v=None):
    u = np.asarray(u, float)
    a = np.abs(u)
    if code == BOX:
        return ((u >= -0.5) & (u < 0.5)).astype(float)
    if code == LINEAR:
        return np.maximum(1.0 - a, 0.0)
    if code == KEYS:
        inner = 1.5 * a**3 - 2.5 * a**2 + 1.0
        outer = -0.5 * a**3 + 2.5 * a**2 - 4.0 * a + 2.0
        return np.where(a <= 1.0, inner, np.where(a < 2.0, outer, 0.0))
    if code == BSPLINE2:
        inner = 0.75 - a**2
        outer = 0.5 * (a - 1.5) ** 2
        return np.where(a <= 0.5, inner, np.where(a < 1.5, outer, 0.0))
    if code == TABLE:
        return np.interp(u, tab_u, tab_v, left=0.0, right=0.0)
    raise ValueError(f"unknown profile code {code}")


def interp_lattice_2d_np(values, u, code, radius, tab_u, tab_v, zero_outside):
    """``sum_j phi(u - j) values[j]`` for index coordinates ``u`` of shape ``(M, 2)``."""
    m0, m1 = values.shape
    u0, u1 = u[:, 0], u[:, 1]
    a_lo = np.floor(u0 - radius).astype(np.int64)
    b_lo = np.floor(u1 - radius).astype(np.int64)
    width = int(math.ceil(2 * radius)) + 1
    out = np.zeros(u.shape[0], complex)
    bad = np.zeros(u.shape[0], bool)
    wb = [profile_np(code, u1 - (b_lo + db), tab_u, tab_v) for db in range(width)]
    for da in range(width):
        a = a_lo + da
        wa = profile_np(code, u0 - a, tab_u, tab_v)
        ina = (a >= 0) & (a < m0)
        for db in range(width):
            b = b_lo + db
            w = wa * wb[db]
            inside = ina & (b >= 0) & (b < m1)
            bad |= (~inside) & (w != 0)
            ai = np.clip(a, 0, m0 - 1)
            bi = np.clip(b, 0, m1 - 1)
            out += np.where(inside, w * values[ai, bi], 0.0)
    nbad = int(bad.sum()) if not zero_outside else 0
    return out, nbad


def _keys_weights_np(f):
    # taps at offsets -1, 0, 1, 2 relative to floor
    return [
        profile_np(KEYS, f + 1.0),
        profile_np(KEYS, f),
        profile_np(KEYS, f - 1.0),
        profile_np(KEYS, f - 2.0),
    ]


def sample_lines_np(lines, start, step, pos):
    """Keys cubic sampling of ``lines[k]`` (uniform in y1) at ``pos[x, k]``."""
    K, M = lines.shape
    s = (pos - start) / step
    i = np.floor(s).astype(np.int64)
    f = s - i
    w = _keys_weights_np(f)
    out = np.zeros(pos.shape, complex)
    kk = np.broadcast_to(np.arange(K), pos.shape)
    for tap, off in enumerate((-1, 0, 1, 2)):
        idx = i + off
        ok = (idx >= 0) & (idx < M)
        out += np.where(ok, w[tap] * lines[kk, np.clip(idx, 0, M - 1)], 0.0)
    return out


# ---------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=False)
    def _profile_nb(code, u, tab_u, tab_v):
        a = abs(u)
        if code == 0:
            return 1.0 if (u >= -0.5 and u < 0.5) else 0.0
        if code == 1:
            return 1.0 - a if a < 1.0 else 0.0
        if code == 2:
            if a <= 1.0:
                return 1.5 * a**3 - 2.5 * a**2 + 1.0
            if a < 2.0:
                return -0.5 * a**3 + 2.5 * a**2 - 4.0 * a + 2.0
            return 0.0
        if code == 3:
            if a <= 0.5:
                return 0.75 - a * a
            if a < 1.5:
                return 0.5 * (a - 1.5) ** 2
            return 0.0
        # tabulated profile, linear interpolation, zero outside
        n = tab_u.shape[0]
        if u < tab_u[0] or u > tab_u[n - 1]:
            return 0.0
        lo, hi = 0, n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tab_u[mid] <= u:
                lo = mid
            else:
                hi = mid
        du = tab_u[hi] - tab_u[lo]
        if du <= 0.0:
            return tab_v[lo]
        r = (u - tab_u[lo]) / du
        return tab_v[lo] * (1.0 - r) + tab_v[hi] * r

    @numba.njit(cache=True)
    def _interp_lattice_2d_nb(values, u, code, radius, tab_u, tab_v, zero_outside):
        m0, m1 = values.shape
        M = u.shape[0]
        out = np.zeros(M, np.complex128)
        width = int(math.ceil(2 * radius)) + 1
        nbad = 0
        wb = np.empty(width)
        for p in range(M):
            u0 = u[p, 0]
            u1 = u[p, 1]
            a_lo = int(math.floor(u0 - radius))
            b_lo = int(math.floor(u1 - radius))
            for db in range(width):
                wb[db] = _profile_nb(code, u1 - (b_lo + db), tab_u, tab_v)
            acc = 0.0 + 0.0j
            bad = False
            for da in range(width):
                a = a_lo + da
                wa = _profile_nb(code, u0 - a, tab_u, tab_v)
                if wa == 0.0:
                    continue
                for db in range(width):
                    w = wa * wb[db]
                    if w == 0.0:
                        continue
                    b = b_lo + db
                    if a < 0 or a >= m0 or b < 0 or b >= m1:
                        bad = True
                        continue
                    acc += w * values[a, b]
            out[p] = acc
            if bad and not zero_outside:
                nbad += 1
        return out, nbad

    @numba.njit(cache=True)
    def _sample_lines_nb(lines, start, step, pos):
        K, M = lines.shape
        X = pos.shape[0]
        out = np.zeros((X, K), np.complex128)
        e = np.empty(0)
        for x in range(X):
            for k in range(K):
                s = (pos[x, k] - start) / step
                i = int(math.floor(s))
                f = s - i
                acc = 0.0 + 0.0j
                for off in range(-1, 3):
                    idx = i + off
                    if idx < 0 or idx >= M:
                        continue
                    acc += _profile_nb(2, f - off, e, e) * lines[k, idx]
                out[x, k] = acc
        return out


def interp_lattice_2d(values, u, code, radius, tab_u=None, tab_v=None, zero_outside=False):
    values = np.ascontiguousarray(values, np.complex128)
    u = np.ascontiguousarray(u, np.float64).reshape(-1, 2)
    tab_u = np.zeros(1) if tab_u is None else np.ascontiguousarray(tab_u, np.float64)
    tab_v = np.zeros(1) if tab_v is None else np.ascontiguousarray(tab_v, np.float64)
    if HAVE_NUMBA:
        return _interp_lattice_2d_nb(values, u, int(code), float(radius), tab_u, tab_v, bool(zero_outside))
    return interp_lattice_2d_np(values, u, int(code), float(radius), tab_u, tab_v, bool(zero_outside))


def sample_lines(lines, start, step, pos):
    lines = np.ascontiguousarray(lines, np.complex128)
    pos = np.ascontiguousarray(pos, np.float64)
    if HAVE_NUMBA:
        return _sample_lines_nb(lines, float(start), float(step), pos)
    return sample_lines_np(lines, float(start), float(step), pos)
