"""Small dense numerical kernels: matrix exponential and adaptive quadrature."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

# Higham (2005) Pade coefficients and 1-norm thresholds.
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade(a: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE_COEFFS[m]
    ident = np.eye(a.shape[0])
    a2 = a @ a
    if m < 13:
        powers = [ident, a2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ a2)
        u = sum(b[2 * j + 1] * powers[j] for j in range(m // 2 + 1))
        v = sum(b[2 * j] * powers[j] for j in range(m // 2 + 1))
        return a @ u, v
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    return u, v


def matrix_exponential(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Return ``exp(m * t)`` by scaling and squaring with Pade approximants.

    Degrees 3 to 9 are used when the 1-norm is small enough; otherwise the
    matrix is scaled by a power of two below the degree-13 threshold,
    exponentiated, and squared back.
    """
    a = np.array(m, dtype=float, ndmin=2) * float(t)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix exponential requires finite entries")
    n = a.shape[0]
    norm1 = np.linalg.norm(a, 1) if n else 0.0
    if norm1 == 0.0:
        return np.eye(n)

    for degree in (3, 5, 7, 9):
        if norm1 <= _THETA[degree]:
            u, v = _pade(a, degree)
            return np.linalg.solve(v - u, v + u)

    s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13]))))
    u, v = _pade(a / 2.0**s, 13)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def adaptive_simpson(
    f: Callable[[float], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-8,
    atol: float = 0.0,
    min_depth: int = 4,
    max_depth: int = 40,
) -> np.ndarray:
    """Integrate a scalar- or array-valued ``f`` over ``[a, b]``.

    Panels are split until the Simpson error estimate (difference between
    one panel and its two halves, divided by 15) falls under the panel's
    share of ``max(atol, rtol * |I|)``, where ``|I|`` is the max-norm of a
    coarse estimate of the whole integral.  Accepted panels get the usual
    Richardson correction.
    """
    a = float(a)
    b = float(b)
    if b == a:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    if b < a:
        return -adaptive_simpson(f, b, a, rtol, atol, min_depth, max_depth)

    # Coarse composite Simpson estimate fixes the absolute scale.
    grid = np.linspace(a, b, 17)
    vals = [np.asarray(f(x), dtype=float) for x in grid]
    h = (b - a) / 16
    coarse = h / 3 * (vals[0] + vals[-1] + 4 * sum(vals[1:-1:2]) + 2 * sum(vals[2:-1:2]))
    tol = max(atol, rtol * float(np.max(np.abs(coarse))))
    if tol == 0.0:
        tol = np.finfo(float).tiny

    total = np.zeros_like(coarse)
    # Seed with the 8 coarse Simpson panels (depth 3 in the bisection tree).
    stack = []
    for i in range(8):
        lo, hi = grid[2 * i], grid[2 * i + 2]
        fa, fm, fb = vals[2 * i], vals[2 * i + 1], vals[2 * i + 2]
        whole = (hi - lo) / 6 * (fa + 4 * fm + fb)
        stack.append((lo, hi, fa, fm, fb, whole, tol / 8, 3))

    while stack:
        lo, hi, fa, fm, fb, whole, ptol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = np.asarray(f(lm), dtype=float)
        frm = np.asarray(f(rm), dtype=float)
        left = (mid - lo) / 6 * (fa + 4 * flm + fm)
        right = (hi - mid) / 6 * (fm + 4 * frm + fb)
        err = float(np.max(np.abs(left + right - whole)))
        if depth >= max_depth or (depth >= min_depth and err <= 15 * ptol):
            total = total + left + right + (left + right - whole) / 15
        else:
            stack.append((lo, mid, fa, flm, fm, left, ptol / 2, depth + 1))
            stack.append((mid, hi, fm, frm, fb, right, ptol / 2, depth + 1))
    return total


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric positive semi-definite square root (negative eigenvalues clipped)."""
    sym = 0.5 * (np.asarray(m, dtype=float) + np.asarray(m, dtype=float).T)
    w, v = np.linalg.eigh(sym)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)
