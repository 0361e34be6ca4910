"""Spectral abscissa/radius and their worst-case growth under matrix perturbations.

For a square matrix A and eps > 0 the perturbed quantities are

    sup { Re z  : sigma_min(z I - A) <= eps }   (abscissa)
    sup { |z|   : sigma_min(z I - A) <= eps }   (radius)

computed by a coarse grid over a window certified to contain the sublevel
set, followed by one-dimensional ray bisection on sigma_min = eps and a
local golden-section polish of the ray parameter.  The perturbation norm is
the operator 2-norm over complex perturbations; the minimal boundary
perturbation is rank one, so the Frobenius ball gives the same values.

The grid-plus-rays approach trades speed for being simple to cross-check
against dense sampling; matrices here are desk-scale (n <= 20 or so).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .regularize import RadiusSpec, RobustProfile

__all__ = [
    "PseudospectrumQuery",
    "PseudospectrumResult",
    "WindowError",
    "spectral_abscissa",
    "spectral_radius",
    "sigma_min_resolvent",
    "pseudospectral_abscissa",
    "pseudospectral_radius",
    "pseudospectral_value",
    "spectral_epsilon_profile",
]


class WindowError(RuntimeError):
    """The sublevel set still touches the window after auto-expansion."""


def _as_square(A) -> np.ndarray:
    M = np.asarray(A)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    return M.astype(complex) if np.iscomplexobj(M) else M.astype(float)


def spectral_abscissa(A) -> float:
    """Largest real part of the eigenvalues (diagonal matrices handled exactly)."""
    M = _as_square(A)
    off = M - np.diag(np.diagonal(M))
    if not np.any(off):
        return float(np.max(np.real(np.diagonal(M))))
    return float(np.max(np.linalg.eigvals(M).real))


def spectral_radius(A) -> float:
    """Largest eigenvalue modulus (diagonal matrices handled exactly)."""
    M = _as_square(A)
    off = M - np.diag(np.diagonal(M))
    if not np.any(off):
        return float(np.max(np.abs(np.diagonal(M))))
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def sigma_min_resolvent(A, z: complex) -> float:
    """Smallest singular value of z I - A."""
    M = _as_square(A)
    return float(np.linalg.svd(z * np.eye(M.shape[0]) - M, compute_uv=False)[-1])


def _sigma_min_many(A: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """sigma_min(z I - A) for an array of z, vectorized.

    The 2-by-2 case uses the closed form sigma_min = |det| / sigma_max with
    sigma_max^2 = T/2 + sqrt(T^2/4 - D), which avoids cancellation when the
    singular values are far apart.
    """
    Z = np.asarray(Z, dtype=complex)
    n = A.shape[0]
    if n == 2:
        a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
        m00 = Z - a
        m11 = Z - d
        det = m00 * m11 - b * c
        T = np.abs(m00) ** 2 + np.abs(m11) ** 2 + abs(b) ** 2 + abs(c) ** 2
        D = np.abs(det) ** 2
        disc = np.maximum(T * T / 4.0 - D, 0.0)
        smax_sq = T / 2.0 + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(smax_sq > 0, np.abs(det) / np.sqrt(smax_sq), 0.0)
        return out
    stack = Z[..., None, None] * np.eye(n) - A
    return np.linalg.svd(stack, compute_uv=False)[..., -1]


@dataclass
class PseudospectrumQuery:
    matrix: np.ndarray
    eps: float
    quantity: str = "abscissa"  # or "radius"
    resolution: int = 257
    refine_tol: float = 1e-10
    window: Optional[tuple] = None  # (re_lo, re_hi, im_lo, im_hi)

    def __post_init__(self):
        self.matrix = _as_square(self.matrix)
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.quantity not in ("abscissa", "radius"):
            raise ValueError("quantity must be 'abscissa' or 'radius'")
        if self.resolution < 32:
            raise ValueError("resolution must be at least 32 points per axis")
        if self.resolution % 2 == 0:
            self.resolution += 1  # keep the window midlines on the grid


@dataclass
class PseudospectrumResult:
    value: float
    z_star: complex
    grid_evaluations: int
    sigma_at_z: float


def _window_margin(A: np.ndarray, eigs: np.ndarray, eps: float) -> float:
    """Margin m so that every z with sigma_min(zI-A) <= eps lies within m of an eigenvalue.

    From |det(zI-A)| <= sigma_min * ||zI-A||^(n-1):
    dist(z, eigs)^n <= eps * (max|eig| + sigma_max(A) + dist)^(n-1),
    and the increasing concave fixed point of the right side bounds dist.
    """
    n = A.shape[0]
    if n == 1:
        return max(2.0 * eps, eps)
    smax = float(np.linalg.norm(A, 2))
    base = smax + float(np.max(np.abs(eigs))) if eigs.size else smax
    m = 0.0
    for _ in range(100):
        m_next = (eps * (base + m) ** (n - 1)) ** (1.0 / n)
        if abs(m_next - m) <= 1e-14 * (1.0 + m_next):
            m = m_next
            break
        m = m_next
    return max(2.0 * eps, 1.05 * m + 1e-300)


def _build_grid(eigs: np.ndarray, margin: float, resolution: int, window):
    if window is not None:
        re_lo, re_hi, im_lo, im_hi = window
    else:
        re_lo = float(np.min(eigs.real)) - margin
        re_hi = float(np.max(eigs.real)) + margin
        im_lo = float(np.min(eigs.imag)) - margin
        im_hi = float(np.max(eigs.imag)) + margin
    xs = np.linspace(re_lo, re_hi, resolution)
    ys = np.linspace(im_lo, im_hi, resolution)
    return xs, ys


class _SigmaCounter:
    def __init__(self, A: np.ndarray):
        self.A = A
        self.count = 0

    def many(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=complex)
        self.count += Z.size
        return _sigma_min_many(self.A, Z)

    def one(self, z: complex) -> float:
        self.count += 1
        return float(_sigma_min_many(self.A, np.array([z]))[0])


def _ray_crossing(sig: _SigmaCounter, eps: float, start: complex, direction: complex,
                  step: float, t_cap: float, tol: float) -> float:
    """Largest t with sigma(start + t*dir) = eps along the ray, by walk then bisection."""
    t_in = 0.0
    t = step
    while t <= t_cap:
        if sig.one(start + t * direction) <= eps:
            t_in = t
            t += step
        else:
            break
    else:
        return t_in  # capped; window soundness should prevent this
    lo, hi = t_in, min(t, t_cap)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sig.one(start + mid * direction) <= eps:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _golden_max_scalar(f, lo: float, hi: float, iters: int = 60):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, max(fc, fd)


def _grid_inside(sig: _SigmaCounter, xs, ys, eps):
    Z = xs[None, :] + 1j * ys[:, None]
    S = sig.many(Z)
    return S <= eps


def _check_window(inside: np.ndarray) -> bool:
    return bool(inside[0, :].any() or inside[-1, :].any()
                or inside[:, 0].any() or inside[:, -1].any())


def pseudospectral_abscissa(query: PseudospectrumQuery) -> PseudospectrumResult:
    """Worst-case spectral abscissa over perturbations of norm at most eps."""
    A = query.matrix
    eigs = np.linalg.eigvals(A)
    if query.eps == 0.0:
        k = int(np.argmax(eigs.real))
        return PseudospectrumResult(float(eigs.real[k]), complex(eigs[k]), 0, 0.0)
    sig = _SigmaCounter(A)
    eps = query.eps
    margin = _window_margin(A, eigs, eps)
    for attempt in range(2):
        xs, ys = _build_grid(eigs, margin, query.resolution, query.window)
        inside = _grid_inside(sig, xs, ys, eps)
        if not _check_window(inside):
            break
        if query.window is not None or attempt == 1:
            raise WindowError("sublevel set touches the window boundary")
        margin *= 3.0
    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    x_hi_cap = xs[-1] + margin

    def rightmost(y: float, hint: float) -> float:
        z0 = complex(hint, y)
        if sig.one(z0) <= eps:
            t = _ray_crossing(sig, eps, z0, 1.0 + 0j, dx, x_hi_cap - hint, query.refine_tol)
            return hint + t
        # walk left to find an inside seed
        x = hint
        for _ in range(400):
            x -= dx
            if x < xs[0] - margin:
                return -math.inf
            if sig.one(complex(x, y)) <= eps:
                t = _ray_crossing(sig, eps, complex(x, y), 1.0 + 0j, dx, x_hi_cap - x,
                                  query.refine_tol)
                return x + t
        return -math.inf

    # candidate rows: sublevel grid rows competitive with the best, plus
    # eigenvalue rows (which keep tiny eps sublevel sets visible)
    grid_rows = []
    for j in range(len(ys)):
        hits = np.flatnonzero(inside[j])
        if hits.size:
            grid_rows.append((float(xs[hits[-1]]), float(ys[j]), int(hits[-1])))
    refined = []
    if grid_rows:
        x_best_grid = max(r[0] for r in grid_rows)
        keep = [r for r in grid_rows if r[0] >= x_best_grid - 3.0 * dx]
        keep.sort(key=lambda r: r[0], reverse=True)
        for x_in, y, col in keep[:16]:
            # the next grid point to the right is outside, so bisect one cell
            hi = xs[col + 1] if col + 1 < len(xs) else x_in + dx
            lo, hb = x_in, hi
            while hb - lo > query.refine_tol:
                mid = 0.5 * (lo + hb)
                if sig.one(complex(mid, y)) <= eps:
                    lo = mid
                else:
                    hb = mid
            refined.append((0.5 * (lo + hb), y))
    for lam in eigs:
        refined.append((rightmost(float(lam.imag), float(lam.real)), float(lam.imag)))
    refined.sort(key=lambda p: p[0], reverse=True)
    best_x, best_y = refined[0]
    for hint_x, y0 in refined[:2]:
        if not math.isfinite(hint_x):
            continue

        def phi(y: float) -> float:
            return rightmost(y, hint_x)

        y_star, x_star = _golden_max_scalar(phi, y0 - dy, y0 + dy, iters=30)
        if x_star > best_x:
            best_x, best_y = x_star, y_star
    z_star = complex(best_x, best_y)
    return PseudospectrumResult(best_x, z_star, sig.count, sig.one(z_star))


def pseudospectral_radius(query: PseudospectrumQuery) -> PseudospectrumResult:
    """Worst-case spectral radius over perturbations of norm at most eps."""
    A = query.matrix
    eigs = np.linalg.eigvals(A)
    if query.eps == 0.0:
        k = int(np.argmax(np.abs(eigs)))
        return PseudospectrumResult(float(np.abs(eigs[k])), complex(eigs[k]), 0, 0.0)
    sig = _SigmaCounter(A)
    eps = query.eps
    margin = _window_margin(A, eigs, eps)
    for attempt in range(2):
        xs, ys = _build_grid(eigs, margin, query.resolution, query.window)
        inside = _grid_inside(sig, xs, ys, eps)
        if not _check_window(inside):
            break
        if query.window is not None or attempt == 1:
            raise WindowError("sublevel set touches the window boundary")
        margin *= 3.0
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    step = max(dx, dy)
    t_cap = float(np.linalg.norm(A, 2)) + eps + step

    def outward(theta: float) -> float:
        d = cmath.exp(1j * theta)
        if sig.one(0j) <= eps:
            return _ray_crossing(sig, eps, 0j, d, step, t_cap, query.refine_tol)
        # seed from the innermost inside point along the ray
        ts = np.arange(step, t_cap, step)
        if ts.size == 0:
            return -math.inf
        vals = sig.many(ts * d)
        hits = np.flatnonzero(vals <= eps)
        if hits.size == 0:
            return -math.inf
        t0 = float(ts[hits[-1]])
        extra = _ray_crossing(sig, eps, t0 * d, d, step, t_cap - t0, query.refine_tol)
        return t0 + extra

    angles = []
    Zin = (xs[None, :] + 1j * ys[:, None])[inside]
    if Zin.size:
        order = np.argsort(np.abs(Zin))[::-1][:5]
        angles.extend(float(np.angle(z)) for z in Zin[order])
    for lam in eigs:
        angles.append(float(np.angle(lam)) if abs(lam) > 0 else 0.0)
    best_t, best_theta = -math.inf, 0.0
    for theta in angles:
        t = outward(theta)
        if t > best_t:
            best_t, best_theta = t, theta
    span = 2.0 * step / max(best_t, step)

    def rho(theta: float) -> float:
        return outward(theta)

    theta_star, t_star = _golden_max_scalar(rho, best_theta - span, best_theta + span, iters=40)
    if t_star < best_t:
        theta_star, t_star = best_theta, best_t
    z_star = t_star * cmath.exp(1j * theta_star)
    return PseudospectrumResult(t_star, z_star, sig.count, sig.one(z_star))


def pseudospectral_value(A, eps: float, quantity: str = "abscissa",
                         resolution: int = 257, refine_tol: float = 1e-10) -> PseudospectrumResult:
    query = PseudospectrumQuery(A, eps, quantity, resolution, refine_tol)
    if quantity == "abscissa":
        return pseudospectral_abscissa(query)
    return pseudospectral_radius(query)


def spectral_epsilon_profile(A, grid: RadiusSpec, quantity: str = "abscissa",
                             resolution: int = 257) -> RobustProfile:
    """Radius profile of the perturbed spectral quantity; nondecreasing in eps."""
    M = _as_square(A)
    values = np.array([
        pseudospectral_value(M, eps, quantity, resolution).value for eps in grid.radii
    ])
    flags = tuple(
        f"nonmonotone@{i}"
        for i in range(1, len(values))
        if values[i] < values[i - 1] - 1e-10 * (1.0 + abs(values[i - 1]))
    )

    def evaluator(eps: float) -> float:
        return pseudospectral_value(M, eps, quantity, resolution).value

    return RobustProfile(
        x=np.asarray(M, dtype=float).reshape(-1) if not np.iscomplexobj(M) else M.reshape(-1),
        radii=np.array(grid.radii),
        values=values,
        methods=tuple("oracle" for _ in grid.radii),
        flags=flags,
        evaluator=evaluator,
    )
