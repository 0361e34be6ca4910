"""Worst-case value of a function over a radius-eps ball, f_eps(x) = sup f on B_eps(x) & X.

Structured models get exact oracles:

* quadratics and affine norms via an eigenbasis secular equation for the
  boundary multiplier (trust-region style, maximization direction),
* one-dimensional piecewise models via interval candidate enumeration with a
  dense scan plus golden-section refinement for interior maxima,
* spectral models via the pseudospectrum module.

Everything else falls back to a certified-sampling search that returns a
lower bound.  Radius profiles ``eps -> f_eps(x)`` keep a per-point method tag
and re-evaluation closure so modulus estimators can differentiate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .funcmodel import (
    AffineNormModel,
    BoxDomain,
    DomainModel,
    ExpressionModel,
    FullSpaceDomain,
    FunctionModel,
    Piecewise1DModel,
    QuadraticModel,
    SpectralAbscissaModel,
    SpectralRadiusModel,
    spawn_rng,
)

__all__ = [
    "RadiusSpec",
    "RobustProfile",
    "SearchConfig",
    "FeasibilitySearchError",
    "robust_value_quadratic",
    "robust_value_affine_norm",
    "robust_value_piecewise1d",
    "robust_value_search",
    "robust_value",
    "RobustEvaluator",
    "make_robust_evaluator",
    "epsilon_profile",
]


class FeasibilitySearchError(RuntimeError):
    """Search found no feasible point of the ball-domain intersection."""


@dataclass(frozen=True)
class RadiusSpec:
    """A single positive radius or a strictly increasing positive grid."""

    radii: tuple

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("radius grid must be a nonempty 1-d sequence")
        if np.any(r <= 0):
            raise ValueError("radii must be positive")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radius grid must be strictly increasing")
        object.__setattr__(self, "radii", tuple(float(v) for v in r))

    @classmethod
    def single(cls, eps: float) -> "RadiusSpec":
        return cls((float(eps),))

    @classmethod
    def grid(cls, radii: Sequence[float]) -> "RadiusSpec":
        return cls(tuple(float(v) for v in radii))


@dataclass
class RobustProfile:
    """Samples of eps -> worst-case value at a fixed base point."""

    x: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    methods: tuple
    flags: tuple = ()
    evaluator: Optional[Callable[[float], float]] = None

    def value_at(self, eps: float) -> float:
        hits = np.flatnonzero(np.isclose(self.radii, eps, rtol=1e-14, atol=0.0))
        if hits.size:
            return float(self.values[hits[0]])
        if self.evaluator is None:
            raise ValueError(f"profile has no value at eps={eps} and no evaluator")
        return float(self.evaluator(eps))


# ---------------------------------------------------------------------------
# quadratic oracle: maximize e'He + 2r'e over ||e|| <= eps in the eigenbasis

_SECULAR_ITERS = 200
_SECULAR_RTOL = 1e-12


def _secular_nu(lam: np.ndarray, rt: np.ndarray, eps: float) -> float:
    """Multiplier nu > lam_max with ||(nu I - diag(lam))^-1 rt|| = eps.

    The norm is strictly decreasing in nu, so safeguarded bisection on
    (lam_max, lam_max + ||rt||/eps] always brackets the root.
    """
    lmax = float(lam.max())
    rnorm = float(np.linalg.norm(rt))
    lo = lmax
    hi = lmax + rnorm / eps + 1e-300
    for _ in range(_SECULAR_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lmax:
            break
        norm = float(np.linalg.norm(rt / (mid - lam)))
        if abs(norm - eps) <= _SECULAR_RTOL * eps:
            return mid
        if norm >= eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * max(1.0, abs(lmax)):
            break
    return 0.5 * (lo + hi)


def _ball_argmax_eigen(lam: np.ndarray, rt: np.ndarray, eps: float) -> np.ndarray:
    """Maximizer of sum(lam e^2 + 2 rt e) over ||e|| <= eps, eigenbasis coordinates."""
    lmax = float(lam.max())
    gap = 1e-12 * (1.0 + abs(lmax))
    top = lam >= lmax - gap
    rnorm = float(np.linalg.norm(rt))
    if np.linalg.norm(rt[top]) <= 1e-13 * (1.0 + rnorm):
        # top-eigenspace component of the linear term vanishes
        rest = ~top
        e = np.zeros_like(rt)
        if rest.any():
            e[rest] = rt[rest] / (lmax - lam[rest])
        nrest = float(np.linalg.norm(e))
        if nrest <= eps:
            # interior multiplier: spend the leftover radius along a top eigenvector
            slack = math.sqrt(max(eps * eps - nrest * nrest, 0.0))
            e[np.argmax(top)] += slack
            return e
        nu = _secular_nu(lam[rest], rt[rest], eps)
        e = np.zeros_like(rt)
        e[rest] = rt[rest] / (nu - lam[rest])
        return e
    nu = _secular_nu(lam, rt, eps)
    return rt / (nu - lam)


def _robust_quadratic_core(lam, Q, c, d, x, eps) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    r = Q.T @ ((Q * lam) @ (Q.T @ x) + c)  # H x + c in the eigenbasis
    e = _ball_argmax_eigen(lam, r, eps)
    y = x + Q @ e
    val = float(y @ (Q * lam) @ (Q.T @ y) + 2.0 * c @ y + d)
    center = float(x @ (Q * lam) @ (Q.T @ x) + 2.0 * c @ x + d)
    return max(val, center)  # the center is always a feasible candidate


def robust_value_quadratic(H, c, d, x, eps: float) -> float:
    """Exact max of x'Hx + 2c'x + d over the closed eps-ball at x; H must be PD."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    model = QuadraticModel(H, c, d)  # validates symmetry and definiteness
    lam, Q = model.eigendecomposition()
    return _robust_quadratic_core(lam, Q, model.c, model.d, x, eps)


def _psd_eigen(A: np.ndarray):
    H = A.T @ A
    lam, Q = np.linalg.eigh(0.5 * (H + H.T))
    return np.maximum(lam, 0.0), Q


def robust_value_affine_norm(A, b, x, eps: float) -> float:
    """Exact max of ||Ax + b|| over the closed eps-ball at x (A may be singular)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if A.ndim != 2 or A.shape[0] != b.shape[0] or A.shape[1] != x.shape[0]:
        raise ValueError("dimension mismatch between A, b, x")
    lam, Q = _psd_eigen(A)
    sq = _robust_quadratic_core(lam, Q, A.T @ b, float(b @ b), x, eps)
    return math.sqrt(max(sq, 0.0))


def _robust_quadratic_many(lam, Q, c, d, xs: np.ndarray, eps: float) -> np.ndarray:
    """Vectorized ball maxima for a batch of centers (shared H eigenbasis)."""
    X = np.asarray(xs, dtype=float)
    R = (X @ (Q * lam)) @ Q.T + c  # rows: H x + c
    RT = R @ Q
    lmax = float(lam.max())
    gap = 1e-12 * (1.0 + abs(lmax))
    top = lam >= lmax - gap
    rnorm = np.linalg.norm(RT, axis=1)
    hard = np.linalg.norm(RT[:, top], axis=1) <= 1e-13 * (1.0 + rnorm)
    out = np.empty(X.shape[0])
    easy = ~hard
    if easy.any():
        rt = RT[easy]
        lo = np.full(rt.shape[0], lmax)
        hi = lmax + rnorm[easy] / eps + 1e-300
        for _ in range(_SECULAR_ITERS):
            mid = 0.5 * (lo + hi)
            norm = np.linalg.norm(rt / (mid[:, None] - lam), axis=1)
            grow = norm >= eps
            lo = np.where(grow, mid, lo)
            hi = np.where(grow, hi, mid)
            if np.max(hi - lo) <= 1e-17 * max(1.0, abs(lmax)):
                break
        nu = 0.5 * (lo + hi)
        E = rt / (nu[:, None] - lam)
        Y = X[easy] + E @ Q.T
        out[easy] = np.einsum("ij,j,ij->i", Y @ Q, lam, Y @ Q) + 2.0 * Y @ c + d
    if hard.any():
        for i in np.flatnonzero(hard):
            e = _ball_argmax_eigen(lam, RT[i], eps)
            y = X[i] + Q @ e
            out[i] = float(y @ (Q * lam) @ (Q.T @ y) + 2.0 * c @ y + d)
    centers = np.einsum("ij,j,ij->i", X @ Q, lam, X @ Q) + 2.0 * X @ c + d
    return np.maximum(out, centers)


# ---------------------------------------------------------------------------
# one-dimensional piecewise oracle


def _golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Abscissa of the max of f on [lo, hi] by golden-section (unimodal bracket)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _domain_interval(domain: Optional[DomainModel]):
    if domain is None or isinstance(domain, FullSpaceDomain):
        return -math.inf, math.inf
    if isinstance(domain, BoxDomain) and domain.dimension == 1:
        return float(domain.lower[0]), float(domain.upper[0])
    raise ValueError("piecewise oracle supports full-line or 1-d box domains")


_SCAN_RESOLUTION = 1e-6
_SCAN_CAP = 2_000_000


def robust_value_piecewise1d(model: Piecewise1DModel, x: float, eps: float,
                             domain: Optional[DomainModel] = None,
                             scan_points: Optional[int] = None) -> float:
    """Exact max of a 1-d piecewise model over [x-eps, x+eps] clipped to the domain.

    Candidates are the interval endpoints, interior breakpoints, and interior
    critical points of each piece, located by a dense scan (resolution 1e-6,
    capped per piece) and sharpened by golden-section to width 1e-12.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    dlo, dhi = _domain_interval(domain)
    lo, hi = max(x - eps, dlo), min(x + eps, dhi)
    if lo > hi:
        raise ValueError(f"[{x - eps}, {x + eps}] does not meet the domain [{dlo}, {dhi}]")
    return float(_piecewise_interval_max(model, lo, hi, scan_points))


def _piecewise_interval_max(model: Piecewise1DModel, lo: float, hi: float,
                            scan_points: Optional[int]) -> float:
    def f(t: float) -> float:
        return model.eval(np.array([t]))

    cands = [lo, hi]
    cands.extend(bp for bp in model.breakpoints if lo < bp < hi)
    best = max(f(t) for t in cands)
    edges = [lo] + [bp for bp in model.breakpoints if lo < bp < hi] + [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 1e-15:
            continue
        if scan_points is None:
            m = int(min(max(math.ceil((b - a) / _SCAN_RESOLUTION), 32), _SCAN_CAP))
        else:
            m = max(int(scan_points), 8)
        ts = np.linspace(a, b, m)
        vals = model.eval_many(ts[:, None])
        k = int(np.argmax(vals))
        if vals[k] < best - 1e-15 * (1.0 + abs(best)):
            continue
        best = max(best, float(vals[k]))
        if 0 < k < m - 1:  # interior scan max: refine the bracket
            t_star = _golden_max(f, ts[k - 1], ts[k + 1])
            best = max(best, f(t_star))
    return best


def _robust_piecewise_many(model: Piecewise1DModel, xs: np.ndarray, eps: float,
                           domain: Optional[DomainModel], scan_points: int = 96) -> np.ndarray:
    """Batched interval maxima: candidate evaluation plus a coarse shared scan.

    Interval endpoints and interior breakpoints are candidates for every
    point; a scan grid covers interior maxima and triggers golden-section
    refinement only where it beats the candidates.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1)
    dlo, dhi = _domain_interval(domain)
    lo = np.maximum(xs - eps, dlo)
    hi = np.minimum(xs + eps, dhi)
    if np.any(lo > hi):
        bad = xs[lo > hi]
        raise ValueError(f"radius-{eps} interval misses the domain at x={bad[:3].tolist()}")
    vals = np.maximum(model.eval_many(lo[:, None]), model.eval_many(hi[:, None]))
    for bp in model.breakpoints:
        mask = (lo < bp) & (bp < hi)
        if mask.any():
            vals[mask] = np.maximum(vals[mask], model.eval(np.array([bp])))
    m = xs.shape[0]
    grid = np.linspace(0.0, 1.0, max(int(scan_points), 8))
    ts = lo[:, None] + (hi - lo)[:, None] * grid[None, :]
    fv = model.eval_many(ts.reshape(-1, 1)).reshape(m, -1)
    smax = fv.max(axis=1)
    improve = smax > vals + 1e-13 * (1.0 + np.abs(vals))
    vals = np.maximum(vals, smax)
    for i in np.flatnonzero(improve):
        k = int(fv[i].argmax())
        if 0 < k < fv.shape[1] - 1:
            t_star = _golden_max(lambda t: model.eval(np.array([t])), ts[i, k - 1], ts[i, k + 1])
            vals[i] = max(vals[i], model.eval(np.array([t_star])))
    return vals


# ---------------------------------------------------------------------------
# sampling search (lower bound)


@dataclass
class SearchConfig:
    n_samples: int = 10_000
    top_k: int = 8
    refine_rounds: int = 30
    refine_step: float = 0.25  # fraction of eps
    shrink: float = 0.7
    seed: int = 0
    matched_offsets: Optional[np.ndarray] = None  # unit-ball offsets to reuse

    def unit_offsets(self, dim: int) -> np.ndarray:
        if self.matched_offsets is not None:
            if self.matched_offsets.shape[1] != dim:
                raise ValueError("matched offsets have the wrong dimension")
            return self.matched_offsets
        from .funcmodel import _ball_offsets

        return _ball_offsets(dim, self.n_samples, self.seed)

    def with_matched_offsets(self, dim: int) -> "SearchConfig":
        """Freeze the offset draw so repeated calls share identical geometry."""
        if self.matched_offsets is not None:
            return self
        return replace(self, matched_offsets=self.unit_offsets(dim), refine_rounds=0)


def robust_value_search(model: FunctionModel, X: DomainModel, x, eps: float,
                        cfg: Optional[SearchConfig] = None) -> float:
    """Lower bound for the ball maximum by multistart sampling plus coordinate ascent.

    Deterministic for a fixed config seed; the base point itself is always a
    candidate, so the result is never below f(x).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cfg = cfg or SearchConfig()
    x = np.asarray(x, dtype=float).reshape(-1)
    if not X.contains(x, tol=1e-9):
        raise FeasibilitySearchError(f"base point {x.tolist()} is outside the domain")
    offsets = cfg.unit_offsets(x.shape[0])
    cand = x + eps * offsets
    keep = X.contains_many(cand)
    pts = np.vstack([x[None, :], cand[keep]])
    vals = model.eval_many(pts)
    if cfg.refine_rounds <= 0 or cfg.top_k <= 0:
        return float(vals.max())
    order = np.argsort(vals)[::-1][: cfg.top_k]
    best_overall = float(vals.max())
    n = x.shape[0]
    for start in pts[order]:
        p = start.copy()
        fp = float(model.eval(p))
        step = cfg.refine_step * eps
        for _ in range(cfg.refine_rounds):
            trials = np.repeat(p[None, :], 2 * n, axis=0)
            for j in range(n):
                trials[2 * j, j] += step
                trials[2 * j + 1, j] -= step
            trials = _project_ball_domain(trials, x, eps, X)
            if trials.size == 0:
                step *= cfg.shrink
                continue
            tvals = model.eval_many(trials)
            k = int(np.argmax(tvals))
            if tvals[k] > fp + 1e-15 * (1.0 + abs(fp)):
                p, fp = trials[k], float(tvals[k])
            else:
                step *= cfg.shrink
                if step < 1e-12 * eps:
                    break
        best_overall = max(best_overall, fp)
    return best_overall


def _project_ball_domain(pts: np.ndarray, center: np.ndarray, eps: float,
                         X: DomainModel) -> np.ndarray:
    out = []
    for p in pts:
        q = p
        for _ in range(4):
            gap = np.linalg.norm(q - center)
            if gap > eps:
                q = center + (q - center) * (eps / gap)
            if X.contains(q, tol=1e-9):
                break
            proj = X.project(q)
            if proj is None:
                q = None
                break
            q = proj
        if q is not None and X.contains(q, tol=1e-9) and np.linalg.norm(q - center) <= eps * (1 + 1e-9):
            out.append(q)
    return np.array(out) if out else np.empty((0, center.shape[0]))


# ---------------------------------------------------------------------------
# dispatch


def _oracle_kind(model: FunctionModel, X: DomainModel, x, eps: float) -> str:
    if isinstance(model, (SpectralAbscissaModel, SpectralRadiusModel)):
        return "oracle-pseudospectrum" if isinstance(X, FullSpaceDomain) else "search"
    if isinstance(model, QuadraticModel):
        return "oracle-quadratic" if X.ball_inside(x, eps) else "search"
    if isinstance(model, AffineNormModel):
        return "oracle-affine-norm" if X.ball_inside(x, eps) else "search"
    if isinstance(model, Piecewise1DModel):
        try:
            _domain_interval(X)
            return "oracle-interval"
        except ValueError:
            return "search"
    if isinstance(model, ExpressionModel) and model.dimension == 1:
        try:
            _domain_interval(X)
            return "oracle-interval"
        except ValueError:
            return "search"
    return "search"


def _as_piecewise(model: FunctionModel) -> Piecewise1DModel:
    if isinstance(model, Piecewise1DModel):
        return model
    return Piecewise1DModel(breakpoints=np.array([]), pieces=(model.tree,))


def robust_value(model: FunctionModel, X: DomainModel, x, eps: float,
                 cfg: Optional[SearchConfig] = None) -> tuple:
    """Worst-case value with the best applicable method; returns (value, method tag)."""
    kind = _oracle_kind(model, X, x, eps)
    x = np.asarray(x, dtype=float).reshape(-1)
    if kind == "oracle-quadratic":
        lam, Q = model.eigendecomposition()
        return _robust_quadratic_core(lam, Q, model.c, model.d, x, eps), "oracle"
    if kind == "oracle-affine-norm":
        return robust_value_affine_norm(model.A, model.b, x, eps), "oracle"
    if kind == "oracle-interval":
        return robust_value_piecewise1d(_as_piecewise(model), float(x[0]), eps, X), "oracle"
    if kind == "oracle-pseudospectrum":
        from . import pseudospec

        n = model.n
        A = x.reshape(n, n)
        quantity = "abscissa" if isinstance(model, SpectralAbscissaModel) else "radius"
        res = pseudospec.pseudospectral_value(A, eps, quantity)
        return res.value, "oracle"
    cfg = cfg or SearchConfig()
    return robust_value_search(model, X, x, eps, cfg), "search"


class RobustEvaluator:
    """x -> f_eps(x) as an evaluable function, vectorized where the model allows.

    Search-backed evaluation freezes one offset draw and reuses it at every
    point, so sampling error varies smoothly with the base point and
    difference quotients of the evaluator stay meaningful.
    """

    def __init__(self, model: FunctionModel, X: DomainModel, eps: float,
                 cfg: Optional[SearchConfig] = None):
        self.model = model
        self.X = X
        self.eps = float(eps)
        cfg = cfg or SearchConfig()
        self.kind = _oracle_kind(model, X, np.zeros(model.dimension), eps)
        if self.kind == "search":
            cfg = cfg.with_matched_offsets(model.dimension)
        self.cfg = cfg

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(self.eval_many(x[None, :])[0])

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.kind == "oracle-quadratic":
            lam, Q = self.model.eigendecomposition()
            return _robust_quadratic_many(lam, Q, self.model.c, self.model.d, pts, self.eps)
        if self.kind == "oracle-affine-norm":
            lam, Q = _psd_eigen(self.model.A)
            sq = _robust_quadratic_many(lam, Q, self.model.A.T @ self.model.b,
                                        float(self.model.b @ self.model.b), pts, self.eps)
            return np.sqrt(np.maximum(sq, 0.0))
        if self.kind == "oracle-interval":
            return _robust_piecewise_many(_as_piecewise(self.model), pts[:, 0], self.eps, self.X)
        if self.kind == "oracle-pseudospectrum":
            return np.array([robust_value(self.model, self.X, p, self.eps)[0] for p in pts])
        offsets = self.cfg.matched_offsets
        out = np.empty(pts.shape[0])
        chunk = max(1, int(2_000_000 // max(len(offsets), 1)))
        for i0 in range(0, pts.shape[0], chunk):
            block = pts[i0:i0 + chunk]
            cand = block[:, None, :] + self.eps * offsets[None, :, :]
            flat = cand.reshape(-1, pts.shape[1])
            keep = self.X.contains_many(flat)
            vals = np.full(flat.shape[0], -np.inf)
            if keep.any():
                vals[keep] = self.model.eval_many(flat[keep])
            vals = vals.reshape(block.shape[0], -1)
            base_ok = self.X.contains_many(block)
            base = np.where(base_ok, self.model.eval_many(block), -np.inf)
            out[i0:i0 + chunk] = np.maximum(vals.max(axis=1), base)
        if not np.all(np.isfinite(out)):
            raise FeasibilitySearchError("no feasible sample for some evaluation points")
        return out


def make_robust_evaluator(model: FunctionModel, X: DomainModel, eps: float,
                          cfg: Optional[SearchConfig] = None) -> RobustEvaluator:
    return RobustEvaluator(model, X, eps, cfg)


# ---------------------------------------------------------------------------
# radius profiles


def epsilon_profile(model: FunctionModel, X: DomainModel, x, grid: RadiusSpec,
                    cfg: Optional[SearchConfig] = None) -> RobustProfile:
    """Per-radius worst-case values with oracle dispatch and monotonicity flags.

    A decrease beyond tolerance between consecutive radii is flagged, never
    repaired; the smallest radius is checked against the value at the center.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    cfg = cfg or SearchConfig()
    if _oracle_kind(model, X, x, max(grid.radii)) == "search":
        cfg = cfg.with_matched_offsets(model.dimension)
    values = []
    methods = []
    for eps in grid.radii:
        v, m = robust_value(model, X, x, eps, cfg)
        values.append(v)
        methods.append(m)
    values = np.array(values)
    flags = []
    for i in range(1, len(values)):
        tol = 1e-10 * (1.0 + abs(values[i - 1])) if methods[i] == "oracle" else 2e-3 * (
            1.0 + abs(values[i - 1]))
        if values[i] < values[i - 1] - tol:
            flags.append(f"nonmonotone@{i}")
    try:
        f0 = model.eval(x)
        if values[0] < f0 - 1e-9 * (1.0 + abs(f0)):
            flags.append("below-center-value")
    except Exception:
        pass

    def evaluator(eps: float) -> float:
        return robust_value(model, X, x, eps, cfg)[0]

    return RobustProfile(
        x=x,
        radii=np.array(grid.radii),
        values=values,
        methods=tuple(methods),
        flags=tuple(flags),
        evaluator=evaluator,
    )
