"""Set geometry: ball-intersection maps, Hausdorff distance, cones, and diagnostics.

The central object is the set-valued map x -> B_eps(x) & X (ball intersected
with the set), whose Lipschitz behavior controls how worst-case envelopes
inherit regularity from the underlying function.  This module estimates that
behavior from matched-seed point clouds, builds exact tangent and normal
cones for the structured domain classes, and runs the radial/convexity
diagnostics that predict when the map has modulus one.

Cone projections are exact by active-set enumeration, which is the point:
at desk scale (dimension <= 4, <= 12 facets) exactness beats an iterative
solver's tolerance ambiguity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .funcmodel import (
    BallDomain,
    BoxDomain,
    DomainModel,
    DyadicEpigraphDomain,
    FullSpaceDomain,
    FunctionModel,
    PolytopeDomain,
    QuadraticModel,
    AffineNormModel,
    SmoothEqualityDomain,
    UnionDomain,
    _ball_offsets,
    spawn_rng,
)
from .moduli import derive_seed, lip_direct
from .regularize import SearchConfig, make_robust_evaluator, robust_value_affine_norm

__all__ = [
    "PointCloud",
    "FullSpaceCone",
    "Subspace",
    "PolyhedralHalfspaces",
    "PolyhedralGenerators",
    "UnionOfCones",
    "UnsupportedConeError",
    "SetMapModulusEstimate",
    "ShellReport",
    "PairReport",
    "BoundCheckReport",
    "sample_ball_intersection",
    "hausdorff_distance",
    "setmap_lip_estimate",
    "peaceful_profile",
    "tangent_cone",
    "normal_cone",
    "polar_cone",
    "cone_distance",
    "cone_contains",
    "nearly_radial_profile",
    "nearly_convex_profile",
    "prox_regular_profile",
    "normal_cone_lip_bound",
    "lip_upper_bound_check",
]


class UnsupportedConeError(ValueError):
    """The requested cone representation or dimension is not handled exactly."""


# ---------------------------------------------------------------------------
# point clouds and Hausdorff distance


@dataclass
class PointCloud:
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-d array")

    def __len__(self):
        return self.points.shape[0]


def sample_ball_intersection(X: DomainModel, x, eps: float, n: int, seed: int) -> PointCloud:
    """Sampled surrogate of B_eps(x) & X with per-index offset draws.

    The offsets depend only on (seed, index), so clouds at nearby base points
    are congruent and discretization error largely cancels in matched-seed
    ratios.  Box and polytope domains contribute boundary-projected points.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = X.sample_in_ball(x, eps, n, seed, include_center=True)
    return PointCloud(pts, {"seed": seed, "requested": n, "accepted": int(len(pts)),
                            "eps": float(eps)})


def hausdorff_distance(C: PointCloud, D: PointCloud) -> float:
    """Exact two-sided Hausdorff distance between finite clouds."""
    P, Q = np.asarray(C.points), np.asarray(D.points)
    if P.size == 0 or Q.size == 0:
        raise ValueError("Hausdorff distance needs nonempty clouds")
    M = cdist(P, Q)
    return float(max(M.min(axis=1).max(), M.min(axis=0).max()))


# ---------------------------------------------------------------------------
# set-valued map modulus


@dataclass
class SetMapModulusEstimate:
    radii: tuple
    lip_estimates: tuple
    threshold: float
    one_peaceful: bool
    cloud_size: int
    pair_budget: int

    @property
    def limsup_trend(self) -> float:
        return max(self.lip_estimates[-2:]) if len(self.lip_estimates) >= 2 else self.lip_estimates[-1]


def setmap_lip_estimate(X: DomainModel, xbar, eps: float, pair_budget: int = 32,
                        n_cloud: int = 2000, seed: int = 0,
                        pair_sep: Optional[float] = None) -> float:
    """Max sampled ratio d_H(B_eps(x) & X, B_eps(x') & X) / |x - x'| near xbar.

    Both clouds in each pair reuse the same offset draw, which suppresses
    discretization noise; the estimate carries cloud resolution error of
    order the covering radius divided by the pair separation.
    """
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    sep = pair_sep if pair_sep is not None else 0.1 * eps
    jit = 0.5 * sep
    g = spawn_rng(derive_seed(seed, 21), 5)
    best = 0.0
    for k in range(pair_budget):
        u = g.standard_normal(xbar.shape[0])
        u /= max(np.linalg.norm(u), 1e-300)
        base = xbar + jit * g.standard_normal(xbar.shape[0])
        other = base + sep * u
        cloud_seed = derive_seed(seed, 22)  # shared across the pair and all pairs
        try:
            Ca = sample_ball_intersection(X, base, eps, n_cloud, cloud_seed)
            Cb = sample_ball_intersection(X, other, eps, n_cloud, cloud_seed)
        except ValueError:
            continue
        gap = float(np.linalg.norm(other - base))
        if gap <= 1e-15:
            continue
        best = max(best, hausdorff_distance(Ca, Cb) / gap)
    return best


def peaceful_profile(X: DomainModel, xbar, eps_grid: Sequence[float], threshold: float = 0.05,
                     pair_budget: int = 32, n_cloud: int = 2000, seed: int = 0) -> SetMapModulusEstimate:
    """Per-radius map modulus estimates; verdict requires the two smallest radii <= 1 + threshold."""
    grid = sorted(float(e) for e in eps_grid)
    ests = [
        setmap_lip_estimate(X, xbar, eps, pair_budget, n_cloud, derive_seed(seed, j))
        for j, eps in enumerate(grid)
    ]
    small = ests[:2]
    verdict = all(v <= 1.0 + threshold for v in small)
    return SetMapModulusEstimate(tuple(grid), tuple(ests), threshold, verdict,
                                 n_cloud, pair_budget)


# ---------------------------------------------------------------------------
# cones


@dataclass
class FullSpaceCone:
    dim: int


@dataclass
class Subspace:
    basis: np.ndarray  # (k, n) orthonormal rows; k = 0 encodes the origin cone

    def __post_init__(self):
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=float))

    @classmethod
    def zero(cls, dim: int) -> "Subspace":
        return cls(np.zeros((0, dim)))

    @classmethod
    def from_spanning(cls, rows: np.ndarray, dim: int) -> "Subspace":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.size == 0 or rows.shape[0] == 0:
            return cls.zero(dim)
        u, s, vt = np.linalg.svd(rows, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 0.0)))
        return cls(vt[:rank]) if rank else cls.zero(dim)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def complement(self) -> "Subspace":
        n = self.dim
        k = self.basis.shape[0]
        if k == 0:
            return Subspace(np.eye(n))
        u, s, vt = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(vt[k:]) if k < n else Subspace.zero(n)


@dataclass
class PolyhedralHalfspaces:
    rows: np.ndarray  # {d : rows @ d <= 0}

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class PolyhedralGenerators:
    rays: np.ndarray  # cone of nonnegative combinations of the rows

    def __post_init__(self):
        self.rays = np.atleast_2d(np.asarray(self.rays, dtype=float))

    @property
    def dim(self) -> int:
        return self.rays.shape[1]


@dataclass
class UnionOfCones:
    members: tuple

    @property
    def dim(self) -> int:
        return self.members[0].dim


Cone = object


def polar_cone(K) -> Cone:
    """Polar {v : <v, d> <= 0 for all d in K}; unions polarize to intersections."""
    if isinstance(K, FullSpaceCone):
        return Subspace.zero(K.dim)
    if isinstance(K, Subspace):
        return K.complement()
    if isinstance(K, PolyhedralHalfspaces):
        return PolyhedralGenerators(K.rows)
    if isinstance(K, PolyhedralGenerators):
        return PolyhedralHalfspaces(K.rays)
    if isinstance(K, UnionOfCones):
        polars = [polar_cone(m) for m in K.members]
        if all(isinstance(p, Subspace) for p in polars):
            # intersection of subspaces = complement of the span of complements
            spans = np.vstack([p.complement().basis for p in polars if p.complement().basis.size])
            return Subspace.from_spanning(spans, K.dim).complement()
        raise UnsupportedConeError("polar of this union is not representable here")
    raise UnsupportedConeError(f"no polar for {type(K).__name__}")


def _project_subspace(v: np.ndarray, S: Subspace) -> np.ndarray:
    if S.basis.shape[0] == 0:
        return np.zeros_like(v)
    return S.basis.T @ (S.basis @ v)


def _project_halfspace_cone(v: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Exact projection onto {d : rows d <= 0} by active-set enumeration."""
    m, n = rows.shape
    if m > 12 or n > 4:
        raise UnsupportedConeError("halfspace projection enumerates at most 12 rows in R^4")
    tol = 1e-10 * (1.0 + float(np.linalg.norm(v)))
    best, best_d = None, math.inf
    for k in range(0, m + 1):
        for S in combinations(range(m), k):
            if not S:
                cand = v
            else:
                A = rows[list(S)]
                u, s, vt = np.linalg.svd(A, full_matrices=True)
                rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
                null = vt[rank:]
                cand = null.T @ (null @ v) if null.size else np.zeros_like(v)
            if np.all(rows @ cand <= tol):
                dd = float(np.linalg.norm(v - cand))
                if dd < best_d:
                    best, best_d = cand, dd
    return best


def _project_generator_cone(v: np.ndarray, rays: np.ndarray) -> np.ndarray:
    """Exact projection onto nonnegative combinations of the rays, by enumeration."""
    m, n = rays.shape
    if m > 12 or n > 4:
        raise UnsupportedConeError("generator projection enumerates at most 12 rays in R^4")
    best, best_d = np.zeros_like(v), float(np.linalg.norm(v))
    for k in range(1, m + 1):
        for S in combinations(range(m), k):
            R = rays[list(S)]
            lam, *_ = np.linalg.lstsq(R.T, v, rcond=None)
            if np.all(lam >= -1e-12 * (1.0 + np.abs(lam).max(initial=0.0))):
                cand = R.T @ np.maximum(lam, 0.0)
                dd = float(np.linalg.norm(v - cand))
                if dd < best_d:
                    best, best_d = cand, dd
    return best


def cone_distance(v, K) -> float:
    """Exact distance from v to the cone K."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if isinstance(K, FullSpaceCone):
        return 0.0
    if isinstance(K, Subspace):
        return float(np.linalg.norm(v - _project_subspace(v, K)))
    if isinstance(K, PolyhedralHalfspaces):
        return float(np.linalg.norm(v - _project_halfspace_cone(v, K.rows)))
    if isinstance(K, PolyhedralGenerators):
        return float(np.linalg.norm(v - _project_generator_cone(v, K.rays)))
    if isinstance(K, UnionOfCones):
        return min(cone_distance(v, m) for m in K.members)
    raise UnsupportedConeError(f"no projection for {type(K).__name__}")


def cone_contains(K, v, tol: float = 1e-10) -> bool:
    v = np.asarray(v, dtype=float).reshape(-1)
    return cone_distance(v, K) <= tol * (1.0 + float(np.linalg.norm(v)))


# ---------------------------------------------------------------------------
# tangent and normal cones of domains


def tangent_cone(X: DomainModel, x) -> Cone:
    """Exact tangent cone of a structured domain at a member point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if not X.contains(x, tol=1e-9):
        raise ValueError("tangent cone requested at a point outside the set")
    if isinstance(X, FullSpaceDomain):
        return FullSpaceCone(X.dimension)
    if isinstance(X, BoxDomain):
        rows = []
        for i in range(X.dimension):
            span = 1e-9 * (1.0 + max(abs(X.lower[i]), abs(X.upper[i])))
            if x[i] <= X.lower[i] + span:
                e = np.zeros(X.dimension)
                e[i] = -1.0
                rows.append(e)
            if x[i] >= X.upper[i] - span:
                e = np.zeros(X.dimension)
                e[i] = 1.0
                rows.append(e)
        return PolyhedralHalfspaces(np.array(rows)) if rows else FullSpaceCone(X.dimension)
    if isinstance(X, BallDomain):
        gap = np.linalg.norm(x - X.center)
        if gap >= X.radius - 1e-9 * (1.0 + X.radius):
            return PolyhedralHalfspaces((x - X.center)[None, :])
        return FullSpaceCone(X.dimension)
    if isinstance(X, PolytopeDomain):
        act = X.active_rows(x)
        if act.size == 0:
            return FullSpaceCone(X.dimension)
        return PolyhedralHalfspaces(X.A[act])
    if isinstance(X, SmoothEqualityDomain):
        J = X.jacobian(x)
        u, s, vt = np.linalg.svd(J, full_matrices=True)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
        return Subspace(vt[rank:]) if rank < X.dimension else Subspace.zero(X.dimension)
    if isinstance(X, UnionDomain):
        cones = [tangent_cone(m, x) for m in X.members_containing(x, tol=1e-9)]
        if not cones:
            raise ValueError("point lies in no union member")
        if len(cones) == 1:
            return cones[0]
        return UnionOfCones(tuple(cones))
    if isinstance(X, DyadicEpigraphDomain):
        info = X.boundary_info(x)
        if info is None:
            return FullSpaceCone(2)
        s_lo, s_hi = min(info), max(info)
        rows = [[s_hi, -1.0]]
        if s_lo != s_hi:
            rows.append([s_lo, -1.0])
        return PolyhedralHalfspaces(np.array(rows))
    raise UnsupportedConeError(f"no tangent cone for {type(X).__name__}")


def normal_cone(X: DomainModel, x) -> Cone:
    """Normal cone as the polar of the tangent cone (regular domain classes)."""
    return polar_cone(tangent_cone(X, x))


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class ShellReport:
    rows: tuple  # (radius, max ratio, points used)
    threshold: float
    passed: bool
    columns = ("radius", "max_ratio", "n_points")


def nearly_radial_profile(X: DomainModel, xbar, shell_radii: Sequence[float],
                          n_per_shell: int = 200, seed: int = 0,
                          threshold: float = 0.05) -> ShellReport:
    """Per-shell max of dist(xbar, x + T_X(x)) / |xbar - x| for set points x.

    Decaying ratios certify that rays back to xbar become tangent; the
    verdict passes when the smallest shell's ratio is at or below threshold.
    """
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    radii = sorted(float(r) for r in shell_radii)
    radii.reverse()
    rows = []
    for j, r in enumerate(radii):
        pts = X.sample_shell(xbar, r, n_per_shell, derive_seed(seed, j))
        worst = 0.0
        used = 0
        for p in pts:
            gap = float(np.linalg.norm(xbar - p))
            if gap <= 1e-15 * (1.0 + r):
                continue
            ratio = cone_distance(xbar - p, tangent_cone(X, p)) / gap
            worst = max(worst, ratio)
            used += 1
        rows.append((r, worst, used))
    passed = bool(rows) and rows[-1][1] <= threshold
    return ShellReport(tuple(rows), threshold, passed)


@dataclass
class PairReport:
    rows: tuple  # (radius, max ratio, pairs used)
    threshold: float
    passed: bool
    kind: str  # 'nearly-convex' | 'prox-regular'
    columns = ("radius", "max_ratio", "n_pairs")


def _pair_ratios(X: DomainModel, xbar, r: float, n_pairs: int, seed: int,
                 power: int) -> tuple:
    xa = X.sample_shell(xbar, r, n_pairs, derive_seed(seed, 0))
    xb = X.sample_shell(xbar, r, n_pairs, derive_seed(seed, 1))
    m = min(len(xa), len(xb))
    worst, used = 0.0, 0
    for i in range(m):
        x, y = xa[i], xb[(i * 7 + 3) % m]
        gap = float(np.linalg.norm(x - y))
        if gap <= 1e-14 * (1.0 + r):
            continue
        ratio = cone_distance(y - x, tangent_cone(X, x)) / gap ** power
        worst = max(worst, ratio)
        used += 1
    return worst, used


def nearly_convex_profile(X: DomainModel, xbar, shell_radii: Sequence[float],
                          n_pairs: int = 120, seed: int = 0, threshold: float = 0.05,
                          witness_pairs: Optional[Sequence[tuple]] = None) -> PairReport:
    """Max of dist(y, x + T_X(x)) / |x - y| over set pairs in shrinking shells."""
    return _pair_profile(X, xbar, shell_radii, n_pairs, seed, threshold, witness_pairs,
                         power=1, kind="nearly-convex",
                         pass_rule=lambda rows: rows[-1][1] <= threshold)


def prox_regular_profile(X: DomainModel, xbar, shell_radii: Sequence[float],
                         n_pairs: int = 120, seed: int = 0, bound: float = 10.0,
                         witness_pairs: Optional[Sequence[tuple]] = None) -> PairReport:
    """Max of dist(y, x + T_X(x)) / |x - y|^2 over set pairs; passes while bounded."""
    return _pair_profile(X, xbar, shell_radii, n_pairs, seed, bound, witness_pairs,
                         power=2, kind="prox-regular",
                         pass_rule=lambda rows: max(r[1] for r in rows) <= bound)


def _pair_profile(X, xbar, shell_radii, n_pairs, seed, threshold, witness_pairs,
                  power, kind, pass_rule) -> PairReport:
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    radii = sorted(float(r) for r in shell_radii)
    radii.reverse()
    rows = []
    for j, r in enumerate(radii):
        worst, used = _pair_ratios(X, xbar, r, n_pairs, derive_seed(seed, j), power)
        rows.append((r, worst, used))
    if witness_pairs:
        worst, used = 0.0, 0
        for x, y in witness_pairs:
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            gap = float(np.linalg.norm(x - y))
            if gap <= 0:
                continue
            worst = max(worst, cone_distance(y - x, tangent_cone(X, x)) / gap ** power)
            used += 1
        rows.append((float("nan"), worst, used))
    passed = pass_rule([row for row in rows if math.isfinite(row[0])] or rows)
    return PairReport(tuple(rows), threshold, passed, kind)


def normal_cone_lip_bound(X: DomainModel, x, y) -> float:
    """Upper bound |x - y| / dist(x - y, N_X(y)) on the graphical map modulus.

    Returns inf when x - y lies in the normal cone (the bound degenerates).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    v = x - y
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return 0.0
    dist = cone_distance(v, normal_cone(X, y))
    if dist <= 1e-12 * nv:
        return math.inf
    return nv / dist


@dataclass
class BoundCheckReport:
    rows: tuple  # (eps, envelope lip estimate, bound, ok)
    slack: float
    passed: bool
    columns = ("epsilon", "lip_envelope", "lip_bound", "ok")


def lip_upper_bound_check(model: FunctionModel, X: DomainModel, xbar,
                          eps_grid: Sequence[float], slack: float = 0.05,
                          n_pairs: int = 2500, seed: int = 0,
                          cfg: Optional[SearchConfig] = None) -> BoundCheckReport:
    """Check lip of the envelope at xbar against the max function slope over the ball.

    For quadratics and affine norms the ball slope bound is exact (the
    gradient norm is itself an affine-norm model); other models get a sampled
    bound.  Passes when the smallest radius satisfies the bound within slack.
    """
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    grid = sorted(float(e) for e in eps_grid)
    rows = []
    for eps in grid:
        ev = make_robust_evaluator(model, X, eps, cfg)
        lip_env = lip_direct(ev, X, xbar, radii=(0.3 * eps, 0.1 * eps),
                             n_pairs=n_pairs, seed=derive_seed(seed, 3)).value
        bound = _ball_slope_bound(model, X, xbar, eps, seed)
        rows.append((eps, lip_env, bound, lip_env <= bound * (1.0 + slack)))
    passed = rows[0][3] if rows else False
    return BoundCheckReport(tuple(rows), slack, passed)


def _ball_slope_bound(model: FunctionModel, X: DomainModel, xbar, eps: float,
                      seed: int) -> float:
    if isinstance(model, QuadraticModel):
        # max gradient norm over the ball: ||2Hx + 2c|| is an affine norm
        return robust_value_affine_norm(2.0 * model.H, 2.0 * model.c, xbar, eps)
    if isinstance(model, AffineNormModel):
        return float(np.linalg.norm(model.A, 2))
    sup = 0.0
    pts = xbar + eps * _ball_offsets(model.dimension, 32, derive_seed(seed, 9))
    for i, p in enumerate(np.vstack([xbar[None, :], pts])):
        est = lip_direct(model, X, p, radii=(0.02 * eps, 0.01 * eps), n_pairs=500,
                         seed=derive_seed(seed, 9, i))
        sup = max(sup, est.value)
    return sup
