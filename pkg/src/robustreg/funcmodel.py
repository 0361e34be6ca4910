"""Function and domain models shared by every other module, plus named fixtures.

Function models evaluate pointwise and in batch; domain models answer
membership queries, project points, and sample ball / shell intersections.
The fixture registry maps names (usable from the CLI) to prebuilt
(model, domain, metadata) triples with documented reference values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import exprlang
from .exprlang import ExpressionTree, parse_expression

__all__ = [
    "FunctionModel",
    "ExpressionModel",
    "QuadraticModel",
    "AffineNormModel",
    "Piecewise1DModel",
    "SpectralAbscissaModel",
    "SpectralRadiusModel",
    "CallableModel",
    "DomainModel",
    "FullSpaceDomain",
    "BoxDomain",
    "BallDomain",
    "PolytopeDomain",
    "SmoothEqualityDomain",
    "UnionDomain",
    "DyadicEpigraphDomain",
    "Fixture",
    "load_fixture",
    "fixture_names",
    "spawn_rng",
]

_CONTAIN_TOL = 1e-12


def spawn_rng(seed, *key) -> np.random.Generator:
    """Deterministic child generator for a (seed, key...) pair.

    Separate keys give independent streams, so adding draws to one stream
    never shifts another; doubling a budget extends a stream's prefix.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def _as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    return m


def _as_vector(v) -> np.ndarray:
    a = np.array(v, dtype=float).reshape(-1)
    return a


# ---------------------------------------------------------------------------
# function models


class FunctionModel:
    """Common interface: scalar ``eval`` and vectorized ``eval_many``."""

    dimension: int

    def eval(self, x) -> float:
        p = _as_vector(x)
        if p.shape[0] != self.dimension:
            raise ValueError(f"expected a point of length {self.dimension}")
        return float(self.eval_many(p[None, :])[0])

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class ExpressionModel(FunctionModel):
    tree: ExpressionTree

    def __post_init__(self):
        self.dimension = self.tree.dimension

    def eval_many(self, points):
        return exprlang.evaluate_many(self.tree, points)


@dataclass
class QuadraticModel(FunctionModel):
    """f(x) = x'Hx + 2c'x + d with symmetric positive definite H."""

    H: np.ndarray
    c: np.ndarray
    d: float

    def __post_init__(self):
        self.H = _as_matrix(self.H)
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise ValueError("H must be square")
        if not np.allclose(self.H, self.H.T, atol=1e-10 * (1.0 + np.abs(self.H).max())):
            raise ValueError("H must be symmetric")
        self.H = 0.5 * (self.H + self.H.T)
        self.c = _as_vector(self.c) if np.size(self.c) else np.zeros(n)
        if self.c.shape[0] != n:
            raise ValueError("c has wrong length")
        self.d = float(self.d)
        w = np.linalg.eigvalsh(self.H)
        if w[0] <= 1e-10 * max(1.0, abs(w[-1])):
            raise ValueError("H must be positive definite")
        self.dimension = n
        self._eigs = None  # cached (w, Q) for ball maximization

    def eigendecomposition(self):
        if self._eigs is None:
            w, Q = np.linalg.eigh(self.H)
            self._eigs = (w, Q)
        return self._eigs

    def eval_many(self, points):
        P = np.asarray(points, dtype=float)
        return np.einsum("ij,jk,ik->i", P, self.H, P) + 2.0 * P @ self.c + self.d

    def gradient(self, x) -> np.ndarray:
        return 2.0 * (self.H @ _as_vector(x) + self.c)


@dataclass
class AffineNormModel(FunctionModel):
    """f(x) = ||A x + b||_2."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = _as_matrix(self.A)
        self.b = _as_vector(self.b) if np.size(self.b) else np.zeros(self.A.shape[0])
        if self.b.shape[0] != self.A.shape[0]:
            raise ValueError("b has wrong length")
        self.dimension = self.A.shape[1]

    def eval_many(self, points):
        P = np.asarray(points, dtype=float)
        return np.linalg.norm(P @ self.A.T + self.b, axis=1)


@dataclass
class Piecewise1DModel(FunctionModel):
    """One-dimensional function split at strictly increasing breakpoints.

    Piece ``j`` covers ``[breakpoints[j-1], breakpoints[j])``; a breakpoint
    belongs to the piece on its right.  Each piece is a one-variable
    expression tree.
    """

    breakpoints: np.ndarray
    pieces: tuple

    def __post_init__(self):
        self.breakpoints = _as_vector(self.breakpoints)
        if self.breakpoints.size and np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.pieces) != self.breakpoints.size + 1:
            raise ValueError("need exactly one piece more than breakpoints")
        for piece in self.pieces:
            if piece.dimension != 1:
                raise ValueError("pieces must be one-variable expressions")
        self.dimension = 1

    def piece_index(self, x: float) -> int:
        return int(np.searchsorted(self.breakpoints, x, side="right"))

    def eval_many(self, points):
        P = np.asarray(points, dtype=float).reshape(-1, 1)
        idx = np.searchsorted(self.breakpoints, P[:, 0], side="right")
        out = np.empty(P.shape[0])
        for j, piece in enumerate(self.pieces):
            sel = idx == j
            if sel.any():
                out[sel] = exprlang.evaluate_many(piece, P[sel])
        return out


def _is_exactly_diagonal(A: np.ndarray) -> bool:
    return bool(np.all(A == np.diag(np.diagonal(A))))


@dataclass
class SpectralAbscissaModel(FunctionModel):
    """Largest real part of the eigenvalues; argument is a flattened n-by-n matrix."""

    n: int

    def __post_init__(self):
        self.dimension = self.n * self.n

    def eval_many(self, points):
        P = np.asarray(points, dtype=float)
        out = np.empty(P.shape[0])
        for i, row in enumerate(P):
            A = row.reshape(self.n, self.n)
            if _is_exactly_diagonal(A):
                out[i] = float(np.max(np.diagonal(A)))
            else:
                out[i] = float(np.max(np.linalg.eigvals(A).real))
        return out


@dataclass
class SpectralRadiusModel(FunctionModel):
    """Largest eigenvalue modulus; argument is a flattened n-by-n matrix."""

    n: int

    def __post_init__(self):
        self.dimension = self.n * self.n

    def eval_many(self, points):
        P = np.asarray(points, dtype=float)
        out = np.empty(P.shape[0])
        for i, row in enumerate(P):
            A = row.reshape(self.n, self.n)
            if _is_exactly_diagonal(A):
                out[i] = float(np.max(np.abs(np.diagonal(A))))
            else:
                out[i] = float(np.max(np.abs(np.linalg.eigvals(A))))
        return out


@dataclass
class CallableModel(FunctionModel):
    """Wrap an arbitrary scalar function; used by stress fixtures and tests."""

    fn: Callable[[np.ndarray], float]
    dim: int
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.dimension = self.dim

    def eval_many(self, points):
        P = np.asarray(points, dtype=float)
        if self.batch is not None:
            return np.asarray(self.batch(P), dtype=float)
        return np.array([self.fn(row) for row in P], dtype=float)


# ---------------------------------------------------------------------------
# domain models


class DomainModel:
    """A subset of R^n with membership, projection, and sampling hooks."""

    dimension: int

    def contains(self, x, tol: float = _CONTAIN_TOL) -> bool:
        p = _as_vector(x)
        return bool(self.contains_many(p[None, :], tol)[0])

    def contains_many(self, points: np.ndarray, tol: float = _CONTAIN_TOL) -> np.ndarray:
        raise NotImplementedError

    def project(self, x) -> Optional[np.ndarray]:
        """Nearest point of the set, or None when no projector is available."""
        return None

    def is_convex(self) -> bool:
        return False

    def ball_inside(self, center, radius: float) -> bool:
        """True when the closed ball is certified to lie inside the set."""
        return False

    def max_step(self, x: np.ndarray, direction: np.ndarray) -> float:
        """Largest t with x + t*direction in the set (convex sets only)."""
        raise NotImplementedError

    # sampling ----------------------------------------------------------

    def sample_in_ball(self, center, eps: float, n_draws: int, seed: int,
                       include_center: bool = True) -> np.ndarray:
        """Points of (ball of radius eps at center) intersected with the set.

        Candidate offsets are drawn once per index, so enlarging ``n_draws``
        extends the sample rather than reshuffling it; candidates outside the
        set are discarded.  A quarter of the draws sit on the ball boundary,
        where Hausdorff extremes live.  Box and polytope domains add
        boundary-projected candidates.  Raises ValueError when nothing
        feasible is found.
        """
        center = _as_vector(center)
        n_sphere = n_draws // 4
        offsets = _ball_offsets(self.dimension, n_draws - n_sphere, seed)
        if n_sphere:
            offsets = np.vstack([offsets, _sphere_offsets(self.dimension, n_sphere, seed)])
        pts = self._feasible_ball_points(center, eps, center + eps * offsets)
        if include_center and self.contains(center):
            pts = np.vstack([center[None, :], pts]) if pts.size else center[None, :]
        if pts.size == 0:
            raise ValueError(
                f"no feasible point in the radius-{eps} ball at {center.tolist()} "
                f"after {n_draws} draws"
            )
        return pts

    def _feasible_ball_points(self, center, eps, candidates) -> np.ndarray:
        keep = self.contains_many(candidates)
        return candidates[keep]

    def sample_shell(self, center, radius: float, n: int, seed: int) -> np.ndarray:
        """Set points at distance about ``radius`` from ``center``."""
        center = _as_vector(center)
        cloud = self.sample_in_ball(center, 1.25 * radius, max(n * 8, 64), seed,
                                    include_center=False)
        dist = np.linalg.norm(cloud - center, axis=1)
        keep = (dist >= 0.25 * radius) & (dist <= 1.25 * radius)
        return cloud[keep][:n]


def _ball_offsets(dim: int, n: int, seed: int) -> np.ndarray:
    """Uniform samples of the closed unit ball, one fixed draw per index."""
    g_dir = spawn_rng(seed, 0)
    g_rad = spawn_rng(seed, 1)
    raw = g_dir.standard_normal((n, dim))
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0.0] = 1.0
    radii = g_rad.random(n) ** (1.0 / dim)
    return raw / norms[:, None] * radii[:, None]


def _sphere_offsets(dim: int, n: int, seed: int) -> np.ndarray:
    g = spawn_rng(seed, 2)
    raw = g.standard_normal((n, dim))
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0.0] = 1.0
    return raw / norms[:, None]


@dataclass
class FullSpaceDomain(DomainModel):
    n: int

    def __post_init__(self):
        self.dimension = self.n

    def contains_many(self, points, tol=_CONTAIN_TOL):
        return np.ones(np.asarray(points).shape[0], dtype=bool)

    def project(self, x):
        return _as_vector(x)

    def is_convex(self):
        return True

    def ball_inside(self, center, radius):
        return True

    def max_step(self, x, direction):
        return math.inf

    def sample_shell(self, center, radius, n, seed):
        center = _as_vector(center)
        return center + radius * _sphere_offsets(self.dimension, n, seed)


@dataclass
class BoxDomain(DomainModel):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = _as_vector(self.lower)
        self.upper = _as_vector(self.upper)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("box bounds are inconsistent")
        self.dimension = self.lower.shape[0]

    def contains_many(self, points, tol=_CONTAIN_TOL):
        P = np.asarray(points, dtype=float)
        pad = tol * (1.0 + np.maximum(np.abs(self.lower), np.abs(self.upper)))
        return np.all((P >= self.lower - pad) & (P <= self.upper + pad), axis=1)

    def project(self, x):
        return np.clip(_as_vector(x), self.lower, self.upper)

    def is_convex(self):
        return True

    def ball_inside(self, center, radius):
        c = _as_vector(center)
        return bool(np.all(c - self.lower >= radius) and np.all(self.upper - c >= radius))

    def max_step(self, x, direction):
        x = _as_vector(x)
        d = _as_vector(direction)
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = np.where(d > 0, (self.upper - x) / d, np.inf)
            lo = np.where(d < 0, (self.lower - x) / d, np.inf)
        return float(min(np.min(hi), np.min(lo)))

    def _feasible_ball_points(self, center, eps, candidates):
        keep = self.contains_many(candidates)
        clipped = np.clip(candidates[~keep], self.lower, self.upper)
        if clipped.size:
            inside_ball = np.linalg.norm(clipped - center, axis=1) <= eps * (1 + 1e-12)
            clipped = clipped[inside_ball]
        pts = candidates[keep]
        return np.vstack([pts, clipped]) if clipped.size else pts

    def sample_shell(self, center, radius, n, seed):
        return _convex_shell(self, center, radius, n, seed)


def _convex_shell(domain: DomainModel, center, radius: float, n: int, seed: int) -> np.ndarray:
    """Walk rays from ``center`` and stop at the first of: radius, boundary."""
    center = _as_vector(center)
    dirs = _sphere_offsets(domain.dimension, n, seed)
    pts = np.empty_like(dirs)
    for i, d in enumerate(dirs):
        t = min(radius, domain.max_step(center, d))
        pts[i] = center + t * d
    keep = np.linalg.norm(pts - center, axis=1) > 1e-15
    return pts[keep]


@dataclass
class BallDomain(DomainModel):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = _as_vector(self.center)
        self.radius = float(self.radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.dimension = self.center.shape[0]

    def contains_many(self, points, tol=_CONTAIN_TOL):
        P = np.asarray(points, dtype=float)
        return np.linalg.norm(P - self.center, axis=1) <= self.radius + tol * (1.0 + self.radius)

    def project(self, x):
        p = _as_vector(x)
        gap = np.linalg.norm(p - self.center)
        if gap <= self.radius:
            return p
        return self.center + (p - self.center) * (self.radius / gap)

    def is_convex(self):
        return True

    def ball_inside(self, center, radius):
        return bool(np.linalg.norm(_as_vector(center) - self.center) + radius <= self.radius)

    def max_step(self, x, direction):
        x = _as_vector(x) - self.center
        d = _as_vector(direction)
        dd = d @ d
        if dd == 0:
            return math.inf
        disc = (x @ d) ** 2 - dd * (x @ x - self.radius ** 2)
        if disc < 0:
            return 0.0
        return float((-(x @ d) + math.sqrt(disc)) / dd)

    def sample_shell(self, center, radius, n, seed):
        return _convex_shell(self, center, radius, n, seed)


@dataclass
class PolytopeDomain(DomainModel):
    """{x : A x <= b} row by row."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = _as_matrix(self.A)
        self.b = _as_vector(self.b)
        if self.b.shape[0] != self.A.shape[0]:
            raise ValueError("b has wrong length")
        self.dimension = self.A.shape[1]

    def contains_many(self, points, tol=_CONTAIN_TOL):
        P = np.asarray(points, dtype=float)
        slack = self.b - P @ self.A.T
        pad = tol * (1.0 + np.abs(self.b))
        return np.all(slack >= -pad, axis=1)

    def active_rows(self, x, tol: float = 1e-9) -> np.ndarray:
        residual = np.abs(self.A @ _as_vector(x) - self.b)
        return np.flatnonzero(residual <= tol * (1.0 + np.abs(self.b)))

    def project(self, x):
        # exact via active-set enumeration; practical for few rows
        from itertools import combinations

        v = _as_vector(x)
        if self.contains(v):
            return v
        m = self.A.shape[0]
        if m > 12:
            return None
        best, best_d = None, math.inf
        rows = range(m)
        for k in range(0, min(m, self.dimension) + 1):
            for S in combinations(rows, k):
                if not S:
                    cand = v
                else:
                    As = self.A[list(S)]
                    bs = self.b[list(S)]
                    # projection onto the affine set As y = bs
                    try:
                        lam = np.linalg.lstsq(As @ As.T, As @ v - bs, rcond=None)[0]
                    except np.linalg.LinAlgError:
                        continue
                    cand = v - As.T @ lam
                if self.contains(cand, tol=1e-9):
                    d = np.linalg.norm(cand - v)
                    if d < best_d:
                        best, best_d = cand, d
        return best

    def is_convex(self):
        return True

    def ball_inside(self, center, radius):
        c = _as_vector(center)
        norms = np.linalg.norm(self.A, axis=1)
        slack = self.b - self.A @ c
        return bool(np.all(slack >= radius * norms))

    def max_step(self, x, direction):
        x = _as_vector(x)
        d = _as_vector(direction)
        num = self.b - self.A @ x
        den = self.A @ d
        with np.errstate(divide="ignore", invalid="ignore"):
            steps = np.where(den > 0, num / den, np.inf)
        return float(np.min(steps, initial=np.inf))

    def _feasible_ball_points(self, center, eps, candidates):
        keep = self.contains_many(candidates)
        pts = [candidates[keep]]
        for cand in candidates[~keep][:64]:
            proj = self.project(cand)
            if proj is not None and np.linalg.norm(proj - center) <= eps * (1 + 1e-12):
                pts.append(proj[None, :])
        return np.vstack([p for p in pts if p.size]) if any(p.size for p in pts) else np.empty((0, self.dimension))

    def sample_shell(self, center, radius, n, seed):
        return _convex_shell(self, center, radius, n, seed)


def _poly_degree(node) -> Optional[int]:
    if isinstance(node, exprlang.Constant):
        return 0
    if isinstance(node, exprlang.Variable):
        return 1
    if isinstance(node, exprlang.Unary) and node.op == "neg":
        return _poly_degree(node.arg)
    if isinstance(node, exprlang.Binary) and node.op in ("add", "sub"):
        a, b = _poly_degree(node.left), _poly_degree(node.right)
        return None if a is None or b is None else max(a, b)
    if isinstance(node, exprlang.Binary) and node.op == "mul":
        a, b = _poly_degree(node.left), _poly_degree(node.right)
        return None if a is None or b is None else a + b
    if isinstance(node, exprlang.IntPow):
        a = _poly_degree(node.base)
        return None if a is None else a * node.exponent
    return None


@dataclass
class SmoothEqualityDomain(DomainModel):
    """{x : c_i(x) = 0} for expression-tree constraints, Jacobian by differences.

    Affine constraints are detected and projected in one exact step, so the
    axis-type fixtures keep machine-exact membership.
    """

    constraints: tuple  # of ExpressionTree
    dim: int

    def __post_init__(self):
        for tree in self.constraints:
            if tree.dimension != self.dim:
                raise ValueError("constraint dimension mismatch")
        self.dimension = self.dim
        self._linear = all(
            (deg := _poly_degree(t.root)) is not None and deg <= 1 for t in self.constraints
        )
        if self._linear:
            zero = np.zeros(self.dim)
            c0 = np.array([exprlang.evaluate(t, zero) for t in self.constraints])
            J = np.empty((len(self.constraints), self.dim))
            for j in range(self.dim):
                e = np.zeros(self.dim)
                e[j] = 1.0
                J[:, j] = np.array([exprlang.evaluate(t, e) for t in self.constraints]) - c0
            self._J0 = J
            self._pinvJ0 = np.linalg.pinv(J)

    def residual_many(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float)
        return np.stack([exprlang.evaluate_many(t, P) for t in self.constraints], axis=1)

    def contains_many(self, points, tol=_CONTAIN_TOL):
        P = np.asarray(points, dtype=float)
        scale = 1.0 + np.linalg.norm(P, axis=1)
        res = np.abs(self.residual_many(P)).max(axis=1)
        return res <= tol * scale

    def jacobian(self, x) -> np.ndarray:
        if self._linear:
            return self._J0.copy()
        x = _as_vector(x)
        k = len(self.constraints)
        J = np.empty((k, self.dimension))
        h = 1e-6 * (1.0 + np.abs(x))
        for j in range(self.dimension):
            xp = x.copy()
            xm = x.copy()
            xp[j] += h[j]
            xm[j] -= h[j]
            fp = np.array([exprlang.evaluate(t, xp) for t in self.constraints])
            fm = np.array([exprlang.evaluate(t, xm) for t in self.constraints])
            J[:, j] = (fp - fm) / (2.0 * h[j])
        return J

    def project(self, x):
        if self._linear:
            p = _as_vector(x)
            res = np.array([exprlang.evaluate(t, p) for t in self.constraints])
            return p - self._pinvJ0 @ res
        # Gauss-Newton steps onto the constraint manifold
        p = _as_vector(x).copy()
        for _ in range(40):
            res = np.array([exprlang.evaluate(t, p) for t in self.constraints])
            if np.max(np.abs(res)) <= 1e-14 * (1.0 + np.linalg.norm(p)):
                return p
            J = self.jacobian(p)
            try:
                step = np.linalg.lstsq(J, res, rcond=None)[0]
            except np.linalg.LinAlgError:
                return None
            p = p - step
        res = np.array([exprlang.evaluate(t, p) for t in self.constraints])
        if np.max(np.abs(res)) <= _CONTAIN_TOL * (1.0 + np.linalg.norm(p)):
            return p
        return None

    def project_batch(self, points: np.ndarray, iters: int = 20) -> np.ndarray:
        """Gauss-Newton projection of many points at once; non-converged rows dropped."""
        P = np.asarray(points, dtype=float).copy()
        if P.size == 0:
            return P
        if self._linear:
            P = P - self.residual_many(P) @ self._pinvJ0.T
            return P[self.contains_many(P)]
        k = len(self.constraints)
        for _ in range(iters):
            res = self.residual_many(P)  # (m, k)
            scale = 1.0 + np.linalg.norm(P, axis=1)
            if np.all(np.abs(res).max(axis=1) <= 1e-14 * scale):
                break
            J = np.empty((P.shape[0], k, self.dimension))
            h = 1e-6 * (1.0 + np.abs(P))
            for j in range(self.dimension):
                Pp = P.copy()
                Pm = P.copy()
                Pp[:, j] += h[:, j]
                Pm[:, j] -= h[:, j]
                J[:, :, j] = (self.residual_many(Pp) - self.residual_many(Pm)) / (2.0 * h[:, j])[:, None]
            if k == 1:
                g = J[:, 0, :]
                gg = np.einsum("ij,ij->i", g, g)
                gg[gg == 0.0] = np.inf
                P = P - (res[:, 0] / gg)[:, None] * g
            else:
                for i in range(P.shape[0]):
                    step, *_ = np.linalg.lstsq(J[i], res[i], rcond=None)
                    P[i] = P[i] - step
        good = self.contains_many(P)
        return P[good]

    def _feasible_ball_points(self, center, eps, candidates):
        pts = self.project_batch(candidates)
        if pts.size:
            inside = np.linalg.norm(pts - center, axis=1) <= eps * (1 + 1e-12)
            pts = pts[inside]
        return pts if pts.size else np.empty((0, self.dimension))

    def sample_shell(self, center, radius, n, seed):
        center = _as_vector(center)
        dirs = _sphere_offsets(self.dimension, 4 * n, seed)
        pts = self.project_batch(center + radius * dirs)
        if pts.size:
            dist = np.linalg.norm(pts - center, axis=1)
            keep = (dist >= 0.2 * radius) & (dist <= 1.6 * radius)
            pts = pts[keep][:n]
        return pts if pts.size else np.empty((0, self.dimension))


@dataclass
class UnionDomain(DomainModel):
    members: tuple

    def __post_init__(self):
        dims = {m.dimension for m in self.members}
        if len(dims) != 1:
            raise ValueError("union members must share a dimension")
        self.dimension = dims.pop()

    def contains_many(self, points, tol=_CONTAIN_TOL):
        P = np.asarray(points, dtype=float)
        out = np.zeros(P.shape[0], dtype=bool)
        for m in self.members:
            out |= m.contains_many(P, tol)
        return out

    def members_containing(self, x, tol=_CONTAIN_TOL):
        return [m for m in self.members if m.contains(x, tol)]

    def _feasible_ball_points(self, center, eps, candidates):
        parts = []
        for m in self.members:
            parts.append(m._feasible_ball_points(center, eps, candidates))
        parts = [p for p in parts if p.size]
        return np.vstack(parts) if parts else np.empty((0, self.dimension))

    def sample_shell(self, center, radius, n, seed):
        per = max(n // len(self.members), 1)
        parts = []
        for m in self.members:
            if m.contains(center):
                parts.append(m.sample_shell(center, radius, per, seed))
        # members not containing the center: generic ball sampling plus band filter
        try:
            parts.append(DomainModel.sample_shell(self, center, radius, n, seed))
        except ValueError:
            pass
        parts = [p for p in parts if p.size]
        return np.vstack(parts) if parts else np.empty((0, self.dimension))


# ---------------------------------------------------------------------------
# dyadic epigraph domain


@dataclass
class DyadicEpigraphDomain(DomainModel):
    """Epigraph in R^2 of an even sawtooth-of-concave-arcs profile.

    On ``2^-(k+1) <= |x| <= 2^-k`` the profile is
    ``2^-k - 2^-(k+1) * (2 - 2^(k+1) |x|)^(1 + 2^-k)``, which passes through
    the graph corners ``2^-k (1, 1)`` with left slope 0 and right slope
    ``1 + 2^(1-k)``.  The construction is truncated at ``depth``; below
    ``2^-(depth+1)`` the profile continues linearly.  Tests only probe scales
    well above the truncation.
    """

    depth: int = 12

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError("depth must be at least 2")
        self.dimension = 2
        self._xmin = 2.0 ** -(self.depth + 1)

    def profile(self, x: float) -> float:
        ax = abs(float(x))
        if ax <= self._xmin:
            slope = 1.0 + 2.0 ** -self.depth
            return self._xmin + slope * (ax - self._xmin)
        k = self._segment(ax)
        return (2.0 ** -k) - (2.0 ** -(k + 1)) * (2.0 - 2.0 ** (k + 1) * ax) ** (1.0 + 2.0 ** -k)

    def _segment(self, ax: float) -> int:
        # k with 2^-(k+1) <= ax <= 2^-k
        k = int(math.floor(-math.log2(ax)))
        k = max(0, min(k, self.depth))
        if ax > 2.0 ** -k:
            k -= 1
        if ax < 2.0 ** -(k + 1):
            k += 1
        return k

    def profile_slope(self, x: float) -> float:
        """One-sided-consistent slope at non-corner points (sign carried)."""
        ax = abs(float(x))
        if ax <= self._xmin:
            s = 1.0 + 2.0 ** -self.depth
        else:
            k = self._segment(ax)
            s = (1.0 + 2.0 ** -k) * (2.0 - 2.0 ** (k + 1) * ax) ** (2.0 ** -k)
        return s if x >= 0 else -s

    def corner_scales(self):
        return [2.0 ** -k for k in range(0, self.depth + 1)]

    def boundary_info(self, p, tol: float = 1e-9):
        """None in the interior; otherwise slope data ``(left, right)`` at (x, f(x))."""
        x, y = float(p[0]), float(p[1])
        fx = self.profile(x)
        scale = 1.0 + abs(x) + abs(y)
        if y > fx + tol * scale:
            return None
        ax = abs(x)
        for k in range(0, self.depth + 1):
            c = 2.0 ** -k
            if abs(ax - c) <= tol * max(c, 1e-30):
                inner, outer = 0.0, 1.0 + 2.0 ** (1 - k)
                if x >= 0:
                    return (inner, outer)  # left slope 0, right slope outer
                return (-outer, -inner)
        s = self.profile_slope(x)
        return (s, s)

    def contains_many(self, points, tol=_CONTAIN_TOL):
        P = np.asarray(points, dtype=float)
        out = np.empty(P.shape[0], dtype=bool)
        for i, (x, y) in enumerate(P):
            out[i] = y >= self.profile(x) - tol * (1.0 + abs(x) + abs(y))
        return out

    def _feasible_ball_points(self, center, eps, candidates):
        keep = self.contains_many(candidates)
        pts = [candidates[keep]]
        lifted = candidates[~keep].copy()
        if lifted.size:
            for i in range(lifted.shape[0]):
                lifted[i, 1] = self.profile(lifted[i, 0])
            inside = np.linalg.norm(lifted - center, axis=1) <= eps * (1 + 1e-12)
            pts.append(lifted[inside])
        pts = [p for p in pts if p.size]
        return np.vstack(pts) if pts else np.empty((0, 2))

    def sample_shell(self, center, radius, n, seed):
        """Boundary points at distance exactly ``radius`` plus graph corners in range."""
        center = _as_vector(center)
        pts = []
        # graph corners within a generous band of the shell
        for c in self.corner_scales():
            for sx in (1.0, -1.0):
                corner = np.array([sx * c, c])
                dist = np.linalg.norm(corner - center)
                if 0.5 * radius <= dist <= 1.5 * radius:
                    pts.append(corner)
        # exact-radius boundary points (monotone distance along the graph from the center)
        if np.allclose(center, 0.0):
            for sx in (1.0, -1.0):
                t = self._boundary_radius_solve(radius)
                if t is not None:
                    pts.append(np.array([sx * t, self.profile(t)]))
            top = center + np.array([0.0, radius])
            if self.contains(top):
                pts.append(top)
        rng = spawn_rng(seed, 3)
        for _ in range(n):
            x = rng.uniform(-1.25 * radius, 1.25 * radius)
            y = self.profile(x) + rng.uniform(0.0, 0.5 * radius)
            p = np.array([x, y])
            dist = np.linalg.norm(p - center)
            if 0.5 * radius <= dist <= 1.5 * radius:
                pts.append(p)
        return np.array(pts) if pts else np.empty((0, 2))

    def _boundary_radius_solve(self, radius: float):
        # ||(t, f(t))|| is increasing in t > 0
        lo, hi = 0.0, radius
        if math.hypot(hi, self.profile(hi)) < radius:
            for _ in range(60):
                hi *= 1.5
                if math.hypot(hi, self.profile(hi)) >= radius:
                    break
            else:
                return None
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if math.hypot(mid, self.profile(mid)) >= radius:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-15 * max(1.0, radius):
                break
        return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# fixtures


@dataclass
class Fixture:
    name: str
    model: Optional[FunctionModel]
    domain: DomainModel
    meta: dict = field(default_factory=dict)


_REGISTRY: dict = {}


def _register(name: str):
    def deco(fn):
        _REGISTRY[name] = fn
        return fn

    return deco


def fixture_names():
    return sorted(_REGISTRY)


def load_fixture(name: str, **params) -> Fixture:
    """Build a registered fixture; unknown names raise KeyError."""
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(fixture_names())}") from None
    return builder(**params)


def intro1d_alpha(eps: float) -> float:
    """Kink location of the worst-case envelope of the 1-d intro fixture."""
    return (1.0 + 2.0 * eps - math.sqrt(1.0 + 8.0 * eps)) / 2.0


@_register("intro1d")
def _intro1d() -> Fixture:
    model = Piecewise1DModel(
        breakpoints=np.array([0.0]),
        pieces=(parse_expression("-x1", 1), parse_expression("sqrt(x1)", 1)),
    )

    def robust_closed_form(x: float, eps: float) -> float:
        a = intro1d_alpha(eps)
        return eps - x if x < a else math.sqrt(eps + x)

    meta = {
        "alpha": intro1d_alpha,
        "robust_closed_form": robust_closed_form,
        "reference_point": 4.0,
        "reference_value": 2.0,
        "boundaries": [0.0],
        "nonlipschitz_point": np.array([0.0]),
    }
    return Fixture("intro1d", model, FullSpaceDomain(1), meta)


@_register("root_k")
def _root_k(k: int = 2) -> Fixture:
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    model = Piecewise1DModel(breakpoints=np.array([]), pieces=(parse_expression(f"root(x1, {k})", 1),))
    meta = {
        "k": k,
        "robust_at_zero": lambda eps: eps ** (1.0 / k),
        "calm_at_zero": lambda eps: (1.0 / k) * eps ** (1.0 / k - 1.0),
        "nonlipschitz_point": np.array([0.0]),
    }
    return Fixture(f"root_{k}", model, BoxDomain([0.0], [1.0]), meta)


_EXAMPLE24B_TEXT = (
    "piecewise{ x1 <= 0 : 0 ; x1 - 2*x2 <= 0 : x1 ; x1 + 2*x2 <= 0 : -x1 ; x1 >= 0 : 2*x2 ; }"
)


def _example24b_reference(x1: float, x2: float) -> float:
    if x1 <= 0:
        return 0.0
    if x1 <= 2 * x2:
        return x1
    if x1 <= -2 * x2:
        return -x1
    return 2.0 * x2


@_register("example24b")
def _example24b() -> Fixture:
    model = ExpressionModel(parse_expression(_EXAMPLE24B_TEXT, 2))

    def boundary_pairs(rng: np.random.Generator, n: int, gap: float = 1e-12):
        """Point pairs straddling the four guard boundaries."""
        t = rng.uniform(0.05, 1.0, size=n)
        which = rng.integers(0, 3, size=n)
        P = np.empty((n, 2))
        Q = np.empty((n, 2))
        for i in range(n):
            if which[i] == 0:  # x1 = 0 ray
                P[i] = (-gap, t[i] * rng.choice([-1.0, 1.0]))
                Q[i] = (gap, P[i, 1])
            elif which[i] == 1:  # x1 = 2 x2 ray
                P[i] = (t[i] - gap, t[i] / 2)
                Q[i] = (t[i] + gap, t[i] / 2)
            else:  # x1 = -2 x2 ray
                P[i] = (t[i] - gap, -t[i] / 2)
                Q[i] = (t[i] + gap, -t[i] / 2)
        return P, Q

    meta = {
        "reference": _example24b_reference,
        "calm_at_origin": 2.0 / math.sqrt(5.0),
        "lip_at_origin": 2.0,
        "boundary_pairs": boundary_pairs,
    }
    return Fixture("example24b", model, FullSpaceDomain(2), meta)


@_register("sqrt_abs_2d")
def _sqrt_abs_2d() -> Fixture:
    model = ExpressionModel(parse_expression("sqrt(abs(x1))", 2))
    meta = {
        "robust_closed_form": lambda x, eps: math.sqrt(abs(x[0]) + eps),
        "calm_regularized_at_zero": lambda eps: 0.5 / math.sqrt(eps),
        "nonlipschitz_point": np.array([0.0, 0.0]),
    }
    return Fixture("sqrt_abs_2d", model, FullSpaceDomain(2), meta)


@_register("quad")
def _quad(H=None, c=None, d: float = 0.0) -> Fixture:
    H = np.diag([4.0, 1.0]) if H is None else _as_matrix(H)
    c = np.zeros(H.shape[0]) if c is None else _as_vector(c)
    model = QuadraticModel(H, c, float(d))
    return Fixture("quad", model, FullSpaceDomain(model.dimension), {})


@_register("affnorm")
def _affnorm(A=None, b=None) -> Fixture:
    A = np.diag([2.0, 1.0]) if A is None else _as_matrix(A)
    b = np.zeros(A.shape[0]) if b is None else _as_vector(b)
    model = AffineNormModel(A, b)
    return Fixture("affnorm", model, FullSpaceDomain(model.dimension), {})


@_register("jordan2")
def _jordan2(quantity: str = "abscissa") -> Fixture:
    J = np.array([[0.0, 1.0], [0.0, 0.0]])
    model: FunctionModel
    if quantity == "abscissa":
        model = SpectralAbscissaModel(2)
    elif quantity == "radius":
        model = SpectralRadiusModel(2)
    else:
        raise ValueError("quantity must be 'abscissa' or 'radius'")
    meta = {
        "matrix": J,
        "flat": J.reshape(-1),
        "robust_profile": lambda eps: math.sqrt(eps * (1.0 + eps)),
        "profile_derivative": lambda eps: (1.0 + 2.0 * eps) / (2.0 * math.sqrt(eps + eps * eps)),
    }
    return Fixture("jordan2", model, FullSpaceDomain(4), meta)


@_register("crossed_axes")
def _crossed_axes() -> Fixture:
    x_axis = SmoothEqualityDomain((parse_expression("x2", 2),), 2)
    y_axis = SmoothEqualityDomain((parse_expression("x1", 2),), 2)
    domain = UnionDomain((x_axis, y_axis))
    meta = {
        "witness_pairs": lambda r: (np.array([r, 0.0]), np.array([0.0, r])),
        "nearly_convex_limit": 1.0 / math.sqrt(2.0),
    }
    return Fixture("crossed_axes", None, domain, meta)


@_register("epi_dyadic")
def _epi_dyadic(depth: int = 12) -> Fixture:
    domain = DyadicEpigraphDomain(int(depth))
    meta = {
        "corner": lambda k: np.array([2.0 ** -k, 2.0 ** -k]),
        "radial_ratio": 1.0 / math.sqrt(2.0),
    }
    return Fixture("epi_dyadic", None, domain, meta)


@_register("unit_square")
def _unit_square() -> Fixture:
    return Fixture("unit_square", None, BoxDomain([0.0, 0.0], [1.0, 1.0]), {})


@_register("lower_halfplane")
def _lower_halfplane() -> Fixture:
    return Fixture("lower_halfplane", None, PolytopeDomain(np.array([[0.0, 1.0]]), np.array([0.0])), {})


@_register("circle")
def _circle(radius: float = 1.0) -> Fixture:
    r = float(radius)
    tree = parse_expression(f"x1^2 + x2^2 - {r * r!r}", 2)
    domain = SmoothEqualityDomain((tree,), 2)
    meta = {"radius": r, "prox_ratio": 0.5 / r}
    return Fixture("circle", None, domain, meta)


@_register("osc_quadratic")
def _osc_quadratic() -> Fixture:
    def f(x):
        t = float(x[0])
        return 0.0 if t == 0.0 else t * t * math.sin(1.0 / (t * t))

    def batch(P):
        t = np.asarray(P, dtype=float)[:, 0]
        out = np.zeros_like(t)
        nz = t != 0.0
        out[nz] = t[nz] ** 2 * np.sin(1.0 / t[nz] ** 2)
        return out

    model = CallableModel(f, 1, batch)
    return Fixture("osc_quadratic", model, FullSpaceDomain(1), {"calm_at_zero": 0.0})


@_register("three_adic_steps")
def _three_adic_steps(depth: int = 10) -> Fixture:
    """Stairs on the components [3^-i, 2*3^-i]; constant 3^-i on component i."""
    depth = int(depth)
    members = [BoxDomain([0.0], [0.0])]
    breakpoints = []
    values = []
    for i in range(1, depth + 1):
        lo, hi = 3.0 ** -i, 2.0 * 3.0 ** -i
        members.append(BoxDomain([lo], [hi]))
        breakpoints.append(lo)
        values.append(3.0 ** -i)
    # value for x >= 3^-i is 3^-i; below the last breakpoint the value is 0
    bps = np.array(sorted(breakpoints))
    pieces = [parse_expression("0", 1)]
    for bp in bps:
        i = round(-math.log(bp) / math.log(3.0))
        pieces.append(parse_expression(repr(3.0 ** -i), 1))
    model = Piecewise1DModel(breakpoints=bps, pieces=tuple(pieces))
    meta = {"lip_at_zero": 2.0, "calm_at_zero": 1.0, "depth": depth}
    return Fixture("three_adic_steps", model, UnionDomain(tuple(members)), meta)
