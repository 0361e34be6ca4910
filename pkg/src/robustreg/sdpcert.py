"""Linear-matrix-inequality certificates for worst-case norms and quadratics.

For g(x) = ||Ax + b|| the bound t >= sup of g over the eps-ball at x holds
exactly when some real mu makes the block matrix

    [ t I_m      Ax+b    eps A  ]
    [ (Ax+b)'    t - mu   0     ]
    [ eps A'     0        mu I_n]

positive semidefinite.  For h(x) = x'Hx + 2c'x + d with H positive definite
the same certificate applies to A = H^(1/2), offset w = H^(1/2) x + H^(-1/2) c,
with an extra scalar constraint t - s^2 + c'H^(-1)c - d >= 0 linking the norm
level s to the quadratic level t.

Feasibility in mu is decided by maximizing the smallest eigenvalue, which is
concave along any affine symmetric family, with golden-section search; the
certified value is then recovered by bisection on t, since feasibility is
monotone in t.  Instances export to the SDPA sparse format for external
solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "NormLMIInstance",
    "QuadLMIInstance",
    "BlockSymMatrix",
    "FeasibilityResult",
    "build_norm_lmi",
    "feasible_norm",
    "robust_value_via_norm_lmi",
    "build_quad_lmi",
    "feasible_quad",
    "robust_value_via_quad_lmi",
    "export_sdpa",
    "parse_sdpa",
]

_GOLDEN_ITERS = 120


def _as_matrix(a) -> np.ndarray:
    M = np.array(a, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    return M


def _as_vector(v) -> np.ndarray:
    return np.array(v, dtype=float).reshape(-1)


@dataclass
class BlockSymMatrix:
    """Dense symmetric matrix with named block provenance (row, col) slices."""

    matrix: np.ndarray
    blocks: dict

    def __post_init__(self):
        M = self.matrix
        if np.abs(M - M.T).max() > 1e-12:
            raise ValueError("block assembly lost symmetry")

    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


@dataclass
class NormLMIInstance:
    A: np.ndarray
    b: np.ndarray
    x: np.ndarray
    eps: float

    def __post_init__(self):
        self.A = _as_matrix(self.A)
        self.b = _as_vector(self.b)
        self.x = _as_vector(self.x)
        self.eps = float(self.eps)
        m, n = self.A.shape
        if self.b.shape[0] != m or self.x.shape[0] != n:
            raise ValueError("dimension mismatch between A, b, x")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def block_dim(self) -> int:
        m, n = self.A.shape
        return m + 1 + n


@dataclass
class QuadLMIInstance:
    H: np.ndarray
    c: np.ndarray
    d: float
    x: np.ndarray
    eps: float

    def __post_init__(self):
        self.H = _as_matrix(self.H)
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise ValueError("H must be square")
        self.H = 0.5 * (self.H + self.H.T)
        self.c = _as_vector(self.c) if np.size(self.c) else np.zeros(n)
        self.d = float(self.d)
        self.x = _as_vector(self.x)
        self.eps = float(self.eps)
        if self.c.shape[0] != n or self.x.shape[0] != n:
            raise ValueError("dimension mismatch between H, c, x")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        w, Q = np.linalg.eigh(self.H)
        if w[0] <= 1e-12 * max(1.0, abs(w[-1])):
            raise ValueError("H must be positive definite")
        self.half = (Q * np.sqrt(w)) @ Q.T  # H^(1/2), symmetric
        self.neg_half_c = (Q * (1.0 / np.sqrt(w))) @ Q.T @ self.c  # H^(-1/2) c
        self.cHinvc = float(self.c @ ((Q * (1.0 / w)) @ Q.T @ self.c))

    @property
    def block_dim(self) -> int:
        return 2 * self.H.shape[0] + 1


@dataclass
class FeasibilityResult:
    feasible: bool
    lambda_min: float
    mu: Optional[float] = None
    s: Optional[float] = None


# ---------------------------------------------------------------------------
# block assembly


def build_norm_lmi(inst: NormLMIInstance, t: float, mu: float) -> BlockSymMatrix:
    """Assemble the (m+1+n) certificate block for given decision scalars."""
    A, b, x, eps = inst.A, inst.b, inst.x, inst.eps
    m, n = A.shape
    v = A @ x + b
    M = np.zeros((m + 1 + n, m + 1 + n))
    M[:m, :m] = t * np.eye(m)
    M[:m, m] = v
    M[m, :m] = v
    M[:m, m + 1:] = eps * A
    M[m + 1:, :m] = eps * A.T
    M[m, m] = t - mu
    M[m + 1:, m + 1:] = mu * np.eye(n)
    blocks = {
        "norm": (slice(0, m), slice(0, m)),
        "offset": (slice(0, m), slice(m, m + 1)),
        "coupling": (slice(0, m), slice(m + 1, m + 1 + n)),
        "scalar": (slice(m, m + 1), slice(m, m + 1)),
        "multiplier": (slice(m + 1, m + 1 + n), slice(m + 1, m + 1 + n)),
    }
    return BlockSymMatrix(M, blocks)


def build_quad_lmi(inst: QuadLMIInstance, t: float, s: float, mu: float):
    """Assemble the quadratic certificate block and its scalar side constraint.

    The off-diagonal offset column is H^(1/2) x + H^(-1/2) c in both symmetric
    slots; the returned residual is t - s^2 + c'H^(-1)c - d, which must be
    nonnegative alongside block feasibility.
    """
    n = inst.H.shape[0]
    w = inst.half @ inst.x + inst.neg_half_c
    M = np.zeros((2 * n + 1, 2 * n + 1))
    M[:n, :n] = s * np.eye(n)
    M[:n, n] = w
    M[n, :n] = w
    M[:n, n + 1:] = inst.eps * inst.half
    M[n + 1:, :n] = inst.eps * inst.half
    M[n, n] = s - mu
    M[n + 1:, n + 1:] = mu * np.eye(n)
    blocks = {
        "norm": (slice(0, n), slice(0, n)),
        "offset": (slice(0, n), slice(n, n + 1)),
        "coupling": (slice(0, n), slice(n + 1, 2 * n + 1)),
        "scalar": (slice(n, n + 1), slice(n, n + 1)),
        "multiplier": (slice(n + 1, 2 * n + 1), slice(n + 1, 2 * n + 1)),
    }
    residual = t - s * s + inst.cHinvc - inst.d
    return BlockSymMatrix(M, blocks), float(residual)


# ---------------------------------------------------------------------------
# feasibility by concave smallest-eigenvalue search


def _psd_tol(M: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.abs(M).max()))


def _golden_max(f, lo: float, hi: float, iters: int = _GOLDEN_ITERS):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_v = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if fc >= best_v:
            best_x, best_v = c, fc
        if fd >= best_v:
            best_x, best_v = d, fd
        if b - a <= 1e-13 * (1.0 + abs(b)):
            break
    return best_x, best_v


def feasible_norm(A, b, x, eps: float, t: float, tol: Optional[float] = None) -> FeasibilityResult:
    """Search for mu certifying t; the smallest eigenvalue is concave in mu."""
    inst = NormLMIInstance(A, b, x, eps)
    smax = float(np.linalg.norm(inst.A, 2))
    mu_hi = t + eps * eps * smax * smax + 1.0
    if mu_hi <= 0:
        return FeasibilityResult(False, -math.inf)

    def lam_min(mu: float) -> float:
        return build_norm_lmi(inst, t, mu).lambda_min()

    mu_star, lam_star = _golden_max(lam_min, 0.0, mu_hi)
    if tol is None:
        tol = _psd_tol(build_norm_lmi(inst, t, mu_star).matrix)
    if lam_star >= -tol:
        return FeasibilityResult(True, lam_star, mu=mu_star)
    return FeasibilityResult(False, lam_star, mu=mu_star)


def robust_value_via_norm_lmi(A, b, x, eps: float, tol: float = 1e-6) -> float:
    """Certified worst-case ||Ax+b|| over the eps-ball by bisection on t."""
    inst = NormLMIInstance(A, b, x, eps)
    base = float(np.linalg.norm(inst.A @ inst.x + inst.b))
    smax = float(np.linalg.norm(inst.A, 2))
    lo, hi = base, base + eps * smax
    if hi - lo <= tol:
        return 0.5 * (lo + hi)
    if not feasible_norm(A, b, x, eps, hi + 10 * tol).feasible:
        raise RuntimeError(f"bracket failure: t={hi} should certify but does not")
    if feasible_norm(A, b, x, eps, lo).feasible:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible_norm(A, b, x, eps, mid).feasible:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def feasible_quad(H, c, d, x, eps: float, t: float, tol: Optional[float] = None) -> FeasibilityResult:
    """Search (s, mu) certifying t for the quadratic.

    The block is monotone in s (adding to s adds a PSD diagonal term), so the
    scalar constraint's largest admissible s = sqrt(t - d + c'H^(-1)c) is
    optimal and only mu needs a search.
    """
    inst = QuadLMIInstance(H, c, d, x, eps)
    s_sq = t - inst.d + inst.cHinvc
    if s_sq < 0:
        return FeasibilityResult(False, -math.inf)
    s = math.sqrt(s_sq)
    lam_max_H = float(np.linalg.eigvalsh(inst.H)[-1])
    mu_hi = s + eps * eps * lam_max_H + 1.0

    def lam_min(mu: float) -> float:
        return build_quad_lmi(inst, t, s, mu)[0].lambda_min()

    mu_star, lam_star = _golden_max(lam_min, 0.0, mu_hi)
    if tol is None:
        tol = _psd_tol(build_quad_lmi(inst, t, s, mu_star)[0].matrix)
    if lam_star >= -tol:
        return FeasibilityResult(True, lam_star, mu=mu_star, s=s)
    return FeasibilityResult(False, lam_star, mu=mu_star, s=s)


def robust_value_via_quad_lmi(H, c, d, x, eps: float, tol: float = 1e-6) -> float:
    """Certified worst-case quadratic value over the eps-ball by bisection on t."""
    inst = QuadLMIInstance(H, c, d, x, eps)
    base = float(inst.x @ inst.H @ inst.x + 2.0 * inst.c @ inst.x + inst.d)
    grad = float(np.linalg.norm(inst.H @ inst.x + inst.c))
    lam_max_H = float(np.linalg.eigvalsh(inst.H)[-1])
    lo, hi = base, base + 2.0 * eps * grad + eps * eps * lam_max_H
    if hi - lo <= tol:
        return 0.5 * (lo + hi)
    if not feasible_quad(H, c, d, x, eps, hi + 10 * tol).feasible:
        raise RuntimeError(f"bracket failure: t={hi} should certify but does not")
    if feasible_quad(H, c, d, x, eps, lo).feasible:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible_quad(H, c, d, x, eps, mid).feasible:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# SDPA sparse export

# Convention: minimize c'y subject to  sum_i y_i F_i - F0  >= 0 (blockwise),
# entries listed as "var block i j value" with var 0 holding F0, 1-indexed
# upper-triangle positions.


def _entries(mat: np.ndarray, var: int, block: int, lines: list) -> None:
    n = mat.shape[0]
    for i in range(n):
        for j in range(i, n):
            v = mat[i, j]
            if v != 0.0:
                lines.append(f"{var} {block} {i + 1} {j + 1} {v!r}")


def export_sdpa(instance, path: str, decisions: Optional[dict] = None) -> None:
    """Write the instance as an SDPA sparse (.dat-s) problem minimizing t.

    Norm instances use one PSD block in variables (t, mu).  Quadratic
    instances use variables (t, s, mu) with the certificate block plus a
    2-by-2 block [[1, s], [s, t + c'H^(-1)c - d]] that carries the scalar
    constraint; a 1-by-1 block cannot express the s^2 term linearly.
    Optional known-good decision values are recorded as a comment.
    """
    lines = []
    if decisions:
        items = ";".join(f"{k}={decisions[k]!r}" for k in sorted(decisions))
        lines.append(f"*decisions: {items}")
    if isinstance(instance, NormLMIInstance):
        m, n = instance.A.shape
        dim = instance.block_dim
        lines += ["2", "1", f"{dim}", "1.0 0.0"]
        zero = build_norm_lmi(instance, 0.0, 0.0).matrix
        g_t = build_norm_lmi(instance, 1.0, 0.0).matrix - zero
        g_mu = build_norm_lmi(instance, 0.0, 1.0).matrix - zero
        _entries(-zero, 0, 1, lines)  # F0 = -constant part
        _entries(g_t, 1, 1, lines)
        _entries(g_mu, 2, 1, lines)
    elif isinstance(instance, QuadLMIInstance):
        dim = instance.block_dim
        lines += ["3", "2", f"{dim} 2", "1.0 0.0 0.0"]
        zero, _ = build_quad_lmi(instance, 0.0, 0.0, 0.0)
        g_s = build_quad_lmi(instance, 0.0, 1.0, 0.0)[0].matrix - zero.matrix
        g_mu = build_quad_lmi(instance, 0.0, 0.0, 1.0)[0].matrix - zero.matrix
        _entries(-zero.matrix, 0, 1, lines)
        _entries(g_s, 2, 1, lines)
        _entries(g_mu, 3, 1, lines)
        # scalar block: [[1, s], [s, t + c'H^(-1)c - d]] >= 0
        const = np.array([[1.0, 0.0], [0.0, instance.cHinvc - instance.d]])
        _entries(-const, 0, 2, lines)
        _entries(np.array([[0.0, 0.0], [0.0, 1.0]]), 1, 2, lines)
        _entries(np.array([[0.0, 1.0], [1.0, 0.0]]), 2, 2, lines)
    else:
        raise TypeError("instance must be NormLMIInstance or QuadLMIInstance")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_sdpa(path: str):
    """Read a .dat-s file back: (n_vars, block_sizes, objective, {(var, block): matrix})."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    body = [ln for ln in raw if not ln.startswith(("*", '"'))]
    n_vars = int(body[0])
    n_blocks = int(body[1])
    sizes = [int(tok) for tok in body[2].split()]
    if len(sizes) != n_blocks:
        raise ValueError("block size line disagrees with block count")
    objective = [float(tok) for tok in body[3].split()]
    mats: dict = {}
    for ln in body[4:]:
        var_s, blk_s, i_s, j_s, val_s = ln.split()
        var, blk, i, j = int(var_s), int(blk_s), int(i_s) - 1, int(j_s) - 1
        size = abs(sizes[blk - 1])
        key = (var, blk)
        if key not in mats:
            mats[key] = np.zeros((size, size))
        v = float(val_s)
        mats[key][i, j] = v
        mats[key][j, i] = v
    return n_vars, sizes, objective, mats
