"""Calmness and Lipschitz modulus estimation for functions and their ball envelopes.

The calmness modulus at xbar is the limsup of |F(x) - F(xbar)| / |x - xbar|
as x -> xbar in the domain; the Lipschitz modulus takes the sup over pairs of
nearby points and is never smaller.  Limits are not computable, so every
estimator reports a shell table (radius, max sampled ratio) next to its
headline number, and lower-bound semantics apply throughout.  Pass/fail
thresholds live in configs and reports, not in the estimators.

For the radius profile g(eps) = f_eps(x), the derivative g'(eps) equals the
calmness modulus of the envelope at x wherever it exists, which turns calm
estimation into one-dimensional numerical differentiation of the profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .funcmodel import (
    DomainModel,
    FullSpaceDomain,
    FunctionModel,
    _sphere_offsets,
    _ball_offsets,
    spawn_rng,
)
from .regularize import (
    RobustProfile,
    SearchConfig,
    make_robust_evaluator,
    robust_value,
)

__all__ = [
    "ModulusEstimate",
    "SubgradientInterval",
    "OneOverEpsReport",
    "AgreementReport",
    "calm_from_profile",
    "calm_direct",
    "lip_direct",
    "lip_via_calm_limsup",
    "o_one_over_eps_report",
    "calm_lip_agreement_report",
    "subgradient_interval",
]

_DEFAULT_RADII = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
_H_SCHEDULE_REL = (1e-2, 5e-3, 2.5e-3)
_INF_GROWTH = 10.0


def derive_seed(seed: int, *key) -> int:
    state = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(state.generate_state(1)[0])


@dataclass
class ModulusEstimate:
    value: float  # math.inf when the shell maxima blow up
    kind: str  # 'calm' | 'lip'
    method: str  # 'profile-derivative' | 'spatial-sampling' | 'limsup-of-calm'
    samples_used: int = 0
    radius_schedule: tuple = ()
    shell_table: tuple = ()  # (radius, max ratio) pairs, shrinking radii
    one_sided: Optional[tuple] = None  # (left, right) for 1-d profiles
    quotients: tuple = ()
    infinite: bool = False

    def __post_init__(self):
        if not self.infinite and self.value < 0:
            raise ValueError("modulus estimates are nonnegative")


@dataclass
class SubgradientInterval:
    lower: float
    upper: float
    left: float
    right: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("interval bounds are out of order")


def _as_batch_fn(f):
    if isinstance(f, FunctionModel):
        return f.eval_many
    if hasattr(f, "eval_many"):
        return f.eval_many
    def batch(P):
        return np.array([float(f(row)) for row in np.asarray(P, dtype=float)])
    return batch


# ---------------------------------------------------------------------------
# profile-derivative estimators


def _profile_eval(profile: RobustProfile) -> Callable[[float], float]:
    if profile.evaluator is not None:
        return profile.evaluator
    return profile.value_at


def _one_sided_quotients(g, eps: float, hs: Sequence[float]):
    lefts = [(g(eps) - g(eps - h)) / h for h in hs]
    rights = [(g(eps + h) - g(eps)) / h for h in hs]
    return lefts, rights


def _extrapolate_linear(vals: Sequence[float]) -> float:
    # one-sided quotients have O(h) error; halving steps allow 2a - b
    if len(vals) >= 2:
        return 2.0 * vals[-1] - vals[-2]
    return vals[-1]


def calm_from_profile(profile: RobustProfile, eps: float,
                      h_schedule: Optional[Sequence[float]] = None) -> ModulusEstimate:
    """Calmness of the envelope at the profile's base point via g'(eps).

    Central difference quotients over the shrinking relative steps
    {1e-2, 5e-3, 2.5e-3} * eps, Richardson-stabilized; raw quotients and
    one-sided values ride along for kink diagnosis.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = _profile_eval(profile)
    hs = tuple(h_schedule) if h_schedule is not None else tuple(r * eps for r in _H_SCHEDULE_REL)
    if any(h <= 0 or h >= eps for h in hs):
        raise ValueError("steps must lie in (0, eps)")
    centrals = [(g(eps + h) - g(eps - h)) / (2.0 * h) for h in hs]
    value = centrals[-1]
    if len(centrals) >= 2:
        r1 = [(4.0 * centrals[i + 1] - centrals[i]) / 3.0 for i in range(len(centrals) - 1)]
        value = r1[-1]
        if len(r1) >= 2:
            value = (16.0 * r1[-1] - r1[-2]) / 15.0
    lefts, rights = _one_sided_quotients(g, eps, hs)
    return ModulusEstimate(
        value=max(float(value), 0.0),
        kind="calm",
        method="profile-derivative",
        samples_used=4 * len(hs) + 1,
        radius_schedule=hs,
        one_sided=(_extrapolate_linear(lefts), _extrapolate_linear(rights)),
        quotients=tuple(centrals),
    )


def subgradient_interval(profile: RobustProfile, eps: float,
                         h_schedule: Optional[Sequence[float]] = None) -> SubgradientInterval:
    """One-sided slope limits of the profile at eps, ordered as an interval."""
    g = _profile_eval(profile)
    hs = tuple(h_schedule) if h_schedule is not None else tuple(r * eps for r in _H_SCHEDULE_REL)
    lefts, rights = _one_sided_quotients(g, eps, hs)
    left = _extrapolate_linear(lefts)
    right = _extrapolate_linear(rights)
    return SubgradientInterval(min(left, right), max(left, right), left, right)


# ---------------------------------------------------------------------------
# spatial sampling estimators


def _shell_points(X: DomainModel, xbar: np.ndarray, r: float, n: int, seed: int) -> np.ndarray:
    if isinstance(X, FullSpaceDomain):
        return xbar + r * _sphere_offsets(X.dimension, n, seed)
    return X.sample_shell(xbar, r, n, seed)


def _finalize(shell_table, kind, method, samples, radii, default=0.0) -> ModulusEstimate:
    table = [(r, m) for r, m in shell_table if math.isfinite(m)]
    if not table:
        return ModulusEstimate(default, kind, method, samples, tuple(radii), tuple(shell_table))
    maxima = [m for _, m in table]
    infinite = len(maxima) >= 2 and maxima[-2] > 0 and maxima[-1] > _INF_GROWTH * maxima[-2]
    value = math.inf if infinite else max(maxima[-2:])
    return ModulusEstimate(
        value=value,
        kind=kind,
        method=method,
        samples_used=samples,
        radius_schedule=tuple(radii),
        shell_table=tuple(table),
        infinite=infinite,
    )


def calm_direct(f, X: DomainModel, xbar, radii: Optional[Sequence[float]] = None,
                n_per_radius: int = 4000, seed: int = 0) -> ModulusEstimate:
    """Max sampled ratio |F(x) - F(xbar)| / |x - xbar| over shrinking shells.

    Lower-bound semantics; the headline value is the max over the two
    smallest shells, with an infinity flag when the maxima blow up by more
    than 10x between them.
    """
    batch = _as_batch_fn(f)
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    radii = tuple(sorted(radii or _DEFAULT_RADII, reverse=True))
    f0 = float(batch(xbar[None, :])[0])
    table = []
    used = 0
    for j, r in enumerate(radii):
        pts = _shell_points(X, xbar, r, n_per_radius, derive_seed(seed, j))
        if pts.size == 0:
            table.append((r, math.nan))
            continue
        dist = np.linalg.norm(pts - xbar, axis=1)
        keep = dist > 1e-15 * (1.0 + r)
        pts, dist = pts[keep], dist[keep]
        vals = batch(pts)
        ratios = np.abs(vals - f0) / dist
        used += pts.shape[0]
        table.append((r, float(ratios.max()) if ratios.size else math.nan))
    return _finalize(table, "calm", "spatial-sampling", used, radii)


def lip_direct(f, X: DomainModel, xbar, radii: Optional[Sequence[float]] = None,
               n_pairs: int = 4000, seed: int = 0) -> ModulusEstimate:
    """Max sampled ratio |F(x) - F(x')| / |x - x'| over pairs inside shrinking balls."""
    batch = _as_batch_fn(f)
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    radii = tuple(sorted(radii or _DEFAULT_RADII, reverse=True))
    dim = xbar.shape[0]
    table = []
    used = 0
    for j, r in enumerate(radii):
        if isinstance(X, FullSpaceDomain):
            base = xbar + r * _ball_offsets(dim, n_pairs, derive_seed(seed, j, 0))
            dirs = _sphere_offsets(dim, n_pairs, derive_seed(seed, j, 1))
            g = spawn_rng(derive_seed(seed, j, 2), 4)
            steps = r * np.exp(g.uniform(np.log(1e-3), np.log(0.5), size=n_pairs))
            other = base + steps[:, None] * dirs
            keep = np.linalg.norm(other - xbar, axis=1) <= r
            P, Q = base[keep], other[keep]
        else:
            cloud_a = X.sample_in_ball(xbar, r, n_pairs, derive_seed(seed, j, 0),
                                       include_center=True)
            cloud_b = X.sample_in_ball(xbar, r, n_pairs, derive_seed(seed, j, 1),
                                       include_center=False)
            m = min(len(cloud_a), len(cloud_b))
            P, Q = cloud_a[:m], cloud_b[:m]
        if P.size == 0:
            table.append((r, math.nan))
            continue
        gaps = np.linalg.norm(P - Q, axis=1)
        keep = gaps > 1e-14 * (1.0 + r)
        P, Q, gaps = P[keep], Q[keep], gaps[keep]
        ratios = np.abs(batch(P) - batch(Q)) / gaps
        used += 2 * P.shape[0]
        table.append((r, float(ratios.max()) if ratios.size else math.nan))
    return _finalize(table, "lip", "spatial-sampling", used, radii)


def lip_via_calm_limsup(f, X: DomainModel, xbar, radii: Optional[Sequence[float]] = None,
                        points_per_level: int = 24, n_inner: int = 2000, seed: int = 0,
                        force: bool = False) -> ModulusEstimate:
    """Max of nearby calmness estimates over shrinking neighborhoods of xbar.

    Valid as a Lipschitz estimate when the domain is convex near xbar; call
    with force=True to bypass the convexity guard.
    """
    if not X.is_convex() and not force:
        raise ValueError("domain is not certified convex near xbar; pass force=True to override")
    batch = _as_batch_fn(f)
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    radii = tuple(sorted(radii or _DEFAULT_RADII, reverse=True))
    table = []
    used = 0
    for j, r in enumerate(radii):
        pts = _shell_points(X, xbar, r, points_per_level, derive_seed(seed, j, 7))
        level_max = 0.0
        got = False
        for i, p in enumerate(np.vstack([xbar[None, :], pts])):
            inner = (0.03 * r, 0.01 * r)
            est = calm_direct(batch, X, p, inner, n_per_radius=n_inner,
                              seed=derive_seed(seed, j, i))
            used += est.samples_used
            if est.infinite:
                return ModulusEstimate(math.inf, "lip", "limsup-of-calm", used, radii,
                                       tuple(table), infinite=True)
            level_max = max(level_max, est.value)
            got = True
        table.append((r, level_max if got else math.nan))
    return _finalize(table, "lip", "limsup-of-calm", used, radii)


# ---------------------------------------------------------------------------
# behavioral reports


@dataclass
class OneOverEpsReport:
    """Table of (eps, calm estimate, eps * calm); passes when the product decays."""

    rows: tuple  # (eps, calm, eps*calm)
    decrease_factor: float
    passed: bool
    columns = ("epsilon", "calm_est", "eps_times_calm")


def o_one_over_eps_report(envelope_value: Callable[[float], float],
                          eps_grid: Sequence[float],
                          decrease_factor: float = 10.0) -> OneOverEpsReport:
    """Check that eps * calm(eps) decays as eps shrinks over a multi-decade grid.

    ``envelope_value`` maps eps to the worst-case value at the fixed base
    point; the calm estimate is its stabilized derivative.
    """
    grid = sorted(float(e) for e in eps_grid)
    rows = []
    for eps in grid:
        profile = RobustProfile(
            x=np.zeros(1), radii=np.array([eps]),
            values=np.array([envelope_value(eps)]),
            methods=("oracle",), evaluator=envelope_value,
        )
        calm = calm_from_profile(profile, eps).value
        rows.append((eps, calm, eps * calm))
    products = [row[2] for row in rows]
    monotone = all(products[i] < products[i + 1] for i in range(len(products) - 1))
    total = products[-1] / products[0] if products[0] > 0 else math.inf
    return OneOverEpsReport(tuple(rows), decrease_factor, monotone and total >= decrease_factor)


@dataclass
class AgreementReport:
    """Per-eps calm (profile derivative) against lip (spatial sampling) of the envelope."""

    rows: tuple  # (eps, calm, lip, relative gap, flags)
    gap_tol: float
    passed: bool
    columns = ("epsilon", "calm_est", "lip_est", "gap_rel", "flags")


def calm_lip_agreement_report(model: FunctionModel, X: DomainModel, xbar,
                              eps_grid: Sequence[float], gap_tol: float = 0.05,
                              lip_radii_rel: Sequence[float] = (0.1, 0.03, 0.01),
                              n_pairs: int = 2500, seed: int = 0,
                              cfg: Optional[SearchConfig] = None) -> AgreementReport:
    """Compare the two modulus routes for the envelope at xbar per radius.

    Passes when the relative gap at the two smallest radii stays within
    ``gap_tol``.  Search-backed models share one frozen offset draw across
    every evaluation so both routes see the same envelope approximation.
    """
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    grid = sorted(float(e) for e in eps_grid)
    cfg = (cfg or SearchConfig(seed=seed)).with_matched_offsets(model.dimension)
    rows = []
    for eps in grid:
        def g(e: float) -> float:
            return robust_value(model, X, xbar, e, cfg)[0]

        profile = RobustProfile(x=xbar, radii=np.array([eps]), values=np.array([g(eps)]),
                                methods=("oracle",), evaluator=g)
        calm = calm_from_profile(profile, eps).value
        ev = make_robust_evaluator(model, X, eps, cfg)
        lip = lip_direct(ev, X, xbar, radii=tuple(r * eps for r in lip_radii_rel),
                         n_pairs=n_pairs, seed=derive_seed(seed, 11)).value
        denom = max(abs(calm), abs(lip), 1e-30)
        gap = abs(calm - lip) / denom
        flags = "" if math.isfinite(lip) else "lip-infinite"
        rows.append((eps, calm, lip, gap, flags))
    passed = all(row[3] <= gap_tol for row in rows[:2])
    return AgreementReport(tuple(rows), gap_tol, passed)
