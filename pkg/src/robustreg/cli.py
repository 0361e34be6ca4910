"""Command-line front end: experiment configs, fixture runs, CSV/JSON reports.

Subcommands: ``regularize``, ``profile``, ``moduli``, ``sdp-check``,
``pseudospectrum``, ``sets``, and ``reproduce <id>`` for the frozen named
experiments.  Every run emits a metadata header (version, seed, config hash)
followed by a CSV body; ``--json`` switches the body to JSON.  Output is
byte-identical for identical (config, seed), whatever the worker count.

Exit codes: 0 success, 1 reproduce threshold failure, 2 configuration error,
3 computation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from . import funcmodel as fm
from . import geomsets as gs
from . import moduli as md
from . import pseudospec as ps
from . import regularize as rg
from . import sdpcert as sc

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# formatting


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def emit(columns: Sequence[str], rows: Sequence[Sequence], meta: dict,
         out: Optional[str], as_json: bool) -> None:
    meta_items = ";".join(f"{k}={meta[k]}" for k in sorted(meta))
    if as_json:
        payload = {"meta": dict(sorted(meta.items())),
                   "columns": list(columns),
                   "rows": [[fmt(v) for v in row] for row in rows]}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        lines = [f"# meta: {meta_items}", ",".join(columns)]
        lines += [",".join(fmt(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def config_hash(options: dict) -> str:
    skip = {"out", "json", "workers", "config"}
    basis = {k: v for k, v in options.items() if k not in skip and v is not None}
    blob = json.dumps(basis, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def indexed_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map; results identical for any worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# literal parsing


def parse_matrix(text: str) -> np.ndarray:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad matrix literal {text!r}: {e}") from None
    M = np.array(data, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2:
        raise ConfigError(f"matrix literal must be 2-d, got shape {M.shape}")
    return M


def parse_vector(text: str) -> np.ndarray:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad vector literal {text!r}: {e}") from None
    v = np.array(data, dtype=float).reshape(-1)
    return v


def parse_grid(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as e:
        raise ConfigError(f"bad grid {text!r}: {e}") from None


def load_matrix_file(path: str) -> np.ndarray:
    from scipy.io import mmread

    M = mmread(path)
    return np.asarray(M.todense() if hasattr(M, "todense") else M, dtype=float)


def resolve_model(opts: dict):
    """Build (model, domain, meta) from fixture or inline flags."""
    if opts.get("fixture"):
        params = {}
        for key in ("k", "depth"):
            if opts.get(key) is not None:
                params[key] = opts[key]
        fx = fm.load_fixture(opts["fixture"], **params)
        return fx.model, fx.domain, fx.meta
    if opts.get("expr"):
        dim = opts.get("dim") or 1
        model = fm.ExpressionModel(fm.parse_expression(opts["expr"], int(dim)))
        return model, fm.FullSpaceDomain(model.dimension), {}
    if opts.get("quad_h"):
        H = parse_matrix(opts["quad_h"])
        c = parse_vector(opts["quad_c"]) if opts.get("quad_c") else np.zeros(H.shape[0])
        model = fm.QuadraticModel(H, c, float(opts.get("quad_d") or 0.0))
        return model, fm.FullSpaceDomain(model.dimension), {}
    if opts.get("a"):
        A = parse_matrix(opts["a"])
        b = parse_vector(opts["b"]) if opts.get("b") else np.zeros(A.shape[0])
        model = fm.AffineNormModel(A, b)
        return model, fm.FullSpaceDomain(model.dimension), {}
    raise ConfigError("no model given: use --fixture, --expr, --quad-h, or --A")


# ---------------------------------------------------------------------------
# subcommands


def cmd_regularize(opts: dict):
    model, domain, _ = resolve_model(opts)
    if opts.get("eps") is None:
        raise ConfigError("--eps is required")
    x = parse_vector(opts["x"]) if opts.get("x") else np.zeros(model.dimension)
    value, method = rg.robust_value(model, domain, x, float(opts["eps"]),
                                    rg.SearchConfig(seed=opts["seed"]))
    return ["epsilon", "value", "method"], [(float(opts["eps"]), value, method)], {}, 0


def cmd_profile(opts: dict):
    model, domain, _ = resolve_model(opts)
    if not opts.get("eps_grid"):
        raise ConfigError("--eps-grid is required")
    grid = rg.RadiusSpec.grid(sorted(parse_grid(opts["eps_grid"])))
    x = parse_vector(opts["x"]) if opts.get("x") else np.zeros(model.dimension)
    prof = rg.epsilon_profile(model, domain, x, grid, rg.SearchConfig(seed=opts["seed"]))
    rows = [
        (eps, val, meth, ";".join(f for f in prof.flags if f.endswith(f"@{i}")))
        for i, (eps, val, meth) in enumerate(zip(prof.radii, prof.values, prof.methods))
    ]
    return ["epsilon", "value", "method", "flags"], rows, {"flags": "|".join(prof.flags)}, 0


def cmd_moduli(opts: dict):
    model, domain, meta = resolve_model(opts)
    x = parse_vector(opts["x"]) if opts.get("x") else np.zeros(model.dimension)
    op = opts.get("op") or "calm"
    radii = tuple(sorted(parse_grid(opts["radii"]), reverse=True)) if opts.get("radii") else None
    n = int(opts.get("samples") or 4000)
    seed = opts["seed"]
    if op == "calm":
        est = md.calm_direct(model, domain, x, radii, n_per_radius=n, seed=seed)
        rows = [(r, m, est.kind) for r, m in est.shell_table]
        rows.append((0.0, est.value if not est.infinite else math.inf, "estimate"))
        return ["radius", "max_ratio", "kind"], rows, {"method": est.method}, 0
    if op == "lip":
        est = md.lip_direct(model, domain, x, radii, n_pairs=n, seed=seed)
        rows = [(r, m, est.kind) for r, m in est.shell_table]
        rows.append((0.0, est.value if not est.infinite else math.inf, "estimate"))
        return ["radius", "max_ratio", "kind"], rows, {"method": est.method}, 0
    if op == "limsup":
        est = md.lip_via_calm_limsup(model, domain, x, radii, seed=seed)
        rows = [(r, m, est.kind) for r, m in est.shell_table]
        rows.append((0.0, est.value, "estimate"))
        return ["radius", "max_ratio", "kind"], rows, {"method": est.method}, 0
    if op == "agreement":
        if not opts.get("eps_grid"):
            raise ConfigError("--eps-grid is required for agreement")
        rep = md.calm_lip_agreement_report(model, domain, x, parse_grid(opts["eps_grid"]),
                                           seed=seed, n_pairs=n)
        return list(rep.columns), list(rep.rows), {"passed": rep.passed}, 0
    if op == "o-one-over-eps":
        if not opts.get("eps_grid"):
            raise ConfigError("--eps-grid is required for o-one-over-eps")
        cfg = rg.SearchConfig(seed=seed).with_matched_offsets(model.dimension)

        def g(e: float) -> float:
            return rg.robust_value(model, domain, x, e, cfg)[0]

        rep = md.o_one_over_eps_report(g, parse_grid(opts["eps_grid"]))
        return list(rep.columns), list(rep.rows), {"passed": rep.passed}, 0
    raise ConfigError(f"unknown moduli op {op!r}")


def cmd_sdp_check(opts: dict):
    if opts.get("eps") is None:
        raise ConfigError("--eps is required")
    eps = float(opts["eps"])
    tol = float(opts.get("tol") or 1e-6)
    x = parse_vector(opts["x"]) if opts.get("x") else None
    if opts.get("h"):
        H = parse_matrix(opts["h"])
        c = parse_vector(opts["c"]) if opts.get("c") else np.zeros(H.shape[0])
        d = float(opts.get("d") or 0.0)
        x = x if x is not None else np.zeros(H.shape[0])
        value = sc.robust_value_via_quad_lmi(H, c, d, x, eps, tol)
        oracle = rg.robust_value_quadratic(H, c, d, x, eps)
        inst = sc.QuadLMIInstance(H, c, d, x, eps)
        kind = "quadratic"
    elif opts.get("a"):
        A = parse_matrix(opts["a"])
        b = parse_vector(opts["b"]) if opts.get("b") else np.zeros(A.shape[0])
        x = x if x is not None else np.zeros(A.shape[1])
        value = sc.robust_value_via_norm_lmi(A, b, x, eps, tol)
        oracle = rg.robust_value_affine_norm(A, b, x, eps)
        inst = sc.NormLMIInstance(A, b, x, eps)
        kind = "norm"
    else:
        raise ConfigError("give either --A/--b or --H/--c/--d")
    if opts.get("export"):
        sc.export_sdpa(inst, opts["export"])
    gap = abs(value - oracle)
    rows = [(kind, value, oracle, gap)]
    return ["kind", "value_lmi", "value_oracle", "gap_abs"], rows, {"tol": tol}, 0


def cmd_pseudospectrum(opts: dict):
    if opts.get("matrix"):
        A = parse_matrix(opts["matrix"])
        if A.shape[0] != A.shape[1] or A.shape[0] > 4:
            if A.shape[0] != A.shape[1]:
                raise ConfigError("matrix must be square")
            raise ConfigError("inline matrices are limited to n <= 4; use --matrix-file")
    elif opts.get("matrix_file"):
        A = load_matrix_file(opts["matrix_file"])
    else:
        raise ConfigError("give --matrix or --matrix-file")
    if opts.get("eps") is None and not opts.get("eps_grid"):
        raise ConfigError("--eps or --eps-grid is required")
    quantity = opts.get("quantity") or "abscissa"
    resolution = int(opts.get("resolution") or 257)
    grid = parse_grid(opts["eps_grid"]) if opts.get("eps_grid") else [float(opts["eps"])]
    rows = []
    for eps in grid:
        res = ps.pseudospectral_value(A, eps, quantity, resolution)
        rows.append((eps, res.value, res.z_star.real, res.z_star.imag,
                     res.sigma_at_z, res.grid_evaluations))
    return (["epsilon", "value", "z_re", "z_im", "sigma_min", "grid_evals"], rows,
            {"quantity": quantity, "n": A.shape[0]}, 0)


def cmd_sets(opts: dict):
    name = opts.get("set_fixture")
    if not name:
        raise ConfigError("--set-fixture is required")
    params = {}
    if opts.get("depth") is not None:
        params["depth"] = opts["depth"]
    fx = fm.load_fixture(name, **params)
    X = fx.domain
    x = parse_vector(opts["x"]) if opts.get("x") else np.zeros(X.dimension)
    op = opts.get("op") or "nearly-radial"
    seed = opts["seed"]
    shells = parse_grid(opts["shells"]) if opts.get("shells") else [0.3, 0.1, 0.03, 0.01]
    if op == "nearly-radial":
        rep = gs.nearly_radial_profile(X, x, shells, n_per_shell=int(opts.get("samples") or 200),
                                       seed=seed)
        return list(rep.columns), list(rep.rows), {"passed": rep.passed}, 0
    if op == "nearly-convex":
        rep = gs.nearly_convex_profile(X, x, shells, seed=seed)
        return list(rep.columns), list(rep.rows), {"passed": rep.passed}, 0
    if op == "prox-regular":
        rep = gs.prox_regular_profile(X, x, shells, seed=seed)
        return list(rep.columns), list(rep.rows), {"passed": rep.passed}, 0
    if op == "peaceful":
        grid = parse_grid(opts["eps_grid"]) if opts.get("eps_grid") else [0.45, 0.2, 0.1]
        est = gs.peaceful_profile(X, x, grid, seed=seed)
        rows = list(zip(est.radii, est.lip_estimates))
        return ["epsilon", "lip_estimate"], rows, {"one_peaceful": est.one_peaceful}, 0
    if op == "setmap-lip":
        if opts.get("eps") is None:
            raise ConfigError("--eps is required for setmap-lip")
        v = gs.setmap_lip_estimate(X, x, float(opts["eps"]), seed=seed)
        return ["epsilon", "lip_estimate"], [(float(opts["eps"]), v)], {}, 0
    if op == "tangent-cone":
        K = gs.tangent_cone(X, x)
        rows = [(type(K).__name__, _cone_repr(K))]
        return ["cone", "data"], rows, {}, 0
    raise ConfigError(f"unknown sets op {op!r}")


def _cone_repr(K) -> str:
    if isinstance(K, gs.Subspace):
        return "basis=" + json.dumps(K.basis.tolist())
    if isinstance(K, gs.PolyhedralHalfspaces):
        return "rows=" + json.dumps(K.rows.tolist())
    if isinstance(K, gs.PolyhedralGenerators):
        return "rays=" + json.dumps(K.rays.tolist())
    if isinstance(K, gs.UnionOfCones):
        return "members=" + "|".join(_cone_repr(m) for m in K.members)
    return type(K).__name__


# ---------------------------------------------------------------------------
# reproduce ids


@dataclass
class ReproduceResult:
    columns: list
    rows: list
    passed: bool
    extra: dict


def _golden_min_scalar(f, lo, hi, tol=1e-10):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _rep_intro1d_minimizer(opts) -> ReproduceResult:
    eps = float(opts.get("eps") or 0.25)
    fx = fm.load_fixture("intro1d")

    def envelope(x: float) -> float:
        return rg.robust_value_piecewise1d(fx.model, x, eps, fx.domain, scan_points=64)

    minimizer = _golden_min_scalar(envelope, -1.0, 1.0)
    alpha = fm.intro1d_alpha(eps)
    hs = (1e-4, 5e-5, 2.5e-5)
    lefts = [(envelope(minimizer) - envelope(minimizer - h)) / h for h in hs]
    rights = [(envelope(minimizer + h) - envelope(minimizer)) / h for h in hs]
    left = 2.0 * lefts[-1] - lefts[-2]
    right = 2.0 * rights[-1] - rights[-2]
    right_target = 1.0 / (2.0 * math.sqrt(eps + alpha))
    rows = [
        ("minimizer", minimizer, alpha, 1e-6, abs(minimizer - alpha) <= 1e-6),
        ("left_derivative", left, -1.0, 1e-3, abs(left + 1.0) <= 1e-3),
        ("right_derivative", right, right_target, 1e-3, abs(right - right_target) <= 1e-3),
    ]
    return ReproduceResult(["quantity", "value", "target", "tol", "ok"], rows,
                           all(r[4] for r in rows), {"eps": eps})


def _rep_root_k_calm(opts) -> ReproduceResult:
    rows = []
    for k in (2, 3):
        fx = fm.load_fixture("root_k", k=k)

        def g(e: float) -> float:
            return rg.robust_value_piecewise1d(fx.model, 0.0, e, fx.domain, scan_points=64)

        for eps in (1e-3, 1e-2, 1e-1):
            profile = rg.RobustProfile(np.zeros(1), np.array([eps]), np.array([g(eps)]),
                                       ("oracle",), evaluator=g)
            est = md.calm_from_profile(profile, eps)
            target = fx.meta["calm_at_zero"](eps)
            ok = abs(est.value - target) <= 0.01 * abs(target)
            rows.append((k, eps, est.value, target, ok))
    return ReproduceResult(["k", "epsilon", "calm_est", "target", "ok"], rows,
                           all(r[4] for r in rows), {})


def _rep_example24b_moduli(opts) -> ReproduceResult:
    fx = fm.load_fixture("example24b")
    radii = (1e-1, 3e-2, 1e-2, 3e-3)
    calm = md.calm_direct(fx.model, fx.domain, [0.0, 0.0], radii, n_per_radius=25_000, seed=2024)
    lip = md.lip_direct(fx.model, fx.domain, [0.0, 0.0], radii, n_pairs=25_000, seed=2024)
    ct, lt = fx.meta["calm_at_origin"], fx.meta["lip_at_origin"]
    rows = [
        ("calm", calm.value, ct, 0.02, abs(calm.value - ct) <= 0.02 * ct),
        ("lip", lip.value, lt, 0.02, abs(lip.value - lt) <= 0.02 * lt),
    ]
    return ReproduceResult(["kind", "estimate", "target", "rel_tol", "ok"], rows,
                           all(r[4] for r in rows), {"samples": 100_000})


def _random_norm_instance(i: int):
    g = fm.spawn_rng(20_240, i)
    m = int(g.integers(1, 5))
    n = int(g.integers(1, 5))
    A = g.uniform(-2.0, 2.0, (m, n))
    b = g.uniform(-2.0, 2.0, m)
    x = g.uniform(-2.0, 2.0, n)
    eps = float(g.uniform(0.1, 1.0))
    return A, b, x, eps


def _rep_sdp_norm(opts) -> ReproduceResult:
    def check(i: int):
        A, b, x, eps = _random_norm_instance(i)
        oracle = rg.robust_value_affine_norm(A, b, x, eps)
        value = sc.robust_value_via_norm_lmi(A, b, x, eps, tol=1e-6)
        tight = abs(value - oracle) <= 1e-5 * (1.0 + abs(oracle))
        below = not sc.feasible_norm(A, b, x, eps, oracle - 1e-3).feasible
        return (i, value, oracle, abs(value - oracle), tight and below)

    rows = indexed_map(check, range(50), opts["workers"])
    return ReproduceResult(["instance", "value_lmi", "value_oracle", "gap_abs", "ok"],
                           rows, all(r[4] for r in rows), {"instances": 50})


def _random_quad_instance(i: int):
    g = fm.spawn_rng(77_310, i)
    n = int(g.integers(1, 5))
    M = g.uniform(-1.0, 1.0, (n, n))
    H = M.T @ M + 0.1 * np.eye(n)
    c = g.uniform(-1.0, 1.0, n)
    d = float(g.uniform(-1.0, 1.0))
    x = g.uniform(-1.0, 1.0, n)
    eps = float(g.uniform(0.1, 1.0))
    return H, c, d, x, eps


def _rep_sdp_quad(opts) -> ReproduceResult:
    def check(i: int):
        H, c, d, x, eps = _random_quad_instance(i)
        oracle = rg.robust_value_quadratic(H, c, d, x, eps)
        value = sc.robust_value_via_quad_lmi(H, c, d, x, eps, tol=1e-6)
        ok = abs(value - oracle) <= 1e-5 * (1.0 + abs(oracle))
        return (i, value, oracle, abs(value - oracle), ok)

    rows = indexed_map(check, range(50), opts["workers"])
    return ReproduceResult(["instance", "value_lmi", "value_oracle", "gap_abs", "ok"],
                           rows, all(r[4] for r in rows), {"instances": 50})


def _rep_jordan2_abscissa(opts) -> ReproduceResult:
    J = np.array([[0.0, 1.0], [0.0, 0.0]])
    D = np.diag([-1.0, -2.0])
    rows = []

    def run(args):
        A, eps, target, tol, label = args
        value = ps.pseudospectral_value(A, eps).value
        return (label, eps, value, target, tol, abs(value - target) <= tol)

    tasks = [(J, e, math.sqrt(e * (1 + e)), 1e-4, "jordan2") for e in (1e-3, 1e-2, 1e-1)]
    tasks += [(D, 0.25, -0.75, 1e-6, "diag")]
    tasks += [(J, 0.0, 0.0, 1e-6, "jordan2"), (D, 0.0, -1.0, 1e-6, "diag")]
    rows = indexed_map(run, tasks, opts["workers"])
    return ReproduceResult(["matrix", "epsilon", "value", "target", "tol", "ok"], rows,
                           all(r[5] for r in rows), {})


def _rep_o_one_over_eps(opts) -> ReproduceResult:
    grid = (1e-4, 1e-3, 1e-2, 1e-1)
    J = np.array([[0.0, 1.0], [0.0, 0.0]])

    def g_jordan(e: float) -> float:
        return ps.pseudospectral_value(J, e).value

    rep1 = md.o_one_over_eps_report(g_jordan, grid)
    fx = fm.load_fixture("sqrt_abs_2d")
    cfg = rg.SearchConfig(seed=11).with_matched_offsets(2)

    def g_sqrt(e: float) -> float:
        return rg.robust_value(fx.model, fx.domain, np.zeros(2), e, cfg)[0]

    rep2 = md.o_one_over_eps_report(g_sqrt, grid)
    rows = [("jordan2",) + r for r in rep1.rows] + [("sqrt_abs_2d",) + r for r in rep2.rows]
    passed = rep1.passed and rep2.passed
    return ReproduceResult(["fixture", "epsilon", "calm_est", "eps_times_calm"], rows,
                           passed, {"decrease_factor": 10.0})


def _rep_calm_lip_agreement(opts) -> ReproduceResult:
    grid = (1e-2, 1e-1)
    rows = []
    passed = True
    for name in ("sqrt_abs_2d", "intro1d"):
        fx = fm.load_fixture(name)
        xbar = fx.meta["nonlipschitz_point"]
        rep = md.calm_lip_agreement_report(fx.model, fx.domain, xbar, grid,
                                           gap_tol=0.05, n_pairs=2500, seed=5)
        rows += [(name,) + r for r in rep.rows]
        passed = passed and rep.passed
    return ReproduceResult(["fixture", "epsilon", "calm_est", "lip_est", "gap_rel", "flags"],
                           rows, passed, {"gap_tol": 0.05})


def _rep_square_peaceful(opts) -> ReproduceResult:
    fx = fm.load_fixture("unit_square")
    xbar = [0.3, 0.3]
    inner = gs.setmap_lip_estimate(fx.domain, xbar, eps=0.2, pair_budget=24,
                                   n_cloud=2000, seed=31)
    prof = gs.peaceful_profile(fx.domain, xbar, (0.45, 0.2, 0.1), pair_budget=16,
                               n_cloud=2000, seed=31)
    rows = [("setmap_lip_interior", inner, 0.95, 1.05, 0.95 <= inner <= 1.05)]
    for e, v in zip(prof.radii, prof.lip_estimates):
        rows.append((f"peaceful@{fmt(e)}", v, 0.0, 1.05, v <= 1.05))
    ok = all(r[4] for r in rows) and prof.one_peaceful
    return ReproduceResult(["quantity", "value", "lo", "hi", "ok"], rows, ok,
                           {"one_peaceful": prof.one_peaceful})


def _rep_crossed_axes_radial(opts) -> ReproduceResult:
    fx = fm.load_fixture("crossed_axes")
    shells = (0.3, 0.1, 0.03, 0.01)
    rep = gs.nearly_radial_profile(fx.domain, [0.0, 0.0], shells, n_per_shell=120, seed=7)
    rows = [("radial", r, ratio, 0.0, ratio == 0.0) for r, ratio, _ in rep.rows]
    witness = [(np.array([1.0 / n, 0.0]), np.array([0.0, 1.0 / n])) for n in range(3, 9)]
    conv = gs.nearly_convex_profile(fx.domain, [0.0, 0.0], shells[:2], n_pairs=40, seed=7,
                                    witness_pairs=witness)
    wrow = conv.rows[-1]
    target = fx.meta["nearly_convex_limit"]
    rows.append(("convex_witness", wrow[0], wrow[1], target, wrow[1] >= 0.70))
    ok = all(r[4] for r in rows)
    return ReproduceResult(["check", "radius", "ratio", "target", "ok"], rows, ok, {})


def _rep_epi_dyadic(opts) -> ReproduceResult:
    fx = fm.load_fixture("epi_dyadic", depth=12)
    target = fx.meta["radial_ratio"]
    shells = [2.0 ** -n * math.sqrt(2.0) for n in range(3, 11)]
    rep = gs.nearly_radial_profile(fx.domain, [0.0, 0.0], shells, n_per_shell=60, seed=7)
    rows = [(r, ratio, target, abs(ratio - target) <= 1e-6) for r, ratio, _ in rep.rows]
    ok = all(r[3] for r in rows) and not rep.passed  # the diagnostic must fail
    return ReproduceResult(["radius", "ratio", "target", "ok"], rows, ok,
                           {"nearly_radial_verdict": rep.passed})


def _rep_cone_pythagoras(opts) -> ReproduceResult:
    def check(i: int):
        g = fm.spawn_rng(4_242, i)
        m = int(g.integers(3, 7))
        rows_ = g.standard_normal((m, 3))
        v = g.standard_normal(3)
        C = gs.PolyhedralHalfspaces(rows_)
        d1 = gs.cone_distance(v, C)
        d2 = gs.cone_distance(v, gs.polar_cone(C))
        lhs = d1 * d1 + d2 * d2
        rhs = float(v @ v)
        ok = abs(lhs - rhs) <= 1e-8 * max(1.0, rhs)
        return (i, d1, d2, lhs, rhs, ok)

    rows = indexed_map(check, range(100), opts["workers"])
    return ReproduceResult(["instance", "dist_cone", "dist_polar", "sum_sq", "norm_sq", "ok"],
                           rows, all(r[5] for r in rows), {"instances": 100})


_REPRODUCE = {
    "intro1d-minimizer": _rep_intro1d_minimizer,
    "root-k-calm": _rep_root_k_calm,
    "example24b-moduli": _rep_example24b_moduli,
    "sdp-norm-equivalence": _rep_sdp_norm,
    "sdp-quad-equivalence": _rep_sdp_quad,
    "jordan2-abscissa": _rep_jordan2_abscissa,
    "o-one-over-eps": _rep_o_one_over_eps,
    "calm-lip-agreement": _rep_calm_lip_agreement,
    "square-peaceful": _rep_square_peaceful,
    "crossed-axes-radial": _rep_crossed_axes_radial,
    "epi-dyadic-fail": _rep_epi_dyadic,
    "cone-pythagoras": _rep_cone_pythagoras,
}


def reproduce_ids():
    return sorted(_REPRODUCE)


def run_reproduce(rid: str, opts: dict) -> ReproduceResult:
    if rid not in _REPRODUCE:
        raise ConfigError(f"unknown reproduce id {rid!r}; known: {', '.join(reproduce_ids())}")
    return _REPRODUCE[rid](opts)


def cmd_reproduce(opts: dict):
    rid = opts["id"]
    result = run_reproduce(rid, opts)
    meta = {"id": rid, "passed": result.passed}
    meta.update({k: fmt(v) if isinstance(v, float) else v for k, v in result.extra.items()})
    return result.columns, result.rows, meta, (0 if result.passed else 1)


# ---------------------------------------------------------------------------
# argument plumbing


_MODEL_FLAGS = [
    (["--fixture"], {"help": "named fixture, e.g. intro1d, root_k, example24b"}),
    (["--k"], {"type": int, "help": "fixture parameter k"}),
    (["--depth"], {"type": int, "help": "fixture truncation depth"}),
    (["--expr"], {"help": "inline expression text"}),
    (["--dim"], {"type": int, "help": "dimension for --expr"}),
    (["--quad-h"], {"dest": "quad_h", "help": "quadratic H as JSON"}),
    (["--quad-c"], {"dest": "quad_c", "help": "quadratic c as JSON"}),
    (["--quad-d"], {"dest": "quad_d", "type": float, "help": "quadratic offset d"}),
    (["--A"], {"dest": "a", "help": "matrix A as JSON"}),
    (["--b"], {"dest": "b", "help": "vector b as JSON"}),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustreg",
        description="Worst-case-over-a-ball regularization toolkit",
        epilog="reproduce ids: " + ", ".join(reproduce_ids()),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file; flags override")
        p.add_argument("--out", help="output CSV path (default stdout)")
        p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("regularize", help="worst-case value at one radius")
    common(p)
    for flags, kw in _MODEL_FLAGS:
        p.add_argument(*flags, **kw)
    p.add_argument("--x", help="base point as JSON")
    p.add_argument("--eps", type=float)

    p = sub.add_parser("profile", help="radius profile of worst-case values")
    common(p)
    for flags, kw in _MODEL_FLAGS:
        p.add_argument(*flags, **kw)
    p.add_argument("--x", help="base point as JSON")
    p.add_argument("--eps-grid", dest="eps_grid", help="comma-separated radii")

    p = sub.add_parser("moduli", help="calmness and Lipschitz estimation")
    common(p)
    for flags, kw in _MODEL_FLAGS:
        p.add_argument(*flags, **kw)
    p.add_argument("--x", help="base point as JSON")
    p.add_argument("--op", choices=["calm", "lip", "limsup", "agreement", "o-one-over-eps"])
    p.add_argument("--radii", help="comma-separated shell radii")
    p.add_argument("--samples", type=int)
    p.add_argument("--eps-grid", dest="eps_grid")

    p = sub.add_parser("sdp-check", help="certificate value against the exact oracle")
    common(p)
    p.add_argument("--A", dest="a")
    p.add_argument("--b", dest="b")
    p.add_argument("--H", dest="h")
    p.add_argument("--c", dest="c")
    p.add_argument("--d", dest="d", type=float)
    p.add_argument("--x")
    p.add_argument("--eps", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--export", help="write the instance in SDPA sparse format")

    p = sub.add_parser("pseudospectrum", help="perturbed spectral abscissa or radius")
    common(p)
    p.add_argument("--matrix", help="inline JSON matrix (n <= 4)")
    p.add_argument("--matrix-file", dest="matrix_file", help="Matrix Market file")
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-grid", dest="eps_grid")
    p.add_argument("--quantity", choices=["abscissa", "radius"])
    p.add_argument("--resolution", type=int)

    p = sub.add_parser("sets", help="set-geometry diagnostics")
    common(p)
    p.add_argument("--set-fixture", dest="set_fixture")
    p.add_argument("--depth", type=int)
    p.add_argument("--op", choices=["nearly-radial", "nearly-convex", "prox-regular",
                                    "peaceful", "setmap-lip", "tangent-cone"])
    p.add_argument("--x")
    p.add_argument("--shells")
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-grid", dest="eps_grid")
    p.add_argument("--samples", type=int)

    p = sub.add_parser("reproduce", help="run a frozen named experiment")
    common(p)
    p.add_argument("id", choices=reproduce_ids())
    p.add_argument("--eps", type=float, help="radius override where the id accepts one")
    return parser


_COMMANDS = {
    "regularize": cmd_regularize,
    "profile": cmd_profile,
    "moduli": cmd_moduli,
    "sdp-check": cmd_sdp_check,
    "pseudospectrum": cmd_pseudospectrum,
    "sets": cmd_sets,
    "reproduce": cmd_reproduce,
}


def _apply_config(ns: argparse.Namespace, argv: Sequence[str]) -> dict:
    opts = vars(ns).copy()
    if opts.get("config"):
        with open(opts["config"], "rb") as fh:
            table = tomllib.load(fh)
        valid = set(opts)
        explicit = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in table.items():
            dest = key.replace("-", "_")
            if dest not in valid:
                raise ConfigError(f"unknown config key {key!r} for command {opts['command']!r}")
            if dest not in explicit:
                opts[dest] = value
    return opts


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        opts = _apply_config(ns, argv)
    except (ConfigError, OSError, tomllib.TOMLDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    meta = {
        "version": __version__,
        "command": opts["command"],
        "seed": opts.get("seed", 0),
        "config_hash": config_hash(opts),
    }
    try:
        columns, rows, extra, code = _COMMANDS[opts["command"]](opts)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # computation failure
        print(f"computation error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    meta.update(extra)
    emit(columns, rows, meta, opts.get("out"), bool(opts.get("json")))
    return code


if __name__ == "__main__":
    sys.exit(main())
