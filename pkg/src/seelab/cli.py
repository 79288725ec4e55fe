"""Command-line driver: ``seelab <command> --config run.json [--out DIR] [--workers N] [--seed S]``.

Every run writes its data files (CSV with 17 significant digits, JSON
reports), a copy of the configuration and ``manifest.json`` into the output
directory. Exit status: 0 all checks pass, 1 a check failed, 2 configuration
error, 3 numeric error.

Only ``SEELAB_OUT`` and ``SEELAB_WORKERS`` are read from the environment.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import filecmp
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .borwein_preiss import DiscreteDomain, bp_maximize, builtin_objective, load_objective_csv, verify_bp
from .bsde import RegressionBasis, solve_bsde
from .errors import ArgumentError, ConfigError, DomainError, NumericError, PreconditionError, ShapeError
from .gauge import GaugeParams
from .problems import (LqSpec, QWienerSpec, audit_assumptions, build_heat, build_hyperbolic,
                       build_lq_benchmark, build_ou, build_parabolic)
from .simulate import (check_ito_inequality, check_moment_bounds, simulate_see, simulate_yosida,
                       sup_moment_difference)
from .value import PolicyClass, SimConfig, check_dpp, config_hash, estimate_value, probe_regularity
from .viscosity import (bump_candidate, check_touch, hjb_residual, probe_grid, stability_experiment,
                        touching_pair)

log = logging.getLogger("seelab")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("simulate", "bsde", "value", "dpp-check", "bp-solve", "verify-assumptions", "residual",
            "touch-check", "stability", "regularity", "yosida")

_number_list = {"type": "array", "items": {"type": "number"}}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["seed", "problem"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "out": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
        "problem": {
            "type": "object",
            "required": ["preset"],
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["ou", "parabolic", "hyperbolic", "lq", "lq2", "heat"]},
                "N": {"type": "integer", "minimum": 1, "maximum": 126},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "q_power": {"type": "number"},
                "controls": _number_list,
                "lam": {"type": "number", "maximum": 0},
                "noise": {"type": "number", "minimum": 0},
                "sigma_scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_steps": {"type": "integer", "minimum": 1},
                "n_paths": {"type": "integer", "minimum": 1},
                "block_size": {"type": "integer", "minimum": 1},
            },
        },
        "t0": {"type": "number", "minimum": 0},
        "x0": _number_list,
        "basis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"degree": {"type": "integer", "minimum": 0},
                           "n_coeffs": {"type": "integer", "minimum": 1}},
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "piecewise", "feedback"]},
                "breakpoints": _number_list,
                "edges": _number_list,
                "budget": {"type": "integer", "minimum": 1},
            },
        },
        "params": {"type": "object"},
    },
}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration: {exc}", path="$") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "$" + "".join(f"[{p!r}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path)
        raise ConfigError(exc.message, path=path) from exc


def canonical_hash(cfg):
    """Hash of the configuration without the output directory and worker count."""
    clean = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
    return config_hash(clean)


def build_problem(pcfg):
    name = pcfg["preset"]
    kw = {}
    if "horizon" in pcfg:
        kw["horizon"] = pcfg["horizon"]
    if name == "ou":
        for key in ("lam", "noise"):
            if key in pcfg:
                kw[key] = pcfg[key]
        return build_ou(**kw), None
    if name in ("parabolic", "hyperbolic"):
        N = pcfg.get("N", 16 if name == "parabolic" else 8)
        q = QWienerSpec.power_law(pcfg.get("q_power", 3.0), N)
        if "controls" in pcfg:
            kw["controls"] = tuple(pcfg["controls"])
        builder = build_parabolic if name == "parabolic" else build_hyperbolic
        return builder(q=q, N=N, **kw), None
    if name == "heat":
        return build_heat(N=pcfg.get("N", 8), **kw), None
    spec = LqSpec() if name == "lq" else LqSpec.two_dim()
    if "horizon" in pcfg:
        spec = LqSpec(**{**spec.__dict__, "horizon": pcfg["horizon"]})
    if "sigma_scale" in pcfg:
        spec = LqSpec(**{**spec.__dict__, "sigma": np.asarray(spec.sigma) * pcfg["sigma_scale"]})
    return build_lq_benchmark(spec)


def _sim(cfg, workers):
    s = cfg.get("sim", {})
    return SimConfig(n_steps=s.get("n_steps", 128), n_paths=s.get("n_paths", 4096), seed=cfg["seed"],
                     workers=workers, block_size=s.get("block_size", 512))


def _basis(cfg):
    b = cfg.get("basis", {})
    return RegressionBasis(degree=b.get("degree", 2), n_coeffs=b.get("n_coeffs"))


def _policy(cfg, prob):
    p = cfg.get("policy", {"kind": "constant"})
    n = len(prob.controls)
    kind = p.get("kind", "constant")
    if kind == "constant":
        return PolicyClass.constant(n)
    if kind == "piecewise":
        return PolicyClass.piecewise(n, p.get("breakpoints", []), p.get("budget", 64), cfg["seed"])
    return PolicyClass.feedback(n, p.get("edges", []), p.get("budget", 64), cfg["seed"])


def _x0(cfg, prob):
    x = np.zeros(prob.dim)
    if "x0" in cfg:
        v = np.asarray(cfg["x0"], dtype=float)
        if v.size > prob.dim:
            raise ConfigError(f"x0 has {v.size} entries for a {prob.dim}-dimensional state", path="$.x0")
        x[: v.size] = v
    return x


def _params(cfg):
    return cfg.get("params", {})


def _write_csv(path, header, rows):
    """Rows of numbers (ints kept as ints, floats with 17 significant digits)."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, np.integer, str)) else f"{float(v):.17g}"
                              for v in row) + "\n")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return str(x)


# each command returns a dict of named boolean checks and writes its files into `out`


def cmd_simulate(cfg, prob, cand, out, workers):
    sim = _sim(cfg, workers)
    x0 = _x0(cfg, prob)
    t0 = cfg.get("t0", 0.0)
    n = sim.steps_for(prob.horizon, prob.horizon - t0)
    bundle = simulate_see(prob, t0, x0, None, n_steps=n, n_paths=sim.n_paths, seed=sim.seed,
                          block_size=sim.block_size, workers=workers)
    bundle.to_csv(out / "paths.csv")
    bundle.increments_to_csv(out / "increments.csv")
    bundle.write_sidecar(out / "paths.json")
    checks = {"finite": bool(np.all(np.isfinite(bundle.paths)))}
    if prob.meta.get("kind") == "heat":
        flow = np.stack([prob.op.semigroup(t - t0, x0) for t in bundle.times])
        checks["deterministic_flow"] = bool(np.max(np.abs(bundle.paths - flow[:, None, :])) <= 1e-12)
    else:
        inc = bundle.validate_increments()
        report = {"increments": inc}
        for p in _params(cfg).get("moments", []):
            m = check_moment_bounds(bundle, p, x0, _params(cfg).get("fit_window", 1 / 16))
            report[f"moment_p{p}"] = {"sup_moment": m.sup_moment, "constant": m.constant,
                                      "exponent": m.exponent}
        if _params(cfg).get("ito_power"):
            g = GaugeParams(t0, np.zeros(prob.dim), prob.op, _params(cfg)["ito_power"])
            ito = check_ito_inequality(bundle, prob, g)
            report["ito"] = {"passed": ito.passed, "max_z": float(ito.z.max())}
            checks["ito_inequality"] = ito.passed
        _write_json(out / "simulate_report.json", report)
        checks["increments"] = inc["passed"]
    return checks


def cmd_bsde(cfg, prob, cand, out, workers):
    sim = _sim(cfg, workers)
    x0 = _x0(cfg, prob)
    t0 = cfg.get("t0", 0.0)
    n = sim.steps_for(prob.horizon, prob.horizon - t0)
    bundle = simulate_see(prob, t0, x0, None, n_steps=n, n_paths=sim.n_paths, seed=sim.seed,
                          block_size=sim.block_size, workers=workers)
    pair = solve_bsde(bundle, prob, _basis(cfg))
    rows = [(k, float(bundle.times[k]), float(pair.Y[k].mean()), float(pair.Y[k].std()))
            for k in range(bundle.n_steps + 1)]
    _write_csv(out / "bsde.csv", ["step", "t", "y_mean", "y_std"], rows)
    _write_json(out / "bsde.json", {"value": pair.value, "stderr": pair.stderr,
                                    "terminal_kind": pair.terminal_kind})
    terminal_ok = bool(np.array_equal(pair.Y[-1], prob.phi_terminal(bundle.paths[-1])))
    return {"finite": bool(np.all(np.isfinite(pair.Y)) and np.all(np.isfinite(pair.Z))),
            "terminal": terminal_ok}


def cmd_value(cfg, prob, cand, out, workers):
    sim, basis, pol = _sim(cfg, workers), _basis(cfg), _policy(cfg, prob)
    states = _params(cfg).get("states", [cfg.get("x0", [0.0] * prob.dim)])
    t = cfg.get("t0", 0.0)
    rows, checks = [], {}
    for x in states:
        xv = np.zeros(prob.dim)
        xv[: len(x)] = x
        e = estimate_value(prob, t, xv, pol, sim, basis)
        rows.append((t, *xv, e.value, e.mc_stderr, e.argmax_policy))
        if cand is not None:
            exact = float(cand.value(t, xv))
            tol = 3 * e.mc_stderr + _params(cfg).get("dt_factor", 5.0) * prob.horizon / sim.n_steps
            checks[f"closed_form_x{len(rows) - 1}"] = abs(e.value - exact) <= tol
    header = ["t"] + [f"x_{i}" for i in range(prob.dim)] + ["value", "stderr", "policy"]
    _write_csv(out / "values.csv", header, rows)
    checks["finite"] = all(np.isfinite(r[-3]) for r in rows)
    return checks


def cmd_dpp(cfg, prob, cand, out, workers):
    sim, basis, pol = _sim(cfg, workers), _basis(cfg), _policy(cfg, prob)
    t = cfg.get("t0", 0.0)
    delta = _params(cfg).get("delta", (prob.horizon - t) / 2)
    r = check_dpp(prob, t, _x0(cfg, prob), delta, pol, sim, basis)
    _write_csv(out / "dpp.csv", ["t", "delta", "lhs", "rhs", "gap", "tolerance", "ratio"],
               [(t, delta, r.lhs, r.rhs, r.gap, r.tolerance, r.ratio)])
    return {"dpp": r.passed}


def _bp_domain(cfg, prob):
    p = _params(cfg)
    rng = np.random.default_rng(cfg["seed"])
    times = np.asarray(p.get("times", np.linspace(0, prob.horizon, p.get("n_times", 5))), dtype=float)
    if "states" in p:
        states = np.asarray(p["states"], dtype=float).reshape(-1, prob.dim)
    else:
        states = rng.normal(size=(p.get("n_states", 50), prob.dim)) * p.get("state_scale", 1.0)
    return DiscreteDomain(times, states, prob.op)


def cmd_bp(cfg, prob, cand, out, workers):
    p = _params(cfg)
    domain = _bp_domain(cfg, prob)
    if "objective_csv" in p:
        table = load_objective_csv(p["objective_csv"], domain)
    else:
        table = builtin_objective(p.get("objective", "neg_sq_norm"), domain, cfg["seed"])
    start = tuple(p.get("start", np.unravel_index(int(np.argmax(table)), table.shape)))
    res = bp_maximize(table, domain, start, p.get("eps", 1.0), p.get("deltas", [1.0]))
    rep = verify_bp(res, table, domain)
    _write_json(out / "bp_result.json", {"result": res.to_json(domain), "verification": rep})
    rows = [(i, j, float(res.perturbed[i, j])) for i in range(domain.shape[0]) for j in range(domain.shape[1])]
    _write_csv(out / "perturbed.csv", ["t_index", "x_index", "value"], rows)
    return {"verify_bp": rep["passed"]}


def cmd_audit(cfg, prob, cand, out, workers):
    p = _params(cfg)
    rep = audit_assumptions(prob, p.get("n_probes", 200), cfg["seed"], p.get("radius", 2.0))
    _write_json(out / "audit.json", rep.to_json())
    _write_csv(out / "tail.csv", ["level", "tail"], list(zip(rep.tail_levels, rep.tail_values)))
    checks = {"bounds": rep.passed, "tail_decreasing": rep.tail_decreasing}
    if "tail_threshold" in p:
        checks["tail_threshold"] = rep.tail_values[-1] < p["tail_threshold"]
    return checks


def _require_closed_form(cand):
    if cand is None:
        raise ConfigError("this command needs a problem with a closed-form value (lq, lq2)",
                          path="$.problem.preset")


def cmd_residual(cfg, prob, cand, out, workers):
    _require_closed_form(cand)
    p = _params(cfg)
    n = p.get("n", 21)
    half = p.get("half_width", 2.0)
    times = np.linspace(0, prob.horizon, n + 1)[:-1]
    axes = [np.linspace(-half, half, n)] * min(prob.dim, 2)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    rows, worst = [], 0.0
    for t in times:
        for x in grid:
            r = hjb_residual(prob, cand, t, x)
            worst = max(worst, abs(r))
            rows.append((t, *x, r))
    _write_csv(out / "residual.csv", ["t"] + [f"x_{i}" for i in range(prob.dim)] + ["residual"], rows)
    return {"residual": worst <= p.get("tol", 1e-6)}


def cmd_touch(cfg, prob, cand, out, workers):
    _require_closed_form(cand)
    p = _params(cfg)
    reports = generate_touch_checks(prob, cand, p.get("n_checks", 50), cfg["seed"],
                                    probe_n=p.get("probe_n", 11))
    bump_fail = None
    if p.get("bump", True):
        rng = np.random.default_rng(cfg["seed"] + 1)
        t = float(rng.uniform(0, 0.5 * prob.horizon))
        x = rng.uniform(-0.5, 0.5, size=prob.dim)
        w = bump_candidate(cand, t, x, 0.5, 0.3)
        tp = touching_pair(w, t, x, "sub")
        rb = check_touch(prob, w, tp, t, x, "sub", probe=probe_grid(t, prob.horizon, x, 1.0, 11))
        bump_fail = not rb.passed
        reports.append(rb._replace(note=rb.note + "; bump candidate"))
    with open(out / "touch.jsonl", "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_json(), sort_keys=True, default=_jsonable) + "\n")
    checks = {"touch_sub": all(r.passed for r in reports if r.side == "sub" and "bump" not in r.note),
              "touch_super": all(r.passed for r in reports if r.side == "super")}
    if bump_fail is not None:
        checks["bump_detected"] = bump_fail
    return checks


def generate_touch_checks(prob, cand, n_checks, seed, probe_n=11, half_width=1.0):
    """Random touching pairs of the canonical family, alternating sub and super sides."""
    rng = np.random.default_rng(seed)
    T = prob.horizon
    out = []
    for i in range(n_checks):
        side = "sub" if i % 2 == 0 else "super"
        t = float(rng.uniform(0.05, 0.9) * T)
        x = rng.uniform(-1.0, 1.0, size=prob.dim)
        t_anchor = float(rng.uniform(0, t))
        x_anchor = rng.normal(size=prob.dim) * 0.5
        tp = touching_pair(cand, t, x, side, slope=float(rng.uniform(0, 0.5)),
                           curvature=float(rng.uniform(0, 0.5)), quartic=float(rng.uniform(0, 0.2)),
                           delta=float(rng.uniform(0, 0.5)), anchors=[(t_anchor, x_anchor)],
                           weights=[float(rng.uniform(0, 0.5))])
        probe = probe_grid(t, T, x, half_width, probe_n)
        out.append(check_touch(prob, cand, tp, t, x, side, probe=probe))
    return out


def cmd_stability(cfg, prob, cand, out, workers):
    _require_closed_form(cand)
    p = _params(cfg)
    eps = p.get("eps", [1e-1, 1e-2, 1e-3])
    spec = prob.meta["spec"]
    family = [build_lq_benchmark(LqSpec(**{**spec.__dict__, "sigma": np.asarray(spec.sigma) * (1 + e)}))[0]
              for e in eps]
    states = np.asarray(p.get("states", np.linspace(-1, 1, 5)[:, None].tolist()), dtype=float)
    states = np.column_stack([states, np.zeros((states.shape[0], prob.dim - states.shape[1]))])
    r = stability_experiment(prob, family, eps, cfg.get("t0", 0.0), states, _policy(cfg, prob),
                             _sim(cfg, workers), _basis(cfg))
    _write_csv(out / "stability.csv", ["eps", "sup_gap", "stderr"],
               [(e, g, r.stderr) for e, g in r.rows()])
    return {"monotone": r.monotone, "final_within_3se": r.final_within}


def cmd_regularity(cfg, prob, cand, out, workers):
    p = _params(cfg)
    T = prob.horizon
    x = _x0(cfg, prob)
    t = p.get("t", 0.5 * T)
    dists = p.get("distances", [1e-1, 1e-2, 1e-3])
    e1 = np.zeros(prob.dim)
    e1[0] = 1.0
    space = [(t, x, x + d * e1) for d in dists]
    hs = p.get("time_gaps", [2.0**-k for k in range(3, 9)])
    times = [(T - h, T, x) for h in hs]
    growth = [(0.0, r * e1) for r in p.get("growth_radii", [1, 2, 4, 8])]
    rep = probe_regularity(prob, space, times, growth, _policy(cfg, prob), _sim(cfg, workers), _basis(cfg))
    rows = [("space", d, r) for d, r in zip(rep.distances, rep.lipschitz_ratios)]
    rows += [("time", h, v) for h, v in zip(rep.time_gaps, rep.time_diffs)]
    _write_csv(out / "regularity.csv", ["kind", "scale", "value"], rows)
    _write_json(out / "regularity.json", {"time_exponent": rep.time_exponent,
                                          "lipschitz_spread": rep.lipschitz_spread,
                                          "growth_ratios": rep.growth_ratios})
    lo, hi = p.get("exponent_range", [0.45, 0.75])
    return {"lipschitz_spread": rep.lipschitz_spread <= p.get("max_spread", 2.0),
            "time_exponent": bool(lo <= rep.time_exponent <= hi)}


def cmd_yosida(cfg, prob, cand, out, workers):
    p = _params(cfg)
    sim = _sim(cfg, workers)
    x0 = _x0(cfg, prob)
    mus = p.get("mus", [1e1, 1e2, 1e3, 1e4])
    power = p.get("power", 4)
    kw = dict(n_steps=sim.n_steps, n_paths=sim.n_paths, seed=sim.seed, block_size=sim.block_size,
              workers=workers)
    base = simulate_see(prob, 0.0, x0, None, **kw)
    vals = [sup_moment_difference(base, simulate_yosida(prob, mu, 0.0, x0, None, **kw), power) for mu in mus]
    _write_csv(out / "yosida.csv", ["mu", "sup_moment_difference"], list(zip(mus, vals)))
    return {"monotone": bool(np.all(np.diff(vals) < 0)),
            "last_rung": vals[-1] < p.get("threshold", 1e-4)}


HANDLERS = {
    "simulate": cmd_simulate,
    "bsde": cmd_bsde,
    "value": cmd_value,
    "dpp-check": cmd_dpp,
    "bp-solve": cmd_bp,
    "verify-assumptions": cmd_audit,
    "residual": cmd_residual,
    "touch-check": cmd_touch,
    "stability": cmd_stability,
    "regularity": cmd_regularity,
    "yosida": cmd_yosida,
}


def run(command, cfg, out, workers=1, config_path=None):
    """Execute ``command`` with a validated ``cfg``; returns the manifest dict."""
    validate_config(cfg)
    if "command" in cfg and cfg["command"] != command:
        raise ConfigError(f"configuration is for {cfg['command']!r}, not {command!r}", path="$.command")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    prob, cand = build_problem(cfg["problem"])
    cfg_copy = copy.deepcopy(cfg)
    cfg_copy["command"] = command
    _write_json(out / "config.json", {k: v for k, v in cfg_copy.items() if k not in ("out", "workers")})
    checks = HANDLERS[command](cfg, prob, cand, out, workers)
    checks = {k: bool(v) for k, v in checks.items()}
    files = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "command": command,
        "config_hash": canonical_hash(cfg_copy),
        "seed": cfg["seed"],
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "inputs": [str(config_path)] if config_path else [],
        "outputs": files + ["manifest.json"],
        "checks": checks,
        "passed": all(checks.values()),
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def replay(manifest_path, workers=1, out=None, seed=None):
    """Re-run a recorded run and compare its CSV outputs byte for byte.

    Returns ``(manifest, drift)`` where ``drift`` lists differing files.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    src = manifest_path.parent
    cfg = load_config(src / "config.json")
    if seed is not None and int(seed) != cfg["seed"]:
        raise ConfigError(f"seed {seed} differs from the recorded seed {cfg['seed']}; refusing to replay",
                          path="$.seed")
    if canonical_hash(cfg) != manifest["config_hash"]:
        raise ConfigError("configuration hash does not match the manifest; refusing to replay",
                          path="$")
    target = Path(out) if out else Path(tempfile.mkdtemp(prefix="seelab-replay-"))
    new = run(manifest["command"], cfg, target, workers)
    drift = []
    for name in manifest["outputs"]:
        if not name.endswith(".csv"):
            continue
        a, b = src / name, target / name
        if not b.exists() or not filecmp.cmp(a, b, shallow=False):
            drift.append(name)
    new["replay_of"] = str(manifest_path)
    new["drift"] = drift
    new["passed"] = new["passed"] and not drift
    _write_json(target / "manifest.json", new)
    return new, drift


def _parser():
    ap = argparse.ArgumentParser(prog="seelab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
    rp = sub.add_parser("replay")
    rp.add_argument("manifest")
    rp.add_argument("--out")
    rp.add_argument("--workers", type=int)
    rp.add_argument("--seed", type=int)
    return ap


def _resolve(args_value, env_name, cfg_value, default, cast=str):
    if args_value is not None:
        return args_value
    if os.environ.get(env_name):
        return cast(os.environ[env_name])
    return cfg_value if cfg_value is not None else default


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            workers = _resolve(args.workers, "SEELAB_WORKERS", None, 1, int)
            out = _resolve(args.out, "SEELAB_OUT", None, None)
            manifest, drift = replay(args.manifest, workers, out, args.seed)
            for name in drift:
                print(f"drift: {name}", file=sys.stderr)
        else:
            cfg = load_config(args.config)
            if args.seed is not None and args.seed != cfg["seed"]:
                raise ConfigError(f"--seed {args.seed} does not match the configured seed {cfg['seed']}",
                                  path="$.seed")
            workers = _resolve(args.workers, "SEELAB_WORKERS", cfg.get("workers"), 1, int)
            out = _resolve(args.out, "SEELAB_OUT", cfg.get("out"), f"runs/{args.command}")
            manifest = run(args.command, cfg, out, workers, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArgumentError, DomainError, ShapeError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    failed = [k for k, v in manifest["checks"].items() if not v]
    for name in failed:
        print(f"check failed: {name}", file=sys.stderr)
    print(json.dumps({"passed": manifest["passed"], "checks": manifest["checks"]}, sort_keys=True))
    return EXIT_PASS if manifest["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
