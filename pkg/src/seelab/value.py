"""Value estimation over finite policy classes, the Hamiltonian and DPP checks."""

from __future__ import annotations

import hashlib
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .bsde import RegressionBasis, solve_bsde
from .errors import ArgumentError, DomainError, ShapeError
from .simulate import DEFAULT_BLOCK, constant_policy, simulate_see
from .spectral import as_state, norm

__all__ = [
    "SimConfig",
    "PolicyClass",
    "HamiltonianValue",
    "hamiltonian",
    "ValueEstimate",
    "estimate_value",
    "DppReport",
    "check_dpp",
    "RegularityReport",
    "probe_regularity",
    "normalize_monotone",
    "check_structure_condition",
    "config_hash",
]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings shared by value estimates.

    ``n_steps`` is the number of steps on the full horizon ``[0, T]``; shorter
    intervals use the same step length (rounded to at least one step).
    """

    n_steps: int = 128
    n_paths: int = 4096
    seed: int = 0
    workers: int = 1
    block_size: int = DEFAULT_BLOCK

    def steps_for(self, horizon, length):
        return max(1, int(round(self.n_steps * length / horizon)))


def config_hash(obj):
    """sha256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return str(x)


def _piecewise(assignment, breakpoints):
    assignment = tuple(int(a) for a in assignment)
    inner = np.asarray(breakpoints, dtype=float)

    def policy(k, t, X):
        return assignment[int(np.searchsorted(inner, t, side="right"))]

    policy.label = "pw[" + ",".join(map(str, assignment)) + "]"
    return policy


def _feedback(table, edges):
    table = np.asarray(table, dtype=np.int64)
    edges = np.asarray(edges, dtype=float)

    def policy(k, t, X):
        return table[np.searchsorted(edges, X[:, 0], side="right")]

    policy.label = "fb[" + ",".join(map(str, table.tolist())) + "]"
    return policy


def _enumerate(n_controls, slots, budget, seed):
    total = n_controls ** slots
    if total <= budget:
        return [tuple(a) for a in itertools.product(range(n_controls), repeat=slots)]
    # constants first, then a deterministic sample of the remaining assignments
    chosen = [(c,) * slots for c in range(n_controls)]
    seen = set(chosen)
    rng = np.random.default_rng(seed)
    while len(chosen) < budget:
        a = tuple(int(v) for v in rng.integers(n_controls, size=slots))
        if a not in seen:
            seen.add(a)
            chosen.append(a)
    return chosen


@dataclass(frozen=True)
class PolicyClass:
    """A finite, ordered list of policies ``(k, t, X) -> control index``.

    Build with :meth:`constant`, :meth:`piecewise` or :meth:`feedback`.
    ``members`` is ordered; ties in value are resolved by the lowest position.
    """

    kind: str
    n_controls: int
    members: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise ArgumentError("policy class is empty")

    def __len__(self):
        return len(self.members)

    @property
    def labels(self):
        return [getattr(p, "label", f"policy{i}") for i, p in enumerate(self.members)]

    @classmethod
    def constant(cls, n_controls, indices=None):
        idx = range(n_controls) if indices is None else indices
        members = tuple(constant_policy(i) for i in idx)
        for i in idx:
            if not 0 <= i < n_controls:
                raise ArgumentError(f"control index {i} outside the grid")
        return cls("constant", n_controls, members, {"indices": list(idx)})

    @classmethod
    def piecewise(cls, n_controls, breakpoints, budget=64, seed=0):
        """Open-loop policies constant between the interior ``breakpoints``."""
        bp = sorted(float(b) for b in breakpoints)
        assignments = _enumerate(n_controls, len(bp) + 1, budget, seed)
        members = tuple(_piecewise(a, bp) for a in assignments)
        return cls("piecewise", n_controls, members, {"breakpoints": bp, "budget": budget, "seed": seed})

    @classmethod
    def feedback(cls, n_controls, edges, budget=64, seed=0):
        """Feedback tables on bins of the first coordinate split at ``edges``."""
        edges = sorted(float(e) for e in edges)
        tables = _enumerate(n_controls, len(edges) + 1, budget, seed)
        members = tuple(_feedback(a, edges) for a in tables)
        return cls("feedback", n_controls, members, {"edges": edges, "budget": budget, "seed": seed})

    def describe(self):
        return {"kind": self.kind, "n_controls": self.n_controls, "params": self.params,
                "labels": self.labels}


class HamiltonianValue(NamedTuple):
    value: float
    index: int
    control: object


def hamiltonian(prob, t, x, r, p, l):
    """Max over the control grid of ``<p, b> + Tr(l sigma sigma^*)/2 + q(t, x, r, p^T sigma, u)``.

    Ties go to the lowest control index.
    """
    if not prob.controls:
        raise ArgumentError("control grid is empty")
    x = as_state(x, prob.dim).reshape(1, -1)
    p = as_state(p, prob.dim).reshape(-1)
    l = np.asarray(l, dtype=float)
    if l.shape != (prob.dim, prob.dim):
        raise ShapeError("second-order argument must be an N x N matrix")
    r_arr = np.array([float(r)])
    best, best_i = -np.inf, -1
    for i, u in enumerate(prob.controls):
        b = np.asarray(prob.b(t, x, u))[0]
        s = np.asarray(prob.sigma(t, x, u))[0]
        z = (p @ s)[None, :]
        val = float(p @ b + 0.5 * np.sum((l @ s) * s) + prob.q(t, x, r_arr, z, u)[0])
        if val > best:
            best, best_i = val, i
    return HamiltonianValue(best, best_i, prob.controls[best_i])


class ValueEstimate(NamedTuple):
    t: float
    x: np.ndarray
    value: float
    argmax_policy: str
    mc_stderr: float
    config_hash: str
    policy_values: np.ndarray
    policy_stderrs: np.ndarray


def _run_policy(prob, t, x, policy, sim, basis, t_end, zeta_fn):
    n = sim.steps_for(prob.horizon, t_end - t)
    bundle = simulate_see(prob, t, x, policy, n_steps=n, n_paths=sim.n_paths, seed=sim.seed,
                          t_end=t_end, block_size=sim.block_size, workers=sim.workers)
    zeta = None if zeta_fn is None else zeta_fn(bundle.paths[-1])
    pair = solve_bsde(bundle, prob, basis, terminal=zeta)
    return pair.value, pair.stderr, bundle.dt


def _sweep(prob, t, x, pol, sim, basis, t_end, zeta_fn):
    def one(policy):
        return _run_policy(prob, t, x, policy, sim, basis, t_end, zeta_fn)

    if sim.workers > 1 and len(pol) > 1:
        with ThreadPoolExecutor(max_workers=sim.workers) as pool:
            out = list(pool.map(one, pol.members))
    else:
        out = [one(p) for p in pol.members]
    vals = np.array([o[0] for o in out])
    ses = np.array([o[1] for o in out])
    return vals, ses, out[0][2]


def estimate_value(prob, t, x, pol=None, sim=None, basis=None):
    """``V(t, x)`` estimated as the best policy value in ``pol`` on common noise.

    Every member is simulated with the same seed, so enlarging the class can
    only raise the reported value.
    """
    sim = SimConfig() if sim is None else sim
    basis = RegressionBasis() if basis is None else basis
    pol = PolicyClass.constant(len(prob.controls)) if pol is None else pol
    if len(pol) == 0:
        raise ArgumentError("policy class is empty")
    t = float(t)
    T = prob.horizon
    if not 0 <= t <= T:
        raise DomainError(f"t must lie in [0, {T}]")
    x = as_state(x, prob.dim).reshape(-1)
    h = config_hash({"problem": prob.name, "t": t, "x": x, "policies": pol.describe(),
                     "sim": asdict(sim) | {"workers": None}, "basis": asdict(basis)})
    if t >= T:
        v = float(np.asarray(prob.phi_terminal(x[None, :]))[0])
        n = len(pol)
        return ValueEstimate(t, x, v, pol.labels[0], 0.0, h, np.full(n, v), np.zeros(n))
    vals, ses, _ = _sweep(prob, t, x, pol, sim, basis, T, None)
    i = int(np.argmax(vals))
    return ValueEstimate(t, x, float(vals[i]), pol.labels[i], float(ses[i]), h, vals, ses)


class DppReport(NamedTuple):
    lhs: float
    rhs: float
    gap: float
    tolerance: float
    passed: bool
    lhs_stderr: float
    rhs_stderr: float
    dt: float
    grid: np.ndarray
    grid_values: np.ndarray

    @property
    def ratio(self):
        return self.gap / self.tolerance if self.tolerance > 0 else (0.0 if self.gap == 0 else np.inf)


def _value_grid(prob, t, x, t_mid, sim, n_grid):
    """States at ``t_mid`` spread over a pilot ensemble, sorted by first coordinate."""
    n = sim.steps_for(prob.horizon, t_mid - t)
    pilot = simulate_see(prob, t, x, None, n_steps=n, n_paths=sim.n_paths, seed=sim.seed,
                         t_end=t_mid, block_size=sim.block_size, workers=sim.workers).paths[-1]
    order = np.argsort(pilot[:, 0], kind="stable")
    lo, hi = np.quantile(pilot[:, 0], [0.001, 0.999])
    if prob.dim == 1:
        return np.linspace(lo, hi, n_grid)[:, None]
    picks = np.linspace(0, pilot.shape[0] - 1, n_grid).round().astype(int)
    return pilot[order[picks]]


def check_dpp(prob, t, x, delta, pol=None, sim=None, basis=None, n_grid=None, value_basis=None,
              dt_factor=5.0):
    """Compare ``V(t, x)`` with ``max_u G_{t, t+delta}[V(t+delta, X_{t+delta})]``.

    ``V(t+delta, .)`` is a regression fit (``value_basis``) of value estimates
    on ``n_grid`` states. The tolerance is
    ``3 sqrt(SE_lhs^2 + SE_rhs^2) + dt_factor * dt``.
    """
    sim = SimConfig() if sim is None else sim
    basis = RegressionBasis() if basis is None else basis
    value_basis = basis if value_basis is None else value_basis
    pol = PolicyClass.constant(len(prob.controls)) if pol is None else pol
    delta = float(delta)
    t = float(t)
    if not delta > 0:
        raise ArgumentError("delta must be positive")
    T = prob.horizon
    if t < 0 or t + delta > T * (1 + 1e-12):
        raise DomainError("need 0 <= t < t + delta <= T")
    x = as_state(x, prob.dim).reshape(-1)
    t_mid = min(t + delta, T)
    lhs = estimate_value(prob, t, x, pol, sim, basis)
    if t_mid >= T - 1e-12 * T:
        grid = np.empty((0, prob.dim))
        gvals = np.empty(0)
        zeta_fn = prob.phi_terminal
        t_mid = T
    else:
        size = value_basis.size(prob.dim)
        n_grid = max(4 * size + 1, 9) if n_grid is None else int(n_grid)
        grid = _value_grid(prob, t, x, t_mid, sim, n_grid)
        gvals = np.array([estimate_value(prob, t_mid, g, pol, sim, basis).value for g in grid])
        zeta_fn = value_basis.fit(grid, gvals, warn=False)
    vals, ses, dt = _sweep(prob, t, x, pol, sim, basis, t_mid, zeta_fn)
    i = int(np.argmax(vals))
    rhs, se_r = float(vals[i]), float(ses[i])
    gap = abs(lhs.value - rhs)
    tol = 3 * np.hypot(lhs.mc_stderr, se_r) + dt_factor * dt
    return DppReport(lhs.value, rhs, gap, float(tol), bool(gap <= tol), lhs.mc_stderr, se_r, dt,
                     grid, gvals)


class RegularityReport(NamedTuple):
    lipschitz_ratios: np.ndarray
    distances: np.ndarray
    lipschitz_spread: float
    time_gaps: np.ndarray
    time_diffs: np.ndarray
    time_exponent: float
    growth_ratios: np.ndarray


def probe_regularity(prob, space_samples=(), time_samples=(), growth_states=(), pol=None, sim=None,
                     basis=None):
    """Empirical Lipschitz ratios, time-regularity exponent and linear-growth ratios.

    * ``space_samples``: ``(t, x, y)`` triples; pairs with ``x == y`` are skipped.
    * ``time_samples``: ``(t, s, x)`` triples; the reported difference is
      ``|V(t, x) - V(s, e^{(s-t)A} x)|`` and the exponent is the log-log slope
      against ``s - t``.
    * ``growth_states``: ``(t, x)`` pairs giving ``|V(t, x)| / (1 + |x|)``.

    ``lipschitz_spread`` is the max/min ratio over the non-zero ratios
    (1 when every ratio is zero).
    """
    est = lambda t, x: estimate_value(prob, t, x, pol, sim, basis).value  # noqa: E731
    ratios, dists = [], []
    for t, x, y in space_samples:
        x = as_state(x, prob.dim).reshape(-1)
        y = as_state(y, prob.dim).reshape(-1)
        d = float(norm(x - y))
        if d == 0:
            continue
        ratios.append(abs(est(t, x) - est(t, y)) / d)
        dists.append(d)
    ratios = np.asarray(ratios)
    nz = ratios[ratios > 0]
    spread = float(nz.max() / nz.min()) if nz.size else 1.0
    if nz.size and nz.size < ratios.size:
        spread = np.inf
    gaps, diffs = [], []
    for t, s, x in time_samples:
        x = as_state(x, prob.dim).reshape(-1)
        if not s > t:
            continue
        xs = prob.op.semigroup(s - t, x)
        diffs.append(abs(est(t, x) - est(s, xs)))
        gaps.append(s - t)
    gaps, diffs = np.asarray(gaps), np.asarray(diffs)
    if gaps.size >= 2 and np.all(diffs > 0):
        expo = float(np.polyfit(np.log(gaps), np.log(diffs), 1)[0])
    else:
        expo = float("nan")
    growth = np.array([abs(est(t, x)) / (1 + float(norm(as_state(x, prob.dim).reshape(-1))))
                       for t, x in growth_states])
    return RegularityReport(ratios, np.asarray(dists), spread, gaps, diffs, expo, growth)


def normalize_monotone(prob, kappa):
    """Exponential change of variable making the driver strictly decreasing in ``y``.

    Returns a problem with ``q~(t,x,y,z,u) = e^{kt} q(t,x,e^{-kt}y,e^{-kt}z,u) - k y`` and
    ``phi~ = e^{kT} phi``; its value is ``e^{kt} V(t, x)``.
    """
    kappa = float(kappa)
    if kappa < 0:
        raise ArgumentError("kappa must be nonnegative")
    q, phi, T = prob.q, prob.phi_terminal, prob.horizon

    def q_new(t, X, y, z, u):
        e = np.exp(kappa * t)
        return e * q(t, X, y / e, z / e, u) - kappa * y

    def phi_new(X):
        return np.exp(kappa * T) * phi(X)

    meta = dict(prob.meta, monotone_kappa=kappa)
    return replace(prob, q=q_new, phi_terminal=phi_new, lip_const=prob.lip_const + kappa,
                   name=f"{prob.name}+mono", meta=meta)


def check_structure_condition(prob, L, n_probes=200, seed=0, radius=1.0):
    """Randomised probe of ``H(r1) - H(r2) >= L (r2 - r1)`` for ``r1 < r2``.

    Returns the worst slack ``min (H(r1) - H(r2)) - L (r2 - r1)``; the
    condition holds on the probes when it is ``>= -1e-9``.
    """
    rng = np.random.default_rng(seed)
    N = prob.dim
    worst = np.inf
    for _ in range(n_probes):
        t = rng.uniform(0, prob.horizon)
        x = rng.normal(size=N) * radius
        p = rng.normal(size=N)
        a = rng.normal(size=(N, N))
        l = 0.5 * (a + a.T)
        r1, r2 = np.sort(rng.normal(size=2) * radius * 2)
        if r2 == r1:
            continue
        h1 = hamiltonian(prob, t, x, r1, p, l).value
        h2 = hamiltonian(prob, t, x, r2, p, l).value
        worst = min(worst, (h1 - h2) - L * (r2 - r1))
    return float(worst)
