"""Monte Carlo simulation of the controlled evolution equation.

The mild solution is discretised by the exponential Euler scheme

    X_{k+1} = e^{dt A} (X_k + b(t_k, X_k, u_k) dt + sigma(t_k, X_k, u_k) dW_k),

which is exact for the linear part and keeps the semigroup contraction.

Brownian increments come from one Philox stream per path, keyed by
``(seed, path index)``, so an ensemble does not depend on how paths are
split into blocks or across workers. Blocks always have the same size, so
the floating-point work per path is also independent of the worker count.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ArgumentError, DomainError, NumericError, ShapeError
from .spectral import as_state

log = logging.getLogger(__name__)

__all__ = [
    "ControlProblem",
    "PathBundle",
    "constant_policy",
    "brownian_increments",
    "simulate_see",
    "simulate_yosida",
    "coefficients",
    "sup_moment_difference",
    "MomentReport",
    "check_moment_bounds",
    "ItoReport",
    "check_ito_inequality",
    "DEFAULT_STEPS",
    "DEFAULT_PATHS",
    "DEFAULT_BLOCK",
]

DEFAULT_STEPS = 256
DEFAULT_PATHS = 4096
DEFAULT_BLOCK = 512


@dataclass(frozen=True)
class ControlProblem:
    """Coefficients of a controlled state/cost system over a finite control grid.

    All coefficient callables are vectorised over a batch of states ``X`` of
    shape ``(P, N)`` and receive one control label ``u``:

    * ``b(t, X, u) -> (P, N)``
    * ``sigma(t, X, u) -> (P, N, M)``
    * ``q(t, X, y, z, u) -> (P,)`` with ``y`` of shape ``(P,)``, ``z`` ``(P, M)``
    * ``phi_terminal(X) -> (P,)``

    ``lip_const`` is the declared constant of the growth/Lipschitz bounds;
    ``lip_box`` is the radius of the ball on which it is claimed (``None``
    for a global claim).
    """

    op: object
    controls: tuple
    b: Callable
    sigma: Callable
    q: Callable
    phi_terminal: Callable
    lip_const: float
    horizon: float
    noise_dim: int
    name: str = "custom"
    lip_box: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.controls:
            raise ArgumentError("control grid is empty")
        object.__setattr__(self, "controls", tuple(self.controls))
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")

    @property
    def dim(self):
        return self.op.dim

    def with_op(self, op):
        if op.dim != self.op.dim:
            raise ShapeError("replacement operator has a different dimension")
        return replace(self, op=op)


def constant_policy(index):
    """Policy that always plays control ``index``."""
    index = int(index)

    def policy(k, t, X):
        return index

    policy.label = f"const[{index}]"
    return policy


def brownian_increments(seed, paths, n_steps, noise_dim, dt):
    """Increments of shape ``(n_steps, len(paths), noise_dim)``.

    Path ``i`` always draws from ``Philox(key=seed * 2**64 + i)``.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ArgumentError("seed must fit in an unsigned 64-bit integer")
    paths = np.asarray(paths, dtype=np.int64)
    out = np.empty((n_steps, paths.size, noise_dim))
    scale = np.sqrt(dt)
    for j, i in enumerate(paths):
        gen = np.random.Generator(np.random.Philox(key=seed * 2**64 + int(i)))
        out[:, j, :] = gen.standard_normal((n_steps, noise_dim)) * scale
    return out


def coefficients(prob, t, X, uidx):
    """Drift and diffusion for a batch with per-path control indices."""
    P = X.shape[0]
    if np.ndim(uidx) == 0:
        u = prob.controls[int(uidx)]
        return np.asarray(prob.b(t, X, u), dtype=float), np.asarray(prob.sigma(t, X, u), dtype=float)
    uidx = np.asarray(uidx)
    drift = np.empty((P, prob.dim))
    diff = np.empty((P, prob.dim, prob.noise_dim))
    for c in np.unique(uidx):
        sel = uidx == c
        u = prob.controls[int(c)]
        drift[sel] = prob.b(t, X[sel], u)
        diff[sel] = prob.sigma(t, X[sel], u)
    return drift, diff


def _policy_indices(policy, k, t, X, n_controls):
    u = policy(k, t, X)
    if np.ndim(u) == 0:
        u = int(u)
        if not 0 <= u < n_controls:
            raise ArgumentError(f"policy returned control index {u} outside the grid")
        return u
    u = np.asarray(u, dtype=np.int64)
    if u.shape != (X.shape[0],):
        raise ShapeError("feedback policy must return one control index per path")
    if u.min() < 0 or u.max() >= n_controls:
        raise ArgumentError("policy returned a control index outside the grid")
    return u


@dataclass
class PathBundle:
    """Time grid, state paths, Brownian increments and realised controls.

    Shapes: ``times (K+1,)``, ``paths (K+1, P, N)``, ``dW (K, P, M)``,
    ``controls (K, P)``.
    """

    times: np.ndarray
    paths: np.ndarray
    dW: np.ndarray
    controls: np.ndarray
    seed: int
    op: object = None
    config: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return self.times.size - 1

    @property
    def n_paths(self):
        return self.paths.shape[1]

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    def validate_increments(self):
        """Check empirical mean and variance of the increments.

        Mean within ``4 sqrt(dt / P)`` of zero and variance within 10% of
        ``dt`` for every coordinate (pooled over steps).
        """
        dt, P = self.dt, self.n_paths
        mean = self.dW.mean(axis=(0, 1))
        var = self.dW.var(axis=(0, 1))
        ok_mean = bool(np.all(np.abs(mean) <= 4 * np.sqrt(dt / P)))
        ok_var = bool(np.all(np.abs(var - dt) <= 0.1 * dt))
        return {"mean": mean.tolist(), "var": var.tolist(), "mean_ok": ok_mean, "var_ok": ok_var,
                "passed": ok_mean and ok_var}

    def to_csv(self, path):
        """Write ``step,path,control,x_0..x_{N-1}`` rows; 17 significant digits."""
        K1, P, N = self.paths.shape
        steps = np.repeat(np.arange(K1), P)
        idx = np.tile(np.arange(P), K1)
        ctrl = np.vstack([self.controls, np.full((1, P), -1)]).reshape(-1)
        header = ",".join(["step", "path", "control"] + [f"x_{i}" for i in range(N)])
        cols = np.column_stack([steps, idx, ctrl, self.paths.reshape(K1 * P, N)])
        fmt = ["%d", "%d", "%d"] + ["%.17g"] * N
        np.savetxt(path, cols, fmt=fmt, delimiter=",", header=header, comments="")

    def increments_to_csv(self, path):
        K, P, M = self.dW.shape
        header = ",".join(["step", "path"] + [f"dw_{i}" for i in range(M)])
        cols = np.column_stack([np.repeat(np.arange(K), P), np.tile(np.arange(P), K),
                                self.dW.reshape(K * P, M)])
        np.savetxt(path, cols, fmt=["%d", "%d"] + ["%.17g"] * M, delimiter=",",
                   header=header, comments="")

    def sidecar(self):
        return {"seed": self.seed, "n_steps": self.n_steps, "n_paths": self.n_paths,
                "t0": float(self.times[0]), "t_end": float(self.times[-1]),
                "config": self.config}

    def write_sidecar(self, path):
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)


def _simulate_block(prob, op, t0, x0, policy, times, dW):
    step = op.step_factor(times[1] - times[0])
    dt = times[1] - times[0]
    K, P, _ = dW.shape
    X = np.broadcast_to(x0, (P, x0.size)).copy()
    paths = np.empty((K + 1, P, x0.size))
    controls = np.empty((K, P), dtype=np.int64)
    paths[0] = X
    n_u = len(prob.controls)
    for k in range(K):
        uidx = _policy_indices(policy, k, times[k], X, n_u)
        controls[k] = uidx
        drift, diff = coefficients(prob, times[k], X, uidx)
        X = step(X + drift * dt + (diff * dW[k][:, None, :]).sum(axis=-1))
        bad = ~np.isfinite(X)
        if bad.any():
            path = int(np.nonzero(bad.any(axis=-1))[0][0])
            raise NumericError(f"non-finite state at step {k + 1}, block path {path}")
        paths[k + 1] = X
    return paths, controls


def simulate_see(prob, t0, x0, policy=None, n_steps=DEFAULT_STEPS, n_paths=DEFAULT_PATHS,
                 seed=0, t_end=None, op=None, block_size=DEFAULT_BLOCK, workers=1):
    """Simulate ``n_paths`` trajectories on ``[t0, t_end]`` with ``n_steps`` steps.

    ``op`` overrides the generator (used for the Yosida variant). The result
    is bit-identical for any ``workers`` value.
    """
    T = prob.horizon if t_end is None else float(t_end)
    t0 = float(t0)
    if not 0 <= t0 < T or T > prob.horizon + 1e-12:
        raise DomainError(f"need 0 <= t0 < t_end <= T, got t0={t0}, t_end={T}")
    if int(n_steps) < 1 or int(n_paths) < 1:
        raise ArgumentError("n_steps and n_paths must be positive")
    op = prob.op if op is None else op
    x0 = as_state(x0, prob.dim).reshape(-1)
    policy = constant_policy(0) if policy is None else policy
    n_steps, n_paths = int(n_steps), int(n_paths)
    times = t0 + (T - t0) * np.arange(n_steps + 1) / n_steps
    times[-1] = T
    dt = (T - t0) / n_steps
    blocks = [np.arange(s, min(s + block_size, n_paths)) for s in range(0, n_paths, block_size)]

    def run(idx):
        dW = brownian_increments(seed, idx, n_steps, prob.noise_dim, dt)
        paths, controls = _simulate_block(prob, op, t0, x0, policy, times, dW)
        return paths, controls, dW

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(idx) for idx in blocks]
    paths = np.concatenate([r[0] for r in results], axis=1)
    controls = np.concatenate([r[1] for r in results], axis=1)
    dW = np.concatenate([r[2] for r in results], axis=1)
    config = {"problem": prob.name, "t0": t0, "t_end": T, "x0": x0.tolist(),
              "n_steps": n_steps, "n_paths": n_paths,
              "policy": getattr(policy, "label", "custom")}
    return PathBundle(times, paths, dW, controls, int(seed), op, config)


def simulate_yosida(prob, mu, t0, x0, policy=None, **kwargs):
    """As :func:`simulate_see` with ``e^{dt A_mu}`` in place of ``e^{dt A}``."""
    y = prob.op.yosida(mu)
    bundle = simulate_see(prob, t0, x0, policy, op=y, **kwargs)
    bundle.config["yosida_mu"] = float(mu)
    return bundle


def sup_moment_difference(b1, b2, p=2):
    """``mean_paths sup_s |X^1_s - X^2_s|^p`` for two bundles on a common grid."""
    if b1.paths.shape != b2.paths.shape:
        raise ShapeError("bundles must share grid, ensemble size and dimension")
    d = b1.paths - b2.paths
    r = np.sqrt((d * d).sum(axis=-1)) ** p
    return float(r.max(axis=0).mean())


def _discrete_orbit(op, dt, n_steps, start):
    step = op.step_factor(dt)
    out = np.empty((n_steps + 1, start.size))
    out[0] = start
    for k in range(n_steps):
        out[k + 1] = step(out[k])
    return out


class MomentReport(NamedTuple):
    p: int
    sup_moment: float
    constant: float
    exponent: float
    fit_horizons: np.ndarray
    fit_values: np.ndarray
    deviation_moments: np.ndarray


def check_moment_bounds(bundle, p, x0=None, fit_window=1 / 16):
    """Empirical moment constant and small-time scaling exponent.

    ``deviation_moments[k]`` is the ensemble mean of
    ``sup_{l <= k} |X_l - e^{(t_l - t_0) A} x0|^p`` with the orbit iterated on
    the same grid. The exponent is the least-squares slope of its logarithm
    against ``log(t_k - t_0)`` over dyadic ``k`` with ``t_k - t_0`` inside
    ``fit_window`` times the horizon (at least the first two dyadic steps).
    """
    if p not in (2, 4, 8):
        raise ArgumentError(f"p must be one of 2, 4, 8, got {p}")
    if bundle is None or bundle.n_paths == 0 or bundle.n_steps == 0:
        raise ArgumentError("empty bundle")
    if x0 is None:
        x0 = bundle.paths[0, 0]
    x0 = as_state(x0).reshape(-1)
    X = bundle.paths
    r = np.sqrt((X * X).sum(axis=-1)) ** p
    sup_moment = float(r.mean(axis=1).max())
    constant = sup_moment / (1 + float(np.sqrt(x0 @ x0)) ** p)
    orbit = _discrete_orbit(bundle.op, bundle.dt, bundle.n_steps, x0)
    d = X - orbit[:, None, :]
    dev = np.maximum.accumulate(np.sqrt((d * d).sum(axis=-1)) ** p, axis=0).mean(axis=1)
    K = bundle.n_steps
    kmax = max(2, int(K * fit_window))
    ks = [k for k in (2 ** np.arange(int(np.log2(K)) + 1)) if k <= kmax]
    ks = np.asarray(ks, dtype=int)
    h = bundle.times[ks] - bundle.times[0]
    vals = dev[ks]
    if np.all(vals > 0):
        exponent = float(np.polyfit(np.log(h), np.log(vals), 1)[0])
    else:
        exponent = float("nan")
    return MomentReport(p, sup_moment, constant, exponent, h, vals, dev)


class ItoReport(NamedTuple):
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    stderr: np.ndarray
    passed: bool
    z: np.ndarray  # (lhs - rhs) / stderr, zero where stderr == 0

    @property
    def equality_gap(self):
        """Largest ``|lhs - rhs| / stderr`` over the grid."""
        return float(np.max(np.abs(self.z)))


def check_ito_inequality(bundle, prob, gauge, slack=0.0):
    """Monte Carlo check of the Ito inequality for ``|X - y^A|^p``.

    With ``Xh_k = X_k - y^A_{t0, t_k}`` (orbit iterated on the grid),
    ``lhs_k = mean |Xh_k|^p`` and ``rhs_k`` is the mean of
    ``|Xh_0|^p + sum_{l<k} [p|Xh|^{p-2}<Xh, b> + 1/2 Tr(D^2 |Xh|^p sigma sigma^*)] dt``.
    Passes when ``lhs_k - rhs_k <= 3 SE_k + slack`` at every step, with
    ``SE_k`` the standard error of the pathwise difference.
    """
    if gauge.op.dim != prob.dim or bundle.paths.shape[-1] != prob.dim:
        raise ShapeError("gauge, problem and bundle dimensions disagree")
    t0 = float(bundle.times[0])
    if gauge.anchor_time > t0:
        raise DomainError("gauge anchor time must not exceed the bundle start time")
    p = gauge.power
    dt = bundle.dt
    start = gauge.orbit(t0)
    orbit = _discrete_orbit(bundle.op, dt, bundle.n_steps, start)
    K, P = bundle.n_steps, bundle.n_paths
    Xh = bundle.paths - orbit[:, None, :]
    r2 = (Xh * Xh).sum(axis=-1)
    lhs_path = r2 ** (p // 2)
    acc = lhs_path[0].copy()
    rhs_path = np.empty_like(lhs_path)
    rhs_path[0] = acc
    for k in range(K):
        X = bundle.paths[k]
        drift, diff = coefficients(prob, bundle.times[k], X, bundle.controls[k])
        xh = Xh[k]
        rr = r2[k]
        rp2 = rr ** ((p - 2) // 2)
        sx = np.einsum("pnm,pn->pm", diff, xh)
        trace = p * rp2 * (diff * diff).sum(axis=(1, 2))
        if p >= 4:
            trace = trace + p * (p - 2) * rr ** ((p - 4) // 2) * (sx * sx).sum(axis=-1)
        acc = acc + (p * rp2 * (xh * drift).sum(axis=-1) + 0.5 * trace) * dt
        rhs_path[k + 1] = acc
    diffs = lhs_path - rhs_path
    lhs = lhs_path.mean(axis=1)
    rhs = rhs_path.mean(axis=1)
    se = diffs.std(axis=1, ddof=1) / np.sqrt(P) if P > 1 else np.zeros(K + 1)
    gap = lhs - rhs
    passed = bool(np.all(gap <= 3 * se + slack))
    z = np.divide(gap, se, out=np.zeros_like(gap), where=se > 0)
    return ItoReport(bundle.times.copy(), lhs, rhs, se, passed, z)
