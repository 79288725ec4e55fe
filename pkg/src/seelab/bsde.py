"""Least-squares Monte Carlo solver for the backward cost equation.

On the forward grid the pair ``(Y, Z)`` is computed by

    Z_k = E[Y_{k+1} dW_k | X_k] / dt,
    Y_k = E[Y_{k+1} | X_k] + q(t_k, X_k, Y_k, Z_k, u_k) dt,

with conditional expectations replaced by a polynomial regression on the
ensemble and the implicit ``Y`` equation solved by fixed-point iteration.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import ArgumentError, ConfigError, DomainError, NumericError, RegressionWarning, ShapeError

__all__ = [
    "RegressionBasis",
    "FittedFunction",
    "BsdePair",
    "solve_bsde",
    "backward_semigroup",
    "driver",
    "grid_index",
]

MAX_FIXED_POINT = 20


@dataclass(frozen=True)
class RegressionBasis:
    """Monomials of total degree ``<= degree`` in the first ``n_coeffs`` coordinates.

    ``n_coeffs=None`` means ``min(N, 4)``. Coordinates are centred and scaled
    by their ensemble mean and spread before the monomials are formed; this
    does not change the span but keeps the normal equations well scaled.
    """

    degree: int = 2
    n_coeffs: int | None = None
    ridge: float = 1e-8

    def __post_init__(self):
        if self.degree < 0:
            raise ArgumentError("regression degree must be nonnegative")
        if self.n_coeffs is not None and self.n_coeffs < 1:
            raise ArgumentError("regression needs at least one coordinate")

    def coords(self, dim):
        return min(dim, 4) if self.n_coeffs is None else min(self.n_coeffs, dim)

    def size(self, dim):
        m = self.coords(dim)
        return comb(m + self.degree, self.degree)

    def _monomials(self, Z):
        P, m = Z.shape
        cols = [np.ones(P)]
        for d in range(1, self.degree + 1):
            for combo in itertools.combinations_with_replacement(range(m), d):
                cols.append(np.prod(Z[:, combo], axis=1))
        return np.column_stack(cols)

    def fit(self, X, targets, warn=True):
        """Least-squares fit of ``targets`` (shape ``(P,)`` or ``(P, k)``) on ``X``."""
        X = np.asarray(X, dtype=float)
        T = np.asarray(targets, dtype=float)
        squeeze = T.ndim == 1
        if squeeze:
            T = T[:, None]
        if X.ndim != 2 or T.shape[0] != X.shape[0]:
            raise ShapeError("regression inputs must be (P, N) states and (P, k) targets")
        m = self.coords(X.shape[1])
        Zc = X[:, :m]
        center = Zc.mean(axis=0)
        spread = Zc.std(axis=0)
        scale_ref = np.maximum(np.abs(center), 1.0)
        active = spread > 1e-12 * scale_ref
        if not active.any():
            return FittedFunction(self, center, np.ones(m), active, T.mean(axis=0), squeeze)
        spread = np.where(active, spread, 1.0)
        Phi = self._monomials((Zc[:, active] - center[active]) / spread[active])
        G = Phi.T @ Phi
        lam = self.ridge * np.trace(G) / G.shape[0]
        if warn and np.linalg.matrix_rank(Phi) < Phi.shape[1]:
            warnings.warn("rank-deficient regression design; relying on ridge regularisation",
                          RegressionWarning, stacklevel=3)
        pen = lam * np.eye(G.shape[0])
        pen[0, 0] = 0.0  # intercept is not shrunk, so fitted values keep the ensemble mean
        coef = np.linalg.solve(G + pen, Phi.T @ T)
        return FittedFunction(self, center, spread, active, coef, squeeze)


@dataclass(frozen=True)
class FittedFunction:
    """Result of :meth:`RegressionBasis.fit`; callable on a batch of states."""

    basis: RegressionBasis
    center: np.ndarray
    spread: np.ndarray
    active: np.ndarray
    coef: np.ndarray
    squeeze: bool

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = self.center.size
        if not self.active.any():
            out = np.broadcast_to(self.coef, (X.shape[0], self.coef.size)).copy()
        else:
            Zc = X[:, :m][:, self.active]
            Phi = self.basis._monomials((Zc - self.center[self.active]) / self.spread[self.active])
            out = Phi @ self.coef
        return out[:, 0] if self.squeeze else out


class BsdePair(NamedTuple):
    """``Y`` has shape ``(K+1, P)``; ``Z`` has shape ``(K, P, M)``.

    Steps before ``start_step`` are left as NaN when the sweep was stopped early.
    """

    times: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    terminal_kind: str
    start_step: int
    pathwise: np.ndarray  # terminal value plus accumulated running cost from start_step

    @property
    def value(self):
        return float(self.Y[self.start_step].mean())

    @property
    def stderr(self):
        P = self.pathwise.size
        return float(self.pathwise.std(ddof=1) / np.sqrt(P)) if P > 1 else 0.0


def driver(prob, t, X, y, z, uidx):
    """Evaluate ``q`` for a batch with per-path control indices."""
    if np.ndim(uidx) == 0:
        return np.asarray(prob.q(t, X, y, z, prob.controls[int(uidx)]), dtype=float)
    out = np.empty(X.shape[0])
    for c in np.unique(uidx):
        sel = uidx == c
        out[sel] = prob.q(t, X[sel], y[sel], z[sel], prob.controls[int(c)])
    return out


def grid_index(times, s):
    """Index of ``s`` in ``times``; ``DomainError`` when ``s`` is off the grid."""
    k = int(np.argmin(np.abs(times - s)))
    if abs(times[k] - s) > 1e-9 * max(1.0, abs(s)):
        raise DomainError(f"time {s} is not on the simulation grid")
    return k


def solve_bsde(bundle, prob, basis=None, terminal=None, stop_step=0):
    """Backward sweep from the last grid step down to ``stop_step``.

    ``terminal=None`` uses ``prob.phi_terminal`` at the final states;
    otherwise ``terminal`` holds one finite value per path.
    """
    basis = RegressionBasis() if basis is None else basis
    if bundle.paths.shape[-1] != prob.dim or bundle.dW.shape[-1] != prob.noise_dim:
        raise ShapeError("bundle and problem dimensions disagree")
    K, P = bundle.n_steps, bundle.n_paths
    dt = bundle.dt
    if prob.lip_const * dt >= 1:
        raise ConfigError(f"L*dt = {prob.lip_const * dt:.3g} >= 1; the implicit step is not a contraction",
                          path="$.sim.n_steps")
    if basis.size(prob.dim) > P / 10:
        raise ConfigError(f"basis size {basis.size(prob.dim)} exceeds n_paths/10 = {P / 10:g}",
                          path="$.basis")
    if not 0 <= stop_step <= K:
        raise ArgumentError("stop_step outside the grid")
    if terminal is None:
        yT = np.asarray(prob.phi_terminal(bundle.paths[-1]), dtype=float)
        kind = "terminal_phi"
    else:
        yT = np.asarray(terminal, dtype=float).reshape(-1)
        kind = "injected_zeta"
        if yT.shape != (P,):
            raise ShapeError(f"terminal values must have shape ({P},)")
    if not np.all(np.isfinite(yT)):
        raise NumericError("terminal values are not finite")
    Y = np.full((K + 1, P), np.nan)
    Z = np.full((K, P, prob.noise_dim), np.nan)
    Y[K] = yT
    running = np.zeros(P)
    for k in range(K - 1, stop_step - 1, -1):
        X = bundle.paths[k]
        dW = bundle.dW[k]
        targets = np.column_stack([Y[k + 1], Y[k + 1][:, None] * dW])
        fitted = basis.fit(X, targets)(X)
        ey = fitted[:, 0]
        z = fitted[:, 1:] / dt
        u = bundle.controls[k]
        t = bundle.times[k]
        y = ey.copy()
        for _ in range(MAX_FIXED_POINT):
            y_new = ey + driver(prob, t, X, y, z, u) * dt
            done = np.max(np.abs(y_new - y), initial=0.0) <= 1e-15 * (1 + np.max(np.abs(y_new), initial=0.0))
            y = y_new
            if done:
                break
        qk = driver(prob, t, X, y, z, u)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise NumericError(f"non-finite BSDE values at step {k}")
        Y[k] = y
        Z[k] = z
        running += qk * dt
    return BsdePair(bundle.times.copy(), Y, Z, kind, int(stop_step), yT + running)


def backward_semigroup(bundle, prob, basis, zeta, s):
    """Per-path ``G_{s, t_end}[zeta]``: the solution at time ``s`` with terminal ``zeta``."""
    k = grid_index(bundle.times, s)
    pair = solve_bsde(bundle, prob, basis, terminal=zeta, stop_step=k)
    return pair.Y[k].copy()
