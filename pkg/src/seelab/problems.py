"""Concrete control problems, the Riccati benchmark and assumption audits.

Spatial problems live on (0, 1) with the Dirichlet sine basis
``e_i(xi) = sqrt(2) sin(i pi xi)``. Nonlinear reaction terms are evaluated on
a 128-point uniform grid with trapezoid weights; on that grid the first 126
basis functions are exactly orthonormal, so coefficient norms and grid
``L^2`` norms agree to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import ArgumentError, DomainError, ShapeError
from .simulate import ControlProblem
from .spectral import BlockOperator, SpectralOperator, dirichlet_laplacian, norm
from .viscosity import CandidateSolution

__all__ = [
    "GRID_POINTS",
    "QWienerSpec",
    "ReactionSpec",
    "SineGrid",
    "build_parabolic",
    "build_hyperbolic",
    "build_ou",
    "build_heat",
    "LqSpec",
    "RiccatiFlow",
    "riccati_flow",
    "build_lq_benchmark",
    "AuditReport",
    "audit_assumptions",
    "default_reaction",
    "preset",
    "PRESETS",
]

GRID_POINTS = 128


@dataclass(frozen=True)
class QWienerSpec:
    """Covariance eigenvalues ``q_1, q_2, ...`` of a trace-class Wiener process.

    ``power`` (when set) records that ``q_i = i^{-power}`` so that tails can
    be summed to infinity; ``eigenvalues`` holds the first ``M`` values.
    """

    eigenvalues: np.ndarray
    power: float | None = None

    def __post_init__(self):
        q = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        if q.size == 0 or np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ArgumentError("Q eigenvalues must be finite and nonnegative")
        object.__setattr__(self, "eigenvalues", q)

    @classmethod
    def power_law(cls, alpha, m):
        """``q_i = i^{-alpha}``; trace class requires ``alpha > 1``."""
        alpha = float(alpha)
        if not alpha > 1:
            raise ArgumentError(f"q_i = i^-{alpha} is not trace class (need alpha > 1)")
        return cls(np.arange(1, int(m) + 1, dtype=float) ** -alpha, alpha)

    @property
    def dim(self):
        return self.eigenvalues.size

    def trace(self):
        if self.power is not None:
            return float(special.zeta(self.power, 1))
        return float(self.eigenvalues.sum())

    def tail(self, n):
        """``sum_{i > n} q_i`` (to infinity for power laws)."""
        if self.power is not None:
            return float(special.zeta(self.power, n + 1))
        return float(self.eigenvalues[n:].sum())


@dataclass(frozen=True)
class ReactionSpec:
    """Pointwise reaction, noise, running and terminal reward maps.

    ``f(t, xi, y, u)`` and ``h(t, xi, y, u)`` act on arrays ``xi, y`` of the
    same shape; ``alpha(t, y, u)`` and ``beta(y)`` likewise. ``lip`` is the
    declared constant of the growth/Lipschitz bounds.
    """

    f: Callable
    h: Callable
    alpha: Callable
    beta: Callable
    lip: float
    name: str = "custom"
    h_sup: float | None = None  # sup |h|, used for noise-tail bounds


def default_reaction():
    """Bounded, globally Lipschitz reaction terms with a three-point control grid."""
    return ReactionSpec(
        f=lambda t, xi, y, u: 0.5 * np.sin(y) + 0.3 * u,
        h=lambda t, xi, y, u: 0.3 + 0.1 * np.cos(y) * (1 + u) / 2,
        alpha=lambda t, y, u: -0.5 * np.sqrt(1 + y * y) - 0.1 * u * u,
        beta=lambda y: -0.5 * np.sqrt(1 + y * y),
        lip=1.0,
        name="default",
        h_sup=0.4,
    )


@dataclass(frozen=True)
class SineGrid:
    """Quadrature grid ``xi_j = j / (J - 1)`` with trapezoid weights and the sine basis."""

    n_modes: int
    n_points: int = GRID_POINTS
    xi: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.n_modes <= self.n_points - 2:
            raise ShapeError(f"at most {self.n_points - 2} modes are exact on a {self.n_points}-point grid")
        J = self.n_points
        xi = np.arange(J) / (J - 1)
        w = np.full(J, 1.0 / (J - 1))
        w[[0, -1]] *= 0.5
        i = np.arange(1, self.n_modes + 1)
        E = np.sqrt(2.0) * np.sin(np.pi * np.outer(xi, i))
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "basis", E)

    def synthesize(self, X):
        """Grid values ``(P, J)`` of the functions with coefficients ``X (P, N)``."""
        return X @ self.basis.T

    def analyze(self, F):
        """Coefficients ``(P, N)`` of grid values ``F (P, J)`` (discrete projection)."""
        return (F * self.weights) @ self.basis

    def integrate(self, F):
        return F @ self.weights


def _noise_tensor(grid, q):
    """``G[j, i, k] = w_j e_i(xi_j) e_k(xi_j) sqrt(q_k)`` flattened to ``(J, N*M)``."""
    E = grid.basis
    M = q.dim
    Ek = np.sqrt(2.0) * np.sin(np.pi * np.outer(grid.xi, np.arange(1, M + 1)))
    G = grid.weights[:, None, None] * E[:, :, None] * (Ek * np.sqrt(q.eigenvalues))[:, None, :]
    return G.reshape(grid.n_points, grid.n_modes * M)


def _tail_fn(reaction, q, n_points, gamma_fn):
    """``n -> |Q_n sigma(t, x, u)|^2_HS`` at reference resolution.

    Output modes and noise modes up to ``n_points - 2`` are resolved on the
    grid; noise modes beyond that are bounded by ``2 sup|h|^2 sum_{k>K} q_k``.
    """
    K = n_points - 2
    ref = SineGrid(K, n_points)
    qref = QWienerSpec(np.arange(1, K + 1, dtype=float) ** -q.power, q.power) if q.power else q
    Kq = qref.dim
    Ek = ref.basis[:, :Kq]
    rem = 0.0
    if q.power is not None:
        h_sup = reaction.h_sup if reaction.h_sup is not None else np.inf
        rem = 2 * h_sup**2 * qref.tail(Kq)

    def tail(t, x, u, levels):
        gamma = gamma_fn(np.atleast_2d(x))[0]
        hv = reaction.h(t, ref.xi, gamma, u)
        # C[i, k] = <h e_k, e_i>, exact on the grid for i, k <= K
        C = ref.basis.T @ ((ref.weights * hv)[:, None] * Ek)
        C2 = C**2 * qref.eigenvalues[None, :]
        per_row = C2.sum(axis=1)
        out = []
        for n in levels:
            out.append(float(per_row[n:].sum()) + rem)
        return np.array(out)

    return tail


def _spatial_pieces(reaction, q, N, n_points):
    grid = SineGrid(N, n_points)
    if q.dim > n_points - 2:
        raise ShapeError("noise modes beyond the grid resolution")
    G = _noise_tensor(grid, q)
    return grid, G


def build_parabolic(reaction=None, q=None, N=16, horizon=1.0, controls=(-1.0, 0.0, 1.0),
                    n_points=GRID_POINTS):
    """Semilinear heat equation with multiplicative Q-Wiener noise on (0, 1).

    State: ``N`` sine coefficients of ``y``; noise: ``M = q.dim`` modes.
    ``b = P_N f(y)``, ``sigma_{ik} = sqrt(q_k) <h(y) e_k, e_i>``,
    ``q = int alpha(y)``, ``phi = int beta(y)``.
    """
    reaction = default_reaction() if reaction is None else reaction
    q = QWienerSpec.power_law(3.0, N) if q is None else q
    grid, G = _spatial_pieces(reaction, q, N, n_points)
    M = q.dim
    op = dirichlet_laplacian(N)

    def b(t, X, u):
        gamma = grid.synthesize(X)
        return grid.analyze(reaction.f(t, grid.xi, gamma, u))

    def sigma(t, X, u):
        gamma = grid.synthesize(X)
        return (reaction.h(t, grid.xi, gamma, u) @ G).reshape(X.shape[0], N, M)

    def qfun(t, X, y, z, u):
        return grid.integrate(reaction.alpha(t, grid.synthesize(X), u))

    def phi(X):
        return grid.integrate(reaction.beta(grid.synthesize(X)))

    meta = {"kind": "parabolic", "q": q, "reaction": reaction, "grid": grid,
            "sigma_tail": _tail_fn(reaction, q, n_points, grid.synthesize),
            "hs_bound": lambda x: reaction.lip**2 * q.trace() * (1 + float(norm(x)) ** 2)}
    return ControlProblem(op, tuple(controls), b, sigma, qfun, phi, reaction.lip, horizon, M,
                          name="parabolic", meta=meta)


def build_hyperbolic(reaction=None, q=None, N=8, horizon=1.0, controls=(-1.0, 0.0, 1.0),
                     n_points=GRID_POINTS):
    """Semilinear wave equation in energy coordinates ``[(-A)^{1/2} y, y_t]``.

    The generator is the block rotation with frequencies ``i pi``; drift and
    noise act on the velocity block only and reaction terms see the
    displacement ``y_i = Y_i / (i pi)``.
    """
    reaction = default_reaction() if reaction is None else reaction
    q = QWienerSpec.power_law(3.0, N) if q is None else q
    grid, G = _spatial_pieces(reaction, q, N, n_points)
    M = q.dim
    freq = np.pi * np.arange(1, N + 1)
    op = BlockOperator(np.zeros(N), freq)

    def displacement(X):
        return grid.synthesize(X[:, :N] / freq)

    def b(t, X, u):
        out = np.zeros_like(X)
        out[:, N:] = grid.analyze(reaction.f(t, grid.xi, displacement(X), u))
        return out

    def sigma(t, X, u):
        out = np.zeros((X.shape[0], 2 * N, M))
        out[:, N:, :] = (reaction.h(t, grid.xi, displacement(X), u) @ G).reshape(X.shape[0], N, M)
        return out

    def qfun(t, X, y, z, u):
        return grid.integrate(reaction.alpha(t, displacement(X), u))

    def phi(X):
        return grid.integrate(reaction.beta(displacement(X)))

    meta = {"kind": "hyperbolic", "q": q, "reaction": reaction, "grid": grid,
            "sigma_tail": _tail_fn(reaction, q, n_points, displacement),
            "hs_bound": lambda x: reaction.lip**2 * q.trace() * (1 + float(norm(x)) ** 2)}
    return ControlProblem(op, tuple(controls), b, sigma, qfun, phi, reaction.lip, horizon, M,
                          name="hyperbolic", meta=meta)


def build_ou(lam=-1.0, noise=0.5, horizon=1.0, lip=1.0):
    """Scalar Ornstein-Uhlenbeck state, no running reward, payoff ``|x|``.

    The kink of the payoff makes the value exactly half-Hölder in time near
    the horizon.
    """
    op = SpectralOperator([float(lam)])
    if noise < 0:
        raise ArgumentError("noise level must be nonnegative")

    def b(t, X, u):
        return np.zeros_like(X)

    def sigma(t, X, u):
        return np.full((X.shape[0], 1, 1), float(noise))

    def qfun(t, X, y, z, u):
        return np.zeros(X.shape[0])

    def phi(X):
        return np.abs(X[:, 0])

    return ControlProblem(op, (0,), b, sigma, qfun, phi, lip, horizon, 1, name="ou",
                          meta={"kind": "ou", "lam": float(lam), "noise": float(noise)})


def build_heat(N=8, horizon=1.0):
    """Deterministic heat flow: ``b = sigma = q = 0``, ``phi = sum of coefficients``."""
    op = dirichlet_laplacian(N)
    return ControlProblem(
        op, (0,),
        b=lambda t, X, u: np.zeros_like(X),
        sigma=lambda t, X, u: np.zeros((X.shape[0], N, N)),
        q=lambda t, X, y, z, u: np.zeros(X.shape[0]),
        phi_terminal=lambda X: X.sum(axis=-1),
        lip_const=max(1.0, float(np.sqrt(N))), horizon=horizon, noise_dim=N, name="heat",
        meta={"kind": "heat"})


@dataclass(frozen=True)
class LqSpec:
    """Linear-quadratic problem with control acting on the noise scale.

    ``dX = (A + A0) X dt + beta dt + s_u Sigma dW``, running reward
    ``-x^T R x / 2 + c_u - rho y`` and payoff ``-x^T G x / 2``.
    """

    eigenvalues: tuple = (-1.0,)
    sigma: np.ndarray = field(default_factory=lambda: np.array([[0.5]]))
    scales: tuple = (1.0, 1.4)
    rewards: tuple = (0.0, 0.02)
    R: np.ndarray = field(default_factory=lambda: np.eye(1))
    G: np.ndarray = field(default_factory=lambda: np.eye(1))
    A0: np.ndarray | None = None
    beta: np.ndarray | None = None
    rho: float = 0.5
    horizon: float = 1.0
    box: float = 3.0

    @classmethod
    def two_dim(cls, **kw):
        base = dict(eigenvalues=(-1.0, -4.0), sigma=np.diag([0.5, 0.3]), R=np.eye(2), G=np.eye(2))
        base.update(kw)
        return cls(**base)


@dataclass
class RiccatiFlow:
    """Backward solution of the ``(P, k, r)`` system on a node grid.

    Nodes are stored in increasing time; ``ctrl[j]`` is the optimal control
    index on ``[times[j], times[j+1]]``. Values between nodes use cubic
    Hermite interpolation with exact node derivatives.
    """

    times: np.ndarray
    P: np.ndarray
    k: np.ndarray
    r: np.ndarray
    ctrl: np.ndarray
    spec: LqSpec
    Atil: np.ndarray
    switch_times: list

    def _rhs(self, P, k, r, u):
        return _lq_rhs(self.spec, self.Atil, P, k, r, u)

    def _locate(self, t):
        T = self.times
        if not T[0] - 1e-14 <= t <= T[-1] + 1e-14:
            raise DomainError(f"time {t} outside [{T[0]}, {T[-1]}]")
        j = int(np.clip(np.searchsorted(T, t, side="right") - 1, 0, T.size - 2))
        return j

    def state(self, t):
        """``(P, k, r, dP, dk, dr)`` at time ``t``."""
        j = self._locate(t)
        t0, t1 = self.times[j], self.times[j + 1]
        h = t1 - t0
        s = (t - t0) / h
        u = int(self.ctrl[j])
        d0 = self._rhs(self.P[j], self.k[j], self.r[j], u)
        d1 = self._rhs(self.P[j + 1], self.k[j + 1], self.r[j + 1], u)
        h00, h10, h01, h11 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s, -2 * s**3 + 3 * s**2, s**3 - s**2
        g00, g10, g01, g11 = (6 * s**2 - 6 * s) / h, 3 * s**2 - 4 * s + 1, (-6 * s**2 + 6 * s) / h, 3 * s**2 - 2 * s
        out = []
        derivs = []
        for idx, (y0, y1) in enumerate([(self.P[j], self.P[j + 1]), (self.k[j], self.k[j + 1]),
                                        (self.r[j], self.r[j + 1])]):
            m0, m1 = d0[idx], d1[idx]
            out.append(h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1)
            derivs.append(g00 * y0 + g10 * m0 + g01 * y1 + g11 * m1)
        return (*out, *derivs)


def _lq_rhs(spec, Atil, P, k, r, u):
    """Time derivatives of ``(P, k, r)`` with control ``u`` fixed."""
    S = np.asarray(spec.sigma)
    beta = np.zeros(P.shape[0]) if spec.beta is None else np.asarray(spec.beta)
    dP = -(P @ Atil + Atil.T @ P) + np.asarray(spec.R) + spec.rho * P
    dk = -Atil.T @ k - P @ beta + spec.rho * k
    m = 0.5 * spec.scales[u] ** 2 * np.trace(P @ S @ S.T) + spec.rewards[u]
    dr = -k @ beta - m + spec.rho * r
    return dP, dk, dr


def _best_control(spec, P):
    S = np.asarray(spec.sigma)
    tr = np.trace(P @ S @ S.T)
    vals = [0.5 * s**2 * tr + c for s, c in zip(spec.scales, spec.rewards)]
    return int(np.argmax(vals))


def _affine_system(spec, Atil):
    """Per control ``u``: ``(M_u, c_u)`` with ``d/dt v = M_u v + c_u`` for ``v = [vec P, k, r]``."""
    n = Atil.shape[0]
    d = n * n + n + 1

    def unpack(v):
        return v[: n * n].reshape(n, n), v[n * n: n * n + n], v[-1]

    def pack(P, k, r):
        return np.concatenate([np.ravel(P), k, [r]])

    out = []
    for u in range(len(spec.scales)):
        c = pack(*_lq_rhs(spec, Atil, *unpack(np.zeros(d)), u))
        M = np.column_stack([pack(*_lq_rhs(spec, Atil, *unpack(e), u)) - c for e in np.eye(d)])
        out.append((M, c))
    return out, unpack, pack


def _rk4_map(M, c, h):
    """One classical RK4 step of length ``h`` for ``v' = M v + c`` as ``v -> Phi v + psi``."""
    hM = h * M
    I = np.eye(M.shape[0])
    hM2 = hM @ hM
    hM3 = hM2 @ hM
    Phi = I + hM + hM2 / 2 + hM3 / 6 + hM3 @ hM / 24
    psi = h * (I + hM / 2 + hM2 / 6 + hM3 / 24) @ c
    return Phi, psi


def riccati_flow(spec, step=1e-4):
    """Integrate the ``(P, k, r)`` system backwards from ``P(T) = -G`` with fixed-step RK4.

    The system is affine for a fixed control, so each RK4 step is applied as
    a precomputed affine map. When the optimal control index changes inside
    a step, the switching time is located by root finding on the step length
    and inserted as a node.
    """
    n = len(spec.eigenvalues)
    Atil = np.diag(np.asarray(spec.eigenvalues, dtype=float))
    if spec.A0 is not None:
        Atil = Atil + np.asarray(spec.A0, dtype=float)
    systems, unpack, pack = _affine_system(spec, Atil)
    T = float(spec.horizon)
    n_steps = int(round(T / step))
    h = T / n_steps
    maps = [_rk4_map(M, c, -h) for M, c in systems]
    v = pack(-np.asarray(spec.G, dtype=float), np.zeros(n), 0.0)
    t = T
    times, values, ctrl, switches = [T], [v], [], []
    planned = T - h * np.arange(n_steps + 1)
    planned[-1] = 0.0
    S = np.asarray(spec.sigma)
    scales = np.asarray(spec.scales, dtype=float)
    rewards = np.asarray(spec.rewards, dtype=float)

    sst = (S @ S.T).T.ravel()

    def gap(P, a, b):
        tr = np.trace(P @ S @ S.T)
        return 0.5 * (scales[a] ** 2 - scales[b] ** 2) * tr + rewards[a] - rewards[b]

    def best(v):
        # same ordering as _best_control, with Tr(P S S^T) as a dot product
        return int(np.argmax(0.5 * scales**2 * (v[: n * n] @ sst) + rewards))

    def advance(v, u, length):
        if length == h:
            Phi, psi = maps[u]
        else:
            Phi, psi = _rk4_map(*systems[u], -length)
        return Phi @ v + psi

    u = _best_control(spec, unpack(v)[0])
    for j in range(n_steps):
        target = planned[j + 1]
        while True:
            length = t - target
            v_new = advance(v, u, length)
            u_new = best(v_new)
            if u_new == u:
                v, t = v_new, target
                times.append(t), values.append(v), ctrl.append(u)
                break
            tau = brentq(lambda s: gap(unpack(advance(v, u, s))[0], u, u_new), 0.0, length, xtol=1e-15)
            if tau > 1e-14:
                v = advance(v, u, tau)
                t -= tau
                times.append(t), values.append(v), ctrl.append(u)
            switches.append(t)
            u = u_new
    V = np.array(values)[::-1]
    P = V[:, : n * n].reshape(-1, n, n)
    k = V[:, n * n: n * n + n]
    r = V[:, -1]
    return RiccatiFlow(np.array(times)[::-1], P, k, r, np.array(ctrl)[::-1], spec, Atil,
                       switches[::-1])


def _psd(M):
    M = np.asarray(M, dtype=float)
    return np.allclose(M, M.T) and np.all(np.linalg.eigvalsh(0.5 * (M + M.T)) >= -1e-14)


def build_lq_benchmark(spec=None, step=1e-4):
    """LQ problem with a classical quadratic value and its closed form.

    Returns ``(problem, candidate)``. ``candidate`` evaluates
    ``V(t, x) = x^T P x / 2 + k^T x + r`` with exact derivatives of the
    interpolated Riccati flow.
    """
    spec = LqSpec() if spec is None else spec
    n = len(spec.eigenvalues)
    if n > 2:
        raise ArgumentError("LQ benchmark supports at most two dimensions")
    S = np.asarray(spec.sigma, dtype=float)
    if S.shape[0] != n or np.asarray(spec.R).shape != (n, n) or np.asarray(spec.G).shape != (n, n):
        raise ShapeError("LQ matrices do not match the state dimension")
    if not (_psd(spec.R) and _psd(spec.G)):
        raise ArgumentError("R and G must be symmetric positive semi-definite")
    if len(spec.scales) != len(spec.rewards) or not spec.scales:
        raise ArgumentError("one noise scale and one reward per control")
    op = SpectralOperator(spec.eigenvalues)
    A0 = np.zeros((n, n)) if spec.A0 is None else np.asarray(spec.A0, dtype=float)
    Atil = op.matrix() + A0
    if np.max(np.linalg.eigvals(Atil).real) > 0:
        raise ArgumentError("uncontrolled drift is unstable and the control cannot stabilise it")
    beta = np.zeros(n) if spec.beta is None else np.asarray(spec.beta, dtype=float)
    R = np.asarray(spec.R, dtype=float)
    Gm = np.asarray(spec.G, dtype=float)
    M = S.shape[1]
    labels = tuple(range(len(spec.scales)))

    def b(t, X, u):
        return X @ A0.T + beta

    def sigma(t, X, u):
        return np.broadcast_to(spec.scales[u] * S, (X.shape[0], n, M)).copy()

    def qfun(t, X, y, z, u):
        return -0.5 * np.einsum("pi,ij,pj->p", X, R, X) + spec.rewards[u] - spec.rho * y

    def phi(X):
        return -0.5 * np.einsum("pi,ij,pj->p", X, Gm, X)

    box = spec.box
    nR, nG = np.linalg.norm(R, 2), np.linalg.norm(Gm, 2)
    L = max(1.0, np.linalg.norm(A0, 2) + float(norm(beta)), max(spec.scales) * np.linalg.norm(S),
            nR * box + max(abs(c) for c in spec.rewards), spec.rho, nG * box)
    flow = riccati_flow(spec, step)

    def value(t, X):
        P, k, r, *_ = flow.state(float(t))
        X = np.asarray(X, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", X, P, X) + X @ k + r

    def dt(t, x):
        _, _, _, dP, dk, dr = flow.state(float(t))
        return float(0.5 * x @ dP @ x + dk @ x + dr)

    def grad(t, x):
        P, k, *_ = flow.state(float(t))
        return P @ x + k

    def hess(t, x):
        return flow.state(float(t))[0].copy()

    prob = ControlProblem(op, labels, b, sigma, qfun, phi, float(L), spec.horizon, M,
                          name=f"lq{n}", lip_box=box,
                          meta={"kind": "lq", "spec": spec, "flow": flow})
    cand = CandidateSolution(value, op, dt, grad, hess, provenance="closed-form")
    return prob, cand


@dataclass
class AuditReport:
    growth: dict
    lipschitz: dict
    continuity: float
    tail_levels: list
    tail_values: list
    tail_decreasing: bool
    declared: float
    box: float | None
    violations: list

    @property
    def passed(self):
        return not self.violations

    def to_json(self):
        return {"growth": self.growth, "lipschitz": self.lipschitz, "continuity": self.continuity,
                "tail_levels": self.tail_levels, "tail_values": self.tail_values,
                "tail_decreasing": self.tail_decreasing, "declared_L": self.declared,
                "probe_box": self.box, "violations": self.violations, "passed": self.passed}


def _hs(s):
    return np.sqrt((s * s).sum(axis=(-2, -1)))


def audit_assumptions(prob, n_probes=200, seed=0, radius=2.0, rel_tol=1e-6, tail_levels=None):
    """Randomised audit of growth, Lipschitz and continuity bounds and of the ``Q_n`` tail.

    Ratios are measured against the declared constant ``L`` (so a ratio
    above ``1 + rel_tol`` is a violation). When the problem declares a
    ``lip_box``, probes are drawn inside that ball. The tail ladder uses
    ``prob.meta['sigma_tail']`` when present and the in-model tail of
    ``sigma`` otherwise.
    """
    rng = np.random.default_rng(seed)
    N, M = prob.dim, prob.noise_dim
    L = float(prob.lip_const)
    R = radius if prob.lip_box is None else min(radius, prob.lip_box)
    T = prob.horizon

    def sample(n):
        d = rng.normal(size=(n, N))
        d /= np.maximum(norm(d)[:, None], 1e-300)
        return d * (R * rng.uniform(size=(n, 1)) ** (1.0 / N))

    X, Y = sample(n_probes), sample(n_probes)
    ts = rng.uniform(0, T, size=n_probes)
    yv, yv2 = rng.normal(size=n_probes), rng.normal(size=n_probes)
    zv, zv2 = rng.normal(size=(n_probes, M)), rng.normal(size=(n_probes, M))
    growth = {"b": 0.0, "sigma": 0.0, "q": 0.0}
    lip = {"b": 0.0, "sigma": 0.0, "q": 0.0, "phi": 0.0}
    cont = 0.0
    dx = norm(X - Y)
    for u in prob.controls:
        for j in range(n_probes):
            t = ts[j]
            x, y = X[j:j + 1], Y[j:j + 1]
            bx, by = prob.b(t, x, u)[0], prob.b(t, y, u)[0]
            sx, sy = prob.sigma(t, x, u)[0], prob.sigma(t, y, u)[0]
            qx = prob.q(t, x, yv[j:j + 1], zv[j:j + 1], u)[0]
            qy = prob.q(t, y, yv2[j:j + 1], zv2[j:j + 1], u)[0]
            nx = float(norm(x[0]))
            growth["b"] = max(growth["b"], float(norm(bx)) / (L * np.sqrt(1 + nx**2)))
            growth["sigma"] = max(growth["sigma"], float(_hs(sx)) / (L * np.sqrt(1 + nx**2)))
            growth["q"] = max(growth["q"], abs(qx) / (L * (1 + nx + abs(yv[j]) + float(norm(zv[j])))))
            if dx[j] > 0:
                lip["b"] = max(lip["b"], float(norm(bx - by)) / (L * dx[j]))
                lip["sigma"] = max(lip["sigma"], float(_hs(sx - sy)) / (L * dx[j]))
            dq = dx[j] + abs(yv[j] - yv2[j]) + float(norm(zv[j] - zv2[j]))
            lip["q"] = max(lip["q"], abs(qx - qy) / (L * dq))
            # joint continuity: change under a small perturbation in (t, x)
            e = 1e-7
            te = min(T, t + e)
            xe = x + e * rng.normal(size=x.shape) / np.sqrt(N)
            moved = max(float(norm(prob.b(te, xe, u)[0] - bx)), float(_hs(prob.sigma(te, xe, u)[0] - sx)))
            cont = max(cont, moved / e)
    px, py = prob.phi_terminal(X), prob.phi_terminal(Y)
    mask = dx > 0
    lip["phi"] = float(np.max(np.abs(px - py)[mask] / (L * dx[mask]))) if mask.any() else 0.0
    violations = [f"growth:{k}={v:.6g}" for k, v in growth.items() if v > 1 + rel_tol]
    violations += [f"lipschitz:{k}={v:.6g}" for k, v in lip.items() if v > 1 + rel_tol]
    if not np.isfinite(cont):
        violations.append("continuity: non-finite modulus")
    levels = list(range(1, N + 1)) if tail_levels is None else list(tail_levels)
    x0 = X[0]
    tail_fn = prob.meta.get("sigma_tail")
    tails = np.zeros(len(levels))
    for u in prob.controls:
        if tail_fn is not None:
            vals = tail_fn(ts[0], x0, u, levels)
        else:
            s = prob.sigma(ts[0], x0[None, :], u)[0]
            rows = (s * s).sum(axis=1)
            vals = np.array([rows[n:].sum() for n in levels])
        tails = np.maximum(tails, vals)
    d = np.diff(tails)
    decreasing = bool(np.all((d < 0) | ((tails[1:] == 0) & (d == 0))))
    return AuditReport(growth, lip, float(cont), levels, tails.tolist(), decreasing, L,
                       prob.lip_box, violations)


def preset(name, **kw):
    """Named problem presets: ``ou``, ``parabolic``, ``hyperbolic``, ``lq``, ``lq2``, ``heat``."""
    if name == "ou":
        return build_ou(**kw)
    if name == "parabolic":
        return build_parabolic(**kw)
    if name == "hyperbolic":
        return build_hyperbolic(**kw)
    if name == "lq":
        return build_lq_benchmark(LqSpec(**kw))[0]
    if name == "lq2":
        return build_lq_benchmark(LqSpec.two_dim(**kw))[0]
    if name == "heat":
        return build_heat(**kw)
    raise ArgumentError(f"unknown preset {name!r}")


PRESETS = ("ou", "parabolic", "hyperbolic", "lq", "lq2", "heat")
