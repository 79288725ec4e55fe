"""Finite spectral model of the state space and its generator.

States are plain 1-D ``float64`` arrays of basis coefficients; batches of
states are arrays whose last axis is the coefficient axis. Every function
here broadcasts over leading axes.

Two generator families are provided:

* :class:`SpectralOperator` -- diagonal, self-adjoint, non-positive spectrum
  (the Dirichlet Laplacian on (0, 1) in the sine basis by default).
* :class:`BlockOperator` -- 2x2 rotation/decay blocks, used for the
  first-order form of the wave equation written in energy coordinates.

Both expose the same small duck-typed surface: ``dim``, ``semigroup(t, x)``,
``apply(x)``, ``step_factor(dt)`` and ``yosida(mu)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError

__all__ = [
    "SpectralOperator",
    "BlockOperator",
    "YosidaOperator",
    "dirichlet_laplacian",
    "as_state",
    "norm",
    "semigroup_apply",
    "project",
    "yosida_semigroup_apply",
    "adjoint_pair",
]


def as_state(x, dim=None):
    """Coerce ``x`` to a float array and check its trailing dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        raise ShapeError("state must have at least one axis")
    if dim is not None and arr.shape[-1] != dim:
        raise ShapeError(f"state dimension {arr.shape[-1]} != operator dimension {dim}")
    return arr


def norm(x):
    """Euclidean norm over the last axis (naive summation)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt((x * x).sum(axis=-1))


def _check_time(t):
    t = float(t)
    if not t >= 0.0:
        raise DomainError(f"semigroup time must be nonnegative, got {t}")
    return t


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralOperator:
    """Diagonal generator ``A e_i = lambda_i e_i`` with ``lambda_i <= 0``."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.eigenvalues).reshape(-1)
        if lam.size == 0:
            raise ShapeError("operator needs at least one eigenvalue")
        if not np.all(np.isfinite(lam)):
            raise DomainError("eigenvalues must be finite")
        if np.any(lam > 0):
            raise DomainError("eigenvalues must be <= 0 (contraction semigroup)")
        if np.any(np.diff(lam) > 0):
            raise DomainError("eigenvalues must be sorted non-increasing")
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def dim(self):
        return self.eigenvalues.size

    def step_factor(self, dt):
        """Return a callable applying ``e^{dt A}`` to a batch of states."""
        fac = np.exp(self.eigenvalues * _check_time(dt))
        return lambda x: x * fac

    def semigroup(self, t, x):
        x = as_state(x, self.dim)
        return x * np.exp(self.eigenvalues * _check_time(t))

    def apply(self, x):
        return as_state(x, self.dim) * self.eigenvalues

    def matrix(self):
        return np.diag(self.eigenvalues)

    def yosida(self, mu):
        return YosidaOperator(mu, self)

    def to_json(self):
        return {"kind": "diagonal", "eigenvalues": self.eigenvalues.tolist()}


@dataclass(frozen=True)
class BlockOperator:
    """Generator made of 2x2 blocks ``[[a_i, w_i], [-w_i, a_i]]``.

    The state is laid out as ``[y_1..y_n, z_1..z_n]``; block ``i`` couples
    ``y_i`` and ``z_i``. With ``a_i <= 0`` the semigroup
    ``e^{a t} R(w t)`` is a contraction in the Euclidean norm.
    """

    decay: np.ndarray
    freq: np.ndarray

    def __post_init__(self):
        a = _frozen(self.decay).reshape(-1)
        w = _frozen(self.freq).reshape(-1)
        if a.shape != w.shape:
            raise ShapeError("decay and freq must have equal length")
        if np.any(a > 0) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(w)):
            raise DomainError("block decay rates must be finite and <= 0")
        object.__setattr__(self, "decay", a)
        object.__setattr__(self, "freq", w)

    @property
    def modes(self):
        return self.decay.size

    @property
    def dim(self):
        return 2 * self.decay.size

    def _rotate(self, x, c, s, g):
        n = self.modes
        y, z = x[..., :n], x[..., n:]
        return np.concatenate([g * (c * y + s * z), g * (-s * y + c * z)], axis=-1)

    def step_factor(self, dt):
        dt = _check_time(dt)
        c, s = np.cos(self.freq * dt), np.sin(self.freq * dt)
        g = np.exp(self.decay * dt)
        return lambda x: self._rotate(x, c, s, g)

    def semigroup(self, t, x):
        x = as_state(x, self.dim)
        return self.step_factor(t)(x)

    def apply(self, x):
        x = as_state(x, self.dim)
        n = self.modes
        y, z = x[..., :n], x[..., n:]
        a, w = self.decay, self.freq
        return np.concatenate([a * y + w * z, -w * y + a * z], axis=-1)

    def matrix(self):
        n = self.modes
        m = np.zeros((2 * n, 2 * n))
        idx = np.arange(n)
        m[idx, idx] = self.decay
        m[idx + n, idx + n] = self.decay
        m[idx, idx + n] = self.freq
        m[idx + n, idx] = -self.freq
        return m

    def yosida(self, mu):
        return YosidaOperator(mu, self)

    def to_json(self):
        return {"kind": "block", "decay": self.decay.tolist(), "freq": self.freq.tolist()}


@dataclass(frozen=True)
class YosidaOperator:
    """Yosida approximation ``A_mu = mu A (mu I - A)^{-1}`` of ``base``.

    ``generator`` is the bounded operator ``A_mu`` expressed in the same
    family as ``base``; it shares the eigenvectors of ``base``.
    """

    mu: float
    base: object
    generator: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = float(self.mu)
        if not mu > 0 or not np.isfinite(mu):
            raise DomainError(f"Yosida parameter must be positive and finite, got {mu}")
        object.__setattr__(self, "mu", mu)
        base = self.base
        if isinstance(base, SpectralOperator):
            lam = base.eigenvalues
            gen = SpectralOperator(mu * lam / (mu - lam))
        elif isinstance(base, BlockOperator):
            # eigenvalues a +- i w map to mu z / (mu - z)
            z = base.decay + 1j * base.freq
            zm = mu * z / (mu - z)
            gen = BlockOperator(np.minimum(zm.real, 0.0), zm.imag)
        else:
            raise TypeError(f"no Yosida approximation for {type(base).__name__}")
        object.__setattr__(self, "generator", gen)

    @property
    def dim(self):
        return self.base.dim

    @property
    def eigenvalues(self):
        return self.generator.eigenvalues

    def step_factor(self, dt):
        return self.generator.step_factor(dt)

    def semigroup(self, t, x):
        return self.generator.semigroup(t, x)

    def apply(self, x):
        return self.generator.apply(x)

    def yosida(self, mu):
        raise TypeError("Yosida approximation of a Yosida operator is not supported")


def dirichlet_laplacian(n):
    """Dirichlet Laplacian on (0, 1) in the sine basis: ``lambda_i = -(i pi)^2``."""
    if int(n) < 1:
        raise ShapeError("need at least one mode")
    i = np.arange(1, int(n) + 1)
    return SpectralOperator(-((i * np.pi) ** 2))


def semigroup_apply(op, t, x):
    """``e^{tA} x``; ``t`` must be nonnegative."""
    return op.semigroup(t, x)


def project(x, m):
    """Split ``x`` into its first ``m`` coefficients and the remainder."""
    x = as_state(x)
    n = x.shape[-1]
    m = int(m)
    if not 1 <= m <= n:
        raise ShapeError(f"projection level {m} outside [1, {n}]")
    return x[..., :m].copy(), x[..., m:].copy()


def yosida_semigroup_apply(y, t, x):
    """``e^{t A_mu} x`` for a :class:`YosidaOperator` ``y``."""
    return y.semigroup(t, x)


def adjoint_pair(op, x, y):
    """``<A^* x, y>``, computed as ``<x, A y>`` so it holds for any generator."""
    x = as_state(x, op.dim)
    y = as_state(y, op.dim)
    return (x * op.apply(y)).sum(axis=-1)
