"""Metric, gauge functional and test-function evaluators.

The orbit-shifted power ``g(t, x) = |x - e^{(t - t0) A} y0|^p`` is the basic
building block. Finite weighted sums ``sum_i h_i(s) g_i(s, x)`` with
nonnegative time weights ``h_i`` form the second half of a test pair; the
first half is any smooth functional with explicit derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError, ShapeError
from .spectral import as_state, norm

__all__ = [
    "metric_d",
    "upsilon",
    "upsilon_field",
    "GaugeParams",
    "GaugeValue",
    "gauge_g_eval",
    "gauge_value",
    "PolyWeight",
    "GaugeTerm",
    "GaugeSum",
    "GaugeSumSpec",
    "build_gauge_sum",
    "upsilon_gauge",
    "canonical_gauge",
    "SmoothFunctional",
    "TestPair",
    "TestPairValue",
    "testpair_eval",
    "DEFAULT_TRUNCATION",
]

DEFAULT_TRUNCATION = 32


def _split(p, dim=None):
    t, x = p
    return float(t), as_state(x, dim)


def metric_d(p1, p2):
    """``|s - t| + |x - y|`` on ``[0, T] x H``."""
    t, x = _split(p1)
    s, y = _split(p2, x.shape[-1])
    return abs(s - t) + float(norm(x - y))


def upsilon(p1, p2, op):
    """Gauge ``|s - t|^2 + |x^A_{t, t v s} - y^A_{s, t v s}|^4``.

    The earlier of the two points is transported along the semigroup to the
    later time before the states are compared.
    """
    t, x = _split(p1, op.dim)
    s, y = _split(p2, op.dim)
    if s >= t:
        diff = op.semigroup(s - t, x) - y
    else:
        diff = x - op.semigroup(t - s, y)
    return (s - t) ** 2 + float(norm(diff)) ** 4


def upsilon_field(op, times, states, anchor):
    """``Upsilon((s, y), anchor)`` for every ``s`` in ``times`` and ``y`` in ``states``.

    Returns an array of shape ``(len(times), len(states))``.
    """
    ta, xa = _split(anchor, op.dim)
    times = np.asarray(times, dtype=float)
    states = as_state(states, op.dim)
    out = np.empty((times.size, states.shape[0]))
    for j, s in enumerate(times):
        if s >= ta:
            diff = states - op.semigroup(s - ta, xa)
        else:
            diff = op.semigroup(ta - s, states) - xa
        out[j] = (s - ta) ** 2 + ((diff * diff).sum(axis=-1)) ** 2
    return out


@dataclass(frozen=True)
class GaugeParams:
    """Anchor ``(t0, y0)``, even power ``p`` and generator for ``|x - y0^A_{t0,t}|^p``."""

    anchor_time: float
    anchor_state: np.ndarray
    op: object
    power: int = 4

    def __post_init__(self):
        p = int(self.power)
        if p != self.power or p < 2 or p % 2:
            raise DomainError(f"power must be an even integer >= 2, got {self.power}")
        y = as_state(self.anchor_state, self.op.dim).copy()
        y.setflags(write=False)
        object.__setattr__(self, "anchor_state", y)
        object.__setattr__(self, "anchor_time", float(self.anchor_time))
        object.__setattr__(self, "power", p)

    def orbit(self, t):
        if t < self.anchor_time:
            raise DomainError(f"time {t} precedes gauge anchor time {self.anchor_time}")
        return self.op.semigroup(t - self.anchor_time, self.anchor_state)


class GaugeValue(NamedTuple):
    value: float
    dt: float
    grad: np.ndarray
    hess: np.ndarray


def gauge_g_eval(params, t, x):
    """Value and derivatives of ``g(t, x) = |x - e^{(t - t0) A} y0|^p``.

    ``dt`` is the full partial time derivative (through the moving anchor).
    At ``x = orbit`` and ``p = 2`` the Hessian is the limit ``2 I``.
    """
    t = float(t)
    x = as_state(x, params.op.dim)
    orbit = params.orbit(t)
    xh = x - orbit
    p = params.power
    r2 = float(xh @ xh)
    rp2 = r2 ** ((p - 2) // 2)
    value = r2 ** (p // 2)
    grad = p * rp2 * xh
    hess = p * rp2 * np.eye(x.size)
    if p >= 4:
        hess = hess + p * (p - 2) * r2 ** ((p - 4) // 2) * np.outer(xh, xh)
    dt = -p * rp2 * float(xh @ params.op.apply(orbit))
    return GaugeValue(value, dt, grad, hess)


def gauge_value(params, t, x):
    """Vectorised value of the gauge over arrays of times and states."""
    x = as_state(x, params.op.dim)
    t = np.asarray(t, dtype=float)
    if np.any(t < params.anchor_time):
        raise DomainError("time precedes gauge anchor time")
    shape = np.broadcast_shapes(t.shape, x.shape[:-1])
    orbit = _orbit_batch(params, np.broadcast_to(t - params.anchor_time, shape))
    xh = x - orbit
    return ((xh * xh).sum(axis=-1)) ** (params.power // 2)


def _orbit_batch(params, dts):
    dts = np.asarray(dts, dtype=float)
    if dts.ndim == 0:
        return params.op.semigroup(float(dts), params.anchor_state)
    flat = dts.reshape(-1)
    uniq, inv = np.unique(flat, return_inverse=True)
    orbits = np.stack([params.op.semigroup(d, params.anchor_state) for d in uniq])
    return orbits[inv].reshape(dts.shape + (params.op.dim,))


@dataclass(frozen=True)
class PolyWeight:
    """Time weight ``h(s) = sum_k c_k (s - origin)^k`` with ``c_k >= 0``."""

    coeffs: tuple
    origin: float = 0.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if not c or any(v < 0 for v in c):
            raise DomainError("weight coefficients must be nonnegative")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, c):
        return cls((c,))

    @classmethod
    def centered_square(cls, c, origin):
        return cls((0.0, 0.0, c), origin)

    def __call__(self, s):
        u = np.asarray(s, dtype=float) - self.origin
        val = sum(c * u**k for k, c in enumerate(self.coeffs))
        if np.any(val < 0):
            raise DomainError("time weight became negative; use s >= origin or even powers")
        return val

    def derivative(self, s):
        u = np.asarray(s, dtype=float) - self.origin
        return sum(k * c * u ** (k - 1) for k, c in enumerate(self.coeffs) if k)


@dataclass(frozen=True)
class GaugeTerm:
    """One summand ``h(s) g(s, x)``; ``gauge=None`` means ``g = 1``."""

    weight: PolyWeight
    gauge: Optional[GaugeParams] = None


@dataclass(frozen=True)
class GaugeSum:
    """Finite sum of gauge terms on ``[domain_start, T] x H``.

    ``tail_weight`` records the total weight dropped by truncation.
    """

    dim: int
    domain_start: float
    terms: tuple = ()
    tail_weight: float = 0.0

    def __post_init__(self):
        for term in self.terms:
            g = term.gauge
            if g is not None and g.anchor_time > self.domain_start:
                raise DomainError(
                    f"anchor time {g.anchor_time} after domain start {self.domain_start}")
        object.__setattr__(self, "terms", tuple(self.terms))

    def value(self, t, x):
        x = as_state(x, self.dim)
        t = np.asarray(t, dtype=float)
        total = np.zeros(np.broadcast_shapes(t.shape, x.shape[:-1]))
        for term in self.terms:
            h = term.weight(t)
            total = total + (h if term.gauge is None else h * gauge_value(term.gauge, t, x))
        return total

    def evaluate(self, t, x):
        """Return ``(value, dto, dt, grad, hess)`` at a single point.

        ``dto`` is ``sum h_i' g_i`` (time derivative through the weights
        only); ``dt`` is the full partial derivative.
        """
        t = float(t)
        if t < self.domain_start:
            raise DomainError(f"time {t} precedes domain start {self.domain_start}")
        x = as_state(x, self.dim)
        value = dto = dt = 0.0
        grad = np.zeros(self.dim)
        hess = np.zeros((self.dim, self.dim))
        for term in self.terms:
            h = float(term.weight(t))
            dh = float(term.weight.derivative(t))
            if term.gauge is None:
                value += h
                dto += dh
                dt += dh
                continue
            gv = gauge_g_eval(term.gauge, t, x)
            value += h * gv.value
            dto += dh * gv.value
            dt += dh * gv.value + h * gv.dt
            grad += h * gv.grad
            hess += h * gv.hess
        return value, dto, dt, grad, hess


@dataclass
class GaugeSumSpec:
    """Declarative description of a gauge sum.

    ``weights[i]`` multiplies ``Upsilon(., anchors[i])`` (both its time and
    state parts). ``quartic`` is an optional :class:`PolyWeight` on ``|x|^4``;
    ``shifted`` an optional ``(delta, x_hat)`` pair for
    ``delta |x - x_hat^A_{t, s}|^2``.
    """

    weights: Sequence[float]
    anchors: Sequence[tuple]
    quartic: Optional[PolyWeight] = None
    shifted: Optional[tuple] = None

    def __post_init__(self):
        if len(self.weights) != len(self.anchors):
            raise ShapeError("weights and anchors must have equal length")
        if any(w < 0 for w in self.weights):
            raise DomainError("gauge weights must be nonnegative")


def build_gauge_sum(spec, op, domain_start, truncation=DEFAULT_TRUNCATION):
    """Materialise a :class:`GaugeSumSpec`, keeping at most ``truncation`` anchors."""
    terms = []
    if spec.quartic is not None:
        terms.append(GaugeTerm(spec.quartic, GaugeParams(domain_start, np.zeros(op.dim), op, 4)))
    if spec.shifted is not None:
        delta, x_hat = spec.shifted
        terms.append(GaugeTerm(PolyWeight.constant(delta), GaugeParams(domain_start, x_hat, op, 2)))
    kept = list(zip(spec.weights, spec.anchors))[:truncation]
    tail = float(sum(spec.weights[truncation:]))
    for w, (ti, xi) in kept:
        if ti > domain_start:
            raise DomainError(f"anchor time {ti} after domain start {domain_start}")
        terms.append(GaugeTerm(PolyWeight.constant(w), GaugeParams(ti, xi, op, 4)))
        terms.append(GaugeTerm(PolyWeight.centered_square(w, ti)))
    return GaugeSum(op.dim, float(domain_start), tuple(terms), tail)


def upsilon_gauge(op, anchors, weights, domain_start, truncation=DEFAULT_TRUNCATION):
    """``sum_i w_i Upsilon(., (t_i, x_i))`` restricted to ``s >= domain_start``."""
    return build_gauge_sum(GaugeSumSpec(list(weights), list(anchors)), op, domain_start,
                           truncation)


def canonical_gauge(op, t_hat, x_hat, quartic=None, delta=0.0, anchors=(), weights=(),
                    truncation=DEFAULT_TRUNCATION):
    """The test-function family used by the uniqueness argument.

    ``h(s)|x|^4 + delta |x - x_hat^A|^2 + sum_i w_i (|x - x_i^A|^4 + |s - t_i|^2)``.
    """
    spec = GaugeSumSpec(list(weights), list(anchors), quartic,
                        (delta, x_hat) if delta > 0 else None)
    return build_gauge_sum(spec, op, t_hat, truncation)


@dataclass(frozen=True)
class SmoothFunctional:
    """A ``C^{1,2}`` functional given by explicit callables.

    ``value`` must broadcast over ``(t[...], x[..., N])``; the derivative
    callables are evaluated at single points.
    """

    value: Callable
    dt: Callable
    grad: Callable
    hess: Callable

    @classmethod
    def constant(cls, c, dim):
        return cls(
            value=lambda t, x: np.full(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]), float(c)),
            dt=lambda t, x: 0.0,
            grad=lambda t, x: np.zeros(dim),
            hess=lambda t, x: np.zeros((dim, dim)),
        )

    def __add__(self, other):
        return SmoothFunctional(
            value=lambda t, x: self.value(t, x) + other.value(t, x),
            dt=lambda t, x: self.dt(t, x) + other.dt(t, x),
            grad=lambda t, x: self.grad(t, x) + other.grad(t, x),
            hess=lambda t, x: self.hess(t, x) + other.hess(t, x),
        )

    def scaled(self, c):
        return SmoothFunctional(
            value=lambda t, x: c * self.value(t, x),
            dt=lambda t, x: c * self.dt(t, x),
            grad=lambda t, x: c * self.grad(t, x),
            hess=lambda t, x: c * self.hess(t, x),
        )


@dataclass(frozen=True)
class TestPair:
    """A smooth part ``phi`` and a gauge part ``g`` valid on ``[domain_start, T]``."""

    __test__ = False  # not a pytest class

    phi: SmoothFunctional
    g: GaugeSum
    op: object
    domain_start: float = field(default=0.0)

    def value(self, t, x):
        return self.phi.value(t, x) + self.g.value(t, x)


class TestPairValue(NamedTuple):
    __test__ = False

    value: float
    dt_phi: float
    dto_g: float
    grad: np.ndarray
    hess: np.ndarray
    astar_pairing: float


def testpair_eval(tp, t, x):
    """All quantities entering the viscosity inequality at ``(t, x)``.

    ``astar_pairing`` is ``<A^* grad phi, x>``; the gauge part contributes
    only through ``dto_g`` and the space derivatives.
    """
    t = float(t)
    if t < tp.domain_start:
        raise DomainError(f"time {t} precedes test-pair domain start {tp.domain_start}")
    x = as_state(x, tp.op.dim)
    gval, dto, _dt, ggrad, ghess = tp.g.evaluate(t, x)
    pgrad = np.asarray(tp.phi.grad(t, x), dtype=float)
    value = float(tp.phi.value(t, x)) + gval
    return TestPairValue(
        value=value,
        dt_phi=float(tp.phi.dt(t, x)),
        dto_g=float(dto),
        grad=pgrad + ggrad,
        hess=np.asarray(tp.phi.hess(t, x), dtype=float) + ghess,
        astar_pairing=float(pgrad @ tp.op.apply(x)),
    )
