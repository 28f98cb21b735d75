"""Continuous-time perturbed dynamics, bounded disturbances, references, and the
discrete-time training model.

All evaluators are pure functions and broadcast over a leading batch dimension:
states are passed as ``(n_x,)`` or ``(B, n_x)`` arrays, times as scalars or
``(B,)`` arrays.  Every type here is immutable after construction and safe to
share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray


class OutOfDomainError(ValueError):
    """State lies outside the declared working region of the dynamics."""


class UnsupportedModelError(TypeError):
    """Operation needs structure (linear drift, constant input matrix) the
    system does not declare."""


@dataclass(frozen=True)
class SystemDynamics:
    """Control-affine perturbed system  x' = f(x) + g(x) u + w(t).

    ``f`` maps states to drift vectors, ``g`` maps states to (n_x, n_u) input
    matrices; both must return finite values on the working box.  ``A`` and
    ``g_const`` are set by :func:`linear_system` when the drift is x -> A x and
    g is state-independent; operations that need that structure check them.
    """

    n_x: int
    n_u: int
    f: Callable[[Array], Array]
    g: Callable[[Array], Array]
    domain_lo: Array
    domain_hi: Array
    A: Array | None = None
    g_const: Array | None = None

    def drift(self, x: Array) -> Array:
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    def input_matrix(self, x: Array) -> Array:
        return np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)


def linear_system(
    A: Array | float,
    g: Array | float | None = None,
    domain_lo: Array | float | None = None,
    domain_hi: Array | float | None = None,
) -> SystemDynamics:
    """Build x' = A x + g u + w with constant g (identity by default)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n_x = A.shape[0]
    if A.shape != (n_x, n_x):
        raise ValueError(f"A must be square, got {A.shape}")
    if g is None:
        g_mat = np.eye(n_x)
    else:
        g_mat = np.atleast_2d(np.asarray(g, dtype=float))
        if g_mat.shape[0] != n_x:
            raise ValueError(f"g has {g_mat.shape[0]} rows, expected {n_x}")
    n_u = g_mat.shape[1]
    lo = np.full(n_x, -np.inf) if domain_lo is None else np.broadcast_to(
        np.asarray(domain_lo, dtype=float), (n_x,)).copy()
    hi = np.full(n_x, np.inf) if domain_hi is None else np.broadcast_to(
        np.asarray(domain_hi, dtype=float), (n_x,)).copy()

    def f(x: Array) -> Array:
        return np.asarray(x, dtype=float) @ A.T

    def g_eval(x: Array) -> Array:
        return g_mat

    return SystemDynamics(n_x=n_x, n_u=n_u, f=f, g=g_eval,
                          domain_lo=lo, domain_hi=hi, A=A, g_const=g_mat)


@dataclass(frozen=True)
class InputSet:
    """Axis-aligned compact input box U with its max-norm radius."""

    lower: Array
    upper: Array

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape:
            raise ValueError("lower/upper shape mismatch")
        if not np.all(lo < hi):
            raise ValueError("input box must satisfy lower < upper componentwise")

    @property
    def n_u(self) -> int:
        return self.lower.shape[0]

    @property
    def u_bar(self) -> float:
        """Max-norm bound over the box."""
        return float(np.max(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def contains(self, u: Array, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def clip(self, u: Array) -> Array:
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)

    def corners(self) -> Array:
        """All 2^n_u box corners, shape (2^n_u, n_u)."""
        n = self.n_u
        out = np.empty((2 ** n, n))
        for i in range(2 ** n):
            for j in range(n):
                out[i, j] = self.upper[j] if (i >> j) & 1 else self.lower[j]
        return out


DISTURBANCE_KINDS = ("zero", "sinusoid", "piecewise-constant-random")

# value tables for the random kind, keyed by (n_x, amplitude, hold, seed);
# regenerated from the seed when more intervals are needed, so the prefix is stable
_PIECEWISE_TABLES: dict[tuple, Array] = {}


@dataclass(frozen=True)
class DisturbanceSpec:
    """Bounded piecewise-continuous disturbance signal.

    kinds:
      - "zero"
      - "sinusoid": amplitude * sin(frequency * t + phase) on every axis
      - "piecewise-constant-random": per-axis uniform in [-amplitude, amplitude],
        held for ``hold`` seconds, reproducible from ``seed``
    """

    kind: str
    n_x: int = 1
    amplitude: float = 0.0
    frequency: float = 1.0
    phase: float = 0.0
    hold: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "piecewise-constant-random" and self.hold <= 0:
            raise ValueError("hold interval must be positive")

    @property
    def w_bar(self) -> float:
        """Worst-case 2-norm of the signal."""
        if self.kind == "zero":
            return 0.0
        return float(abs(self.amplitude) * np.sqrt(self.n_x))


def _piecewise_table(spec: DisturbanceSpec, n_needed: int) -> Array:
    key = (spec.n_x, float(spec.amplitude), float(spec.hold), int(spec.seed))
    tab = _PIECEWISE_TABLES.get(key)
    if tab is None or tab.shape[0] < n_needed:
        n_alloc = max(int(n_needed * 1.5) + 16, 4096)
        rng = np.random.default_rng(spec.seed)
        tab = rng.uniform(-spec.amplitude, spec.amplitude, size=(n_alloc, spec.n_x))
        _PIECEWISE_TABLES[key] = tab
    return tab


def sample_disturbance(spec: DisturbanceSpec, t: float) -> Array:
    """Disturbance value at time t, shape (n_x,); 2-norm never exceeds w_bar."""
    if spec.kind == "zero":
        return np.zeros(spec.n_x)
    if spec.kind == "sinusoid":
        return np.full(spec.n_x,
                       spec.amplitude * np.sin(spec.frequency * t + spec.phase))
    idx = int(np.floor(t / spec.hold))
    if idx < 0:
        raise ValueError("disturbance sampled at negative time")
    return _piecewise_table(spec, idx + 1)[idx].copy()


def sample_disturbance_many(spec: DisturbanceSpec, ts: Array) -> Array:
    """Vectorized sampling, shape (len(ts), n_x)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if spec.kind == "zero":
        return np.zeros((ts.shape[0], spec.n_x))
    if spec.kind == "sinusoid":
        vals = spec.amplitude * np.sin(spec.frequency * ts + spec.phase)
        return np.repeat(vals[:, None], spec.n_x, axis=1)
    idx = np.floor(ts / spec.hold).astype(int)
    tab = _piecewise_table(spec, int(idx.max()) + 1)
    return tab[idx]


def eval_vector_field(sys: SystemDynamics, x: Array, u: Array, w: Array) -> Array:
    """x' = f(x) + g(x) u + w, with a working-region check on x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < sys.domain_lo) or np.any(x > sys.domain_hi):
        raise OutOfDomainError(f"state {x} outside working region")
    gx = sys.input_matrix(x)
    return sys.drift(x) + gx @ np.asarray(u, dtype=float) + np.asarray(w, dtype=float)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Smooth time-varying reference with declared norm bounds.

    ``x_r``/``x_r_dot`` map a scalar or (B,) time array to (n_x,) / (B, n_x).
    """

    x_r: Callable[[Array], Array]
    x_r_dot: Callable[[Array], Array]
    x_bar_r: float
    v_bar_r: float
    n_x: int = 1
    period: float | None = None


def sinusoid_reference(amplitude: float, frequency: float, n_x: int = 1) -> ReferenceTrajectory:
    """x_r(t) = amplitude * sin(frequency * t) on every axis."""
    amp = float(amplitude)
    freq = float(frequency)

    def x_r(t):
        t = np.asarray(t, dtype=float)
        return np.repeat((amp * np.sin(freq * t))[..., None], n_x, axis=-1)

    def x_r_dot(t):
        t = np.asarray(t, dtype=float)
        return np.repeat((amp * freq * np.cos(freq * t))[..., None], n_x, axis=-1)

    return ReferenceTrajectory(
        x_r=x_r, x_r_dot=x_r_dot,
        x_bar_r=abs(amp) * np.sqrt(n_x), v_bar_r=abs(amp * freq) * np.sqrt(n_x),
        n_x=n_x, period=2.0 * np.pi / freq if freq != 0 else None)


def constant_reference(value: float = 0.0, n_x: int = 1) -> ReferenceTrajectory:
    val = float(value)

    def x_r(t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(val, t.shape + (n_x,)).copy()

    def x_r_dot(t):
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape + (n_x,))

    return ReferenceTrajectory(x_r=x_r, x_r_dot=x_r_dot,
                               x_bar_r=abs(val) * np.sqrt(n_x), v_bar_r=0.0,
                               n_x=n_x, period=1.0)


def eval_reference(ref: ReferenceTrajectory, t: float) -> tuple[Array, Array]:
    """(x_r(t), x_r_dot(t)) as (n_x,) arrays."""
    return (np.asarray(ref.x_r(t), dtype=float).reshape(ref.n_x),
            np.asarray(ref.x_r_dot(t), dtype=float).reshape(ref.n_x))


@dataclass(frozen=True)
class DiscreteModel:
    """Forward-Euler training model x_{k+1} = A_d x_k + B_d u_k."""

    A_d: Array
    B_d: Array
    dt: float

    @property
    def n_x(self) -> int:
        return self.A_d.shape[0]

    @property
    def n_u(self) -> int:
        return self.B_d.shape[1]

    def step(self, x: Array, u: Array) -> Array:
        return np.asarray(x) @ self.A_d.T + np.asarray(u) @ self.B_d.T


def discretize(sys: SystemDynamics, dt: float) -> DiscreteModel:
    """Forward-Euler discretization A_d = I + dt A, B_d = dt g.

    Only systems built with a declared linear drift and constant g support this.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if sys.A is None or sys.g_const is None:
        raise UnsupportedModelError(
            "discretize requires a linear system (declared A and constant g)")
    return DiscreteModel(A_d=np.eye(sys.n_x) + dt * sys.A,
                         B_d=dt * sys.g_const, dt=float(dt))
