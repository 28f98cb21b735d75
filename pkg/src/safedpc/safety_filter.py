"""Event-triggered safety filter.

Outside the annulus the nominal (learned) input passes through untouched.
Inside it, a box-constrained QP moves the input the minimum distance needed
to satisfy the sampled-data barrier condition:

    minimize ||u - u_nom||^2   subject to   phi(x, u, t) >= margin,  u in U.

phi is affine in u, so this is a strictly convex QP with one affine inequality
plus box bounds; the solver below returns the exact global minimizer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .barrier import BarrierConstants, BarrierFunction, CorridorBarrier, phi_affine
from .model import Array, InputSet, SystemDynamics, UnsupportedModelError

log = logging.getLogger(__name__)


class QPInfeasibleError(RuntimeError):
    """No input in the box satisfies the barrier constraint.

    ``best_slack`` is the constraint residual at the box point that comes
    closest; ``u_best`` is that point.
    """

    def __init__(self, best_slack: float, u_best: Array):
        super().__init__(f"barrier QP infeasible, best achievable slack "
                         f"{best_slack:.3e}")
        self.best_slack = best_slack
        self.u_best = u_best


class BackupSingularityError(ValueError):
    """Backup law evaluated too close to the corridor center."""


@dataclass(frozen=True)
class FilterConfig:
    """Everything the switching law needs.

    ``fallback`` decides what happens if the QP is infeasible: "error" raises
    (certification runs), "use-backup" substitutes the supplied backup law
    (simulation runs, where a certified backup exists).
    """

    barrier: BarrierFunction
    constants: BarrierConstants
    input_set: InputSet
    sys: SystemDynamics
    qp_tolerance: float = 1e-9
    fallback: str = "error"
    rate_penalty: float = 0.0
    backup: Callable[[Array, float], Array] | None = None

    def __post_init__(self):
        if self.qp_tolerance <= 0:
            raise ValueError("qp_tolerance must be positive")
        if self.fallback not in ("error", "use-backup"):
            raise ValueError(f"unknown fallback policy {self.fallback!r}")


@dataclass(frozen=True)
class QPResult:
    u_star: Array
    active_constraints: frozenset[str]
    objective: float            # ||u* - u_nom||^2
    slack: float                # barrier residual phi(u*) - margin


def _project_halfspace_box(z: Array, c: Array, r: float, lo: Array, hi: Array,
                           tol: float) -> tuple[Array, set[str]]:
    """Exact projection of z onto {u : c.u >= r} intersected with [lo, hi].

    KKT structure: u(lam) = clip(z + lam c, lo, hi) with lam >= 0, and
    s(lam) = c.u(lam) is piecewise linear and nondecreasing, so the active-set
    walk over box-face breakpoints finds the unique lam with s(lam) = r.
    The n_u = 1 case degenerates to the textbook analytic solution.
    """
    z = np.clip(z, lo, hi)
    if float(c @ z) >= r:
        return z, set()

    # most the constraint can get from the box
    u_max = np.where(c > 0, hi, np.where(c < 0, lo, z))
    s_max = float(c @ u_max)
    if s_max < r - tol:
        raise QPInfeasibleError(best_slack=s_max - r, u_best=u_max)

    # breakpoints: lam at which each coordinate saturates a face
    lam_sat = np.full_like(z, np.inf)
    nz = c != 0
    lam_sat[nz & (c > 0)] = (hi[nz & (c > 0)] - z[nz & (c > 0)]) / c[nz & (c > 0)]
    lam_sat[nz & (c < 0)] = (lo[nz & (c < 0)] - z[nz & (c < 0)]) / c[nz & (c < 0)]
    order = np.argsort(lam_sat)

    lam_lo = 0.0
    s_lo = float(c @ z)
    slope = float(np.sum(c[nz] ** 2))
    saturated: set[int] = set()
    for idx in order:
        lam_hi = lam_sat[idx]
        if not np.isfinite(lam_hi):
            break
        s_hi = s_lo + slope * (lam_hi - lam_lo)
        if s_hi >= r:
            break
        saturated.add(int(idx))
        slope -= float(c[idx] ** 2)
        lam_lo, s_lo = lam_hi, s_hi
    if slope <= 0:
        lam = lam_lo            # constraint met exactly at the last breakpoint
    else:
        lam = lam_lo + (r - s_lo) / slope
    u = np.clip(z + lam * c, lo, hi)
    active = {"barrier"}
    for i in range(z.shape[0]):
        if u[i] >= hi[i] - tol:
            active.add(f"u{i}_upper")
        elif u[i] <= lo[i] + tol:
            active.add(f"u{i}_lower")
    return u, active


def solve_barrier_qp(cfg: FilterConfig, u_nom: Array, x: Array, t: float,
                     u_prev: Array | None = None) -> QPResult:
    """Exact minimizer of ||u - u_nom||^2 (+ rate_penalty ||u - u_prev||^2)
    subject to the barrier condition and the input box.

    Raises :class:`QPInfeasibleError` when no box input satisfies the
    constraint, carrying the best achievable slack.
    """
    u_nom = np.atleast_1d(np.asarray(u_nom, dtype=float))
    c, d0 = phi_affine(cfg.barrier, cfg.sys, np.asarray(x, dtype=float), t)
    c = np.atleast_1d(c)
    r = cfg.constants.margin_ii - float(d0)

    rho = cfg.rate_penalty
    if rho > 0 and u_prev is not None:
        z = (u_nom + rho * np.asarray(u_prev, dtype=float)) / (1.0 + rho)
    else:
        z = u_nom
    u_star, active = _project_halfspace_box(
        z, c, r, cfg.input_set.lower, cfg.input_set.upper, cfg.qp_tolerance)
    return QPResult(
        u_star=u_star,
        active_constraints=frozenset(active),
        objective=float(np.sum((u_star - u_nom) ** 2)),
        slack=float(c @ u_star) - r)


def safety_filter(cfg: FilterConfig, policy_output: Array, x_k: Array,
                  t_k: float, u_prev: Array | None = None
                  ) -> tuple[Array, bool]:
    """Two-case switching law: pass the nominal input through when the sampled
    state is outside the annulus, otherwise return the QP-corrected input.

    States already past the annulus (h < -b) also trigger, with best-effort
    semantics and a warning; behavior there carries no guarantee.
    """
    policy_output = np.atleast_1d(np.asarray(policy_output, dtype=float))
    hv = float(cfg.barrier.h(np.asarray(x_k, dtype=float), t_k))
    if hv > cfg.barrier.a:
        return policy_output, False
    if hv < -cfg.barrier.b:
        log.warning("state outside the safe set at t=%.4f (h=%.3e); "
                    "QP runs best-effort", t_k, hv)
    try:
        res = solve_barrier_qp(cfg, policy_output, x_k, t_k, u_prev=u_prev)
        return res.u_star, True
    except QPInfeasibleError:
        if cfg.fallback == "use-backup" and cfg.backup is not None:
            return np.atleast_1d(np.asarray(cfg.backup(x_k, t_k), float)), True
        raise


def analytic_backup(corridor: CorridorBarrier, sys: SystemDynamics,
                    consts: BarrierConstants, x: Array, t) -> Array:
    """Explicit corridor backup input

        u = x_r'(t) - A x - (x - x_r) / (2 ||x - x_r||^2) * (margin - alpha h)

    which meets the annulus condition with equality.  Only defined away from
    the corridor center: requires ||x - x_r||^2 >= epsilon - a.  Broadcasts
    over a leading batch dimension.
    """
    if sys.A is None or sys.g_const is None:
        raise UnsupportedModelError("backup law needs a declared linear system")
    if not np.allclose(sys.g_const, np.eye(sys.n_x)):
        raise UnsupportedModelError("backup law assumes identity input matrix")
    x = np.asarray(x, dtype=float)
    ref = corridor.reference
    e = x - ref.x_r(t)
    sq = np.sum(e * e, axis=-1)
    hv = corridor.epsilon - sq
    r_in_sq = corridor.epsilon - consts.a
    if np.any(sq < r_in_sq - 1e-12):
        raise BackupSingularityError(
            "backup law requested inside the annulus inner edge "
            f"(||x - x_r||^2 = {np.min(sq):.3e} < {r_in_sq:.3e})")
    scale = (consts.margin_ii - consts.alpha * hv) / (2.0 * sq)
    return ref.x_r_dot(t) - x @ sys.A.T - e * scale[..., None]


def backup_norm_bound(corridor: CorridorBarrier, sys: SystemDynamics,
                      consts: BarrierConstants) -> float:
    """Closed-form max-norm bound of the backup law over the annulus:
    v_bar_r + ||A||_inf (sqrt(eps+b) + x_bar_r)
    + sqrt(n_x) / (2 sqrt(eps-a)) * (margin + alpha max(a, b))."""
    ref = corridor.reference
    r_out = math.sqrt(corridor.epsilon + consts.b)
    r_in = math.sqrt(corridor.epsilon - consts.a)
    A_inf = float(np.linalg.norm(sys.A, np.inf))
    return (ref.v_bar_r + A_inf * (r_out + ref.x_bar_r)
            + math.sqrt(sys.n_x) / (2.0 * r_in)
            * (consts.margin_ii + consts.alpha * max(consts.a, consts.b)))
