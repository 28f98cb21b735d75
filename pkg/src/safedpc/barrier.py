"""Time-varying barrier functions, annulus sets, Lipschitz-constant estimation,
and the sampled-data certification machinery.

The operative object is a barrier h(x, t) whose zero superlevel set is the
safe set C(t).  Certification asks: on the annulus A(t) = {h in [-b, a]},
does some admissible constant input push

    phi(x, u, t) = grad_x(h) . (f + g u) + dh/dt + alpha(h)

above the robustness margin  nu_bar * dt + h_bar_x * w_bar?  The margin is
composed from Lipschitz constants and bounds of the barrier/dynamics pair,
estimated here on a grid (with a safety factor) and, for corridor barriers
around a reference, tightened by closed-form values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .model import Array, InputSet, ReferenceTrajectory, SystemDynamics

_COND_TOL = 1e-12   # numerical tolerance for "slack >= 0" in condition checks


class EstimationError(RuntimeError):
    """Grid does not intersect the region the constants must cover."""


@dataclass(frozen=True)
class CorridorBarrier:
    """Corridor of squared radius epsilon around a reference trajectory.

    h(x, t) = epsilon - ||x - x_r(t)||^2.  The structure (epsilon, reference)
    enables closed-form constants and the explicit backup law.
    """

    epsilon: float
    reference: ReferenceTrajectory

    def barrier(self, alpha: float, a: float, b: float) -> "BarrierFunction":
        eps = float(self.epsilon)
        ref = self.reference

        def h(x, t):
            x = np.asarray(x, dtype=float)
            e = x - ref.x_r(t)
            return eps - np.sum(e * e, axis=-1)

        def grad_x_h(x, t):
            x = np.asarray(x, dtype=float)
            return -2.0 * (x - ref.x_r(t))

        def dh_dt(x, t):
            x = np.asarray(x, dtype=float)
            e = x - ref.x_r(t)
            return 2.0 * np.sum(e * ref.x_r_dot(t), axis=-1)

        return BarrierFunction(h=h, grad_x_h=grad_x_h, dh_dt=dh_dt,
                               alpha=float(alpha), a=float(a), b=float(b),
                               n_x=ref.n_x, corridor=self)


@dataclass(frozen=True)
class BarrierFunction:
    """Continuously differentiable barrier h with its derivatives and the
    linear class-K multiplier alpha(h) = alpha * h.

    ``a`` and ``b`` are the upper/lower annulus widths.  Evaluators broadcast
    over a leading batch dimension.
    """

    h: Callable[[Array, Array], Array]
    grad_x_h: Callable[[Array, Array], Array]
    dh_dt: Callable[[Array, Array], Array]
    alpha: float
    a: float
    b: float
    n_x: int = 1
    alpha_kind: str = "linear"
    corridor: CorridorBarrier | None = None

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("annulus widths a, b must be positive")
        if self.alpha_kind != "linear":
            raise NotImplementedError("only the linear class-K multiplier ships")

    def alpha_of(self, hval):
        return self.alpha * hval


def eval_h(bf: BarrierFunction, x: Array, t: float) -> float:
    """Barrier value; x is in the safe set C(t) iff the result is >= 0."""
    return float(bf.h(np.asarray(x, dtype=float), t))


def in_annulus(bf: BarrierFunction, x: Array, t: float) -> bool:
    """True iff h(x, t) lies in the closed band [-b, a]."""
    hv = eval_h(bf, x, t)
    return -bf.b <= hv <= bf.a


def phi_affine(bf: BarrierFunction, sys: SystemDynamics,
               x: Array, t) -> tuple[Array, Array]:
    """Decompose phi(x, u, t) = c . u + d0; c has shape (..., n_u).

    Basis of the QP form: phi is affine in u.
    """
    x = np.asarray(x, dtype=float)
    grad = bf.grad_x_h(x, t)
    gx = sys.input_matrix(x)
    if gx.ndim == 2:
        c = grad @ gx
    else:
        c = np.einsum("...i,...ij->...j", grad, gx)
    d0 = np.sum(grad * sys.drift(x), axis=-1) + bf.dh_dt(x, t) \
        + bf.alpha_of(bf.h(x, t))
    return c, d0


def eval_phi(bf: BarrierFunction, sys: SystemDynamics,
             x: Array, u: Array, t: float) -> float:
    """phi = grad_x(h).(f + g u) + dh/dt + alpha(h)."""
    c, d0 = phi_affine(bf, sys, x, t)
    return float(np.sum(c * np.asarray(u, dtype=float), axis=-1) + d0)


@dataclass(frozen=True)
class BarrierConstants:
    """Lipschitz constants and bounds feeding the sampled-data margins.

    Suffix _x / _t marks the variable the Lipschitz constant is taken in;
    hf, hg, ht, ah name the maps grad(h).f, grad(h).g, dh/dt and alpha(h).
    Aggregates are composed exactly:

      nu_bar   = (L_ah_x + L_hf_x + L_ht_x + L_hg_x u_bar) eta
                 + L_ah_t + L_hf_t + L_ht_t + L_hg_t u_bar
      nu       = (L_ah_x + L_hf_x + L_hg_x u_bar)(chi + w_bar)
                 + L_ah_t + L_hf_t + L_hg_t u_bar
      margin_ii = nu_bar dt + h_bar_x w_bar
      margin_i  = nu dt + h_bar_t + h_bar_x w_bar
      h_bar_reach = L_h_x eta dt        (eta = chi + w_bar)
    """

    L_h_x: float
    L_hf_x: float
    L_hg_x: float
    L_ht_x: float
    L_hf_t: float
    L_hg_t: float
    L_ht_t: float
    h_bar_x: float
    h_bar_t: float
    chi: float
    alpha: float
    u_bar: float
    w_bar: float
    dt: float
    a: float = 0.0
    b: float = 0.0
    L_ah_x: float = field(init=False)
    L_ah_t: float = field(init=False)
    eta: float = field(init=False)
    nu_bar: float = field(init=False)
    nu: float = field(init=False)
    margin_ii: float = field(init=False)
    margin_i: float = field(init=False)
    h_bar_reach: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "L_ah_x", self.alpha * self.L_h_x)
        object.__setattr__(self, "L_ah_t", self.alpha * self.h_bar_t)
        object.__setattr__(self, "eta", self.chi + self.w_bar)
        nu_bar = ((self.L_ah_x + self.L_hf_x + self.L_ht_x
                   + self.L_hg_x * self.u_bar) * self.eta
                  + self.L_ah_t + self.L_hf_t + self.L_ht_t
                  + self.L_hg_t * self.u_bar)
        nu = ((self.L_ah_x + self.L_hf_x + self.L_hg_x * self.u_bar)
              * (self.chi + self.w_bar)
              + self.L_ah_t + self.L_hf_t + self.L_hg_t * self.u_bar)
        object.__setattr__(self, "nu_bar", nu_bar)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "margin_ii",
                           nu_bar * self.dt + self.h_bar_x * self.w_bar)
        object.__setattr__(self, "margin_i",
                           nu * self.dt + self.h_bar_t + self.h_bar_x * self.w_bar)
        object.__setattr__(self, "h_bar_reach", self.L_h_x * self.eta * self.dt)

    def with_alpha(self, alpha: float) -> "BarrierConstants":
        """Recompose every aggregate for a different linear multiplier."""
        return replace(self, alpha=float(alpha))

    def with_dt(self, dt: float) -> "BarrierConstants":
        return replace(self, dt=float(dt))


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the estimation/certification grid.

    State bounds default to the corridor's bounding box (reference range
    inflated by the outer annulus radius); generic barriers must supply them.
    """

    n_state: int = 201
    n_time: int = 401
    state_lo: Array | None = None
    state_hi: Array | None = None
    t_span: float | None = None
    safety: float = 1.2


def _grid_axes(bf: BarrierFunction, grid: GridSpec) -> tuple[list[Array], Array]:
    t_span = grid.t_span
    if t_span is None:
        if bf.corridor is not None and bf.corridor.reference.period:
            t_span = bf.corridor.reference.period
        else:
            raise EstimationError("grid needs t_span for a barrier without a period")
    ts = np.linspace(0.0, t_span, grid.n_time)
    if grid.state_lo is not None and grid.state_hi is not None:
        lo = np.broadcast_to(np.asarray(grid.state_lo, float), (bf.n_x,))
        hi = np.broadcast_to(np.asarray(grid.state_hi, float), (bf.n_x,))
    elif bf.corridor is not None:
        ref_samples = bf.corridor.reference.x_r(ts)
        r_out = math.sqrt(bf.corridor.epsilon + bf.b)
        lo = ref_samples.min(axis=0) - r_out
        hi = ref_samples.max(axis=0) + r_out
    else:
        raise EstimationError("grid needs state bounds for a non-corridor barrier")
    axes = [np.linspace(lo[i], hi[i], grid.n_state) for i in range(bf.n_x)]
    return axes, ts


def _grid_points(axes: list[Array]) -> Array:
    """Cartesian product of the state axes, shape (P, n_x)."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _region_mask(hv: Array, bf: BarrierFunction, region: str) -> Array:
    if region == "annulus":
        return (hv >= -bf.b) & (hv <= bf.a)
    if region == "domain":   # D = (safe set) union (annulus)
        return hv >= -bf.b
    raise ValueError(f"unknown region {region!r}")


def _masked_axis_quotients(q: Array, mask: Array, shape: tuple,
                           spacings: list[float], dt_axis: float,
                           vector_field: bool = False):
    """Max finite-difference quotient of q between adjacent in-region grid
    points, along every state axis and along time.

    q has shape (T, P) or (T, P, n_u); reshaped internally to (T, *shape[, n_u]).
    Returns (max_x_quotient, max_t_quotient).
    """
    full = (q.shape[0],) + shape + ((q.shape[-1],) if vector_field else ())
    qg = q.reshape(full)
    mg = mask.reshape((q.shape[0],) + shape)

    def seg_max(diff, pair_ok, step):
        if not pair_ok.any():
            return 0.0
        if vector_field:
            mag = np.linalg.norm(diff, axis=-1)
        else:
            mag = np.abs(diff)
        return float(mag[pair_ok].max() / step)

    best_x = 0.0
    for ax in range(len(shape)):
        axis = 1 + ax
        d = np.diff(qg, axis=axis)
        ok = np.logical_and(np.take(mg, range(0, shape[ax] - 1), axis=axis),
                            np.take(mg, range(1, shape[ax]), axis=axis))
        best_x = max(best_x, seg_max(d, ok, spacings[ax]))
    d_t = np.diff(qg, axis=0)
    ok_t = mg[:-1] & mg[1:]
    best_t = seg_max(d_t, ok_t, dt_axis)
    return best_x, best_t


def _closed_form_constants(bf: BarrierFunction, sys: SystemDynamics,
                           U: InputSet) -> dict[str, float]:
    """Exact bounds for a corridor barrier around a reference under linear
    dynamics with constant g, valid on the whole disk ||x - x_r|| <= sqrt(eps+b)
    (hence on both the annulus closure and D):

      L_h_x = h_bar_x = 2 sqrt(eps+b)          h_bar_t = 2 sqrt(eps+b) v_bar_r
      L_hf_x = 2 ||A|| (x_bar_r + 2 sqrt(eps+b))
      L_hf_t = 2 ||A|| v_bar_r (x_bar_r + sqrt(eps+b))
      L_hg_x = 2 ||g||          L_hg_t = 2 v_bar_r ||g||     L_ht_x = 2 v_bar_r
      chi = ||A|| (x_bar_r + sqrt(eps+b)) + max_corners ||g u||
    """
    cor = bf.corridor
    ref = cor.reference
    r_out = math.sqrt(cor.epsilon + bf.b)
    A_norm = float(np.linalg.norm(sys.A, 2))
    g_norm = float(np.linalg.norm(sys.g_const, 2))
    u_norm_max = float(max(np.linalg.norm(sys.g_const @ c) for c in U.corners()))
    x_norm_max = ref.x_bar_r + r_out
    return {
        "L_h_x": 2.0 * r_out,
        "h_bar_x": 2.0 * r_out,
        "h_bar_t": 2.0 * r_out * ref.v_bar_r,
        "L_hf_x": 2.0 * A_norm * (ref.x_bar_r + 2.0 * r_out),
        "L_hf_t": 2.0 * A_norm * ref.v_bar_r * x_norm_max,
        "L_hg_x": 2.0 * g_norm,
        "L_hg_t": 2.0 * ref.v_bar_r * g_norm,
        "L_ht_x": 2.0 * ref.v_bar_r,
        "chi": A_norm * x_norm_max + u_norm_max,
    }


def estimate_constants(bf: BarrierFunction, sys: SystemDynamics, U: InputSet,
                       w_bar: float, dt: float, grid: GridSpec = GridSpec(),
                       region: str = "annulus",
                       prefer_closed_form: bool = True) -> BarrierConstants:
    """Estimate every Lipschitz constant and bound over the requested region.

    Grid estimates are max finite-difference quotients over adjacent in-region
    pairs, times ``grid.safety``; bounds (chi, h_bar_x, h_bar_t) are in-region
    maxima times the same factor.  For corridor barriers under declared linear
    dynamics the closed-form values replace the grid estimate field by field
    (they are certified suprema; the grid remains for fields with no closed
    form, e.g. the time-Lipschitz constant of dh/dt).
    """
    axes, ts = _grid_axes(bf, grid)
    pts = _grid_points(axes)                       # (P, n_x)
    P = pts.shape[0]
    T = ts.shape[0]
    shape = tuple(len(ax) for ax in axes)
    spacings = [float(ax[1] - ax[0]) if len(ax) > 1 else 1.0 for ax in axes]
    dt_axis = float(ts[1] - ts[0]) if T > 1 else 1.0

    x_b = np.broadcast_to(pts, (T, P, bf.n_x)).reshape(-1, bf.n_x)
    t_b = np.repeat(ts, P)
    hv = bf.h(x_b, t_b).reshape(T, P)
    mask = _region_mask(hv, bf, region)
    if not mask.any():
        raise EstimationError(f"grid does not intersect the {region} region")

    grad = bf.grad_x_h(x_b, t_b).reshape(T, P, bf.n_x)
    dhdt = bf.dh_dt(x_b, t_b).reshape(T, P)
    fv = sys.drift(x_b).reshape(T, P, bf.n_x)
    gx = sys.input_matrix(x_b)
    if gx.ndim == 2:
        q_hg = (grad.reshape(-1, bf.n_x) @ gx).reshape(T, P, gx.shape[1])
    else:
        q_hg = np.einsum("bi,bij->bj", grad.reshape(-1, bf.n_x),
                         gx.reshape(-1, bf.n_x, gx.shape[-1])).reshape(T, P, -1)
    q_hf = np.sum(grad * fv, axis=-1)

    sf = grid.safety
    L_h_x, _ = _masked_axis_quotients(hv, mask, shape, spacings, dt_axis)
    L_hf_x, L_hf_t = _masked_axis_quotients(q_hf, mask, shape, spacings, dt_axis)
    L_hg_x, L_hg_t = _masked_axis_quotients(q_hg, mask, shape, spacings, dt_axis,
                                            vector_field=True)
    L_ht_x, L_ht_t = _masked_axis_quotients(dhdt, mask, shape, spacings, dt_axis)

    h_bar_x = float(np.linalg.norm(grad, axis=-1)[mask].max())
    h_bar_t = float(np.abs(dhdt)[mask].max())
    f_masked = fv[mask]
    if gx.ndim == 2:
        chi = max(float(np.linalg.norm(f_masked + c @ gx.T, axis=-1).max())
                  for c in U.corners())
    else:
        g_masked = gx.reshape(T, P, bf.n_x, -1)[mask]
        chi = max(float(np.linalg.norm(
            f_masked + np.einsum("bij,j->bi", g_masked, c), axis=-1).max())
            for c in U.corners())

    est = {
        "L_h_x": sf * L_h_x, "L_hf_x": sf * L_hf_x, "L_hg_x": sf * L_hg_x,
        "L_ht_x": sf * L_ht_x, "L_hf_t": sf * L_hf_t, "L_hg_t": sf * L_hg_t,
        "L_ht_t": sf * L_ht_t, "h_bar_x": sf * h_bar_x, "h_bar_t": sf * h_bar_t,
        "chi": sf * chi,
    }
    if prefer_closed_form and bf.corridor is not None \
            and sys.A is not None and sys.g_const is not None:
        est.update(_closed_form_constants(bf, sys, U))

    return BarrierConstants(alpha=bf.alpha, u_bar=U.u_bar,
                            w_bar=float(w_bar), dt=float(dt),
                            a=bf.a, b=bf.b, **est)


def compute_min_annulus_width(consts: BarrierConstants) -> float:
    """Largest barrier excursion past the boundary within one sample period;
    the sampled-data condition requires a to exceed it."""
    return consts.L_h_x * consts.eta * consts.dt


def check_condition_ii(bf: BarrierFunction, sys: SystemDynamics,
                       consts: BarrierConstants, x: Array, u: Array,
                       t: float) -> tuple[bool, float]:
    """Operative sampled-data condition: phi >= nu_bar dt + h_bar_x w_bar."""
    slack = eval_phi(bf, sys, x, u, t) - consts.margin_ii
    return slack >= -_COND_TOL, slack


def check_condition_i(bf: BarrierFunction, sys: SystemDynamics,
                      consts: BarrierConstants, x: Array, u: Array,
                      t: float) -> tuple[bool, float]:
    """Whole-domain comparison condition:
    grad(h).(f + g u) + alpha(h) >= nu dt + h_bar_t + h_bar_x w_bar."""
    x = np.asarray(x, dtype=float)
    grad = bf.grad_x_h(x, t)
    lhs = float(np.sum(grad * (sys.drift(x)
                               + sys.input_matrix(x) @ np.asarray(u, float)),
                       axis=-1) + bf.alpha_of(bf.h(x, t)))
    slack = lhs - consts.margin_i
    return slack >= -_COND_TOL, slack


@dataclass
class CertReport:
    """Outcome of a grid certification sweep."""

    definition: str                    # "II" (annulus) or "I" (whole domain)
    passed: bool
    a: float
    h_bar_reach: float
    annulus_width_ok: bool
    n_grid: int
    n_feasible: int
    worst_slack: float
    max_backup_norm: float
    u_bar: float
    input_norm_ok: bool
    theorem_case: str = "i"            # D = (safe set) union (annulus) inside X
    alpha: float = 0.0
    margin: float = 0.0
    required_alpha: float | None = None
    norm_needed_at_required_alpha: float | None = None
    notes: str = ""

    @property
    def feasible_fraction(self) -> float:
        return self.n_feasible / self.n_grid if self.n_grid else 0.0

    def to_dict(self) -> dict:
        d = {
            "definition": self.definition,
            "passed": self.passed,
            "a": self.a,
            "h_bar_reach": self.h_bar_reach,
            "annulus_width_ok": self.annulus_width_ok,
            "n_grid": self.n_grid,
            "n_feasible": self.n_feasible,
            "feasible_fraction": self.feasible_fraction,
            "worst_slack": self.worst_slack,
            "max_backup_norm": self.max_backup_norm,
            "u_bar": self.u_bar,
            "input_norm_ok": self.input_norm_ok,
            "theorem_case": self.theorem_case,
            "alpha": self.alpha,
            "margin": self.margin,
            "notes": self.notes,
        }
        if self.required_alpha is not None:
            d["required_alpha"] = self.required_alpha
        if self.norm_needed_at_required_alpha is not None:
            d["norm_needed_at_required_alpha"] = self.norm_needed_at_required_alpha
        return d

    def to_text(self) -> str:
        lines = [f"{k}: {v}" for k, v in self.to_dict().items()]
        return "\n".join(lines) + "\n"


def _annulus_grid(bf: BarrierFunction, grid: GridSpec, region: str):
    axes, ts = _grid_axes(bf, grid)
    pts = _grid_points(axes)
    P, T = pts.shape[0], ts.shape[0]
    x_b = np.broadcast_to(pts, (T, P, bf.n_x)).reshape(-1, bf.n_x)
    t_b = np.repeat(ts, P)
    hv = bf.h(x_b, t_b)
    mask = _region_mask(hv, bf, region).ravel()
    return x_b[mask], t_b[mask], hv[mask]


def certify_sdzcbf2(bf: BarrierFunction, sys: SystemDynamics, U: InputSet,
                    consts: BarrierConstants,
                    backup: Callable[[Array, Array], Array],
                    grid: GridSpec = GridSpec(),
                    slack_tol: float = 1e-9) -> CertReport:
    """Certify the operative (annulus-only) sampled-data condition.

    Pass requires: a > h_bar_reach, the supplied backup law feasible at 100%
    of annulus grid points, and its max-norm within the input box.  Failures
    are recorded in the report, never raised.
    """
    xs, ts, _ = _annulus_grid(bf, grid, "annulus")
    u_b = np.atleast_2d(backup(xs, ts))
    c, d0 = phi_affine(bf, sys, xs, ts)
    slack = np.sum(np.atleast_2d(c) * u_b, axis=-1) + d0 - consts.margin_ii
    feasible = slack >= -slack_tol
    max_norm = float(np.abs(u_b).max()) if u_b.size else 0.0
    reach = compute_min_annulus_width(consts)
    width_ok = bf.a > reach
    norm_ok = max_norm <= U.u_bar + slack_tol
    passed = bool(width_ok and norm_ok and feasible.all())
    return CertReport(
        definition="II", passed=passed, a=bf.a, h_bar_reach=reach,
        annulus_width_ok=width_ok, n_grid=int(xs.shape[0]),
        n_feasible=int(feasible.sum()),
        worst_slack=float(slack.min()) if slack.size else 0.0,
        max_backup_norm=max_norm, u_bar=U.u_bar, input_norm_ok=norm_ok,
        alpha=bf.alpha, margin=consts.margin_ii)


def _def1_norm_needed(bf: BarrierFunction, sys: SystemDynamics,
                      consts: BarrierConstants, alpha: float) -> float | None:
    """Max-norm the explicit corridor backup law would need on the annulus to
    meet the whole-domain margin at the given multiplier."""
    if bf.corridor is None or sys.A is None:
        return None
    cor = bf.corridor
    r_in = math.sqrt(max(cor.epsilon - bf.a, 1e-300))
    r_out = math.sqrt(cor.epsilon + bf.b)
    A_inf = float(np.linalg.norm(sys.A, np.inf))
    m_i = consts.with_alpha(alpha).margin_i
    return (A_inf * (cor.reference.x_bar_r + r_out)
            + math.sqrt(bf.n_x) / (2.0 * r_in)
            * (m_i + alpha * max(bf.a, bf.b)))


def certify_sdzcbf1(bf: BarrierFunction, sys: SystemDynamics, U: InputSet,
                    consts: BarrierConstants,
                    backup: Callable[[Array, Array], Array],
                    grid: GridSpec = GridSpec(),
                    slack_tol: float = 1e-9) -> CertReport:
    """Comparison certifier for the whole-domain condition.

    Strategy mirrored from the corridor study: the supplied backup law covers
    the annulus, u = 0 must cover the interior of D.  The report carries two
    diagnostics: the multiplier the u = 0 fallback would need (one-shot, margin
    frozen at the given alpha), and the backup-law norm that multiplier implies.
    """
    xs, ts, hv = _annulus_grid(bf, grid, "domain")
    on_annulus = hv <= bf.a
    u_try = np.zeros((xs.shape[0], U.n_u))
    if on_annulus.any():
        u_try[on_annulus] = np.atleast_2d(backup(xs[on_annulus], ts[on_annulus]))
    grad = bf.grad_x_h(xs, ts)
    gx = sys.input_matrix(xs)
    if gx.ndim == 2:
        cu = np.sum((u_try @ gx.T) * grad, axis=-1)
    else:
        cu = np.sum(np.einsum("bij,bj->bi", gx, u_try) * grad, axis=-1)
    lhs = np.sum(grad * sys.drift(xs), axis=-1) + cu + bf.alpha_of(hv)
    slack = lhs - consts.margin_i
    feasible = slack >= -slack_tol
    max_norm = float(np.abs(u_try[on_annulus]).max()) if on_annulus.any() else 0.0
    norm_ok = max_norm <= U.u_bar + slack_tol

    # one-shot required multiplier for the u = 0 interior fallback:
    # alpha h + grad(h).f >= margin_i  at each interior point (h > a > 0)
    interior = ~on_annulus
    required_alpha: float | None = None
    norm_needed: float | None = None
    if interior.any():
        q_f = np.sum(grad[interior] * sys.drift(xs[interior]), axis=-1)
        required_alpha = float(np.max((consts.margin_i - q_f) / hv[interior]))
        required_alpha = max(required_alpha, bf.alpha)
        norm_needed = _def1_norm_needed(bf, sys, consts, required_alpha)

    passed = bool(feasible.all() and norm_ok)
    notes = ""
    if not passed and norm_needed is not None and norm_needed > U.u_bar:
        notes = (f"fail: requires control authority beyond u_bar "
                 f"(needs max-norm ~{norm_needed:.3f} at multiplier "
                 f"~{required_alpha:.2f}, box allows {U.u_bar})")
    reach = compute_min_annulus_width(consts)
    return CertReport(
        definition="I", passed=passed, a=bf.a, h_bar_reach=reach,
        annulus_width_ok=bf.a > reach, n_grid=int(xs.shape[0]),
        n_feasible=int(feasible.sum()),
        worst_slack=float(slack.min()) if slack.size else 0.0,
        max_backup_norm=max_norm, u_bar=U.u_bar, input_norm_ok=norm_ok,
        alpha=bf.alpha, margin=consts.margin_i,
        required_alpha=required_alpha,
        norm_needed_at_required_alpha=norm_needed, notes=notes)
