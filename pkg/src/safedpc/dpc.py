"""Offline training of the neural receding-horizon policy.

The policy rolls through the discrete model for N steps; the loss is the
receding-horizon objective (tracking + input effort) plus penalties for box
violations and for breaking the discrete barrier-decrease condition

    c_h = h_{k+1} - h_k + alpha h_k - d  >=  0.

Gradients are exact reverse-mode: backpropagation through time over the
closed-loop map x_{k+1} = A_d x_k + B_d pi(x_k, xi_k).  The engine is
self-contained numpy; no autodiff framework is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .barrier import BarrierFunction, CorridorBarrier
from .model import Array, DiscreteModel, constant_reference

PENALTY_KINDS = ("relu", "relu-squared", "log10-smooth")
_LN10 = math.log(10.0)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


def _pen(v: Array, kind: str) -> Array:
    """Penalty applied to a nonnegative violation magnitude."""
    if kind == "relu":
        return v
    if kind == "relu-squared":
        return v * v
    if kind == "log10-smooth":
        return np.log10(1.0 + v)
    raise ValueError(f"unknown penalty kind {kind!r}")


def _pen_grad(v: Array, kind: str) -> Array:
    if kind == "relu":
        return np.where(v > 0, 1.0, 0.0)
    if kind == "relu-squared":
        return 2.0 * v
    if kind == "log10-smooth":
        return np.where(v > 0, 1.0 / ((1.0 + v) * _LN10), 0.0)
    raise ValueError(f"unknown penalty kind {kind!r}")


@dataclass(frozen=True)
class LossWeights:
    q_track: float = 10.0
    q_u: float = 0.0001
    q_state_pen: float = 1.0
    q_input_pen: float = 1.0
    q_barrier_pen: float = 1.0
    d: float = 0.001
    penalty_kind: str = "relu-squared"

    def __post_init__(self):
        if self.penalty_kind not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.penalty_kind!r}")
        if self.d <= 0:
            raise ValueError("robustness margin d must be positive")
        for name in ("q_track", "q_u", "q_state_pen", "q_input_pen",
                     "q_barrier_pen"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class FeatureVector:
    """Reference preview fed to the policy alongside the state."""

    reference_preview: Array     # (N, n_x)


class PolicyNetwork:
    """Dense feed-forward policy with tanh hidden layers and a bounded output
    map u = center + half_width * tanh(z), so the output lies in the input box
    by construction."""

    def __init__(self, layer_sizes: list[int], u_lo: Array, u_hi: Array,
                 preview_len: int, n_x: int, seed: int = 0):
        self.layer_sizes = list(layer_sizes)
        self.preview_len = int(preview_len)
        self.n_x = int(n_x)
        n_in_expected = n_x + preview_len * n_x
        if layer_sizes[0] != n_in_expected:
            raise ValueError(
                f"input width {layer_sizes[0]} != n_x + preview ({n_in_expected})")
        self.u_lo = np.atleast_1d(np.asarray(u_lo, dtype=float))
        self.u_hi = np.atleast_1d(np.asarray(u_hi, dtype=float))
        if self.u_lo.shape[0] != layer_sizes[-1]:
            raise ValueError("output width does not match the input box")
        self.u_center = 0.5 * (self.u_lo + self.u_hi)
        self.u_scale = 0.5 * (self.u_hi - self.u_lo)
        rng = np.random.default_rng(seed)
        self.W: list[Array] = []
        self.b: list[Array] = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            lim = math.sqrt(6.0 / (n_in + n_out))
            self.W.append(rng.uniform(-lim, lim, size=(n_in, n_out)))
            self.b.append(np.zeros(n_out))

    @property
    def n_u(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "PolicyNetwork":
        dup = object.__new__(PolicyNetwork)
        dup.layer_sizes = list(self.layer_sizes)
        dup.preview_len = self.preview_len
        dup.n_x = self.n_x
        dup.u_lo = self.u_lo.copy()
        dup.u_hi = self.u_hi.copy()
        dup.u_center = self.u_center.copy()
        dup.u_scale = self.u_scale.copy()
        dup.W = [w.copy() for w in self.W]
        dup.b = [b.copy() for b in self.b]
        return dup

    def forward_batch(self, X: Array, XI: Array, need_cache: bool = False):
        """X: (m, n_x), XI: (m, preview_len * n_x) -> U: (m, n_u)."""
        inp = np.concatenate([X, XI], axis=1)
        if inp.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"policy input width {inp.shape[1]} != "
                             f"{self.layer_sizes[0]}")
        acts = [inp]
        h = inp
        n_layers = len(self.W)
        for l in range(n_layers - 1):
            h = np.tanh(h @ self.W[l] + self.b[l])
            acts.append(h)
        z_out = h @ self.W[-1] + self.b[-1]
        t_out = np.tanh(z_out)
        u = self.u_center + self.u_scale * t_out
        if need_cache:
            return u, (acts, t_out)
        return u

    def backward_batch(self, cache, dU: Array):
        """Cotangent of forward_batch: returns (grads [(dW, db)...], dX)."""
        acts, t_out = cache
        dz = dU * self.u_scale * (1.0 - t_out * t_out)
        grads_W = [None] * len(self.W)
        grads_b = [None] * len(self.b)
        for l in range(len(self.W) - 1, -1, -1):
            grads_W[l] = acts[l].T @ dz
            grads_b[l] = dz.sum(axis=0)
            dh = dz @ self.W[l].T
            if l > 0:
                dz = dh * (1.0 - acts[l] * acts[l])
        dX = dh[:, : self.n_x]
        return list(zip(grads_W, grads_b)), dX


def init_policy(n_x: int, n_u: int, preview_len: int, u_lo, u_hi,
                hidden: tuple[int, ...] = (32, 32), seed: int = 0
                ) -> PolicyNetwork:
    sizes = [n_x + preview_len * n_x, *hidden, n_u]
    return PolicyNetwork(sizes, u_lo, u_hi, preview_len, n_x, seed=seed)


def policy_forward(net: PolicyNetwork, x: Array, xi: FeatureVector) -> Array:
    """Single evaluation; output is inside the input box by construction."""
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    XI = np.asarray(xi.reference_preview, dtype=float).reshape(1, -1)
    return net.forward_batch(X, XI)[0]


@dataclass
class RolloutBatch:
    """N-step policy rollouts through the discrete model for m scenarios.

    Transitions satisfy x_{k+1} = A_d x_k + B_d u_k exactly (no disturbance
    during training).  ``refs`` holds at least N samples per scenario; the
    preview at step k is refs[k : k+N] with edge-hold padding.
    """

    X: Array                 # (m, N+1, n_x)
    U: Array                 # (m, N, n_u)
    R: Array                 # (m, N, n_x) reference samples entering the loss
    refs: Array              # (m, L, n_x), L >= N
    t0: Array                # (m,)
    N: int
    model: DiscreteModel
    barrier: BarrierFunction | None = None
    H: Array | None = None   # (m, N+1) barrier values along the rollout
    state_lo: Array | None = None
    state_hi: Array | None = None
    input_lo: Array | None = None
    input_hi: Array | None = None

    @property
    def m(self) -> int:
        return self.X.shape[0]


def _preview_matrix(refs: Array, k: int, N: int) -> Array:
    """refs: (m, L, n_x) -> flattened previews (m, N*n_x) for step k."""
    L = refs.shape[1]
    idx = np.minimum(np.arange(k, k + N), L - 1)
    return refs[:, idx, :].reshape(refs.shape[0], -1)


def rollout_batch(net: PolicyNetwork, model: DiscreteModel, x0: Array,
                  refs: Array, N: int, barrier: BarrierFunction | None = None,
                  t0: Array | None = None,
                  state_bounds: tuple | None = None,
                  input_bounds: tuple | None = None,
                  need_cache: bool = False):
    """Vectorized rollout over m scenarios; optionally returns per-step
    network caches for the backward pass."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    refs = np.asarray(refs, dtype=float)
    if refs.ndim == 2:
        refs = refs[:, :, None]
    if refs.shape[1] < N:
        raise ValueError(f"need at least {N} reference samples, got {refs.shape[1]}")
    m, n_x = x0.shape
    if t0 is None:
        t0 = np.zeros(m)
    X = np.empty((m, N + 1, n_x))
    U = np.empty((m, N, net.n_u))
    X[:, 0] = x0
    caches = [] if need_cache else None
    for k in range(N):
        XI = _preview_matrix(refs, k, N)
        if need_cache:
            u, cache = net.forward_batch(X[:, k], XI, need_cache=True)
            caches.append(cache)
        else:
            u = net.forward_batch(X[:, k], XI)
        U[:, k] = u
        X[:, k + 1] = X[:, k] @ model.A_d.T + u @ model.B_d.T
    H = None
    if barrier is not None:
        ts = t0[:, None] + np.arange(N + 1)[None, :] * model.dt
        H = barrier.h(X, ts)
    sl, sh = (None, None) if state_bounds is None else state_bounds
    il, ih = (None, None) if input_bounds is None else input_bounds
    batch = RolloutBatch(X=X, U=U, R=refs[:, :N, :], refs=refs, t0=np.asarray(t0, float),
                         N=N, model=model, barrier=barrier, H=H,
                         state_lo=sl, state_hi=sh, input_lo=il, input_hi=ih)
    if need_cache:
        return batch, caches
    return batch


def rollout(net: PolicyNetwork, model: DiscreteModel, x0: Array, refs: Array,
            N: int, barrier: BarrierFunction | None = None, t0: float = 0.0,
            state_bounds: tuple | None = None,
            input_bounds: tuple | None = None) -> RolloutBatch:
    """Single-scenario rollout."""
    refs = np.asarray(refs, dtype=float)
    if refs.ndim == 1:
        refs = refs[:, None]
    return rollout_batch(net, model, np.atleast_1d(x0)[None, :], refs[None],
                         N, barrier=barrier, t0=np.array([t0]),
                         state_bounds=state_bounds, input_bounds=input_bounds)


def mpc_loss(batch: RolloutBatch, w: LossWeights) -> float:
    """Mean over scenarios and steps of tracking + input-effort terms."""
    err = batch.X[:, : batch.N] - batch.R
    track = w.q_track * np.sum(err * err, axis=-1)
    effort = w.q_u * np.sum(batch.U * batch.U, axis=-1)
    return float((track + effort).mean())


def _box_violations(v: Array, lo, hi):
    vio_hi = np.maximum(0.0, v - hi) if hi is not None else np.zeros_like(v)
    vio_lo = np.maximum(0.0, lo - v) if lo is not None else np.zeros_like(v)
    return vio_lo, vio_hi


def constraint_penalty(batch: RolloutBatch, w: LossWeights) -> float:
    """Box-violation penalties on states and inputs, averaged like the loss."""
    total = 0.0
    if batch.state_lo is not None or batch.state_hi is not None:
        lo, hi = _box_violations(batch.X[:, : batch.N], batch.state_lo,
                                 batch.state_hi)
        total += w.q_state_pen * float(
            (_pen(lo, w.penalty_kind) + _pen(hi, w.penalty_kind))
            .sum(axis=-1).mean())
    if batch.input_lo is not None or batch.input_hi is not None:
        lo, hi = _box_violations(batch.U, batch.input_lo, batch.input_hi)
        total += w.q_input_pen * float(
            (_pen(lo, w.penalty_kind) + _pen(hi, w.penalty_kind))
            .sum(axis=-1).mean())
    return total


def barrier_residual(h_k: float, h_k1: float, alpha: float, d: float) -> float:
    """Discrete barrier-decrease residual; >= 0 means the condition holds with
    margin d."""
    return h_k1 - h_k + alpha * h_k - d


def total_loss(batch: RolloutBatch, w: LossWeights) -> tuple[float, dict]:
    """Full training loss with its component breakdown (components sum to the
    total exactly)."""
    err = batch.X[:, : batch.N] - batch.R
    tracking = w.q_track * float(np.sum(err * err, axis=-1).mean())
    effort = w.q_u * float(np.sum(batch.U * batch.U, axis=-1).mean())

    state_pen = 0.0
    if batch.state_lo is not None or batch.state_hi is not None:
        lo, hi = _box_violations(batch.X[:, : batch.N], batch.state_lo,
                                 batch.state_hi)
        state_pen = w.q_state_pen * float(
            (_pen(lo, w.penalty_kind) + _pen(hi, w.penalty_kind))
            .sum(axis=-1).mean())
    input_pen = 0.0
    if batch.input_lo is not None or batch.input_hi is not None:
        lo, hi = _box_violations(batch.U, batch.input_lo, batch.input_hi)
        input_pen = w.q_input_pen * float(
            (_pen(lo, w.penalty_kind) + _pen(hi, w.penalty_kind))
            .sum(axis=-1).mean())

    barrier_pen = 0.0
    if batch.H is not None and batch.barrier is not None:
        H = batch.H
        c_h = H[:, 1:] - H[:, :-1] + batch.barrier.alpha * H[:, :-1] - w.d
        barrier_pen = w.q_barrier_pen * float(
            _pen(np.maximum(0.0, -c_h), w.penalty_kind).mean())

    components = {
        "tracking": tracking, "effort": effort, "state_pen": state_pen,
        "input_pen": input_pen, "barrier_pen": barrier_pen,
    }
    total = tracking + effort + state_pen + input_pen + barrier_pen
    components["total"] = total
    return total, components


def gradient(net: PolicyNetwork, batch: RolloutBatch, w: LossWeights):
    """Exact reverse-mode gradient of total_loss w.r.t. every weight,
    accumulated through the N-step rollout (the batch supplies scenarios;
    trajectories are re-rolled under the current weights)."""
    fresh, caches = rollout_batch(
        net, batch.model, batch.X[:, 0], batch.refs, batch.N,
        barrier=batch.barrier, t0=batch.t0,
        state_bounds=(batch.state_lo, batch.state_hi),
        input_bounds=(batch.input_lo, batch.input_hi), need_cache=True)
    m, N = fresh.m, fresh.N
    n_x, n_u = fresh.X.shape[2], fresh.U.shape[2]
    scale = 1.0 / (m * N)
    A_d, B_d = batch.model.A_d, batch.model.B_d

    # direct dL/dx_k and dL/du_k (before chaining through the dynamics)
    gX = np.zeros((m, N + 1, n_x))
    gU = np.zeros((m, N, n_u))
    err = fresh.X[:, :N] - fresh.R
    gX[:, :N] += scale * 2.0 * w.q_track * err
    gU += scale * 2.0 * w.q_u * fresh.U
    if fresh.state_lo is not None or fresh.state_hi is not None:
        lo, hi = _box_violations(fresh.X[:, :N], fresh.state_lo, fresh.state_hi)
        gX[:, :N] += scale * w.q_state_pen * (
            _pen_grad(hi, w.penalty_kind) * (hi > 0)
            - _pen_grad(lo, w.penalty_kind) * (lo > 0))
    if fresh.input_lo is not None or fresh.input_hi is not None:
        lo, hi = _box_violations(fresh.U, fresh.input_lo, fresh.input_hi)
        gU += scale * w.q_input_pen * (
            _pen_grad(hi, w.penalty_kind) * (hi > 0)
            - _pen_grad(lo, w.penalty_kind) * (lo > 0))
    if fresh.H is not None and fresh.barrier is not None:
        bf = fresh.barrier
        H = fresh.H
        c_h = H[:, 1:] - H[:, :-1] + bf.alpha * H[:, :-1] - w.d
        v = np.maximum(0.0, -c_h)
        dP_dch = -_pen_grad(v, w.penalty_kind) * (v > 0)          # (m, N)
        ts = fresh.t0[:, None] + np.arange(N + 1)[None, :] * batch.model.dt
        grads_h = bf.grad_x_h(fresh.X.reshape(-1, n_x),
                              ts.reshape(-1)).reshape(m, N + 1, n_x)
        coef = scale * w.q_barrier_pen * dP_dch
        gX[:, 1:] += coef[:, :, None] * grads_h[:, 1:]
        gX[:, :N] += (bf.alpha - 1.0) * coef[:, :, None] * grads_h[:, :N]

    # backward sweep through time
    grads = [(np.zeros_like(Wl), np.zeros_like(bl))
             for Wl, bl in zip(net.W, net.b)]
    lam = gX[:, N]
    for k in range(N - 1, -1, -1):
        gu_total = gU[:, k] + lam @ B_d
        step_grads, dX_net = net.backward_batch(caches[k], gu_total)
        for l, (dWl, dbl) in enumerate(step_grads):
            grads[l] = (grads[l][0] + dWl, grads[l][1] + dbl)
        lam = gX[:, k] + lam @ A_d + dX_net
    return grads


@dataclass(frozen=True)
class TrainingConfig:
    m: int = 2000
    N: int = 10
    epochs: int = 400
    batch: int = 200
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    init_state_lo: float | Array = -4.0
    init_state_hi: float | Array = 4.0
    reference_mode: str = "true"       # "true" or "zero"
    hidden: tuple[int, ...] = (32, 32)

    def __post_init__(self):
        if self.m < 1 or self.N < 1 or self.epochs < 0 or self.batch < 1:
            raise ValueError("m, N, batch must be >= 1 and epochs >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.reference_mode not in ("true", "zero"):
            raise ValueError(f"unknown reference mode {self.reference_mode!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class _Adam:
    def __init__(self, shapes, lr):
        self.lr = lr
        self.t = 0
        self.mom = [(np.zeros(sw), np.zeros(sb)) for sw, sb in shapes]
        self.vel = [(np.zeros(sw), np.zeros(sb)) for sw, sb in shapes]

    def step(self, net: PolicyNetwork, grads):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for l, (dW, db) in enumerate(grads):
            mW, mb = self.mom[l]
            vW, vb = self.vel[l]
            mW[:] = b1 * mW + (1 - b1) * dW
            mb[:] = b1 * mb + (1 - b1) * db
            vW[:] = b2 * vW + (1 - b2) * dW * dW
            vb[:] = b2 * vb + (1 - b2) * db * db
            net.W[l] -= self.lr * (mW / c1) / (np.sqrt(vW / c2) + eps)
            net.b[l] -= self.lr * (mb / c1) / (np.sqrt(vb / c2) + eps)


class _SGD:
    def __init__(self, shapes, lr):
        self.lr = lr

    def step(self, net: PolicyNetwork, grads):
        for l, (dW, db) in enumerate(grads):
            net.W[l] -= self.lr * dW
            net.b[l] -= self.lr * db


def _sample_scenarios(cfg: TrainingConfig, model: DiscreteModel,
                      barrier: BarrierFunction, rng: np.random.Generator):
    """Initial states inside the corridor at each scenario's start phase, plus
    reference windows long enough that no preview padding occurs."""
    if barrier.corridor is None:
        raise ValueError("training needs a corridor barrier (reference attached)")
    n_x = barrier.n_x
    eps = barrier.corridor.epsilon
    if cfg.reference_mode == "zero":
        ref = constant_reference(0.0, n_x)
        train_barrier = CorridorBarrier(eps, ref).barrier(
            barrier.alpha, barrier.a, barrier.b)
    else:
        ref = barrier.corridor.reference
        train_barrier = barrier
    period = ref.period or 1.0
    t0 = rng.uniform(0.0, period, size=cfg.m)
    L = 2 * cfg.N - 1
    ts = t0[:, None] + np.arange(L)[None, :] * model.dt
    refs = ref.x_r(ts.reshape(-1)).reshape(cfg.m, L, n_x)

    lo = np.broadcast_to(np.asarray(cfg.init_state_lo, float), (n_x,))
    hi = np.broadcast_to(np.asarray(cfg.init_state_hi, float), (n_x,))
    centers = ref.x_r(t0).reshape(cfg.m, n_x)
    r_c = math.sqrt(eps)
    x0 = np.empty((cfg.m, n_x))
    for i in range(cfg.m):
        c = centers[i]
        box_lo = np.maximum(lo, c - r_c)
        box_hi = np.minimum(hi, c + r_c)
        while True:
            cand = rng.uniform(box_lo, box_hi)
            if np.sum((cand - c) ** 2) <= eps:
                x0[i] = cand
                break
    return x0, refs, t0, train_barrier


def train(cfg: TrainingConfig, model: DiscreteModel, barrier: BarrierFunction,
          w: LossWeights, input_set=None
          ) -> tuple[PolicyNetwork, list[dict]]:
    """Train the policy on sampled scenarios; deterministic given the seed.

    Returns the weight snapshot with the lowest validation loss over a held-out
    10% of scenarios, plus the per-epoch loss-component log.
    """
    rng = np.random.default_rng(cfg.seed)
    n_x, n_u = model.n_x, model.n_u
    if input_set is not None:
        u_lo, u_hi = input_set.lower, input_set.upper
    else:
        u_lo, u_hi = -np.ones(n_u), np.ones(n_u)
    net = init_policy(n_x, n_u, cfg.N, u_lo, u_hi, hidden=cfg.hidden,
                      seed=cfg.seed)
    x0, refs, t0, train_barrier = _sample_scenarios(cfg, model, barrier, rng)
    state_bounds = (np.broadcast_to(np.asarray(cfg.init_state_lo, float), (n_x,)),
                    np.broadcast_to(np.asarray(cfg.init_state_hi, float), (n_x,)))
    input_bounds = (u_lo, u_hi)

    perm = rng.permutation(cfg.m)
    n_val = max(1, int(round(0.1 * cfg.m))) if cfg.m > 1 else 0
    val_idx = perm[:n_val]
    tr_idx = perm[n_val:] if n_val else perm

    def batch_of(idx):
        return rollout_batch(net, model, x0[idx], refs[idx], cfg.N,
                             barrier=train_barrier, t0=t0[idx],
                             state_bounds=state_bounds,
                             input_bounds=input_bounds)

    shapes = [(Wl.shape, bl.shape) for Wl, bl in zip(net.W, net.b)]
    opt = _Adam(shapes, cfg.lr) if cfg.optimizer == "adam" else _SGD(shapes, cfg.lr)

    curve: list[dict] = []
    best_val = math.inf
    best_net = net.copy()
    for epoch in range(cfg.epochs):
        order = rng.permutation(tr_idx)
        for s in range(0, order.shape[0], cfg.batch):
            mb = order[s: s + cfg.batch]
            grads = gradient(net, batch_of(mb), w)
            opt.step(net, grads)
        _, comps = total_loss(batch_of(tr_idx), w)
        val_total = total_loss(batch_of(val_idx), w)[0] if n_val else comps["total"]
        if not (math.isfinite(comps["total"]) and math.isfinite(val_total)):
            raise TrainingDivergedError(epoch)
        row = {"epoch": epoch, **comps, "validation": val_total}
        curve.append(row)
        if val_total < best_val:
            best_val = val_total
            best_net = net.copy()
    if cfg.epochs == 0:
        best_net = net
    return best_net, curve


WEIGHT_FORMAT_VERSION = 1


def save_weights(net: PolicyNetwork, path, seed: int | None = None,
                 reference_mode: str | None = None) -> None:
    """Versioned flat text weight file: header lines, then one float per line."""
    lines = [
        f"format_version={WEIGHT_FORMAT_VERSION}",
        "layer_sizes=" + ",".join(str(s) for s in net.layer_sizes),
        "activation=tanh",
        "u_lo=" + ",".join(repr(float(v)) for v in net.u_lo),
        "u_hi=" + ",".join(repr(float(v)) for v in net.u_hi),
        f"preview_len={net.preview_len}",
        f"n_x={net.n_x}",
    ]
    if seed is not None:
        lines.append(f"seed={seed}")
    if reference_mode is not None:
        lines.append(f"reference_mode={reference_mode}")
    flat = np.concatenate([np.concatenate([Wl.ravel(), bl])
                           for Wl, bl in zip(net.W, net.b)])
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        fh.write("payload\n")
        fh.write("\n".join(repr(float(v)) for v in flat) + "\n")


def load_weights(path) -> tuple[PolicyNetwork, dict]:
    with open(path) as fh:
        text = fh.read().splitlines()
    header: dict[str, str] = {}
    i = 0
    for i, line in enumerate(text):
        if line == "payload":
            break
        k, _, v = line.partition("=")
        header[k] = v
    if header.get("format_version") != str(WEIGHT_FORMAT_VERSION):
        raise ValueError(f"unsupported weight file version "
                         f"{header.get('format_version')!r}")
    sizes = [int(s) for s in header["layer_sizes"].split(",")]
    u_lo = np.array([float(v) for v in header["u_lo"].split(",")])
    u_hi = np.array([float(v) for v in header["u_hi"].split(",")])
    net = PolicyNetwork(sizes, u_lo, u_hi, int(header["preview_len"]),
                        int(header["n_x"]))
    flat = np.array([float(v) for v in text[i + 1:] if v])
    pos = 0
    for l, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        net.W[l] = flat[pos: pos + n_in * n_out].reshape(n_in, n_out)
        pos += n_in * n_out
        net.b[l] = flat[pos: pos + n_out]
        pos += n_out
    if pos != flat.shape[0]:
        raise ValueError("weight payload size does not match the header")
    return net, header


def save_training_curve(curve: list[dict], path) -> None:
    cols = ["epoch", "total", "tracking", "effort", "state_pen", "input_pen",
            "barrier_pen", "validation"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in curve:
            fh.write(",".join(repr(row[c]) if c != "epoch" else str(row[c])
                              for c in cols) + "\n")
