"""Optimizers over flat parameter vectors: projected SGD and Adam.

The SGD update is

    theta <- Q( theta - gamma_t * g ),

where Q is the Euclidean projection onto the parameter set (identity, the
non-negative orthant, or a coordinate box) and gamma_t is either constant or
the gamma/t decay.  Weight decay adds lambda * theta to the gradient before
any step.  Adam applies the usual bias-corrected moment estimates followed
by the same projection.

With the gamma/t schedule and a gradient-Lipschitz estimate H satisfying
gamma < 2/H, an iteration count tau can be drawn from

    P(tau = t)  proportional to  2*gamma/t - H*gamma^2/t^2,   t = 1..T,

and running exactly tau iterations makes the expected squared norm of the
full objective gradient vanish as O(1/log T).  The tau device is analyzed
for the unconstrained case; projections are still applied operationally.

The training loop composes a gradient source (full-batch, or the minibatch
sampler) with one of the steppers, records (iteration, train loss,
validation metric, elapsed ms) at a fixed cadence, and keeps the best
parameter vector under the validation metric.  Everything is sequential and
deterministic given the seeds.
"""

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, NonFiniteGradient
from .loss import full_gradient, full_loss, validate_spec
from .sampler import MinibatchSampler, stochastic_gradient


@dataclass
class Schedule:
    kind: str = "constant"            # constant | inverse-t | adam
    gamma: float = 1e-3               # step size (Adam: learning rate)
    T: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    tau_sampling: bool = False
    H_estimate: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("constant", "inverse-t", "adam"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.gamma > 0:
            raise ConfigError("step size must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.T < 0:
            raise ConfigError("T must be non-negative")
        if self.tau_sampling:
            if self.H_estimate is None or not self.H_estimate > 0:
                raise ConfigError("tau sampling requires a positive H_estimate")
            if self.kind == "inverse-t" and not self.gamma < 2.0 / self.H_estimate:
                raise ConfigError(
                    f"tau sampling needs gamma < 2/H = {2.0 / self.H_estimate}")

    def step_size(self, t):
        return self.gamma / t if self.kind == "inverse-t" else self.gamma


@dataclass
class Projection:
    kind: str = "none"                # none | nonnegative | box
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("none", "nonnegative", "box"):
            raise ConfigError(f"unknown projection kind {self.kind!r}")
        if self.kind == "box":
            if self.lo is None or self.hi is None:
                raise ConfigError("box projection needs lo and hi")
            self.lo = np.asarray(self.lo, dtype=np.float64)
            self.hi = np.asarray(self.hi, dtype=np.float64)
            if np.any(self.lo > self.hi):
                raise ConfigError("box projection needs lo <= hi componentwise")

    def apply(self, theta):
        """Euclidean projection; for these sets it is the componentwise clamp."""
        if self.kind == "none":
            return theta
        if self.kind == "nonnegative":
            return np.maximum(theta, 0.0)
        return np.clip(theta, self.lo, self.hi)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, q):
        return cls(np.zeros(q), np.zeros(q))


def _check_finite(grad):
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("gradient contains NaN or infinity")


def sgd_step(theta, grad, schedule, t, projection=None):
    """One projected (stochastic) gradient step at iteration t >= 1."""
    _check_finite(grad)
    g = grad + schedule.weight_decay * theta if schedule.weight_decay else grad
    out = theta - schedule.step_size(t) * g
    return projection.apply(out) if projection else out


def adam_step(state, theta, grad, t, schedule, projection=None):
    """One bias-corrected Adam step followed by projection."""
    _check_finite(grad)
    g = grad + schedule.weight_decay * theta if schedule.weight_decay else grad
    m = schedule.beta1 * state.m + (1.0 - schedule.beta1) * g
    v = schedule.beta2 * state.v + (1.0 - schedule.beta2) * g * g
    mhat = m / (1.0 - schedule.beta1 ** t)
    vhat = v / (1.0 - schedule.beta2 ** t)
    out = theta - schedule.gamma * mhat / (np.sqrt(vhat) + schedule.eps)
    if projection is not None:
        out = projection.apply(out)
    return AdamState(m, v), out


def tau_probabilities(T, gamma, H):
    """P(tau = t) for t = 1..T; every mass is positive when gamma < 2/H."""
    if not gamma < 2.0 / H:
        raise ConfigError(f"tau distribution needs gamma < 2/H = {2.0 / H}")
    t = np.arange(1, T + 1, dtype=np.float64)
    w = 2.0 * gamma / t - H * gamma * gamma / (t * t)
    return w / w.sum()


def sample_tau(schedule, rng, size=None):
    """Draw the iteration count tau in [1, T] from the decay distribution.

    ``size=None`` returns one int; an integer size returns that many draws.
    """
    if not schedule.tau_sampling:
        raise ConfigError("schedule has tau_sampling disabled")
    p = tau_probabilities(schedule.T, schedule.gamma, schedule.H_estimate)
    if size is None:
        return int(rng.choice(schedule.T, p=p)) + 1
    return rng.choice(schedule.T, p=p, size=size) + 1


@dataclass
class TrainResult:
    theta: np.ndarray
    best_theta: np.ndarray
    history: list                    # rows (iter, train_loss, val_metric, elapsed_ms)
    iterations: int
    stopped_early: bool = False


def train(net, spec, schedule, projection=None, sampler_cfg=None, seed=0,
          cadence=50, eval_fn=None, metric_direction="min", callbacks=(),
          record_loss=True, practical_scaling=False, force=False):
    """Run the optimization loop and return the trained parameters.

    ``sampler_cfg`` selects minibatch gradients; None means full batch.
    ``eval_fn(model) -> float`` supplies the validation metric recorded at
    each cadence; ``metric_direction`` ('min' or 'max') picks the best
    checkpoint.  ``practical_scaling`` forces s+ = s- = 1 on every
    minibatch (the constant-ratio shortcut).  Callbacks receive
    (iteration, model, history_row_or_None) and stop the loop by returning
    True.
    """
    if metric_direction not in ("min", "max"):
        raise ConfigError("metric_direction must be 'min' or 'max'")
    validate_spec(spec, net)
    model = spec.model
    rng = np.random.default_rng(seed)
    T = sample_tau(schedule, rng) if schedule.tau_sampling else schedule.T
    sampler = MinibatchSampler(net, sampler_cfg) if sampler_cfg is not None else None
    state = AdamState.zeros(model.q) if schedule.kind == "adam" else None

    history = []
    best_metric = None
    best_theta = model.theta.copy()
    stopped = False
    iterations = 0
    t0 = time.perf_counter()

    for t in range(1, T + 1):
        iterations = t
        if sampler is not None:
            mb = sampler.draw()
            if practical_scaling:
                mb = replace(mb, s_plus=1.0, s_minus=1.0)
            grad = stochastic_gradient(spec, net, mb)
        else:
            grad = full_gradient(spec, net, force=force)
        if schedule.kind == "adam":
            state, model.theta = adam_step(state, model.theta, grad, t, schedule,
                                           projection)
        else:
            model.theta = sgd_step(model.theta, grad, schedule, t, projection)

        row = None
        if t % cadence == 0 or t == T:
            loss = full_loss(spec, net, force=force) if record_loss else float("nan")
            metric = float(eval_fn(model)) if eval_fn is not None else float("nan")
            row = (t, loss, metric, (time.perf_counter() - t0) * 1e3)
            history.append(row)
            if eval_fn is not None and np.isfinite(metric):
                better = (best_metric is None
                          or (metric < best_metric if metric_direction == "min"
                              else metric > best_metric))
                if better:
                    best_metric = metric
                    best_theta = model.theta.copy()
        for cb in callbacks:
            if cb(t, model, row):
                stopped = True
                break
        if stopped:
            break

    if eval_fn is None:
        best_theta = model.theta.copy()
    return TrainResult(model.theta, best_theta, history, iterations, stopped)
