"""Empirical Bregman loss over a hypernetwork and its exact gradient.

For a generator phi, similarity model mu and weight scale eta > 0, the
objective is the aggregate divergence between scaled weights and predicted
similarities,

    L(theta) = (1/|I|) sum_i { phi'(mu_i) mu_i - phi(mu_i) - eta w_i phi'(mu_i) } + C,

with C = (1/|I|) sum_i phi(eta w_i) independent of theta, so L equals the
mean pointwise divergence d(eta w_i, mu_i) and is zero exactly at a perfect
fit.  The gradient splits into a sum over the whole index set and a sum over
the positive (nonzero-weight) indices only:

    dL/dtheta = (1/|I|) [ sum_I mu_i phi''(mu_i) dmu_i
                          - eta sum_P w_i phi''(mu_i) dmu_i ].

Both are evaluated by streaming the index set in batches against one cached
embedding forward pass; nothing of size O(n^U) is materialized.  A guard
refuses index sets above 1e8 tuples unless ``force`` is passed.

Raw model outputs are clamped into [lo + margin, hi - margin] of dom(phi)
before any phi evaluation; the gradient treats the clamp as identity
(straight-through), and when no output is near a boundary the clamp changes
nothing bit-exact.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .divergence import GeneratingFunction
from .errors import ConfigError, DomainError, UnsupportedKind
from .hypernet import index_set_size, iter_index_batches, positive_terms
from .simfn import SimilarityModel, link_deriv, link_range, link_value

INDEX_GUARD = 10**8


@dataclass
class LossSpec:
    """Divergence + model + objective constants for one training run."""

    gen: GeneratingFunction
    model: SimilarityModel
    eta_scale: float = 1.0
    clamp_margin: float = 1e-7

    def __post_init__(self):
        if not self.eta_scale > 0:
            raise ConfigError("eta_scale must be positive")
        if self.clamp_margin < 0:
            raise ConfigError("clamp_margin must be non-negative")

    def clamp(self, mu):
        lo, hi = self.gen.clamp_interval(self.clamp_margin)
        return np.clip(mu, lo, hi)


def validate_spec(spec, net):
    """Cross-field checks done before training: link range inside dom(phi),
    every (scaled) weight inside dom(phi), and zero weights only where
    phi(0) is finite."""
    gen = spec.gen
    llo, lhi = link_range(spec.model.link)
    if llo < gen.lo or lhi > gen.hi:
        raise ConfigError(
            f"link {spec.model.link!r} has range ({llo}, {lhi}) outside "
            f"dom(phi) of {gen.key!r}"
        )
    if spec.model.U != net.U:
        raise ConfigError(f"model U={spec.model.U} but network U={net.U}")
    pos_count = 0
    for idx, w, mult in positive_terms(net):
        pos_count += mult
        if not bool(gen.contains(spec.eta_scale * w)):
            raise DomainError(
                f"weight {w} at {idx} (scaled by eta={spec.eta_scale}) "
                f"outside dom(phi) of {gen.key!r}",
                index=idx,
            )
    size = index_set_size(net)
    if size == 0:
        raise ConfigError("empty index set")
    if pos_count < size and not bool(gen.contains(0.0)):
        raise DomainError(
            f"index set contains zero weights but 0 is outside dom(phi) "
            f"of {gen.key!r}"
        )


def _guard(net, force):
    size = index_set_size(net)
    if size == 0:
        raise ConfigError("empty index set")
    if size > INDEX_GUARD and not force:
        raise ConfigError(
            f"index set has {size} tuples (> {INDEX_GUARD}); pass force=True"
        )
    return size


def _positive_arrays(net):
    """Stacked (indices, weights, multiplicities) of the positive edges."""
    terms = list(positive_terms(net))
    if not terms:
        return (np.zeros((0, net.U), dtype=np.int64), np.zeros(0), np.zeros(0))
    idx = np.asarray([t[0] for t in terms], dtype=np.int64)
    w = np.asarray([t[1] for t in terms])
    mult = np.asarray([t[2] for t in terms], dtype=np.float64)
    return idx, w, mult


def model_scores(model, net, indices, batch_size=65536):
    """Raw (unclamped) similarities of the given index tuples."""
    fwd = model.embed_batch(net.vectors)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return np.zeros(0)
    out = np.empty(len(indices))
    for start in range(0, len(indices), batch_size):
        chunk = indices[start:start + batch_size]
        out[start:start + batch_size] = model.similarity_batch(fwd, chunk)
    return out


def full_loss(spec, net, force=False, batch_size=65536):
    """The exact objective over the whole index set."""
    size = _guard(net, force)
    gen, model, eta = spec.gen, spec.model, spec.eta_scale
    fwd = model.embed_batch(net.vectors)

    total = 0.0
    for batch in iter_index_batches(net, batch_size):
        mu = spec.clamp(link_value(model.link, model.inner_scores(fwd, batch)))
        total += float(np.sum(gen._grad_raw(mu) * mu - gen._phi_raw(mu)))

    pidx, pw, pmult = _positive_arrays(net)
    if len(pidx):
        mu_p = spec.clamp(link_value(model.link, model.inner_scores(fwd, pidx)))
        total -= float(np.sum(pmult * eta * pw * gen._grad_raw(mu_p)))
        const = float(np.sum(pmult * gen.phi(eta * pw)))
    else:
        const = 0.0
    zeros = size - float(np.sum(pmult))
    if zeros > 0:
        const += zeros * float(gen.phi(0.0))
    return total / size + const / size


def full_gradient(spec, net, force=False, batch_size=65536):
    """Exact gradient of :func:`full_loss` with respect to model.theta."""
    size = _guard(net, force)
    gen, model, eta = spec.gen, spec.model, spec.eta_scale
    fwd = model.embed_batch(net.vectors)
    R = np.zeros_like(fwd.Y)

    for batch in iter_index_batches(net, batch_size):
        s = model.inner_scores(fwd, batch)
        mu = spec.clamp(link_value(model.link, s))
        coefs = mu * gen._hess_raw(mu) * link_deriv(model.link, s)
        model.accumulate_inner_grad(fwd, batch, coefs, R)

    pidx, pw, pmult = _positive_arrays(net)
    if len(pidx):
        s = model.inner_scores(fwd, pidx)
        mu = spec.clamp(link_value(model.link, s))
        coefs = -eta * pmult * pw * gen._hess_raw(mu) * link_deriv(model.link, s)
        model.accumulate_inner_grad(fwd, pidx, coefs, R)

    return model.embed_backward(fwd, R) / size


def specialized_loss(spec, net, force=False, batch_size=65536):
    """Closed-form fast paths for the logistic, kl, quadratic and beta
    generators; agrees with :func:`full_loss` to floating rounding."""
    kind = spec.gen.kind
    if kind not in ("logistic", "kl", "quadratic", "beta"):
        raise UnsupportedKind(f"no specialized path for {kind!r}")
    size = _guard(net, force)
    gen, model, eta = spec.gen, spec.model, spec.eta_scale

    fwd = model.embed_batch(net.vectors)
    total = 0.0
    for batch in iter_index_batches(net, batch_size):
        mu = spec.clamp(link_value(model.link, model.inner_scores(fwd, batch)))
        if kind == "logistic":
            total += float(np.sum(-np.log1p(-mu)))
        elif kind == "kl":
            total += float(np.sum(mu * mu / (mu + gen.epsilon)))
        elif kind == "quadratic":
            total += float(np.sum(0.5 * mu * mu))
        else:
            b = gen.beta
            total += float(np.sum(np.power(mu, 1.0 + b) / (1.0 + b)))

    pidx, pw, pmult = _positive_arrays(net)
    const = 0.0
    if len(pidx):
        mu = spec.clamp(link_value(model.link, model.inner_scores(fwd, pidx)))
        a = eta * pw
        if kind == "logistic":
            total -= float(np.sum(pmult * a * (np.log(mu) - np.log1p(-mu))))
            const = float(np.sum(pmult * (xlogy(a, a) + xlogy(1 - a, 1 - a))))
        elif kind == "kl":
            e = gen.epsilon
            total -= float(np.sum(pmult * a * (np.log(mu + e) + mu / (mu + e) - 1.0)))
            if e > 0:
                const = float(np.sum(pmult * (a * np.log(a + e) - a)))
            else:
                const = float(np.sum(pmult * (xlogy(a, a) - a)))
        elif kind == "quadratic":
            total += float(np.sum(pmult * (0.5 * a * a - a * mu)))
        else:
            b = gen.beta
            total -= float(np.sum(pmult * a * np.power(mu, b) / b))
            const = float(np.sum(pmult * np.power(a, 1.0 + b) / (b * (1.0 + b))))
    return total / size + const / size
