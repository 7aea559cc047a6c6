"""Self-contained correctness checks runnable from the command line:
finite-difference agreement for the analytic derivatives and gradients, and
exhaustive-enumeration unbiasedness of the minibatch gradient.
"""

import itertools

import numpy as np

from .divergence import make_generator
from .hypernet import Hypernetwork
from .loss import LossSpec, full_gradient, full_loss
from .sampler import Slice, stochastic_gradient, support_set
from .simfn import SimilarityModel
from .synth import PlantedModel, generate


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def grad_fd(f, theta, h=1e-6):
    """Central finite differences of a scalar function of a vector."""
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h * max(1.0, abs(theta[i]))
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * e[i])
    return g


def _interior_points(gen, rng, m):
    lo, hi = gen.lo, gen.hi
    lo = max(lo, -4.0) + 0.05
    hi = min(hi, 4.0) - 0.05
    return rng.uniform(lo, hi, size=m)


def check_divergence_derivatives(seed=0, m=50, rtol=1e-6):
    """phi' and phi'' match central differences of phi on random interior
    points for every generator kind."""
    rng = np.random.default_rng(seed)
    keys = ["logistic", "kl", "beta:0.5", "itakura-saito", "inverse",
            "quadratic", "exponential", "dual-logistic"]
    worst = 0.0
    for key in keys:
        gen = make_generator(key)
        x = _interior_points(gen, rng, m)
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        g_num = (gen.phi(x + h) - gen.phi(x - h)) / (2 * h)
        h_num = (gen.phi_grad(x + h) - gen.phi_grad(x - h)) / (2 * h)
        rel_g = np.max(np.abs(g_num - gen.phi_grad(x)) / np.maximum(1e-12, np.abs(g_num)))
        rel_h = np.max(np.abs(h_num - gen.phi_hess(x)) / np.maximum(1e-12, np.abs(h_num)))
        worst = max(worst, rel_g, rel_h)
    return worst <= rtol, f"max relative error {worst:.3e}"


def check_similarity_gradients(seed=0, trials=20, rtol=1e-5):
    """similarity_grad matches finite differences of similarity in theta."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for kind in ("linear", "mlp1"):
        for link in ("identity", "sigmoid", "exp"):
            for _ in range(trials):
                U = int(rng.integers(1, 4))
                model = SimilarityModel.create(
                    kind, p=3, K=2, U=U, link=link, H=4,
                    seed=int(rng.integers(1 << 31)))
                if kind == "mlp1":
                    model.theta = model.theta + 0.05 * rng.standard_normal(model.q)
                X = rng.standard_normal((U, 3))
                mu, g = model.similarity_grad(X)

                def f(theta, model=model, X=X):
                    m2 = SimilarityModel(model.kind, model.p, model.K, model.U,
                                         link=model.link, H=model.H, theta=theta)
                    return m2.similarity(X)
                g_num = grad_fd(f, model.theta.copy())
                scale = max(1.0, float(np.max(np.abs(g_num))))
                worst = max(worst, float(np.max(np.abs(g - g_num))) / scale)
    return worst <= rtol, f"max relative error {worst:.3e}"


def check_full_gradient(seed=0, rtol=1e-5):
    """full_gradient matches finite differences of full_loss on a small
    random instance."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for key, link in (("quadratic", "identity"), ("kl", "exp"),
                      ("logistic", "sigmoid")):
        model = SimilarityModel.create("linear", p=3, K=2, U=2, link=link,
                                       seed=int(rng.integers(1 << 31)))
        planted = PlantedModel(SimilarityModel.create(
            "linear", p=3, K=2, U=2, link="sigmoid", seed=1), noise="bernoulli")
        net = generate(planted, n=6, U=2, index_policy="increasing",
                       seed=int(rng.integers(1 << 31)))
        spec = LossSpec(make_generator(key), model)
        g = full_gradient(spec, net)

        def f(theta, spec=spec, net=net):
            saved = spec.model.theta
            spec.model.theta = theta
            try:
                return full_loss(spec, net)
            finally:
                spec.model.theta = saved
        g_num = grad_fd(f, model.theta.copy())
        scale = max(1.0, float(np.max(np.abs(g_num))))
        worst = max(worst, float(np.max(np.abs(g - g_num))) / scale)
    return worst <= rtol, f"max relative error {worst:.3e}"


def expected_minibatch_gradient(spec, net, u, m_plus, m_minus, eta=1.0):
    """Exhaustive-enumeration expectation of the minibatch gradient under
    uniform j and uniform with-replacement entry draws.

    Every index's gradient term is computed once; the outcome tree
    (j, then each independent draw) is then averaged exactly.
    """
    model, gen = spec.model, spec.gen
    support = support_set(net, u)
    terms = {}

    def term(idx):
        if idx not in terms:
            mu, dmu = model.similarity_grad(net.tuple_view(idx))
            mu = float(spec.clamp(mu))
            hess = gen.phi_hess(mu)
            terms[idx] = (mu * hess * dmu, net.weight(idx) * hess * dmu)
        return terms[idx]

    total = np.zeros(model.q)
    p_j = 1.0 / len(support)
    for j in support:
        sl = Slice(net, u, j)
        members = sl.materialize()
        pos_idx, _ = sl.positives()
        if len(pos_idx) == 0:
            raise ValueError("oracle needs every slice to hold a positive")
        s_minus = sl.size / m_minus
        s_plus = len(pos_idx) / m_plus
        # each of the m- candidate draws is an independent uniform over the
        # slice, so the draw average equals the slice average, m- times
        neg_mean = np.mean([term(i)[0] for i in members], axis=0)
        pos_mean = np.mean([term(tuple(i))[1] for i in pos_idx], axis=0)
        g_j = s_minus * m_minus * neg_mean - eta * s_plus * m_plus * pos_mean
        total += p_j * g_j
    return total


def check_unbiasedness(seed=0, atol=1e-8):
    """E[minibatch gradient] equals alpha * full gradient on a small
    instance (U=2, v=1), by exhaustive enumeration."""
    planted = PlantedModel(SimilarityModel.create(
        "linear", p=2, K=2, U=2, link="sigmoid", seed=3), noise="bernoulli")
    net = generate(planted, n=6, U=2, index_policy="all-tuples", seed=seed)
    model = SimilarityModel.create("linear", p=2, K=2, U=2, link="sigmoid", seed=9)
    spec = LossSpec(make_generator("logistic"), model)
    expected = expected_minibatch_gradient(spec, net, (0,), m_plus=1, m_minus=2)
    support = support_set(net, (0,))
    # every slice of this dense instance has a positive, so no redraws occur
    alpha = (net.n ** 2) / len(support)
    target = alpha * full_gradient(spec, net)
    err = float(np.max(np.abs(expected - target)))
    return err <= atol, f"max abs deviation {err:.3e}"


CHECKS = [
    ("divergence-derivatives", check_divergence_derivatives),
    ("similarity-gradients", check_similarity_gradients),
    ("full-gradient", check_full_gradient),
    ("sampler-unbiasedness", check_unbiasedness),
]


def run_all(seed=0, out=print):
    ok = True
    for name, fn in CHECKS:
        passed, detail = fn(seed=seed)
        out(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok = ok and passed
    return ok
