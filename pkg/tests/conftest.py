"""Shared test helpers: finite differences and small random instances."""

import numpy as np
import pytest

from bhlr import LossSpec, PlantedModel, SimilarityModel, generate
from bhlr.divergence import make_generator

ALL_KEYS = ["logistic", "kl", "beta:0.5", "itakura-saito", "inverse",
            "quadratic", "exponential", "dual-logistic"]


def fd_gradient(f, theta, h=1e-6):
    """Central finite differences of a scalar function of a flat vector."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        step = h * max(1.0, abs(theta[i]))
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * step)
    return g


def interior_points(gen, rng, m, span=4.0, margin=0.05):
    """Random points strictly inside dom(phi), kept away from boundaries."""
    lo = max(gen.lo, -span) + margin
    hi = min(gen.hi, span) - margin
    return rng.uniform(lo, hi, size=m)


def random_net(n=6, U=2, policy="increasing", seed=0, p=3, binary=True):
    """A small random hypernetwork with sigmoid-planted weights."""
    true = SimilarityModel.create("linear", p=p, K=2, U=U, link="sigmoid",
                                  seed=seed + 100)
    noise = "bernoulli" if binary else "gaussian"
    planted = PlantedModel(true, noise=noise, noise_sigma=0.0 if binary else 0.3,
                           vector_law="gaussian")
    return generate(planted, n, U, index_policy=policy, seed=seed)


def compatible_spec(key, model_kind="linear", U=2, p=3, K=2, H=4, seed=0,
                    eta=1.0, epsilon=None):
    """A LossSpec whose link range fits the generator's domain."""
    gen = make_generator(key, epsilon=epsilon)
    link = {"logistic": "sigmoid"}.get(gen.kind, None)
    if link is None:
        link = "exp" if gen.lo == 0.0 else "identity"
    model = SimilarityModel.create(model_kind, p=p, K=K, U=U, link=link,
                                   H=H, seed=seed)
    if model_kind == "mlp1":
        rng = np.random.default_rng(seed + 1)
        model.theta = model.theta + 0.05 * rng.standard_normal(model.q)
    return LossSpec(gen, model, eta_scale=eta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
