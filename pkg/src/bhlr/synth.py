"""Synthetic hypernetworks with a planted ground-truth similarity.

Data vectors are drawn i.i.d. from a simple law, and each canonical index of
the chosen policy receives one conditionally independent weight draw given
its tuple, with mean mu*(tuple) from the planted model:

    bernoulli   w ~ Bernoulli(mu*)          needs mu* in [0, 1]
    poisson     w ~ Poisson(mu*)            needs mu* >= 0
    gaussian    w  = mu* + sigma * N(0, 1)

Drawing once per canonical index makes the weights symmetric by
construction.  Poisson variates come from plain CDF inversion (u uniform,
walk the mass function until the CDF passes u), which is portable across
RNG back ends as long as the uniforms match.

Also here: the constructions that turn a binary pairwise network into a
3-way hypernetwork (connected triple / triangle), and the test-time
protocol that pairs every positive tuple with per-anchor sampled
zero-weight tuples for ranking evaluation.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonBinaryWeights
from .hypernet import Hypernetwork, canonical_generation_indices, chunk_tuples
from .sampler import fixed_slice
from .simfn import SimilarityModel, link_range

NOISES = ("bernoulli", "poisson", "gaussian")
VECTOR_LAWS = ("uniform", "gaussian")


@dataclass
class PlantedModel:
    model: SimilarityModel
    noise: str = "gaussian"
    noise_sigma: float = 0.0
    vector_law: str = "uniform"

    def __post_init__(self):
        if self.noise not in NOISES:
            raise ConfigError(f"unknown noise {self.noise!r}")
        if self.vector_law not in VECTOR_LAWS:
            raise ConfigError(f"unknown vector law {self.vector_law!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        lo, hi = link_range(self.model.link)
        if self.noise == "bernoulli" and (lo < 0 or hi > 1):
            raise ConfigError("bernoulli noise needs a mean in [0, 1]; use a sigmoid link")
        if self.noise == "poisson" and lo < 0:
            raise ConfigError("poisson noise needs a non-negative mean")


def draw_vectors(law, n, p, rng):
    """i.i.d. data vectors: uniform on [0, 1)^p or standard normal."""
    if law == "uniform":
        return rng.random((n, p))
    if law == "gaussian":
        return rng.standard_normal((n, p))
    raise ConfigError(f"unknown vector law {law!r}")


def poisson_inversion(lam, rng):
    """Poisson draws by CDF inversion, vectorized over the mean array.

    Walks k = 0, 1, 2, ... accumulating the pmf until the CDF passes each
    entry's uniform variate; intended for small means.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0):
        raise ConfigError("poisson mean must be non-negative")
    if np.any(lam > 500):
        raise ConfigError("poisson inversion supports means up to 500")
    u = rng.random(lam.shape)
    pk = np.exp(-lam)
    cdf = pk.copy()
    k = np.zeros(lam.shape, dtype=np.int64)
    done = u <= cdf
    cap = int(lam.max() + 30.0 * math.sqrt(lam.max() + 1.0) + 100) if lam.size else 0
    kk = 0
    while not np.all(done):
        kk += 1
        if kk > cap:
            k[~done] = kk
            break
        pk = pk * (lam / kk)
        cdf = cdf + pk
        newly = ~done & (u <= cdf)
        k[newly] = kk
        done |= newly
    return k.astype(np.float64)


def generate(planted, n, U, index_policy="increasing", seed=0, batch_size=65536):
    """Draw a hypernetwork of n nodes from the planted model.

    One weight is drawn per canonical index of the policy; zero draws are
    left implicit, so sparse noise yields a sparse network.  Identical seeds
    reproduce identical networks bit-exactly.
    """
    if n < U:
        raise ConfigError(f"need n >= U, got n={n}, U={U}")
    if planted.model.U != U:
        raise ConfigError(f"planted model has U={planted.model.U}, requested {U}")
    rng = np.random.default_rng(seed)
    X = draw_vectors(planted.vector_law, n, planted.model.p, rng)
    fwd = planted.model.embed_batch(X)

    weights = {}
    indices = canonical_generation_indices(index_policy, n, U)
    for batch in chunk_tuples(indices, U, batch_size):
        mu = planted.model.similarity_batch(fwd, batch)
        if planted.noise == "bernoulli":
            if np.any(mu < 0) or np.any(mu > 1):
                raise ConfigError("bernoulli mean left [0, 1]")
            w = (rng.random(len(mu)) < mu).astype(np.float64)
        elif planted.noise == "poisson":
            w = poisson_inversion(mu, rng)
        else:
            w = mu + planted.noise_sigma * rng.standard_normal(len(mu))
        nz = np.nonzero(w)[0]
        for r in nz:
            weights[tuple(int(v) for v in batch[r])] = float(w[r])
    return Hypernetwork(X, U, weights, index_policy)


def lift_links_to_hyperlinks(net2, mode):
    """Turn a binary pairwise network into a 3-way one.

    connected        w(a,b,c) = 1 iff the induced 3-node subgraph is
                     connected (at least two of its three edges present)
    fully-connected  w(a,b,c) = 1 iff all three edges are present

    Self-loops are ignored and triples with repeated nodes are never
    produced; the result uses the increasing index policy.
    """
    if net2.U != 2:
        raise ConfigError(f"lift needs a U=2 network, got U={net2.U}")
    if mode not in ("connected", "fully-connected"):
        raise ConfigError(f"unknown lift mode {mode!r}")
    adj = {}
    edge_set = set()
    for (a, b), w in net2.weights.items():
        if w == 0.0:
            continue
        if w != 1.0:
            raise NonBinaryWeights(f"weight {w} at ({a}, {b}) is not binary")
        if a == b:
            continue
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
        edge_set.add((a, b))

    triples = set()
    for center, nbrs in adj.items():
        for a, b in itertools.combinations(sorted(nbrs), 2):
            if mode == "fully-connected" and (a, b) not in edge_set:
                continue
            triples.add(tuple(sorted((center, a, b))))
    weights3 = {t: 1.0 for t in triples}
    return Hypernetwork(net2.vectors, 3, weights3, "increasing")


def negative_candidate_protocol(net, per_anchor, seed=0):
    """Ranking-evaluation index list: every positive tuple, plus up to
    ``per_anchor`` distinct zero-weight tuples drawn uniformly from each
    anchor's slice (the tuples whose first entry is the anchor).  Anchors
    with fewer zero tuples than requested contribute all they have.
    """
    if per_anchor < 0:
        raise ConfigError("per_anchor must be non-negative")
    rng = np.random.default_rng(seed)
    out = [idx for idx, _ in sorted(net.positives())]
    for anchor in range(net.n):
        sl = fixed_slice(net, (0,), (anchor,))
        if sl.size == 0:
            continue
        n_pos = len(sl.positives()[0])
        n_zero = sl.size - n_pos
        want = min(per_anchor, n_zero)
        if want <= 0:
            continue
        if sl.size <= 200_000:
            zeros = [i for i in sl if net.weight(i) == 0.0]
            rows = rng.choice(len(zeros), size=want, replace=False)
            out.extend(zeros[r] for r in rows)
        else:
            seen = set()
            tries = 0
            while len(seen) < want and tries < 100 * per_anchor:
                tries += 1
                cand = tuple(int(v) for v in sl.sample(rng, 1)[0])
                if cand not in seen and net.weight(cand) == 0.0:
                    seen.add(cand)
            out.extend(sorted(seen))
    return out
