"""Symmetric similarity models over U-tuples of data vectors.

A model maps a tuple (x_1, ..., x_U) to

    mu(tuple) = link( sum_k  prod_u  f(x_u)[k] ),

where f is a shared embedding (a linear map or a one-hidden-layer ReLU
perceptron) into R^K, the inner reduction is the U-way inner product, and
the link maps the score into the weight space (identity, sigmoid, or exp).
Because f is shared and the reduction is permutation-invariant, mu is
symmetric in the tuple; tuples indexed by node ids are evaluated in sorted
id order so the symmetry holds bit-exactly.

All parameters live in one flat vector ``theta`` so optimizers stay
model-agnostic.  Layout:

    linear  W (p x K), row-major
    mlp1    W1 (H x p) row-major, b1 (H,), W2 (K x H) row-major, b2 (K,)

Checkpoints are JSON objects {"kind", "p", "K", "H", "link", "U", "theta"};
floats serialize via shortest-repr decimals, so a save/load round trip is
exact.
"""

import json

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DimMismatch

LINKS = ("identity", "sigmoid", "exp")
KINDS = ("linear", "mlp1")


def link_value(kind, s):
    if kind == "identity":
        return np.asarray(s, dtype=np.float64)
    if kind == "sigmoid":
        return expit(s)
    if kind == "exp":
        return np.exp(s)
    raise ConfigError(f"unknown link {kind!r}")


def link_deriv(kind, s):
    if kind == "identity":
        return np.ones_like(np.asarray(s, dtype=np.float64))
    if kind == "sigmoid":
        v = expit(s)
        return v * (1.0 - v)
    if kind == "exp":
        return np.exp(s)
    raise ConfigError(f"unknown link {kind!r}")


def link_range(kind):
    """Open interval containing every output of the link."""
    if kind == "identity":
        return (-np.inf, np.inf)
    if kind == "sigmoid":
        return (0.0, 1.0)
    if kind == "exp":
        return (0.0, np.inf)
    raise ConfigError(f"unknown link {kind!r}")


def multiway_inner(ys):
    """U-way inner product: sum_k of the product of the k-th coordinates.

    Reduces to the ordinary inner product at U = 2 and to the coordinate sum
    at U = 1.
    """
    ys = [np.asarray(y, dtype=np.float64) for y in ys]
    if not ys:
        raise DimMismatch("need at least one vector")
    K = ys[0].shape[-1]
    for y in ys:
        if y.shape != ys[0].shape:
            raise DimMismatch(f"vector shapes differ: {y.shape} vs {ys[0].shape}")
    del K
    prod = ys[0].copy()
    for y in ys[1:]:
        prod *= y
    return float(np.sum(prod)) if prod.ndim == 1 else prod.sum(axis=-1)


class Forward:
    """Cached forward pass of the embedding over a node matrix."""

    __slots__ = ("X", "Y", "A1", "H1")

    def __init__(self, X, Y, A1=None, H1=None):
        self.X = X
        self.Y = Y
        self.A1 = A1   # mlp1 pre-activations
        self.H1 = H1   # mlp1 hidden activations


class SimilarityModel:

    def __init__(self, kind, p, K, U, link="identity", H=None, theta=None):
        if kind not in KINDS:
            raise ConfigError(f"unknown model kind {kind!r}")
        if link not in LINKS:
            raise ConfigError(f"unknown link {link!r}")
        if K < 1 or p < 1 or U < 1:
            raise ConfigError("p, K and U must all be >= 1")
        if kind == "mlp1":
            if H is None or H < 1:
                raise ConfigError("mlp1 needs a hidden width H >= 1")
            H = int(H)
        else:
            H = None
        self.kind = kind
        self.p = int(p)
        self.K = int(K)
        self.H = H
        self.U = int(U)
        self.link = link
        if theta is None:
            theta = np.zeros(self.q)
        theta = np.asarray(theta, dtype=np.float64).ravel()
        if theta.size != self.q:
            raise ConfigError(f"theta has {theta.size} entries, expected {self.q}")
        self.theta = theta

    @property
    def q(self):
        if self.kind == "linear":
            return self.p * self.K
        return self.H * self.p + self.H + self.K * self.H + self.K

    @classmethod
    def create(cls, kind, p, K, U, link="identity", H=None, seed=0, scale=1.0):
        """Build a model with Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights
        and zero biases, optionally scaled."""
        model = cls(kind, p, K, U, link=link, H=H)
        rng = np.random.default_rng(seed)
        if kind == "linear":
            bound = 1.0 / np.sqrt(p)
            theta = rng.uniform(-bound, bound, size=model.q)
        else:
            Hn = model.H
            w1 = rng.uniform(-1 / np.sqrt(p), 1 / np.sqrt(p), size=Hn * p)
            w2 = rng.uniform(-1 / np.sqrt(Hn), 1 / np.sqrt(Hn), size=K * Hn)
            theta = np.concatenate([w1, np.zeros(Hn), w2, np.zeros(K)])
        model.theta = scale * theta
        return model

    # -- parameter views ---------------------------------------------------

    def _linear_W(self):
        return self.theta.reshape(self.p, self.K)

    def _mlp_parts(self):
        H, p, K = self.H, self.p, self.K
        o1 = H * p
        o2 = o1 + H
        o3 = o2 + K * H
        t = self.theta
        return (t[:o1].reshape(H, p), t[o1:o2], t[o2:o3].reshape(K, H), t[o3:])

    # -- embedding ---------------------------------------------------------

    def embed(self, x):
        """f(x) in R^K for a single p-vector."""
        return self.embed_batch(np.asarray(x, dtype=np.float64)[None, :]).Y[0]

    def embed_batch(self, X):
        """Forward pass over the rows of X (m x p); caches what the backward
        pass needs."""
        X = np.asarray(X, dtype=np.float64)
        if self.kind == "linear":
            return Forward(X, X @ self._linear_W())
        W1, b1, W2, b2 = self._mlp_parts()
        A1 = X @ W1.T + b1
        H1 = np.maximum(A1, 0.0)
        return Forward(X, H1 @ W2.T + b2, A1=A1, H1=H1)

    def embed_jacobian(self, x):
        """Dense K x q jacobian of f(x) with respect to theta.

        ReLU subgradient at exactly 0 is taken as 0.
        """
        x = np.asarray(x, dtype=np.float64)
        K, q = self.K, self.q
        J = np.zeros((K, q))
        if self.kind == "linear":
            for k in range(K):
                J[k, k::K] = x            # dW[j,k] slot sits at j*K + k
            return J
        W1, b1, W2, b2 = self._mlp_parts()
        H, p = self.H, self.p
        a1 = W1 @ x + b1
        act = (a1 > 0).astype(np.float64)
        h = np.maximum(a1, 0.0)
        o1 = H * p
        o2 = o1 + H
        o3 = o2 + K * H
        # dW1[h, j] = W2[k, h] * act[h] * x[j], flattened row-major
        for k in range(K):
            J[k, :o1] = ((W2[k] * act)[:, None] * x[None, :]).ravel()
            J[k, o1:o2] = W2[k] * act
            J[k, o2 + k * H:o2 + (k + 1) * H] = h
            J[k, o3 + k] = 1.0
        return J

    def embed_backward(self, fwd, R):
        """Gradient of sum_r <R[r], f(X[r])> with respect to theta, given the
        forward cache and the cotangent matrix R (m x K)."""
        if self.kind == "linear":
            return (fwd.X.T @ R).ravel()
        W1, b1, W2, b2 = self._mlp_parts()
        gW2 = R.T @ fwd.H1
        gb2 = R.sum(axis=0)
        G1 = (R @ W2) * (fwd.A1 > 0)
        gW1 = G1.T @ fwd.X
        gb1 = G1.sum(axis=0)
        return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])

    # -- tuple scoring -----------------------------------------------------

    def inner_scores(self, fwd, indices):
        """Pre-link scores of index tuples: s_b = <Y[i_1], ..., Y[i_U]>."""
        Yb = fwd.Y[indices]                      # (B, U, K)
        return np.prod(Yb, axis=1).sum(axis=1)

    def similarity_batch(self, fwd, indices):
        return link_value(self.link, self.inner_scores(fwd, indices))

    def accumulate_inner_grad(self, fwd, indices, coefs, R):
        """Add sum_b coefs[b] * d s_b / d Y into the cotangent matrix R,
        via prefix/suffix leave-one-out products over tuple positions."""
        indices = np.asarray(indices)
        B, U = indices.shape
        K = self.K
        Yb = fwd.Y[indices]                      # (B, U, K)
        prefix = np.ones((B, U + 1, K))
        for u in range(U):
            prefix[:, u + 1] = prefix[:, u] * Yb[:, u]
        suffix = np.ones((B, U + 1, K))
        for u in range(U - 1, -1, -1):
            suffix[:, u] = suffix[:, u + 1] * Yb[:, u]
        c = np.asarray(coefs, dtype=np.float64)[:, None]
        for u in range(U):
            np.add.at(R, indices[:, u], c * prefix[:, u] * suffix[:, u + 1])

    def inner_grad_sum(self, fwd, indices, coefs):
        """sum_b coefs[b] * d s_b / d theta through the shared embedding."""
        R = np.zeros_like(fwd.Y)
        self.accumulate_inner_grad(fwd, indices, coefs, R)
        return self.embed_backward(fwd, R)

    # -- single-tuple API ----------------------------------------------------

    def _tuple_rows(self, tup):
        """Rows of a tuple in canonical (sorted node id) order, so evaluation
        is bitwise identical across permutations of the same tuple."""
        if hasattr(tup, "index"):
            order = np.argsort(tup.index, kind="stable")
            return np.asarray([tup.vectors[o] for o in order], dtype=np.float64)
        return np.asarray(tup, dtype=np.float64)

    def similarity(self, tup):
        """mu(tuple) for a TupleView or a raw (U x p) array."""
        X = self._tuple_rows(tup)
        if X.shape[0] != self.U:
            raise DimMismatch(f"tuple arity {X.shape[0]} != model U {self.U}")
        fwd = self.embed_batch(X)
        s = multiway_inner(list(fwd.Y))
        return float(link_value(self.link, s))

    def similarity_grad(self, tup):
        """(mu, d mu / d theta) for one tuple."""
        X = self._tuple_rows(tup)
        if X.shape[0] != self.U:
            raise DimMismatch(f"tuple arity {X.shape[0]} != model U {self.U}")
        fwd = self.embed_batch(X)
        s = multiway_inner(list(fwd.Y))
        mu = float(link_value(self.link, s))
        coef = float(link_deriv(self.link, s))
        idx = np.arange(self.U, dtype=np.int64)[None, :]
        grad = self.inner_grad_sum(fwd, idx, np.array([coef]))
        return mu, grad

    def similarity_fresh(self, tuples):
        """mu for raw tuples, shape (B, U, p); used on freshly drawn vectors."""
        T = np.asarray(tuples, dtype=np.float64)
        B, U, p = T.shape
        fwd = self.embed_batch(T.reshape(B * U, p))
        idx = np.arange(B * U, dtype=np.int64).reshape(B, U)
        return self.similarity_batch(fwd, idx)

    # -- persistence ---------------------------------------------------------

    def save(self, path):
        obj = {
            "kind": self.kind,
            "p": self.p,
            "K": self.K,
            "H": self.H,
            "link": self.link,
            "U": self.U,
            "theta": [float(v) for v in self.theta],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            obj["kind"], obj["p"], obj["K"], obj.get("U", 2),
            link=obj["link"], H=obj.get("H"),
            theta=np.asarray(obj["theta"], dtype=np.float64),
        )
