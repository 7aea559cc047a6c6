"""Entry-fixing minibatch sampling for hyper-relational index sets.

One draw proceeds in two steps.  With v >= 1 entry positions u fixed, a
value tuple j is drawn from the support set K_u (every j whose slice is
nonempty), selecting the slice

    I_u(j) = { i in I : i[u_1] = j_1, ..., i[u_v] = j_v },

which partitions the index set across j.  With v = 0 the slice is the whole
index set.  The positive part of the slice is P = { i in slice : w_i != 0 }.
The minibatch then takes m+ entries uniformly from P and m- entries
uniformly from the slice, both with replacement so each drawn entry has
inclusion probability exactly m/|set|, plus the scale coefficients

    s+ = |P| / m+,    s- = |slice| / m-,

which make the stochastic gradient an unbiased estimate of alpha times the
full objective gradient (alpha = |I|/|K_u| for v >= 1, |I| for v = 0).
Setting v = 1 at U = 2 recovers skip-gram-style negative sampling.

Slices are never materialized for the enumerating policies: sizes come from
counting, uniform draws from per-position sampling (rejection where needed),
and positive entries from an inverted node -> edge index.

Randomness comes from a numpy Generator (PCG64) seeded per run; one sampler
instance serves one training run and is not shared across threads.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, EmptyPositiveSlice, OutOfRange
from .hypernet import canonicalize, index_set_size
from .simfn import link_deriv, link_value

_MATERIALIZE_CAP = 4096      # small slices get materialized for exact draws
_EXHAUSTIVE_CAP = 10**7


@dataclass
class SamplerConfig:
    v: int
    m_plus: int
    m_minus: int
    u: Optional[tuple] = None
    j_distribution: str = "uniform"
    custom_weights: Optional[dict] = None
    seed: int = 0
    exhaustive: bool = False
    max_retries: int = 100

    def __post_init__(self):
        if self.v < 0:
            raise ConfigError("v must be >= 0")
        if self.v >= 1:
            if self.u is None:
                raise ConfigError("v >= 1 requires the fixed positions u")
            self.u = tuple(int(x) for x in self.u)
            if len(self.u) != self.v:
                raise ConfigError(f"u has {len(self.u)} positions but v={self.v}")
            if any(a >= b for a, b in zip(self.u, self.u[1:])):
                raise ConfigError("u must be strictly increasing")
        else:
            self.u = ()
        if self.m_plus < 1 or self.m_minus < 1:
            raise ConfigError("m_plus and m_minus must be positive")
        if self.j_distribution not in ("uniform", "custom"):
            raise ConfigError(f"unknown j distribution {self.j_distribution!r}")
        if self.j_distribution == "custom" and not self.custom_weights:
            raise ConfigError("custom j distribution needs custom_weights")


@dataclass
class Minibatch:
    """One realization of the sampling procedure."""

    positives: np.ndarray          # (m+, U) index rows
    candidates: np.ndarray         # (m-, U) index rows
    s_plus: float
    s_minus: float
    fixed_j: Optional[tuple] = None


class Slice:
    """The index subset with positions ``u`` fixed to values ``j``.

    ``u = ()`` denotes the whole index set (the v = 0 case).  Lazily
    enumerable; supports exact cardinality, uniform draws with replacement,
    and enumeration of its positive-weight members.
    """

    def __init__(self, net, u, j, members=None):
        u = tuple(int(x) for x in u)
        j = tuple(int(x) for x in j)
        if len(u) != len(j):
            raise ConfigError(f"u {u} and j {j} have different lengths")
        if any(not 0 <= p < net.U for p in u):
            raise OutOfRange(f"fixed positions {u} outside [0, {net.U})")
        for x in j:
            if not 0 <= x < net.n:
                raise OutOfRange(f"fixed value {x} outside [0, {net.n})")
        self.net = net
        self.u = u
        self.j = j
        self.free = tuple(p for p in range(net.U) if p not in u)
        self._members = members      # explicit policy, or a materialized cache
        self._pos = None
        self.size = self._count()

    # -- cardinality -------------------------------------------------------

    def _count(self):
        net, u, j = self.net, self.u, self.j
        policy = net.index_policy
        if policy == "explicit":
            if self._members is None:
                self._members = [
                    i for i in net.explicit_indices
                    if all(i[p] == x for p, x in zip(u, j))
                ]
            return len(self._members)
        if not u:
            return index_set_size(net)
        n, f = net.n, len(self.free)
        if policy == "all-tuples":
            return n ** f
        if policy == "distinct":
            if len(set(j)) != len(j):
                return 0
            return math.perm(n - len(j), f)
        # increasing: free positions fall into gaps between the fixed values
        gaps = self._gaps()
        if gaps is None:
            return 0
        total = 1
        for avail, count in gaps:
            total *= math.comb(avail, count)
        return total

    def _gaps(self):
        """For the increasing policy: (available values, slots) per gap
        between consecutive fixed entries, or None if j is infeasible."""
        u, j, n, U = self.u, self.j, self.net.n, self.net.U
        if any(a >= b for a, b in zip(j, j[1:])):
            return None
        bounds_pos = (-1,) + u + (U,)
        bounds_val = (-1,) + j + (n,)
        gaps = []
        for g in range(len(u) + 1):
            slots = bounds_pos[g + 1] - bounds_pos[g] - 1
            avail = bounds_val[g + 1] - bounds_val[g] - 1
            if slots > avail:
                return None
            gaps.append((avail, slots))
        return gaps

    # -- enumeration ---------------------------------------------------------

    def __iter__(self):
        net, u, j = self.net, self.u, self.j
        policy = net.index_policy
        if policy == "explicit" or self._members is not None:
            return iter(self._members)
        n, U = net.n, net.U
        if policy == "increasing":
            gaps = self._gaps()
            if gaps is None:
                return iter(())
            bounds_val = (-1,) + j + (n,)
            pools = [
                itertools.combinations(range(bounds_val[g] + 1, bounds_val[g + 1]), c)
                for g, (_, c) in enumerate(gaps)
            ]

            def gen_incr():
                for parts in itertools.product(*pools):
                    free_vals = [x for part in parts for x in part]
                    yield self._merge(free_vals)
            return gen_incr()

        def gen_flat():
            if policy == "all-tuples":
                free_iter = itertools.product(range(n), repeat=len(self.free))
            else:  # distinct
                if len(set(j)) != len(j):
                    return
                rest = [x for x in range(n) if x not in set(j)]
                free_iter = itertools.permutations(rest, len(self.free))
            for free_vals in free_iter:
                yield self._merge(free_vals)
        return gen_flat()

    def _merge(self, free_vals):
        out = [0] * self.net.U
        for p, x in zip(self.u, self.j):
            out[p] = x
        for p, x in zip(self.free, free_vals):
            out[p] = int(x)
        return tuple(out)

    def contains(self, index):
        index = tuple(int(x) for x in index)
        if len(index) != self.net.U:
            return False
        if any(index[p] != x for p, x in zip(self.u, self.j)):
            return False
        policy = self.net.index_policy
        if policy == "all-tuples":
            return all(0 <= x < self.net.n for x in index)
        if policy == "distinct":
            return len(set(index)) == len(index) and all(
                0 <= x < self.net.n for x in index)
        if policy == "increasing":
            return all(a < b for a, b in zip(index, index[1:])) and all(
                0 <= x < self.net.n for x in index)
        return index in set(self._members)

    # -- uniform draws -------------------------------------------------------

    def materialize(self):
        if self._members is None:
            self._members = list(self)
        return self._members

    def sample(self, rng, m):
        """m members uniformly at random, with replacement; (m, U) array."""
        if self.size == 0:
            raise EmptyPositiveSlice("cannot sample from an empty slice")
        net = self.net
        policy = net.index_policy
        if self._members is not None or policy == "explicit" \
                or self.size <= _MATERIALIZE_CAP:
            members = self.materialize()
            rows = rng.integers(0, len(members), size=m)
            return np.asarray([members[r] for r in rows], dtype=np.int64)

        out = np.empty((m, net.U), dtype=np.int64)
        for p, x in zip(self.u, self.j):
            out[:, p] = x
        f = len(self.free)
        if policy == "all-tuples":
            out[:, self.free] = rng.integers(0, net.n, size=(m, f))
            return out
        if policy == "distinct":
            jset = set(self.j)
            for r in range(m):
                while True:
                    draw = rng.integers(0, net.n, size=f)
                    if len(set(draw)) == f and not (set(draw.tolist()) & jset):
                        out[r, self.free] = draw
                        break
            return out
        # increasing: choose each gap's combination independently
        gaps = self._gaps()
        bounds_val = (-1,) + self.j + (self.net.n,)
        for r in range(m):
            free_vals = []
            for g, (avail, c) in enumerate(gaps):
                base = bounds_val[g] + 1
                if c == 0:
                    continue
                if c == 1:
                    free_vals.append(base + int(rng.integers(0, avail)))
                else:
                    picks = np.sort(rng.choice(avail, size=c, replace=False))
                    free_vals.extend((base + picks).tolist())
            out[r, self.free] = free_vals
        return out

    # -- positives -------------------------------------------------------------

    def positives(self):
        """(indices, weights) of slice members with nonzero weight."""
        if self._pos is not None:
            return self._pos
        net = self.net
        rows, weights = [], []
        if net.index_policy == "explicit":
            for i in self.materialize():
                w = net.weight(i)
                if w != 0.0:
                    rows.append(i)
                    weights.append(w)
        else:
            jc = Counter(self.j)
            if self.j:
                candidates = net.node_edges().get(self.j[0], ())
            else:
                candidates = [e for e, w in net.weights.items() if w != 0.0]
            for edge in candidates:
                w = net.weights.get(edge, 0.0)
                if w == 0.0:
                    continue
                ec = Counter(edge)
                if any(ec[x] < c for x, c in jc.items()):
                    continue
                for arr in self._arrangements(edge, ec, jc):
                    rows.append(arr)
                    weights.append(w)
        idx = (np.asarray(rows, dtype=np.int64) if rows
               else np.zeros((0, net.U), dtype=np.int64))
        self._pos = (idx, np.asarray(weights, dtype=np.float64))
        return self._pos

    def _arrangements(self, edge, edge_counts, j_counts):
        """Members of the slice that carry ``edge``'s weight: the distinct
        permutations of its multiset admitted by the policy, with the fixed
        positions already pinned to j."""
        policy = self.net.index_policy
        distinct = len(edge_counts) == len(edge)
        if policy == "increasing":
            if distinct and all(edge[p] == x for p, x in zip(self.u, self.j)):
                yield edge
            return
        if policy == "distinct" and not distinct:
            return
        remaining = list((edge_counts - j_counts).elements())
        for perm in set(itertools.permutations(remaining)):
            yield self._merge(perm)


def fixed_slice(net, u, j):
    """The slice of the index set with positions u fixed to values j."""
    return Slice(net, u, j)


def support_set(net, u):
    """All j with a nonempty slice, in sorted order.

    For the enumerating policies this is computed from counting rules, for
    the explicit policy from one scan of the index list.
    """
    u = tuple(int(x) for x in u)
    if not u:
        return [()]
    v = len(u)
    n = net.n
    if net.index_policy == "explicit":
        seen = sorted({tuple(i[p] for p in u) for i in net.explicit_indices})
        return seen
    if net.index_policy == "all-tuples":
        return list(itertools.product(range(n), repeat=v))
    if net.index_policy == "distinct":
        if net.n < net.U:
            return []
        return list(itertools.permutations(range(n), v))
    out = []
    for j in itertools.combinations(range(n), v):
        if Slice(net, u, j).size > 0:
            out.append(j)
    return out


class MinibatchSampler:
    """Stateful sampler bound to one network, config and RNG stream."""

    def __init__(self, net, cfg):
        if cfg.v > net.U - 1:
            raise ConfigError(f"v={cfg.v} must be <= U-1 = {net.U - 1}")
        if cfg.u and any(p >= net.U for p in cfg.u):
            raise ConfigError(f"fixed positions {cfg.u} outside [0, {net.U})")
        self.net = net
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self._slices = {}
        if cfg.v >= 1:
            self.support = support_set(net, cfg.u)
            if not self.support:
                raise ConfigError("empty support set: no nonempty slice exists")
            if cfg.j_distribution == "custom":
                kset = set(self.support)
                for j in cfg.custom_weights:
                    if tuple(j) not in kset:
                        raise ConfigError(f"custom weight for {j} outside the support set")
                probs = np.asarray(
                    [float(cfg.custom_weights.get(j, 0.0)) for j in self.support])
                if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0, atol=1e-9):
                    raise ConfigError("custom weights must form a probability vector")
                self.probs = probs
            else:
                self.probs = None
        else:
            self.support = [()]
            self.probs = None

    def _slice(self, j):
        sl = self._slices.get(j)
        if sl is None:
            sl = Slice(self.net, self.cfg.u, j)
            self._slices[j] = sl
        return sl

    def _draw_j(self):
        if self.cfg.v == 0:
            return ()
        if self.probs is None:
            return self.support[int(self.rng.integers(0, len(self.support)))]
        return self.support[int(self.rng.choice(len(self.support), p=self.probs))]

    def draw(self):
        """Run the two-step procedure once and return the minibatch.

        A slice with no positive entry is retried with a fresh j up to
        ``max_retries`` times, then EmptyPositiveSlice is raised.
        """
        cfg = self.cfg
        for _ in range(max(1, cfg.max_retries)):
            j = self._draw_j()
            sl = self._slice(j)
            pos_idx, pos_w = sl.positives()
            if len(pos_idx) == 0:
                if cfg.v == 0:
                    break    # the whole index set has no positives; retrying cannot help
                continue
            fixed = j if cfg.v >= 1 else None
            if cfg.exhaustive:
                if sl.size > _EXHAUSTIVE_CAP:
                    raise ConfigError("slice too large for exhaustive mode")
                cands = np.asarray(sl.materialize(), dtype=np.int64)
                return Minibatch(pos_idx.copy(), cands, 1.0, 1.0, fixed)
            rows = self.rng.integers(0, len(pos_idx), size=cfg.m_plus)
            positives = pos_idx[rows]
            candidates = sl.sample(self.rng, cfg.m_minus)
            return Minibatch(
                positives, candidates,
                s_plus=len(pos_idx) / cfg.m_plus,
                s_minus=sl.size / cfg.m_minus,
                fixed_j=fixed,
            )
        raise EmptyPositiveSlice(
            f"no positive entries found in {cfg.max_retries} slice draws")


def stochastic_gradient(spec, net, mb, eta_scale=None):
    """The minibatch estimate of the scaled objective gradient:

        s- * sum_candidates mu phi''(mu) dmu  -  eta * s+ * sum_positives w phi''(mu) dmu.

    Only the nodes referenced by the minibatch are embedded.
    """
    eta = spec.eta_scale if eta_scale is None else eta_scale
    gen, model = spec.gen, spec.model
    rows = np.concatenate([mb.candidates, mb.positives], axis=0)
    nodes, local = np.unique(rows, return_inverse=True)
    local = local.reshape(rows.shape)
    fwd = model.embed_batch(net.vectors[nodes])
    R = np.zeros_like(fwd.Y)

    mcand = len(mb.candidates)
    s = model.inner_scores(fwd, local[:mcand])
    mu = spec.clamp(link_value(model.link, s))
    coefs = mb.s_minus * mu * gen._hess_raw(mu) * link_deriv(model.link, s)
    model.accumulate_inner_grad(fwd, local[:mcand], coefs, R)

    if len(mb.positives):
        w = np.asarray([net.weight(i) for i in mb.positives])
        s = model.inner_scores(fwd, local[mcand:])
        mu = spec.clamp(link_value(model.link, s))
        coefs = -eta * mb.s_plus * w * gen._hess_raw(mu) * link_deriv(model.link, s)
        model.accumulate_inner_grad(fwd, local[mcand:], coefs, R)

    return model.embed_backward(fwd, R)
