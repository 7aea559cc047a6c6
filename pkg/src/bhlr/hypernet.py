"""Attributed hypernetworks: data vectors plus symmetric hyperlink weights.

A hypernetwork holds n data vectors (rows of an n x p matrix) and a sparse
map from U-node index tuples to real weights.  Weights are symmetric under
permutation of the index, so they are stored once under the canonical
(non-decreasing) ordering and any permutation looks up the same value.
Missing indices weigh 0 under the enumerating policies; under the explicit
policy only listed indices take part in a loss at all.

Node ids are 0-based everywhere (files and APIs).

Index policies (which tuples enter a loss):

    all-tuples   every i in [n]^U
    distinct     tuples whose entries are pairwise distinct
    increasing   strictly increasing tuples i1 < i2 < ... < iU
    explicit     a user-supplied list of tuples

File formats:

    vectors file   one node per line: p whitespace-separated floats;
                   the line number is the node id
    hyperedge file one edge per line: U 0-based ids then one float weight;
                   lines starting with '#' are skipped
"""

import itertools
import json
import math
from collections import Counter

import numpy as np

from .errors import (
    ConfigError,
    DuplicateEdge,
    OutOfRange,
    ParseError,
    ShapeError,
)

POLICIES = ("all-tuples", "distinct", "increasing", "explicit")


def canonicalize(index, n=None):
    """Sort an index tuple into non-decreasing order; idempotent.

    Raises OutOfRange when ``n`` is given and an entry falls outside [0, n).
    """
    idx = tuple(int(v) for v in index)
    if n is not None:
        for v in idx:
            if not 0 <= v < n:
                raise OutOfRange(f"node id {v} outside [0, {n})")
    elif any(v < 0 for v in idx):
        raise OutOfRange(f"negative node id in {idx}")
    return tuple(sorted(idx))


class TupleView:
    """An index together with views of its member data vectors."""

    __slots__ = ("index", "vectors")

    def __init__(self, index, vectors):
        self.index = tuple(index)
        self.vectors = vectors

    def __len__(self):
        return len(self.index)


class Hypernetwork:
    """Immutable-after-construction container for vectors and hyperlinks."""

    def __init__(self, vectors, U, weights=None, index_policy="increasing",
                 explicit_indices=None):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ShapeError("vectors must be an n x p matrix")
        if index_policy not in POLICIES:
            raise ConfigError(f"unknown index policy {index_policy!r}")
        self.vectors = vectors
        self.U = int(U)
        if self.U < 1:
            raise ConfigError("tuple order U must be >= 1")
        self.index_policy = index_policy
        n = vectors.shape[0]

        self.weights = {}
        for idx, w in (weights or {}).items():
            c = canonicalize(idx, n)
            if c in self.weights and self.weights[c] != float(w):
                raise DuplicateEdge(f"conflicting weights at {c}", index=c)
            self.weights[c] = float(w)

        if index_policy == "explicit":
            if explicit_indices is None:
                raise ConfigError("explicit policy requires explicit_indices")
            checked = []
            for idx in explicit_indices:
                t = tuple(int(v) for v in idx)
                if len(t) != self.U:
                    raise ShapeError(f"explicit index {t} has arity != {self.U}")
                for v in t:
                    if not 0 <= v < n:
                        raise OutOfRange(f"node id {v} outside [0, {n})")
                checked.append(t)
            self.explicit_indices = checked
        else:
            if explicit_indices is not None:
                raise ConfigError("explicit_indices only valid for the explicit policy")
            self.explicit_indices = None
        self._node_index = None

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def p(self):
        return self.vectors.shape[1]

    def weight(self, index):
        """Weight of a (possibly unsorted) index; any permutation of a stored
        index returns the same value, missing indices return 0."""
        return self.weights.get(canonicalize(index, self.n), 0.0)

    def tuple_view(self, index):
        idx = tuple(int(v) for v in index)
        for v in idx:
            if not 0 <= v < self.n:
                raise OutOfRange(f"node id {v} outside [0, {self.n})")
        return TupleView(idx, [self.vectors[v] for v in idx])

    def positives(self):
        """Stored (canonical_index, weight) pairs with nonzero weight."""
        return [(idx, w) for idx, w in self.weights.items() if w != 0.0]

    def node_edges(self):
        """Inverted index: node id -> list of stored canonical edges
        containing it (computed once, cached)."""
        if self._node_index is None:
            node_index = {}
            for idx in self.weights:
                for v in set(idx):
                    node_index.setdefault(v, []).append(idx)
            self._node_index = node_index
        return self._node_index

    def with_policy(self, index_policy, explicit_indices=None):
        """A shallow re-view of the same data under another index policy."""
        return Hypernetwork(self.vectors, self.U, self.weights,
                            index_policy, explicit_indices)


def arrangement_count(canonical, policy, U):
    """Number of members of the policy's index set that canonicalize to
    ``canonical`` (its distinct permutations admitted by the policy)."""
    counts = Counter(canonical)
    distinct = len(counts) == len(canonical)
    if policy == "increasing":
        return 1 if distinct else 0
    if policy == "distinct":
        return math.factorial(U) if distinct else 0
    if policy == "all-tuples":
        m = math.factorial(U)
        for c in counts.values():
            m //= math.factorial(c)
        return m
    raise ConfigError(f"arrangement_count undefined for policy {policy!r}")


def positive_terms(net):
    """Yield (canonical_index, weight, multiplicity) for every stored edge,
    where multiplicity counts how many indices of the policy's set carry that
    weight.  Multiplicity-0 edges (outside the index set) are skipped."""
    if net.index_policy == "explicit":
        counts = Counter(canonicalize(i) for i in net.explicit_indices)
        for idx, w in net.weights.items():
            if w != 0.0 and counts.get(idx, 0):
                yield idx, w, counts[idx]
        return
    for idx, w in net.weights.items():
        if w == 0.0:
            continue
        m = arrangement_count(idx, net.index_policy, net.U)
        if m:
            yield idx, w, m


def index_set_size(net):
    """Cardinality of the policy's index set."""
    n, U = net.n, net.U
    policy = net.index_policy
    if policy == "all-tuples":
        return n ** U
    if policy == "distinct":
        return math.perm(n, U)
    if policy == "increasing":
        return math.comb(n, U)
    return len(net.explicit_indices)


def enumerate_index_set(net, policy=None):
    """Lazily yield every index tuple of the policy's set."""
    policy = policy or net.index_policy
    n, U = net.n, net.U
    if policy == "all-tuples":
        return itertools.product(range(n), repeat=U)
    if policy == "distinct":
        return itertools.permutations(range(n), U)
    if policy == "increasing":
        return itertools.combinations(range(n), U)
    if policy == "explicit":
        if net.explicit_indices is None:
            raise ConfigError("network has no explicit index list")
        return iter(net.explicit_indices)
    raise ConfigError(f"unknown index policy {policy!r}")


def chunk_tuples(iterator, U, batch_size=65536):
    """Chunk an iterator of U-tuples into int arrays of shape (B, U)."""
    while True:
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(iterator, batch_size)),
            dtype=np.int64,
        )
        if flat.size == 0:
            return
        yield flat.reshape(-1, U)


def iter_index_batches(net, batch_size=65536):
    """Yield the index set as int arrays of shape (B, U), B <= batch_size."""
    return chunk_tuples(enumerate_index_set(net), net.U, batch_size)


def canonical_generation_indices(net_or_policy, n=None, U=None):
    """Canonical representatives of the policy's index set (one per weight to
    draw when generating data): non-decreasing tuples for all-tuples,
    strictly increasing ones otherwise."""
    policy = getattr(net_or_policy, "index_policy", net_or_policy)
    n = n if n is not None else net_or_policy.n
    U = U if U is not None else net_or_policy.U
    if policy == "all-tuples":
        return itertools.combinations_with_replacement(range(n), U)
    if policy in ("distinct", "increasing"):
        return itertools.combinations(range(n), U)
    raise ConfigError(f"cannot enumerate canonical indices for policy {policy!r}")


# -- file I/O ---------------------------------------------------------------

def load_vectors(path):
    """Read a vectors file into an n x p float64 matrix."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                raise ParseError(f"{path}:{lineno}: blank line in vectors file",
                                 line=lineno)
            try:
                row = [float(v) for v in parts]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: cannot parse float", line=lineno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"{path}:{lineno}: expected {width} values, got {len(row)}",
                    line=lineno,
                )
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty vectors file", line=1)
    return np.asarray(rows, dtype=np.float64)


def load_hyperedges(path, U, n=None):
    """Read a hyperedge file into a canonical weight map.

    Two lines mapping to the same canonical index raise DuplicateEdge, so a
    file cannot silently encode an asymmetric weight.
    """
    weights = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != U + 1:
                raise ParseError(
                    f"{path}:{lineno}: expected {U} ids and a weight",
                    line=lineno,
                )
            try:
                ids = [int(v) for v in parts[:U]]
                w = float(parts[U])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: cannot parse edge", line=lineno)
            c = canonicalize(ids, n)
            if c in weights:
                raise DuplicateEdge(
                    f"{path}:{lineno}: duplicate hyperedge {c}", index=c
                )
            weights[c] = w
    return weights


def write_vectors(path, vectors):
    vectors = np.asarray(vectors, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in vectors:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def write_hyperedges(path, weights):
    with open(path, "w", encoding="utf-8") as fh:
        for idx in sorted(weights):
            w = weights[idx]
            fh.write(" ".join(str(v) for v in idx) + f" {w!r}\n")


def load_tensor_file(path):
    """Read a JSON tensor file {"shape": [...], "values": row-major flat}."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        shape = [int(v) for v in obj["shape"]]
        values = np.asarray(obj["values"], dtype=np.float64)
    except (KeyError, TypeError, ValueError):
        raise ParseError(f"{path}: expected keys 'shape' and 'values'")
    return values, shape


# -- tensor reduction --------------------------------------------------------

def from_tensor(values, shape=None):
    """Reduce a dense U-way tensor to a hypernetwork.

    Axis u of the tensor becomes a block of n_u fresh nodes with one-hot data
    vectors; cell j of the tensor becomes the weight at the index whose u-th
    entry is j_u plus the offset of block u.  The resulting explicit index
    set is exactly the image of the cell grid, zeros included, so fitting the
    network fits every tensor cell.
    """
    values = np.asarray(values, dtype=np.float64)
    if shape is None:
        shape = list(values.shape)
    shape = [int(s) for s in shape]
    if any(s < 1 for s in shape):
        raise ShapeError(f"invalid tensor shape {shape}")
    cells = math.prod(shape)
    if values.size != cells:
        raise ShapeError(f"{values.size} values for shape {shape} ({cells} cells)")
    if cells > 10**7:
        raise ShapeError("tensor too large to densify into a hypernetwork")
    if not np.all(np.isfinite(values)):
        raise ShapeError("tensor entries must be finite")
    values = values.reshape(shape)

    U = len(shape)
    offsets = np.concatenate([[0], np.cumsum(shape[:-1])]).astype(int)
    N = int(np.sum(shape))
    weights = {}
    explicit = []
    for j in itertools.product(*(range(s) for s in shape)):
        idx = tuple(int(offsets[u] + j[u]) for u in range(U))
        explicit.append(idx)
        v = float(values[j])
        if v != 0.0:
            weights[idx] = v
    return Hypernetwork(np.eye(N), U, weights, "explicit", explicit)
