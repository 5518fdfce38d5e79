"""Sparse containers for undirected signed networks and block assignments.

Dyads take values in {-1, 0, +1}; the zero value ("no edge") is never stored.
Edges live in a sorted edge list with a per-node adjacency index, so all
whole-network operations stay O(E) and dense N x N matrices are only
materialised for small node sets (within-block computations).

Node ids are 1-based in files and 0-based everywhere in memory, and the same
convention applies to block labels.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

# Dense signed matrices are a within-block convenience only; refuse to build
# them above this size so whole-network code paths stay sparse.
DENSE_NODE_LIMIT = 1000


class NetworkFormatError(ValueError):
    """Raised for malformed edge-list or block-assignment files."""


class SignedNetwork:
    """Undirected signed network on nodes 0..n_nodes-1.

    Edges are canonicalised to i < j and kept sorted lexicographically.
    Instances are immutable once constructed.
    """

    __slots__ = ("n_nodes", "_src", "_dst", "_sgn", "_ptr", "_nbr", "_nsgn",
                 "_csr_cache")

    def __init__(self, n_nodes, edges=()):
        n_nodes = int(n_nodes)
        if n_nodes < 1:
            raise NetworkFormatError("n_nodes must be positive")
        self.n_nodes = n_nodes

        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges)
        if arr.size == 0:
            arr = np.zeros((0, 3), dtype=np.int64)
        arr = arr.reshape(-1, 3).astype(np.int64, copy=False)

        i, j, s = arr[:, 0], arr[:, 1], arr[:, 2]
        if arr.shape[0]:
            if np.any((i < 0) | (i >= n_nodes) | (j < 0) | (j >= n_nodes)):
                raise NetworkFormatError("edge endpoint out of range")
            if np.any(i == j):
                raise NetworkFormatError("self-loops are not allowed")
            if np.any((s != 1) & (s != -1)):
                raise NetworkFormatError("edge signs must be +1 or -1")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        order = np.lexsort((hi, lo))
        lo, hi, s = lo[order], hi[order], s[order]

        if lo.size:
            dup = np.flatnonzero((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1]))
            if dup.size:
                if np.any(s[dup] != s[dup + 1]):
                    bad = dup[np.flatnonzero(s[dup] != s[dup + 1])[0]]
                    raise NetworkFormatError(
                        f"conflicting signs for dyad ({lo[bad]}, {hi[bad]})")
                warnings.warn("duplicate consistent edge records dropped")
                keep = np.ones(lo.size, bool)
                keep[dup + 1] = False
                lo, hi, s = lo[keep], hi[keep], s[keep]

        self._src = lo
        self._dst = hi
        self._sgn = s.astype(np.int8)
        self._build_adjacency()
        self._csr_cache = {}

    @classmethod
    def from_matrix(cls, mat):
        """Build from a dense signed matrix (symmetric, zero diagonal)."""
        mat = np.asarray(mat)
        iu, ju = np.triu_indices(mat.shape[0], k=1)
        v = mat[iu, ju]
        nz = v != 0
        edges = np.column_stack([iu[nz], ju[nz], v[nz]])
        return cls(mat.shape[0], edges)

    def _build_adjacency(self):
        n = self.n_nodes
        both_src = np.concatenate([self._src, self._dst])
        both_dst = np.concatenate([self._dst, self._src])
        both_sgn = np.concatenate([self._sgn, self._sgn])
        order = np.lexsort((both_dst, both_src))
        both_src, both_dst, both_sgn = both_src[order], both_dst[order], both_sgn[order]
        self._ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._ptr, both_src + 1, 1)
        np.cumsum(self._ptr, out=self._ptr)
        self._nbr = both_dst
        self._nsgn = both_sgn

    # -- basic queries ----------------------------------------------------

    @property
    def n_edges(self):
        return int(self._src.size)

    def edge_arrays(self):
        """Canonical (src, dst, sign) arrays with src < dst, sorted."""
        return self._src, self._dst, self._sgn

    def edge_count(self, sign):
        return int(np.count_nonzero(self._sgn == sign))

    def value(self, i, j):
        """Dyad value in {-1, 0, +1}."""
        if i == j:
            raise ValueError("dyads require distinct endpoints")
        lo, hi = self._ptr[i], self._ptr[i + 1]
        pos = np.searchsorted(self._nbr[lo:hi], j)
        if pos < hi - lo and self._nbr[lo + pos] == j:
            return int(self._nsgn[lo + pos])
        return 0

    def neighbors(self, i):
        """(neighbor ids, signs) of node i, sorted by id."""
        lo, hi = self._ptr[i], self._ptr[i + 1]
        return self._nbr[lo:hi], self._nsgn[lo:hi]

    def degree(self, i, sign=None):
        lo, hi = self._ptr[i], self._ptr[i + 1]
        if sign is None:
            return int(hi - lo)
        return int(np.count_nonzero(self._nsgn[lo:hi] == sign))

    def degrees(self, sign=None):
        """Vector of degrees for all nodes."""
        if sign is None:
            return np.diff(self._ptr)
        out = np.zeros(self.n_nodes, dtype=np.int64)
        mask = self._sgn == sign
        np.add.at(out, self._src[mask], 1)
        np.add.at(out, self._dst[mask], 1)
        return out

    def csr(self, sign):
        """Symmetric 0/1 CSR indicator matrix of edges with the given sign."""
        if sign not in self._csr_cache:
            mask = self._sgn == sign
            i, j = self._src[mask], self._dst[mask]
            data = np.ones(2 * i.size)
            m = sparse.coo_matrix(
                (data, (np.concatenate([i, j]), np.concatenate([j, i]))),
                shape=(self.n_nodes, self.n_nodes))
            self._csr_cache[sign] = m.tocsr()
        return self._csr_cache[sign]

    def signed_matrix(self):
        """Dense int8 signed adjacency; within-block use only."""
        if self.n_nodes > DENSE_NODE_LIMIT:
            raise ValueError(
                f"dense matrix refused for n={self.n_nodes} > {DENSE_NODE_LIMIT}")
        mat = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int8)
        mat[self._src, self._dst] = self._sgn
        mat[self._dst, self._src] = self._sgn
        return mat

    def __eq__(self, other):
        if not isinstance(other, SignedNetwork):
            return NotImplemented
        return (self.n_nodes == other.n_nodes
                and np.array_equal(self._src, other._src)
                and np.array_equal(self._dst, other._dst)
                and np.array_equal(self._sgn, other._sgn))

    def __hash__(self):
        return hash((self.n_nodes, self._src.tobytes(), self._dst.tobytes(),
                     self._sgn.tobytes()))

    def __repr__(self):
        return (f"SignedNetwork(n_nodes={self.n_nodes}, "
                f"pos={self.edge_count(1)}, neg={self.edge_count(-1)})")


def signed_degree(net, i, sign):
    """Number of edges of the given sign incident to node i."""
    return net.degree(i, sign)


def hamming_distance(a, b):
    """Number of dyads on which two networks over the same nodes differ."""
    if a.n_nodes != b.n_nodes:
        raise ValueError("networks must share the node set")
    da = {(int(i), int(j)): int(s) for i, j, s in zip(*a.edge_arrays())}
    db = {(int(i), int(j)): int(s) for i, j, s in zip(*b.edge_arrays())}
    d = 0
    for key, s in da.items():
        if db.get(key, 0) != s:
            d += 1
    for key in db:
        if key not in da:
            d += 1
    return d


# -- block assignments -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockAssignment:
    """Hard block membership for n nodes.

    Labels are 0-based in memory ({0..k_blocks-1}); files use 1-based labels.
    ``ties`` optionally flags nodes whose argmax membership was tied.
    """

    z: np.ndarray
    k_blocks: int
    ties: np.ndarray | None = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        object.__setattr__(self, "z", z)
        if self.k_blocks < 1:
            raise ValueError("k_blocks must be >= 1")
        if z.size and (z.min() < 0 or z.max() >= self.k_blocks):
            raise ValueError("block labels must lie in [0, k_blocks)")

    @property
    def n_nodes(self):
        return int(self.z.size)

    def block_sizes(self):
        return np.bincount(self.z, minlength=self.k_blocks)

    def nodes_in(self, k):
        return np.flatnonzero(self.z == k)

    def __eq__(self, other):
        if not isinstance(other, BlockAssignment):
            return NotImplemented
        return (self.k_blocks == other.k_blocks
                and np.array_equal(self.z, other.z))


@dataclass(frozen=True)
class Subnetwork:
    """Induced sub- or between-block network with its node relabeling.

    ``nodes`` lists original ids in new-index order.  For a between-block
    extraction the first ``n_left`` nodes are the lower-labelled block and
    only cross-part dyads are retained; ``n_left`` is None for within-block.
    """

    network: SignedNetwork
    nodes: np.ndarray
    n_left: int | None = None


def subnetwork(net, assignment, k, l=None):
    """Extract the within-block network y_kk or the bipartite y_kl.

    Within-block: the induced subgraph on block k.  Between-block (k != l):
    the network on the union of blocks k and l keeping only edges with one
    endpoint in each; within-part edges are dropped because the between-block
    model only governs cross pairs.
    """
    z = assignment.z
    if l is None or l == k:
        nodes = np.flatnonzero(z == k)
        if nodes.size == 0:
            raise ValueError(f"block {k} is empty")
        new_id = np.full(net.n_nodes, -1, dtype=np.int64)
        new_id[nodes] = np.arange(nodes.size)
        src, dst, sgn = net.edge_arrays()
        keep = (z[src] == k) & (z[dst] == k)
        edges = np.column_stack([new_id[src[keep]], new_id[dst[keep]], sgn[keep]])
        return Subnetwork(SignedNetwork(nodes.size, edges), nodes, None)

    ka, kb = (k, l) if k < l else (l, k)
    na = np.flatnonzero(z == ka)
    nb = np.flatnonzero(z == kb)
    if na.size == 0 or nb.size == 0:
        raise ValueError(f"block pair ({k}, {l}) has an empty side")
    new_id = np.full(net.n_nodes, -1, dtype=np.int64)
    new_id[na] = np.arange(na.size)
    new_id[nb] = na.size + np.arange(nb.size)
    src, dst, sgn = net.edge_arrays()
    keep = ((z[src] == ka) & (z[dst] == kb)) | ((z[src] == kb) & (z[dst] == ka))
    edges = np.column_stack([new_id[src[keep]], new_id[dst[keep]], sgn[keep]])
    return Subnetwork(SignedNetwork(na.size + nb.size, edges),
                      np.concatenate([na, nb]), int(na.size))


# -- file I/O ---------------------------------------------------------------


def _open_text(source):
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # byte streams
    return io.TextIOWrapper(source, encoding="utf-8"), False


def load_edge_list(source):
    """Parse a signed edge list.

    Format: first non-empty line is ``N=<int>``; each record is
    ``i<TAB>j<TAB>s`` with 1-based node ids and s in {-1, 1}.  Duplicate
    records with a consistent sign produce a warning and are folded;
    conflicting duplicates are an error.  All errors carry line numbers.
    """
    fh, owned = _open_text(source)
    try:
        n_nodes = None
        edges = []
        seen = {}
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if n_nodes is None:
                if not line.startswith("N="):
                    raise NetworkFormatError(
                        f"line {ln}: expected header 'N=<int>', got {line!r}")
                try:
                    n_nodes = int(line[2:])
                except ValueError:
                    raise NetworkFormatError(
                        f"line {ln}: malformed node count in header {line!r}") from None
                if n_nodes < 0:
                    raise NetworkFormatError(f"line {ln}: negative node count")
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise NetworkFormatError(
                    f"line {ln}: expected 'i<TAB>j<TAB>s', got {line!r}")
            try:
                i, j, s = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise NetworkFormatError(
                    f"line {ln}: non-integer field in {line!r}") from None
            if s not in (-1, 1):
                raise NetworkFormatError(f"line {ln}: sign must be -1 or 1, got {s}")
            if not (1 <= i <= n_nodes) or not (1 <= j <= n_nodes):
                raise NetworkFormatError(
                    f"line {ln}: node id out of range 1..{n_nodes}")
            if i == j:
                raise NetworkFormatError(f"line {ln}: self-loop at node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                prev_ln, prev_s = seen[key]
                if prev_s != s:
                    raise NetworkFormatError(
                        f"line {ln}: sign conflicts with line {prev_ln} "
                        f"for dyad {key}")
                warnings.warn(
                    f"line {ln}: duplicate of line {prev_ln} for dyad {key}, "
                    "dropped")
                continue
            seen[key] = (ln, s)
            edges.append((key[0] - 1, key[1] - 1, s))
        if n_nodes is None:
            raise NetworkFormatError("empty input: missing 'N=<int>' header")
        return SignedNetwork(n_nodes, edges)
    finally:
        if owned:
            fh.close()


def save_edge_list(net, target):
    """Write the canonical edge list (1-based ids, sorted)."""
    fh, owned = (open(target, "w", encoding="utf-8"), True) \
        if isinstance(target, (str, Path)) else (target, False)
    try:
        fh.write(f"N={net.n_nodes}\n")
        src, dst, sgn = net.edge_arrays()
        for i, j, s in zip(src, dst, sgn):
            fh.write(f"{i + 1}\t{j + 1}\t{s}\n")
    finally:
        if owned:
            fh.close()


def load_block_assignment(source, n_nodes=None, k_blocks=None):
    """Parse ``node_id<TAB>block_id`` lines (both 1-based).

    Every node 1..N must appear exactly once; N is inferred from the file
    when not given.
    """
    fh, owned = _open_text(source)
    try:
        rows = {}
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise NetworkFormatError(
                    f"line {ln}: expected 'node<TAB>block', got {line!r}")
            try:
                node, block = int(parts[0]), int(parts[1])
            except ValueError:
                raise NetworkFormatError(
                    f"line {ln}: non-integer field in {line!r}") from None
            if node < 1 or block < 1:
                raise NetworkFormatError(f"line {ln}: ids are 1-based")
            if node in rows:
                raise NetworkFormatError(f"line {ln}: node {node} repeated")
            rows[node] = block
        if not rows:
            raise NetworkFormatError("empty block assignment")
        n = n_nodes if n_nodes is not None else max(rows)
        missing = set(range(1, n + 1)) - set(rows)
        if missing:
            raise NetworkFormatError(
                f"nodes missing from assignment: {sorted(missing)[:5]}...")
        extra = set(rows) - set(range(1, n + 1))
        if extra:
            raise NetworkFormatError(
                f"node ids beyond N={n}: {sorted(extra)[:5]}")
        z = np.array([rows[i] - 1 for i in range(1, n + 1)], dtype=np.int64)
        k = k_blocks if k_blocks is not None else int(z.max()) + 1
        return BlockAssignment(z, k)
    finally:
        if owned:
            fh.close()


def save_block_assignment(assignment, target):
    fh, owned = (open(target, "w", encoding="utf-8"), True) \
        if isinstance(target, (str, Path)) else (target, False)
    try:
        for node, block in enumerate(assignment.z, start=1):
            fh.write(f"{node}\t{int(block) + 1}\n")
    finally:
        if owned:
            fh.close()
