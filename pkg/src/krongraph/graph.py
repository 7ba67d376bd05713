"""Immutable sparse directed graphs, edge-list I/O, traversal and padding.

A :class:`SparseGraph` keeps its edges twice, as a CSR structure over
out-neighbours and a CSC structure over in-neighbours, both sorted and
duplicate free.  Node ids are ``0..n-1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import BoundsError, EmptyGraphError, ParseError, SizeError

UNREACHABLE = -1
_MAX_NODES = 2**31 - 1


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class SparseGraph:
    """Directed graph on ``n`` nodes with sorted, de-duplicated adjacency.

    Parameters
    ----------
    n : int
        Number of nodes.
    src, dst : array_like of int
        Edge endpoints.  Duplicates are collapsed; self-loops are kept.
    """

    __slots__ = ("n", "src", "dst", "out_ptr", "out_idx", "in_ptr", "in_idx")

    def __init__(self, n, src=(), dst=()):
        n = int(n)
        if n < 0 or n > _MAX_NODES:
            raise SizeError(f"node count {n} out of range")
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have the same length")
        if src.size:
            lo = min(src.min(), dst.min())
            hi = max(src.max(), dst.max())
            if lo < 0 or hi >= n:
                raise BoundsError(f"edge endpoint out of range [0, {n})")
            codes = np.unique(src * n + dst)
            src, dst = np.divmod(codes, n)
        self.n = n
        self.src = _frozen(src)
        self.dst = _frozen(dst)
        counts = np.bincount(src, minlength=n)
        self.out_ptr = _frozen(np.concatenate(([0], np.cumsum(counts))).astype(np.int64))
        self.out_idx = self.dst
        order = np.lexsort((src, dst))
        counts = np.bincount(dst, minlength=n)
        self.in_ptr = _frozen(np.concatenate(([0], np.cumsum(counts))).astype(np.int64))
        self.in_idx = _frozen(src[order])

    @classmethod
    def from_edges(cls, n, edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        return cls(n, edges[:, 0], edges[:, 1])

    @property
    def e(self):
        return int(self.src.size)

    def __repr__(self):
        return f"SparseGraph(n={self.n}, e={self.e})"

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
        )

    def __hash__(self):
        return hash((self.n, self.src.tobytes(), self.dst.tobytes()))

    def out_neighbors(self, u):
        return self.out_idx[self.out_ptr[u]:self.out_ptr[u + 1]]

    def in_neighbors(self, u):
        return self.in_idx[self.in_ptr[u]:self.in_ptr[u + 1]]

    def out_degree(self):
        return np.diff(self.out_ptr)

    def in_degree(self):
        return np.diff(self.in_ptr)

    def edges(self):
        """Return the edges as an ``(e, 2)`` array in ascending ``(u, v)`` order."""
        return np.column_stack((self.src, self.dst))

    def has_edge(self, u, v):
        nbrs = self.out_neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < nbrs.size and nbrs[i] == v)

    def relabel(self, perm):
        """Return the graph with node ``u`` renamed to ``perm[u]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return SparseGraph(self.n, perm[self.src], perm[self.dst])

    def symmetrized(self):
        """Return the graph with every edge present in both directions."""
        return SparseGraph(
            self.n,
            np.concatenate((self.src, self.dst)),
            np.concatenate((self.dst, self.src)),
        )

    def adjacency(self, dtype=float):
        """Adjacency matrix as a ``scipy.sparse.csr_matrix``."""
        from scipy import sparse

        data = np.ones(self.e, dtype=dtype)
        return sparse.csr_matrix(
            (data, self.out_idx, self.out_ptr), shape=(self.n, self.n)
        )

    def nonisolated_count(self):
        deg = self.out_degree() + self.in_degree()
        return int(np.count_nonzero(deg))


def load_edge_list(path, directed=True):
    """Read a whitespace separated ``u v`` edge list.

    Lines starting with ``#`` are ignored.  The node count is one more than
    the largest id seen, so gaps become isolated nodes.  With
    ``directed=False`` each line inserts both ``(u, v)`` and ``(v, u)``.
    """
    src, dst = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ParseError(f"expected two node ids, got {s!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node id in {s!r}", lineno) from None
            if u < 0 or v < 0:
                raise ParseError(f"negative node id in {s!r}", lineno)
            src.append(u)
            dst.append(v)
    if not src:
        raise EmptyGraphError(f"{path}: no edges")
    src = np.array(src, dtype=np.int64)
    dst = np.array(dst, dtype=np.int64)
    n = int(max(src.max(), dst.max())) + 1
    if not directed:
        src, dst = np.concatenate((src, dst)), np.concatenate((dst, src))
    return SparseGraph(n, src, dst)


def save_edge_list(g, path):
    """Write ``g`` as ``u<TAB>v`` lines in ascending order after a header."""
    path = Path(path)
    lines = [f"# nodes: {g.n}\n", f"# edges: {g.e}\n"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)
        if g.e:
            body = "\n".join(f"{u}\t{v}" for u, v in zip(g.src.tolist(), g.dst.tolist()))
            fh.write(body + "\n")


def read_node_count(path):
    """Return the ``# nodes:`` header value of a saved edge list, or None."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# nodes:"):
                return int(line.split(":", 1)[1])
    return None


@dataclass(frozen=True)
class ComponentLabeling:
    labels: np.ndarray
    count: int
    sizes: np.ndarray

    @property
    def largest(self):
        """Size of the largest component (``N_c``)."""
        return int(self.sizes.max()) if self.sizes.size else 0


def weakly_connected_components(g):
    """Label weakly connected components; labels follow first appearance."""
    from scipy.sparse.csgraph import connected_components

    if g.n == 0:
        return ComponentLabeling(np.zeros(0, dtype=np.int64), 0, np.zeros(0, dtype=np.int64))
    count, labels = connected_components(g.adjacency(), directed=True, connection="weak")
    # relabel by first occurrence so the labeling is deterministic
    _, first = np.unique(labels, return_index=True)
    remap = np.empty(count, dtype=np.int64)
    remap[np.argsort(first)] = np.arange(count)
    labels = remap[labels]
    sizes = np.bincount(labels, minlength=count)
    return ComponentLabeling(labels, int(count), sizes)


@numba.njit(cache=True, nogil=True)
def _bfs(ptr_a, idx_a, ptr_b, idx_b, use_b, source, dist, queue):
    dist[:] = -1
    dist[source] = 0
    head = 0
    tail = 1
    queue[0] = source
    while head < tail:
        x = queue[head]
        head += 1
        d = dist[x] + 1
        for t in range(ptr_a[x], ptr_a[x + 1]):
            y = idx_a[t]
            if dist[y] < 0:
                dist[y] = d
                queue[tail] = y
                tail += 1
        if use_b:
            for t in range(ptr_b[x], ptr_b[x + 1]):
                y = idx_b[t]
                if dist[y] < 0:
                    dist[y] = d
                    queue[tail] = y
                    tail += 1
    return tail


@numba.njit(cache=True, nogil=True)
def _hop_counts(ptr_a, idx_a, ptr_b, idx_b, use_b, sources, n):
    """Histogram of BFS distances summed over ``sources``; also max distance."""
    hist = np.zeros(n + 1, dtype=np.int64)
    dist = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for s in sources:
        _bfs(ptr_a, idx_a, ptr_b, idx_b, use_b, s, dist, queue)
        for x in range(n):
            if dist[x] >= 0:
                hist[dist[x]] += 1
    return hist


def bfs_distances(g, source, undirected=False):
    """Hop distances from ``source``; unreachable nodes get ``UNREACHABLE``."""
    if not 0 <= source < g.n:
        raise BoundsError(f"source {source} not in [0, {g.n})")
    dist = np.empty(g.n, dtype=np.int64)
    queue = np.empty(g.n, dtype=np.int64)
    _bfs(g.out_ptr, g.out_idx, g.in_ptr, g.in_idx, undirected, int(source), dist, queue)
    return dist


def hop_histogram(g, sources, undirected=False):
    """Counts of (source, target) pairs at each hop distance, trimmed."""
    sources = np.asarray(sources, dtype=np.int64)
    hist = _hop_counts(g.out_ptr, g.out_idx, g.in_ptr, g.in_idx, undirected, sources, g.n)
    nz = np.flatnonzero(hist)
    return hist[: nz[-1] + 1] if nz.size else hist[:1]


def pad_to_power(g, n1):
    """Append isolated nodes so that the node count becomes ``n1**k``.

    ``k`` is the smallest integer with ``n1**k >= g.n`` (and at least 1).

    Returns
    -------
    (SparseGraph, int)
        The padded graph and ``k``.
    """
    if n1 < 2:
        raise ValueError("n1 must be at least 2")
    k, size = 1, n1
    while size < g.n:
        k += 1
        size *= n1
        if size > _MAX_NODES:
            raise SizeError(f"{n1}**{k} exceeds the supported node count")
    if size == g.n:
        return g, k
    return SparseGraph(size, g.src, g.dst), k
