"""Initiator matrices, Kronecker products and the three graph generators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, DomainError, ParseError, SaturationError, SizeError
from .graph import SparseGraph

DENSE_CAP = 4096
NAIVE_CAP = 2**16
MAX_DENSE_ENTRIES = 2**28


@dataclass(frozen=True)
class InitiatorMatrix:
    """Square ``n1 x n1`` matrix with entries in ``[0, 1]``.

    Serves both as the stochastic parameter matrix and, when every entry is
    0 or 1, as a deterministic initiator graph.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DomainError(f"initiator must be square, got shape {v.shape}")
        if v.shape[0] < 2:
            raise DomainError("initiator side length must be at least 2")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise DomainError("initiator entries must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n1(self):
        return self.values.shape[0]

    def edge_sum(self):
        """Sum of entries, i.e. the expected edge count of the initiator."""
        return float(self.values.sum())

    def is_binary(self):
        return bool(np.all((self.values == 0.0) | (self.values == 1.0)))

    def __eq__(self, other):
        if not isinstance(other, InitiatorMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        rows = "; ".join(" ".join(f"{x:g}" for x in row) for row in self.values)
        return f"InitiatorMatrix([{rows}])"

    def to_text(self):
        lines = [str(self.n1)]
        lines += [" ".join(repr(float(x)) for x in row) for row in self.values]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        """Parse the initiator file format.

        The first non-comment line holds ``n1``; the next ``n1`` lines hold
        the rows.  Lines starting with ``#`` are comments.
        """
        rows = []
        n1 = None
        for lineno, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if n1 is None:
                try:
                    n1 = int(s)
                except ValueError:
                    raise ParseError(f"expected initiator size, got {s!r}", lineno) from None
                continue
            try:
                row = [float(x) for x in s.split()]
            except ValueError:
                raise ParseError(f"non-numeric entry in {s!r}", lineno) from None
            if len(row) != n1:
                raise ParseError(f"expected {n1} entries, got {len(row)}", lineno)
            rows.append(row)
        if n1 is None or len(rows) != n1:
            raise ParseError(f"expected {n1} rows, got {len(rows)}")
        return cls(np.array(rows))

    @classmethod
    def from_inline(cls, spec):
        """Parse ``"a b; c d"`` (rows separated by ``;``)."""
        try:
            rows = [[float(x) for x in r.split()] for r in spec.split(";") if r.strip()]
        except ValueError:
            raise ParseError(f"non-numeric entry in {spec!r}") from None
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ParseError(f"inline initiator {spec!r} is not square")
        return cls(np.array(rows))


def read_initiator(path):
    with open(path, encoding="utf-8") as fh:
        return InitiatorMatrix.from_text(fh.read())


def write_initiator(init, path, comment=None):
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(init.to_text())


@dataclass(frozen=True)
class KroneckerPowerSpec:
    """The ``k``-th Kronecker power of an initiator."""

    initiator: InitiatorMatrix
    k: int

    def __post_init__(self):
        if int(self.k) < 1:
            raise DomainError("Kronecker power k must be >= 1")
        object.__setattr__(self, "k", int(self.k))
        if self.k * math.log(self.initiator.n1) > math.log(2**62):
            raise SizeError(f"{self.initiator.n1}**{self.k} nodes overflows int64")

    @property
    def theta(self):
        return self.initiator.values

    @property
    def n_nodes(self):
        return self.initiator.n1**self.k

    @property
    def expected_edges(self):
        return self.initiator.edge_sum() ** self.k

    def edge_count_variance(self):
        """Variance of the edge count: a sum of independent Bernoullis."""
        t = self.theta
        return max(float(t.sum()) ** self.k - float((t * t).sum()) ** self.k, 0.0)


def _as_spec(spec_or_theta, k=None):
    if isinstance(spec_or_theta, KroneckerPowerSpec):
        return spec_or_theta
    init = spec_or_theta
    if not isinstance(init, InitiatorMatrix):
        init = InitiatorMatrix(init)
    return KroneckerPowerSpec(init, k)


def kron_product(a, b, max_entries=MAX_DENSE_ENTRIES):
    """Kronecker product of two dense matrices.

    Entry ``[i*b.rows + p, j*b.cols + q]`` of the result is ``a[i, j] * b[p, q]``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise DomainError("Kronecker product of an empty matrix")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > max_entries:
        raise SizeError(f"product of shape {rows}x{cols} exceeds {max_entries} entries")
    c = a[:, None, :, None] * b[None, :, None, :]
    return c.reshape(rows, cols)


def kron_power_dense(spec, k=None, cap=DENSE_CAP):
    """Materialise the ``k``-th Kronecker power.  Test-sized inputs only."""
    spec = _as_spec(spec, k)
    if spec.n_nodes > cap:
        raise SizeError(f"dense power has {spec.n_nodes} rows, cap is {cap}")
    out = spec.theta
    for _ in range(spec.k - 1):
        out = kron_product(out, spec.theta)
    return np.array(out)


def node_digits(nodes, n1, k):
    """Base-``n1`` digits of node ids, least significant first, shape ``(..., k)``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    powers = n1 ** np.arange(k, dtype=np.int64)
    return (nodes[..., None] // powers) % n1


def edge_probability(spec, u, v, k=None):
    """Probability of edge ``(u, v)`` in the stochastic Kronecker power.

    The product of initiator entries indexed by the matching base-``n1``
    digits of ``u`` and ``v``; O(k).
    """
    spec = _as_spec(spec, k)
    n = spec.n_nodes
    if not (0 <= u < n and 0 <= v < n):
        raise BoundsError(f"node pair ({u}, {v}) not in [0, {n})")
    n1 = spec.initiator.n1
    theta = spec.theta
    p = 1.0
    for _ in range(spec.k):
        p *= theta[u % n1, v % n1]
        u //= n1
        v //= n1
    return float(p)


def edge_probabilities(spec, us, vs, k=None):
    """Vectorised :func:`edge_probability` over arrays of node ids."""
    spec = _as_spec(spec, k)
    n1 = spec.initiator.n1
    du = node_digits(us, n1, spec.k)
    dv = node_digits(vs, n1, spec.k)
    return spec.theta[du, dv].prod(axis=-1)


def initiator_from_binary(k1, alpha, beta):
    """Replace every 1 of a binary initiator by ``alpha`` and every 0 by ``beta``."""
    if not isinstance(k1, InitiatorMatrix):
        k1 = InitiatorMatrix(k1)
    if not k1.is_binary():
        raise DomainError("initiator_from_binary needs a 0/1 matrix")
    if not 0.0 <= beta <= alpha <= 1.0:
        raise DomainError(f"need 0 <= beta <= alpha <= 1, got alpha={alpha}, beta={beta}")
    return InitiatorMatrix(np.where(k1.values == 1.0, alpha, beta))


def generate_deterministic(spec, k=None):
    """Deterministic Kronecker graph ``K1^[k]`` from a 0/1 initiator."""
    spec = _as_spec(spec, k)
    if not spec.initiator.is_binary():
        raise DomainError("deterministic generation needs a 0/1 initiator")
    n1 = spec.initiator.n1
    ii, jj = np.nonzero(spec.theta)
    ii = ii.astype(np.int64)
    jj = jj.astype(np.int64)
    if (ii.size ** spec.k) > 2**31:
        raise SizeError(f"{ii.size}**{spec.k} edges is too many to materialise")
    u, v = ii, jj
    for _ in range(spec.k - 1):
        u = (u[:, None] * n1 + ii[None, :]).ravel()
        v = (v[:, None] * n1 + jj[None, :]).ravel()
    return SparseGraph(spec.n_nodes, u, v)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def realize_naive(spec, seed=None, k=None, cap=NAIVE_CAP, block_entries=2**22):
    """Flip one biased coin per ordered node pair.  O(N^2) reference sampler."""
    spec = _as_spec(spec, k)
    n = spec.n_nodes
    if n > cap:
        raise SizeError(f"naive realization of {n} nodes exceeds cap {cap}; use generate_fast")
    rng = _rng(seed)
    n1 = spec.initiator.n1
    # split digits: rows are processed in blocks sharing their high digits
    k_lo = spec.k
    while k_lo > 1 and (n1**k_lo) * n > block_entries:
        k_lo -= 1
    k_hi = spec.k - k_lo
    p_lo = kron_power_dense(spec.initiator, k_lo, cap=n)
    p_hi = kron_power_dense(spec.initiator, k_hi, cap=n) if k_hi else np.ones((1, 1))
    m = n1**k_lo
    src, dst = [], []
    for hi in range(p_hi.shape[0]):
        block = kron_product(p_hi[hi:hi + 1, :], p_lo, max_entries=2**40)
        r, c = np.nonzero(rng.random(block.shape) < block)
        src.append(r + hi * m)
        dst.append(c)
    return SparseGraph(n, np.concatenate(src), np.concatenate(dst))


def sample_edge_count(spec, rng):
    """Draw the target edge count from the normal approximation, rounded and floored at 0."""
    mean = spec.expected_edges
    sd = math.sqrt(spec.edge_count_variance())
    return max(0, int(round(rng.normal(mean, sd))))


def _descend(rng, cum, n1, k, m):
    """Place ``m`` edges by ``k``-level recursive descent; returns (u, v)."""
    cells = np.searchsorted(cum, rng.random((m, k)), side="right")
    cells = np.minimum(cells, n1 * n1 - 1)
    u = np.zeros(m, dtype=np.int64)
    v = np.zeros(m, dtype=np.int64)
    for level in range(k):
        i, j = np.divmod(cells[:, level], n1)
        u = u * n1 + i
        v = v * n1 + j
    return u, v


def generate_fast(spec, seed=None, k=None, n_edges=None, max_retries=1000):
    """Stochastic Kronecker graph in O(E k) by simulating the recursion.

    The edge count is drawn from a normal approximation of the exact
    Bernoulli-sum distribution (or fixed with ``n_edges``).  Each edge
    descends ``k`` levels, choosing initiator cell ``(i, j)`` with
    probability ``theta_ij / sum(theta)``.  Edges landing on an occupied
    cell are redrawn until they hit a fresh one.

    Raises
    ------
    SaturationError
        If some edge still has no free cell after ``max_retries`` redraws.
    """
    spec = _as_spec(spec, k)
    total = spec.initiator.edge_sum()
    if total <= 0.0:
        raise DomainError("initiator has zero edge mass")
    rng = _rng(seed)
    n, n1 = spec.n_nodes, spec.initiator.n1
    target = sample_edge_count(spec, rng) if n_edges is None else int(n_edges)
    cum = np.cumsum(spec.theta.ravel())
    cum /= cum[-1]
    codes = np.empty(0, dtype=np.int64)
    rounds = 0
    while codes.size < target:
        if rounds >= max_retries:
            raise SaturationError(
                f"placed {codes.size} of {target} edges after {max_retries} redraws; "
                "initiator mass is concentrated on too few cells"
            )
        u, v = _descend(rng, cum, n1, spec.k, target - codes.size)
        merged = np.concatenate((codes, u * n + v))
        _, first = np.unique(merged, return_index=True)
        codes = merged[np.sort(first)]
        rounds += 1
    src, dst = np.divmod(codes, n)
    return SparseGraph(n, src, dst)
