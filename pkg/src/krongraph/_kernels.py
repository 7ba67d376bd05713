"""Compiled inner loops for the permutation chain and edge likelihood terms.

The edge term of a present edge ``(u, v)`` mapped to positions ``(a, b)``
is ``log P[a, b] - log(1 - P[a, b])``.  ``log P`` is read from lookup
tables that hold the summed log-entries of a whole block of base-``n1``
digits (see :func:`log_tables`), so a position pair costs a few lookups
instead of ``k``.
"""
import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def seed(s):
    np.random.seed(s)


_TABLE_ENTRIES = 4096


def log_tables(log_theta, k):
    """Block lookup tables for ``log P``.

    Returns ``(tab, tab_r, nfull)``: ``tab`` covers blocks of ``c`` digits
    (``n1**(2c)`` at most 4096 entries), applied ``nfull`` times, and
    ``tab_r`` covers the remaining ``k - nfull * c`` digits.
    """
    n1 = log_theta.shape[0]
    c = 1
    while c < k and n1 ** (2 * (c + 1)) <= _TABLE_ENTRIES:
        c += 1
    nfull, rest = divmod(k, c)

    def block(d):
        t = np.zeros((1, 1))
        for _ in range(d):
            t = (t[:, None, :, None] + log_theta[None, :, None, :]).reshape(
                t.shape[0] * n1, t.shape[1] * n1)
        return np.ascontiguousarray(t)

    return block(c), block(rest), nfull


@numba.njit(cache=True, inline="always")
def _log_p(a, b, tab, tab_r, nfull):
    base = tab.shape[0]
    s = 0.0
    for _ in range(nfull):
        s += tab[a % base, b % base]
        a //= base
        b //= base
    return s + tab_r[a, b]


@numba.njit(cache=True, inline="always")
def _term(logp):
    if logp == 0.0:
        return math.inf
    return logp - math.log(-math.expm1(logp))


@numba.njit(cache=True)
def _add_grad(a, b, theta, tabs, n1, k, grad, sign):
    p = math.exp(_log_p(a, b, tabs[0], tabs[1], tabs[2]))
    w = sign / (1.0 - p)
    for _ in range(k):
        i = a % n1
        j = b % n1
        grad[i, j] += w / theta[i, j]
        a //= n1
        b //= n1


@numba.njit(cache=True)
def edge_totals(src, dst, sigma, theta, tabs, n1, k, grad):
    """Sum of edge terms over all edges; gradient sum written into ``grad``."""
    grad[:, :] = 0.0
    total = 0.0
    for t in range(src.size):
        a = sigma[src[t]]
        b = sigma[dst[t]]
        total += _term(_log_p(a, b, tabs[0], tabs[1], tabs[2]))
        _add_grad(a, b, theta, tabs, n1, k, grad, 1.0)
    return total


@numba.njit(cache=True)
def edge_loglik(src, dst, sigma, tabs):
    """Sum of ``log P`` and ``log(1 - P)`` separately over the edges."""
    lp = 0.0
    l1m = 0.0
    for t in range(src.size):
        logp = _log_p(sigma[src[t]], sigma[dst[t]], tabs[0], tabs[1], tabs[2])
        lp += logp
        l1m += math.log(-math.expm1(logp)) if logp < 0.0 else -math.inf
    return lp, l1m


@numba.njit(cache=True, inline="always")
def _pos(x, j, l, pj, pl, sigma):
    if x == j:
        return pl
    if x == l:
        return pj
    return sigma[x]


@numba.njit(cache=True)
def swap_delta(out_ptr, out_idx, in_ptr, in_idx, sigma, tabs, j, l):
    """Change of the edge-term sum when nodes ``j`` and ``l`` trade positions.

    The no-edge mass summed over every cell is invariant under relabeling,
    so only edges touching ``j`` or ``l`` contribute.
    """
    if j == l:
        return 0.0
    pj = sigma[j]
    pl = sigma[l]
    old = 0.0
    new = 0.0
    for x in (j, l):
        px = sigma[x]
        qx = _pos(x, j, l, pj, pl, sigma)
        for t in range(out_ptr[x], out_ptr[x + 1]):
            y = out_idx[t]
            old += _term(_log_p(px, sigma[y], tabs[0], tabs[1], tabs[2]))
            new += _term(_log_p(qx, _pos(y, j, l, pj, pl, sigma), tabs[0], tabs[1], tabs[2]))
        for t in range(in_ptr[x], in_ptr[x + 1]):
            w = in_idx[t]
            if w == j or w == l:
                continue
            old += _term(_log_p(sigma[w], px, tabs[0], tabs[1], tabs[2]))
            new += _term(_log_p(sigma[w], qx, tabs[0], tabs[1], tabs[2]))
    if old == new:
        return 0.0
    return new - old


@numba.njit(cache=True)
def _swap_grad(out_ptr, out_idx, in_ptr, in_idx, sigma, theta, tabs, n1, k, j, l, grad):
    pj = sigma[j]
    pl = sigma[l]
    for x in (j, l):
        px = sigma[x]
        qx = _pos(x, j, l, pj, pl, sigma)
        for t in range(out_ptr[x], out_ptr[x + 1]):
            y = out_idx[t]
            _add_grad(px, sigma[y], theta, tabs, n1, k, grad, -1.0)
            _add_grad(qx, _pos(y, j, l, pj, pl, sigma), theta, tabs, n1, k, grad, 1.0)
        for t in range(in_ptr[x], in_ptr[x + 1]):
            w = in_idx[t]
            if w == j or w == l:
                continue
            _add_grad(sigma[w], px, theta, tabs, n1, k, grad, -1.0)
            _add_grad(sigma[w], qx, theta, tabs, n1, k, grad, 1.0)


@numba.njit(cache=True, nogil=True)
def run_chain(out_ptr, out_idx, in_ptr, in_idx, src, dst, sigma, inverse,
              theta, tabs, n1, k, n_steps, n_discard, omega,
              edge_ll, edge_grad, sum_grad, trace, track_grad):
    """Run ``n_steps`` Metropolis steps over node permutations.

    ``edge_ll``/``edge_grad`` hold the running edge-term sums for the
    current permutation and are updated on every accepted move.  After the
    first ``n_discard`` steps the current values are accumulated into the
    returned ``sum_ll`` and into ``sum_grad``.  ``trace[t]`` receives the
    edge-term sum after step ``t``.

    Returns ``(edge_ll, sum_ll, n_accepted, n_proposed_after_discard,
    n_accepted_after_discard)``.
    """
    n = sigma.size
    m = src.size
    accepted = 0
    acc_late = 0
    sum_ll = 0.0
    for step in range(n_steps):
        if m == 0 or np.random.random() < omega:
            j = np.random.randint(n)
            l = np.random.randint(n - 1)
            if l >= j:
                l += 1
        else:
            e = np.random.randint(m)
            j = src[e]
            l = dst[e]
        delta = swap_delta(out_ptr, out_idx, in_ptr, in_idx, sigma, tabs, j, l)
        if delta >= 0.0 or np.random.random() < math.exp(delta):
            if j != l:
                if track_grad:
                    _swap_grad(out_ptr, out_idx, in_ptr, in_idx, sigma, theta, tabs,
                               n1, k, j, l, edge_grad)
                pj = sigma[j]
                pl = sigma[l]
                sigma[j] = pl
                sigma[l] = pj
                inverse[pl] = j
                inverse[pj] = l
                edge_ll += delta
            accepted += 1
            if step >= n_discard:
                acc_late += 1
        if step >= n_discard:
            sum_ll += edge_ll
            if track_grad:
                sum_grad += edge_grad
        trace[step] = edge_ll
    return edge_ll, sum_ll, accepted, max(n_steps - n_discard, 0), acc_late


@numba.njit(cache=True)
def random_permutation_profile(src, dst, n, tabs, count):
    """Edge-term sums at ``count`` uniformly random permutations."""
    out = np.empty(count)
    sigma = np.arange(n)
    for c in range(count):
        np.random.shuffle(sigma)
        total = 0.0
        for t in range(src.size):
            total += _term(_log_p(sigma[src[t]], sigma[dst[t]], tabs[0], tabs[1], tabs[2]))
        out[c] = total
    return out
