"""Convergence and mixing diagnostics for the permutation chain.

Autocorrelation of a log-likelihood trace, the Gelman-Rubin potential
scale reduction over several chains, and a driver that runs independent
chains from different random permutations.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kronfit import FitConfig, _check_size, _theta_array, new_state, sample_permutation

PSR_THRESHOLD = 1.2


def autocorrelation(trace, max_lag=None):
    """Sample autocorrelation ``r_k`` of a series for lags ``0..max_lag``.

    Returns
    -------
    (ndarray, bool)
        The autocorrelations and whether they are defined.  A constant
        trace has zero variance; ``r_0`` is then reported as 1 and every
        other lag as NaN, with the flag set to False.
    """
    x = np.asarray(trace, dtype=float)
    if x.size == 0:
        raise DomainError("autocorrelation needs a non-empty trace")
    max_lag = x.size - 1 if max_lag is None else min(int(max_lag), x.size - 1)
    d = x - x.mean()
    # r_k is scale-free; normalising keeps tiny variances from underflowing
    peak = np.abs(d).max()
    if x.min() == x.max() or not math.isfinite(peak):
        out = np.full(max_lag + 1, np.nan)
        out[0] = 1.0
        return out, False
    d = d / peak
    denom = float(d @ d)
    # zero-padded FFT gives the full linear autocovariance in O(n log n)
    size = 1 << (2 * x.size - 1).bit_length()
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    r = acov / denom
    r[0] = 1.0
    return r, True


def potential_scale_reduction(chains):
    """Gelman-Rubin ``sqrt(R_hat)`` for ``J`` equal-length chains of length ``K``.

    With chain means ``m_j``, grand mean ``m``, between-chain variance
    ``B = K/(J-1) sum_j (m_j - m)^2`` and mean within-chain variance ``W``,
    the pooled estimate is ``((K-1)/K) W + B/K`` and the result is
    ``sqrt(pooled / W)``.  Values below 1 come only from rounding and are
    reported as 1; identical chains therefore give exactly 1.
    """
    c = np.asarray(chains, dtype=float)
    if c.ndim != 2 or c.shape[0] < 2:
        raise DomainError("need at least two chains of equal length")
    j, k = c.shape
    if k < 2:
        raise DomainError("chains need at least two samples")
    means = c.mean(axis=1)
    b = k / (j - 1) * float(((means - means.mean()) ** 2).sum())
    w = float(c.var(axis=1, ddof=1).mean())
    if w == 0.0:
        return 1.0 if b == 0.0 else math.inf
    pooled = (k - 1) / k * w + b / k
    return max(1.0, math.sqrt(pooled / w))


def psr_series(chains, lengths=None, points=50, discard_half=True):
    """``sqrt(R_hat)`` over growing prefixes of the chains.

    ``lengths`` defaults to ``points`` prefix lengths spaced evenly up to
    the full chain length.  With ``discard_half`` the value at length
    ``m`` uses samples ``m//2 .. m-1`` only, so the early transient does
    not inflate the within-chain variance (the usual Gelman-Rubin-Brooks
    plot); otherwise the whole prefix is used.
    """
    c = np.asarray(chains, dtype=float)
    if c.ndim != 2 or c.shape[0] < 2:
        raise DomainError("need at least two chains of equal length")
    lo = 4 if discard_half else 2
    if c.shape[1] < lo:
        raise DomainError(f"chains need at least {lo} samples")
    if lengths is None:
        lengths = np.unique(np.linspace(lo, c.shape[1], min(points, c.shape[1] - lo + 1)).astype(int))
    lengths = np.asarray(lengths, dtype=int)
    psr = np.array([potential_scale_reduction(c[:, m // 2 if discard_half else 0:m])
                    for m in lengths])
    return lengths, psr


def convergence_length(lengths, psr, threshold=PSR_THRESHOLD):
    """First prefix length after which ``psr`` stays at or below ``threshold``.

    Returns None when the final value is still above the threshold.
    """
    psr = np.asarray(psr)
    above = np.flatnonzero(psr > threshold)
    if above.size == 0:
        return int(lengths[0])
    if above[-1] == psr.size - 1:
        return None
    return int(lengths[above[-1] + 1])


@dataclass
class ChainDiagnostics:
    autocorrelation: np.ndarray
    autocorrelation_defined: bool
    psr_lengths: np.ndarray
    psr: np.ndarray
    acceptance: float

    def converged_at(self, threshold=PSR_THRESHOLD):
        if self.psr.size == 0:
            return None
        return convergence_length(self.psr_lengths, self.psr, threshold)

    def autocorrelation_rows(self):
        return [(lag, float(r)) for lag, r in enumerate(self.autocorrelation)]

    def psr_rows(self):
        return [(int(m), float(p)) for m, p in zip(self.psr_lengths, self.psr)]


def chain_diagnostics(traces, accepted=None, proposed=None, max_lag=1000, points=50,
                      discard_half=True):
    """Autocorrelation, scale reduction and acceptance for a set of traces.

    The autocorrelation is that of the first trace.  The scale reduction
    series needs at least two traces of equal length and is empty
    otherwise.  The acceptance fraction is ``accepted / proposed`` when
    both are given, NaN otherwise.
    """
    traces = [np.asarray(t, dtype=float) for t in traces]
    if not traces:
        raise DomainError("need at least one trace")
    acf, defined = autocorrelation(traces[0], max_lag)
    if len(traces) >= 2:
        if len({t.size for t in traces}) != 1:
            raise DomainError("scale reduction needs equal-length traces")
        lengths, psr = psr_series(np.vstack(traces), points=points, discard_half=discard_half)
    else:
        lengths, psr = np.zeros(0, dtype=int), np.zeros(0)
    acc = accepted / proposed if accepted is not None and proposed else math.nan
    return ChainDiagnostics(acf, defined, lengths, psr, acc)


@dataclass
class ChainRun:
    traces: np.ndarray
    acceptance: np.ndarray
    record_every: int

    def diagnostics(self, max_lag=1000, points=50, discard_half=True):
        d = chain_diagnostics(self.traces, max_lag=max_lag, points=points,
                              discard_half=discard_half)
        d.psr_lengths = d.psr_lengths * self.record_every
        d.acceptance = float(self.acceptance.mean())
        return d


def run_chains(g, theta, k, n_chains=4, n_steps=100_000, omega=0.6, seed=None,
               record_every=1, workers=1, starts=None):
    """Run independent permutation chains at a fixed ``theta``.

    Each chain starts from its own uniformly random permutation, unless
    ``starts`` gives one (a sequence of ``n_chains`` permutations or
    None entries).  Scale reduction is only informative when the chains
    start far apart: random permutations all sit at about the same low
    likelihood, so pairing them with a high-likelihood start (say, the
    permutation a fit ended on) exposes how long the random chains take
    to catch up.

    The log-likelihood is recorded after every ``record_every`` moves.
    Chains share the graph read-only; ``workers > 1`` runs them on a
    thread pool.

    Returns
    -------
    ChainRun
        ``traces`` has shape ``(n_chains, n_steps // record_every)``.
    """
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    if n_chains < 1 or n_steps < 1 or record_every < 1:
        raise DomainError("n_chains, n_steps and record_every must be positive")
    starts = [None] * n_chains if starts is None else list(starts)
    if len(starts) != n_chains:
        raise DomainError("starts must give one entry per chain")
    seeds = np.random.SeedSequence(seed).spawn(n_chains)
    cfg = FitConfig(n1=theta.shape[0], omega=omega)

    def one(job):
        ss, start = job
        rng = np.random.default_rng(ss)
        state = new_state(g, rng, sigma=None if start is None else np.array(start, copy=True))
        sample_permutation(g, theta, k, state, cfg, steps=n_steps)
        trace = state.log_trace()[record_every - 1::record_every]
        return trace, state.acceptance

    jobs = list(zip(seeds, starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    traces = np.vstack([r[0] for r in results])
    acc = np.array([r[1] for r in results])
    return ChainRun(traces, acc, record_every)
