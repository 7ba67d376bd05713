"""Maximum-likelihood fitting of the stochastic Kronecker initiator.

The likelihood of a graph marginalises over node correspondences, so the
log-likelihood and its gradient are estimated by averaging over node
permutations drawn with a Metropolis chain.  For a fixed permutation the
likelihood is evaluated in O(E k): the no-edge mass of the whole matrix is
approximated by a Taylor series in closed form and then corrected for the
edges that are present.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels
from .core import InitiatorMatrix, generate_fast, kron_power_dense
from .errors import DomainError, FitError, KroneckerError, SizeError
from .graph import pad_to_power

log = logging.getLogger(__name__)

EXACT_CAP = 2**10


def _theta_array(theta):
    if isinstance(theta, InitiatorMatrix):
        return np.array(theta.values, dtype=float)
    return np.array(theta, dtype=float)


def _log_theta(theta):
    with np.errstate(divide="ignore"):
        return np.log(theta)


def _tabs(theta, k):
    return _kernels.log_tables(_log_theta(theta), k)


def _check_size(g, theta, k):
    n1 = theta.shape[0]
    if g.n != n1**k:
        raise SizeError(f"graph has {g.n} nodes but the model has {n1}**{k}; pad first")


class NodePermutation:
    """Bijection from graph nodes to rows/columns of the model matrix.

    ``forward[u]`` is the model position of graph node ``u`` and
    ``inverse[forward[u]] == u``.
    """

    __slots__ = ("forward", "inverse")

    def __init__(self, forward):
        self.forward = np.array(forward, dtype=np.int64)
        self.inverse = np.empty_like(self.forward)
        self.inverse[self.forward] = np.arange(self.forward.size)
        if not np.array_equal(self.forward[self.inverse], np.arange(self.forward.size)):
            raise DomainError("forward map is not a permutation")

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    @classmethod
    def random(cls, n, rng):
        return cls(rng.permutation(n))

    def __len__(self):
        return self.forward.size

    def __eq__(self, other):
        return isinstance(other, NodePermutation) and np.array_equal(self.forward, other.forward)

    def copy(self):
        return NodePermutation(self.forward)

    def swap(self, j, l):
        """Exchange the positions of graph nodes ``j`` and ``l`` in place."""
        f = self.forward
        f[j], f[l] = f[l], f[j]
        self.inverse[f[j]] = j
        self.inverse[f[l]] = l


def _sigma_array(sigma, n):
    if sigma is None:
        return np.arange(n, dtype=np.int64)
    if isinstance(sigma, NodePermutation):
        return sigma.forward
    return np.asarray(sigma, dtype=np.int64)


# ---------------------------------------------------------------------------
# likelihood


def log_likelihood_exact(g, theta, k, sigma=None):
    """Log-likelihood summed over every cell of the dense model matrix.

    Reference implementation, O(N^2); graphs of at most 1024 nodes.
    Returns ``-inf`` when a present edge has probability 0 or an absent one
    has probability 1.
    """
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    p = kron_power_dense(theta, k, cap=EXACT_CAP)
    s = _sigma_array(sigma, g.n)
    p = p[np.ix_(s, s)]
    present = np.zeros((g.n, g.n), dtype=bool)
    present[g.src, g.dst] = True
    with np.errstate(divide="ignore"):
        on = np.log(p[present]).sum()
        off = np.log1p(-p[~present]).sum()
    return float(on + off)


def empty_graph_loglik(theta, k, order=2):
    """Taylor approximation of the log-likelihood of the empty graph.

    ``sum over cells of log(1 - P)`` is replaced by
    ``-sum_{m=1..order} (sum theta^m)^k / m``, using that the sum of the
    ``m``-th powers of all ``P`` entries factorises over the Kronecker power.
    """
    theta = _theta_array(theta)
    return -sum(float((theta**m).sum()) ** k / m for m in range(1, order + 1))


def empty_graph_gradient(theta, k, order=2):
    theta = _theta_array(theta)
    grad = np.zeros_like(theta)
    for m in range(1, order + 1):
        grad -= k * float((theta**m).sum()) ** (k - 1) * theta ** (m - 1)
    return grad


def _check_order(order):
    if order not in (1, 2, 3, 4, 5):
        raise DomainError(f"Taylor order must be in 1..5, got {order}")


def log_likelihood_approx(g, theta, k, sigma=None, taylor_order=2):
    """O(E k) log-likelihood: Taylor empty-graph term plus exact edge corrections."""
    _check_order(taylor_order)
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    s = _sigma_array(sigma, g.n)
    lp, l1m = _kernels.edge_loglik(g.src, g.dst, s, _tabs(theta, k))
    if not (math.isfinite(lp) and math.isfinite(l1m)):
        return -math.inf
    return empty_graph_loglik(theta, k, taylor_order) - l1m + lp


def log_likelihood_gradient(g, theta, k, sigma=None, taylor_order=2):
    """Analytic gradient of :func:`log_likelihood_approx` at a fixed permutation."""
    _check_order(taylor_order)
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    s = _sigma_array(sigma, g.n)
    grad = np.zeros_like(theta)
    _kernels.edge_totals(g.src, g.dst, s, theta, _tabs(theta, k), theta.shape[0], k, grad)
    return grad + empty_graph_gradient(theta, k, taylor_order)


def likelihood_ratio_swap(g, theta, k, sigma, j, l):
    """Log of P(sigma' | G) / P(sigma | G) where sigma' swaps nodes ``j`` and ``l``.

    Only edges incident to ``j`` or ``l`` are visited, O((deg j + deg l) k).
    The no-edge mass summed over all cells does not depend on the
    permutation, so the result is exact.
    """
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    s = _sigma_array(sigma, g.n)
    return float(_kernels.swap_delta(g.out_ptr, g.out_idx, g.in_ptr, g.in_idx, s,
                                     _tabs(theta, k), int(j), int(l)))


# ---------------------------------------------------------------------------
# permutation sampling


@dataclass
class FitConfig:
    """Settings for :func:`fit` and the permutation sampler.

    ``learning_rate`` is multiplied by ``1 / E`` before use, and each
    update of a single entry is capped at ``max_step``.  With
    ``halve_on_decrease`` the rate is halved whenever the averaged
    log-likelihood drops between steps.
    """

    n1: int = 2
    iterations: int = 100
    samples_per_step: int = 500_000
    burn_in: int = 10_000
    omega: float = 0.6
    learning_rate: float = 0.3
    max_step: float = 0.05
    halve_on_decrease: bool = False
    min_theta: float = 0.001
    max_theta: float = 0.999
    taylor_order: int = 2
    seed: int | None = None
    init: np.ndarray | None = None
    initial_burn_in: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise DomainError("omega must lie in [0, 1]")
        if not 0.0 < self.min_theta < self.max_theta < 1.0:
            raise DomainError("need 0 < min_theta < max_theta < 1")
        if self.taylor_order not in (2, 3, 4, 5):
            raise DomainError("taylor_order must be one of 2..5")
        if self.n1 < 2:
            raise DomainError("n1 must be at least 2")
        if self.iterations < 0 or self.samples_per_step < 1 or self.burn_in < 0:
            raise DomainError("iterations, samples and burn-in must be non-negative")
        if not self.learning_rate > 0.0 or not self.max_step > 0.0:
            raise DomainError("learning_rate and max_step must be positive")


@dataclass
class LikelihoodState:
    """Chain state: current permutation, running sums and bookkeeping."""

    sigma: NodePermutation
    rng: np.random.Generator
    loglik: float = math.nan
    gradient: np.ndarray | None = None
    accepted: int = 0
    proposed: int = 0
    last_acceptance: float = math.nan
    trace: list = field(default_factory=list)
    _theta: np.ndarray | None = field(default=None, repr=False)
    _edge_ll: float = field(default=0.0, repr=False)
    _edge_grad: np.ndarray | None = field(default=None, repr=False)

    @property
    def acceptance(self):
        return self.accepted / self.proposed if self.proposed else math.nan

    def log_trace(self):
        """All recorded log-likelihood samples, concatenated."""
        return np.concatenate(self.trace) if self.trace else np.zeros(0)


def new_state(g, seed=None, sigma=None):
    """Fresh chain state; a uniformly random permutation unless ``sigma`` is given."""
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    if sigma is None:
        sigma = NodePermutation.random(g.n, rng)
    elif not isinstance(sigma, NodePermutation):
        sigma = NodePermutation(sigma)
    return LikelihoodState(sigma=sigma, rng=rng)


def _sync(g, theta, k, state):
    """Recompute the running edge sums for ``theta`` from scratch."""
    grad = np.zeros_like(theta)
    state._edge_ll = _kernels.edge_totals(g.src, g.dst, state.sigma.forward, theta,
                                          _tabs(theta, k), theta.shape[0], k, grad)
    state._edge_grad = grad
    state._theta = theta.copy()


def _run(g, theta, k, state, n_steps, n_discard, omega, track_grad, order=2):
    if state._theta is None or not np.array_equal(state._theta, theta):
        _sync(g, theta, k, state)
    _kernels.seed(int(state.rng.integers(2**31 - 1)))
    trace = np.empty(n_steps)
    sum_grad = np.zeros_like(theta)
    edge_ll, sum_ll, acc, n_late, acc_late = _kernels.run_chain(
        g.out_ptr, g.out_idx, g.in_ptr, g.in_idx, g.src, g.dst,
        state.sigma.forward, state.sigma.inverse, theta, _tabs(theta, k),
        theta.shape[0], k, n_steps, n_discard, omega,
        state._edge_ll, state._edge_grad, sum_grad, trace, track_grad)
    state._edge_ll = edge_ll
    const = empty_graph_loglik(theta, k, order)
    state.trace.append(trace + const)
    state.accepted += acc
    state.proposed += n_steps
    state.loglik = const + edge_ll
    return sum_ll, sum_grad, n_late, acc_late


def sample_permutation(g, theta, k, state, config=None, steps=1):
    """Advance the chain by ``steps`` Metropolis moves and return the permutation.

    Each move proposes, with probability ``omega``, to swap two uniformly
    chosen nodes, and otherwise to swap the endpoints of a uniformly chosen
    edge; it is accepted with probability ``min(1, ratio)``.
    """
    config = config or FitConfig(n1=_theta_array(theta).shape[0])
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    _run(g, theta, k, state, steps, steps, config.omega, False, config.taylor_order)
    return state.sigma


def estimate_gradient(g, theta, k, state, config, burn_in=None, samples=None):
    """Average log-likelihood and gradient over sampled permutations.

    Runs ``burn_in`` discarded moves and then ``samples`` moves whose
    current values are averaged.  The empty-graph part of both quantities
    is constant in the permutation and added in closed form.

    Returns
    -------
    (float, ndarray)
        The averaged log-likelihood (``-inf`` when not finite) and gradient.
    """
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    burn_in = config.burn_in if burn_in is None else burn_in
    samples = config.samples_per_step if samples is None else samples
    _sync(g, theta, k, state)
    sum_ll, sum_grad, n_late, acc_late = _run(
        g, theta, k, state, burn_in + samples, burn_in, config.omega, True, config.taylor_order)
    ll = empty_graph_loglik(theta, k, config.taylor_order) + sum_ll / n_late
    grad = empty_graph_gradient(theta, k, config.taylor_order) + sum_grad / n_late
    state.gradient = grad
    state.last_acceptance = acc_late / n_late
    if not math.isfinite(ll):
        ll = -math.inf
    return ll, grad


# ---------------------------------------------------------------------------
# fitting


@dataclass
class FitResult:
    theta_hat: InitiatorMatrix
    loglik: float
    bic: float
    k: int
    n: int
    padded_n: int
    trace: list
    acceptance: float
    state: LikelihoodState = field(repr=False)
    best_step: int = 0

    def thetas(self):
        """Parameter matrices at every evaluated step, shape ``(steps, n1, n1)``."""
        return np.array([t["theta"] for t in self.trace])

    def logliks(self):
        return np.array([t["loglik"] for t in self.trace])

    def diagnostics(self, max_lag=1000):
        """Autocorrelation and acceptance of the chain's last sampling run."""
        from .diagnostics import chain_diagnostics

        last = self.state.trace[-1] if self.state.trace else np.zeros(1)
        d = chain_diagnostics([last], max_lag=max_lag)
        d.acceptance = self.trace[-1]["acceptance"] if self.trace else math.nan
        return d


def bic_score(fit_or_loglik, n, n1=None):
    """Bayesian information criterion ``-l + n1^2 log(N^2) / 2`` (natural log)."""
    if isinstance(fit_or_loglik, FitResult):
        ll = fit_or_loglik.loglik
        n1 = fit_or_loglik.theta_hat.n1
    else:
        ll = float(fit_or_loglik)
    return -ll + 0.5 * n1 * n1 * math.log(float(n) ** 2)


def _initial_theta(config, rng):
    if config.init is not None:
        theta = _theta_array(config.init)
        if theta.shape != (config.n1, config.n1):
            raise DomainError("initial theta has the wrong shape")
    else:
        theta = rng.uniform(0.1, 0.9, size=(config.n1, config.n1))
    return np.clip(theta, config.min_theta, config.max_theta)


def _scale_search(g, theta, k, sigma, config):
    """Best shift ``theta + t`` (same ``t`` for every entry) at a fixed permutation.

    The all-ones direction is by far the stiffest one of the likelihood:
    it moves the expected edge count ``(sum theta)^k``.  Solving for it
    exactly leaves the gradient step to the well-conditioned remainder.
    """
    lo = config.min_theta - theta.min()
    hi = config.max_theta - theta.max()
    if hi - lo < 1e-9:
        return theta

    def neg(t):
        ll = log_likelihood_approx(g, theta + t, k, sigma, config.taylor_order)
        return -ll if math.isfinite(ll) else math.inf

    t = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                 options={"xatol": 1e-6}).x
    if neg(t) > neg(0.0):
        t = 0.0
    return np.clip(theta + t, config.min_theta, config.max_theta)


def fit(g, config=None, callback=None):
    """Fit an ``n1 x n1`` initiator to ``g`` by stochastic gradient ascent.

    The graph is zero-padded to ``n1**k`` nodes.  Every step estimates the
    log-likelihood and its gradient from sampled permutations and then

    1. moves ``theta`` along the gradient with its mean removed, by
       ``learning_rate / E`` times that gradient, each entry capped at
       ``max_step``;
    2. shifts all entries by a common amount chosen by a bounded line
       search on the log-likelihood at the chain's current permutation.

    Entries are clamped to ``[min_theta, max_theta]`` and the chain's
    permutation carries over to the next step.

    The per-step log-likelihoods in the trace are averages over
    permutations sampled at that step's own ``theta``.  They are not
    comparable across steps: a sharper initiator concentrates the chain
    on better permutations and scores higher without fitting better.  So
    every iterate is rescored at the permutation the chain ends on, and
    the best of those scores is returned.

    ``callback(step, theta, loglik)`` is invoked after every evaluation.

    Raises
    ------
    FitError
        When the log-likelihood stays non-finite over three attempts.
    """
    config = config or FitConfig()
    if g.e == 0:
        raise DomainError("cannot fit an empty graph")
    gp, k = pad_to_power(g, config.n1)
    rng = np.random.default_rng(config.seed)
    theta = _initial_theta(config, rng)
    state = new_state(gp, rng)
    lr = config.learning_rate / g.e
    trace = []
    prev_ll = None
    first_burn = config.initial_burn_in if config.initial_burn_in is not None else config.burn_in

    for step in range(config.iterations + 1):
        ll = -math.inf
        for attempt in range(3):
            burn = first_burn if step == 0 else config.burn_in
            ll, grad = estimate_gradient(gp, theta, k, state, config, burn_in=burn * (attempt + 1))
            if math.isfinite(ll) and np.all(np.isfinite(grad)):
                break
            log.warning("step %d: non-finite log-likelihood, retrying", step)
        else:
            raise FitError(f"non-finite log-likelihood at step {step}", trace)
        trace.append({"step": step, "loglik": ll, "theta": theta.copy(),
                      "gradient": grad.copy(), "acceptance": state.last_acceptance})
        log.info("step %d: loglik %.3f theta %s", step, ll, np.round(theta, 4).tolist())
        if callback is not None:
            callback(step, theta.copy(), ll)
        if step == config.iterations:
            break
        if config.halve_on_decrease and prev_ll is not None and ll < prev_ll:
            lr *= 0.5
        prev_ll = ll
        delta = np.clip(lr * (grad - grad.mean()), -config.max_step, config.max_step)
        theta = np.clip(theta + delta, config.min_theta, config.max_theta)
        theta = _scale_search(gp, theta, k, state.sigma, config)

    sigma = state.sigma.forward
    for row in trace:
        row["score"] = log_likelihood_approx(gp, row["theta"], k, sigma, config.taylor_order)
    best_step = max(range(len(trace)), key=lambda i: trace[i]["score"])
    theta_hat, ll_hat = trace[best_step]["theta"], trace[best_step]["score"]
    return FitResult(
        theta_hat=InitiatorMatrix(theta_hat),
        loglik=ll_hat,
        bic=bic_score(ll_hat, g.n, config.n1),
        k=k,
        n=g.n,
        padded_n=gp.n,
        trace=trace,
        acceptance=state.acceptance,
        state=state,
        best_step=best_step,
    )


def relabel_initiator(theta, perm):
    """Permute rows and columns of ``theta`` simultaneously."""
    theta = _theta_array(theta)
    perm = np.asarray(perm)
    return theta[np.ix_(perm, perm)]


def initiator_distance(a, b):
    """Smallest L1 distance between ``a`` and any relabeling of ``b``."""
    a = _theta_array(a)
    b = _theta_array(b)
    return min(float(np.abs(a - relabel_initiator(b, p)).sum())
               for p in itertools.permutations(range(a.shape[0])))


def remap_sigma_for_relabel(sigma, perm, n1, k):
    """Positions under a relabeled initiator that give the same likelihood.

    If ``theta' = theta[perm][:, perm]`` then entry ``theta'[i, j]`` equals
    ``theta[perm[i], perm[j]]``, so every digit ``d`` of a position must be
    replaced by ``inv(perm)[d]``.
    """
    inv = np.argsort(perm)
    s = _sigma_array(sigma, n1**k)
    out = np.zeros_like(s)
    mult = 1
    rest = s.copy()
    for _ in range(k):
        out += inv[rest % n1] * mult
        rest //= n1
        mult *= n1
    return out


@dataclass
class SelectionRow:
    n1: int
    loglik: float
    bic: float
    padded_n: int
    nonisolated: int
    theta: InitiatorMatrix | None = None
    error: str | None = None


def select_initiator_size(g, sizes, config=None):
    """Fit one initiator per size and score each with BIC.

    ``nonisolated`` counts nodes with non-zero degree in a graph generated
    from the fitted initiator.  Failures are recorded per row.

    Returns
    -------
    (list of SelectionRow, int or None)
        The table and the size with the lowest BIC.
    """
    config = config or FitConfig()
    rows = []
    for n1 in sizes:
        if not 2 <= n1 <= 9:
            raise DomainError(f"initiator size {n1} outside 2..9")
        cfg = FitConfig(**{**config.__dict__, "n1": n1, "init": None})
        try:
            res = fit(g, cfg)
            sample = generate_fast(res.theta_hat, seed=config.seed, k=res.k)
            rows.append(SelectionRow(n1, res.loglik, res.bic, res.padded_n,
                                     sample.nonisolated_count(), res.theta_hat))
        except (KroneckerError, ValueError) as exc:
            rows.append(SelectionRow(n1, math.nan, math.nan, 0, 0, None, str(exc)))
    scored = [r for r in rows if math.isfinite(r.bic)]
    best = min(scored, key=lambda r: r.bic).n1 if scored else None
    return rows, best


def uniform_permutation_likelihood_profile(g, theta, k, count, seed=None, taylor_order=2):
    """Log-likelihoods at ``count`` uniformly random permutations, sorted descending."""
    if count < 1:
        raise DomainError("count must be >= 1")
    theta = _theta_array(theta)
    _check_size(g, theta, k)
    rng = np.random.default_rng(seed)
    _kernels.seed(int(rng.integers(2**31 - 1)))
    edge = _kernels.random_permutation_profile(g.src, g.dst, g.n, _tabs(theta, k),
                                               int(count))
    return np.sort(edge + empty_graph_loglik(theta, k, taylor_order))[::-1]
