"""Network statistics used to compare real and synthetic graphs.

Distributions are returned as :class:`DistributionSeries` (x strictly
increasing, y non-negative).  Triangle and clustering statistics use the
undirected simple view of the graph (both directions merged, self-loops
dropped); path statistics follow out-edges unless ``undirected=True``.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .errors import ComparisonError, DomainError, UndefinedStatisticError
from .graph import hop_histogram, weakly_connected_components

EXACT_HOP_CAP = 50_000
BIN_RATIO = 1.3
SERIES_KINDS = ("degree-in", "degree-out", "scree", "network-value",
                "triangle-participation", "hop-plot")


@dataclass(frozen=True)
class DistributionSeries:
    kind: str
    x: np.ndarray
    y: np.ndarray
    binning: str = "raw"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape:
            raise ValueError("x and y differ in length")
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.size

    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def to_csv(self, path):
        """Write ``x,y`` rows at full precision."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for a, b in zip(self.x.tolist(), self.y.tolist()):
                w.writerow([repr(a), repr(b)])


def _counts_series(kind, values):
    xs, ys = np.unique(np.asarray(values), return_counts=True)
    return DistributionSeries(kind, xs, ys)


def exponential_bins(series, ratio=BIN_RATIO):
    """Sum counts into buckets ``[ratio**i, ratio**(i+1))``; x = 0 keeps its own bucket.

    The x of each bucket is its lower boundary.
    """
    if ratio <= 1.0:
        raise DomainError("binning ratio must exceed 1")
    x, y = series.x, series.y
    out = {}
    for xi, yi in zip(x, y):
        if xi <= 0:
            key = -math.inf
        else:
            key = math.floor(math.log(xi) / math.log(ratio) + 1e-12)
        out[key] = out.get(key, 0.0) + yi
    keys = sorted(out)
    bx = [0.0 if kk == -math.inf else ratio**kk for kk in keys]
    return DistributionSeries(series.kind, bx, [out[kk] for kk in keys], binning="exponential")


def degree_distribution(g, direction="out"):
    """Number of nodes with each degree, including degree 0."""
    if direction == "out":
        deg = g.out_degree()
    elif direction == "in":
        deg = g.in_degree()
    else:
        raise DomainError(f"direction must be 'in' or 'out', got {direction!r}")
    return _counts_series(f"degree-{direction}", deg)


def _sources(g, sample, seed):
    if sample is None or sample == "all" or sample >= g.n:
        return np.arange(g.n), 1.0
    rng = np.random.default_rng(seed)
    src = np.sort(rng.choice(g.n, size=int(sample), replace=False))
    return src, g.n / src.size


def hop_plot(g, sample_sources=None, undirected=False, seed=0, exact_cap=EXACT_HOP_CAP,
             workers=1):
    """Cumulative number of ordered pairs within ``h`` hops, ``h = 0, 1, ...``.

    Pairs ``(u, u)`` count at ``h = 0``.  With ``sample_sources=None`` every
    node is a BFS source when ``n <= exact_cap``; otherwise (or when an
    integer is given) uniformly sampled sources are used and counts are
    scaled by ``n / samples``.
    """
    if g.n == 0:
        return DistributionSeries("hop-plot", [], [])
    if sample_sources is None and g.n > exact_cap:
        sample_sources = exact_cap
    sources, scale = _sources(g, sample_sources, seed)
    if workers > 1 and sources.size > workers:
        chunks = np.array_split(sources, workers)
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda s: hop_histogram(g, s, undirected), chunks))
        size = max(p.size for p in parts)
        hist = sum(np.pad(p, (0, size - p.size)) for p in parts)
    else:
        hist = hop_histogram(g, sources, undirected)
    cum = np.cumsum(hist).astype(float) * scale
    return DistributionSeries("hop-plot", np.arange(cum.size), cum)


def hop_fraction(hops, x):
    """Evaluate the linearly interpolated reachable fraction ``g(x)``."""
    frac = hops.y / hops.y[-1]
    return float(np.interp(x, hops.x, frac))


def effective_diameter(g=None, q=0.9, hops=None, **hop_kwargs):
    """Interpolated hop count at which a fraction ``q`` of connected pairs is reached.

    The hop plot is normalised by the number of connected ordered pairs
    (self-pairs included, at distance 0) and interpolated linearly between
    integer hops, starting from ``(0, g(0))``.
    """
    if hops is None:
        hops = hop_plot(g, **hop_kwargs)
    if len(hops) < 2 or hops.y[-1] <= hops.y[0]:
        raise UndefinedStatisticError("no reachable pairs of distinct nodes")
    frac = hops.y / hops.y[-1]
    if frac[0] >= q:
        return 0.0
    h = int(np.argmax(frac >= q - 1e-15))
    lo, hi = frac[h - 1], frac[h]
    return float(h - 1 + (q - lo) / (hi - lo))


def integer_diameter(g=None, hops=None, **hop_kwargs):
    """Largest finite hop distance."""
    if hops is None:
        hops = hop_plot(g, **hop_kwargs)
    if len(hops) < 2:
        raise UndefinedStatisticError("no reachable pairs of distinct nodes")
    return int(hops.x[-1])


def _deterministic_start(n):
    # fixed, dense start vector so the iteration is reproducible
    v = np.cos(np.arange(1, n + 1) * 0.618033988749895) + 1.5
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class SpectralResult:
    scree: DistributionSeries
    network_value: DistributionSeries
    converged: bool = True


def scree_and_network_values(g, top_s=10, tol=1e-6, maxiter=1000):
    """Top singular values and the sorted leading left singular vector.

    Uses implicitly restarted Lanczos with a fixed start vector.  If the
    iteration does not converge the partial result is returned with
    ``converged=False``.
    """
    if not 1 <= top_s <= g.n:
        raise DomainError(f"top_s must be in 1..{g.n}")
    a = g.adjacency()
    converged = True
    if top_s < g.n - 1 and g.e > 0:
        try:
            u, s, _ = svds(a, k=top_s, tol=tol, maxiter=maxiter,
                           v0=_deterministic_start(g.n), solver="arpack")
        except ArpackNoConvergence as exc:
            converged = False
            warnings.warn(f"singular value iteration did not converge: {exc}")
            s = np.asarray(exc.eigenvalues, dtype=float)
            s = np.sqrt(np.clip(s, 0, None)) if s.size else np.zeros(1)
            u = np.zeros((g.n, 1))
            if exc.eigenvectors is not None and np.size(exc.eigenvectors):
                u = np.asarray(exc.eigenvectors)
        order = np.argsort(s)[::-1]
        s = s[order]
        u = u[:, order]
    else:
        u, s, _ = np.linalg.svd(a.toarray())
        s = s[:top_s]
    s = np.clip(s, 0.0, None)
    lead = np.sort(np.abs(u[:, 0]))[::-1]
    ranks = np.arange(1, s.size + 1)
    scree = DistributionSeries("scree", ranks, s)
    value = DistributionSeries("network-value", np.arange(1, lead.size + 1), lead)
    return SpectralResult(scree, value, converged)


def undirected_simple(g):
    """Symmetric 0/1 CSR adjacency without self-loops."""
    a = g.adjacency()
    a = ((a + a.T) > 0).astype(np.float64)
    a.setdiag(0)
    a.eliminate_zeros()
    return sparse.csr_matrix(a)


def triangles_per_node(g):
    a = undirected_simple(g)
    return np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0


def triangle_participation(g):
    """Number of nodes participating in each number of triangles."""
    return _counts_series("triangle-participation", triangles_per_node(g).astype(np.int64))


def average_clustering(g):
    """Mean local clustering coefficient over nodes of degree >= 2 (undirected view)."""
    a = undirected_simple(g)
    deg = np.asarray(a.sum(axis=1)).ravel()
    tri = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0
    mask = deg >= 2
    if not mask.any():
        return 0.0
    local = tri[mask] / (deg[mask] * (deg[mask] - 1) / 2.0)
    return float(local.mean())


def average_path_length(g=None, hops=None, **hop_kwargs):
    """Mean hop distance over connected ordered pairs of distinct nodes."""
    if hops is None:
        hops = hop_plot(g, **hop_kwargs)
    if len(hops) < 2:
        raise UndefinedStatisticError("no reachable pairs of distinct nodes")
    counts = np.diff(hops.y)
    h = hops.x[1:]
    return float(np.sum(h * counts) / np.sum(counts))


def clustering_and_path_stats(g, **hop_kwargs):
    """Average clustering coefficient and average shortest path length."""
    return average_clustering(g), average_path_length(g, **hop_kwargs)


def densification_exponent(snapshots):
    """Least-squares slope of ``log e`` against ``log n``."""
    snaps = np.asarray(snapshots, dtype=float).reshape(-1, 2)
    if snaps.shape[0] < 2 or np.any(snaps[:, 0] < 2) or np.any(snaps[:, 1] <= 0):
        raise UndefinedStatisticError("need >= 2 snapshots with n >= 2 and e > 0")
    x = np.log(snaps[:, 0])
    if np.ptp(x) == 0:
        raise UndefinedStatisticError("all snapshots have the same node count")
    slope, _ = np.polyfit(x, np.log(snaps[:, 1]), 1)
    return float(slope)


@dataclass
class ScalarStats:
    n: int
    e: int
    n_c: int
    frac_largest_wcc: float
    effective_diameter: float | None = None
    integer_diameter: int | None = None
    avg_clustering: float | None = None
    avg_path_length: float | None = None
    dpl_exponent: float | None = None

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class StatReport:
    series: dict = field(default_factory=dict)
    scalars: ScalarStats | None = None


def compute_report(g, kinds=SERIES_KINDS, top_s=10, undirected=False,
                   sample_sources=None, seed=0, workers=1):
    """Compute the requested series plus the scalar summary.

    Statistics that are undefined on ``g`` are left as ``None``.
    """
    unknown = set(kinds) - set(SERIES_KINDS)
    if unknown:
        raise DomainError(f"unknown statistic kinds {sorted(unknown)}")
    series = {}
    if "degree-in" in kinds:
        series["degree-in"] = degree_distribution(g, "in")
    if "degree-out" in kinds:
        series["degree-out"] = degree_distribution(g, "out")
    if "triangle-participation" in kinds:
        series["triangle-participation"] = triangle_participation(g)
    if ("scree" in kinds or "network-value" in kinds) and g.e > 0:
        spec = scree_and_network_values(g, min(top_s, g.n))
        if "scree" in kinds:
            series["scree"] = spec.scree
        if "network-value" in kinds:
            series["network-value"] = spec.network_value
    hops = hop_plot(g, sample_sources=sample_sources, undirected=undirected, seed=seed,
                    workers=workers) if g.n else None
    if "hop-plot" in kinds and hops is not None:
        series["hop-plot"] = hops

    wcc = weakly_connected_components(g)
    scal = ScalarStats(n=g.n, e=g.e, n_c=wcc.largest,
                       frac_largest_wcc=wcc.largest / g.n if g.n else 0.0)
    if hops is not None and len(hops) >= 2 and hops.y[-1] > hops.y[0]:
        scal.effective_diameter = effective_diameter(hops=hops)
        scal.integer_diameter = integer_diameter(hops=hops)
        scal.avg_path_length = average_path_length(hops=hops)
    if g.e > 0:
        scal.avg_clustering = average_clustering(g)
    return StatReport(series, scal)


def _comparable(s):
    """Normalised vector and support used for divergence of one series."""
    if s.kind.startswith("degree") or s.kind == "triangle-participation":
        b = exponential_bins(s)
        total = b.y.sum()
        return dict(zip(b.x.tolist(), (b.y / total if total else b.y).tolist()))
    if s.kind == "hop-plot":
        frac = s.y / s.y[-1] if s.y.size and s.y[-1] else s.y
        return dict(zip(s.x.tolist(), frac.tolist()))
    total = s.y.sum()
    return dict(zip(s.x.tolist(), (s.y / total if total else s.y).tolist()))


def series_divergence(a, b):
    """L1 distance between two normalised series on the union of their supports.

    Cumulative hop plots are extended past their end with their final value.
    """
    if a.kind != b.kind:
        raise ComparisonError(f"cannot compare {a.kind} with {b.kind}")
    da, db = _comparable(a), _comparable(b)
    keys = sorted(set(da) | set(db))
    if a.kind == "hop-plot":
        fa = 1.0 if da else 0.0
        fb = 1.0 if db else 0.0
        return float(sum(abs(da.get(x, fa if x > max(da, default=0) else 0.0)
                             - db.get(x, fb if x > max(db, default=0) else 0.0))
                         for x in keys))
    return float(sum(abs(da.get(x, 0.0) - db.get(x, 0.0)) for x in keys))


def compare_reports(a, b):
    """Per-statistic divergences: L1 for series, absolute difference for scalars."""
    if set(a.series) != set(b.series):
        raise ComparisonError(
            f"statistic kinds differ: {sorted(a.series)} vs {sorted(b.series)}")
    out = {kind: series_divergence(a.series[kind], b.series[kind]) for kind in sorted(a.series)}
    if a.scalars is not None and b.scalars is not None:
        for name, va in a.scalars.as_dict().items():
            vb = getattr(b.scalars, name)
            if va is None or vb is None:
                out[name] = None if va is not vb else 0.0
            else:
                out[name] = abs(float(va) - float(vb))
    return out


def overlay(a, b):
    """Rows ``(x, y_a, y_b)`` over the union of the two supports."""
    da = dict(zip(a.x.tolist(), a.y.tolist()))
    db = dict(zip(b.x.tolist(), b.y.tolist()))
    return [(x, da.get(x, math.nan), db.get(x, math.nan)) for x in sorted(set(da) | set(db))]
