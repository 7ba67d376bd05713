"""Command-line interface: ``krongraph generate|fit|stats|compare|select``.

Every run writes a manifest (flat ``key = value`` text) recording the
subcommand, the resolved parameters, the seed, the paths and the timings.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    InitiatorMatrix,
    KroneckerPowerSpec,
    generate_deterministic,
    generate_fast,
    read_initiator,
    realize_naive,
    write_initiator,
)
from .diagnostics import autocorrelation, psr_series, run_chains
from .errors import DomainError, EmptyGraphError, FitError, KroneckerError, ParseError
from .graph import SparseGraph, load_edge_list, read_node_count, save_edge_list
from .kronfit import FitConfig, fit, select_initiator_size
from .stats import SERIES_KINDS, compare_reports, compute_report, overlay

log = logging.getLogger("krongraph")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad combination of arguments; reported with exit code 2."""


# ---------------------------------------------------------------- helpers


def _fmt(x):
    if x is None:
        return "undefined"
    if isinstance(x, float):
        return "undefined" if math.isnan(x) else repr(x)
    return str(x)


def write_manifest(path, entries):
    """Write ``key = value`` lines; values are single-line strings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in entries.items():
            text = _fmt(value).replace("\n", " ")
            fh.write(f"{key} = {text}\n")


def read_manifest(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line and not line.lstrip().startswith("#"):
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    return out


def replay(manifest_path):
    """Re-run the command recorded in a manifest; returns the exit code."""
    argv = shlex.split(read_manifest(manifest_path)["argv"])
    return main(argv)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _initiator(args):
    if args.theta and args.theta_file:
        raise UsageError("give either --theta or --theta-file, not both")
    try:
        if args.theta:
            return InitiatorMatrix.from_inline(args.theta)
        if args.theta_file:
            return read_initiator(args.theta_file)
    except (ParseError, DomainError) as exc:
        raise UsageError(f"invalid initiator: {exc}") from None
    raise UsageError("an initiator is required (--theta or --theta-file)")


def _read_graph(path, undirected=False):
    g = load_edge_list(path, directed=not undirected)
    n = read_node_count(path)
    if n is not None and n > g.n:
        g = SparseGraph(n, g.src, g.dst)
    return g


def _config(args, n1=None):
    init = None
    if getattr(args, "init", None):
        try:
            init = InitiatorMatrix.from_inline(args.init).values
        except (ParseError, DomainError) as exc:
            raise UsageError(f"invalid --init: {exc}") from None
    try:
        return FitConfig(
            n1=n1 if n1 is not None else args.n1,
            iterations=args.iterations,
            samples_per_step=args.samples,
            burn_in=args.burn_in,
            omega=args.omega,
            learning_rate=args.learning_rate,
            max_step=args.max_step,
            halve_on_decrease=args.halve_on_decrease,
            min_theta=args.min_theta,
            max_theta=args.max_theta,
            taylor_order=args.taylor_order,
            seed=args.seed,
            init=init,
        )
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _base_manifest(args, argv):
    return {
        "subcommand": args.command,
        "version": __version__,
        "argv": shlex.join(argv),
        "seed": args.seed,
    }


# ---------------------------------------------------------------- subcommands


def cmd_generate(args, argv):
    init = _initiator(args)
    if args.mode == "deterministic" and not init.is_binary():
        raise UsageError("deterministic mode needs a 0/1 initiator")
    spec = KroneckerPowerSpec(init, args.k)
    t0 = time.perf_counter()
    if args.mode == "deterministic":
        g = generate_deterministic(spec)
    elif args.mode == "naive":
        g = realize_naive(spec, seed=args.seed)
    else:
        g = generate_fast(spec, seed=args.seed)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    save_edge_list(g, out)
    manifest = _base_manifest(args, argv)
    manifest.update({
        "initiator": " ; ".join(" ".join(repr(float(x)) for x in row) for row in init.values),
        "k": args.k, "mode": args.mode, "output": str(out),
        "n": g.n, "e": g.e, "expected_edges": spec.expected_edges,
        "seconds": round(elapsed, 6),
    })
    write_manifest(f"{out}.manifest", manifest)
    print(f"n={g.n} e={g.e} expected_e={spec.expected_edges:.1f} time={elapsed:.3f}s")
    return EXIT_OK


def _write_fit_outputs(prefix, result_trace, n1):
    header = ["step", "loglik"] + [f"theta_{i}{j}" for i in range(n1) for j in range(n1)]
    rows = [[t["step"], t["loglik"], *t["theta"].ravel().tolist()] for t in result_trace]
    _write_csv(f"{prefix}.trace.csv", header, rows)


def cmd_fit(args, argv):
    g = _read_graph(args.graph, args.undirected)
    cfg = _config(args)
    prefix = args.out
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    manifest = _base_manifest(args, argv)
    manifest.update({k: v for k, v in vars(cfg).items() if k != "init"})
    manifest.update({"graph": args.graph, "output_prefix": prefix, "n": g.n, "e": g.e})
    t0 = time.perf_counter()
    try:
        res = fit(g, cfg)
    except FitError as exc:
        _write_fit_outputs(prefix, exc.trace or [], cfg.n1)
        manifest.update({"status": "failed", "error": str(exc),
                         "seconds": round(time.perf_counter() - t0, 3)})
        write_manifest(f"{prefix}.manifest", manifest)
        raise
    fit_seconds = time.perf_counter() - t0
    write_initiator(res.theta_hat, f"{prefix}.theta.txt",
                    comment=f"loglik {res.loglik!r}\nbic {res.bic!r}")
    _write_fit_outputs(prefix, res.trace, cfg.n1)

    # mixing diagnostics at the fitted parameters
    chain_trace = res.state.trace[-1] if res.state.trace else np.zeros(0)
    acf, defined = autocorrelation(chain_trace, args.max_lag) if chain_trace.size else (np.zeros(0), False)
    _write_csv(f"{prefix}.acf.csv", ["lag", "autocorrelation"], enumerate(acf.tolist()))
    psr_rows = []
    if args.chains >= 2 and args.chain_steps > 1:
        gp_n = res.padded_n
        gp = SparseGraph(gp_n, g.src, g.dst)
        # first chain resumes from the fit's permutation, the rest start at random
        starts = [res.state.sigma.forward] + [None] * (args.chains - 1)
        run = run_chains(gp, res.theta_hat, res.k, n_chains=args.chains,
                         n_steps=args.chain_steps, omega=cfg.omega, seed=args.seed,
                         record_every=args.record_every, workers=args.threads,
                         starts=starts)
        if run.traces.shape[1] >= 4:
            lengths, psr = psr_series(run.traces)
            psr_rows = list(zip((lengths * args.record_every).tolist(), psr.tolist()))
    _write_csv(f"{prefix}.psr.csv", ["length", "psr"], psr_rows)

    manifest.update({
        "status": "ok", "loglik": res.loglik, "bic": res.bic, "k": res.k,
        "padded_n": res.padded_n, "best_step": res.best_step,
        "acceptance": res.acceptance, "autocorrelation_defined": defined,
        "theta_hat": " ; ".join(" ".join(repr(float(x)) for x in row)
                                for row in res.theta_hat.values),
        "seconds": round(fit_seconds, 3),
        "seconds_total": round(time.perf_counter() - t0, 3),
    })
    write_manifest(f"{prefix}.manifest", manifest)
    print(f"loglik={res.loglik:.3f} bic={res.bic:.3f} theta={res.theta_hat!r} "
          f"time={fit_seconds:.1f}s")
    return EXIT_OK


def _kinds(args):
    kinds = tuple(args.stat) if args.stat else SERIES_KINDS
    bad = set(kinds) - set(SERIES_KINDS)
    if bad:
        raise UsageError(f"unknown statistics {sorted(bad)}; choose from {SERIES_KINDS}")
    return kinds


def _report(g, args, kinds):
    return compute_report(g, kinds=kinds, top_s=args.top_s, undirected=args.undirected,
                          sample_sources=args.sources, seed=args.seed or 0,
                          workers=args.threads)


def _read_graph_or_empty(path, undirected):
    try:
        return _read_graph(path, undirected)
    except EmptyGraphError:
        return SparseGraph(read_node_count(path) or 0)


def cmd_stats(args, argv):
    kinds = _kinds(args)
    g = _read_graph_or_empty(args.graph, args.undirected)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report = _report(g, args, kinds)
    for kind in kinds:
        s = report.series.get(kind)
        # an edgeless graph has no distributions worth plotting
        rows = s.points() if s is not None and g.e > 0 else []
        _write_csv(out / f"{kind}.csv", ["x", "y"], rows)
    scal = report.scalars.as_dict()
    _write_csv(out / "summary.csv", ["statistic", "value"], scal.items())
    manifest = _base_manifest(args, argv)
    manifest.update({"graph": args.graph, "output_dir": str(out),
                     "statistics": ",".join(kinds),
                     "seconds": round(time.perf_counter() - t0, 3)})
    write_manifest(out / "manifest.txt", manifest)
    print(" ".join(f"{k}={_fmt(v)}" for k, v in scal.items()))
    return EXIT_OK


def cmd_compare(args, argv):
    kinds_a = tuple(args.stat_a) if args.stat_a else _kinds(args)
    kinds_b = tuple(args.stat_b) if args.stat_b else kinds_a
    if set(kinds_a) != set(kinds_b):
        raise UsageError("both graphs must use the same statistic selection")
    _kinds(argparse.Namespace(stat=list(kinds_a)))
    ga = _read_graph(args.graph_a, args.undirected)
    gb = _read_graph(args.graph_b, args.undirected)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ra = _report(ga, args, kinds_a)
    rb = _report(gb, args, kinds_b)
    div = compare_reports(ra, rb)
    for kind in sorted(ra.series):
        _write_csv(out / f"overlay-{kind}.csv", ["x", "y_a", "y_b"],
                   overlay(ra.series[kind], rb.series[kind]))
    _write_csv(out / "divergence.csv", ["statistic", "divergence"], div.items())
    manifest = _base_manifest(args, argv)
    manifest.update({"graph_a": args.graph_a, "graph_b": args.graph_b,
                     "output_dir": str(out), "statistics": ",".join(kinds_a),
                     "seconds": round(time.perf_counter() - t0, 3)})
    write_manifest(out / "manifest.txt", manifest)
    for k, v in div.items():
        print(f"{k}\t{_fmt(v)}")
    return EXIT_OK


def cmd_select(args, argv):
    sizes = args.sizes
    if any(not 2 <= s <= 9 for s in sizes):
        raise UsageError("sizes must lie in 2..9")
    g = _read_graph(args.graph, args.undirected)
    cfg = _config(args, n1=sizes[0])
    t0 = time.perf_counter()
    rows, best = select_initiator_size(g, sizes, cfg)
    header = ["n1", "loglik", "bic", "padded_n", "nonisolated", "best", "error"]
    table = [[r.n1, r.loglik, r.bic, r.padded_n, r.nonisolated, int(r.n1 == best),
              r.error or ""] for r in rows]
    _write_csv(f"{args.out}.select.csv", header, table)
    manifest = _base_manifest(args, argv)
    manifest.update({k: v for k, v in vars(cfg).items() if k not in ("init", "n1")})
    manifest.update({"graph": args.graph, "sizes": ",".join(map(str, sizes)),
                     "best_n1": best, "seconds": round(time.perf_counter() - t0, 3)})
    write_manifest(f"{args.out}.manifest", manifest)
    print("\t".join(header[:-1]))
    for row, r in zip(table, rows):
        mark = " *" if r.n1 == best else ""
        err = f"  error: {r.error}" if r.error else ""
        print("\t".join(_fmt(v) for v in row[:5]) + mark + err)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_fit_flags(p):
    d = FitConfig()
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--samples", type=int, default=d.samples_per_step,
                   help="permutation samples per gradient step (after burn-in)")
    p.add_argument("--burn-in", type=int, default=d.burn_in)
    p.add_argument("--omega", type=float, default=d.omega,
                   help="probability of the SwapNodes proposal")
    p.add_argument("--learning-rate", type=float, default=d.learning_rate,
                   help="base rate, divided by the edge count")
    p.add_argument("--max-step", type=float, default=d.max_step)
    p.add_argument("--halve-on-decrease", action="store_true",
                   help="halve the learning rate when the log-likelihood drops")
    p.add_argument("--min-theta", type=float, default=d.min_theta)
    p.add_argument("--max-theta", type=float, default=d.max_theta)
    p.add_argument("--taylor-order", type=int, default=d.taylor_order)
    p.add_argument("--undirected", action="store_true",
                   help="read each edge-list line as an undirected edge")


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--out", required=True)
    shared.add_argument("--threads", type=int, default=1)
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="krongraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[shared], help="generate a Kronecker graph")
    p.add_argument("--theta", help='inline initiator, rows separated by ";"')
    p.add_argument("--theta-file")
    p.add_argument("-k", type=int, required=True, help="Kronecker power")
    p.add_argument("--mode", choices=("fast", "naive", "deterministic"), default="fast")

    p = sub.add_parser("fit", parents=[shared], help="fit an initiator to a graph")
    p.add_argument("graph")
    p.add_argument("--n1", type=int, default=2)
    p.add_argument("--init", help="inline initial initiator")
    p.add_argument("--chains", type=int, default=4,
                   help="independent chains for the scale-reduction diagnostic")
    p.add_argument("--chain-steps", type=int, default=100_000)
    p.add_argument("--record-every", type=int, default=100)
    p.add_argument("--max-lag", type=int, default=1000)
    _add_fit_flags(p)

    stat_flags = argparse.ArgumentParser(add_help=False)
    stat_flags.add_argument("--stat", action="append", choices=SERIES_KINDS,
                            help="statistic to compute (repeatable; default all)")
    stat_flags.add_argument("--top-s", type=int, default=10, help="singular values kept")
    stat_flags.add_argument("--sources", type=int, default=None,
                            help="BFS source sample for hop plots (default exact up to a cap)")
    stat_flags.add_argument("--undirected", action="store_true")

    p = sub.add_parser("stats", parents=[shared, stat_flags], help="network statistics")
    p.add_argument("graph")

    p = sub.add_parser("compare", parents=[shared, stat_flags], help="compare two graphs")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--stat-a", action="append", choices=SERIES_KINDS)
    p.add_argument("--stat-b", action="append", choices=SERIES_KINDS)

    p = sub.add_parser("select", parents=[shared], help="choose the initiator size by BIC")
    p.add_argument("graph")
    p.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4])
    _add_fit_flags(p)
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "stats": cmd_stats,
    "compare": cmd_compare,
    "select": cmd_select,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"krongraph {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KroneckerError, OSError, ValueError) as exc:
        print(f"krongraph {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
