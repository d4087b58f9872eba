"""``crw`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import graphs as gr
from .graphs import GraphError

DEFAULT_SEED = 20240601


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
        _manifest(args, [args.out])
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _manifest(args, outputs: list[str]) -> None:
    flags = {k: v for k, v in vars(args).items() if k != "func" and not k.startswith("_")}
    data = {
        "command": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "wall_clock_s": round(time.perf_counter() - args._t0, 3),
        "outputs": outputs,
    }
    Path(str(outputs[0]) + ".manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _ids(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad vertex list {text!r}") from exc


def _load(path: str):
    try:
        return gr.load_graph(path)
    except (OSError, ValueError, KeyError) as exc:
        raise GraphError(f"cannot read graph {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> None:
    p = args.params
    fam = args.family
    need = {"path": 1, "cycle": 1, "complete": 1, "star": 1, "bull": 0, "torus": 2, "grid": 2,
            "tree": 2, "regular": 2, "gnp": 2}
    if fam not in need:
        raise UsageError(f"unknown family {fam!r}; choose from {', '.join(need)}")
    if len(p) != need[fam]:
        raise UsageError(f"{fam} takes {need[fam]} parameter(s)")
    if fam == "path":
        G = gr.gen_path(int(p[0]))
    elif fam == "cycle":
        G = gr.gen_cycle(int(p[0]))
    elif fam == "complete":
        G = gr.gen_complete(int(p[0]))
    elif fam == "star":
        G = gr.gen_star(int(p[0]))
    elif fam == "bull":
        G = gr.gen_bull()
    elif fam == "torus":
        G = gr.gen_torus(int(p[0]), int(p[1]))
    elif fam == "grid":
        G = gr.gen_grid(int(p[0]), int(p[1]))
    elif fam == "tree":
        G = gr.gen_random_tree(int(p[0]), int(p[1]), args.seed)
    elif fam == "regular":
        G = gr.gen_random_regular(int(p[0]), int(p[1]), args.seed)
    else:
        G = gr.gen_gnp(int(p[0]), float(p[1]), args.seed)
    if args.out:
        gr.save_graph(G, args.out)
        _manifest(args, [args.out])
    else:
        sys.stdout.write(_json(gr.graph_to_dict(G)))


def cmd_simulate(args) -> None:
    from .harness import TrialConfig, estimate_cover, estimate_hitting
    from .strategies import make_strategy

    G = _load(args.graph)
    if (args.target is None) == (not args.cover):
        raise UsageError("give exactly one of --target or --cover")
    targets = _ids(args.target) if args.target is not None else None
    rule = make_strategy(args.strategy, G, target=targets[0] if targets else None, start=args.start, C=args.C)
    config = TrialConfig(args.seed, args.trials, args.steps_cap, args.start, args.threads)
    rep = estimate_cover(G, rule, config) if args.cover else estimate_hitting(G, rule, args.start, targets, config)
    metric = "cover" if args.cover else "hit"
    row = {"strategy": args.strategy, "metric": metric, "n": G.n, **rep.as_dict()}
    if args.format == "csv":
        keys = list(row)
        text = ",".join(keys) + "\n" + ",".join(_fmt(row[k]) for k in keys) + "\n"
    else:
        text = _json(row)
    _emit(args, text)


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def cmd_strategy(args) -> None:
    from . import strategies as st

    G = _load(args.graph)
    name = args.name
    if name == "distance-halving":
        table = st.distance_halving_strategy(G, _need(args.target, "--target"))
    elif name == "greedy":
        table = st.greedy_toward(G, _need(args.target, "--target")).table(G)
    elif name == "tree-sigma":
        y = _need(args.target, "--target")
        table = st.tree_sigma_strategy(G, args.root, args.source if args.source is not None else G.adj[y][0], y)
    elif name == "torus":
        table = st.torus_product_strategy(G, _need(args.target, "--target")).table(G)
    elif name == "optimal":
        from .exact import optimal_hitting

        table = optimal_hitting(G, _need(args.target, "--target")).strategy
    elif name == "uniform":
        from .walk import StrategyTable

        table = StrategyTable.uniform(G)
    else:
        raise UsageError(f"unknown static strategy {name!r}")
    _emit(args, _json({"name": name, "n": G.n, "alpha": table.to_json()}))


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


def cmd_hit_exact(args) -> None:
    from .exact import optimal_hitting

    G = _load(args.graph)
    sol = optimal_hitting(G, _ids(args.target))
    labels = sol.labels()
    out = {
        "target": sorted(sol.targets),
        "h": [float(x) for x in sol.h],
        "ordering": sol.ordering,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "labels": [{"from": u, "to": v, "p": p} for (u, v), p in labels.items()],
    }
    if isinstance(G, gr.Graph):
        out["strategy"] = sol.strategy.to_json()
    _emit(args, _json(out))


def cmd_cover_mdp(args) -> None:
    from .exact import cover_mdp

    G = _load(args.graph)
    covered = _ids(args.covered) if args.covered else []
    cv = cover_mdp(G, args.start, covered)
    first = cv.preference(args.start, cv.initial)
    _emit(args, _json({"start": args.start, "covered": covered, "optimum": cv.optimum,
                       "states": sum(int(np.isfinite(v).sum()) for v in cv.values.values()),
                       "first_step_preference": first}))


def cmd_spectrum(args) -> None:
    from .exact import spectral

    G = _load(args.graph)
    rep = spectral(G)
    _emit(args, _json({"n": G.n, "lambda2": rep.lambda2, "t_rel": rep.t_rel, "pi": [float(x) for x in rep.pi]}))


def cmd_boost(args) -> None:
    from .boost import EventSpec, gamma, solve_event

    G = _load(args.graph)
    try:
        event = EventSpec.parse(args.event)
    except ValueError as exc:
        raise UsageError(f"bad --event {args.event!r}: {exc}") from exc
    p = solve_event(G, args.start, event, "mean").value(args.start)
    g = gamma(G.max_degree) if G.max_degree >= 2 else None
    out = {"event": args.event, "start": args.start, "mode": args.mode, "p": p, "gamma": g}
    if args.mode != "srw":
        q = solve_event(G, args.start, event, args.mode).value(args.start)
        out["q"] = q
        if args.mode == "max":
            out["margin"] = q - p**g if g is not None else None
        else:
            out["margin"] = p**2 - q
    _emit(args, _json(out))


def cmd_bench(args) -> None:
    from .harness import TrialConfig, compare_table, family_graph, rows_to_csv

    sizes = _ids(args.sizes)
    names = [s for s in args.strategies.split(",") if s]
    config = TrialConfig(args.seed, args.trials, args.steps_cap, 0, args.threads)
    cases = [(args.family, family_graph(args.family, n, args.seed)) for n in sizes]
    rows = compare_table(cases, names, config, metrics=args.metrics.split(","))
    _emit(args, rows_to_csv(rows) if args.format == "csv" else _json(rows))


def cmd_table1(args) -> None:
    from .harness import TrialConfig, rows_to_csv, table1

    rows = table1(TrialConfig(args.seed, args.trials, args.steps_cap, 0, args.threads))
    _emit(args, rows_to_csv(rows) if args.format == "csv" else _json(rows))


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"crw: error: {message}\n")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crw", description="Choice random walk toolkit.")
    parser.add_argument("--version", action="version", version=f"crw {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, seed=True, out=True, fmt=None):
        if seed:
            p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        if out:
            p.add_argument("--out", help="output file (stdout if omitted)")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"), default=fmt)
        p.add_argument("--threads", type=int, default=1, help="worker processes for Monte-Carlo trials")

    p = sub.add_parser("gen", help="generate a graph")
    p.add_argument("family")
    p.add_argument("params", nargs="*")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="Monte-Carlo cover or hitting estimate")
    p.add_argument("--graph", required=True)
    p.add_argument("--strategy", default="srw")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--target")
    p.add_argument("--cover", action="store_true")
    p.add_argument("--steps-cap", type=int, default=10**7)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--C", type=float, default=3.0, help="phase threshold exponent for 'phased'")
    common(p, fmt="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("strategy", help="emit a static strategy table")
    p.add_argument("name")
    p.add_argument("--graph", required=True)
    p.add_argument("--target", type=int)
    p.add_argument("--root", type=int, default=0)
    p.add_argument("--source", type=int)
    common(p, seed=False)
    p.set_defaults(func=cmd_strategy)

    p = sub.add_parser("hit-exact", help="optimal hitting times by policy iteration")
    p.add_argument("--graph", required=True)
    p.add_argument("--target", required=True)
    common(p, seed=False)
    p.set_defaults(func=cmd_hit_exact)

    p = sub.add_parser("cover-mdp", help="exact optimal cover time (n <= 14)")
    p.add_argument("--graph", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--covered", default="")
    common(p, seed=False)
    p.set_defaults(func=cmd_cover_mdp)

    p = sub.add_parser("spectrum", help="lazy-walk spectral gap and relaxation time")
    p.add_argument("--graph", required=True)
    common(p, seed=False)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("boost", help="boosted / suppressed event probabilities")
    p.add_argument("--graph", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--event", required=True, help="hit:<v,...>:<t> or at:<v,...>:<t>")
    p.add_argument("--mode", choices=("max", "min", "srw"), default="max")
    common(p, seed=False)
    p.set_defaults(func=cmd_boost)

    p = sub.add_parser("bench", help="sweep a graph family")
    p.add_argument("--family", required=True)
    p.add_argument("--sizes", required=True)
    p.add_argument("--strategies", default="srw")
    p.add_argument("--metrics", default="cover,hit")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--steps-cap", type=int, default=10**7)
    common(p, fmt="csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("table1", help="CRW versus SRW over the standard families")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--steps-cap", type=int, default=10**7)
    common(p, fmt="csv")
    p.set_defaults(func=cmd_table1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    args._t0 = time.perf_counter()
    try:
        args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"crw {args.command}: {exc}\n")
        return 2
    except (GraphError, ValueError, KeyError, RuntimeError) as exc:
        sys.stderr.write(f"crw {args.command}: error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
