"""Command-line entry point: ``scnet <command> [options]``.

Settings resolve as flags > ``--config`` JSON file > built-in defaults.
Exit codes: 0 success, 1 usage error, 2 data error. ``SCNET_THREADS``
caps the worker count for ensembles (0 or unset: one per CPU).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .attack import AttackStrategy, EnsembleResult, ExperimentConfig, experiment_graph, run_ensemble
from .errors import DataError
from .graph import SupplyGraph
from .io import (
    RunManifest,
    atomic_write,
    breakdown_dict,
    census,
    convergence_dict,
    dumps,
    export_results,
    fragmentation_dict,
    ingest,
    tier_census,
    write_graph,
)
from .multiscale import Scale
from .synth import SupplyGenParams, gen_supply_chain
from .thresholds import (
    BreakdownReport,
    ConvergenceReport,
    ConvergenceRow,
    convergence_tiers,
    fragmentation_threshold,
)

logger = logging.getLogger("scnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _names(text) -> tuple[str, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(str(x) for x in text)
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


def _tiers(text):
    if text is None or str(text).lower() in ("", "all", "none"):
        return None
    return int(text)


# name -> (converter, default, help)
GRAPH = {
    "nodes": (str, None, "node CSV (firm_id,name,country,sic,employees,is_msf)"),
    "edges": (str, None, "edge CSV (customer_id,supplier_id)"),
    "graph": (str, None, "directory holding nodes.csv and edges.csv"),
}
OUT = {"out": (str, "scnet-out", "output directory")}
SEED = {"seed": (int, 0, "master seed")}
REALIZATIONS = {"realizations": (int, None, "realizations per experiment (default 100, or 24 for PageRank)")}
GRID = {"grid_points": (int, 200, "grid points for sweeps over more than 500 units")}
SCALES = {"scales": (_names, tuple(s.value for s in Scale), "comma-separated scales")}
STRATEGIES = {"strategies": (_names, tuple(s.value for s in AttackStrategy), "comma-separated strategies")}
CONVERGE = {"t_max": (int, 10, "deepest tier count compared"), "eps": (float, 0.05, "uniform-distance tolerance")}
LIMITS = {"limits": (_floats, (0.20, 0.01), "comma-separated ATSR limits")}
TIERS = {"tiers": (_tiers, None, "tier count to keep (default: all)")}
SVG = {"svg": (bool, True, "write SVG plots")}

COMMANDS = {
    "ingest": ("read node/edge files and print a census", {**GRAPH}),
    "tiers": ("firms per tier", {**GRAPH, "out": (str, None, "also write tiers.json here")}),
    "attack": ("run one removal ensemble", {
        **GRAPH, **OUT, **SEED, **REALIZATIONS, **GRID, **TIERS, **SVG,
        "scale": (str, "firm", "scale to attack"),
        "strategy": (str, "random", "removal strategy"),
    }),
    "converge": ("tier-convergence table", {**GRAPH, **OUT, **SEED, **REALIZATIONS, **GRID, **SCALES,
                                              **STRATEGIES, **CONVERGE}),
    "breakdown": ("breakdown-threshold table", {**GRAPH, **OUT, **SEED, **REALIZATIONS, **GRID, **SCALES,
                                                  **STRATEGIES, **LIMITS, **TIERS, **SVG}),
    "fragment": ("fragmentation-threshold table", {**GRAPH, **OUT, **SEED, **SCALES, **TIERS,
                                                    "realizations": (int, 100, "random orders per scale")}),
    "generate": ("write a synthetic supply chain", {
        **OUT,
        **{f.name: (None, None, f"generator {f.name}")
           for f in dataclasses.fields(SupplyGenParams)},
    }),
    "report": ("convergence, breakdown and fragmentation tables in one run", {
        **GRAPH, **OUT, **SEED, **REALIZATIONS, **GRID, **SCALES, **STRATEGIES, **CONVERGE, **LIMITS,
        **TIERS, **SVG, "fragment_realizations": (int, 100, "random orders per scale for fragmentation"),
    }),
}
_GEN_TYPES = {f.name: f.type for f in dataclasses.fields(SupplyGenParams)}


def _gen_converter(name):
    kind = _GEN_TYPES[name]
    if kind == "int":
        return int
    if kind == "float":
        return float
    if kind.startswith("tuple[str"):
        return _names
    return _floats


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scnet", description="Supply-chain reachability robustness analysis.")
    parser.add_argument("--version", action="version", version=f"scnet {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for cmd, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(cmd, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of settings (flags take precedence)")
        p.add_argument("-v", "--verbose", action="count", default=0)
        for name, (conv, default, h) in opts.items():
            flag = "--" + name.replace("_", "-")
            if conv is bool:
                p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None, help=h)
            else:
                p.add_argument(flag, dest=name, default=None, help=f"{h} (default: {default})")
    return parser


def resolve(cmd: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags, then convert types."""
    opts = COMMANDS[cmd][1]
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = sorted(set(file_cfg) - set(opts))
        if unknown:
            raise UsageError(f"unknown config key(s) for {cmd}: {', '.join(unknown)}")

    out = {}
    for name, (conv, default, _) in opts.items():
        raw = getattr(args, name, None)
        if raw is None:
            raw = file_cfg.get(name, default)
        if cmd == "generate" and name in _GEN_TYPES:
            conv = _gen_converter(name) if raw is not None else None
        try:
            out[name] = raw if raw is None or conv in (None, bool, str) else conv(raw)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {name}: {raw!r}") from None
    return out


def _graph_paths(cfg: dict) -> tuple[Path, Path]:
    if cfg.get("graph"):
        base = Path(cfg["graph"])
        nodes, edges = cfg.get("nodes") or base / "nodes.csv", cfg.get("edges") or base / "edges.csv"
    else:
        nodes, edges = cfg.get("nodes"), cfg.get("edges")
    if not nodes or not edges:
        raise UsageError("give --nodes and --edges, or --graph DIR")
    return Path(nodes), Path(edges)


def _load(cfg: dict, echo=None) -> tuple[SupplyGraph, tuple[Path, Path]]:
    paths = _graph_paths(cfg)
    return ingest(*paths, echo=echo), paths


def _scales(cfg) -> list[Scale]:
    try:
        return [Scale.parse(s) for s in cfg["scales"]]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _strategies(cfg) -> list[AttackStrategy]:
    try:
        return [AttackStrategy.parse(s) for s in cfg["strategies"]]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


class _Runner:
    """Ensemble cache so a report never runs the same experiment twice."""

    def __init__(self, graph: SupplyGraph, cfg: dict):
        self.graph = graph
        self.cfg = cfg
        self.cache: dict[tuple, EnsembleResult] = {}

    def run(self, scale: Scale, strategy: AttackStrategy, tiers: int | None) -> EnsembleResult:
        depth = experiment_graph(self.graph, None).max_tier
        eff = None if tiers is None or tiers >= depth else tiers
        key = (scale, strategy, eff)
        if key not in self.cache:
            limits = self.cfg.get("limits") or (0.20, 0.01)
            config = ExperimentConfig(scale=scale, strategy=strategy, tier_count=eff,
                                      realizations=self.cfg.get("realizations"),
                                      master_seed=self.cfg["seed"], grid_points=self.cfg["grid_points"],
                                      breakdown_limits=tuple(limits))
            logger.info("running %s / %s / tiers=%s", scale.value, strategy.value, eff or "all")
            self.cache[key] = run_ensemble(self.graph, config)
        return self.cache[key]


def _manifest(cmd, cfg, paths) -> RunManifest:
    return RunManifest.for_inputs(cmd, paths, {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()},
                                  cfg.get("seed", 0))


def _converge(runner: _Runner, cfg) -> ConvergenceReport:
    report = ConvergenceReport(cfg["eps"], cfg["t_max"])
    for scale in _scales(cfg):
        for strategy in _strategies(cfg):
            curves = {t: runner.run(scale, strategy, t) for t in range(1, cfg["t_max"] + 1)}
            report.rows.append(ConvergenceRow(scale, strategy, convergence_tiers(curves, cfg["eps"])))
    return report


def _breakdown(runner: _Runner, cfg, out: Path, manifest, curves_dir: Path | None) -> BreakdownReport:
    report = BreakdownReport()
    for scale in _scales(cfg):
        for strategy in _strategies(cfg):
            res = runner.run(scale, strategy, cfg["tiers"])
            report.add(res, cfg["limits"])
            if curves_dir is not None:
                export_results(res, curves_dir, svg=cfg["svg"], manifest=manifest)
    return report


def _fragment(graph, cfg, key="realizations") -> list:
    g = experiment_graph(graph, cfg["tiers"])
    return [fragmentation_threshold(g, scale, AttackStrategy.RANDOM, cfg[key], cfg["seed"])
            for scale in _scales(cfg)]


def _with_ref(payload: dict, manifest: RunManifest) -> dict:
    return {**payload, "provenance": manifest.payload_ref()}


def cmd_ingest(cfg):
    _load(cfg, echo=print)


def cmd_tiers(cfg):
    graph, paths = _load(cfg)
    tc = tier_census(graph)
    for t, c in tc.counts.items():
        print(f"tier {t}: {c}")
    print(f"unreachable: {tc.unreachable}")
    if cfg.get("out"):
        atomic_write(Path(cfg["out"]) / "tiers.json", dumps(tc.to_dict()))


def cmd_attack(cfg):
    graph, paths = _load(cfg)
    try:
        scale, strategy = Scale.parse(cfg["scale"]), AttackStrategy.parse(cfg["strategy"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    manifest = _manifest("attack", cfg, paths)
    res = _Runner(graph, {**cfg, "limits": (0.20, 0.01)}).run(scale, strategy, cfg["tiers"])
    for p in export_results(res, cfg["out"], svg=cfg["svg"], manifest=manifest):
        print(p)
    manifest.write(cfg["out"])


def cmd_converge(cfg):
    graph, paths = _load(cfg)
    manifest = _manifest("converge", cfg, paths)
    report = _converge(_Runner(graph, cfg), cfg)
    for r in report.rows:
        flag = " (unconverged)" if r.result.unconverged else ""
        print(f"{r.scale.value:17s} {r.strategy.value:19s} tiers={r.result.recommended_tier}{flag}")
    atomic_write(Path(cfg["out"]) / "convergence.json", dumps(_with_ref(convergence_dict(report), manifest)))
    manifest.write(cfg["out"])


def cmd_breakdown(cfg):
    graph, paths = _load(cfg)
    out = Path(cfg["out"])
    manifest = _manifest("breakdown", cfg, paths)
    report = _breakdown(_Runner(graph, cfg), cfg, out, manifest, out / "curves")
    for r in report.rows:
        t = r.threshold
        note = "" if t.reached else " (limit not reached)"
        print(f"{r.scale.value:17s} {r.strategy.value:19s} limit={t.limit:g} "
              f"remaining={t.remaining:.3f} affected={t.affected:.3f}{note}")
    atomic_write(out / "breakdown.json", dumps(_with_ref(breakdown_dict(report), manifest)))
    manifest.write(out)


def cmd_fragment(cfg):
    graph, paths = _load(cfg)
    manifest = _manifest("fragment", cfg, paths)
    reports = _fragment(graph, cfg)
    for r in reports:
        note = " (pre-fragmented)" if r.pre_fragmented else ""
        print(f"{r.scale.value:17s} remaining={r.remaining:.3f} affected={r.affected:.3f} "
              f"[{r.remaining_p2_5:.3f}, {r.remaining_p97_5:.3f}]{note}")
    atomic_write(Path(cfg["out"]) / "fragmentation.json", dumps(_with_ref(fragmentation_dict(reports), manifest)))
    manifest.write(cfg["out"])


def cmd_generate(cfg):
    kwargs = {k: (tuple(v) if isinstance(v, (list, tuple)) else v)
              for k, v in cfg.items() if k in _GEN_TYPES and v is not None}
    try:
        params = SupplyGenParams(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    graph, truth = gen_supply_chain(params)
    out = Path(cfg["out"])
    write_graph(graph, out / "nodes.csv", out / "edges.csv")
    atomic_write(out / "generator.json", dumps({"params": params.to_dict(), "tool_version": __version__}))
    truth_rows = ["firm_id,creation_tier,country,sic,employees"]
    truth_rows += [f"{fid},{t},{c},{i},{e}" for fid, t, c, i, e in
                   zip(graph.ids, truth.creation_tier, truth.country, truth.industry, truth.employees)]
    atomic_write(out / "truth.csv", "\n".join(truth_rows) + "\n")
    for line in census(graph).lines():
        print(line)
    print(f"wrote {out / 'nodes.csv'} and {out / 'edges.csv'}")


def cmd_report(cfg):
    graph, paths = _load(cfg)
    out = Path(cfg["out"])
    manifest = _manifest("report", cfg, paths)
    runner = _Runner(graph, cfg)
    tc = tier_census(graph)
    conv = _converge(runner, cfg)
    brk = _breakdown(runner, cfg, out, manifest, out / "curves")
    frag = _fragment(graph, cfg, key="fragment_realizations")
    c = census(graph)
    bundle = {
        "census": {"nodes": c.nodes, "edges": c.edges, "msfs": c.msfs, "tss": c.tss,
                   "self_loops": c.self_loops, "missing": c.missing},
        "tiers": tc.to_dict(),
        "convergence": convergence_dict(conv),
        "breakdown": breakdown_dict(brk),
        "fragmentation": fragmentation_dict(frag),
    }
    atomic_write(out / "convergence.json", dumps(_with_ref(bundle["convergence"], manifest)))
    atomic_write(out / "breakdown.json", dumps(_with_ref(bundle["breakdown"], manifest)))
    atomic_write(out / "fragmentation.json", dumps(_with_ref(bundle["fragmentation"], manifest)))
    atomic_write(out / "report.json", dumps(_with_ref(bundle, manifest)))
    manifest.write(out)
    for row in conv.rows:
        print(f"convergence {row.scale.value} {row.strategy.value}: {row.result.recommended_tier}")
    for row in brk.rows:
        print(f"breakdown {row.scale.value} {row.strategy.value} <{row.threshold.limit:g}: "
              f"remaining {row.threshold.remaining:.3f}")
    for r in frag:
        print(f"fragmentation {r.scale.value}: remaining {r.remaining:.3f}")
    print(f"wrote {out / 'report.json'}")


HANDLERS = {
    "ingest": cmd_ingest, "tiers": cmd_tiers, "attack": cmd_attack, "converge": cmd_converge,
    "breakdown": cmd_breakdown, "fragment": cmd_fragment, "generate": cmd_generate, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command; try scnet --help")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        cfg = resolve(args.command, args)
        HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"scnet: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"scnet: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"scnet: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
