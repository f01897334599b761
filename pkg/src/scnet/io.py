"""CSV ingestion, tier census, and result export.

Node files carry ``firm_id,name,country,sic,employees,is_msf`` (an empty
field means unknown); edge files carry ``customer_id,supplier_id``.
Every output file is written to a temporary name and renamed into place,
so an interrupted run never leaves a half-written result behind.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .attack import METRICS, EnsembleResult
from .errors import DataError
from .graph import UNREACHABLE, FirmAttrs, SupplyGraph, build_graph
from .thresholds import (
    BreakdownReport,
    BreakdownThreshold,
    Convergence,
    ConvergenceReport,
    FragmentationReport,
    breakdown_threshold,
    curve_area,
)

NODE_HEADER = ("firm_id", "name", "country", "sic", "employees", "is_msf")
EDGE_HEADER = ("customer_id", "supplier_id")
RESULT_HEADER = ("fraction_units_remaining", "fraction_firms_remaining", "metric", "mean", "p2_5", "p97_5")


# ----------------------------------------------------------------- reading
def _rows(path: Path, header: Sequence[str]):
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got is None:
            raise DataError(f"{path}: file is empty; expected header {','.join(header)}")
        if tuple(h.strip() for h in got) != tuple(header):
            raise DataError(f"{path}: unknown header {','.join(got)!r}; expected {','.join(header)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def read_nodes(path) -> list[FirmAttrs]:
    path = Path(path)
    out = []
    for line, (fid, name, country, sic, employees, is_msf) in _rows(path, NODE_HEADER):
        if not fid:
            raise DataError(f"{path}:{line}: empty firm_id")
        if is_msf not in ("0", "1"):
            raise DataError(f"{path}:{line}: is_msf must be 0 or 1, got {is_msf!r}")
        emp = None
        if employees:
            try:
                emp = int(employees)
            except ValueError:
                try:
                    as_float = float(employees)
                except ValueError:
                    raise DataError(f"{path}:{line}: employees is not a number: {employees!r}") from None
                if not as_float.is_integer():
                    raise DataError(f"{path}:{line}: employees is not a whole number: {employees!r}")
                emp = int(as_float)
        try:
            out.append(FirmAttrs(fid, country or None, sic or None, emp, is_msf == "1", name or None))
        except DataError as exc:
            raise DataError(f"{path}:{line}: {exc}") from None
    return out


def read_edges(path) -> list[tuple[str, str]]:
    path = Path(path)
    out = []
    for line, (customer, supplier) in _rows(path, EDGE_HEADER):
        if not customer or not supplier:
            raise DataError(f"{path}:{line}: empty firm id in edge")
        out.append((customer, supplier))
    return out


@dataclass(frozen=True)
class Census:
    nodes: int
    edges: int
    msfs: int
    tss: int
    self_loops: int
    missing: dict[str, float]

    def lines(self) -> list[str]:
        miss = ", ".join(f"{k} {v:.1%}" for k, v in self.missing.items())
        return [
            f"nodes: {self.nodes}",
            f"edges: {self.edges} ({self.self_loops} self-loops)",
            f"MSFs: {self.msfs}",
            f"TSs: {self.tss}",
            f"missing: {miss}",
        ]


def census(graph: SupplyGraph) -> Census:
    n = max(graph.n_nodes, 1)
    missing = {
        "country": sum(a.country is None for a in graph.attrs) / n,
        "sic": sum(a.industry is None for a in graph.attrs) / n,
        "employees": sum(a.employees is None for a in graph.attrs) / n,
    }
    return Census(graph.n_nodes, graph.n_edges, int(graph.msf_mask.sum()), int(graph.ts_mask.sum()),
                  graph.n_self_loops, missing)


def ingest(nodes_path, edges_path, *, echo=print) -> SupplyGraph:
    """Read a node file and an edge file into a graph and print its census."""
    graph = build_graph(read_edges(edges_path), read_nodes(nodes_path))
    if echo is not None:
        for line in census(graph).lines():
            echo(line)
    return graph


@dataclass(frozen=True)
class TierCensus:
    counts: dict[int, int]
    unreachable: int = 0

    def to_dict(self) -> dict:
        return {"tiers": {str(t): c for t, c in self.counts.items()}, "unreachable": self.unreachable}


def tier_census(graph: SupplyGraph) -> TierCensus:
    """Firms per tier (0 = MSF) plus the number no MSF reaches."""
    tiers = graph.tiers
    reach = tiers[tiers != UNREACHABLE]
    counts = np.bincount(reach) if reach.size else np.zeros(0, dtype=np.int64)
    return TierCensus({t: int(c) for t, c in enumerate(counts)}, int((tiers == UNREACHABLE).sum()))


# ----------------------------------------------------------------- writing
def atomic_write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise OSError(f"cannot write to {path.parent}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_graph(graph: SupplyGraph, nodes_path, edges_path) -> None:
    def blank(v):
        return "" if v is None else v

    node_rows = [
        (a.firm_id, blank(a.name), blank(a.country), blank(a.industry), blank(a.employees), int(a.is_msf))
        for a in graph.attrs
    ]
    atomic_write(nodes_path, _csv_text(NODE_HEADER, node_rows))
    atomic_write(edges_path, _csv_text(EDGE_HEADER, graph.edge_list()))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Provenance for one CLI run. Only this file carries timestamps."""

    command: str
    inputs: list[str]
    input_sha256: dict[str, str]
    config: dict
    master_seed: int
    tool_version: str = __version__
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    finished_at: str | None = None

    @classmethod
    def for_inputs(cls, command: str, inputs: Iterable, config: dict, master_seed: int) -> RunManifest:
        paths = [str(p) for p in inputs]
        return cls(command, paths, {p: sha256_file(p) for p in paths}, config, master_seed)

    def payload_ref(self) -> dict:
        """Timestamp-free part embedded in every result file."""
        return {"manifest": "manifest.json", "input_sha256": self.input_sha256,
                "master_seed": self.master_seed, "tool_version": self.tool_version}

    def write(self, out_dir) -> Path:
        self.finished_at = datetime.now(timezone.utc).isoformat()
        return atomic_write(Path(out_dir) / "manifest.json", dumps(asdict(self)))


# ------------------------------------------------------------ result files
def experiment_name(result: EnsembleResult) -> str:
    return f"{result.scale.value}_{result.strategy.value}_t{result.tier_count}"


def result_rows(result: EnsembleResult):
    for i, x in enumerate(result.grid):
        for m in METRICS:
            yield (repr(float(x)), repr(float(result.firms_remaining[i])), m,
                   repr(float(result.mean[m][i])), repr(float(result.p2_5[m][i])), repr(float(result.p97_5[m][i])))


def read_results_csv(path) -> dict[str, dict[str, np.ndarray]]:
    """Parse an exported curve CSV back into per-metric arrays."""
    path = Path(path)
    cols: dict[str, dict[str, list]] = {}
    for _, (x, firms, metric, mean, lo, hi) in _rows(path, RESULT_HEADER):
        c = cols.setdefault(metric, {"grid": [], "firms_remaining": [], "mean": [], "p2_5": [], "p97_5": []})
        for key, v in zip(("grid", "firms_remaining", "mean", "p2_5", "p97_5"), (x, firms, mean, lo, hi)):
            c[key].append(float(v))
    return {m: {k: np.array(v) for k, v in c.items()} for m, c in cols.items()}


def threshold_dict(t: BreakdownThreshold) -> dict:
    return {"limit": t.limit, "remaining": t.remaining, "affected": t.affected, "reached": t.reached}


def ensemble_summary(result: EnsembleResult, limits: Sequence[float] | None = None) -> dict:
    if limits is None:
        limits = result.config.breakdown_limits if result.config is not None else (0.20, 0.01)
    thresholds = [breakdown_threshold(result, lim) for lim in limits]
    return {
        "scale": result.scale.value,
        "strategy": result.strategy.value,
        "tier_count": result.tier_count,
        "config": result.config.to_dict() if result.config is not None else None,
        "realizations": result.realization_count,
        "grid_points": len(result.grid),
        "unit_counts": sorted(set(result.unit_counts)),
        "thresholds": [threshold_dict(t) for t in thresholds],
        "flags": {
            "varying_unit_count": len(set(result.unit_counts)) > 1,
            "limits_not_reached": [t.limit for t in thresholds if not t.reached],
        },
        "area_atsr": curve_area(result),
    }


def export_results(
    result: EnsembleResult,
    out_dir,
    *,
    svg: bool = True,
    manifest: RunManifest | None = None,
    name: str | None = None,
) -> list[Path]:
    """Write ``<name>.csv``, ``<name>.json`` and optionally ``<name>.svg``."""
    out_dir = Path(out_dir)
    name = name or experiment_name(result)
    summary = ensemble_summary(result)
    if manifest is not None:
        summary["provenance"] = manifest.payload_ref()
    written = [
        atomic_write(out_dir / f"{name}.csv", _csv_text(RESULT_HEADER, result_rows(result))),
        atomic_write(out_dir / f"{name}.json", dumps(summary)),
    ]
    if svg:
        from .svg import render_ensemble

        written.append(atomic_write(out_dir / f"{name}.svg", render_ensemble(result)))
    return written


# ------------------------------------------------------------ report files
def convergence_dict(report: ConvergenceReport) -> dict:
    def one(c: Convergence) -> dict:
        return {"recommended_tier": c.recommended_tier, "unconverged": c.unconverged,
                "distances": {str(t): d for t, d in sorted(c.distances.items())}}

    return {
        "eps": report.eps,
        "t_max": report.t_max,
        "rows": [{"scale": r.scale.value, "strategy": r.strategy.value, **one(r.result)} for r in report.rows],
    }


def breakdown_dict(report: BreakdownReport) -> dict:
    return {"rows": [{"scale": r.scale.value, "strategy": r.strategy.value, **threshold_dict(r.threshold)}
                     for r in report.rows]}


def fragmentation_dict(reports: Sequence[FragmentationReport]) -> dict:
    return {"criterion": "average degree < 1", "rows": [
        {
            "scale": r.scale.value,
            "order_source": r.order_source.value,
            "realizations": r.realizations,
            "remaining": r.remaining,
            "affected": r.affected,
            "remaining_p2_5": r.remaining_p2_5,
            "remaining_p97_5": r.remaining_p97_5,
            "firms_remaining": r.firms_remaining,
            "pre_fragmented": r.pre_fragmented,
        }
        for r in reports
    ]}

