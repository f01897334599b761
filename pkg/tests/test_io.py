import json
import os

import numpy as np
import pytest

from scnet.attack import AttackStrategy, ExperimentConfig, run_ensemble
from scnet.errors import DataError
from scnet.graph import FirmAttrs, build_graph
from scnet.io import (
    RunManifest,
    atomic_write,
    census,
    export_results,
    ingest,
    read_nodes,
    read_results_csv,
    threshold_dict,
    tier_census,
    write_graph,
)
from scnet.thresholds import breakdown_threshold

from .conftest import T1_EDGES, msf

NODES_T1 = """firm_id,name,country,sic,employees,is_msf
M1,Med One,US,5047,120,1
M2,,DE,5047,,1
A,Alpha,US,3841,40,0
B,,CN,,15,0
C,,,,,0
D,Delta,JP,3842,9,0
E,,KR,3845,3,0
"""
EDGES_T1 = "customer_id,supplier_id\n" + "".join(f"{c},{s}\n" for c, s in T1_EDGES)


@pytest.fixture
def t1_files(tmp_path):
    n, e = tmp_path / "nodes.csv", tmp_path / "edges.csv"
    n.write_text(NODES_T1)
    e.write_text(EDGES_T1)
    return n, e


def test_ingest_census(t1_files):
    lines = []
    g = ingest(*t1_files, echo=lines.append)
    c = census(g)
    assert (c.nodes, c.edges, c.msfs, c.tss) == (7, 6, 2, 3)
    assert lines[0] == "nodes: 7"
    m2 = g.attrs[g.index["M2"]]
    assert m2.employees is None and m2.name is None and m2.country == "DE"


def test_empty_edges_file(tmp_path, t1_files):
    e = tmp_path / "empty.csv"
    e.write_text("customer_id,supplier_id\n")
    with pytest.raises(DataError, match="empty graph"):
        ingest(t1_files[0], e, echo=None)


def test_bad_header_lists_expected(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("id,name\nA,x\n")
    with pytest.raises(DataError, match="firm_id,name,country,sic,employees,is_msf"):
        read_nodes(p)


def test_malformed_row_reports_line(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("firm_id,name,country,sic,employees,is_msf\nA,,US,1,5,0\nB,,US,1,lots,0\n")
    with pytest.raises(DataError, match=r"n\.csv:3"):
        read_nodes(p)
    p.write_text("firm_id,name,country,sic,employees,is_msf\nA,,US,1,5\n")
    with pytest.raises(DataError, match=r":2: expected 6 fields"):
        read_nodes(p)


def test_tier_census(t1, t2):
    assert tier_census(t1).counts == {0: 2, 1: 2, 2: 3}
    assert tier_census(t2).counts == {0: 1, 1: 1, 2: 1, 3: 1}
    single = build_graph([], [msf("M")], allow_empty=True)
    assert tier_census(single).counts == {0: 1}
    g = build_graph([("M", "A"), ("Z", "A")], [msf("M")])
    assert tier_census(g).unreachable == 1


def test_graph_round_trip(tmp_path):
    nodes = [msf("M", country="US", industry="5047", employees=3, name="Acme, Inc."),
             FirmAttrs("S", country=None, industry="3841", employees=None)]
    g = build_graph([("M", "S"), ("S", "S")], nodes)
    write_graph(g, tmp_path / "n.csv", tmp_path / "e.csv")
    back = ingest(tmp_path / "n.csv", tmp_path / "e.csv", echo=None)
    assert back.attrs == g.attrs and np.array_equal(back.edges, g.edges)


def test_export_round_trip_is_exact(t1, tmp_path):
    res = run_ensemble(t1, ExperimentConfig(realizations=7, master_seed=3))
    paths = export_results(res, tmp_path, name="run")
    assert [p.name for p in paths] == ["run.csv", "run.json", "run.svg"]
    back = read_results_csv(tmp_path / "run.csv")
    for m in ("atsr", "stsr", "altsr", "scfr"):
        assert np.array_equal(back[m]["grid"], res.grid)
        assert np.array_equal(back[m]["mean"], res.mean[m])
        assert np.array_equal(back[m]["p2_5"], res.p2_5[m])
        assert np.array_equal(back[m]["p97_5"], res.p97_5[m])
        assert np.array_equal(back[m]["firms_remaining"], res.firms_remaining)
    assert (tmp_path / "run.svg").read_text().startswith("<svg")


def test_zero_variance_export(t1, tmp_path):
    res = run_ensemble(t1, ExperimentConfig(strategy=AttackStrategy.PAGERANK, realizations=3))
    export_results(res, tmp_path, svg=False, name="pr")
    lines = (tmp_path / "pr.csv").read_text().splitlines()
    assert lines[0] == "fraction_units_remaining,fraction_firms_remaining,metric,mean,p2_5,p97_5"
    for row in lines[1:]:
        mean, lo, hi = row.split(",")[3:]
        assert mean == lo == hi


def test_breakdown_json_example():
    curve = (np.array([1.0, 0.9, 0.8, 0.7]), np.array([1.0, 0.5, 0.15, 0.05]))
    d = json.loads(json.dumps(threshold_dict(breakdown_threshold(curve, 0.20))))
    assert d["remaining"] == 0.8 and d["reached"] is True


def test_unwritable_directory(tmp_path, t1):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        atomic_write(blocker / "sub" / "out.csv", "data")


def test_atomic_write_leaves_no_partial_file(tmp_path):

    target = tmp_path / "out.json"
    with pytest.raises(TypeError):
        atomic_write(target, None)
    assert not target.exists()
    assert [p for p in os.listdir(tmp_path)] == []


def test_manifest_hashes_inputs(t1_files, tmp_path):
    m = RunManifest.for_inputs("attack", t1_files, {"seed": 1}, 1)
    assert len(m.input_sha256) == 2
    path = m.write(tmp_path)
    data = json.loads(path.read_text())
    assert data["finished_at"] and "started_at" in data
    assert "started_at" not in m.payload_ref()
