import json
import math

import numpy as np
import pytest

from bmc_kdetect import harness
from bmc_kdetect.harness import ResultRow, Scenario


def small(**kw):
    base = dict(id="s", ensemble="assortative", K=3, n=150, alpha="const",
                estimators=["alg2", "megh"], replications=4, root_seed=3)
    base.update(kw)
    return Scenario(**base)


def test_path_length_rules():
    assert harness.path_length(1000, {"kind": "log_power", "beta": 2}) == math.floor(1000 * math.log(1000) ** 2)
    assert harness.path_length(50, {"kind": "quadratic"}) == 2500
    assert harness.path_length(50, {"kind": "explicit", "value": 77}) == 77
    with pytest.raises(ValueError):
        harness.path_length(50, {"kind": "cubic"})


def test_child_seeds_distinct_and_stable():
    seeds = [harness.child_seed(0, i) for i in range(2000)]
    assert len(set(seeds)) == len(seeds)
    assert harness.child_seed(0, 5) == seeds[5]
    assert harness.child_seed(1, 5) != seeds[5]
    assert all(0 <= s < 2**63 for s in seeds)


def test_fixed_replications_row_count():
    rows = harness.run_scenario(small(replications=10), workers=1)
    assert len(rows) == 20
    assert [r.replication for r in rows[::2]] == list(range(10))
    assert all(r.error == "" for r in rows)


def test_rows_carry_characteristics():
    r = harness.run_scenario(small(replications=1, estimators=["alg2"]), workers=1)[0]
    assert r.k_true == 3
    assert r.normalized_entropy == pytest.approx(1.0)
    assert r.information > 0 and r.t_mix >= 1
    assert r.ami is not None


def test_error_rows_do_not_abort():
    s = small(ensemble="explicit", params={"K": 2, "p": [[1, 0], [0, 1]], "alpha": [0.5, 0.5]})
    rows = harness.run_scenario(s, workers=1)
    assert len(rows) == 8
    assert all(r.error.startswith("NotIrreducible") for r in rows)
    cells = harness.aggregate(rows)
    assert cells[("s", "alg2")].count == 0 and cells[("s", "alg2")].errors == 4


def test_aggregate_examples():
    mk = lambda k: ResultRow("c", 0, 0, "e", k_hat=k)
    c = harness.aggregate([mk(3), mk(3), mk(3)])[("c", "e")]
    assert (c.mean, c.sd, c.count) == (3.0, 0.0, 3)
    c = harness.aggregate([mk(2), mk(4)])[("c", "e")]
    assert c.mean == 3.0
    assert c.sd == pytest.approx(math.sqrt(2))
    assert c.margin == pytest.approx(1.96 * math.sqrt(2) / math.sqrt(2))


def test_aggregate_excludes_errors():
    rows = [ResultRow("c", 0, 0, "e", k_hat=3), ResultRow("c", 1, 0, "e", k_hat=99, error="boom")]
    c = harness.aggregate(rows)[("c", "e")]
    assert c.mean == 3.0 and c.count == 1 and c.errors == 1


def test_csv_roundtrip(tmp_path):
    rows = harness.run_scenario(small(), workers=1)
    rows[0].error = "ValueError: a, \"quoted\" message"
    text = harness.rows_to_csv(rows, include_timing=True)
    back = harness.rows_from_csv(text)
    assert back == rows


def test_csv_empty_is_header_only(tmp_path):
    p = tmp_path / "e.csv"
    harness.emit([], p)
    assert p.read_text().strip().split(",")[0] == "scenario"
    assert len(p.read_text().splitlines()) == 1


def test_float_precision():
    row = ResultRow("c", 0, 0, "e", information=0.1 + 0.2)
    back = harness.rows_from_csv(harness.rows_to_csv([row]))[0]
    assert back.information == 0.1 + 0.2


def test_jsonl(tmp_path):
    rows = harness.run_scenario(small(replications=2), workers=1)
    p = tmp_path / "r.jsonl"
    harness.emit(rows, p, fmt="jsonl")
    recs = [json.loads(line) for line in p.read_text().splitlines()]
    assert len(recs) == 4 and "wall_time_ms" not in recs[0]


def test_same_seed_same_bytes():
    a = harness.rows_to_csv(harness.run_scenario(small(), workers=1))
    b = harness.rows_to_csv(harness.run_scenario(small(), workers=2))
    assert a == b


def test_pivot_table():
    rows = harness.run_scenario(small(), workers=1)
    lines = harness.pivot_table(rows).splitlines()
    assert lines[0] == "scenario,alg2_mean,alg2_sd,alg2_count,megh_mean,megh_sd,megh_count"
    assert lines[1].startswith("s,")


def test_sequential_minimum_samples():
    s = small(sequential=True, n=100, ell={"kind": "explicit", "value": 3000},
              estimators=["alg1"], min_samples=250, batch=50, max_samples=400)
    rows = harness.run_scenario(s, workers=1)
    cell = harness.aggregate(rows)[("s", "alg1")]
    assert cell.count >= 250
    assert cell.margin <= 0.15 or cell.count >= 400


def test_scenario_json_roundtrip(tmp_path):
    s = harness.table1_scenario(3, 5)
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"scenarios": [s.to_dict()]}))
    (back,) = harness.load_scenarios(p)
    assert back == s
    assert back.epsilon == 0.2 and back.alpha == "const"


def test_scenario_rejects_unknown_keys():
    with pytest.raises(ValueError):
        Scenario.from_dict({"id": "x", "bogus": 1})
    with pytest.raises(ValueError):
        Scenario(ensemble="zipf")


@pytest.mark.parametrize("test", [1, 2, 3, 4])
def test_table1_presets_build(test):
    s = harness.table1_scenario(test, 5, n=200)
    inst, traj = harness.make_trajectory(s, harness.child_seed(0, 0))
    assert inst.K == 5 and traj.ell == s.ell_value
    if test == 1:
        np.testing.assert_array_equal(np.diag(inst.params.p), 0.8)
    if test == 4:
        assert np.linalg.matrix_rank(inst.params.p, tol=1e-10) <= 3


@pytest.mark.slow
def test_table1_easy_cell_alg2():
    s = harness.table1_scenario(1, 3, replications=20, root_seed=11)
    cell = harness.aggregate(harness.run_scenario(s, workers=1))[(s.id, "alg2")]
    assert abs(cell.mean - 3.0) <= 0.15


@pytest.mark.slow
def test_caic_overestimates_on_assortative():
    # trend only: the penalised likelihood tends to add clusters here
    s = harness.table1_scenario(1, 3, estimators=["caic"], replications=8, root_seed=5)
    cell = harness.aggregate(harness.run_scenario(s, workers=1))[(s.id, "caic")]
    assert cell.mean > 3.0
