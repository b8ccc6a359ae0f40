import csv
import io
import json

import numpy as np
import pytest

from equidisp.cli import main
from equidisp.dataio import InputError, read_column, read_pairs
from equidisp.equidisp_model import EquiDispParams

from conftest import DATA, SCHEMAS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def schema(name):
    jsonschema = pytest.importorskip("jsonschema")
    referencing = pytest.importorskip("referencing")
    docs = {p.name: json.loads(p.read_text()) for p in SCHEMAS.glob("*.json")}
    registry = referencing.Registry().with_resources(
        (k, referencing.Resource.from_contents(v)) for k, v in docs.items())
    validator = jsonschema.Draft202012Validator(docs[name], registry=registry)
    return validator.validate


def column(values):
    return "".join(f"{float(v)!r}\n" for v in values)


@pytest.fixture()
def sim_csv(tmp_path, capsys):
    path = tmp_path / "sim.csv"
    assert run(capsys, "simulate", "--alpha", 1, "--beta", 4, "--gamma", 5, "--n", 300, "--seed", 7,
               "--out", path)[0] == 0
    return path


def test_dataio_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n3,\n")
    with pytest.raises(InputError, match=r":3: missing"):
        read_pairs(p, min_rows=1)
    p.write_text("a,b\n1,2\n3,inf\n")
    with pytest.raises(InputError, match="non-finite"):
        read_pairs(p, min_rows=1)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InputError, match="at least 3"):
        read_pairs(p)
    with pytest.raises(InputError, match="no column"):
        read_pairs(p, "a", "zzz", min_rows=1)
    p.write_text("a\n1\n2\n")
    with pytest.raises(InputError, match="need at least 2 columns"):
        read_pairs(p, min_rows=1)
    with pytest.raises(InputError, match="cannot open"):
        read_pairs(tmp_path / "missing.csv")


def test_dataio_column_selection(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("id,u,h\n1,0.5,1.5\n2,0.6,1.4\n\n3,0.7,1.3\n")
    s = read_pairs(p, "h", "u")
    np.testing.assert_array_equal(s.x, [1.5, 1.4, 1.3])
    np.testing.assert_array_equal(read_column(p, "u"), [0.5, 0.6, 0.7])


def test_simulate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run(capsys, "simulate", "--alpha", 1, "--beta", 4, "--gamma", 5, "--n", 100, "--seed", 7,
                   "--out", out)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(io.StringIO(a.read_text())))
    assert rows[0] == ["x", "y"] and len(rows) == 101


def test_simulate_errors(tmp_path, capsys):
    assert run(capsys, "simulate", "--alpha", 1, "--beta", 4, "--gamma", 5, "--n", 0, "--out", tmp_path / "z")[0] == 1
    code, _, err = run(capsys, "simulate", "--alpha", 1, "--beta", 4, "--gamma", 5, "--n", 5,
                       "--out", tmp_path / "no" / "such" / "dir.csv")
    assert code == 1 and "cannot write" in err
    assert run(capsys, "simulate", "--alpha", 1, "--n", 5, "--out", tmp_path / "z")[0] == 1
    assert run(capsys, "simulate", "--pseudo", 1, 2, 0.5, "--n", 5, "--out", tmp_path / "p.csv")[0] == 0


@pytest.mark.parametrize("model", ["equidisp-mle", "equidisp-pmle", "equidisp-indep", "bvn", "bvn-indep", "pseudo"])
def test_fit_every_model(sim_csv, capsys, model):
    code, out, _ = run(capsys, "fit", sim_csv, "--model", model)
    assert code == 0
    rep = json.loads(out)
    schema("fit_report.schema.json")(rep)
    assert rep["model"] == model
    assert rep["aic"] == pytest.approx(2 * rep["n_params"] - 2 * rep["loglik"], rel=1e-15)


def test_fit_full_precision_json(sim_csv, capsys):
    rep = json.loads(run(capsys, "fit", sim_csv, "--model", "bvn")[1])
    assert len(repr(rep["estimates"]["mu1"]).split(".")[1]) > 8


def test_fit_input_errors(tmp_path, capsys):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert run(capsys, "fit", empty)[0] == 1
    bad = tmp_path / "b.csv"
    bad.write_text("x,y\n1,2\n2,abc\n3,4\n")
    code, _, err = run(capsys, "fit", bad)
    assert code == 1 and "b.csv:3" in err
    assert run(capsys, "fit", tmp_path / "nope.csv")[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["fit", str(empty), "--model", "wrong"])
    assert exc.value.code == 1


def test_fit_nonconverged_exit_code(sim_csv, capsys, monkeypatch):
    import equidisp.cli as cli
    from equidisp.estimation import FitReport

    monkeypatch.setitem(cli.MODELS, "bvn", lambda s: FitReport("bvn", {"mu1": 0.0}, -1.0, 5, converged=False))
    code, out, _ = run(capsys, "fit", sim_csv, "--model", "bvn")
    assert code == 2 and json.loads(out)["converged"] is False


def test_compare_json_and_table(sim_csv, capsys):
    code, out, _ = run(capsys, "compare", sim_csv)
    assert code == 0
    reps = json.loads(out)
    schema("compare.schema.json")(reps)
    aics = [r["aic"] for r in reps]
    assert aics == sorted(aics)
    code, out, _ = run(capsys, "compare", sim_csv, "--format", "table")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["rank"] for r in rows] == ["1", "2", "3", "4"]
    assert len(rows[0]["aic"].replace("-", "").replace(".", "")) <= 6


@pytest.mark.skipif(not (DATA / "ais.csv").exists(), reason="data/ais.csv not present")
def test_compare_ais_ranking(capsys):
    code, out, _ = run(capsys, "compare", DATA / "ais.csv", "--x-col", "bmi", "--y-col", "lbm")
    assert code == 0
    ranked = [r["model"] for r in json.loads(out)]
    # the published comparison omits the dependent normal; among the models it
    # lists, the independent normal comes first
    assert ranked[0] == "bvn"
    listed = [m for m in ranked if m in ("bvn-indep", "equidisp-indep", "equidisp-mle")]
    assert listed[0] == "bvn-indep"
    # gamma sits on the boundary, so Model II beats Model I by exactly 2
    reports = {r["model"]: r for r in json.loads(out)}
    assert reports["equidisp-mle"]["estimates"]["gamma"] == 0.0
    assert reports["equidisp-mle"]["aic"] - reports["equidisp-indep"]["aic"] == pytest.approx(2.0, abs=1e-6)


def test_compare_tiny_sample(tmp_path, capsys):
    rng = np.random.default_rng(2)
    p = tmp_path / "t.csv"
    p.write_text("a,b\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in rng.normal(size=(10, 2))))
    code, out, _ = run(capsys, "compare", p)
    assert code == 0 and all(r["aic"] is not None for r in json.loads(out))


def test_lrt_command(tmp_path, capsys):
    p = tmp_path / "c.csv"
    p.write_text("v\n0\n2\n")
    code, out, _ = run(capsys, "lrt", p)
    res = json.loads(out)
    schema("lrt.schema.json")(res)
    assert code == 0 and res["lambda"] == 1 and res["stat"] == 0 and res["p_value"] == 1
    p.write_text("v\n3\n3\n3\n")
    assert run(capsys, "lrt", p)[0] == 1
    rng = np.random.default_rng(6)
    p.write_text("v\n" + column(rng.normal(5, 1, 1000)))
    assert json.loads(run(capsys, "lrt", p)[1])["p_value"] < 1e-3


def test_lrt_size(tmp_path, capsys):
    rng = np.random.default_rng(17)
    p = tmp_path / "n.csv"
    rejections = 0
    for _ in range(200):
        p.write_text("v\n" + column(rng.normal(2, np.sqrt(2), 100)))
        rejections += json.loads(run(capsys, "lrt", p)[1])["p_value"] < 0.05
    assert 0.02 <= rejections / 200 <= 0.08


def test_grid_command(capsys):
    code, out, _ = run(capsys, "grid", "--alpha", 1, "--beta", 4, "--gamma", 5, "--nx", 30, "--ny", 20)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 600 and all(float(r["density"]) >= 0 for r in rows)
    code, out, _ = run(capsys, "grid", "--alpha", 0.099, "--beta", 0.088, "--gamma", 0.12, "--report-modes")
    modes = json.loads(out)
    schema("modes.schema.json")(modes)
    assert modes["n_modes"] >= 2
    out = run(capsys, "grid", "--alpha", 1, "--beta", 4, "--gamma", 5, "--report-modes")[1]
    assert json.loads(out)["n_modes"] == 1
    assert run(capsys, "grid", "--alpha", 1, "--beta", 4, "--gamma", 5, "--nx", 5000, "--ny", 5000)[0] == 1
    assert run(capsys, "grid", "--alpha", -1, "--beta", 4, "--gamma", 5)[0] == 1


def test_study_command(capsys):
    code, out, _ = run(capsys, "study", "--n", 20, "--replicates", 2, "--seed", 3)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 6
    code, out, _ = run(capsys, "study", "--n", 20, "--replicates", 2, "--seed", 3, "--format", "json",
                       "--estimators", "PMLE")
    data = json.loads(out)
    schema("study.schema.json")(data)
    assert {r["estimator"] for r in data} == {"PMLE"}


def test_study_table1_row(capsys):
    out = run(capsys, "study", "--n", 100, "--replicates", 100, "--seed", 1, "--estimators", "MLE")[1]
    rows = {r["param"]: r for r in csv.DictReader(io.StringIO(out))}
    assert abs(float(rows["alpha"]["mean"]) - 1.034) <= 0.05


def test_study_table2_row(capsys):
    out = run(capsys, "study", "--alpha", 1, "--beta", 4, "--gamma", 0.12, "--n", 1000, "--replicates", 100,
              "--seed", 1, "--estimators", "MLE")[1]
    rows = {r["param"]: r for r in csv.DictReader(io.StringIO(out))}
    assert 0.05 <= float(rows["gamma"]["mean"]) <= 0.35


def test_simulate_fit_round_trip(tmp_path, capsys):
    errs = []
    for n in (500, 5000):
        path = tmp_path / f"r{n}.csv"
        run(capsys, "simulate", "--alpha", 1, "--beta", 4, "--gamma", 0.12, "--n", n, "--seed", 21, "--out", path)
        est = json.loads(run(capsys, "fit", path, "--model", "equidisp-pmle")[1])["estimates"]
        errs.append(np.linalg.norm(np.array([est["alpha"], est["beta"], est["gamma"]]) - [1, 4, 0.12]))
    assert errs[1] < errs[0]


def test_simulate_large_then_fit_within_table2_sds(tmp_path, capsys):
    path = tmp_path / "big.csv"
    run(capsys, "simulate", "--alpha", 1, "--beta", 4, "--gamma", 0.12, "--n", 10000, "--seed", 5, "--out", path)
    est = json.loads(run(capsys, "fit", path, "--model", "equidisp-pmle")[1])["estimates"]
    # published n = 1000 MLE standard deviations; at n = 10^4 they are a loose bound
    sds = {"alpha": 0.037, "beta": 0.197, "gamma": 0.151}
    for k, truth in zip(("alpha", "beta", "gamma"), (1, 4, 0.12)):
        assert abs(est[k] - truth) < 3 * sds[k]


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
