import csv
import io
import json
import math

import numpy as np
import pytest

import equidisp.study_harness as sh
from equidisp.equidisp_model import EquiDispParams
from equidisp.study_harness import (
    CSV_FIELDS,
    EmptyAggregateError,
    StudyConfig,
    run_study,
    summary_table,
)

from conftest import SCHEMAS

TRUTH = EquiDispParams(1.0, 4.0, 5.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(replicates=1), dict(sample_size=4), dict(estimators=()), dict(estimators=("OLS",)),
     dict(parallelism=0), dict(base_seed=-1)],
)
def test_config_validation(kwargs):
    base = dict(truth=TRUTH, sample_size=50, replicates=5)
    base.update(kwargs)
    with pytest.raises(ValueError):
        StudyConfig(**base)


def test_two_replicates_sd_is_two_point_sd():
    s = run_study(StudyConfig(TRUTH, 50, 2, base_seed=1))
    for name in ("MLE", "PMLE"):
        es = s[name]
        assert es.n_attempted == 2 and es.n_converged == 2
        for j, p in enumerate(sh.PARAMS):
            a, b = es.estimates[:, j]
            assert es.params[p].sd == pytest.approx(abs(a - b) / math.sqrt(2), rel=1e-14)
            assert es.params[p].mean == pytest.approx((a + b) / 2, rel=1e-14)
            assert es.params[p].ci_lo <= es.params[p].ci_hi


def test_deterministic_regardless_of_parallelism():
    a = run_study(StudyConfig(TRUTH, 30, 6, base_seed=99, parallelism=1))
    b = run_study(StudyConfig(TRUTH, 30, 6, base_seed=99, parallelism=2))
    assert a == b
    for name in ("MLE", "PMLE"):
        np.testing.assert_array_equal(a[name].estimates, b[name].estimates)


def test_nonconverged_replicates_excluded(monkeypatch):
    real = sh._FITTERS["PMLE"]
    count = {"n": 0}

    def sometimes(s):
        count["n"] += 1
        rep = real(s)
        rep.converged = count["n"] % 2 == 0
        return rep

    monkeypatch.setitem(sh._FITTERS, "PMLE", sometimes)
    s = run_study(StudyConfig(TRUTH, 30, 6, estimators=("PMLE",)))
    assert s["PMLE"].n_attempted == 6 and s["PMLE"].n_converged == 3
    assert s["PMLE"].estimates.shape == (3, 3)


def test_all_failed_is_an_error(monkeypatch):
    def fail(s):
        raise ArithmeticError("nope")

    monkeypatch.setitem(sh._FITTERS, "MLE", fail)
    with pytest.raises(EmptyAggregateError):
        run_study(StudyConfig(TRUTH, 30, 3, estimators=("MLE",)))


def test_concentration_with_sample_size():
    small = run_study(StudyConfig(TRUTH, 50, 100, base_seed=5, estimators=("MLE",)))
    large = run_study(StudyConfig(TRUTH, 500, 100, base_seed=5, estimators=("MLE",)))
    assert large["MLE"].params["alpha"].sd < small["MLE"].params["alpha"].sd


def test_csv_table_round_trip():
    sums = [run_study(StudyConfig(TRUTH, n, 3, base_seed=2)) for n in (20, 40)]
    text = summary_table(sums, "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(csv.reader(io.StringIO(text)).__next__()) == CSV_FIELDS
    assert len(rows) == 2 * 2 * 3
    first = rows[0]
    ps = sums[0]["MLE"].params["alpha"]
    assert (first["n"], first["estimator"], first["param"]) == ("20", "MLE", "alpha")
    assert float(first["mean"]) == pytest.approx(ps.mean, rel=1e-5)
    assert int(first["attempted"]) == 3


def test_json_table_schema():
    jsonschema = pytest.importorskip("jsonschema")
    s = run_study(StudyConfig(TRUTH, 20, 3, base_seed=3))
    rows = json.loads(summary_table([s], "json"))
    jsonschema.validate(rows, json.loads((SCHEMAS / "study.schema.json").read_text()))
    assert rows[0]["mean"] == s["MLE"].params["alpha"].mean


def test_table_errors():
    with pytest.raises(ValueError):
        summary_table([], "csv")
    s = run_study(StudyConfig(TRUTH, 20, 2))
    with pytest.raises(ValueError):
        summary_table([s], "xml")
