import json
import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from inardisp import __version__
from inardisp.cli import main
from inardisp.errors import SeriesFormatError
from inardisp.estimation import FitResult
from inardisp.process import CountSeries
from inardisp.reporting import dumps, fit_document, read_series, write_report, write_series

DATA = Path(__file__).parent / "data"
SYNTH = DATA / "synthetic_series.txt"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def strip_timestamp(text):
    return re.sub(r'"timestamp": "[^"]*"', '"timestamp": ""', text)


# --- series ingestion --------------------------------------------------------


def test_read_plain(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("3\n1\n\n4\n")
    assert list(read_series(p)) == [3, 1, 4]


def test_read_rejects_decimal_with_line(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("3\n2.5\n")
    with pytest.raises(SeriesFormatError) as exc:
        read_series(p)
    assert exc.value.line == 2 and "line 2" in str(exc.value)


def test_read_rejects_negative_and_empty(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1\n-3\n")
    with pytest.raises(SeriesFormatError, match="negative"):
        read_series(p)
    p.write_text("\n\n")
    with pytest.raises(SeriesFormatError, match="empty"):
        read_series(p)


def test_read_csv_by_name_and_index(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("week,count\n1,7\n2,0\n3,4\n")
    assert list(read_series(p, "csv", "count")) == [7, 0, 4]
    assert list(read_series(p, "csv", 1)) == [7, 0, 4]
    q = tmp_path / "n.csv"
    q.write_text("1,7\n2,0\n")
    assert list(read_series(q, "csv", "1")) == [7, 0]
    with pytest.raises(SeriesFormatError):
        read_series(p, "csv", "missing")


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=50))
def test_write_read_roundtrip(tmp_path, values):
    p = tmp_path / "rt.txt"
    write_series(CountSeries(values), p)
    assert list(read_series(p)) == values


# --- report serialization ----------------------------------------------------


def test_float_format_and_null():
    text = dumps({"a": 0.1, "b": float("nan"), "c": [1, 2.5]})
    assert '"a": 0.10000000000000001' in text and '"b": null' in text
    assert json.loads(text)["c"] == [1, 2.5]


def test_fit_without_hessian_has_null_std_errors():
    f = FitResult("cml", "dp", 0.3, 5.0, 0.5, std_errors=None, warnings=["Hessian not negative definite"])
    doc = fit_document(f)
    assert doc["std_errors"] is None and doc["warnings"] == ["Hessian not negative definite"]
    assert list(doc)[:5] == ["method", "family", "estimates", "std_errors", "loglik"]


def test_write_report_surfaces_path(tmp_path):
    bad = tmp_path / "nope" / "r.json"
    with pytest.raises(OSError, match="nope"):
        write_report({"a": 1}, bad)


# --- CLI ---------------------------------------------------------------------


def test_disp_table_table1(capsys):
    code, out, _ = run(["disp-table", "--family", "dp", "--alphas", "0.3,0.5,0.7", "--phis",
                        "0.3,0.5,0.7,1.3,1.5,1.7"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["rows"]) == 6 and all(len(r["fisher_index"]) == 3 for r in doc["rows"])
    assert doc["rows"][1]["fisher_index"][0] == pytest.approx(1.7692, abs=5e-5)
    assert doc["manifest"]["artifact_version"] == __version__


def test_disp_table_latex(capsys):
    code, out, _ = run(["disp-table", "--family", "gp", "--alphas", "0.3", "--phis", "0.5", "--latex-table"],
                       capsys)
    assert code == 0 and "3.3077" in out and out.startswith("\\begin{tabular}")


def test_simulate_is_seeded(capsys, tmp_path, monkeypatch):
    args = ["simulate", "--family", "gp", "--alpha", 0.3, "--mu", 1, "--phi", 0.5, "--length", 50]
    _, a, _ = run(args + ["--seed", 5], capsys)
    _, b, _ = run(args + ["--seed", 5], capsys)
    _, c, _ = run(args + ["--seed", 6], capsys)
    assert a == b != c
    monkeypatch.setenv("INARDISP_SEED", "5")
    _, d, _ = run(args, capsys)
    assert d == a


def test_fit_poisson_cml_has_two_parameters(capsys, tmp_path):
    out = tmp_path / "s.txt"
    run(["simulate", "--family", "poisson", "--alpha", 0.4, "--mu", 2, "--length", 300, "--seed", 1, "-o", out],
        capsys)
    code, text, _ = run(["fit", out, "--family", "poisson", "--method", "cml"], capsys)
    doc = json.loads(text)
    assert code == 0 and doc["k"] == 2 and doc["estimates"]["phi"] is None
    assert set(doc["std_errors"]) == {"alpha", "mu"}


def test_fit_reports_are_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["fit", SYNTH, "--family", "all", "--method", "all", "-o", a], capsys)
    run(["fit", SYNTH, "--family", "all", "--method", "all", "-o", b], capsys)
    assert strip_timestamp(a.read_text()) == strip_timestamp(b.read_text())
    doc = json.loads(a.read_text())
    assert len(doc["fits"]) == 9 and doc["sample"]["T"] == 150


def test_fit_csv_column(capsys):
    code, text, _ = run(["fit", DATA / "synthetic_series.csv", "--column", "count", "--family", "gp", "--method",
                         "yw"], capsys)
    ref_code, ref, _ = run(["fit", SYNTH, "--family", "gp", "--method", "yw"], capsys)
    assert code == ref_code == 0
    assert json.loads(text)["estimates"] == json.loads(ref)["estimates"]


def test_test_dispersion_and_lr(capsys):
    code, text, _ = run(["test-dispersion", SYNTH, "--beta", 0.05], capsys)
    doc = json.loads(text)
    assert code == 0 and doc["test_name"] == "equidispersion" and doc["manifest"]["config"]["beta"] == 0.05
    code, text, _ = run(["lr-test", "--loglik-null", -100, "--loglik-alt", -98.4385], capsys)
    assert code == 0 and round(json.loads(text)["p_value"], 4) == 0.0772
    code, text, _ = run(["lr-test", SYNTH, "--null", "poisson", "--alt", "gp"], capsys)
    doc = json.loads(text)
    assert code == 0 and doc["details"]["df"] == 1 and len(doc["fits"]) == 2


def test_mc_study_cli(capsys, tmp_path):
    cfg = tmp_path / "mc.json"
    cfg.write_text(json.dumps({"family": "dp", "true_alpha": 0.3, "true_mu": 5, "true_phi": 0.5,
                               "sample_sizes": [50], "methods": ["cls", "yw"]}))
    code, text, _ = run(["mc-study", cfg, "--replicates", 5, "--seed", 3], capsys)
    doc = json.loads(text)
    assert code == 0 and doc["manifest"]["master_seed"] == 3
    cells = doc["grid"][0]["cells"]
    assert {(c["method"], c["parameter"]) for c in cells} == {(m, p) for m in ("cls", "yw")
                                                             for p in ("alpha", "mu", "phi")}
    code, tex, _ = run(["mc-study", cfg, "--replicates", 5, "--seed", 3, "--latex-table"], capsys)
    assert code == 0 and "\\widehat{\\alpha}_{\\mathrm{CLS}}" in tex


@pytest.mark.parametrize(
    "argv,code",
    [
        ([], 1),
        (["bogus"], 1),
        (["fit"], 1),
        (["fit", SYNTH, "--method", "mle"], 1),
        (["fit", SYNTH, "--unknown-flag"], 1),
        (["disp-table", "--family", "dp", "--alphas", "a,b", "--phis", "1"], 1),
        (["simulate", "--family", "dp", "--alpha", 0.3, "--mu", 1, "--length", 10], 1),
        (["lr-test"], 1),
        (["fit", "/no/such/file.txt"], 2),
        (["simulate", "--family", "gp", "--alpha", 0.3, "--mu", 1, "--phi", 1.5, "--length", 10], 2),
        (["disp-table", "--family", "dp", "--alphas", "1.2", "--phis", "1"], 2),
        (["test-dispersion", SYNTH, "--beta", 2], 2),
        (["lr-test", "--loglik-null", -10, "--loglik-alt", -20], 2),
    ],
)
def test_exit_codes(argv, code, capsys):
    got, _, err = run(argv, capsys)
    assert got == code
    assert err


def test_bad_data_file_exit_code(capsys, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1\nx\n")
    code, _, err = run(["fit", p], capsys)
    assert code == 2 and "line 2" in err


def test_simulate_fit_roundtrip_within_three_se(capsys, tmp_path):
    out = tmp_path / "s.txt"
    run(["simulate", "--family", "gp", "--alpha", 0.3, "--mu", 1, "--phi", 0.5, "--length", 10_000, "--seed", 42,
         "-o", out], capsys)
    code, text, _ = run(["fit", out, "--family", "gp", "--method", "cml"], capsys)
    doc = json.loads(text)
    truth = {"alpha": 0.3, "mu": 1.0, "phi": 0.5}
    for k, v in truth.items():
        assert abs(doc["estimates"][k] - v) < 3 * doc["std_errors"][k]
