import csv
import json

import pytest

from bosebound.cli import COLUMNS, main, run_point


def _pt(**kw):
    base = dict(delta=0.0, omega=0.5, n=1, method="sebs", sites=41,
                boundary="periodic", hopping=1.0, dimension=1,
                sector="auto")
    base.update(kw)
    return base


def test_run_point_sebs_reference():
    rec = run_point(_pt(omega=1.0))
    assert rec["reason"] == ""
    assert rec["e_n"] == pytest.approx(-0.6012, abs=5e-5)
    assert rec["e_tilde"] == pytest.approx(abs(rec["e_n"]))
    assert rec["regime"] == "NP_I"
    assert rec["wall_ms"] >= 0.0


def test_run_point_jc_reference():
    rec = run_point(_pt(omega=1.0, n=4, method="jc"))
    assert rec["e_n"] == pytest.approx(-2.0, abs=1e-12)


def test_run_point_ed_over_cap():
    rec = run_point(_pt(method="ed", n=5, sites=301))
    assert rec["e_n"] is None
    assert "cap" in rec["reason"]


def test_run_point_solver_failure_lands_in_reason():
    # three-body solver refuses above its site cap
    rec = run_point(_pt(method="exact3", n=3, sites=101))
    assert rec["e_n"] is None
    assert rec["reason"].startswith("DimensionCapError")


def _sweep_args(out, extra=()):
    return ["sweep", "--delta", "0.0", "--omega", "0.2,0.5", "--n", "1",
            "--method", "sebs,jc", "--redact-timing", "--out", str(out),
            *extra]


def test_sweep_deterministic_and_column_order(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(_sweep_args(out1)) == 0
    assert main(_sweep_args(out2, ("--workers", "3"))) == 0
    b1, b2 = out1.read_bytes(), out2.read_bytes()
    assert b1 == b2
    rows = list(csv.reader(out1.read_text().splitlines()))
    assert tuple(rows[0]) == COLUMNS
    assert len(rows) == 1 + 4            # 2 omegas x 2 methods


def test_csv_floats_round_trip(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["sweep", "--delta", "0.0", "--omega", "1.0", "--n", "1",
                 "--method", "sebs", "--redact-timing",
                 "--out", str(out)]) == 0
    row = next(csv.DictReader(out.read_text().splitlines()))
    rec = run_point(_pt(omega=1.0))
    assert float(row["e_n"]) == rec["e_n"]
    assert float(row["e_tilde"]) == rec["e_tilde"]
    assert float(row["xi_g"]) == rec["xi_g"]


def test_jsonl_mirrors_csv(tmp_path):
    outc = tmp_path / "a.csv"
    outj = tmp_path / "a.jsonl"
    assert main(_sweep_args(outc)) == 0
    assert main(_sweep_args(outj, ("--format", "jsonl"))) == 0
    rows = list(csv.DictReader(outc.read_text().splitlines()))
    recs = [json.loads(line) for line in outj.read_text().splitlines()]
    assert len(rows) == len(recs)
    for row, rec in zip(rows, recs):
        for col in COLUMNS:
            jval = rec[col]
            cval = row[col]
            if jval is None:
                assert cval == ""
            elif isinstance(jval, float):
                assert float(cval) == jval
            else:
                assert cval == str(jval)


def test_config_file_precedence(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("delta = -0.3\nomega = 0.7\n# comment\n")
    out = tmp_path / "a.csv"
    assert main(["sweep", "--config", str(cfgfile), "--omega", "0.9",
                 "--n", "1", "--method", "sebs", "--redact-timing",
                 "--out", str(out)]) == 0
    row = next(csv.DictReader(out.read_text().splitlines()))
    assert float(row["delta"]) == -0.3       # from the file
    assert float(row["omega"]) == 0.9        # flag wins over the file


def test_compare_pass_and_fail(tmp_path):
    ok = main(["compare", "--delta", "0.0", "--omega", "1.0", "--n", "2",
               "--method", "exact2,ed", "--sites", "41",
               "--out", str(tmp_path / "c.csv")])
    assert ok == 0
    bad = main(["compare", "--delta", "0.0", "--omega", "1.0", "--n", "1",
                "--method", "sebs,jc",
                "--out", str(tmp_path / "d.csv")])
    assert bad == 4
    text = (tmp_path / "d.csv").read_text()
    assert "FAIL" in text


def test_scaling_fit_exponent(tmp_path):
    out = tmp_path / "fit.json"
    code = main(["scaling-fit", "--delta", "0.0",
                 "--omega", "log:1e-3:1e-2:8", "--n", "1",
                 "--method", "sebs", "--out", str(out)])
    assert code == 0
    fit = json.loads(out.read_text())
    assert fit["exponent"] == pytest.approx(4.0 / 3.0, abs=0.05)
    assert fit["n_points"] == 8
    assert fit["method"] == "sebs"


def test_bad_inputs_exit_2(tmp_path):
    assert main(["sweep", "--delta", "", "--omega", "0.5",
                 "--n", "1", "--method", "sebs"]) == 2
    assert main(["sebs", "--delta", "0.0", "--omega", "0.5",
                 "--n", "2"]) == 2
    assert main(["sweep", "--delta", "0.0", "--omega", "0.5", "--n", "1",
                 "--method", "nonsense"]) == 2


def test_single_point_solver_failure_exit_3(capsys):
    # in-band request: no bound state above the band edge threshold
    code = main(["exact2", "--delta", "0.0", "--omega", "0.5",
                 "--sites", "1001"])
    assert code == 3
    assert "capped" in capsys.readouterr().err
