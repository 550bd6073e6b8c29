import io
import json
import subprocess
import sys

import pytest

from mixanom import models
from mixanom.cli import dispatch, parse_rates, UsageError
from mixanom.lindblad import operator_to_json
from mixanom.models import ModelId
from mixanom.pauli import OperatorSum, X


def run(*argv):
    out = io.StringIO()
    code = dispatch(list(argv), stdout=out)
    return code, out.getvalue()


def test_catalog_lists_six_models():
    code, text = run("catalog")
    assert code == 0
    assert [r["model"] for r in json.loads(text)["models"]] == list(models.MODEL_NAMES)


def test_anomaly_example2():
    code, text = run("anomaly", "--model", "example2")
    data = json.loads(text)
    assert code == 0
    assert data["indicator"]["value"] == "-1" and data["verdict"] == "nontrivial"
    assert len(data["cocycle"]) == 4 ** 3


def test_anomaly_cluster_is_trivial_with_witness():
    code, text = run("anomaly", "--model", "cluster_aspt", "--L", "12")
    data = json.loads(text)
    assert data["verdict"] == "trivial" and "witness" in data


def test_reproduce_boundary_ssb():
    code, text = run("reproduce", "boundary-ssb-ex1", "--L", "6", "--q", "1")
    assert code == 0
    assert text.startswith("boundary-ssb-ex1: PASS")
    assert '"<Z1 ZL>": "1+0 i"' in text


def test_reproduce_json_format():
    code, text = run("reproduce", "boundary-corr-ex2", "--format", "json")
    data = json.loads(text)
    assert code == 0 and data["passed"] and data["claims"][0]["status"] == "PASS"


def test_failed_check_exits_one():
    # the spin-flip chain count fails honestly (extra strong symmetry)
    code, text = run("reproduce", "steady-degeneracy-ex3")
    assert code == 1 and "FAIL" in text


def test_usage_errors_exit_two(capsys):
    assert run("reproduce", "no-such-claim")[0] == 2
    assert "usage" in capsys.readouterr().err
    assert run("frobnicate")[0] == 2
    assert run()[0] == 2
    assert run("anomaly")[0] == 2
    assert run("steady", "--model", "example2", "--L", "5")[0] == 2
    assert run("steady", "--model", "example1", "--rates", "zeta=2")[0] == 2


@pytest.mark.parametrize("argv", [
    ("anomaly", "--model", "example1"),
    ("steady", "--model", "example2", "--L", "4", "--sector", "all"),
    ("reproduce", "triviality-solver", "--seed", "7", "--format", "json"),
    ("observe", "--model", "example2", "--L", "6", "--bc", "obc", "--renyi2", "--observable", "Z1 Z6"),
])
def test_json_output_is_deterministic(argv):
    first, second = run(*argv), run(*argv)
    assert first == second


def test_steady_reports_degeneracy_and_paulis():
    code, text = run("steady", "--model", "example1", "--L", "4", "--bc", "obc", "--sector", "1")
    data = json.loads(text)
    sec = data["sectors"][0]
    assert code == 0 and sec["degeneracy"] == 2 and len(sec["states"]) == 2
    assert all("I" in s for s in sec["states"])


def test_steady_csv():
    code, text = run("steady", "--model", "example2", "--L", "4", "--format", "csv")
    assert code == 0 and text.splitlines()[0] == "sector,state,pauli,coefficient"


def test_steady_two_dimensional_is_symbolic():
    code, text = run("steady", "--model", "aspt2d_KA", "--Lx", "3", "--Ly", "3")
    data = json.loads(text)
    assert code == 0 and data["numeric"] is False and data["sectors"][0]["annihilated"]


def test_dense_cap_from_environment(monkeypatch):
    monkeypatch.setenv("MIXANOM_DENSE_CAP", "4")
    assert run("steady", "--model", "example2", "--L", "6")[0] == 1


def test_observe_csv():
    code, text = run("observe", "--model", "example1", "--L", "6", "--bc", "obc", "--sector", "1",
                     "--observable", "Z1 Z6", "--connected", "Z1", "Z6", "--format", "csv")
    lines = text.splitlines()
    assert code == 0
    assert lines == ["observable,value,connected,sector", "Z1 Z6,1+0 i,,1", "Z1;Z6,1+0 i,1+0 i,1"]


def test_observe_string_order():
    code, text = run("observe", "--model", "cluster_aspt", "--L", "8", "--string", "1", "2")
    assert json.loads(text)["observables"][0]["value"] == "1+0 i"


def test_verify_state_files(tmp_path):
    mid = ModelId("example2", L=4)
    good = tmp_path / "good.json"
    good.write_text(json.dumps([operator_to_json(s) for s in models.closed_form_steady(mid)]))
    assert run("verify", "--model", "example2", "--L", "4", "--state", str(good))[0] == 0
    bad = tmp_path / "bad.json"
    sites = mid.lattice().sites
    # X on one site does not commute with the dephasing jumps
    bad.write_text(json.dumps(operator_to_json(OperatorSum.identity(sites) + X(sites, 1))))
    code, text = run("verify", "--model", "example2", "--L", "4", "--state", str(bad))
    assert code == 1 and json.loads(text)["passed"] is False


def test_verify_closed_forms_without_file():
    assert run("verify", "--model", "example3", "--L", "6", "--bc", "obc", "--sector", "-1")[0] == 0


def test_out_file(tmp_path):
    path = tmp_path / "cat.json"
    code, text = run("catalog", "--out", str(path))
    assert code == 0 and text == ""
    assert len(json.loads(path.read_text())["models"]) == 6


def test_parse_rates():
    assert parse_rates("r=2,J=1/2") == {"r": 2, "J": 0.5}
    with pytest.raises(UsageError):
        parse_rates("r")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mixanom", "catalog", "--format", "csv"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[0] == "model,parameters,description"
    assert len(res.stdout.splitlines()) == 7
