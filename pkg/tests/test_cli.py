import json
import subprocess
import sys

import pytest

from fockforge.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, main

NSX = "devices/nsx.json"
HOM = "devices/hom.json"
SWAP = "devices/swap.json"


def call(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_run_nsx_json(capsys):
    rc, out, _ = call(capsys, "run", NSX, "--format", "json")
    assert rc == EXIT_OK
    body = json.loads(out[out.index("{"):])
    assert body["success_probability"] == pytest.approx(0.75, abs=1e-7)
    amps = {tuple(t["ket"]): t["re"] for t in body["state"]["terms"]}
    assert amps[(0,)] == pytest.approx(0.5, abs=1e-7)
    assert amps[(1,)] == pytest.approx(0.5, abs=1e-7)
    assert amps[(2,)] == pytest.approx(-0.5, abs=1e-7)


def test_run_csv_writes_files(capsys, tmp_path):
    prefix = str(tmp_path / "nsx")
    rc, out, _ = call(capsys, "run", NSX, "--out", prefix)
    assert rc == EXIT_OK
    assert "success probability: 0.75" in out
    bins = (tmp_path / "nsx.bins.csv").read_text().splitlines()
    assert bins[0] == "ket,probability"
    assert len(bins) == 4
    state = json.loads((tmp_path / "nsx.state.json").read_text())
    assert state["nmodes"] == 1


def test_amp_hom_coincidence_is_zero(capsys):
    rc, out, _ = call(capsys, "amp", HOM, "--ket", "1,1", "--format", "json")
    assert rc == EXIT_OK
    rec = json.loads(out)
    assert rec["p"] == 0.0
    rc, out, _ = call(capsys, "amp", HOM, "--ket", "2,0", "--format", "json")
    assert json.loads(out)["p"] == pytest.approx(0.5, abs=1e-9)


def test_amp_bad_ket(capsys):
    rc, _, err = call(capsys, "amp", HOM, "--ket", "1,x")
    assert rc == EXIT_INVALID
    assert "cannot parse ket" in err
    rc, _, _ = call(capsys, "amp", HOM, "--ket", "1,1,0")
    assert rc == EXIT_INVALID


@pytest.mark.parametrize("method", ["clifford", "metropolis"])
def test_sample_csv(capsys, method):
    rc, out, _ = call(capsys, "sample", HOM, "--n", "2000", "--seed", "3", "--method", method)
    assert rc == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == "ket,count,frequency"
    rows = {line.rsplit(",", 2)[0]: int(line.rsplit(",", 2)[1]) for line in lines[1:]}
    assert set(rows) == {'"2 0"', '"0 2"'}
    assert sum(rows.values()) == 2000


def test_same_seed_gives_identical_output(capsys):
    a = call(capsys, "sample", HOM, "--n", "500", "--seed", "9", "--method", "metropolis")[1]
    b = call(capsys, "sample", HOM, "--n", "500", "--seed", "9", "--method", "metropolis")[1]
    assert a == b


def test_ensemble_deterministic(capsys):
    args = ("ensemble", SWAP, "--runs", "30", "--seed", "5", "--format", "json")
    rc, a, _ = call(capsys, *args)
    assert rc == EXIT_OK
    b = call(capsys, *args)[1]
    assert a == b
    body = json.loads(a)
    assert body["runs"] == 30
    n = len(body["kets"])
    trace = sum(body["re"][i][i] for i in range(n))
    assert trace == pytest.approx(1.0, abs=1e-8)


def test_ensemble_text(capsys):
    rc, out, _ = call(capsys, "ensemble", SWAP, "--runs", "20", "--seed", "1",
                      "--min-weight", "0.01")
    assert rc == EXIT_OK
    assert out.strip()


def test_bench(capsys):
    rc, out, _ = call(capsys, "bench", "--grid", "2,4;3,6", "--amp", "4,8", "--seed", "0")
    assert rc == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == "task,core,basis,photons,modes,seconds"
    assert len(lines) == 1 + 2 * 4 + 1


def test_validate(capsys, tmp_path):
    assert call(capsys, "validate", NSX)[0] == EXIT_OK
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"channels": 2, "detectors": [{"ch": 0}, {"ch": 0}]}))
    rc, _, err = call(capsys, "validate", str(bad))
    assert rc == EXIT_INVALID
    assert "detectors[1].ch" in err
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert call(capsys, "validate", str(broken))[0] == EXIT_INVALID
    assert call(capsys, "validate", str(tmp_path / "missing.json"))[0] == EXIT_INVALID


def test_numeric_error_exit_code(capsys, tmp_path):
    gain = tmp_path / "gain.json"
    gain.write_text(json.dumps({
        "channels": 1, "photons": [{"ch": 0}],
        "elements": [{"kind": "unitary", "ch": [0], "params": {"matrix": [[2.0]]}}],
    }))
    rc, _, err = call(capsys, "run", str(gain))
    assert rc == EXIT_NUMERIC
    assert "numerical error" in err


@pytest.mark.parametrize("body", [
    json.dumps([[2, 0], [0, 2]]),
    json.dumps([{"ket": [2, 0]}, {"ket": [0, 2]}]),
    "2 0\n0,2\n",
])
def test_user_basis_file(capsys, tmp_path, body):
    path = tmp_path / "basis.txt"
    path.write_text(body)
    rc, out, _ = call(capsys, "run", HOM, "--basis", f"file={path}", "--format", "json")
    assert rc == EXIT_OK
    rec = json.loads(out[out.index("{"):])
    assert {tuple(b["ket"]) for b in rec["bins"]} == {(2, 0), (0, 2)}


def test_bad_basis_option(capsys):
    assert call(capsys, "run", HOM, "--basis", "everything")[0] == EXIT_INVALID


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fockforge.cli", "amp", HOM, "--ket", "2,0"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "p=0.500000000" in res.stdout
