import json
import subprocess
import sys

import pytest

from orthoselmer import __version__
from orthoselmer.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_orbit_count(capsys):
    code, out, _ = run(["orbit-count", "--ell", "3", "--m", "2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["orbits"] == 40
    assert doc["version"] == __version__ and doc["seed"] == 0 and doc["config"]["ell"] == 3


def test_moments(capsys):
    code, out, _ = run(["moments", "--ell", "2", "--j", "3"], capsys)
    assert code == 0 and json.loads(out)["M_j"] == 135


def test_rs_exact_csv(capsys):
    code, out, _ = run(["rs-exact", "--ell", "3", "--N", "2", "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[1].startswith("0,41,128")


def test_coset_pgf(capsys):
    code, out, _ = run(["coset-pgf", "--ell", "3", "--r", "2", "--coset", "C", "--enumerate"],
                       capsys)
    doc = json.loads(out)
    assert code == 0 and doc["match"] and doc["is_pgf"]


def test_kernel_dist_deterministic(capsys, tmp_path):
    args = ["kernel-dist", "--n", "3", "--d", "1", "--q", "5", "--mode", "mc", "--samples",
            "3000", "--seed", "7"]
    _, a, _ = run(args, capsys)
    _, b, _ = run(args + ["--threads", "3"], capsys)
    da, db = json.loads(a), json.loads(b)
    assert da["distribution"] == db["distribution"]
    _, c, _ = run(args, capsys)
    assert a == c
    assert da["params"]["m"] == 4 and da["seed"] == 7


def test_kernel_dist_exact_mean(capsys):
    code, out, _ = run(["kernel-dist", "--n", "15", "--m", "2", "--q", "7"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["moments"][0]["value"] == [24, 1]


def test_kernel_dist_class_vector(capsys):
    code, out, _ = run(["kernel-dist", "--n", "15", "--m", "2", "--q", "3:1,5:0"], capsys)
    assert code == 0 and json.loads(out)["params"]["coset"]["spinor"] == [[3, 1], [5, 0]]


@pytest.mark.parametrize("args", [
    ["kernel-dist", "--n", "15", "--d", "1", "--q", "5"],
    ["kernel-dist", "--n", "15", "--d", "1", "--q", "12"],
    ["kernel-dist", "--n", "3"],
    ["kernel-dist", "--n", "3", "--m", "2", "--mode", "mc"],
    ["moments", "--ell", "3"],
    ["orbit-count", "--ell", "3", "--m", "2", "--threads", "0"],
])
def test_validation_errors(args, capsys):
    code, _, err = run(args, capsys)
    assert code == 2 and "error" in err


def test_budget_exit(capsys):
    code, _, err = run(["kernel-dist", "--n", "3", "--m", "3", "--budget", "100"], capsys)
    assert code == 3 and "budget" in err


def test_config_file_flags_win(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sample\nell = 3\nm = 2\ntable = true\n")
    _, out, _ = run(["orbit-count", "--config", str(cfg)], capsys)
    doc = json.loads(out)
    assert doc["orbits"] == 40 and doc["f"][2] == [1, 12, 27]
    _, out, _ = run(["orbit-count", "--config", str(cfg), "--m", "1"], capsys)
    assert json.loads(out)["orbits"] == 4
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert run(["orbit-count", "--config", str(bad)], capsys)[0] == 2


def test_compare_and_out(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    base = ["kernel-dist", "--n", "3", "--m", "2", "--q", "5"]
    assert run(base + ["--out", str(a)], capsys)[0] == 0
    assert run(base + ["--mode", "mc", "--samples", "5000", "--out", str(b)], capsys)[0] == 0
    code, out, _ = run(["compare", "--a", str(a), "--b", str(b)], capsys)
    assert code == 0 and json.loads(out)["report"]["pass"]
    c = tmp_path / "c.json"
    run(["kernel-dist", "--n", "3", "--m", "2", "--dickson", "1", "--out", str(c)], capsys)
    code, out, _ = run(["compare", "--a", str(a), "--b", str(c)], capsys)
    assert code == 3 and not json.loads(out)["report"]["pass"]


def test_bklpr_and_markov(capsys):
    code, out, _ = run(["bklpr-sample", "--n", "15", "--m", "6", "--samples", "500"], capsys)
    assert code == 0 and json.loads(out)["distribution"]["kind"] == "empirical"
    code, out, _ = run(["bklpr-sample", "--model", "intersection", "--ell", "3", "--e", "2",
                        "--m", "4", "--samples", "300", "--emit-chains"], capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc["chains"]) == 300
    code, out, _ = run(["markov-verify", "--ell", "3", "--e", "2", "--m", "1"], capsys)
    assert code == 0 and json.loads(out)["report"]["pass"]


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "orthoselmer", "moments", "--ell", "3", "--j", "2"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)["M_j"] == 40
