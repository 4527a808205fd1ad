import json
import time

import pytest

from znthomae.cli import EXIT_INPUT, EXIT_OK, load_lambdas, main, seeded_lambdas


def run_cli(tmp_path, *argv, name="out.json"):
    out = tmp_path / name
    code = main([*argv, "--report", str(out)])
    return code, json.loads(out.read_text()), out


def test_tables_values_and_speed(tmp_path):
    t0 = time.perf_counter()
    code, doc, _ = run_cli(tmp_path, "tables", "--n", "2,3,4,5")
    assert time.perf_counter() - t0 < 1.0
    assert code == EXIT_OK
    by_n = {t["N"]: t for t in doc["tables"]}
    assert by_n[2]["exponent_by_difference"] == {"0": "1/1", "1": "0/1"}
    assert by_n[3]["exponent_by_difference"] == {"0": "3/1", "1": "1/1", "2": "1/1"}
    assert by_n[4]["exponent_by_difference"] == {"0": "6/1", "1": "3/1", "2": "2/1", "3": "3/1"}
    assert by_n[5]["exponent_by_difference"] == {"0": "10/1", "1": "6/1", "2": "4/1", "3": "4/1", "4": "6/1"}
    assert [by_n[n]["mu"] for n in (2, 3, 4, 5)] == ["1/4", "5/9", "7/8", "6/5"]
    assert by_n[4]["q"][0] == ["5/16", "-1/16", "-3/16", "-1/16"]
    assert by_n[5]["q"][0] == ["2/5", "0/1", "-1/5", "-1/5", "0/1"]
    assert all(t["weighted_sum_identity"] for t in doc["tables"])


def test_tables_with_partition_and_csv(tmp_path):
    csv = tmp_path / "t.csv"
    code, doc, _ = run_cli(tmp_path, "tables", "--n", "3", "--partition", "1,4|2,5|3,6", "--csv", str(csv))
    assert code == EXIT_OK
    pairs = doc["tables"][0]["partitions"]["1,4|2,5|3,6"]
    assert [1, 4, "3/1"] in pairs and [1, 2, "1/1"] in pairs
    assert csv.read_text().splitlines()[0] == "N,quantity,i,j,value"


def test_periods_output_is_reproducible(tmp_path):
    code, doc, out1 = run_cli(tmp_path, "periods", "--n", "2", "--m", "2", "--seed", "1", name="a.json")
    assert code == EXIT_OK and doc["genus"] == 1
    _, _, out2 = run_cli(tmp_path, "periods", "--n", "2", "--m", "2", "--seed", "1", name="b.json")
    assert out1.read_bytes() == out2.read_bytes()
    assert doc["checks"]["re_tau_negative_definite"]["passed"]


def test_coincident_branch_points_exit_with_input_error(tmp_path):
    f = tmp_path / "lam.json"
    f.write_text(json.dumps([[0, 0], [1, 0], [1, 0], [0, 1]]))
    code, doc, _ = run_cli(tmp_path, "periods", "--n", "2", "--lambdas", str(f))
    assert code == EXIT_INPUT
    assert "coincide" in doc["error"]["message"] or "distinct" in doc["error"]["message"]


def test_extended_precision_is_rejected(tmp_path):
    code, doc, _ = run_cli(tmp_path, "periods", "--n", "2", "--m", "2", "--precision", "extended:128")
    assert code == EXIT_INPUT and "error" in doc


def test_bad_arguments_exit_with_input_error(tmp_path):
    assert main(["verify", "--n", "3"]) == EXIT_INPUT
    assert main(["verify", "--n", "x"]) == EXIT_INPUT


def test_lambdas_file_formats(tmp_path):
    lam = seeded_lambdas(2, 2, 1)
    txt = tmp_path / "lam.txt"
    txt.write_text("\n".join(f"{z.real} {z.imag}" for z in lam) + "\n")
    got, _ = load_lambdas(str(txt))
    assert [complex(z) for z in got] == pytest.approx(list(lam), abs=1e-15)
    code, doc, _ = run_cli(tmp_path, "periods", "--n", "2", "--lambdas", str(txt))
    assert code == EXIT_OK and doc["genus"] == 1


@pytest.mark.parametrize("argv", [["--n", "3", "--m", "2", "--seed", "7"], ["--n", "2", "--m", "3", "--seed", "1"]])
def test_verify_reference_runs_pass(tmp_path, argv):
    csv = tmp_path / "r.csv"
    code, doc, _ = run_cli(tmp_path, "verify", *argv, "--control", "--csv", str(csv))
    assert code == EXIT_OK
    checks = doc["report"]["checks"]
    for k in ("thomae", "vanishing", "exchange", "szego", "fay", "variation", "lambda-derivative"):
        assert checks[k]["passed"], k
    assert checks["vanishing"]["control"]["non_vanishing"]
    assert csv.read_text().startswith("partition,")
    if argv[1] == "2":
        assert checks["hyperelliptic"]["satisfied"]


def test_verify_subset_and_parallel_agree(tmp_path):
    base = ["verify", "--n", "3", "--m", "2", "--seed", "7", "--check", "thomae,exchange"]
    code1, d1, _ = run_cli(tmp_path, *base, name="s.json")
    code2, d2, _ = run_cli(tmp_path, *base, "--parallel", "3", name="p.json")
    assert code1 == code2 == EXIT_OK
    assert set(d1["report"]["checks"]) >= {"thomae", "exchange"} and "szego" not in d1["report"]["checks"]
    assert d1["report"] == d2["report"]
