import json
from pathlib import Path

import numpy as np
import pytest

from nbldpc import cli
from nbldpc.bec_decoder import ChannelOutput
from nbldpc.onthefly_decoder import ArrivalStream
from nbldpc.tanner_code import read_code

GOLDEN = Path(__file__).parent / "golden"
SMALL = ["--p", "2", "--lambda", "1@2", "--rho", "1@3", "--n", "60"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_gen_code_matches_golden(tmp_path, capsys):
    out = tmp_path / "c.code"
    rc = run("gen-code", "--p", 2, "--group", "field", "--lambda", "1:1.0@2", "--rho", "1.0@3",
             "--f", "uniform", "--n", 300, "--seed", 7, "--out", out)
    assert rc == 0
    assert "N=300 M=200" in capsys.readouterr().out
    assert out.read_bytes() == (GOLDEN / "gen_code_p2_n300_seed7.code").read_bytes()


def test_gen_code_other_seed_differs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("gen-code", *SMALL, "--seed", 1, "--out", a)
    run("gen-code", *SMALL, "--seed", 2, "--out", b)
    assert a.read_bytes() != b.read_bytes()


@pytest.mark.parametrize("argv,code", [
    (["frobnicate"], 1),
    (["gen-code", "--p", "2"], 1),
    (["threshold", "--p", "2", "--lambda", "1@2", "--rho", "1@3", "--f", "1:0.5"], 1),
    (["gen-code", "--p", "2", "--lambda", "1@2", "--rho", "1@3", "--n", "301", "--out", "x"], 2),
    (["simulate", *SMALL, "--eps", "a:b"], 1),
    (["decode", "--code", "/nonexistent", "--channel", "/nonexistent"], 2),
])
def test_exit_codes(argv, code, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == code
    assert capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 2, "lambda": "1@2", "rho": "1@3", "n": 60, "seed": 3}))
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run("gen-code", "--config", cfg, "--out", a) == 0
    assert run("gen-code", *SMALL, "--seed", 3, "--out", b) == 0
    assert run("gen-code", "--config", cfg, "--seed", 4, "--out", c) == 0
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("gen-code", "--config", bad, "--out", a) == 1


def test_encode_decode_roundtrip(tmp_path):
    code_path, ch = tmp_path / "c", tmp_path / "ch"
    run("gen-code", *SMALL, "--out", code_path)
    code = read_code(code_path)
    msg = "".join(np.random.default_rng(0).choice(["0", "1"], size=code.K_bin))
    assert run("encode", "--code", code_path, "--message", msg, "--epsilon", 0.2, "--out", ch) == 0
    assert ChannelOutput.read(ch).bits.shape == (60, 2)
    out = tmp_path / "d.json"
    assert run("decode", "--code", code_path, "--channel", ch, "--out", out) == 0
    body = json.loads(out.read_text())
    assert body["mode"] == "batch" and body["outcome"] == "success"
    assert body["residual_bits"] == 0 and None not in body["symbols"]
    assert run("encode", "--code", code_path, "--message", "01", "--out", ch) == 1


def test_decode_stream(tmp_path):
    code_path = tmp_path / "c"
    run("gen-code", *SMALL, "--out", code_path)
    code = read_code(code_path)
    rng = np.random.default_rng(5)
    from nbldpc.tanner_code import random_codeword
    stream = ArrivalStream.shuffled(random_codeword(code, rng), code.p, rng)
    stream.write(tmp_path / "s")
    out = tmp_path / "d.json"
    assert run("decode", "--code", code_path, "--stream", tmp_path / "s", "--out", out) == 0
    body = json.loads(out.read_text())
    assert body["mode"] == "stream" and body["outcome"] == "success"
    assert code.K_bin <= body["k_received"] <= code.N * code.p


def test_simulate_csv_and_sidecar(tmp_path):
    out = tmp_path / "sim.csv"
    argv = ["simulate", *SMALL, "--eps", "0.1:0.9:3", "--trials", 20, "--out", out]
    assert run(*argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "epsilon,trials,block_failures,bit_erasures_residual"
    rows = [r.split(",") for r in lines[1:]]
    assert [float(r[0]) for r in rows] == [0.1, 0.5, 0.9]
    assert all(int(r[1]) == 20 and 0 <= int(r[2]) <= 20 for r in rows)
    meta = json.loads((tmp_path / "sim.csv.meta.json").read_text())
    assert meta["schema"] == 1 and len(meta["config_hash"]) == 16
    first = out.read_bytes()
    assert run(*argv[:-2], "--jobs", 2, "--out", out) == 0
    assert out.read_bytes() == first


def test_threshold_json(tmp_path):
    out = tmp_path / "t.json"
    argv = ["threshold", "--p", 2, "--lambda", "1@2", "--rho", "1@3", "--out", out]
    assert run(*argv) == 0
    body = json.loads(out.read_text())
    assert set(body) == {"threshold", "version", "schema", "config_hash", "config"}
    assert body["threshold"] == pytest.approx(0.5772, abs=5e-4)
    assert run(*argv[:-2], "--reduce", "class", "--out", tmp_path / "r.json") == 0
    red = json.loads((tmp_path / "r.json").read_text())
    assert red["threshold"] == pytest.approx(body["threshold"], abs=1e-5)
    assert red["config_hash"] != body["config_hash"]
    argv8 = ["threshold", "--p", 4, "--lambda", "1@2", "--rho", "1@3", "--reduce", "dimension"]
    assert run(*argv8) == 1


def test_config_hash_ignores_output_and_jobs():
    base = {**cli.DEFAULTS, "p": 2, "out": "a", "jobs": 1}
    assert cli.config_hash(base) == cli.config_hash({**base, "out": "b", "jobs": 8})
    assert cli.config_hash(base) != cli.config_hash({**base, "seed": 9})


def test_threshold_surface_rows(tmp_path):
    out = tmp_path / "s.csv"
    assert run("threshold-surface", "--p", 2, "--lambda", "1@2", "--rho", "1@3",
               "--resolution", 25, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "f1,f2,f3,threshold"
    assert len(lines) == 1 + 325
    for ln in lines[1:]:
        parts = ln.split(",")
        assert all(len(x.split(".")[1]) == 6 for x in parts)
        assert abs(sum(float(x) for x in parts[:3]) - 1) < 1e-5
    assert run("threshold-surface", "--p", 3, "--lambda", "1@2", "--rho", "1@3",
               "--resolution", 3) == 1


def test_inefficiency_outputs(tmp_path):
    out, mu = tmp_path / "i.json", tmp_path / "mu.csv"
    assert run("inefficiency", *SMALL, "--trials", 20, "--curve-points", 5, "--curve-trials", 20,
               "--mu-csv", mu, "--out", out) == 0
    body = json.loads(out.read_text())
    inef = body["inefficiency"]
    assert {"mu_mean", "std_error", "trials", "incomplete", "K_bin", "n_bits"} <= set(inef)
    assert inef["trials"] == 20 and inef["mu_mean"] >= 1.0
    assert "integral_check" in body
    rows = mu.read_text().splitlines()
    assert len(rows) == 21
