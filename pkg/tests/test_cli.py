import json

import pytest

from algdiv.cli import DEFAULTS, ConfigError, ExperimentConfig, load_config, main, run_command


def run(tmp_path, *argv):
    code = run_command([*argv, "--out", str(tmp_path)])
    return code


def result(tmp_path, stem):
    return json.loads((tmp_path / f"{stem}.json").read_text())


class TestExamples:
    def test_diagnose_white(self, tmp_path):
        assert run(tmp_path, "diagnose", "--model", "white", "--M", "8") == 0
        r = result(tmp_path, "diagnose")["result"]
        assert r["alpha"] == pytest.approx(0.0, abs=1e-12)
        assert r["kappa"] == pytest.approx(9.0)

    def test_seqgevp_k4(self, tmp_path):
        assert run(tmp_path, "seqgevp", "--graph", "k4.edges") == 0
        r = result(tmp_path, "seqgevp")["result"]
        assert r["final_group_order"] == 24
        assert all(it["residual"] <= 1e-10 for it in r["iterations"] if it["accepted"])

    def test_seqgevp_edge_file(self, tmp_path):
        f = tmp_path / "c6.edges"
        f.write_text("".join(f"{k} {(k + 1) % 6}\n" for k in range(6)))
        assert run(tmp_path, "seqgevp", "--graph", str(f)) == 0
        r = result(tmp_path, "seqgevp")["result"]
        assert r["final_group_order"] == 6 and r["termination"] == "rejection"

    def test_equalize_small(self, tmp_path):
        assert run(tmp_path, "equalize", "--cost", "cma", "--const", "qpsk", "--trials", "50",
                   "--n-symbols", "4000", "--step", "1e-3") == 0
        r = result(tmp_path, "equalize")["result"]
        assert r["predicted_deg"] == pytest.approx(25.98, abs=0.01)
        assert 10 < r["std_deg"] < 40

    @pytest.mark.slow
    def test_equalize_full(self, tmp_path):
        assert run(tmp_path, "equalize", "--cost", "cma", "--const", "qpsk", "--trials", "200") == 0
        r = result(tmp_path, "equalize")["result"]
        assert 22 <= r["std_deg"] <= 30

    def test_estimate_fast(self, tmp_path):
        assert run(tmp_path, "estimate", "--model", "tones", "--freqs", "2", "--M", "8", "--L", "3", "--fast") == 0
        r = result(tmp_path, "estimate")["result"]
        assert r["fast_path"] and r["rel_frobenius_error"] < 1e-11

    def test_mc_pi(self, tmp_path):
        assert run(tmp_path, "mc-pi", "--trials", "5") == 0
        assert result(tmp_path, "mc-pi")["result"]["mse_ratio"] > 50

    def test_experiment(self, tmp_path):
        assert run(tmp_path, "experiment", "level2") == 0
        assert result(tmp_path, "experiment-level2")["result"]["passed"]


class TestConfig:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.cfg"
        p.write_text("")
        cfg = load_config(str(p))
        assert cfg.seed == 0
        assert cfg.params == {k: v for k, v in DEFAULTS.items() if k not in ("seed", "out")}

    def test_key_value_and_json(self, tmp_path):
        a, b = tmp_path / "a.cfg", tmp_path / "b.json"
        a.write_text("# comment\nseed = 7\nfreqs = [1, 3]\ncirculant = true\n")
        b.write_text('{"seed": 7, "freqs": [1, 3], "circulant": true}')
        assert load_config(str(a)).to_dict() == load_config(str(b)).to_dict()

    def test_tau_reaches_trace(self, tmp_path):
        p = tmp_path / "t.cfg"
        p.write_text("tau = 0.05\n")
        assert run(tmp_path, "seqgevp", "--graph", "K4", "--config", str(p)) == 0
        assert result(tmp_path, "seqgevp")["result"]["tau"] == 0.05

    def test_flag_overrides_file(self, tmp_path):
        p = tmp_path / "t.cfg"
        p.write_text("M = 4\nseed = 3\n")
        assert run(tmp_path, "diagnose", "--config", str(p), "--M", "6") == 0
        doc = result(tmp_path, "diagnose")
        assert doc["result"]["M"] == 6 and doc["seed"] == 3

    def test_malformed_line_number(self, tmp_path, capsys):
        p = tmp_path / "bad.txt"
        p.write_text("seed = 1\nthis line is broken\n")
        with pytest.raises(ConfigError, match="bad.txt:2:"):
            load_config(str(p))
        assert run(tmp_path, "diagnose", "--config", str(p)) == 2
        assert "bad.txt:2:" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "u.cfg"
        p.write_text("colour = red\n")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(str(p))

    def test_config_record(self):
        cfg = ExperimentConfig("diagnose", 4, {"b": 1, "a": 2}, "out")
        assert list(cfg.to_dict()["params"]) == ["a", "b"]


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_bad_value(self, tmp_path):
        assert run(tmp_path, "diagnose", "--M", "0") == 2

    def test_unknown_group(self, tmp_path):
        assert run(tmp_path, "estimate", "--group", "Q8x", "--M", "8") == 2

    @pytest.mark.parametrize("argv", [["--trials", "20"], ["--n-taps", "4"], ["--cost", "lms"]])
    def test_equalizer_config_errors(self, tmp_path, argv):
        assert run(tmp_path, "equalize", *argv) == 2

    def test_numerical_failure(self, tmp_path):
        assert run(tmp_path, "equalize", "--step", "10", "--trials", "50", "--n-symbols", "500") == 3


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ["diagnose", "--model", "ar", "--coeffs", "0.5"],
        ["match", "--model", "tones", "--freqs", "3", "--L", "20", "--snr-db", "20"],
        ["mc-pi", "--trials", "3"],
    ])
    def test_byte_identical(self, tmp_path, argv):
        stem = argv[0]
        assert run(tmp_path, *argv) == 0
        first = [(tmp_path / f"{stem}.{ext}").read_bytes() for ext in ("json", "csv")]
        assert run(tmp_path, *argv) == 0
        assert first == [(tmp_path / f"{stem}.{ext}").read_bytes() for ext in ("json", "csv")]

    def test_csv_embeds_config(self, tmp_path):
        assert run(tmp_path, "diagnose", "--seed", "11") == 0
        head = (tmp_path / "diagnose.csv").read_text().splitlines()[0]
        assert head.startswith("# config:") and json.loads(head[len("# config:"):])["seed"] == 11
