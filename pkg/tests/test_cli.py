"""Command-line interface: exit codes, output formats, remote dispatch."""

from __future__ import annotations

import json
import os

import pytest

from coactionrec.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParsing:
    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "coactionrec" in capsys.readouterr().out

    def test_no_command_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys)
        assert code == 1

    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "gen-synth", "--bogus")
        assert code == 1
        assert "error:" in err

    def test_unknown_command_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "frobnicate")
        assert code == 1

    def test_bad_value_is_usage_error(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "gen-synth", "--out", str(tmp_path),
                               "--users", "0")
        assert code == 1
        assert "error:" in err


class TestMissingInputs:
    def test_missing_data_dir_exits_two(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "train",
                               "--data", str(tmp_path / "nope"),
                               "--out", str(tmp_path / "model"))
        assert code == 2
        assert "missing input file" in err

    def test_missing_model_dir_exits_two(self, capsys, smoke_dir, tmp_path):
        code, _, err = run_cli(capsys, "recommend",
                               "--model", str(tmp_path / "ghost"),
                               "--data", smoke_dir, "--user", "u0000")
        assert code == 2


class TestPipeline:
    def test_gen_synth_prints_paths_and_counts(self, capsys, tmp_path):
        out = str(tmp_path / "corpus")
        code, stdout, _ = run_cli(capsys, "gen-synth", "--out", out,
                                  "--users", "5", "--items", "12",
                                  "--categories", "3", "--sellers", "2",
                                  "--min-len", "4", "--max-len", "6",
                                  "--seed", "3")
        assert code == 0
        lines = stdout.splitlines()
        assert lines[0].endswith("interactions.tsv")
        assert lines[1].endswith("item_features.tsv")
        assert "users=5 items=12" in lines[2]

    def test_train_recommend_eval_round_trip(self, capsys, smoke_dir,
                                             smoke_config_path, tmp_path):
        model = str(tmp_path / "model")
        code, stdout, _ = run_cli(capsys, "train", "--data", smoke_dir,
                                  "--out", model,
                                  "--config", smoke_config_path,
                                  "--epochs", "1")
        assert code == 0
        assert "fingerprint: " in stdout
        assert "loss: first=" in stdout

        code, stdout, _ = run_cli(capsys, "recommend", "--model", model,
                                  "--data", smoke_dir, "--user", "u0002",
                                  "--top-n", "5")
        assert code == 0
        rows = [line.split("\t") for line in stdout.splitlines()]
        assert len(rows) == 5
        assert [r[0] for r in rows] == ["u0002"] * 5
        assert [int(r[1]) for r in rows] == [1, 2, 3, 4, 5]
        for row in rows:
            float(row[3])  # score column parses

        code, stdout, _ = run_cli(capsys, "eval", "--model", model,
                                  "--data", smoke_dir, "--k", "5,10")
        assert code == 0
        assert "recall@5" in stdout
        assert "users evaluated:" in stdout

    def test_build_index_then_recommend_through_it(self, capsys, smoke_dir,
                                                   smoke_config_path,
                                                   model_dir, tmp_path):
        index = str(tmp_path / "index.json")
        code, stdout, _ = run_cli(capsys, "build-index", "--model", model_dir,
                                  "--data", smoke_dir, "--out", index,
                                  "--backend", "exact")
        assert code == 0
        assert "backend=exact" in stdout
        assert os.path.exists(index)

        code, with_index, _ = run_cli(capsys, "recommend", "--model",
                                      model_dir, "--data", smoke_dir,
                                      "--user", "u0003", "--index", index)
        assert code == 0
        code, direct, _ = run_cli(capsys, "recommend", "--model", model_dir,
                                  "--data", smoke_dir, "--user", "u0003")
        assert code == 0
        assert with_index == direct

    def test_eval_writes_report_file(self, capsys, smoke_dir, model_dir,
                                     tmp_path):
        report = str(tmp_path / "report.txt")
        code, _, _ = run_cli(capsys, "eval", "--model", model_dir,
                             "--data", smoke_dir, "--k", "5",
                             "--out", report)
        assert code == 0
        with open(report, encoding="utf-8") as fh:
            text = fh.read()
        assert "recall@5=" in text

    def test_grad_check_prints_per_tensor_lines(self, capsys):
        code, stdout, _ = run_cli(capsys, "grad-check", "--seed", "0")
        assert code == 0
        lines = stdout.splitlines()
        assert lines[-1] == "PASS"
        assert "max_rel_err=" in lines[-2]
        assert len(lines) > 10


class TestServerDispatch:
    class FakeResponse:
        def __init__(self, status_code, payload):
            self.status_code = status_code
            self._payload = payload
            self.text = json.dumps(payload)

        def json(self):
            return self._payload

    def test_posts_request_and_prints_response(self, capsys, monkeypatch,
                                               tmp_path):
        import httpx
        seen = {}

        def fake_post(url, json=None, timeout=None):
            seen["url"] = url
            seen["json"] = json
            payload = {"interactions_path": "i.tsv",
                       "features_path": "f.tsv",
                       "n_users": 5, "n_items": 12, "n_records": 40}
            return TestServerDispatch.FakeResponse(200, payload)

        monkeypatch.setattr(httpx, "post", fake_post)
        code, stdout, _ = run_cli(capsys, "gen-synth",
                                  "--server", "http://localhost:9999/",
                                  "--out", str(tmp_path), "--users", "5",
                                  "--items", "12")
        assert code == 0
        assert seen["url"] == "http://localhost:9999/gen-synth"
        assert seen["json"]["users"] == 5
        assert "users=5 items=12 records=40" in stdout

    def test_service_400_maps_to_usage_exit(self, capsys, monkeypatch,
                                            tmp_path):
        import httpx
        monkeypatch.setattr(
            httpx, "post",
            lambda url, json=None, timeout=None: TestServerDispatch
            .FakeResponse(400, {"detail": "bad things"}))
        code, _, err = run_cli(capsys, "gen-synth", "--server", "http://x",
                               "--out", str(tmp_path))
        assert code == 1
        assert "bad things" in err

    def test_service_500_maps_to_runtime_exit(self, capsys, monkeypatch,
                                              tmp_path):
        import httpx
        monkeypatch.setattr(
            httpx, "post",
            lambda url, json=None, timeout=None: TestServerDispatch
            .FakeResponse(500, {"detail": "boom"}))
        code, _, err = run_cli(capsys, "gen-synth", "--server", "http://x",
                               "--out", str(tmp_path))
        assert code == 2
        assert "boom" in err

    def test_connection_failure_maps_to_runtime_exit(self, capsys,
                                                     monkeypatch, tmp_path):
        import httpx

        def raise_connect(url, json=None, timeout=None):
            raise httpx.ConnectError("no route to host")

        monkeypatch.setattr(httpx, "post", raise_connect)
        code, _, err = run_cli(capsys, "gen-synth", "--server", "http://x",
                               "--out", str(tmp_path))
        assert code == 2
        assert "error:" in err
