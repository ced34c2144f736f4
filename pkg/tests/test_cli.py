import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from sspc.cli import run

FIXTURE = Path(__file__).parent / "fixtures" / "pan20"


def test_stats_on_fixture_prints_summary(capsys):
    assert run(["stats", "--data", str(FIXTURE)]) == 0
    out = capsys.readouterr().out
    assert "Problems" in out and "20" in out
    assert "Avg words/sent." in out


def test_stats_json_format(capsys):
    assert run(["--format", "json", "stats", "--data", str(FIXTURE)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_problems"] == 20
    assert payload["n_sentences"] == 70


def test_unknown_flag_is_usage_error(capsys):
    assert run(["stats", "--data", str(FIXTURE), "--definitely-not-a-flag"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_unknown_subcommand_is_usage_error():
    assert run(["frobnicate"]) == 1


def test_missing_data_directory_is_data_error(capsys):
    assert run(["stats", "--data", "/nonexistent/path"]) == 2
    assert "data error" in capsys.readouterr().err


def test_mismatched_truth_file_is_data_error(tmp_path, capsys):
    (tmp_path / "problem-1.txt").write_text("a\nb\nc\n", encoding="utf-8")
    (tmp_path / "truth-problem-1.json").write_text('{"changes": [1]}', encoding="utf-8")
    assert run(["stats", "--data", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "problem-1" in err and "mismatch" in err


def test_gen_synthetic_writes_loadable_dataset(tmp_path, capsys):
    out = tmp_path / "corpus"
    assert run([
        "gen-synthetic", "--out", str(out), "--n-problems", "12", "--seed", "3",
    ]) == 0
    assert (out / "problem-1.txt").exists()
    assert (out / "truth-problem-12.json").exists()
    manifest = json.loads((out / "run-manifest.json").read_text())
    assert manifest["command"] == "gen-synthetic"
    assert manifest["effective_config"]["n_problems"] == 12
    assert run(["stats", "--data", str(out)]) == 0


def test_gen_synthetic_duplicate_rate_flows_to_stats(tmp_path, capsys):
    out = tmp_path / "dup"
    assert run([
        "gen-synthetic", "--out", str(out), "--n-problems", "100",
        "--duplicate-rate", "0.1", "--doc-sentences", "9,12", "--seed", "5",
    ]) == 0
    capsys.readouterr()
    assert run(["--format", "json", "stats", "--data", str(out)]) == 0
    stats = json.loads(capsys.readouterr().out)
    duplicated = sum(count for _, count in stats["duplicate_table"])
    assert 0.06 <= duplicated / stats["n_sentences"] <= 0.15


def test_convert_2024_paragraph_json(tmp_path, capsys):
    src = tmp_path / "paragraphs.json"
    src.write_text(json.dumps([
        {"id": "problem-1", "paragraphs": [["a", "b"], ["c"]]},
        {"id": "problem-2", "paragraphs": [["x"]]},
    ]), encoding="utf-8")
    out = tmp_path / "converted"
    assert run(["convert-2024", "--input", str(src), "--out", str(out)]) == 0
    truth = json.loads((out / "truth-problem-1.json").read_text())
    assert truth == {"changes": [0, 1]}
    assert (out / "problem-2.txt").read_text() == "x\n"


def test_baseline_subcommand_reports_all_kinds(tmp_path, capsys):
    out = tmp_path / "b"
    assert run(["baseline", "--kind", "all", "--data", str(FIXTURE),
                "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "PREDICT1" in table and "PREDICT0" in table and "RANDOM" in table
    payload = json.loads((out / "baselines.json").read_text())
    # fixture truths: 30 ones / 20 zeros over 50 boundaries
    assert payload["predict1"]["confusion"]["tp"] == 30
    assert payload["predict0"]["confusion"]["tn"] == 20


def _train_tiny(tmp_path, steps="12"):
    out = tmp_path / "run"
    code = run([
        "train", "--data", str(FIXTURE), "--out", str(out), "--seed", "1",
        "--features", "ngram", "--feature-dim", "32",
        "--hidden-dim", "8", "--bilstm-layers", "2",
        "--total-steps", steps, "--warmup-steps", "2",
        "--val-every", "6", "--batch-size", "4",
    ])
    return code, out


def test_train_predict_evaluate_round_trip(tmp_path, capsys):
    code, out = _train_tiny(tmp_path)
    assert code == 0
    assert (out / "checkpoints" / "final.ckpt").exists()
    assert (out / "history.jsonl").exists()
    assert (out / "run-manifest.json").exists()
    summary = json.loads((out / "train-summary.json").read_text())
    assert summary["final_val_macro_f1"] is not None
    capsys.readouterr()

    ckpt = str(out / "checkpoints" / "final.ckpt")
    solutions = tmp_path / "solutions"
    assert run([
        "predict", "--data", str(FIXTURE), "--checkpoint", ckpt,
        "--out", str(solutions), "--features", "ngram", "--feature-dim", "32",
    ]) == 0
    assert (solutions / "solution-problem-1.json").exists()
    capsys.readouterr()

    # scoring written solutions must equal scoring the checkpoint in-process
    assert run([
        "--format", "json", "evaluate", "--data", str(FIXTURE),
        "--solutions", str(solutions),
    ]) == 0
    from_files = json.loads(capsys.readouterr().out)
    assert run([
        "--format", "json", "evaluate", "--data", str(FIXTURE),
        "--checkpoint", ckpt, "--features", "ngram", "--feature-dim", "32",
    ]) == 0
    in_process = json.loads(capsys.readouterr().out)
    assert from_files["macro_f1"] == in_process["macro_f1"]
    assert from_files["per_problem"] == in_process["per_problem"]


def test_evaluate_needs_exactly_one_source(capsys):
    assert run(["evaluate", "--data", str(FIXTURE)]) == 1
    assert run(["evaluate", "--data", str(FIXTURE), "--checkpoint", "x",
                "--solutions", "y"]) == 1


def test_evaluate_missing_solutions_is_data_error(tmp_path, capsys):
    solutions = tmp_path / "partial"
    solutions.mkdir()
    (solutions / "solution-problem-1.json").write_text('{"changes": [0, 1]}')
    assert run(["evaluate", "--data", str(FIXTURE), "--solutions", str(solutions)]) == 2
    assert "missing" in capsys.readouterr().err


class _MockChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        n = body["messages"][0]["content"].count("\n1 if the style")  # unused, stay generic
        payload = {"choices": [{"message": {"content": "[1, 0]"}}]}
        data = json.dumps(payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # keep test output clean
        pass


@pytest.fixture()
def mock_chat_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _MockChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    server.shutdown()


def test_llm_baseline_cli_against_local_mock(tmp_path, capsys, mock_chat_server):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    for k in (1, 2):
        (data_dir / f"problem-{k}.txt").write_text("a\nb\nc\n", encoding="utf-8")
        (data_dir / f"truth-problem-{k}.json").write_text('{"changes": [1, 0]}')
    config = tmp_path / "llm.toml"
    config.write_text(
        "[llm]\n"
        f'endpoint = "{mock_chat_server}"\n'
        'model = "mock-model"\n'
        f'cache_dir = "{tmp_path / "cache"}"\n'
        "requests_per_minute = 10000.0\n"
    )
    assert run(["--format", "json", "llm-baseline", "--data", str(data_dir),
                "--config", str(config)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["report"]["macro_f1"] == 1.0
    assert payload["parse_failures"] == 0
    assert payload["requests"] == 2

    # warm cache: second run makes zero requests and reports identically
    assert run(["--format", "json", "llm-baseline", "--data", str(data_dir),
                "--config", str(config)]) == 0
    second = json.loads(capsys.readouterr().out)
    assert second["requests"] == 0
    assert second["report"] == payload["report"]
