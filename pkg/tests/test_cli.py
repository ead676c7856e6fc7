import json

import pytest

from llmcf.cli import dispatch
from llmcf.datasets import heart_schema_text
from llmcf.llm import API_KEY_ENV


@pytest.fixture(scope="module")
def work(tmp_path_factory, heart):
    from llmcf.schema import write_csv
    d = tmp_path_factory.mktemp("cli")
    write_csv(heart.subset(range(0, len(heart), 4)), d / "heart.csv")
    (d / "heart.schema").write_text(heart_schema_text())
    assert dispatch(["train", "--data", str(d / "heart.csv"), "--schema", str(d / "heart.schema"),
                     "--kind", "rf", "--out", str(d / "rf.model"), "-q"]) == 0
    return d


def _args(work, *extra):
    return ["--data", str(work / "heart.csv"), "--schema", str(work / "heart.schema"), *extra]


def test_ingest(work, capsys):
    assert dispatch(["ingest", *_args(work)]) == 0
    out = capsys.readouterr().out
    assert "rows=230" in out and "features=9" in out


def test_gen_nice_one_line_per_training_instance(work):
    out = work / "cf.jsonl"
    code = dispatch(["gen", "--method", "nice", "--model", str(work / "rf.model"),
                     *_args(work), "--out", str(out), "-q"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 184  # 230 rows minus a 46-row test split
    assert {json.loads(l)["method"] for l in lines} == {"nice"}


def test_gen_mock_is_byte_identical(work):
    outs = []
    for name in ("a.jsonl", "b.jsonl"):
        out = work / name
        assert dispatch(["gen", "--method", "llm-few", "--shots", "3", "--transport", "mock",
                         "--seed", "7", "--model", str(work / "rf.model"), *_args(work),
                         "--out", str(out), "--max-instances", "40", "-q"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and outs[0].count(b"\n") == 40


def test_eval_and_report(work, capsys):
    cfs = work / "cf_eval.jsonl"
    assert dispatch(["gen", "--method", "cfnow", "--model", str(work / "rf.model"), *_args(work),
                     "--out", str(cfs), "--max-instances", "20", "-q"]) == 0
    rep = work / "rep.json"
    assert dispatch(["eval", "--cfs", str(cfs), "--model", str(work / "rf.model"), *_args(work),
                     "--out", str(rep), "-q"]) == 0
    assert json.loads(rep.read_text())["validity"] == 1.0
    capsys.readouterr()
    assert dispatch(["report", str(rep), "--format", "csv", "-q"]) == 0
    assert capsys.readouterr().out.startswith("method,n_pairs")


def test_eval_empty_batch_exit_2(work, capsys):
    empty = work / "empty.jsonl"
    empty.write_text("")
    assert dispatch(["eval", "--cfs", str(empty), *_args(work), "-q"]) == 2
    assert "EmptyBatch" in capsys.readouterr().err


def test_usage_errors(work):
    assert dispatch([]) == 1
    assert dispatch(["frobnicate"]) == 1
    assert dispatch(["gen", "--method", "llm-zero", "--model", str(work / "rf.model"),
                     *_args(work), "--out", str(work / "z.jsonl")]) == 1
    assert dispatch(["train", *_args(work), "--kind", "rf"]) == 1
    assert dispatch(["ingest"]) == 1
    assert dispatch(["gen", "--method", "wachter"]) == 1


def test_data_errors(work):
    assert dispatch(["ingest", "--data", str(work / "missing.csv")]) == 2
    assert dispatch(["train", *_args(work), "--kind", "knn", "--out", str(work / "k.model")]) == 2
    # refusing to overwrite without --force
    assert dispatch(["train", *_args(work), "--out", str(work / "rf.model"), "-q"]) == 2
    assert dispatch(["train", *_args(work), "--out", str(work / "rf.model"), "--force", "-q"]) == 0


def test_live_transport_without_key(work, monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    assert dispatch(["gen", "--method", "llm-zero", "--transport", "live",
                     "--model", str(work / "rf.model"), *_args(work),
                     "--out", str(work / "live.jsonl"), "-q"]) == 2


def test_runtime_error_exit_3(work, monkeypatch):
    from llmcf import cli, errors

    def boom(cfg):
        raise errors.NoFlip("nothing flips")

    monkeypatch.setitem(cli.COMMANDS, "ingest", boom)
    assert dispatch(["ingest", *_args(work)]) == 3


def test_config_file_overrides_flags(work, capsys):
    cfg = work / "run.yaml"
    cfg.write_text("kind: xgb\nseed: 3\nhyperparams: {n_rounds: 5}\n")
    assert dispatch(["train", *_args(work), "--kind", "rf", "--config", str(cfg),
                     "--out", str(work / "x.model")]) == 0
    assert "kind=boosted-trees" in capsys.readouterr().out
    bad = work / "bad.yaml"
    bad.write_text("api_key: secret\n")
    assert dispatch(["ingest", *_args(work), "--config", str(bad)]) == 2


def test_augment_writes_tables(work, capsys):
    md, csv_path = work / "grid.md", work / "grid.csv"
    assert dispatch(["augment", *_args(work), "--models", "rf", "--methods", "nice,none",
                     "--max-instances", "30", "--out", str(md), "--csv", str(csv_path), "-q"]) == 0
    assert "| RF | NICE |" in md.read_text()
    assert csv_path.read_text().splitlines()[0].startswith("model,method")
