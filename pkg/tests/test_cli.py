from __future__ import annotations

import json

import pytest

from complexity_debate import cli
from complexity_debate.corpus import read_split

from helpers import config_text, make_run_dir


def run(*args):
    return cli.main(list(args))


@pytest.fixture
def rundir(tmp_cwd):
    return make_run_dir(tmp_cwd, per_class=6, test_per_class=2)


def _pipeline(extra=()):
    assert run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt") == 0
    assert run("assign", "--config", "run.toml", "--split", "out/split.json") == 0
    assert run("debate", "--config", "run.toml", "--panel", "out/panel.json", "--split", "out/split.json", *extra) == 0


def test_split_writes_balanced_plan(rundir, capsys):
    assert run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt") == 0
    plan, data = read_split("out/split.json")
    assert plan.per_class_expertise_count == 2
    assert data["corpus"] == "corpus.jsonl"
    out = capsys.readouterr().out
    assert "constant=2" in out and "exponential=2" in out
    first = (rundir / "out/split.json").read_bytes()
    assert run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt") == 0
    assert (rundir / "out/split.json").read_bytes() == first
    assert not (rundir / "out" / cli.LOCK_NAME).exists()


def test_split_unknown_test_id_is_data_error(rundir, capsys):
    (rundir / "test_ids.txt").write_text("nope\n")
    assert run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt") == 2
    assert "nope" in capsys.readouterr().err


def test_tampered_split_with_overlap_refused(rundir, capsys):
    run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt")
    data = json.loads((rundir / "out/split.json").read_text())
    data["test_ids"].append(data["expertise_ids"][0])
    (rundir / "out/split.json").write_text(json.dumps(data))
    assert run("assign", "--config", "run.toml", "--split", "out/split.json") == 2
    assert "overlap" in capsys.readouterr().err


def test_assign_missing_split_names_path(rundir, capsys):
    assert run("assign", "--config", "run.toml", "--split", "out/absent.json") == 2
    assert "out/absent.json" in capsys.readouterr().err


def test_single_backend_panel(tmp_cwd):
    make_run_dir(tmp_cwd, per_class=6, test_per_class=2, backends=["solo"])
    run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt")
    assert run("assign", "--config", "run.toml", "--split", "out/split.json") == 0
    panel = json.loads((tmp_cwd / "out/panel.json").read_text())
    assert set(panel["assignment"].values()) == {"solo"}


def test_debate_resume_and_no_preserve(rundir):
    _pipeline()
    lines = (rundir / "out/transcripts.jsonl").read_text().splitlines()
    assert len(lines) == 14
    ledger = json.loads((rundir / "out/ledger.json").read_text())
    assert ledger["total"]["calls"] + ledger["total"]["cache_hits"] > 0
    # truncate to simulate an interrupted run, then resume
    (rundir / "out/transcripts.jsonl").write_text("\n".join(lines[:5]) + "\n" + lines[5][:40])
    assert run("debate", "--config", "run.toml", "--panel", "out/panel.json", "--split", "out/split.json") == 0
    again = (rundir / "out/transcripts.jsonl").read_text().splitlines()
    assert again == lines
    assert run("debate", "--config", "run.toml", "--panel", "out/panel.json", "--split", "out/split.json",
               "--no-preserve") == 0
    for line in (rundir / "out/transcripts_change.jsonl").read_text().splitlines():
        record = json.loads(line)
        assert record["settings"]["preserve_policy"] is False
        assert all(e["event"] != "preserved-by-policy" for e in record["policy_events"])
    run_info = json.loads((rundir / "out/run.json").read_text())
    assert run_info["preserve_policy"] is False and run_info["config"]["seed"] == 7


def test_report_covers_both_policies(rundir, capsys):
    _pipeline()
    run("debate", "--config", "run.toml", "--panel", "out/panel.json", "--split", "out/split.json", "--no-preserve")
    capsys.readouterr()
    assert run("report", "--transcripts", "out/transcripts.jsonl", "out/transcripts_change.jsonl",
               "--corpus", "corpus.jsonl", "--ledger", "out/ledger.json") == 0
    text = capsys.readouterr().out
    for name in ("preserve/majority", "preserve/wecc-self", "preserve/wecc-logit", "change/wecc-logit"):
        assert name in text
    payload = json.loads((rundir / "out/report.json").read_text())
    assert payload["tokens"]["ledger"]["total"]
    assert (rundir / "out/report.txt").read_text() == text


def test_report_missing_gold_ids(rundir, capsys):
    _pipeline()
    (rundir / "small.jsonl").write_text((rundir / "corpus.jsonl").read_text().splitlines()[0] + "\n")
    assert run("report", "--transcripts", "out/transcripts.jsonl", "--corpus", "small.jsonl") == 2
    assert "no gold label" in capsys.readouterr().err


def test_locked_output_dir_refused(rundir, capsys):
    (rundir / "out").mkdir()
    (rundir / "out" / cli.LOCK_NAME).write_text("123\n")
    assert run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt") == 1
    assert "in use" in capsys.readouterr().err


def test_usage_errors_exit_one(rundir):
    with pytest.raises(SystemExit) as exc:
        run("split", "--config", "run.toml")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1


def test_transport_exhaustion_exit_three(tmp_cwd):
    make_run_dir(tmp_cwd, per_class=6, test_per_class=2)
    run("split", "--config", "run.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt")
    run("assign", "--config", "run.toml", "--split", "out/split.json")
    (tmp_cwd / "dead.toml").write_text(
        config_text(factory="scripted_fixtures:dead_responder").replace('cache_path = "cache.jsonl"', 'cache_path = ""'))
    code = run("debate", "--config", "dead.toml", "--panel", "out/panel.json", "--split", "out/split.json",
               "--out-dir", "dead")
    assert code == 3
    assert run("assign", "--config", "dead.toml", "--split", "out/split.json", "--out", "dead/panel.json") == 3


def test_bad_config_is_data_error(rundir, capsys):
    (rundir / "bad.toml").write_text("[run\n")
    assert run("split", "--config", "bad.toml", "--corpus", "corpus.jsonl", "--test-ids", "test_ids.txt") == 2
