from __future__ import annotations

import json

import pytest

from complexity_debate.config import ConfigError, load_config, parse_config
from complexity_debate.consensus import wecc_decide
from complexity_debate.debate import DebateTranscript
from complexity_debate.prompts import Verdict
from complexity_debate.report import ReportError, build_report, generated_tokens, recompute
from complexity_debate.taxonomy import CLASSES, ComplexityClass as C

from helpers import config_text


def test_config_defaults_and_paths(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(config_text())
    cfg = load_config(path)
    assert (cfg.alpha, cfg.beta, cfg.conf_source, cfg.rounds) == (2.0, 1.0, "logit", 1)
    assert cfg.preserve_policy and cfg.permission_sentence
    assert cfg.out == tmp_path / "out"
    assert cfg.to_json()["output_dir"] == "out"
    assert "base_dir" not in cfg.to_json()
    backends = cfg.build_backends()
    assert sorted(backends) == [f"b{i}" for i in range(7)]


@pytest.mark.parametrize("extra, message", [
    ("[consensus]\nalpha = 1.0\nbeta = 1.0\n", "alpha"),
    ("[debate]\nrounds = 0\n", "rounds"),
    ("[consensus]\nconf_source = \"vibes\"\n", "conf_source"),
    ("[debate]\nbogus = 1\n", "unknown key"),
    ("[extras]\nx = 1\n", "unknown section"),
])
def test_config_validation(tmp_path, extra, message):
    path = tmp_path / "run.toml"
    path.write_text(config_text(extra=extra))
    with pytest.raises(ConfigError, match=message):
        load_config(path)


def test_config_backend_validation():
    with pytest.raises(ConfigError, match="at least one"):
        parse_config({})
    with pytest.raises(ConfigError, match="base_url"):
        parse_config({"backends": [{"name": "x", "kind": "http"}]})
    with pytest.raises(ConfigError, match="unique"):
        parse_config({"backends": [{"name": "x", "kind": "scripted", "rules": "r"}] * 2})
    with pytest.raises(ConfigError, match="not found"):
        load_config("/no/such/file.toml")


def test_config_fraction_bounds():
    with pytest.raises(ConfigError, match="fraction"):
        parse_config({"run": {"fraction": 1.0}, "backends": [{"name": "x", "kind": "scripted", "rules": "r"}]})


def V(role, predicted, logit, self_conf=None):
    return Verdict(backend=f"m-{role.token}", expert_class=role, predicted=predicted, opinion="o",
                   logit_conf=logit, self_conf=self_conf, prompt_tokens=10, completion_tokens=5, raw="r")


def _transcript(sid, updated, preserve=True):
    return DebateTranscript(
        snippet_id=sid, panel_digest="d", initial=list(updated), updated=list(updated), policy_events=[],
        consensus=wecc_decide(updated), settings={"alpha": 2.0, "beta": 1.0, "conf_source": "logit",
                                                  "preserve_policy": preserve},
    )


def _minority_case():
    # four low-confidence non-experts vote linear; the cubic expert is sure it is cubic
    return [V(C.CONSTANT, C.LINEAR, 0.2, 0.9), V(C.LOGN, C.LINEAR, 0.2, 0.9), V(C.NLOGN, C.LINEAR, 0.2, 0.9),
            V(C.QUADRATIC, C.LINEAR, 0.2, 0.9), V(C.CUBIC, C.CUBIC, 1.0, 0.5),
            V(C.LINEAR, None, None), V(C.EXPONENTIAL, None, None)]


def test_wecc_logit_beats_majority_on_minority_expert():
    t = _transcript("s1", _minority_case())
    assert recompute(t, "majority").final is C.LINEAR
    assert recompute(t, "wecc-logit").final is C.CUBIC
    assert recompute(t, "wecc-self").final is C.LINEAR
    payload, text = build_report([t], {"s1": C.CUBIC})
    rows = payload["variants"]
    cubic = lambda name: next(r["f1"] for r in rows[name]["per_class"] if r["class"] == "cubic")
    assert cubic("preserve/wecc-logit") > cubic("preserve/majority")
    assert "preserve/wecc-logit" in text


def test_agreeing_variants_give_identical_rows():
    ts = [_transcript(f"s{c.rank}", [V(r, c, 0.9, 0.9) for r in CLASSES]) for c in CLASSES]
    payload, _ = build_report(ts, {t.snippet_id: c for t, c in zip(ts, CLASSES)})
    rows = [{k: v for k, v in r.items() if k != "snippets"} for r in payload["variants"].values()]
    assert all(r == rows[0] for r in rows)


def test_preserve_and_change_groups():
    on = _transcript("a", _minority_case(), preserve=True)
    off = _transcript("a", _minority_case(), preserve=False)
    payload, _ = build_report([on, off], {"a": C.CUBIC})
    assert sorted(payload["variants"]) == sorted(
        f"{g}/{v}" for g in ("change", "preserve") for v in ("majority", "wecc-self", "wecc-logit"))


def test_report_errors():
    with pytest.raises(ReportError, match="no transcripts"):
        build_report([], {})
    with pytest.raises(ReportError, match="missing-id"):
        build_report([_transcript("missing-id", _minority_case())], {"other": C.LINEAR})


def test_generated_tokens_skip_copies():
    t = _transcript("a", _minority_case())
    tok = generated_tokens([t])
    assert tok["calls"] == 14
    assert tok["prompt_tokens"] == 140 and tok["completion_tokens"] == 70
    # and the payload survives JSON
    assert json.loads(json.dumps(build_report([t], {"a": C.CUBIC})[0]))
