import json
import math

import pytest

import tcplan


def test_generate_is_deterministic():
    a = tcplan.generate_corpus(1, 5)
    assert a == tcplan.generate_corpus(1, 5)
    assert a != tcplan.generate_corpus(2, 5)
    rec = json.loads(a[0])
    assert {"id", "user_profile", "knowledge", "conversation", "goals"} <= rec.keys()


def test_plan_round_trip():
    steps = [("movie recommendation", "McDull"), ("chit-chat", "NULL")]
    tokens = tcplan.serialize_plan(steps)
    assert tokens[0] == "[A]" and tokens[-1] == "[EOS]"
    assert tcplan.parse_plan(tokens) == steps
    with pytest.raises(tcplan.TcplanError):
        tcplan.parse_plan(["[A]", "rec"])


def test_metrics():
    assert tcplan.word_f1(["a", "b"], ["a", "c"]) == 0.5
    assert tcplan.bleu(["a", "b", "c"], ["a", "b", "d"], 2) == pytest.approx(math.sqrt(1 / 3))
    assert tcplan.dist([["a", "a", "b"]], 1) == pytest.approx(2 / 3)
    assert tcplan.target_success([], []) is None
    assert tcplan.target_success(["X!", "no"], ["X", "Y"]) == 0.5
    assert tcplan.knowledge_f1(["A B"], ["A"], [[("A", "r", "B")]]) == pytest.approx(2 / 3)


def test_train_plan_evaluate(tmp_path):
    paths = tcplan.write_synthetic(str(tmp_path), 1, 30)
    ckpt = str(tmp_path / "p.ckpt")
    summary = tcplan.train(
        paths["corpus"], paths["splits"], 1, ckpt,
        planner={"d": 16, "d_ff": 32, "n_layers": 1, "max_plan_len": 48},
        train={"max_steps": 6, "warmup_steps": 2},
        log=str(tmp_path / "log.jsonl"),
    )
    assert summary["steps"] == 6
    assert len((tmp_path / "log.jsonl").read_text().splitlines()) == 6

    planner = tcplan.Planner.load(ckpt)
    assert json.loads(planner.config_json)["d"] == 16
    assert planner.parameter_count > 0
    record = tcplan.generate_corpus(1, 1)[0]
    out = planner.plan(record, 1)
    assert len(out["decoded"]) <= 48
    assert len(out["prompt"]) == 2
    logits = planner.logits(record, 1)
    assert logits.shape[1] == len(planner.vocab)

    report = tcplan.evaluate(ckpt, paths["corpus"], paths["splits"], "dev", paths["templates"])
    assert report["report_version"] == 1
    assert 0.0 <= report["acc_action"] <= report["bi_acc_action"] <= 1.0
    assert report["ppl"] >= 1.0

    with pytest.raises(tcplan.TcplanError):
        tcplan.Planner.load(str(tmp_path / "missing.ckpt"))
