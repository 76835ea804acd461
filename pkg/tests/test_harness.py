import filecmp
import json
import os

import numpy as np
import pytest

from nopnet import corpus
from nopnet.classifier import ClassifierModel, train_classifier
from nopnet.cli import main
from nopnet.config import AgentConfig, default_config, load_config, validate
from nopnet.env import EvasionEnv
from nopnet.errors import ConfigError
from nopnet.harness import (FamilyReport, evaluate_families, family_report,
                            load_family_reports, summarize, write_family_outputs)
from nopnet.agent import train_agent

TINY_CONFIG = {
    "seed": 13,
    "corpus": {
        "families": 2,
        "samples_per_family": 20,
        "background_vocab": 30,
        "family_specs": [
            {"length_range": [40, 70]},
            {"length_range": [40, 70]},
        ],
    },
    "splits": {"train": 0.5, "val": 0.25, "test": 0.25},
    "classifier": {"epochs": 3, "n_classes": 2},
    "agent": {"episodes": 8, "maxturn": 8, "warmup": 16, "batch_size": 8,
              "rl_pool": "val"},
}


def write_tiny_config(path):
    with open(path, "w") as fh:
        json.dump(TINY_CONFIG, fh)
    return str(path)


# -------------------------------------------------------------------- config

def test_default_config_matches_published_table():
    cfg = default_config()
    assert cfg.agent.maxturn == 50
    assert cfg.agent.episodes == 1000
    assert cfg.agent.buffer_capacity == 2000
    assert cfg.agent.gamma == 0.99997
    assert cfg.agent.epsilon_initial == 1.0
    assert cfg.agent.epsilon_final == 0.5
    assert cfg.agent.n_filters == 10
    assert cfg.splits.ratios == (0.70, 0.15, 0.15)
    assert cfg.classifier.epochs == 15


def test_load_config_json(tmp_path):
    path = write_tiny_config(tmp_path / "cfg.json")
    cfg = validate(load_config(path))
    assert cfg.corpus.families == 2
    assert cfg.classifier.epochs == 3
    assert cfg.agent.episodes == 8
    assert cfg.agent.gamma == 0.99997  # untouched default


def test_load_config_toml(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('seed = 4\n[agent]\nepisodes = 12\nhead = "linear"\n')
    cfg = validate(load_config(str(path)))
    assert cfg.seed == 4 and cfg.corpus.seed == 4
    assert cfg.agent.episodes == 12
    assert cfg.agent.head == "linear"


def test_unknown_config_field_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"agent": {"episodez": 3}}')
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_bad_ratios_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"splits": {"train": 0.5, "val": 0.2, "test": 0.2}}')
    with pytest.raises(ConfigError):
        validate(load_config(str(path)))


# ------------------------------------------------------------ report algebra

def trace(reason, n_actions, rewards):
    from nopnet.env import EpisodeTrace
    return EpisodeTrace("s", 0, list(range(n_actions)), rewards, reason,
                        sum(rewards))


def test_failed_episodes_count_maxturn_insertions():
    samples = [None] * 2
    rnd = [trace("maxturn", 7, [0.0] * 7), trace("maxturn", 7, [0.0] * 7)]
    dqn = [trace("maxturn", 7, [0.0] * 7), trace("maxturn", 7, [0.0] * 7)]
    r = family_report(0, samples, rnd, dqn, maxturn=50)
    assert r.avg_insertions_random == 50.0
    assert r.avg_insertions_dqn == 50.0
    assert r.accuracy_random == 100.0 and r.accuracy_dqn == 100.0


def test_trivial_evasions_separated():
    samples = [None] * 3
    rnd = [trace("trivial", 0, []), trace("evaded", 3, [0.5, 0.5, 1.0]),
           trace("maxturn", 6, [0.0] * 6)]
    dqn = [trace("trivial", 0, []), trace("evaded", 2, [1.1, 0.7]),
           trace("evaded", 4, [0.2] * 4)]
    r = family_report(0, samples, rnd, dqn, maxturn=50)
    assert r.trivial_evasions == 1
    assert r.accuracy_no_agent == pytest.approx(100.0 * 2 / 3)
    assert r.avg_insertions_dqn == pytest.approx((0 + 2 + 4) / 3)
    assert r.avg_insertions_random == pytest.approx((0 + 3 + 50) / 3)
    assert r.avg_return_dqn == pytest.approx((0.0 + 1.8 + 0.8) / 3)


def test_summary_weightings_and_reduction():
    reports = [
        FamilyReport(0, 10, 100.0, 50.0, 0.0, 40.0, 4.0, 0.5, 1.5, 0),
        FamilyReport(1, 30, 100.0, 80.0, 40.0, 44.0, 10.0, 0.2, 0.9, 0),
    ]
    s = summarize(reports)
    assert s["accuracy_dqn"]["per_family"] == pytest.approx(20.0)
    assert s["accuracy_dqn"]["per_sample"] == pytest.approx(
        (0.0 * 10 + 40.0 * 30) / 40)
    assert s["insertion_reduction_dqn_vs_random"] == pytest.approx(
        1.0 - 7.0 / 42.0)
    assert s["families_evaded_by_both"] == [0, 1]


def test_summary_no_evading_families():
    reports = [FamilyReport(0, 5, 100.0, 100.0, 100.0, 50.0, 50.0, 0.0, 0.0, 0)]
    assert summarize(reports)["insertion_reduction_dqn_vs_random"] is None


# ------------------------------------------------------------ evaluation run

@pytest.fixture(scope="module")
def tiny_world():
    specs = [
        corpus.FamilySpec(length_range=(40, 70), signatures=(("aaa", "bbb", "ccc"),)),
        corpus.FamilySpec(length_range=(40, 70), signatures=(("ddd", "eee", "fff"),)),
    ]
    cfg = corpus.SyntheticConfig(families=2, samples_per_family=20,
                                 family_specs=specs, background_vocab=30, seed=41)
    records, _, vocab = corpus.generate_synthetic_corpus(cfg)
    samples = [corpus.Sample(i, f, vocab.encode(t), corpus.build_insert_mask(len(t)))
               for i, f, t in records]
    model = ClassifierModel(vocab.size, n_classes=2, seed=41)
    train = [s for i, s in enumerate(samples) if i % 4 != 3]
    val = [s for i, s in enumerate(samples) if i % 4 == 3]
    model, _ = train_classifier(model, train, val, epochs=4, seed=41)
    env = EvasionEnv(model, vocab.nop_id, maxturn=12)
    acfg = AgentConfig(maxturn=12, episodes=10, warmup=16, batch_size=8)
    nets = {}
    for family in (0, 1):
        pool = [s for s in val if s.family == family]
        nets[family], _ = train_agent(env, pool, acfg, seed=(41, family))
    test_samples = {f: [s for s in val if s.family == f] for f in (0, 1)}
    return env, nets, test_samples


def test_evaluation_outputs_consistent(tiny_world, tmp_path):
    env, nets, samples_by_family = tiny_world
    reports, traces = evaluate_families(env, nets, samples_by_family, seed=77)
    assert [r.family for r in reports] == [0, 1]
    for r in reports:
        assert 0.0 <= r.accuracy_no_agent <= 100.0
        assert r.n_test == len(samples_by_family[r.family])
    write_family_outputs(str(tmp_path), reports, traces)
    loaded = load_family_reports(str(tmp_path))
    assert loaded == reports
    series = json.load(open(tmp_path / "series.json"))
    assert series["families"] == [0, 1]
    # traces on disk really are the source of truth for the aggregates
    for family, pair in traces.items():
        for kind in ("random", "dqn"):
            path = tmp_path / f"traces_fam{family}_{kind}.jsonl"
            lines = path.read_text().strip().splitlines()
            assert len(lines) == len(pair[kind])


def test_evaluation_deterministic(tiny_world):
    env, nets, samples_by_family = tiny_world
    a, _ = evaluate_families(env, nets, samples_by_family, seed=77)
    b, _ = evaluate_families(env, nets, samples_by_family, seed=77)
    assert a == b


def test_dqn_return_matches_telescoped_deltas(tiny_world):
    env, nets, samples_by_family = tiny_world
    reports, traces = evaluate_families(env, nets, samples_by_family, seed=77)
    for family, pair in traces.items():
        for t in pair["dqn"]:
            if t.done_reason == "trivial":
                continue
            sample = next(s for s in samples_by_family[family]
                          if s.id == t.sample_id)
            initial = env.model.loss_of(sample.tokens, family)
            assert sum(t.rewards) == pytest.approx(t.final_loss - initial,
                                                   abs=1e-9)


# ----------------------------------------------------------------------- CLI

def run_cli(*argv):
    return main(list(argv))


def test_cli_pipeline_and_determinism(tmp_path):
    cfg_path = write_tiny_config(tmp_path / "cfg.json")

    def pipeline(root):
        corpus_dir = os.path.join(root, "corpus")
        clf_dir = os.path.join(root, "clf")
        agents_dir = os.path.join(root, "agents")
        eval_dir = os.path.join(root, "eval")
        assert run_cli("gen-corpus", "--config", cfg_path, "--out", corpus_dir) == 0
        assert run_cli("train-classifier", "--config", cfg_path,
                       "--corpus", corpus_dir, "--out", clf_dir) == 0
        clf = os.path.join(clf_dir, "classifier.json")
        for family in ("0", "1"):
            assert run_cli("train-agent", "--config", cfg_path,
                           "--corpus", corpus_dir, "--classifier", clf,
                           "--family", family, "--out", agents_dir) == 0
        assert run_cli("evaluate", "--config", cfg_path, "--corpus", corpus_dir,
                       "--classifier", clf, "--agents", agents_dir,
                       "--families", "0,1", "--out", eval_dir) == 0
        assert run_cli("report", "--results", eval_dir) == 0
        return root

    a = pipeline(str(tmp_path / "a"))
    b = pipeline(str(tmp_path / "b"))
    diffs = []
    for dirpath, _, filenames in os.walk(a):
        rel = os.path.relpath(dirpath, a)
        for name in filenames:
            pa = os.path.join(a, rel, name)
            pb = os.path.join(b, rel, name)
            assert os.path.exists(pb), f"missing in rerun: {rel}/{name}"
            if not filecmp.cmp(pa, pb, shallow=False):
                diffs.append(os.path.join(rel, name))
    assert diffs == []


def test_cli_eval_classifier_runs(tmp_path, capsys):
    cfg_path = write_tiny_config(tmp_path / "cfg.json")
    corpus_dir = str(tmp_path / "corpus")
    clf_dir = str(tmp_path / "clf")
    assert run_cli("gen-corpus", "--config", cfg_path, "--out", corpus_dir) == 0
    assert run_cli("train-classifier", "--config", cfg_path,
                   "--corpus", corpus_dir, "--out", clf_dir) == 0
    assert run_cli("eval-classifier", "--config", cfg_path,
                   "--corpus", corpus_dir,
                   "--classifier", os.path.join(clf_dir, "classifier.json"),
                   "--split", "test") == 0
    assert "accuracy" in capsys.readouterr().out


def test_cli_bad_config_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"splits": {"train": 0.9, "val": 0.3, "test": 0.3}}')
    assert run_cli("gen-corpus", "--config", str(path),
                   "--out", str(tmp_path / "x")) == 2


def test_cli_missing_artifact_exit_3(tmp_path):
    cfg_path = write_tiny_config(tmp_path / "cfg.json")
    assert run_cli("train-classifier", "--config", cfg_path,
                   "--corpus", str(tmp_path / "nowhere"),
                   "--out", str(tmp_path / "out")) == 3


def test_cli_report_empty_dir_exit_3(tmp_path):
    assert run_cli("report", "--results", str(tmp_path)) == 3


def test_resolved_config_written(tmp_path):
    cfg_path = write_tiny_config(tmp_path / "cfg.json")
    corpus_dir = str(tmp_path / "corpus")
    run_cli("gen-corpus", "--config", cfg_path, "--out", corpus_dir)
    resolved = json.load(open(os.path.join(corpus_dir, "resolved_config.json")))
    assert resolved["seed"] == 13
    assert resolved["agent"]["gamma"] == 0.99997
