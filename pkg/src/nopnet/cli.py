"""Command-line entry point.

Subcommands: gen-corpus, train-classifier, eval-classifier, train-agent,
evaluate, report. Every run writes its fully resolved config (JSON) next to
its outputs so any artifact can be reproduced from config + seed alone.

Exit codes: 0 success, 2 config error, 3 missing artifact, 4 numeric failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import corpus as corpus_mod
from .agent import train_agent
from .classifier import ClassifierModel, evaluate, train_classifier
from .config import default_config, dump_config, load_config, validate
from .env import EvasionEnv
from .errors import ConfigError, MissingArtifactError, TrainingError
from .harness import (evaluate_families, load_family_reports, summarize,
                      write_family_outputs)
from .qnet import QNetwork


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.corpus.seed = args.seed
    return validate(cfg)


def _write_resolved(cfg, out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    dump_config(cfg, os.path.join(out_dir, name))


def cmd_gen_corpus(args):
    cfg = _load_cfg(args)
    records, signatures, vocab = corpus_mod.generate_synthetic_corpus(cfg.corpus)
    ids_by_family = {}
    for sample_id, family, _ in records:
        ids_by_family.setdefault(family, []).append(sample_id)
    assignment = corpus_mod.split_corpus(ids_by_family, cfg.splits.ratios,
                                         cfg.seed)
    meta = {"signatures": [[list(s) for s in sigs] for sigs in signatures],
            "nop_bearing": [spec.nop_bearing for spec in cfg.corpus.family_specs],
            "seed": cfg.corpus.seed}
    corpus_mod.write_corpus(args.out, records, vocab, assignment, meta)
    _write_resolved(cfg, args.out, "resolved_config.json")
    counts = {}
    for row in corpus_mod.read_manifest(args.out):
        counts[(row.family, row.split)] = counts.get((row.family, row.split), 0) + 1
    print(f"corpus: {len(records)} samples, {cfg.corpus.families} families, "
          f"vocab {vocab.size}")
    for family in sorted({f for f, _ in counts}):
        per = {s: counts.get((family, s), 0) for s in corpus_mod.SPLITS}
        print(f"  family {family}: " +
              " ".join(f"{s}={per[s]}" for s in corpus_mod.SPLITS))


def cmd_train_classifier(args):
    cfg = _load_cfg(args)
    vocab = corpus_mod.load_vocab(args.corpus)
    train = corpus_mod.load_samples(args.corpus, vocab, split="train")
    val = corpus_mod.load_samples(args.corpus, vocab, split="val")
    test = corpus_mod.load_samples(args.corpus, vocab, split="test")
    os.makedirs(args.out, exist_ok=True)
    model = ClassifierModel(vocab.size, cfg.classifier.embedding_dim,
                            cfg.classifier.filter_spec, cfg.classifier.n_classes,
                            seed=cfg.seed)
    metrics_path = os.path.join(args.out, "classifier_metrics.jsonl")
    with open(metrics_path, "w") as fh:
        def log(entry):
            fh.write(json.dumps(entry) + "\n")
            print(f"epoch {entry['epoch']:2d}  train_loss {entry['train_loss']:.4f}"
                  f"  val_accuracy {entry['val_accuracy']:.4f}")
        model, _ = train_classifier(model, train, val, cfg.classifier.epochs,
                                    cfg.classifier.lr, seed=cfg.seed, log=log)
    acc, per_family, confusion = evaluate(model, test)
    model.save(os.path.join(args.out, "classifier.json"), seed=cfg.seed)
    with open(os.path.join(args.out, "classifier_eval.json"), "w") as fh:
        json.dump({"test_accuracy": acc,
                   "per_family": {str(k): v for k, v in per_family.items()},
                   "confusion": confusion.tolist()}, fh, indent=2)
    _write_resolved(cfg, args.out, "resolved_config.json")
    print(f"test accuracy {acc:.4f}")
    print("confusion matrix (rows = true family):")
    for row in confusion:
        print("  " + " ".join(f"{v:4d}" for v in row))


def cmd_eval_classifier(args):
    _ = _load_cfg(args)
    vocab = corpus_mod.load_vocab(args.corpus)
    samples = corpus_mod.load_samples(args.corpus, vocab, split=args.split)
    model = _load_classifier(args.classifier)
    acc, per_family, confusion = evaluate(model, samples)
    print(f"{args.split} accuracy {acc:.4f}")
    for family in sorted(per_family):
        print(f"  family {family}: {per_family[family]:.4f}")
    for row in confusion:
        print("  " + " ".join(f"{v:4d}" for v in row))


def _load_classifier(path):
    if not os.path.exists(path):
        raise MissingArtifactError(f"classifier checkpoint missing: {path}")
    return ClassifierModel.load(path)


def cmd_train_agent(args):
    cfg = _load_cfg(args)
    vocab = corpus_mod.load_vocab(args.corpus)
    model = _load_classifier(args.classifier)
    samples = corpus_mod.load_samples(args.corpus, vocab,
                                      split=cfg.agent.rl_pool,
                                      family=args.family)
    if not samples:
        raise ConfigError(f"unknown or empty family {args.family}")
    env = EvasionEnv(model, vocab.nop_id, cfg.agent.maxturn)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, f"agent_fam{args.family}_log.jsonl")
    with open(log_path, "w") as fh:
        def log(entry):
            fh.write(json.dumps(entry) + "\n")
            if (entry["episode"] + 1) % 100 == 0:
                print(f"episode {entry['episode'] + 1:4d}  steps {entry['steps']:2d}"
                      f"  return {entry['return']:+.3f}  epsilon {entry['epsilon']:.3f}")
        net, history = train_agent(env, samples, cfg.agent,
                                   seed=(cfg.seed, args.family), log=log)
    net.save(os.path.join(args.out, f"agent_fam{args.family}.json"), seed=cfg.seed)
    _write_resolved(cfg, args.out, f"resolved_config_fam{args.family}.json")
    evaded = sum(1 for e in history[-100:] if e["evaded"])
    print(f"family {args.family}: trained {len(history)} episodes; "
          f"trailing-100 evasion rate {evaded}%")


def cmd_evaluate(args):
    cfg = _load_cfg(args)
    vocab = corpus_mod.load_vocab(args.corpus)
    model = _load_classifier(args.classifier)
    families = (sorted(int(f) for f in args.families.split(","))
                if args.families else list(range(cfg.classifier.n_classes)))
    nets, samples_by_family = {}, {}
    for family in families:
        path = os.path.join(args.agents, f"agent_fam{family}.json")
        if not os.path.exists(path):
            raise MissingArtifactError(f"agent checkpoint missing: {path}")
        nets[family] = QNetwork.load(path)
        samples_by_family[family] = corpus_mod.load_samples(
            args.corpus, vocab, split="test", family=family)
    env = EvasionEnv(model, vocab.nop_id, cfg.agent.maxturn)
    reports, traces = evaluate_families(env, nets, samples_by_family, cfg.seed,
                                        repeats=args.repeats)
    write_family_outputs(args.out, reports, traces)
    _write_resolved(cfg, args.out, "resolved_config.json")
    for r in reports:
        print(f"family {r.family}: acc {r.accuracy_no_agent:6.2f} -> "
              f"random {r.accuracy_random:6.2f} / dqn {r.accuracy_dqn:6.2f}   "
              f"insertions {r.avg_insertions_random:5.2f} vs "
              f"{r.avg_insertions_dqn:5.2f}   "
              f"returns {r.avg_return_random:+.3f} vs {r.avg_return_dqn:+.3f}")


def cmd_report(args):
    reports = load_family_reports(args.results)
    summary = summarize(reports)
    out_path = os.path.join(args.results, "summary.json")
    with open(out_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary, indent=2, sort_keys=True))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nopnet",
        description="Mnemonic-sequence malware classifier and the NOP-insertion "
                    "evasion lab around it")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="TOML or JSON config file")
        p.add_argument("--seed", type=int, default=None)
        if out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen-corpus", help="generate the synthetic corpus")
    common(p)
    p.set_defaults(fn=cmd_gen_corpus)

    p = sub.add_parser("train-classifier", help="train the target CNN")
    common(p)
    p.add_argument("--corpus", required=True)
    p.set_defaults(fn=cmd_train_classifier)

    p = sub.add_parser("eval-classifier", help="accuracy/confusion on a split")
    common(p, out=False)
    p.add_argument("--corpus", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--split", default="test", choices=corpus_mod.SPLITS)
    p.set_defaults(fn=cmd_eval_classifier)

    p = sub.add_parser("train-agent", help="train one family's evasion agent")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--family", required=True, type=int)
    p.set_defaults(fn=cmd_train_agent)

    p = sub.add_parser("evaluate", help="no-agent / random / DQN comparison")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--agents", required=True, help="directory of agent checkpoints")
    p.add_argument("--families", default="", help="comma-separated family ids")
    p.add_argument("--repeats", type=int, default=1,
                   help="random-agent episodes per sample")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate family reports into a summary")
    p.add_argument("--results", required=True)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return 3
    except TrainingError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
