"""Three-way evaluation (no agent / random / DQN) and report aggregation.

Episode traces are the source of truth; every aggregate here is a pure fold
over them, so reports can be regenerated byte-identically from stored traces.
"""

import csv
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .agent import greedy_agent, random_agent
from .env import episode_return
from .errors import MissingArtifactError


@dataclass
class FamilyReport:
    family: int
    n_test: int
    accuracy_no_agent: float      # percentages in [0, 100]
    accuracy_random: float
    accuracy_dqn: float
    avg_insertions_random: float  # failed episodes count maxturn insertions
    avg_insertions_dqn: float
    avg_return_random: float
    avg_return_dqn: float
    trivial_evasions: int


def _insertions(trace, maxturn):
    if trace.done_reason == "maxturn":
        return maxturn
    return trace.insertions


def _attack_family(env, net, samples, rng, repeats=1):
    """Run the three-way evaluation for one family's samples.

    Returns (random traces, dqn traces). Trivially misclassified samples get
    zero-insertion "trivial" traces from both agents. With repeats > 1 the
    random baseline contributes that many traces per sample and its aggregates
    average over all of them.
    """
    random_traces, dqn_traces = [], []
    for s in samples:
        for _ in range(repeats):
            random_traces.append(random_agent(env, s, rng))
        dqn_traces.append(greedy_agent(env, s, net))
    return random_traces, dqn_traces


def family_report(family, samples, random_traces, dqn_traces, maxturn):
    n = len(samples)
    trivial = sum(1 for t in dqn_traces if t.done_reason == "trivial")
    correct_initial = n - trivial
    still_random = sum(1 for t in random_traces if t.done_reason == "maxturn")
    still_dqn = sum(1 for t in dqn_traces if t.done_reason == "maxturn")
    return FamilyReport(
        family=family,
        n_test=n,
        accuracy_no_agent=100.0 * correct_initial / n,
        accuracy_random=100.0 * still_random / len(random_traces),
        accuracy_dqn=100.0 * still_dqn / len(dqn_traces),
        avg_insertions_random=float(np.mean([_insertions(t, maxturn)
                                             for t in random_traces])),
        avg_insertions_dqn=float(np.mean([_insertions(t, maxturn)
                                          for t in dqn_traces])),
        avg_return_random=float(np.mean([episode_return(t.rewards)
                                         for t in random_traces])),
        avg_return_dqn=float(np.mean([episode_return(t.rewards)
                                      for t in dqn_traces])),
        trivial_evasions=trivial,
    )


def evaluate_families(env, nets_by_family, samples_by_family, seed, repeats=1):
    """Returns (reports, traces_by_family) over the given families."""
    reports = []
    traces = {}
    for family in sorted(samples_by_family):
        rng = np.random.default_rng((seed, family))
        samples = samples_by_family[family]
        rnd, dqn = _attack_family(env, nets_by_family[family], samples, rng,
                                  repeats)
        reports.append(family_report(family, samples, rnd, dqn, env.maxturn))
        traces[family] = {"random": rnd, "dqn": dqn}
    return reports, traces


def write_family_outputs(out_dir, reports, traces):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "family_reports.json"), "w") as fh:
        json.dump([asdict(r) for r in reports], fh, indent=2)
    with open(os.path.join(out_dir, "family_reports.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(asdict(reports[0])))
        writer.writeheader()
        for r in reports:
            writer.writerow(asdict(r))
    for family, pair in traces.items():
        for kind, ts in pair.items():
            path = os.path.join(out_dir, f"traces_fam{family}_{kind}.jsonl")
            with open(path, "w") as fh:
                for t in ts:
                    fh.write(t.to_json_line() + "\n")
    # Plot-ready series mirroring the per-family bar charts.
    series = {
        "families": [r.family for r in reports],
        "accuracy": {
            "no_agent": [r.accuracy_no_agent for r in reports],
            "random": [r.accuracy_random for r in reports],
            "dqn": [r.accuracy_dqn for r in reports],
        },
        "avg_insertions": {
            "random": [r.avg_insertions_random for r in reports],
            "dqn": [r.avg_insertions_dqn for r in reports],
        },
        "avg_return": {
            "random": [r.avg_return_random for r in reports],
            "dqn": [r.avg_return_dqn for r in reports],
        },
    }
    with open(os.path.join(out_dir, "series.json"), "w") as fh:
        json.dump(series, fh, indent=2)


def load_family_reports(results_dir):
    path = os.path.join(results_dir, "family_reports.json")
    if not os.path.exists(path):
        raise MissingArtifactError(f"no family_reports.json under {results_dir}")
    with open(path) as fh:
        return [FamilyReport(**d) for d in json.load(fh)]


def summarize(reports):
    """Overall accuracy under attack and the DQN-vs-random insertion reduction.

    Both weightings of "overall" are emitted since the choice is a convention:
    per-sample pools every test sample, per-family averages the family rows.
    The insertion reduction is computed over families where both agents evaded
    at least one sample.
    """
    n_total = sum(r.n_test for r in reports)

    def overall(attr):
        per_sample = sum(getattr(r, attr) * r.n_test for r in reports) / n_total
        per_family = float(np.mean([getattr(r, attr) for r in reports]))
        return {"per_sample": per_sample, "per_family": per_family}

    both_evaded = [r for r in reports
                   if r.accuracy_random < r.accuracy_no_agent
                   and r.accuracy_dqn < r.accuracy_no_agent]
    if both_evaded:
        mean_rand = float(np.mean([r.avg_insertions_random for r in both_evaded]))
        mean_dqn = float(np.mean([r.avg_insertions_dqn for r in both_evaded]))
        reduction = 1.0 - mean_dqn / mean_rand if mean_rand > 0 else 0.0
    else:
        reduction = None
    return {
        "n_test": n_total,
        "accuracy_no_agent": overall("accuracy_no_agent"),
        "accuracy_random": overall("accuracy_random"),
        "accuracy_dqn": overall("accuracy_dqn"),
        "insertion_reduction_dqn_vs_random": reduction,
        "families_evaded_by_both": [r.family for r in both_evaded],
        "trivial_evasions": sum(r.trivial_evasions for r in reports),
    }
