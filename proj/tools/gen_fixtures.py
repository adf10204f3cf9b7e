#!/usr/bin/env python3
"""Generate the bundled synthetic fixtures under fixtures/.

Deterministic: the same numpy seed always produces byte-identical files.

    python3 tools/gen_fixtures.py [--root fixtures]
"""
import argparse
import json
import os

import numpy as np

TRAITS = ["O", "C", "E", "A", "N"]
D = 64
LAYER = 6
MODEL = "synthetic-tiny-lm"


def dump_line(obj):
    # json.dumps uses repr() for floats, which round-trips exactly.
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def meta_line(model, extracted_at):
    return dump_line({"meta": {"model": model, "extracted_at": extracted_at,
                               "probe_position": "response_mean",
                               "format_version": 1}})


def acts_small(root, rng):
    # 150 records with uneven group sizes so the count oracle is not trivial.
    groups = [("O", "pos", 50), ("O", "neg", 50), ("O", "neu", 30), ("C", "pos", 20)]
    lines = [meta_line(MODEL, "2025-01-01T00:00:00Z")]
    for trait, cond, n in groups:
        for p in range(n):
            vec = rng.normal(0.0, 1.0, D)
            lines.append(dump_line({
                "trait": trait, "condition": cond, "variant_kind": "questionnaire",
                "variant_id": 0, "prompt_id": f"p{p:03d}", "layer": LAYER,
                "vector": [float(x) for x in vec]}))
    order = rng.permutation(len(lines) - 1) + 1
    shuffled = [lines[0]] + [lines[i] for i in order]
    with open(os.path.join(root, "acts_small.jsonl"), "w") as f:
        f.write("\n".join(shuffled) + "\n")


def logprob_vector(rng, target, width):
    k = np.arange(101, dtype=float)
    lp = -((k - target) ** 2) / (2.0 * width * width) + rng.normal(0.0, 0.3, 101)
    lp -= np.log(np.sum(np.exp(lp - lp.max()))) + lp.max()
    return [float(x) for x in lp]


def pvni_small(root, rng, n_variants=10, n_prompts=4, n_rollouts=2):
    out = os.path.join(root, "pvni_small")
    os.makedirs(out, exist_ok=True)
    base = rng.normal(0.0, 1.0, D)
    dirs = {}
    for t in TRAITS:
        u = rng.normal(0.0, 1.0, D)
        dirs[t] = u / np.linalg.norm(u)
    amp = {t: float(rng.uniform(2.0, 4.0)) for t in TRAITS}
    neutral_w = {t: float(rng.uniform(0.25, 0.85)) for t in TRAITS}
    anchors = {t: (float(rng.uniform(70, 95)), float(rng.uniform(5, 30))) for t in TRAITS}

    acts = [meta_line(MODEL, "2025-01-02T00:00:00Z")]
    judges = [meta_line(MODEL, "2025-01-02T00:00:00Z")]
    for v in range(n_variants):
        shift = rng.normal(0.0, 0.3, D)
        for t in TRAITS:
            w = neutral_w[t] + float(rng.normal(0.0, 0.03))
            if t == "N" and v == 3:
                w = 1.15  # neutral beyond the positive anchor: exercises clipping
            for p in range(n_prompts):
                pid = f"q{p:02d}"
                h_neg = base + shift + rng.normal(0.0, 0.05, D)
                h_pos = base + shift + amp[t] * dirs[t] + rng.normal(0.0, 0.05, D)
                h_neu = base + shift + w * amp[t] * dirs[t] + rng.normal(0.0, 0.05, D)
                for cond, h in (("pos", h_pos), ("neg", h_neg), ("neu", h_neu)):
                    acts.append(dump_line({
                        "trait": t, "condition": cond, "variant_kind": "questionnaire",
                        "variant_id": v, "prompt_id": pid, "layer": LAYER,
                        "vector": [float(x) for x in h]}))
                for cond, centre in (("pos", anchors[t][0]), ("neg", anchors[t][1])):
                    for r in range(n_rollouts):
                        target = float(np.clip(centre + rng.normal(0.0, 3.0), 0.0, 100.0))
                        rec = {"trait": t, "condition": cond, "variant_kind": "questionnaire",
                               "variant_id": v, "prompt_id": pid, "rollout_id": r}
                        if (p + r) % 2 == 0:
                            rec["score"] = round(target, 3)
                        else:
                            rec["candidate_logprobs"] = logprob_vector(rng, target, 4.0)
                        judges.append(dump_line(rec))
    with open(os.path.join(out, "activations.jsonl"), "w") as f:
        f.write("\n".join(acts) + "\n")
    with open(os.path.join(out, "judgements.jsonl"), "w") as f:
        f.write("\n".join(judges) + "\n")


def logprob_cases(root, rng, n=100):
    cases = []
    for i in range(n):
        scale = [0.1, 1.0, 5.0, 30.0][i % 4]
        lp = rng.normal(-5.0, scale, 101)
        cases.append([float(x) for x in lp])
    with open(os.path.join(root, "logprob_cases.json"), "w") as f:
        json.dump({"cases": cases}, f)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--root", default=os.path.join(os.path.dirname(__file__), "..", "fixtures"))
    args = ap.parse_args()
    os.makedirs(args.root, exist_ok=True)
    acts_small(args.root, np.random.default_rng(20240611))
    pvni_small(args.root, np.random.default_rng(20240612))
    logprob_cases(args.root, np.random.default_rng(20240613))


if __name__ == "__main__":
    main()
