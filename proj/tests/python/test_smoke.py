import json
import math
import os
import random
from pathlib import Path

import pytest

import llmtaxo

SOURCE = Path(os.environ.get("LLMTAXO_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def canonical(labels):
    """Relabels clusters by first appearance so partitions compare directly."""
    seen = {}
    out = []
    for l in labels:
        if l < 0:
            out.append(-1)
        else:
            out.append(seen.setdefault(l, len(seen)))
    return out


def test_two_blobs():
    pts = [[0, 0], [0, 0.1], [0.1, 0], [5, 5], [5, 5.1], [5.1, 5]]
    labels, clusters = llmtaxo.hdbscan(pts, min_cluster_size=3)
    assert labels == [0, 0, 0, 1, 1, 1]
    assert [c["size"] for c in clusters] == [3, 3]


def test_silhouette_hand_case():
    s = llmtaxo.silhouette([[0, 0], [0, 1], [4, 0], [4, 1]], [0, 0, 1, 1])
    assert s == pytest.approx(1 - 2 / (4 + math.sqrt(17)), abs=1e-12)


def test_errors_carry_exit_codes():
    with pytest.raises(llmtaxo.Error) as info:
        llmtaxo.hdbscan([[0, 0], [1, 1]], min_cluster_size=1)
    assert info.value.exit_code == 2
    with pytest.raises(llmtaxo.Error) as info:
        llmtaxo.run_stage(SOURCE / "data/synthetic/config.json", "cluster", out="/nonexistent/llmtaxo-smoke")
    assert info.value.exit_code == 5


def test_hash_embed_is_deterministic():
    texts = ["masks work", "masks work", "vaccines cause autism"]
    vecs = llmtaxo.hash_embed(texts, dim=32)
    assert vecs[0] == vecs[1]
    assert vecs == llmtaxo.hash_embed(texts, dim=32)
    # Without the per-text perturbation the bag-of-words vector is unit length.
    for v in llmtaxo.hash_embed(texts, dim=32, jitter=0.0):
        assert math.sqrt(sum(x * x for x in v)) == pytest.approx(1.0)


def test_consolidate_merges_small_topics():
    triples = [{"broad": "Health", "medium": "Vaccines", "detailed": "Side Effects"}] * 60
    triples += [{"broad": "Weather", "medium": "Rain", "detailed": None}] * 3
    tax = llmtaxo.consolidate(triples)
    text = json.dumps(tax)
    assert "Other" in text
    assert "Weather" not in text
    raw = llmtaxo.consolidate(triples, merge=False)
    assert "Weather" in json.dumps(raw)


def test_prompt_and_parser():
    examples = [
        {"claim": "Officials reported 12 cases of myocarditis after the second dose.",
         "broad": "Vaccine Safety", "medium": "Side Effects", "detailed": "Heart Inflammation"},
        {"claim": "The city council voted to require masks in all public schools.",
         "broad": "Public Policy", "medium": "Mandates", "detailed": None},
    ]
    seeded = llmtaxo.build_prompt(examples, "Hospitals in Ohio reported 40 new admissions this week.")
    plain = llmtaxo.build_prompt(examples, "Hospitals in Ohio reported 40 new admissions this week.",
                                 with_seed=False)
    golden = SOURCE / "tests/golden"
    assert seeded == (golden / "prompt_seeded.txt").read_text(encoding="utf-8")
    assert plain == (golden / "prompt_ablation.txt").read_text(encoding="utf-8")

    parsed = llmtaxo.parse_response("Broad Topic: Threats\nMedium Topic: Cyberattacks\n"
                                    "Detailed Topic: not mentioned in the given post")
    assert parsed["topics"]["medium"] == "Cyberattacks"
    assert parsed["topics"]["detailed"] is None
    assert {"kind": "blacklisted_phrase", "level": "detailed"} in parsed["flags"]


def test_aggregate_means():
    def row(ev, value, criterion):
        return {"subject": "gpt", "metric": "clarity", "criterion": criterion, "score": value,
                "rationale": "", "evaluator_id": ev, "model": "", "item_id": ""}

    report = llmtaxo.aggregate([row("llm:a", 4, "precision"), row("llm:a", 4, "unambiguity"),
                                row("llm:a", 5, "consistency"), row("llm:b", 5, "precision")])
    assert report["per_evaluator"]["gpt"]["llm:a"]["clarity"] == pytest.approx(13 / 3)
    assert report["per_group"]["gpt"]["llm"]["clarity"] == pytest.approx((13 / 3 + 5) / 2)


def test_run_stage_synthetic(tmp_path):
    manifest = llmtaxo.run_stage(SOURCE / "data/synthetic/config.json", "run", out=tmp_path, mock=True)
    expected = json.loads((SOURCE / "data/synthetic/expected.json").read_text())
    assert manifest["counts"]["posts"] == expected["posts"]
    assert manifest["counts"]["clusters"] == expected["clusters"]
    assert manifest["counts"]["distinct"] == len(expected["distinct_claims"])
    assert (tmp_path / "taxonomy.json").exists()


def test_matches_scikit_learn_hdbscan():
    np = pytest.importorskip("numpy")
    cluster = pytest.importorskip("sklearn.cluster")
    rng = random.Random(11)
    compared = skipped = 0
    while compared < 60:
        n = rng.randint(8, 40)
        mcs = rng.choice([2, 3, 4, 5])
        centres = [(rng.uniform(-10, 10), rng.uniform(-10, 10)) for _ in range(rng.randint(1, 4))]
        pts = []
        for _ in range(n):
            cx, cy = rng.choice(centres)
            pts.append([cx + rng.gauss(0, 1), cy + rng.gauss(0, 1)])
        # Tied merge heights are one split event here, while scikit-learn merges
        # them one edge at a time in an order of its own. Only tie-free trees compare.
        weights = [w for _, _, w in llmtaxo.build_mst(llmtaxo.mutual_reachability(pts, mcs - 1))]
        if len(set(weights)) != len(weights):
            skipped += 1
            continue
        ours, _ = llmtaxo.hdbscan(pts, min_cluster_size=mcs)
        # scikit-learn counts the point itself among its min_samples neighbours.
        theirs = cluster.HDBSCAN(min_cluster_size=mcs, min_samples=mcs).fit(np.array(pts)).labels_
        assert canonical(ours) == canonical(list(theirs)), (n, mcs)
        compared += 1
    assert skipped < 10 * compared
