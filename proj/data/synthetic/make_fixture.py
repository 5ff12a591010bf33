#!/usr/bin/env python3
"""Regenerates the synthetic 200-post fixture and its expected outcomes.

Expectations are derived from the design below, not from running the
pipeline: every claim group is one cluster, every off-domain post is noise,
the two case-twin groups collapse into one distinct claim, and the mock LLM
picks the seed tuple sharing the most content words with the claim.

    python3 data/synthetic/make_fixture.py
"""

import json
import random
import re
from collections import Counter
from pathlib import Path

HERE = Path(__file__).resolve().parent
RNG = random.Random(20240611)

SEED_EXAMPLES = [
    ("Regulators opened a review after reports of chest pain in young men who got the booster",
     "Vaccine Safety", "Side Effects", "Heart Inflammation"),
    ("A nurse in Leeds described three patients who needed epinephrine after their shot",
     "Vaccine Safety", "Side Effects", "Allergic Reactions"),
    ("The manufacturer says its phase 2 study met every endpoint",
     "Vaccine Safety", "Clinical Trials", "Trial Results"),
    ("Airlines will require proof of immunisation from cabin crew starting in May",
     "Public Policy", "Mandates", "Workplace Mandates"),
    ("The ministry cut grants for university labs studying antivirals",
     "Public Policy", "Funding", "Research Funding"),
    ("Intensive care units in Madrid are at 90 percent capacity",
     "Disease Spread", "Case Counts", "Hospital Admissions"),
    ("Scientists flagged a lineage with 30 spike mutations in Botswana",
     "Disease Spread", "Variants", "New Variant Detection"),
    ("A viral video says the pandemic was planned by a secret society",
     "Misinformation", "Conspiracy Theories", None),
]

# (tuple index into SEED_EXAMPLES, base claim, group size)
GROUPS = [
    (0, "Health agency confirms 41 cases of heart inflammation in teenagers after the second vaccine dose", 9),
    (0, "Cardiologists in Ohio reported heart inflammation in 17 young athletes within a week of vaccine shots", 9),
    (0, "A Nordic registry study links vaccine boosters to a small rise in heart inflammation among men under 30", 8),
    (1, "Pharmacists logged 23 severe allergic reactions at a single vaccine clinic in Denver last month", 8),
    (1, "The regulator says allergic reactions occur in roughly 5 per million vaccine doses given", 8),
    (2, "Phase 3 clinical trial results show the nasal vaccine cut symptomatic infection by 62 percent", 7),
    (2, "The company delayed publishing clinical trial results for its pediatric formula until 2025", 7),
    (2, "Independent reviewers found the clinical trial results for the booster were based on 900 volunteers", 7),
    (3, "The governor signed an order ending workplace mandates for state employees on March 1", 7),
    (3, "Over 300 hospitals dropped workplace mandates after the federal rule was struck down", 7),
    (3, "Court filings show 12 unions challenged workplace mandates imposed by the city council", 6),
    (4, "Congress approved 2 billion dollars in research funding for next generation nasal sprays", 6),
    (5, "Hospital admissions for respiratory illness doubled in Lagos over the past 10 days", 6),
    (5, "Officials in the Straße district confirm 58 new hospital admissions this week", 6),
    (5, "Officials in the STRASSE district confirm 58 new hospital admissions this week", 6),
    (5, "Weekly hospital admissions fell to 210 after schools closed in the northern province", 5),
    (6, "Wastewater labs reported detection of a new variant in 4 coastal cities", 5),
    (6, "Genome sequencing teams announced detection of the variant in 31 travelers from abroad", 5),
    (7, "Fact checkers traced the microchip conspiracy to 3 accounts spreading misinformation", 4),
    (7, "Moderators removed 4000 posts pushing the conspiracy theories about microchips and misinformation", 4),
]
TWINS = (13, 14)  # identical after case folding, different hash-embedding tokens

# Off-domain posts. Each borrows one or two words from one claim group and
# shares nothing with the other off-domain posts, so it sits nearer the claim
# body than to any other outlier and cannot seed a cluster of its own. Posts
# tied to a group with no close neighbour group borrow a single word: they
# must reach the body only after that group has split from it, or they would
# be absorbed into its cluster.
SINGLETONS = [
    "Ohio athletes celebrated marathon medals",
    "Denver pharmacists organized charity bake sale",
    "Nordic registry lists rare bird sightings",
    "Lagos traffic doubled during carnival",
    "Coastal cities brace hurricane winds",
    "Genome sequencing startup hired chefs",
    "Unions organised summer picnic",
    "Governor autographed baseball jerseys",
    "Congress sponsored highway murals",
    "Wastewater labs won engineering award",
    "Moderators deleted crypto spam",
    "Fact checkers reviewed celebrity gossip",
]
PAIRS = [
    "Cardiologists recommend walking within parks",
    "Teenagers flocked skate ramps second weekend",
    "Phase lighting cut energy bills",
    "Pediatric dentists delayed holiday schedule",
    "Independent bookshops found loyal readers",
    "Hospitals raised parking fees",
    "Northern province hosted harvest festival",
    "Travelers abroad praised street food",
    "Severe microchip shortage hits automakers",
]
CHATTER = [
    "lol this is so good", "good morning everyone", "can't wait for the weekend",
    "who else is watching tonight", "happy birthday to my best friend", "ugh mondays",
    "so proud of you all", "what a game", "coffee first then everything else", "miss you guys",
]

URLS = ["https://t.co/a1B2c3", "https://t.co/Zx9Yw8", "http://bit.ly/3kQpR", "https://example.org/s/77"]
HANDLES = ["@newsdesk", "@healthwatch", "@jd_reports", "@citywire"]


def upper(text):
    # str.upper() turns "ß" into "SS", which would change the embedding tokens.
    return "".join(c if c == "ß" else c.upper() for c in text)


def variants(base, n):
    """n surface variants of one text: case, punctuation, links, mentions, retweets."""
    stem = base.rstrip(".")
    forms = [
        base,
        upper(stem),
        stem.lower() + ".",
        f"RT {RNG.choice(HANDLES)}: {base}",
        f"{base} {RNG.choice(URLS)}",
        f"{stem}!!",
        f"{RNG.choice(HANDLES)} {stem.lower()}",
        f"{base}  {RNG.choice(URLS)} {RNG.choice(HANDLES)}",
        f"RT {RNG.choice(HANDLES)}: {upper(stem)}!",
    ]
    return forms[:n]


def content_words(text):
    out = []
    for raw in text.split():
        low = raw.lower()
        if low.startswith(("http", "@", "www.")):
            continue
        w = "".join(c for c in low if c.isascii() and c.isalnum())
        if len(w) >= 4:
            out.append(w)
    return out


def hash_tokens(text):
    toks = set()
    for raw in text.split():
        low = raw.lower()
        if low.startswith(("http://", "https://", "www.", "@")):
            continue
        for w in re.split(r"[^a-z0-9\x80-\U0010ffff]+", low):
            if w and w != "rt":
                toks.add(w)
    return toks


def mock_choice(claim, tuples):
    words = set(content_words(claim))
    best, best_overlap = 0, 0
    for i, t in enumerate(tuples):
        seed_words = {w for label in t if label for w in content_words(label)}
        overlap = len(seed_words & words)
        if overlap > best_overlap:
            best, best_overlap = i, overlap
    return best, best_overlap


def merge(counts, minimums):
    """Counts per path after folding infrequent siblings into "Other"."""
    def build(paths, depth):
        groups = {}
        for path, n in paths:
            if depth < len(path):
                groups.setdefault(path[depth], []).append((path, n))
        kept, other = {}, []
        for label, members in groups.items():
            total = sum(n for _, n in members)
            if total >= minimums[depth]:
                kept[label] = members
            else:
                other += members
        if other:
            kept.setdefault("Other", []).extend(other)
        return {label: (sum(n for _, n in m), build(m, depth + 1)) for label, m in kept.items()}

    return build(list(counts.items()), 0)


def per_level(tree, depth=0, acc=None):
    acc = acc if acc is not None else [0, 0, 0]
    for _, (_, children) in tree.items():
        acc[depth] += 1
        per_level(children, depth + 1, acc)
    return acc


def main():
    tuples = [t[1:] for t in SEED_EXAMPLES]
    for g, (ti, base, _) in enumerate(GROUPS):
        choice, overlap = mock_choice(base, tuples)
        assert choice == ti and overlap > 0, (g, base, choice)
    claim_tokens = set().union(*(hash_tokens(b) for _, b, _ in GROUPS))
    seen = set()
    for text in SINGLETONS + PAIRS:
        toks = hash_tokens(text)
        assert len(toks & claim_tokens) in (1, 2), (text, toks & claim_tokens)
        assert not toks & seen, (text, toks & seen)
        seen |= toks
    assert GROUPS[TWINS[0]][1].casefold() == GROUPS[TWINS[1]][1].casefold()

    items = []  # (kind, group or None, variant index, text)
    for g, (_, base, n) in enumerate(GROUPS):
        for v, text in enumerate(variants(base, n)):
            items.append(("claim", g, v, text))
    for s in SINGLETONS:
        items.append(("outlier", None, 0, s))
    for p in PAIRS:
        items.append(("outlier", None, 0, p))
        items.append(("outlier", None, 1, upper(p)))
    for c in CHATTER:
        for v in range(4):
            items.append(("chatter", None, v, c if v == 0 else f"{c} {'!' * v}"))
    assert len(items) == 200, len(items)
    RNG.shuffle(items)

    # The untouched base text is each group's earliest post, so the twins'
    # representatives compare equal after normalization.
    for g in range(len(GROUPS)):
        slots = [i for i, it in enumerate(items) if it[1] == g]
        base_slot = next(i for i in slots if items[i][2] == 0)
        items[slots[0]], items[base_slot] = items[base_slot], items[slots[0]]

    posts, scores = [], {}
    for i, (kind, _, _, text) in enumerate(items):
        pid = f"p{i:03d}"
        posts.append({"id": pid, "text": text, "platform": "twitter" if i % 3 else "facebook",
                      "timestamp": f"2024-03-{1 + i % 28:02d}T{i % 24:02d}:00:00Z"})
        if kind == "chatter":
            scores[pid] = round(0.05 + 0.44 * RNG.random(), 3) if i % 10 else 0.499
        else:
            scores[pid] = round(0.55 + 0.44 * RNG.random(), 3) if i % 10 else 0.5

    first_post = {}
    for i, (kind, g, _, _) in enumerate(items):
        if kind == "claim" and g not in first_post:
            first_post[g] = f"p{i:03d}"
    reps = sorted(first_post.items(), key=lambda kv: kv[1])
    twin_later = max(TWINS, key=lambda g: first_post[g])
    distinct = [(g, pid) for g, pid in reps if g != twin_later]

    path_counts = Counter()
    for g, _ in distinct:
        path_counts[tuple(x for x in tuples[GROUPS[g][0]] if x)] += 1
    raw = Counter()
    for path, n in path_counts.items():
        for d in range(len(path)):
            raw[path[: d + 1]] += n
    raw_levels = [sum(1 for p in raw if len(p) == d + 1) for d in range(3)]
    minimums = [5, 3, 3]
    merged_levels = per_level(merge(path_counts, minimums))

    free = [content_words(GROUPS[g][1]) for g, _ in distinct]
    ablation_levels = [len({tuple(w[: d + 1]) for w in free if len(w) > d}) for d in range(3)]

    def dump(name, obj):
        (HERE / name).write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    with open(HERE / "posts.jsonl", "w", encoding="utf-8") as f:
        for p in posts:
            f.write(json.dumps(p, ensure_ascii=False) + "\n")
    dump("scores.json", scores)
    dump("examples.json", {"examples": [
        {"claim": c, "broad": b, "medium": m, "detailed": d} for c, b, m, d in SEED_EXAMPLES]})
    dump("config.json", {
        "input": "posts.jsonl",
        "providers": {"scorer": {"kind": "fixture", "path": "scores.json"},
                      "embedder": {"kind": "hash"}, "llm": {"kind": "mock"}, "judge": {"kind": "mock"}},
        "embedding": {"dim": 1024, "seed": 7, "jitter": 0.02},
        "hdbscan": {"min_cluster_size": 3},
        "merge": {"broad_min": minimums[0], "medium_min": minimums[1], "detailed_min": minimums[2]},
        "generation": {"examples": "examples.json", "k": 10},
        "evaluation": {"pairs": 10},
        "seed": 42,
        "out": "run",
    })
    outliers = sorted(f"p{i:03d}" for i, it in enumerate(items) if it[0] == "outlier")
    dump("expected.json", {
        "posts": 200,
        "dropped": 0,
        "retained_claims": sum(1 for it in items if it[0] != "chatter"),
        "clusters": len(GROUPS),
        "outliers": len(outliers),
        "outlier_ids": outliers,
        "cluster_members": [sorted(f"p{i:03d}" for i, it in enumerate(items) if it[1] == g)
                            for g, _ in reps],
        "distinct_claims": [pid for _, pid in distinct],
        "deduplicated_twin": first_post[twin_later],
        "topics": {pid: [x for x in tuples[GROUPS[g][0]]] for g, pid in distinct},
        "topic_counts_raw": dict(zip(["broad", "medium", "detailed"], raw_levels)),
        "topic_counts": dict(zip(["broad", "medium", "detailed"], merged_levels)),
        "ablation_topic_counts": dict(zip(["broad", "medium", "detailed"], ablation_levels)),
    })
    print("raw", raw_levels, "merged", merged_levels, "ablation", ablation_levels)


if __name__ == "__main__":
    main()
