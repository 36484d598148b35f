"""Regenerate the bundled mini corpus under src/factmatch/data/minicorpus.

Fifty synthetic fact-check articles grouped into ten themes, one hundred
crowd conversations (claim tweet, optional root, fact-checker reply with a
link) and thirty labeled query tweets split 10/8/12 into train/dev/test.

Articles name two invented entities each.  Tweets often refer to those
entities by an alias, so exact-term matching only partly works; aliases
are seen next to their article in the crowd conversations, which is where
a trained encoder can pick them up.  About 15% of conversations link an
unrelated article.

    python scripts/make_minicorpus.py [outdir]
"""

import json
import random
import sys
from pathlib import Path

from factmatch.corpus import canonical_url
from factmatch.porter import stem
from factmatch.textnorm import default_stopwords

SEED = 20231
N_THEMES = 10
PER_THEME = 5
N_CONVERSATIONS = 100
NOISE = 0.15
SPLITS = {"train": 10, "dev": 8, "test": 12}

THEMES = [
    ("vaccine", "clinic", "dose"),
    ("election", "ballot", "voter"),
    ("climate", "flood", "heatwave"),
    ("border", "migrant", "fence"),
    ("economy", "tax", "price"),
    ("police", "arrest", "crime"),
    ("school", "teacher", "student"),
    ("hospital", "doctor", "patient"),
    ("energy", "pipeline", "grid"),
    ("media", "reporter", "photo"),
]
VERB_BASE = {"banned": "ban", "approved": "approve", "funded": "fund", "blocked": "block",
             "cancelled": "cancel", "announced": "announce", "denied": "deny", "ordered": "order"}
VERBS = sorted(VERB_BASE)
FILLERS = ["wow", "unbelievable", "share", "everyone", "read", "look", "truth", "insane",
           "breaking", "people", "seriously", "crazy", "wake", "listen", "finally"]
FC_REPLIES = ["This is false", "Fact check here", "Not true, see", "Debunked", "Misleading claim, read this"]

ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kl", "tr", "gr", "st"]
VOWELS = ["a", "o", "u", "i", "e"]
CODAS = ["", "n", "r", "l", "m", "k", "x"]


def pseudo_words(rng, n, taken):
    stops = default_stopwords()
    out = []
    stems = {stem(w) for w in taken}
    while len(out) < n:
        w = "".join(rng.choice(ONSETS) + rng.choice(VOWELS) + rng.choice(CODAS) for _ in range(rng.choice([2, 3])))
        if len(w) < 5 or w in stops or stem(w) in stems:
            continue
        stems.add(stem(w))
        out.append(w)
    return out


def build(rng):
    taken = {w for t in THEMES for w in t} | set(VERBS) | set(FILLERS)
    names = pseudo_words(rng, N_THEMES * PER_THEME * 4, taken)
    articles = []
    for t in range(N_THEMES):
        for j in range(PER_THEME):
            i = t * PER_THEME + j
            k1, k2, a1, a2 = names[4 * i: 4 * i + 4]
            theme = THEMES[t]
            verb = rng.choice(VERBS)
            slug = f"{k1}-{verb}-{theme[0]}-{k2}"
            articles.append({
                "url": f"https://www.snopes.com/fact-check/{slug}/",
                "title": f"Did {k1.title()} {VERB_BASE[verb]} the {theme[0]} {k2.title()}?",
                "subtitle": f"A viral post claimed {k1.title()} {verb} a {theme[1]} plan tied to {k2.title()}.",
                "claim": f"{k1.title()} {verb} the {theme[0]} {k2.title()} {theme[2]}.",
                "date": f"2021-{1 + i % 12:02d}-{1 + i % 28:02d}",
                "author": "Mini Corpus Desk",
                "_keys": [k1, k2],
                "_alias": [a1, a2],
                "_theme": t,
                "_verb": verb,
            })
    return articles


def claim_text(rng, art, aliased, distractor=None):
    """A claim-style tweet about ``art`` naming entity ``i`` by its alias when ``aliased[i]``."""
    theme = THEMES[art["_theme"]]
    ents = [a if al else k for k, a, al in zip(art["_keys"], art["_alias"], aliased)]
    words = [ents[0].title(), rng.choice([art["_verb"], rng.choice(VERBS)]), "the", rng.choice(theme), ents[1].title()]
    if distractor is not None:
        words += ["just", "like", distractor.title()]
    words += rng.sample(FILLERS, 2)
    tail = rng.choice(["!!", "?", ".", " #" + theme[0]])
    return " ".join(words) + tail


def main(outdir):
    rng = random.Random(SEED)
    articles = build(rng)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)

    tweets = []
    next_id = [1400000000000000000]

    def new_id():
        next_id[0] += rng.randint(1000, 99999)
        return str(next_id[0])

    # each article gets two conversations, aliasing a different entity in each
    order = [(i, r) for i in range(len(articles)) for r in range(2)]
    rng.shuffle(order)
    for n, (ai, r) in enumerate(order[:N_CONVERSATIONS]):
        art = articles[ai]
        linked = art
        if rng.random() < NOISE:
            linked = articles[rng.choice([k for k in range(len(articles)) if k != ai])]
        root_id = new_id()
        has_root = rng.random() < 0.7
        claim_id = new_id()
        if has_root:
            theme = THEMES[art["_theme"]]
            tweets.append({"id": root_id, "text": f"{rng.choice(FILLERS).title()} what is going on with the {theme[1]} "
                           f"{art['_alias'][1 - r].title()} story",
                           "in_reply_to": None, "conversation_root": root_id, "urls": []})
        conv = root_id if has_root else claim_id
        tweets.append({"id": claim_id, "text": claim_text(rng, art, (r == 0, r == 1)),
                       "in_reply_to": root_id if has_root else None, "conversation_root": conv, "urls": []})
        fc_id = new_id()
        tweets.append({"id": fc_id, "text": f"@user{n} {rng.choice(FC_REPLIES)} {linked['url']}",
                       "in_reply_to": claim_id, "conversation_root": conv, "urls": [linked["url"]]})
    with open(out / "tweets.jsonl", "w", encoding="utf-8") as fh:
        for t in tweets:
            fh.write(json.dumps(t) + "\n")

    with open(out / "articles.jsonl", "w", encoding="utf-8") as fh:
        for a in articles:
            fh.write(json.dumps({k: v for k, v in a.items() if not k.startswith("_")}) + "\n")

    targets = rng.sample(range(len(articles)), sum(SPLITS.values()))
    qn = 0
    queries = []
    for split, size in SPLITS.items():
        rows = []
        for ai in targets[qn: qn + size]:
            art = articles[ai]
            qid = f"q{qn + 1:03d}"
            t = art["_theme"]
            distractor = None
            if qn % 2 == 0:
                other = articles[t * PER_THEME + rng.choice([j for j in range(PER_THEME) if t * PER_THEME + j != ai])]
                distractor = rng.choice(other["_keys"])
            queries.append((qid, claim_text(rng, art, (True, True), distractor)))
            rows.append(f"{qid}\t0\t{canonical_url(art['url'])}\t1")
            qn += 1
        (out / f"qrels_{split}.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    with open(out / "queries.tsv", "w", encoding="utf-8") as fh:
        for qid, text in queries:
            fh.write(f"{qid}\t{text}\n")
    print(f"wrote {len(articles)} articles, {len(tweets)} tweets, {len(queries)} queries to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/factmatch/data/minicorpus")
