#!/usr/bin/env python3
"""Generate the synthetic German-like fixture used by the tests.

Writes corpus files in both supported formats, a labeled train/test split
whose scores follow mos = clamp(1 + 0.02 * char_len + noise), an example run
configuration, and expected.json with independently computed counts.

Usage: make_fixture.py [output_dir]
"""

import json
import random
import sys
import unicodedata
from pathlib import Path

SEED = 20240917
CORPUS_DISTINCT = 5000
N_TRAIN = 200
N_TEST = 60
N_PLANTED = 10
N_EXACT_DUPS = 60
N_WS_DUPS = 25
N_NFD_DUPS = 15

ARTICLES = ["der", "die", "das", "ein", "eine", "dieser", "jede", "unser", "kein"]
NOUNS = [
    "Hund", "Katze", "Stadt", "Regierung", "Forschung", "Wasser", "Meer", "Schule", "Kind", "Zeitung",
    "Wirtschaft", "Gesellschaft", "Universität", "Straße", "Brücke", "Krankenhaus", "Bürgermeisterin",
    "Entwicklung", "Verwaltung", "Umwelt", "Klimawandel", "Energie", "Bevölkerung", "Geschichte", "Fluss",
    "Wald", "Berg", "Vogel", "Bäckerei", "Mannschaft", "Wissenschaftlerin", "Behörde", "Gemeinde", "Zug",
    "Haus", "Garten", "Buch", "Lehrer", "Ärztin", "Versauerung", "Kohlenstoffdioxid", "Untersuchung",
    "Verfassung", "Ausstellung", "Gebäude", "Landwirtschaft", "Verkehr", "Öffentlichkeit", "Grundschule",
    "Hochwasser", "Insel", "Sprache", "Wörterbuch", "Maßnahme", "Größe", "Übersetzung", "Tier", "Freund",
]
VERBS = [
    "läuft", "beschreibt", "untersucht", "verändert", "erklärt", "baut", "liest", "findet", "schützt",
    "beeinflusst", "berichtet", "gründet", "verbessert", "fördert", "kritisiert", "beobachtet", "trägt",
    "verwaltet", "überprüft", "entwickelt", "öffnet", "schließt", "hilft", "spielt", "wächst", "fährt",
]
ADJECTIVES = [
    "große", "kleine", "neue", "alte", "wichtige", "schnelle", "langsame", "öffentliche", "politische",
    "wissenschaftliche", "historische", "regionale", "internationale", "umfangreiche", "schöne", "grüne",
    "gefährliche", "nachhaltige", "wirtschaftliche", "bekannte", "schwierige", "einfache", "heiße", "kühle",
]
ADVERBS = [
    "heute", "gestern", "oft", "selten", "schnell", "langsam", "deutlich", "vermutlich", "gemeinsam",
    "zunehmend", "außerdem", "dennoch", "inzwischen", "ebenfalls", "gern", "morgen", "immer", "besonders",
]
SUBORDINATORS = ["weil", "obwohl", "während", "nachdem", "sodass", "da", "wenn", "bevor"]
PREPOSITIONS = ["in", "mit", "nach", "bei", "über", "für", "gegen", "ohne", "durch", "unter"]
PLACES = ["Berlin", "Hamburg", "München", "Köln", "Leipzig", "Bremen", "Dresden", "Zürich", "Wien", "Kiel"]

# (source tag, file name, format, share of the corpus, clause range, words per clause range)
SOURCES = [
    ("wikipedia", "wikipedia.txt", "plain-lines", 0.30, (2, 4), (5, 9)),
    ("zeit-online", "zeit_online.jsonl", "jsonl", 0.12, (2, 3), (5, 8)),
    ("news", "news.txt", "plain-lines", 0.18, (1, 3), (5, 8)),
    ("geo-tagesschau", "geo_tagesschau.jsonl", "jsonl", 0.10, (1, 3), (4, 7)),
    ("simple-german", "simple_german.txt", "plain-lines", 0.12, (1, 1), (4, 7)),
    ("klexikon", "klexikon.txt", "plain-lines", 0.10, (1, 2), (4, 6)),
    ("hurraki", "hurraki.jsonl", "jsonl", 0.08, (1, 1), (3, 5)),
]


def clause(rng, n_words):
    words = [rng.choice(ARTICLES), rng.choice(ADJECTIVES), rng.choice(NOUNS), rng.choice(VERBS)]
    while len(words) < n_words:
        r = rng.random()
        if r < 0.3:
            words += [rng.choice(PREPOSITIONS), rng.choice(ARTICLES), rng.choice(NOUNS)]
        elif r < 0.45:
            words += [rng.choice(PREPOSITIONS), rng.choice(PLACES)]
        elif r < 0.55:
            words.append(str(rng.randint(2, 2024)))
        elif r < 0.8:
            words.append(rng.choice(ADVERBS))
        else:
            words += [rng.choice(ADJECTIVES), rng.choice(NOUNS)]
    return words


def sentence(rng, clauses, words):
    parts = []
    for i in range(rng.randint(*clauses)):
        c = clause(rng, rng.randint(*words))
        if i > 0:
            c = [rng.choice(SUBORDINATORS)] + c
        parts.append(" ".join(c))
    text = ", ".join(parts) + "."
    return text[0].upper() + text[1:]


def normalize(raw):
    return " ".join(unicodedata.normalize("NFC", raw).split())


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests/data/fixture"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)

    seen = set()
    per_source = {tag: [] for tag, *_ in SOURCES}
    quotas = [round(share * CORPUS_DISTINCT) for _, _, _, share, _, _ in SOURCES]
    quotas[0] += CORPUS_DISTINCT - sum(quotas)

    def fresh(spec):
        while True:
            s = sentence(rng, spec[4], spec[5])
            if s not in seen:
                seen.add(s)
                return s

    for spec, quota in zip(SOURCES, quotas):
        for _ in range(quota):
            per_source[spec[0]].append(fresh(spec))

    # Labeled sentences come from the same generator; a few also sit in the
    # corpus verbatim so exclusion has something to remove.
    labeled = []
    weights = [s[3] for s in SOURCES]
    while len(labeled) < N_TRAIN + N_TEST - N_PLANTED:
        spec = rng.choices(SOURCES, weights)[0]
        labeled.append(fresh(spec))
    planted = []
    for tag in rng.sample([s[0] for s in SOURCES], 5) * 2:
        planted.append(rng.choice(per_source[tag]))
    planted = list(dict.fromkeys(planted))
    while len(planted) < N_PLANTED:
        tag = rng.choice([s[0] for s in SOURCES])
        cand = rng.choice(per_source[tag])
        if cand not in planted:
            planted.append(cand)
    labeled += planted
    rng.shuffle(labeled)

    # Raw lines per source, with duplicates that survive only until
    # normalization or dedup.
    raw = {tag: list(sents) for tag, sents in per_source.items()}
    tags = [s[0] for s in SOURCES]
    for _ in range(N_EXACT_DUPS):
        tag = rng.choice(tags)
        raw[tag].insert(rng.randint(0, len(raw[tag])), rng.choice(per_source[rng.choice(tags)]))
    for _ in range(N_WS_DUPS):
        tag = rng.choice(tags)
        s = rng.choice(per_source[tag]).split(" ")
        i = rng.randint(1, len(s) - 1)
        variant = "  " + " ".join(s[:i]) + " \t " + " ".join(s[i:]) + " "
        raw[tag].append(variant)
    nfd_done = 0
    while nfd_done < N_NFD_DUPS:
        tag = rng.choice(tags)
        s = rng.choice(per_source[tag])
        d = unicodedata.normalize("NFD", s)
        if d != s:
            raw[tag].append(d)
            nfd_done += 1

    total_records = {}
    for tag, fname, fmt, *_ in SOURCES:
        lines = raw[tag]
        path = out / fname
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for i, s in enumerate(lines):
                if fmt == "plain-lines":
                    if i % 97 == 0:
                        f.write("\n")
                    f.write(s + "\n")
                else:
                    rec = {"text": s}
                    if i % 5 == 0:
                        rec["id"] = 100000 + i
                    f.write(json.dumps(rec, ensure_ascii=False) + "\n")
            if fmt == "jsonl":
                f.write(json.dumps({"text": "   "}, ensure_ascii=False) + "\n")
        total_records[tag] = sum(1 for s in lines if normalize(s))

    all_norm = []
    for tag, *_ in SOURCES:
        all_norm += [normalize(s) for s in raw[tag] if normalize(s)]

    def score(text):
        v = 1.0 + 0.02 * len(text) + rng.gauss(0.0, 0.3)
        return round(min(7.0, max(1.0, v)), 2)

    rows = []
    for i, text in enumerate(labeled):
        rows.append((i + 1, text, score(text), round(rng.uniform(0.3, 1.0), 2)))
    train, test = rows[:N_TRAIN], rows[N_TRAIN:]

    def write_tsv(path, data):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("id\ttext\tmos\trating_std\n")
            for r in data:
                f.write(f"{r[0]}\t{r[1]}\t{r[2]:.2f}\t{r[3]:.2f}\n")

    write_tsv(out / "train.tsv", train)
    write_tsv(out / "test.tsv", test)

    config = {
        "output_dir": "run",
        "corpora": [{"path": f, "source": t, "format": fm} for t, f, fm, *_ in SOURCES],
        "labeled": {"train": "train.tsv", "test": "test.tsv", "default_rating_std": 0.5},
        "retrieval": {"k": 500},
        "hyper": {
            "baseline_lambda": 1.0,
            "pseudo": {"learning_rate": 0.2, "max_epochs": 5, "ridge_lambda": 1.0},
            "fine_tune": {"learning_rate": 0.2, "max_epochs": 20, "early_stopping": False, "ridge_lambda": 1.0},
        },
        "seeds": [1, 2, 3],
        "cv": {"n_folds": 5, "fold_seed": 2024},
        "setting": "ensemble_stacker",
        "flags": {"exclude_labeled": True, "shared_pseudo_labels": False, "stacker_columns": "per_model"},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    expected = {
        "total_sentences": len(all_norm),
        "distinct_sentences": len(set(all_norm)),
        "per_source_counts": total_records,
        "planted_labeled_in_corpus": len(set(planted)),
        "train_rows": len(train),
        "test_rows": len(test),
    }
    (out / "expected.json").write_text(json.dumps(expected, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
