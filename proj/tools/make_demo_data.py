#!/usr/bin/env python3
"""Regenerates the bundled demo files under data/. Output is fixed by the seed."""

import argparse
import pathlib
import random

POSITIVE = ["zwin", "mlih", "ghaya", "nheb", "hamdoullah", "3jbni", "mabrouk", "top", "sa7a", "farhan",
            "mzyan", "bravo"]
NEGATIVE = ["khayeb", "ma3jbnich", "mrid", "zaaf", "7ram", "wa3er", "ghali", "3yit", "kerht", "ma7gour",
            "chkoupi", "diqa"]
NEUTRAL = ["rani", "ghodwa", "fel", "dar", "khedma", "wa9t", "sa3a", "tobis", "lyoum", "nro7", "jay",
           "ki9oul", "ndir", "3andi", "hna", "lbareh", "derwek", "dzayer", "wahran", "sou9", "9ahwa",
           "ya3ni", "bessah", "kifach", "win", "wesh", "khoya", "sahbi", "bezaf", "chwiya", "kima", "m3a"]
HANDLES = ["@karim_dz", "@amina213", "@dzair_news", "@sofiane_b", "@lyna_oran"]
EMAILS = ["karim.b@gmail.com", "contact@dz-shop.dz", "amina_21@yahoo.fr"]
LINKS = ["https://t.co/Ab12Cd", "http://dzair.tv/live?id=4", "https://youtu.be/x9Yz"]


def sentence(rng, polar=None, n=None):
    n = n or rng.randint(4, 10)
    words = [rng.choice(NEUTRAL) for _ in range(n)]
    if polar:
        for _ in range(rng.randint(1, 2)):
            words.insert(rng.randrange(len(words) + 1), rng.choice(polar))
    return words


def demo_corpus(rng, count):
    lines = []
    while len(lines) < count:
        kind = rng.random()
        if kind < 0.03 and lines:
            lines.append(rng.choice(lines))  # duplicate
            continue
        if kind < 0.06:
            lines.append(" ".join(rng.choice(NEUTRAL) for _ in range(rng.randint(1, 2))))  # too short
            continue
        words = sentence(rng, rng.choice([POSITIVE, NEGATIVE, None]))
        if rng.random() < 0.15:
            words.insert(0, rng.choice(HANDLES))
        if rng.random() < 0.05:
            words.append(rng.choice(EMAILS))
        if rng.random() < 0.08:
            words.append(rng.choice(LINKS))
        lines.append(" ".join(words))
    return lines


def demo_labeled(rng, count):
    rows = []
    classes = [("positive", POSITIVE), ("negative", NEGATIVE), ("neutral", None)]
    for i in range(count):
        label, polar = classes[i % 3]
        rows.append(f"{label}\t{' '.join(sentence(rng, polar))}")
    rng.shuffle(rows)
    return rows


def overfit_corpus(rng):
    letters = "abcdefghijklmnoprstuwyz"
    vocab = set()
    while len(vocab) < 32 * 6:
        vocab.add("".join(rng.choice(letters) for _ in range(rng.randint(3, 6))))
    words = sorted(vocab)
    rng.shuffle(words)
    return [" ".join(words[i * 6:(i + 1) * 6]) for i in range(32)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=2021)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    (out / "demo_corpus.txt").write_text("\n".join(demo_corpus(rng, 500)) + "\n", encoding="utf-8")
    (out / "demo_labeled.tsv").write_text("\n".join(demo_labeled(rng, 240)) + "\n", encoding="utf-8")
    (out / "overfit_corpus.txt").write_text("\n".join(overfit_corpus(rng)) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
