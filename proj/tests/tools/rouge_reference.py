#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes tests/data/rouge_reference.tsv.

Sentence-level ROUGE-L F1 (beta = 1) computed independently of the C++ code:
ASCII lowercase, ASCII punctuation removed, whitespace tokens, LCS by
memoized recursion, best F1 over the references (first one wins ties).

Columns: candidate, references joined by " ||| ", precision, recall, f1.
"""
import functools
import string
import sys

CASES = [
    ("the cat sat", ["the cat"]),
    ("the cat", ["the cat sat"]),
    ("The Cat, sat!", ["the cat sat"]),
    ("", ["anything here"]),
    ("something", [""]),
    ("", [""]),
    ("a b c d e", ["e d c b a"]),
    ("a b a b", ["b a b a"]),
    ("police killed the gunman", ["the gunman killed police"]),
    ("police kill the gunman", ["police killed the gunman"]),
    ("the the the", ["the"]),
    ("x y z", ["a b", "y z", "x"]),
    ("x y z", ["x y", "y z"]),
    ("one two three four", ["four three two one", "one three", "two four"]),
    ("don't stop-believing", ["dont stopbelieving"]),
    ("Hello,   WORLD", ["hello world", "world"]),
    ("a b c d e f g h", ["a c e g", "b d f h z"]),
    ("when did the bridge open", ["when did the bridge open to traffic"]),
    ("positive", ["negative", "positive"]),
    ("t1w4 t1w9 t1w4", ["t1w4 t1w4 t1w9", "t1w9"]),
]


def normalize(text):
    kept = "".join(c for c in text if c not in string.punctuation)
    lowered = "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in kept)
    return lowered.split()


def lcs(a, b):
    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def score(candidate, reference):
    c, r = normalize(candidate), normalize(reference)
    n = lcs(tuple(c), tuple(r))
    p = n / len(c) if c else 0.0
    rec = n / len(r) if r else 0.0
    f = 2 * p * rec / (p + rec) if p + rec > 0 else 0.0
    return p, rec, f


def main():
    out = sys.stdout
    out.write("# candidate\treferences\tprecision\trecall\tf1\n")
    for cand, refs in CASES:
        best = None
        for ref in refs:
            s = score(cand, ref)
            if best is None or s[2] > best[2]:
                best = s
        p, r, f = best
        out.write(f"{cand}\t{' ||| '.join(refs)}\t{p!r}\t{r!r}\t{f!r}\n")


if __name__ == "__main__":
    main()
