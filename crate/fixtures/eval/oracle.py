#!/usr/bin/env python3
"""Brute-force recomputation of the metrics over pairs.jsonl, written to
expected.json. Shares no code with the library: its own lexer, its own
Levenshtein and plain loops for every aggregate."""
import json
import math
import struct
from collections import Counter
from pathlib import Path

HERE = Path(__file__).resolve().parent

OPS = [">>>=", "<<=", ">>=", ">>>", "**", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
       "/=", "%=", "|=", "&=", "^=", "<<", ">>", "=>", "->", ":="]
GLOBALS = {"msg", "block", "tx", "abi"}
VOCAB = ["require", "msg.sender", "msg.value", "revert", "assert", "emit", "return", "if", "else", "for",
         "while", "mapping", "memory", "storage", "public", "external", "view", "payable", "uint256", "address"]


def word_char(c):
    return c.isascii() and (c.isalnum() or c in "_$")


def lex(s):
    toks, i, n = [], 0, len(s)
    while i < n:
        c = s[i]
        if c.isspace():
            i += 1
        elif s.startswith("//", i):
            j = s.find("\n", i)
            i = n if j < 0 else j
        elif s.startswith("/*", i):
            j = s.find("*/", i + 2)
            if j < 0:
                break
            i = j + 2
        elif c in "\"'":
            j = i + 1
            while j < n and s[j] != "\n":
                if s[j] == "\\":
                    j += 2
                    continue
                if s[j] == c:
                    j += 1
                    break
                j += 1
            j = min(j, n)
            toks.append(s[i:j])
            i = j
        elif c in "0123456789":
            j = i
            while j < n and (word_char(s[j]) and s[j] != "$" or s[j] == "."):
                j += 1
            toks.append(s[i:j])
            i = j
        elif word_char(c) and c not in "0123456789":
            j = i
            while j < n and word_char(s[j]):
                j += 1
            if s[i:j] in GLOBALS and j + 1 < n and s[j] == "." and word_char(s[j + 1]) and not s[j + 1].isdigit():
                j += 1
                while j < n and word_char(s[j]):
                    j += 1
            toks.append(s[i:j])
            i = j
        else:
            op = next((o for o in OPS if s.startswith(o, i)), c)
            toks.append(op)
            i += len(op)
    return toks


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit(a, b):
    m = max(len(a), len(b))
    return 0.0 if m == 0 else levenshtein(a, b) / m


def grams(s):
    t = lex(s)
    c = Counter((1, x) for x in t)
    c.update((2, t[k], t[k + 1]) for k in range(len(t) - 1))
    return c


def sim(a, b):
    va, vb = grams(a), grams(b)
    if not va or not vb:
        return 1.0 if not va and not vb else 0.0
    if va == vb:
        return 1.0
    dot = sum(float(v * vb[k]) for k, v in va.items() if k in vb)
    na = math.sqrt(sum(float(v * v) for v in va.values()))
    nb = math.sqrt(sum(float(v * v) for v in vb.values()))
    return min(1.0, max(0.0, dot / (na * nb)))


def bits(x):
    return None if x is None else struct.unpack("<Q", struct.pack("<d", x))[0]


def cdf(xs):
    xs = sorted(xs)
    out = []
    for i, x in enumerate(xs):
        frac = (i + 1) / len(xs)
        if out and out[-1][0] == x:
            out[-1][1] = frac
        else:
            out.append([x, frac])
    return out


def main():
    rows = [json.loads(line) for line in open(HERE / "pairs.jsonl", encoding="utf-8")]
    eds, sims, diffs = [], [], []
    for r in rows:
        eds.append(edit(r["reference"], r["candidate"]))
        sims.append(sim(r["reference"], r["candidate"]))
        diffs.append(len(r["candidate"]) - len(r["reference"]))
    n = len(rows)
    mean = 0.0
    for d in diffs:
        mean += float(d)
    mean /= n
    var = 0.0
    for d in diffs:
        var += (d - mean) * (d - mean)
    std = math.sqrt(var / n)

    mx = sum(eds) / n
    my = sum(sims) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(eds, sims))
    sxx = sum((x - mx) ** 2 for x in eds)
    syy = sum((y - my) ** 2 for y in sims)
    r = None if sxx == 0 or syy == 0 else sxy / (math.sqrt(sxx) * math.sqrt(syy))

    def count(texts):
        c = {v: 0 for v in VOCAB}
        for t in texts:
            for tok in lex(t):
                if tok in c:
                    c[tok] += 1
        return c

    out = {
        "pairs": n,
        "edit_distance": eds,
        "semantic_similarity": sims,
        "len_diff": diffs,
        "median": sorted(diffs)[(n - 1) // 2],
        "std_bits": bits(std),
        "std": std,
        "frac_within_50": sum(1 for d in diffs if abs(d) <= 50) / n,
        "min": min(diffs),
        "max": max(diffs),
        "edit_lt_04": sum(1 for e in eds if e < 0.4) / n,
        "sim_gt_07": sum(1 for s in sims if s > 0.7) / n,
        "sim_gt_08": sum(1 for s in sims if s > 0.8) / n,
        "sim_gt_09": sum(1 for s in sims if s > 0.9) / n,
        "correlation": r,
        "edit_cdf": cdf(eds),
        "sim_cdf": cdf(sims),
        "token_freq_ref": count(r["reference"] for r in rows),
        "token_freq_out": count(r["candidate"] for r in rows),
    }
    with open(HERE / "expected.json", "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
