#!/usr/bin/env python3
"""Writes pairs.jsonl: 200 (reference, candidate) pairs built from the
fixture contracts' functions with seeded edits."""
import json
import random
import re
from pathlib import Path

HERE = Path(__file__).resolve().parent
CONTRACTS = HERE.parent / "contracts"


def functions(src):
    out = []
    for m in re.finditer(r"\b(function\s+\w+|fallback|receive|constructor)\s*\(", src):
        open_ = src.find("{", m.end())
        semi = src.find(";", m.end())
        if open_ < 0 or (0 <= semi < open_):
            continue
        depth = 0
        for j in range(open_, len(src)):
            if src[j] == "{":
                depth += 1
            elif src[j] == "}":
                depth -= 1
                if depth == 0:
                    out.append(src[m.start():j + 1])
                    break
    return out


def rename(rng, text):
    names = sorted(set(re.findall(r"\b_?[a-z][A-Za-z]{2,}\b", text)))
    if not names:
        return text
    old = rng.choice(names)
    return re.sub(rf"\b{old}\b", f"var{rng.randrange(100)}", text)


def drop_line(rng, text):
    lines = text.split("\n")
    if len(lines) < 3:
        return text + "\n"
    del lines[rng.randrange(1, len(lines) - 1)]
    return "\n".join(lines)


def add_lines(rng, text):
    extra = "\n".join(
        f"        require(msg.sender != address({rng.randrange(1000)}), \"guard {i}\");"
        for i in range(rng.randrange(1, 6))
    )
    head, _, tail = text.partition("{")
    return f"{head}{{\n{extra}{tail}"


def reflow(rng, text):
    return re.sub(r"\s+", " ", text) if rng.random() < 0.5 else text.replace("    ", "\t")


def swap_ops(rng, text):
    pairs = [("+", "-"), ("<", ">"), ("==", "!="), ("&&", "||")]
    a, b = rng.choice(pairs)
    return text.replace(a, b)


def truncate(rng, text):
    return text[: rng.randrange(len(text) // 4, len(text) // 2 + 1)]


def comment(rng, text):
    note = rng.choice(["// décompilé", "// 反编译 output", "/* generated */", "// ok"])
    return f"{note}\n{text}"


EDITS = [rename, drop_line, add_lines, reflow, swap_ops, truncate, comment]


def main():
    rng = random.Random(20240611)
    corpus = []
    for path in sorted(CONTRACTS.glob("*.sol")):
        corpus += functions(path.read_text())
    rows = []
    for i in range(200):
        ref = rng.choice(corpus)
        roll = rng.random()
        if roll < 0.1:
            cand = ref
        elif roll < 0.15:
            cand = rng.choice(corpus)
        elif roll < 0.17:
            cand = ""
        else:
            cand = ref
            for _ in range(rng.randrange(1, 4)):
                cand = rng.choice(EDITS)(rng, cand)
        rows.append({"id": f"pair-{i:03}", "reference": ref, "candidate": cand})
    with open(HERE / "pairs.jsonl", "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
