#!/usr/bin/env python3
"""Writes reference.tsv, the Shanghai opcode listing, from pyevmasm's
Istanbul table plus the later forks' changes:

  London    0x48 BASEFEE added
  Paris     0x44 DIFFICULTY renamed PREVRANDAO
  Shanghai  0x5f PUSH0 added

0x20 is spelled KECCAK256 and 0x58 PC (pyevmasm: SHA3, GETPC) as in
current client listings, and CREATE2 pops
four words (value, offset, size, salt); pyevmasm 0.2.3 lists three.
Requires `pip install pyevmasm`."""
from pathlib import Path

from pyevmasm import evmasm

RENAME = {0x20: "KECCAK256", 0x44: "PREVRANDAO", 0x58: "PC"}
ADD = {0x48: ("BASEFEE", 0, 1), 0x5F: ("PUSH0", 0, 1)}
FIX = {0xF5: ("CREATE2", 4, 1)}


def main():
    table = evmasm.instruction_tables["istanbul"]
    rows = {}
    for b in range(256):
        try:
            ins = table[b]
        except KeyError:
            continue
        rows[b] = (RENAME.get(b, ins.name), ins.pops, ins.pushes)
    rows.update(ADD)
    rows.update(FIX)
    out = Path(__file__).resolve().parent / "reference.tsv"
    with open(out, "w") as f:
        for b in sorted(rows):
            name, pops, pushes = rows[b]
            f.write(f"0x{b:02x}\t{name}\t{pops}\t{pushes}\n")


if __name__ == "__main__":
    main()
