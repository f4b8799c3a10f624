#!/usr/bin/env python3
"""Reference values computed outside the C++ code base.

NFC cases come from Python's unicodedata; FNV-1a 64 values from a direct
transcription of the published algorithm.
"""

import json
import sys
import unicodedata
from pathlib import Path

NFC_INPUTS = [
    "ä",
    "München und Köln",
    "  Straße \t  und Weg  ",
    "Öffentlichkeit  trägt",
    "ȩ́",
    "Å",
    "",
    "   ",
]

FNV_INPUTS = ["", "a", "foobar", "Der Hund läuft.", "\u0002Ha", "sentcx"]


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests/data"
    nfc = [{"input": s, "nfc": unicodedata.normalize("NFC", s),
            "normalized": " ".join(unicodedata.normalize("NFC", s).split()),
            "length": len(" ".join(unicodedata.normalize("NFC", s).split()))} for s in NFC_INPUTS]
    fnv = [{"input": s, "hash": format(fnv1a64(s.encode("utf-8")), "016x")} for s in FNV_INPUTS]
    doc = {"nfc": nfc, "fnv1a64": fnv}
    (out / "reference_vectors.json").write_text(json.dumps(doc, indent=2, ensure_ascii=True) + "\n")


if __name__ == "__main__":
    main()
