#!/usr/bin/env python3
"""Build the bundled trigram language profiles.

Source corpus: the character n-gram frequency tables shipped with the
`langdetect` 1.0.9 package (Apache-2.0), computed from Wikipedia abstracts.
Trigrams are case-folded, restricted to the shape produced by the detector's
text extractor (letters, with spaces only as word-boundary padding), and the
300 most frequent are written with dense ranks.

    pip download --no-deps langdetect==1.0.9
    tar xzf langdetect-1.0.9.tar.gz
    python3 tools/build_profiles.py langdetect-1.0.9/langdetect/profiles \
        crates/core/data/profiles
"""
import json
import sys
from collections import Counter
from pathlib import Path

LANGUAGES = {
    "eng": "en",
    "deu": "de",
    "fra": "fr",
    "spa": "es",
    "por": "pt",
    "ita": "it",
    "nld": "nl",
    "rus": "ru",
    "cmn": "zh-cn",
}
TOP = 300


def admissible(gram: str) -> bool:
    if len(gram) != 3 or gram[1] == " ":
        return False
    return all(c == " " or c.isalpha() for c in gram)


def main(src: Path, dst: Path) -> None:
    dst.mkdir(parents=True, exist_ok=True)
    for tag, code in LANGUAGES.items():
        freq = json.loads((src / code).read_text(encoding="utf-8"))["freq"]
        counts = Counter()
        for gram, n in freq.items():
            gram = gram.lower()
            if admissible(gram):
                counts[gram] += n
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:TOP]
        lines = [
            f"# language: {tag}",
            f"# source: langdetect 1.0.9 profile '{code}' (Wikipedia abstracts, Apache-2.0)",
        ]
        lines += [f"{gram}\t{rank}" for rank, (gram, _) in enumerate(ranked)]
        (dst / f"{tag}.tri").write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(tag, len(ranked))


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
