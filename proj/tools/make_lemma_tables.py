#!/usr/bin/env python3
"""Regenerate data/lemmas/{base,extended}.tsv from the lemminflect dictionary.

base.tsv maps an inflected token to one lemma (verb reading first, then
noun, adjective, adverb). extended.tsv maps a token to every lemma it can
have under any part of speech, including derivational pairs of the
keyword vocabulary listed below.
"""
import pathlib
import re
import sys

from lemminflect import Lemmatizer

PRIORITY = ["VERB", "NOUN", "ADJ", "ADV", "PROPN", "AUX"]
WORD = re.compile(r"^[a-z]+(?:'[a-z]+)?$")

# Related forms of the keyword vocabulary that share no inflectional lemma.
DERIVED = {
    "scientific": ["science", "scientist"],
    "science": ["scientist", "scientific"],
    "scientists": ["science"],
    "scientist": ["science"],
    "bankruptcy": ["bankrupt"],
    "bankruptcies": ["bankrupt", "bankruptcy"],
    "communist": ["communism"],
    "communists": ["communism", "communist"],
    "capitalist": ["capitalism"],
    "capitalists": ["capitalism", "capitalist"],
    "cultural": ["culture"],
    "biblical": ["bible"],
    "saintly": ["saint"],
    "priestly": ["priest"],
    "mineralogy": ["mineral"],
    "planetary": ["planet"],
    "meteoric": ["meteor"],
    "meteorite": ["meteor"],
    "meteorites": ["meteor", "meteorite"],
    "microscopic": ["microscope"],
    "massive": ["mass"],
    "transcribed": ["transcript", "transcribe"],
}


def main(out_dir: pathlib.Path) -> None:
    table = Lemmatizer()._getLemmaDict()
    base, extended = {}, {}
    for token, by_pos in table.items():
        if not WORD.match(token):
            continue
        lemmas = []
        for pos in PRIORITY + sorted(set(by_pos) - set(PRIORITY)):
            for lemma in by_pos.get(pos, ()):
                lemma = lemma.lower()
                if WORD.match(lemma) and lemma not in lemmas:
                    lemmas.append(lemma)
        if not lemmas:
            continue
        if lemmas[0] != token:
            base[token] = lemmas[0]
        if len(lemmas) > 1 or lemmas[0] != token:
            extended[token] = set(lemmas) | {token}
    for token, related in DERIVED.items():
        extended.setdefault(token, {base.get(token, token), token}).update(related)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "base.tsv", "w", encoding="utf-8") as f:
        f.write("# token<TAB>lemma\n")
        for token in sorted(base):
            f.write(f"{token}\t{base[token]}\n")
    with open(out_dir / "extended.tsv", "w", encoding="utf-8") as f:
        f.write("# token<TAB>lemma1,lemma2,...\n")
        for token in sorted(extended):
            f.write(f"{token}\t{','.join(sorted(extended[token]))}\n")


if __name__ == "__main__":
    main(pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/lemmas"))
