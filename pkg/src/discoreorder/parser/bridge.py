"""File bridge to external continuous parsers.

The reordered sentences go out as one space-separated token line each; the
parser's answer comes back as one bracket tree per line, in the same order.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

from ..treebank import Corpus, Sentence, TreebankError, escape, read_tree


def bridge_write(sentences: Sequence[Sentence], path) -> None:
    Path(path).write_text("".join(" ".join(escape(f) for f in s.forms) + "\n" for s in sentences),
                          encoding="utf-8")


def bridge_read(path, sentences: Sequence[Sentence], ids: Sequence[str] | None = None) -> Corpus:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if len(lines) != len(sentences):
        raise TreebankError(f"{path}: {len(lines)} trees for {len(sentences)} sentences")
    ids = list(ids) if ids is not None else [str(k + 1) for k in range(len(sentences))]
    entries = []
    for k, (line, sent) in enumerate(zip(lines, sentences)):
        try:
            tree = read_tree(line, "bracket")
        except TreebankError as e:
            raise TreebankError(str(e), sentence_id=ids[k], line=k + 1) from None
        if tree.n != sent.n:
            raise TreebankError(f"tree has {tree.n} terminals, sentence has {sent.n}",
                                sentence_id=ids[k], line=k + 1)
        if tree.sentence.forms != sent.forms:
            raise TreebankError("tree terminals differ from the sentence tokens",
                                sentence_id=ids[k], line=k + 1)
        # keep the caller's tokens (tags and export columns survive the round trip)
        entries.append((ids[k], tree.with_sentence(sent)))
    return Corpus(tuple(entries))
