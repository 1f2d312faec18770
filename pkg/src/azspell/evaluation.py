"""Accuracy within edit distance d, and a dictionary-lookup baseline."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from itertools import zip_longest
from typing import Iterable, Sequence

from .corruptor import SentencePair
from .editdist import damerau_levenshtein, levenshtein
from .pipeline import greedy_decode_batch

GRANULARITIES = ("word", "sentence")


@dataclass(frozen=True)
class EvalRecord:
    input: str
    prediction: str
    gold: str
    distance: int


@dataclass
class EvalReport:
    n_examples: int
    accuracy_at: dict[int, float]
    records: list[EvalRecord] = field(default_factory=list)

    def to_tsv(self, label: str | None = None, records: bool = True) -> str:
        buf = io.StringIO()
        if label:
            buf.write(f"# {label}\n")
        buf.write("d\taccuracy\n")
        for d, acc in sorted(self.accuracy_at.items()):
            buf.write(f"{d}\t{acc:.6f}\n")
        if records:
            buf.write("\ninput\tprediction\tgold\tdistance\n")
            for r in self.records:
                buf.write(f"{r.input}\t{r.prediction}\t{r.gold}\t{r.distance}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class Dictionary:
    counts: dict[str, int]

    def __post_init__(self):
        if not self.counts:
            raise ValueError("dictionary is empty")

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Dictionary":
        counts: dict[str, int] = {}
        for w in words:
            counts[w] = counts.get(w, 0) + 1
        return cls(counts)

    def __contains__(self, word: str) -> bool:
        return word in self.counts

    def __len__(self) -> int:
        return len(self.counts)


def load_dictionary(path) -> Dictionary:
    """One word per line, optionally followed by ``<TAB>count``."""
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8", errors="strict") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            word, sep, count = line.partition("\t")
            try:
                n = int(count) if sep else 1
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad count {count!r}") from None
            counts[word] = counts.get(word, 0) + n
    return Dictionary(counts)


def accuracy_at_distance(predictions: Sequence[str], golds: Sequence[str], d: int) -> float:
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions for {len(golds)} golds")
    if not golds:
        raise ValueError("nothing to score")
    hits = sum(levenshtein(p, g) <= d for p, g in zip(predictions, golds))
    return hits / len(golds)


def score(inputs: Sequence[str], predictions: Sequence[str], golds: Sequence[str],
          max_d: int = 3, granularity: str = "word") -> EvalReport:
    """Build a report from aligned sentence-level inputs, predictions and golds.

    In ``word`` mode sentences are split on whitespace and words are paired
    by position; a side with fewer words is padded with empty strings.
    """
    if granularity not in GRANULARITIES:
        raise ValueError(f"granularity must be one of {GRANULARITIES}")
    if not (len(inputs) == len(predictions) == len(golds)):
        raise ValueError("inputs, predictions and golds must align")
    if not golds:
        raise ValueError("empty test set")

    units: list[tuple[str, str, str]] = []
    if granularity == "sentence":
        units = list(zip(inputs, predictions, golds))
    else:
        for i, p, g in zip(inputs, predictions, golds):
            units.extend(zip_longest(i.split(), p.split(), g.split(), fillvalue=""))
    records = [EvalRecord(i, p, g, levenshtein(p, g)) for i, p, g in units]
    n = len(records)
    acc = {d: sum(r.distance <= d for r in records) / n for d in range(max_d + 1)}
    return EvalReport(n, acc, records)


def evaluate_model(checkpoint, test_pairs: Sequence[SentencePair], max_d: int = 3,
                   granularity: str = "word", batch_size: int = 256) -> EvalReport:
    """Greedy-decode every wrong side and score it against the correct side."""
    if not test_pairs:
        raise ValueError("empty test set")
    inputs = [p.wrong for p in test_pairs]
    preds: list[str] = []
    for k in range(0, len(inputs), batch_size):
        preds.extend(greedy_decode_batch(inputs[k:k + batch_size], checkpoint))
    return score(inputs, preds, [p.correct for p in test_pairs], max_d, granularity)


def dictionary_correct(word: str, dictionary: Dictionary) -> str:
    """Closest dictionary word by Damerau-Levenshtein distance.

    Exact hits are returned as is. Ties go to the more frequent word, then
    to the lexicographically smaller one.
    """
    if word in dictionary:
        return word
    best_key = None
    best = None
    for entry, count in dictionary.counts.items():
        if best_key is not None and abs(len(entry) - len(word)) > best_key[0]:
            continue
        key = (damerau_levenshtein(word, entry), -count, entry)
        if best_key is None or key < best_key:
            best_key, best = key, entry
    return best


def evaluate_baseline(dictionary: Dictionary, test_pairs: Sequence[SentencePair], max_d: int = 3,
                      granularity: str = "word") -> EvalReport:
    """Word-by-word dictionary correction of every wrong side, scored like the model."""
    if not test_pairs:
        raise ValueError("empty test set")
    cache: dict[str, str] = {}

    def fix(w: str) -> str:
        if w not in cache:
            cache[w] = dictionary_correct(w, dictionary)
        return cache[w]

    inputs = [p.wrong for p in test_pairs]
    preds = [" ".join(fix(w) for w in s.split()) for s in inputs]
    return score(inputs, preds, [p.correct for p in test_pairs], max_d, granularity)
