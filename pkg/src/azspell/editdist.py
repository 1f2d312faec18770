"""Levenshtein and restricted Damerau-Levenshtein (optimal string alignment)
distances. Strings are compared by Unicode code point."""

from __future__ import annotations


def levenshtein(a: str, b: str) -> int:
    """Minimum insertions, deletions and substitutions turning ``a`` into ``b``.

    >>> levenshtein("kitten", "sitting")
    3
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def damerau_levenshtein(a: str, b: str) -> int:
    """Levenshtein distance plus unit-cost swaps of adjacent characters.

    This is the optimal string alignment variant: no substring is edited
    more than once, so ``damerau_levenshtein("ca", "abc") == 3``.
    """
    if a == b:
        return 0
    if not a or not b:
        return len(a) + len(b)
    n = len(b)
    before = None
    prev = list(range(n + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * n
        ca = a[i - 1]
        for j in range(1, n + 1):
            cb = b[j - 1]
            d = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
            if i > 1 and j > 1 and ca == b[j - 2] and a[i - 2] == cb:
                d = min(d, before[j - 2] + 1)
            cur[j] = d
        before, prev = prev, cur
    return prev[n]
