"""Independent oracles the implementation is checked against.

These deliberately use different structures than the library: the edit cost
oracle is the plain recursive definition of Levenshtein distance, and the
number oracle builds traditional hyphenated strings from literal tables.
"""

from __future__ import annotations

import re

# -- minimum edit cost, straight from the recurrence -------------------------

_memo: dict = {}


def min_edit_cost(a: tuple, b: tuple) -> int:
    key = (a, b)
    if key in _memo:
        return _memo[key]
    if not a:
        result = len(b)
    elif not b:
        result = len(a)
    elif a[0] == b[0]:
        result = min_edit_cost(a[1:], b[1:])
    else:
        result = 1 + min(min_edit_cost(a[1:], b),
                         min_edit_cost(a, b[1:]),
                         min_edit_cost(a[1:], b[1:]))
    _memo[key] = result
    return result


# -- table-driven French numbers (hyphenated strings) ------------------------

UNITS = {
    0: "zéro", 1: "un", 2: "deux", 3: "trois", 4: "quatre", 5: "cinq",
    6: "six", 7: "sept", 8: "huit", 9: "neuf", 10: "dix", 11: "onze",
    12: "douze", 13: "treize", 14: "quatorze", 15: "quinze", 16: "seize",
    17: "dix-sept", 18: "dix-huit", 19: "dix-neuf",
}
TENS = {20: "vingt", 30: "trente", 40: "quarante", 50: "cinquante",
        60: "soixante"}

ORDINAL_FINAL = {
    "un": "unième", "deux": "deuxième", "trois": "troisième",
    "quatre": "quatrième", "cinq": "cinquième", "six": "sixième",
    "sept": "septième", "huit": "huitième", "neuf": "neuvième",
    "dix": "dixième", "onze": "onzième", "douze": "douzième",
    "treize": "treizième", "quatorze": "quatorzième", "quinze": "quinzième",
    "seize": "seizième", "vingt": "vingtième", "trente": "trentième",
    "quarante": "quarantième", "cinquante": "cinquantième",
    "soixante": "soixantième", "cent": "centième", "mille": "millième",
}


def _strip_plural(text: str) -> str:
    if text.endswith("vingts") or text.endswith("cents"):
        return text[:-1]
    return text


def fr_cardinal(n: int) -> str:
    """Traditional orthography, 0..999999, hyphens inside compound tens."""
    if not 0 <= n <= 999_999:
        raise ValueError(n)
    if n <= 19:
        return UNITS[n]
    if n <= 69:
        tens, unit = divmod(n, 10)
        base = TENS[tens * 10]
        if unit == 0:
            return base
        if unit == 1:
            return base + " et un"
        return base + "-" + UNITS[unit]
    if n <= 79:
        if n == 71:
            return "soixante et onze"
        return "soixante-" + UNITS[n - 60]
    if n == 80:
        return "quatre-vingts"
    if n <= 99:
        return "quatre-vingt-" + UNITS[n - 80]
    if n <= 999:
        hundreds, rest = divmod(n, 100)
        if hundreds == 1:
            head = "cent"
        else:
            head = UNITS[hundreds] + " cent" + ("s" if rest == 0 else "")
        return head if rest == 0 else head + " " + fr_cardinal(rest)
    thousands, rest = divmod(n, 1000)
    if thousands == 1:
        head = "mille"
    else:
        head = _strip_plural(fr_cardinal(thousands)) + " mille"
    return head if rest == 0 else head + " " + fr_cardinal(rest)


def fr_ordinal(n: int) -> str:
    if n == 1:
        return "premier"
    words = re.split(r"[ -]", _strip_plural(fr_cardinal(n)))
    words[-1] = ORDINAL_FINAL[words[-1]]
    return " ".join(words)


def fr_tokens(text: str) -> list[str]:
    """Split an oracle string the way hyphen-splitting normalization would."""
    return re.split(r"[ -]", text)
