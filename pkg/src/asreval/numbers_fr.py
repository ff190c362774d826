"""French number verbalization, emitted as already-split tokens.

The normalizer splits hyphenated compounds anyway, so numbers come back in
post-split form: 99 is ["quatre", "vingt", "dix", "neuf"], never
"quatre-vingt-dix-neuf". Traditional (pre-1990) orthography is used: "et un"
at 21/31/41/51/61 and "et onze" at 71, plural "vingts"/"cents" only when the
word ends the numeral, invariable "mille".

Supported range is 0..999_999; anything else raises UnsupportedNumberError
and the caller keeps the digits and records a warning.
"""

from __future__ import annotations

MAX_VERBALIZABLE = 999_999

CARDINAL = "cardinal"
ORDINAL = "ordinal"


class UnsupportedNumberError(ValueError):
    """Number has no verbalization in the supported grammar."""


_ONES = [
    "zéro", "un", "deux", "trois", "quatre", "cinq", "six", "sept", "huit",
    "neuf", "dix", "onze", "douze", "treize", "quatorze", "quinze", "seize",
]

_TENS = {20: "vingt", 30: "trente", 40: "quarante", 50: "cinquante", 60: "soixante"}

# Final-word rewrite for ordinals: cardinal tokens keep their form except the
# last one. "vingts"/"cents" drop the plural s ("quatre vingts" -> "quatre
# vingtième"); "neuf" -> "neuvième"; silent-e words drop the e.
_ORDINAL_FINAL = {
    "un": "unième", "deux": "deuxième", "trois": "troisième",
    "quatre": "quatrième", "cinq": "cinquième", "six": "sixième",
    "sept": "septième", "huit": "huitième", "neuf": "neuvième",
    "dix": "dixième", "onze": "onzième", "douze": "douzième",
    "treize": "treizième", "quatorze": "quatorzième", "quinze": "quinzième",
    "seize": "seizième", "vingt": "vingtième", "vingts": "vingtième",
    "trente": "trentième", "quarante": "quarantième",
    "cinquante": "cinquantième", "soixante": "soixantième",
    "cent": "centième", "cents": "centième", "mille": "millième",
}


def _under_hundred(n: int) -> list[str]:
    """Tokens for 1..99."""
    if n <= 16:
        return [_ONES[n]]
    if n <= 19:
        return ["dix", _ONES[n - 10]]
    if n < 70:
        tens, unit = divmod(n, 10)
        out = [_TENS[tens * 10]]
        if unit == 1:
            out += ["et", "un"]
        elif unit:
            out.append(_ONES[unit])
        return out
    if n < 80:
        if n == 71:
            return ["soixante", "et", "onze"]
        return ["soixante"] + _under_hundred(n - 60)
    out = ["quatre", "vingt"]
    if n > 80:
        out += _under_hundred(n - 80)
    return out


def _under_thousand(n: int) -> list[str]:
    """Tokens for 1..999."""
    hundreds, rest = divmod(n, 100)
    out: list[str] = []
    if hundreds == 1:
        out.append("cent")
    elif hundreds:
        out += [_ONES[hundreds], "cent"]
    if rest:
        out += _under_hundred(rest)
    return out


def cardinal_tokens(n: int) -> list[str]:
    """French cardinal of ``n`` as split tokens, e.g. 21 -> vingt et un."""
    if not isinstance(n, int) or isinstance(n, bool):
        raise UnsupportedNumberError(f"not an integer: {n!r}")
    if n < 0 or n > MAX_VERBALIZABLE:
        raise UnsupportedNumberError(f"{n} outside 0..{MAX_VERBALIZABLE}")
    if n == 0:
        return ["zéro"]
    thousands, rest = divmod(n, 1000)
    out: list[str] = []
    if thousands == 1:
        out.append("mille")
    elif thousands:
        out = _under_thousand(thousands) + ["mille"]
    if rest:
        out += _under_thousand(rest)
    # Plural s lands only on a numeral-final multiplied vingt or cent.
    if out[-1] == "vingt" and n % 100 == 80:
        out[-1] = "vingts"
    elif out[-1] == "cent" and (n % 1000) // 100 >= 2:
        out[-1] = "cents"
    return out


def ordinal_tokens(n: int, *, feminine: bool = False) -> list[str]:
    """French ordinal of ``n`` as split tokens; 1 -> premier / première.

    French has no ordinal for zero, so 0 raises UnsupportedNumberError.
    """
    if n == 0:
        raise UnsupportedNumberError("no French ordinal for 0")
    if n == 1:
        return ["première" if feminine else "premier"]
    tokens = cardinal_tokens(n)
    tokens[-1] = _ORDINAL_FINAL[tokens[-1]]
    return tokens


def verbalize_number_fr(n: int, kind: str = CARDINAL) -> list[str]:
    """Verbalize a non-negative integer as French word tokens."""
    if kind == CARDINAL:
        return cardinal_tokens(n)
    if kind == ORDINAL:
        return ordinal_tokens(n)
    raise ValueError(f"kind must be {CARDINAL!r} or {ORDINAL!r}, got {kind!r}")
