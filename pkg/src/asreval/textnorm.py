"""Text normalization profiles applied to references and hypotheses alike.

Two profiles exist. *whisper*: lowercase, drop bracketed/parenthesized spans,
strip punctuation, collapse whitespace. *basic* is a strict superset adding
French-specific rewrites: digits separated from glued units, cardinals and
ordinals verbalized, a space inserted after every apostrophe (elided articles
become their own token: "l'école" -> "l' école"), and hyphenated compounds
split. Apostrophes themselves are kept in both profiles; they mark French
elision and removing them would merge distinct words.

Both profiles are idempotent, and applying *whisper* to *basic* output is a
no-op, so metric comparisons across profiles stay well defined.
"""

from __future__ import annotations

import functools
import re
import unicodedata
from dataclasses import dataclass

from .numbers_fr import (
    UnsupportedNumberError,
    cardinal_tokens,
    ordinal_tokens,
)

PROFILE_WHISPER = "whisper"
PROFILE_BASIC = "basic"

# Ordered rule ids; *basic* extends *whisper* with the French rules. The
# final recomposition keeps outputs canonical even when a rewrite lands new
# text next to a combining mark.
WHISPER_RULES = (
    "unicode_prenormalize",
    "lowercase",
    "strip_bracketed_spans",
    "strip_punctuation",
    "collapse_whitespace",
    "recompose_unicode",
)
BASIC_RULES = (
    "unicode_prenormalize",
    "lowercase",
    "strip_bracketed_spans",
    "separate_digits_from_units",
    "verbalize_numbers",
    "space_after_apostrophe",
    "split_hyphenated_compounds",
    "strip_punctuation",
    "collapse_whitespace",
    "recompose_unicode",
)

PROFILES: dict[str, tuple[str, ...]] = {
    PROFILE_WHISPER: WHISPER_RULES,
    PROFILE_BASIC: BASIC_RULES,
}

_APOSTROPHE_LIKE = {
    "’": "'",  # right single quotation mark, the common typographic form
}
_SPACE_LIKE = {
    " ": " ",  # no-break space
    " ": " ",  # narrow no-break space
    " ": " ",  # thin space
}

# Innermost matched ( ) or [ ] span containing no other bracket characters;
# applied repeatedly so nested spans vanish from the inside out.
_BRACKETED = re.compile(r"\([^()\[\]]*\)|\[[^()\[\]]*\]")

_ORDINAL_SUFFIXES = ("ère", "ème", "eme", "er", "re", "e")
_SUFFIX_ALT = "|".join(_ORDINAL_SUFFIXES)

# Digit/letter boundary, except when the letters are exactly an ordinal
# suffix ("1er" must reach the verbalizer intact while "10km" splits).
_DIGIT_LETTER = re.compile(
    rf"(\d)(?!(?:{_SUFFIX_ALT})(?![^\W\d_]))(?=[^\W\d_])", re.UNICODE)
_LETTER_DIGIT = re.compile(r"([^\W\d_])(?=\d)", re.UNICODE)

_NUMBER = re.compile(rf"(\d+)({_SUFFIX_ALT})?(?![^\W\d_])", re.UNICODE)
_DECIMAL = re.compile(r"\d[.,]\d")


@dataclass(frozen=True)
class NormalizationProfile:
    """Named, ordered rule set; identical for references and hypotheses."""

    name: str
    rules: tuple[str, ...]

    def apply(self, text: str) -> tuple[str, list[str]]:
        return _apply_rules(text, self.rules)

    def fingerprint(self) -> str:
        import hashlib

        payload = self.name + "\x1f" + "\x1f".join(self.rules)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def get_profile(name: str) -> NormalizationProfile:
    try:
        return NormalizationProfile(name=name, rules=PROFILES[name])
    except KeyError:
        raise ValueError(
            f"unknown normalization profile {name!r}; "
            f"expected one of {sorted(PROFILES)}") from None


def prenormalize_unicode(text: str) -> str:
    """Canonical composed form with apostrophe and space variants unified."""
    text = unicodedata.normalize("NFC", text)
    for src, dst in _APOSTROPHE_LIKE.items():
        text = text.replace(src, dst)
    for src, dst in _SPACE_LIKE.items():
        text = text.replace(src, dst)
    return text


@functools.lru_cache(maxsize=None)
def _is_punctuation(ch: str) -> bool:
    # Apostrophe is deliberately not punctuation here (French elision).
    if ch == "'":
        return False
    return unicodedata.category(ch)[0] in ("P", "S")


def _strip_bracketed(text: str) -> str:
    while True:
        replaced = _BRACKETED.sub(" ", text)
        if replaced == text:
            return text
        text = replaced


def _strip_punctuation(text: str) -> str:
    return "".join(" " if _is_punctuation(ch) else ch for ch in text)


def _separate_digits_from_units(text: str) -> str:
    text = _DIGIT_LETTER.sub(r"\1 ", text)
    return _LETTER_DIGIT.sub(r"\1 ", text)


def _verbalize_numbers(text: str, warnings: list[str]) -> str:
    if _DECIMAL.search(text):
        warnings.append(
            "decimal number split at the separator and verbalized part-wise")

    def repl(match: re.Match) -> str:
        digits, suffix = match.group(1), match.group(2)
        n = int(digits)
        try:
            if suffix:
                feminine = suffix in ("re", "ère")
                tokens = ordinal_tokens(n, feminine=feminine and n == 1)
            else:
                tokens = cardinal_tokens(n)
        except UnsupportedNumberError:
            warnings.append(
                f"number {match.group(0)!r} outside verbalization range, "
                "digits kept")
            return match.group(0)
        return " ".join(tokens)

    return _NUMBER.sub(repl, text)


def _apply_rules(text: str, rules: tuple[str, ...]) -> tuple[str, list[str]]:
    warnings: list[str] = []
    for rule in rules:
        if rule == "unicode_prenormalize":
            text = prenormalize_unicode(text)
        elif rule == "lowercase":
            text = text.lower()
        elif rule == "strip_bracketed_spans":
            text = _strip_bracketed(text)
        elif rule == "separate_digits_from_units":
            text = _separate_digits_from_units(text)
        elif rule == "verbalize_numbers":
            text = _verbalize_numbers(text, warnings)
        elif rule == "space_after_apostrophe":
            text = re.sub(r"'(?!\s)", "' ", text)
        elif rule == "split_hyphenated_compounds":
            text = text.replace("-", " ")
        elif rule == "strip_punctuation":
            text = _strip_punctuation(text)
        elif rule == "collapse_whitespace":
            text = " ".join(text.split())
        elif rule == "recompose_unicode":
            text = unicodedata.normalize("NFC", text)
        else:
            raise ValueError(f"unknown normalization rule {rule!r}")
    return text, warnings


def normalize(text: str, profile: str | NormalizationProfile) -> tuple[str, list[str]]:
    """Normalize ``text``, returning the result and any per-utterance warnings."""
    if isinstance(profile, str):
        profile = get_profile(profile)
    return profile.apply(text)


def normalize_whisper(text: str) -> str:
    return _apply_rules(text, WHISPER_RULES)[0]


def normalize_basic(text: str) -> str:
    return _apply_rules(text, BASIC_RULES)[0]
