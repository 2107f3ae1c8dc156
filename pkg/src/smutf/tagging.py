"""Hashtag-style semantic column tags: grammar, rule tagger, chat-endpoint tagger.

A tag is one lowercase hashtag plus a set of lowercase attributes, rendered
canonically as ``#hashtag+attr1+attr2`` with attributes sorted. Tags come
from either a deterministic rule table (offline default) or a remote
chat-completion endpoint with a few-shot prompt; the remote path always
falls back to the rule tagger so every column receives a tag.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass

import requests

from .errors import DataError
from .name_features import tokenize_name
from .schema import (
    Column,
    DataTypeLabel,
    detect_column_type,
    has_currency_prefix,
    sample_text_values,
)

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9_]+")
TAG_PATTERN = re.compile(r"#[A-Za-z0-9_]+(?:\+[A-Za-z0-9_]+)*")


class TagParseError(ValueError):
    """Malformed tag text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__("%s (at position %d)" % (message, position))
        self.position = position


@dataclass(frozen=True)
class HxlTag:
    hashtag: str
    attributes: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.hashtag or not _TOKEN_RE.fullmatch(self.hashtag):
            raise ValueError("invalid hashtag %r" % self.hashtag)
        for attr in self.attributes:
            if not _TOKEN_RE.fullmatch(attr):
                raise ValueError("invalid attribute %r" % attr)

    def render(self) -> str:
        return "#" + self.hashtag + "".join("+" + a for a in sorted(self.attributes))

    def __str__(self) -> str:
        return self.render()


def parse_tag(text: str) -> HxlTag:
    """Parse ``#hashtag(+attr)*``; lowercases; duplicate attributes collapse."""
    s = text.strip()
    if not s.startswith("#"):
        raise TagParseError("tag must start with '#'", 0)
    body = s[1:].lower()
    segments = body.split("+")
    pos = 1
    parsed = []
    for seg in segments:
        if seg == "":
            raise TagParseError("empty segment", pos)
        bad = re.search(r"[^a-z0-9_]", seg)
        if bad:
            raise TagParseError("illegal character %r" % seg[bad.start()], pos + bad.start())
        parsed.append(seg)
        pos += len(seg) + 1
    return HxlTag(hashtag=parsed[0], attributes=frozenset(parsed[1:]))


@dataclass(frozen=True)
class TagMatchScore:
    exact_hashtag: int
    attr_jaccard: float


def tag_match(a: HxlTag, b: HxlTag) -> TagMatchScore:
    """Exact hashtag equality plus Jaccard similarity of attribute sets.

    Two empty attribute sets count as identical (Jaccard 1); exactly one
    empty counts as fully different (Jaccard 0).
    """
    exact = 1 if a.hashtag == b.hashtag else 0
    if not a.attributes and not b.attributes:
        jac = 1.0
    elif not a.attributes or not b.attributes:
        jac = 0.0
    else:
        inter = len(a.attributes & b.attributes)
        union = len(a.attributes | b.attributes)
        jac = inter / union
    return TagMatchScore(exact_hashtag=exact, attr_jaccard=jac)


# --- rule-based tagger -------------------------------------------------------

_IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".gif", ".bmp", ".svg", ".webp", ".ico")
_COUNT_TOKENS = {"count", "num", "like", "views", "total"}
_MASKED_NAME_RE = re.compile(r"col\d+$")
_HEX_VALUE_RE = re.compile(r"#?[0-9a-fA-F]{3,8}$")

# keyword -> (hashtag, attributes); checked in order against name tokens
_STRING_KEYWORD_TABLE = (
    ({"country"}, "country", ()),
    ({"region", "state", "province"}, "adm1", ()),
    ({"city"}, "adm2", ()),
    ({"name"}, "name", ()),
    ({"email"}, "contact", ("email",)),
    ({"phone"}, "contact", ("phone",)),
    ({"id", "code"}, "id", ("code",)),
    ({"color"}, "color", ()),
    ({"title"}, "title", ()),
    ({"description", "desc"}, "description", ()),
)


def rule_tag(col: Column, type_label: DataTypeLabel | None = None) -> HxlTag:
    """Deterministic heuristic tag. Total; never emits the ``meta`` hashtag."""
    if type_label is None:
        type_label = detect_column_type(col)
    tokens = tokenize_name(col.name)
    values = col.non_empty()

    if type_label == DataTypeLabel.URL:
        attrs = []
        image_like = sum(1 for v in values if v.strip().lower().endswith(_IMAGE_EXTENSIONS))
        if values and image_like * 2 >= len(values):
            attrs.append("image")
        elif "article" in tokens:
            attrs.append("article")
        return HxlTag("url", frozenset(attrs))

    if type_label == DataTypeLabel.DATE:
        attrs = [t for t in ("year", "month", "day") if t in tokens]
        return HxlTag("date", frozenset(attrs))

    if type_label == DataTypeLabel.NUMERIC:
        currency = sum(1 for v in values if has_currency_prefix(v))
        if values and currency * 2 >= len(values):
            return HxlTag("value", frozenset(["usd"]))
        if any(t in _COUNT_TOKENS for t in tokens):
            return HxlTag("count")
        return _fallback_tag(col.name, tokens)

    for keywords, hashtag, attrs in _STRING_KEYWORD_TABLE:
        if any(t in keywords for t in tokens):
            if hashtag == "color":
                hexish = sum(1 for v in values if _HEX_VALUE_RE.fullmatch(v.strip()))
                if values and hexish * 2 >= len(values):
                    return HxlTag("color", frozenset(["hex"]))
                return HxlTag("color")
            return HxlTag(hashtag, frozenset(attrs))
    return _fallback_tag(col.name, tokens)


def _fallback_tag(name: str, tokens: list[str]) -> HxlTag:
    stripped = name.strip().lower()
    if not stripped or _MASKED_NAME_RE.fullmatch(stripped):
        return HxlTag("text")
    for token in tokens:
        clean = re.sub(r"[^a-z0-9_]", "", token)
        if clean and clean != "meta":
            return HxlTag(clean)
    return HxlTag("text")


# --- few-shot prompt assembly ------------------------------------------------

PROMPT_INSTRUCTIONS = (
    "I need help with predicting HXL-style tags, which annotate tabular data "
    "and consist of hashtags for primary categories and attributes for "
    "additional tagging, based on the data's content and format. Unlike "
    "standard HXL tags, HXL-style allows for creating new hashtags tailored "
    "to various topics, but the #meta hashtag should be avoided.\n\n"
    "Each column is assigned a single hashtag and can have several "
    "attributes. For example, a column titled 'ISO-3' containing country "
    "codes like 'USA', 'SSD', 'GBR' would be tagged as \"#country+code+iso3\", "
    "where \"#country\" is the hashtag and \"+code\" and \"+iso3\" are its "
    "attributes. Hashtags begin with a # and attributes with a +."
)

# column name, sample values, expected tag
DEFAULT_EXAMPLES: tuple[tuple[str, tuple[str, ...], str], ...] = (
    ("color", ("#FF0026", "#FFFFFF", "#FFFFFF"), "#color+hex"),
    (
        "article_url",
        (
            "https://www.dcard.tw/f/relationship/p/239817051",
            "https://www.dcard.tw/f/pet/p/239815003",
        ),
        "#url+article",
    ),
    ("like", ("4123", "281842", "13"), "#like+count"),
    ("col4", ("$199", "$91", "$66"), "#value+usd"),
    ("ISO-3", ("USA", "SSD", "GBR"), "#country+code+iso3"),
)

VALUE_DELIMITER = "; "
PROMPT_VALUE_LIMIT = 10


@dataclass(frozen=True)
class PromptBundle:
    system_instructions: str
    examples: tuple[tuple[str, tuple[str, ...], str], ...]
    query: tuple[str, tuple[str, ...]]

    def __post_init__(self):
        if not self.examples:
            raise ValueError("few-shot prompt requires at least one example")

    def rendered(self) -> str:
        blocks = [self.system_instructions, ""]
        for name, values, tag in self.examples:
            blocks.append("Column: %s" % name)
            blocks.append("Values: %s" % VALUE_DELIMITER.join(values))
            blocks.append("Tag: %s" % tag)
            blocks.append("")
        blocks.append("Column: %s" % self.query[0])
        blocks.append("Values: %s" % VALUE_DELIMITER.join(self.query[1]))
        blocks.append("Tag:")
        return "\n".join(blocks)


def build_prompt(
    examples=DEFAULT_EXAMPLES, query: tuple[str, tuple[str, ...]] = ("", ())
) -> PromptBundle:
    return PromptBundle(
        system_instructions=PROMPT_INSTRUCTIONS,
        examples=tuple((n, tuple(v), t) for n, v, t in examples),
        query=(query[0], tuple(query[1])),
    )


# --- chat-endpoint tagger ----------------------------------------------------

@dataclass(frozen=True)
class LlmTaggerConfig:
    endpoint_url: str
    model_name: str = "gpt-4"
    api_key_env: str = "SMUTF_API_KEY"
    timeout_ms: int = 20_000
    max_retries: int = 2
    forbid_meta: bool = True
    parallelism: int = 4

    def __post_init__(self):
        if not self.endpoint_url:
            raise DataError("llm tagger requires an endpoint URL")


def extract_tag(text: str) -> HxlTag | None:
    """First grammar match wins; models often wrap tags in prose."""
    m = TAG_PATTERN.search(text)
    if not m:
        return None
    try:
        return parse_tag(m.group(0))
    except TagParseError:
        return None


@dataclass
class TaggedColumn:
    tag: HxlTag
    provenance: str  # "rule", "llm", or "fallback"


class LlmTagger:
    """Tags columns via a chat-completion endpoint; rule tagger as safety net.

    Results are cached by (column name, sorted sampled values) so repeated
    profiling never repeats a remote call. Safe for bounded concurrent use.
    """

    def __init__(self, config: LlmTaggerConfig, sample_seed: int = 0):
        self.config = config
        self.sample_seed = sample_seed
        self._cache: dict[tuple, TaggedColumn] = {}
        self._lock = threading.Lock()

    def _chat(self, prompt: PromptBundle) -> str:
        import os

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = "Bearer " + key
        payload = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": prompt.system_instructions},
                {"role": "user", "content": prompt.rendered()},
            ],
            "temperature": 0,
        }
        timeout = self.config.timeout_ms / 1000.0
        last_err: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            try:
                resp = requests.post(
                    self.config.endpoint_url, json=payload, headers=headers, timeout=timeout
                )
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, TypeError, ValueError) as exc:
                last_err = exc
        raise RuntimeError(str(last_err))

    def tag_column(self, col: Column, type_label: DataTypeLabel | None = None) -> TaggedColumn:
        values = tuple(sample_text_values(col, PROMPT_VALUE_LIMIT, self.sample_seed))
        key = (col.name, tuple(sorted(values)))
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached

        result = None
        prompt = build_prompt(DEFAULT_EXAMPLES, (col.name, values))
        try:
            reply = self._chat(prompt)
            tag = extract_tag(reply)
            if tag is not None and not (self.config.forbid_meta and tag.hashtag == "meta"):
                result = TaggedColumn(tag=tag, provenance="llm")
            else:
                logger.warning("no usable tag in reply for column %r; using rule tag", col.name)
        except Exception as exc:
            logger.warning("chat endpoint failed for column %r: %s", col.name, exc)

        if result is None:
            result = TaggedColumn(tag=rule_tag(col, type_label), provenance="fallback")
        with self._lock:
            self._cache[key] = result
        return result


def llm_tag(config: LlmTaggerConfig, col: Column, seed: int = 0) -> HxlTag:
    """One-shot convenience wrapper around LlmTagger."""
    return LlmTagger(config, sample_seed=seed).tag_column(col).tag
