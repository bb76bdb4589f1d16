"""The 11 coarse action categories and keyword-based categorization.

Each category carries its question-template fragment and a list of keyword
stems.  ``categorize_action`` picks the first category, in table order, whose
stems prefix-match a word of the lowercased action text.  The table ships as
an editable JSON file (``data/action_categories.json``) so deployments can
extend the keyword lists without code changes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .errors import UncategorizedActionError

_WORD_RE = re.compile(r"[a-z']+")


@dataclass(frozen=True)
class ActionCategory:
    id: str
    question_template: str
    target_template: str
    keywords: tuple[str, ...]


def _load_default() -> tuple[ActionCategory, ...]:
    raw = resources.files("castmask.data").joinpath("action_categories.json").read_text("utf-8")
    return load_categories_from_text(raw)


def load_categories_from_text(text: str) -> tuple[ActionCategory, ...]:
    """Parse a category table from its JSON representation."""
    entries = json.loads(text)
    cats = tuple(
        ActionCategory(
            id=e["id"],
            question_template=e["question"],
            target_template=e["target_question"],
            keywords=tuple(e["keywords"]),
        )
        for e in entries
    )
    if len(cats) != 11:
        raise ValueError(f"category table must have exactly 11 entries, got {len(cats)}")
    return cats


DEFAULT_CATEGORIES = _load_default()


def categorize_action(
    action_text: str, categories: tuple[ActionCategory, ...] = DEFAULT_CATEGORIES
) -> ActionCategory:
    """Map free action text to the first category whose keyword matches a word.

    Matching is prefix-based on lowercased words so inflections ("points",
    "speaking") hit their stems.  Raises :class:`UncategorizedActionError`
    when nothing matches; such annotations are rejected upstream.
    """
    if not action_text.strip():
        raise UncategorizedActionError(action_text)
    words = _WORD_RE.findall(action_text.lower())
    for cat in categories:
        for word in words:
            for stem in cat.keywords:
                if word.startswith(stem):
                    return cat
    raise UncategorizedActionError(action_text)
