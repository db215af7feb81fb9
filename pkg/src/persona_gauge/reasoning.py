"""Zero-shot multiple-choice reasoning harness over MMLU-style subject files."""

from __future__ import annotations

import csv
import enum
import json
import re
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import prompts
from .gateway import AgentHandle, build_messages, complete
from .seeding import parallel_map, request_seed, rng_for

__all__ = [
    "CategoryAccuracy",
    "EmptyCategory",
    "MalformedRow",
    "McqItem",
    "McqResult",
    "MissingDirectory",
    "SubjectCategory",
    "UnmappedSubject",
    "accuracy_by_category",
    "ask_mcq",
    "categorize",
    "extract_choice",
    "load_category_mapping",
    "load_mmlu",
    "run_reasoning",
]


class MissingDirectory(FileNotFoundError):
    pass


class MalformedRow(ValueError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line


class UnmappedSubject(KeyError):
    pass


class EmptyCategory(ValueError):
    pass


class SubjectCategory(str, enum.Enum):
    STEM = "STEM"
    HUMANITIES = "Humanities"
    SOCIAL_SCIENCES = "SocialSciences"
    OTHER = "Other"


@dataclass(frozen=True)
class McqItem:
    subject: str
    stem: str
    options: tuple[str, str, str, str]
    gold: str
    item_id: str = ""

    def __post_init__(self):
        if len(self.options) != 4:
            raise ValueError("an item needs exactly four options")
        if self.gold not in prompts.LETTERS:
            raise ValueError(f"gold answer must be one of A-D, got {self.gold!r}")


_SPLIT_SUFFIXES = ("_test", "_dev", "_val")


def _subject_from(path: Path) -> str:
    stem = path.stem
    for suffix in _SPLIT_SUFFIXES:
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def load_mmlu(directory: str | Path, per_subject_cap: int | None = None) -> list[McqItem]:
    """Read every ``<subject>[_test].csv`` (rows: question, A, B, C, D, answer)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingDirectory(f"no such MMLU directory: {directory}")
    items = []
    per_subject: dict[str, int] = defaultdict(int)
    for path in sorted(directory.glob("*.csv")):
        subject = _subject_from(path)
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        for lineno, row in enumerate(rows, 1):
            if not row:
                continue
            if per_subject_cap is not None and per_subject[subject] >= per_subject_cap:
                break
            if len(row) != 6:
                raise MalformedRow(path, lineno, f"expected 6 fields, got {len(row)}")
            gold = row[5].strip().upper()
            if gold not in prompts.LETTERS:
                raise MalformedRow(path, lineno, f"answer must be A-D, got {row[5]!r}")
            items.append(McqItem(subject, row[0], tuple(row[1:5]), gold, f"{path.stem}-{lineno}"))
            per_subject[subject] += 1
    return items


def load_category_mapping(path: str | Path | None = None) -> dict[str, SubjectCategory]:
    if path is None:
        text = resources.files("persona_gauge.data").joinpath("mmlu_categories.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return {k: SubjectCategory(v) for k, v in json.loads(text).items()}


_DEFAULT_MAPPING: dict[str, SubjectCategory] | None = None


def categorize(subject: str, mapping: Mapping[str, SubjectCategory] | None = None) -> SubjectCategory:
    global _DEFAULT_MAPPING
    if mapping is None:
        if _DEFAULT_MAPPING is None:
            _DEFAULT_MAPPING = load_category_mapping()
        mapping = _DEFAULT_MAPPING
    try:
        return mapping[subject]
    except KeyError:
        raise UnmappedSubject(subject) from None


_CHOICE_PATTERNS = [
    re.compile(r"\banswer\s*(?:is)?\s*:?\s*\(?([abcd])\b", re.I),
    re.compile(r"\boption\s*\(?([abcd])\b", re.I),
    re.compile(r"\(([abcd])\)", re.I),
    re.compile(r"\b([abcd])\b", re.I),
]


def extract_choice(reply: str) -> str | None:
    """Letter A-D chosen in a free-text reply, or None when there is none."""
    for pat in _CHOICE_PATTERNS:
        m = pat.search(reply)
        if m:
            return m[1].upper()
    return None


def ask_mcq(agent: AgentHandle, item: McqItem, rng: np.random.Generator | None = None,
            seed: int = 0) -> tuple[str | None, str]:
    """Return (extracted letter or None, raw reply)."""
    prompt = prompts.render_reasoning(item.subject, item.stem, item.options)
    reply = complete(agent, build_messages(agent.persona, prompt), rng=rng, request_seed=seed)
    return extract_choice(reply), reply


@dataclass(frozen=True)
class McqResult:
    persona: str
    subject: str
    category: str
    item_id: str
    extracted: str | None
    gold: str
    correct: bool
    reply: str = ""


def run_reasoning(agent: AgentHandle, items: Sequence[McqItem], master_seed: int = 0,
                  mapping: Mapping[str, SubjectCategory] | None = None,
                  persona: str | None = None, parallelism: int = 1) -> list[McqResult]:
    persona = persona or agent.label

    def one(item):
        rng = rng_for(master_seed, persona, "reasoning", item.item_id)
        letter, reply = ask_mcq(agent, item, rng, request_seed("reasoning", persona, item.item_id))
        cat = categorize(item.subject, mapping).value
        return McqResult(persona, item.subject, cat, item.item_id, letter, item.gold, letter == item.gold, reply)

    return parallel_map(one, items, parallelism)


@dataclass(frozen=True)
class CategoryAccuracy:
    persona: str
    category: str
    accuracy: float
    n_items: int
    n_invalid: int


def accuracy_by_category(results: Iterable[McqResult],
                         categories: Sequence[str] | None = None) -> dict[tuple[str, str], CategoryAccuracy]:
    """Pooled per-(persona, category) accuracy; invalid answers count as wrong.

    When `categories` is given every persona must have items in each of them.
    """
    groups: dict[tuple[str, str], list[McqResult]] = defaultdict(list)
    for r in results:
        groups[(r.persona, r.category)].append(r)
    if categories is not None:
        for persona in {p for p, _ in groups}:
            for cat in categories:
                if not groups.get((persona, cat)):
                    raise EmptyCategory(f"{persona} has no items in category {cat}")
    out = {}
    for key in sorted(groups):
        rs = groups[key]
        correct = sum(r.correct for r in rs)
        invalid = sum(r.extracted is None for r in rs)
        out[key] = CategoryAccuracy(key[0], key[1], correct / len(rs), len(rs), invalid)
    return out
