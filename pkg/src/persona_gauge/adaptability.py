"""
Periodic location-choice task with flexibility and stability metrics.

A trajectory is a periods x blocks grid of chosen location categories.
Flexibility is the mean, over periods, of the fraction of distinct categories
across that period's blocks.  Stability is the mean, over blocks, of one minus
the fraction of distinct categories in that block across periods.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from importlib import resources
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import prompts
from .gateway import AgentHandle, build_messages, complete
from .seeding import parallel_map, request_seed, rng_for

__all__ = [
    "AdaptTrajectory",
    "AdaptabilitySummary",
    "EmptyInput",
    "PoiCatalog",
    "TIME_BLOCKS",
    "TimeBlock",
    "UnparseableChoice",
    "block_of",
    "build_catalog",
    "flexibility",
    "load_catalog",
    "match_choice",
    "read_checkins",
    "run_adaptability",
    "stability",
    "summarize_adaptability",
]

MISSING = -1
MAX_REPROMPTS = 3
DAY_NAMES = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")


class EmptyInput(ValueError):
    pass


class UnparseableChoice(ValueError):
    pass


@dataclass(frozen=True)
class TimeBlock:
    id: str
    start: time
    end: time
    label: str  # wording used in prompts

    def contains(self, t: time) -> bool:
        if self.start <= self.end:
            return self.start <= t < self.end
        return t >= self.start or t < self.end


TIME_BLOCKS = (
    TimeBlock("morning", time(8, 0), time(11, 30), "morning"),
    TimeBlock("noon", time(11, 30), time(14, 0), "noon"),
    TimeBlock("afternoon", time(14, 0), time(17, 30), "afternoon"),
    TimeBlock("evening", time(17, 30), time(22, 0), "evening"),
    TimeBlock("rest", time(22, 0), time(8, 0), "night"),
)


def block_of(t: time | datetime) -> TimeBlock:
    if isinstance(t, datetime):
        t = t.time()
    for b in TIME_BLOCKS:
        if b.contains(t):
            return b
    raise AssertionError(f"no block covers {t}")  # blocks tile the day


@dataclass(frozen=True)
class PoiCatalog:
    categories: tuple[str, ...]

    def __post_init__(self):
        cats = tuple(self.categories)
        object.__setattr__(self, "categories", cats)
        if not cats:
            raise EmptyInput("catalog is empty")
        if len(set(cats)) != len(cats):
            raise ValueError("catalog has duplicate categories")
        for c in cats:
            if not c.strip() or ", " in c:
                raise ValueError(f"bad category name {c!r}")

    def __len__(self):
        return len(self.categories)

    def index(self, name: str) -> int:
        return self.categories.index(name)


def load_catalog(path: str | Path | None = None) -> PoiCatalog:
    """One category per line; default is the small shipped catalog."""
    if path is None:
        text = resources.files("persona_gauge.data").joinpath("default_catalog.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return PoiCatalog(tuple(l.strip() for l in text.splitlines() if l.strip()))


def build_catalog(checkins: Iterable[tuple[datetime | time, str]], top_k: int = 30) -> PoiCatalog:
    """Union over time blocks of each block's `top_k` most frequent categories.

    Ties in frequency break lexicographically; the union keeps first-appearance
    order, visiting blocks in morning..rest order.
    """
    if top_k < 1:
        raise ValueError("top_k must be positive")
    counts = {b.id: Counter() for b in TIME_BLOCKS}
    n = 0
    for ts, cat in checkins:
        counts[block_of(ts).id][cat] += 1
        n += 1
    if n == 0:
        raise EmptyInput("no check-ins")
    union: dict[str, None] = {}
    for b in TIME_BLOCKS:
        ranked = sorted(counts[b.id].items(), key=lambda kv: (-kv[1], kv[0]))
        for cat, _ in ranked[:top_k]:
            union.setdefault(cat, None)
    return PoiCatalog(tuple(union))


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    for fmt in ("%a %b %d %H:%M:%S %z %Y", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"):
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            pass
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def read_checkins(path: str | Path, timestamp_col: int = 7, category_col: int = 3,
                  tz_offset_col: int | None = 6, delimiter: str = "\t",
                  encoding: str = "latin-1") -> list[tuple[datetime, str]]:
    """Read a delimited check-in dump.

    Defaults fit the Foursquare NYC/TKY dumps (UTC timestamp in column 7,
    category name in column 3, local offset in minutes in column 6).  With an
    offset column the local wall-clock time is used for block assignment.
    """
    out = []
    with open(path, encoding=encoding, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), 1):
            if not row:
                continue
            try:
                ts = _parse_timestamp(row[timestamp_col])
                if tz_offset_col is not None:
                    ts = ts + timedelta(minutes=int(row[tz_offset_col]))
                out.append((ts, row[category_col]))
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse check-in row: {exc}") from exc
    return out


def match_choice(reply: str, catalog: PoiCatalog) -> str | None:
    """Exact (case-insensitive) catalog name, else the longest name contained in the reply."""
    cleaned = reply.strip().strip(" .\"'`*").lower()
    lowered = {c.lower(): c for c in catalog.categories}
    if cleaned in lowered:
        return lowered[cleaned]
    text = reply.lower()
    best = None
    for c in catalog.categories:
        if c.lower() in text and (best is None or len(c) > len(best)):
            best = c
    return best


@dataclass
class AdaptTrajectory:
    """Grid of catalog indices (periods x blocks); ``-1`` marks an unparseable cell."""

    grid: np.ndarray
    catalog: PoiCatalog
    persona: str = "NONE"
    repeat: int = 0
    replies: list = field(default_factory=list)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=int)
        if self.grid.ndim != 2 or 0 in self.grid.shape:
            raise ValueError("grid must be a non-empty periods x blocks matrix")
        if np.any(self.grid >= len(self.catalog)) or np.any(self.grid < MISSING):
            raise ValueError("grid cell outside catalog")

    @property
    def periods(self) -> int:
        return self.grid.shape[0]

    @property
    def blocks(self) -> int:
        return self.grid.shape[1]

    @property
    def partial(self) -> bool:
        return bool(np.any(self.grid == MISSING))

    def names(self) -> list[list[str | None]]:
        return [[self.catalog.categories[i] if i != MISSING else None for i in row] for row in self.grid]

    def to_json(self) -> dict:
        return {
            "persona": self.persona,
            "repeat": self.repeat,
            "grid": self.names(),
            "replies": self.replies,
            "partial": self.partial,
        }

    @classmethod
    def from_json(cls, d: dict, catalog: PoiCatalog) -> "AdaptTrajectory":
        grid = [[catalog.index(c) if c is not None else MISSING for c in row] for row in d["grid"]]
        return cls(np.array(grid), catalog, d["persona"], d["repeat"], d.get("replies", []))


def _cells(traj) -> list[list[Hashable]]:
    """Rows of observed values; missing cells become None."""
    if isinstance(traj, AdaptTrajectory):
        return [[v if v != MISSING else None for v in row] for row in traj.grid.tolist()]
    rows = [list(r) for r in traj]
    if not rows or any(len(r) != len(rows[0]) for r in rows) or not rows[0]:
        raise ValueError("grid must be a non-empty rectangle")
    return rows


def _distinct_fraction(values: Sequence) -> float | None:
    seen = [v for v in values if v is not None]
    if not seen:
        return None
    return len(set(seen)) / len(seen)


def flexibility(traj) -> float:
    """Mean over periods of (distinct categories in the period) / |T|.

    Accepts an :class:`AdaptTrajectory` or any rectangular periods x blocks
    grid of hashable labels.  On partial grids missing cells are left out of
    both counts and denominators.
    """
    rows = _cells(traj)
    fr = [f for f in (_distinct_fraction(r) for r in rows) if f is not None]
    return math.fsum(fr) / len(fr)


def stability(traj) -> float:
    """Mean over blocks of 1 - (distinct categories in the block across periods) / |P|."""
    rows = _cells(traj)
    cols = [list(c) for c in zip(*rows)]
    fr = [f for f in (_distinct_fraction(c) for c in cols) if f is not None]
    return math.fsum(1.0 - f for f in fr) / len(fr)


@dataclass(frozen=True)
class AdaptabilitySummary:
    persona: str
    flexibility_mean: float
    flexibility_std: float
    stability_mean: float
    stability_std: float
    n: int
    n_partial: int


def _mean_std(values):
    arr = np.asarray(values, dtype=float)
    std = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
    return float(np.mean(arr)), std


def summarize_adaptability(trajectories: Sequence[AdaptTrajectory], persona: str | None = None) -> AdaptabilitySummary:
    if not trajectories:
        raise ValueError("need at least one trajectory")
    fm, fs = _mean_std([flexibility(t) for t in trajectories])
    sm, ss = _mean_std([stability(t) for t in trajectories])
    persona = persona or trajectories[0].persona
    n_partial = sum(1 for t in trajectories if t.partial)
    return AdaptabilitySummary(persona, fm, fs, sm, ss, len(trajectories), n_partial)


def ask_location(agent: AgentHandle, catalog: PoiCatalog, day: str, block: TimeBlock,
                 rng: np.random.Generator, seed_parts: tuple = ()) -> tuple[str, list[str]]:
    prompt = prompts.render_adaptability(day, block.label, catalog.categories)
    messages = build_messages(agent.persona, prompt)
    replies = []
    for attempt in range(MAX_REPROMPTS + 1):
        reply = complete(agent, messages, rng=rng, request_seed=request_seed(*seed_parts, attempt))
        replies.append(reply)
        choice = match_choice(reply, catalog)
        if choice is not None:
            return choice, replies
    raise UnparseableChoice(f"no catalog category in replies {replies!r}")


def run_adaptability(agent: AgentHandle, catalog: PoiCatalog, periods: int = 7, repeats: int = 5,
                     master_seed: int = 0, persona: str | None = None,
                     parallelism: int = 1) -> list[AdaptTrajectory]:
    """Fill `repeats` periods x blocks grids by querying the agent once per cell.

    Each cell draws from its own stream keyed by (persona, repeat, period,
    block), so results do not depend on scheduling.  Cells that stay
    unparseable after re-prompts are left missing and the grid is partial.
    """
    if periods < 1 or repeats < 1:
        raise ValueError("periods and repeats must be positive")
    persona = persona or agent.label
    cells = [(r, p, b) for r in range(repeats) for p in range(periods) for b in range(len(TIME_BLOCKS))]

    def ask(cell):
        r, p, b = cell
        rng = rng_for(master_seed, persona, "adaptability", r, p, b)
        try:
            choice, replies = ask_location(agent, catalog, DAY_NAMES[p % 7], TIME_BLOCKS[b], rng,
                                           ("adaptability", persona, r, p, b))
            return catalog.index(choice), replies
        except UnparseableChoice as exc:
            return MISSING, [str(exc)]

    answers = dict(zip(cells, parallel_map(ask, cells, parallelism)))
    out = []
    for r in range(repeats):
        grid = np.full((periods, len(TIME_BLOCKS)), MISSING, dtype=int)
        replies = [[None] * len(TIME_BLOCKS) for _ in range(periods)]
        for p in range(periods):
            for b in range(len(TIME_BLOCKS)):
                grid[p, b], replies[p][b] = answers[(r, p, b)]
        out.append(AdaptTrajectory(grid, catalog, persona, r, replies))
    return out
