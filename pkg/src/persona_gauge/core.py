"""MBTI codes, persona profiles, run configuration and run manifests."""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

__all__ = [
    "AXES",
    "InvalidCode",
    "MbtiCode",
    "PersonaProfile",
    "RunConfig",
    "RunManifest",
    "all_codes",
    "canonical_json",
    "dimension_groups",
    "load_personas",
    "parse_mbti",
    "parse_persona_file",
    "render_role_prompt",
]

# (axis name, first letter, second letter); the first letter names "group a".
AXES = (
    ("attitude", "E", "I"),
    ("perceiving", "S", "N"),
    ("judging", "T", "F"),
    ("lifestyle", "J", "P"),
)

AXIS_LABELS = {"attitude": "E/I", "perceiving": "S/N", "judging": "T/F", "lifestyle": "J/P"}


class InvalidCode(ValueError):
    pass


@dataclass(frozen=True, order=True)
class MbtiCode:
    attitude: str
    perceiving: str
    judging: str
    lifestyle: str

    def __post_init__(self):
        for (axis, a, b), value in zip(AXES, self.letters):
            if value not in (a, b):
                raise InvalidCode(f"{axis} must be {a} or {b}, got {value!r}")

    @property
    def letters(self) -> tuple[str, str, str, str]:
        return (self.attitude, self.perceiving, self.judging, self.lifestyle)

    def __str__(self) -> str:
        return "".join(self.letters)


def parse_mbti(code: str) -> MbtiCode:
    """Parse a four-letter MBTI code, case-insensitively.

    >>> str(parse_mbti(" infp "))
    'INFP'
    """
    text = code.strip().upper()
    if len(text) != 4:
        raise InvalidCode(f"expected 4 letters, got {code!r}")
    for (axis, a, b), letter in zip(AXES, text):
        if letter not in (a, b):
            raise InvalidCode(f"{code!r}: position for {axis} must be {a} or {b}")
    return MbtiCode(*text)


def all_codes() -> list[MbtiCode]:
    """The 16 codes in lexicographic order of their string form."""
    return sorted(MbtiCode(*p) for p in itertools.product(*[(a, b) for _, a, b in AXES]))


def dimension_groups(codes: Iterable[MbtiCode]) -> dict[str, tuple[frozenset, frozenset]]:
    """Split codes along each axis into (first-letter group, second-letter group)."""
    codes = frozenset(codes)
    if len(codes) != 16:
        raise ValueError(f"dimension grouping needs all 16 codes, got {len(codes)}")
    groups = {}
    for i, (axis, a, b) in enumerate(AXES):
        groups[axis] = (
            frozenset(c for c in codes if c.letters[i] == a),
            frozenset(c for c in codes if c.letters[i] == b),
        )
    return groups


@dataclass(frozen=True)
class PersonaProfile:
    code: MbtiCode
    persona_name: str
    profile_text: str

    def __post_init__(self):
        if not self.profile_text.strip():
            raise ValueError(f"empty profile text for {self.code}")
        if not self.profile_text.lstrip().startswith("You are"):
            raise ValueError(f"profile for {self.code} must begin with a second-person role assignment")


def render_role_prompt(profile: PersonaProfile) -> str:
    return profile.profile_text


def parse_persona_file(text: str) -> PersonaProfile:
    lines = text.splitlines()
    if len(lines) < 3 or not lines[0].startswith("code:") or not lines[1].startswith("name:"):
        raise ValueError("persona file needs 'code:' and 'name:' header lines followed by the profile")
    code = parse_mbti(lines[0].split(":", 1)[1])
    name = lines[1].split(":", 1)[1].strip()
    body = "\n".join(lines[2:]).strip()
    return PersonaProfile(code, name, body)


def load_personas(directory: str | Path | None = None) -> dict[str, PersonaProfile]:
    """Load every ``*.txt`` persona file in `directory` (default: shipped set)."""
    if directory is None:
        files = [f for f in resources.files("persona_gauge.data").joinpath("personas").iterdir()
                 if f.name.endswith(".txt")]
    else:
        files = list(Path(directory).glob("*.txt"))
    personas = {}
    for f in sorted(files, key=lambda f: f.name):
        profile = parse_persona_file(f.read_text(encoding="utf-8"))
        key = str(profile.code)
        if key in personas:
            raise ValueError(f"duplicate persona file for {key}")
        personas[key] = profile
    return personas


def _normalize(value: Any) -> Any:
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number in config: {value}")
        return int(value) if value.is_integer() else value
    if isinstance(value, Mapping):
        return {str(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    if dataclasses.is_dataclass(value):
        return _normalize(dataclasses.asdict(value))
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


def canonical_json(value: Any) -> str:
    """Sorted-key, whitespace-free JSON with integral floats written as integers."""
    return json.dumps(_normalize(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class RunConfig:
    backend: str = "scripted"
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    master_seed: int = 0
    parallelism: int = 1
    personas: tuple[str, ...] = ()
    task_params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in ("remote-chat", "scripted"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        object.__setattr__(self, "personas", tuple(str(parse_mbti(p)) for p in self.personas))

    def to_dict(self) -> dict:
        return _normalize(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "personas" in data:
            data["personas"] = tuple(data["personas"])
        return cls(**data)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    start_time: str
    personas: tuple[str, ...]
    tasks: tuple[str, ...]
    software_version: str
    config: Mapping[str, Any] = field(default_factory=dict)
    format_version: int = 1

    @classmethod
    def create(cls, config: RunConfig, tasks: Iterable[str], personas: Iterable[str],
               start_time: datetime | None = None) -> "RunManifest":
        from . import __version__

        start = (start_time or datetime.now(timezone.utc)).astimezone(timezone.utc)
        return cls(
            config_hash=config.config_hash(),
            start_time=start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            personas=tuple(personas),
            tasks=tuple(tasks),
            software_version=__version__,
            config=config.to_dict(),
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["personas"] = list(self.personas)
        d["tasks"] = list(self.tasks)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunManifest":
        d = dict(d)
        d["personas"] = tuple(d["personas"])
        d["tasks"] = tuple(d["tasks"])
        return cls(**d)
