"""Two-armed Gaussian bandit environment and the trial-by-trial interaction protocol."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import IO, Callable, Iterable

import numpy as np

from . import prompts
from .gateway import AgentHandle, build_messages, complete
from .inference import PosteriorState, init_posterior, kalman_update
from .seeding import parallel_map, request_seed, stream_seed, substreams

__all__ = [
    "BanditSpec",
    "BanditTrajectory",
    "BlockInstance",
    "ChoiceRecord",
    "block_seed",
    "parse_arm",
    "pull",
    "read_trajectory",
    "run_block",
    "run_campaign",
    "sample_block",
    "simulate_campaign",
    "write_trajectory",
]

MAX_REPROMPTS = 3


def _pair(x, name):
    if np.ndim(x) == 0:
        return (float(x), float(x))
    vals = tuple(float(v) for v in x)
    if len(vals) != 2:
        raise ValueError(f"{name} needs one value per arm (2 arms)")
    return vals


@dataclass(frozen=True)
class BanditSpec:
    mu0: tuple = (0.0, 0.0)
    tau0: tuple = (10.0, 10.0)
    tau: tuple = (10.0, 10.0)
    trials_per_block: int = 10
    blocks: int = 100
    arms: int = 2
    degenerate: bool = False

    def __post_init__(self):
        for name in ("mu0", "tau0", "tau"):
            object.__setattr__(self, name, _pair(getattr(self, name), name))
        if self.arms != 2:
            raise ValueError("only two-armed bandits are supported")
        if self.trials_per_block < 1 or self.blocks < 1:
            raise ValueError("trials_per_block and blocks must be positive")
        for name in ("tau0", "tau"):
            vals = getattr(self, name)
            if any(v < 0 for v in vals) or (not self.degenerate and any(v == 0 for v in vals)):
                raise ValueError(f"{name} must be positive (zero only in degenerate mode)")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("mu0", "tau0", "tau"):
            d[k] = list(d[k])
        return d


@dataclass(frozen=True)
class BlockInstance:
    arm_means: tuple[float, float]


@dataclass(frozen=True)
class ChoiceRecord:
    block: int
    trial: int
    arm: int
    reward: float
    flagged: bool = False
    reply: str = ""


@dataclass
class BanditTrajectory:
    spec: BanditSpec
    records: list[ChoiceRecord] = field(default_factory=list)
    block_seeds: dict[int, int] = field(default_factory=dict)
    persona: str = "NONE"

    @property
    def complete(self) -> bool:
        return len(self.records) == self.spec.blocks * self.spec.trials_per_block

    def validate(self) -> None:
        for r in self.records:
            if not (0 <= r.block < self.spec.blocks and 0 <= r.trial < self.spec.trials_per_block):
                raise ValueError(f"record out of bounds: {r}")
            if r.arm not in (0, 1):
                raise ValueError(f"bad arm in {r}")


def sample_block(spec: BanditSpec, rng: np.random.Generator) -> BlockInstance:
    means = rng.normal(spec.mu0, spec.tau0)
    return BlockInstance((float(means[0]), float(means[1])))


def pull(instance: BlockInstance, arm: int, spec: BanditSpec, rng: np.random.Generator) -> float:
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm!r}")
    return float(rng.normal(instance.arm_means[arm], spec.tau[arm]))


def block_seed(master_seed: int, persona: str, block: int) -> int:
    """Seed of one block's stream: hash of (master seed, persona code, block index)."""
    return stream_seed(master_seed, persona, block)


_ARM_RE = re.compile(r"(?<![\w.])([01])(?!\w|\.\d)")


def parse_arm(reply: str) -> int | None:
    """First standalone ``0`` or ``1`` in the reply."""
    m = _ARM_RE.search(reply)
    return int(m[1]) if m else None


def run_block(agent: AgentHandle, spec: BanditSpec, block_index: int, seed: int) -> list[ChoiceRecord]:
    """Play one block; the environment and the agent draw from separate substreams of `seed`."""
    env_rng, policy_rng = substreams(seed, 2)
    instance = sample_block(spec, env_rng)
    histories: list[list[float]] = [[], []]
    records = []
    T = spec.trials_per_block
    for t in range(T):
        prompt = prompts.render_bandit(histories, T, t + 1)
        messages = build_messages(agent.persona, prompt)
        arm = None
        replies = []
        for attempt in range(MAX_REPROMPTS + 1):
            reply = complete(agent, messages, rng=policy_rng, request_seed=request_seed(seed, t, attempt))
            replies.append(reply)
            arm = parse_arm(reply)
            if arm is not None:
                break
        flagged = arm is None
        if flagged:
            arm = int(policy_rng.integers(2))
        reward = pull(instance, arm, spec, env_rng)
        histories[arm].append(reward)
        records.append(ChoiceRecord(block_index, t, arm, reward, flagged, replies[-1]))
    return records


def run_campaign(agent: AgentHandle, spec: BanditSpec, master_seed: int = 0,
                 persona: str | None = None, parallelism: int = 1) -> BanditTrajectory:
    persona = persona or agent.label
    seeds = {b: block_seed(master_seed, persona, b) for b in range(spec.blocks)}

    def one(b):
        try:
            return run_block(agent, spec, b, seeds[b])
        except Exception as exc:
            raise RuntimeError(f"bandit block {b} for {persona} failed: {exc}") from exc

    blocks = parallel_map(one, range(spec.blocks), parallelism)
    records = [r for blk in blocks for r in blk]
    return BanditTrajectory(spec, records, seeds, persona)


def simulate_campaign(choose: Callable[[PosteriorState, np.random.Generator], int], spec: BanditSpec,
                      master_seed: int = 0, persona: str = "SIM") -> BanditTrajectory:
    """Play a campaign with a belief-level policy ``choose(state, rng) -> arm``, skipping prompts.

    Block seeding matches :func:`run_campaign`, so a policy that reads the same
    beliefs from the prompt sees the same environment.
    """
    seeds = {b: block_seed(master_seed, persona, b) for b in range(spec.blocks)}
    records = []
    for b in range(spec.blocks):
        env_rng, policy_rng = substreams(seeds[b], 2)
        instance = sample_block(spec, env_rng)
        state = init_posterior(spec)
        for t in range(spec.trials_per_block):
            arm = int(choose(state, policy_rng))
            reward = pull(instance, arm, spec, env_rng)
            records.append(ChoiceRecord(b, t, arm, reward))
            state = kalman_update(state, arm, reward, spec.tau[arm] ** 2)
    return BanditTrajectory(spec, records, seeds, persona)


def write_trajectory(fh: IO[str], traj: BanditTrajectory) -> None:
    """JSON lines: a header with the spec and block seeds, then one line per trial."""
    header = {
        "kind": "bandit-header",
        "persona": traj.persona,
        "spec": traj.spec.to_dict(),
        "block_seeds": [traj.block_seeds[b] for b in sorted(traj.block_seeds)],
    }
    fh.write(json.dumps(header, sort_keys=True) + "\n")
    for r in traj.records:
        fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def read_trajectory(lines: Iterable[str]) -> BanditTrajectory:
    it = iter(lines)
    header = json.loads(next(it))
    if header.get("kind") != "bandit-header":
        raise ValueError("bandit trajectory must start with a header line")
    spec = BanditSpec(**header["spec"])
    records = [ChoiceRecord(**json.loads(line)) for line in it if line.strip()]
    seeds = dict(enumerate(header["block_seeds"]))
    return BanditTrajectory(spec, records, seeds, header["persona"])
