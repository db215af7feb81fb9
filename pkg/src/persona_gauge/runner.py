"""Run orchestration: config loading, agent construction and per-task data collection."""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from . import adaptability, bandit, reasoning, safety
from .core import RunConfig, RunManifest, all_codes, load_personas, parse_mbti
from .gateway import AgentHandle, RemoteChatClient
from .policies import OracleMcqPolicy, ScriptedPolicy, make_policy
from .reporting import (
    IoFailure,
    RunRecord,
    adaptability_raw,
    bandit_raw,
    load_run,
    persist_run,
    reasoning_raw,
    run_dir,
    safety_raw,
)
from .seeding import stream_seed

__all__ = [
    "DEFAULT_POLICIES",
    "POLICY_TASKS",
    "TASKS",
    "build_policy",
    "collect",
    "execute_run",
    "load_config",
    "resolve_personas",
]

TASKS = ("adaptability", "bandit", "reasoning", "safety")

# which scripted policies can answer which task's prompts
POLICY_TASKS = {
    "random": set(TASKS),
    "constant": set(TASKS),
    "ucb": {"bandit"},
    "probit": {"bandit"},
    "cycle": {"adaptability"},
    "habit": {"adaptability"},
    "oracle": {"reasoning"},
}

DEFAULT_POLICIES = {
    "adaptability": {"id": "habit", "stickiness": 0.7},
    "bandit": {"id": "probit", "w1": 0.5, "w2": 0.3},
    "reasoning": {"id": "random"},
    "safety": {"id": "random"},
}


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ValueError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must be a mapping")
    return RunConfig.from_dict(data)


def resolve_personas(config: RunConfig, override: Sequence[str] | None = None) -> list[str]:
    codes = override or config.personas
    if not codes:
        return [str(c) for c in all_codes()]
    return [str(parse_mbti(c)) for c in codes]


def task_params(config: RunConfig, task: str) -> dict[str, Any]:
    return dict(config.task_params.get(task, {}) or {})


def build_policy(task: str, spec: Mapping[str, Any], persona: str, master_seed: int,
                 items: Sequence[reasoning.McqItem] = ()) -> ScriptedPolicy:
    spec = dict(spec)
    pid = spec.pop("id")
    if task not in POLICY_TASKS.get(pid, set()):
        raise ValueError(f"policy {pid!r} cannot answer {task} prompts")
    if pid == "oracle":
        return OracleMcqPolicy.from_items(items)
    if pid == "habit" and "habit_seed" not in spec:
        # habits differ between personas but are reproducible
        spec["habit_seed"] = stream_seed(master_seed, persona, "habit") % 2**32
    return make_policy(pid, spec)


def _policy_spec(config: RunConfig, task: str, policy_override: str | None) -> dict:
    spec = dict(DEFAULT_POLICIES[task])
    spec.update(task_params(config, task).get("policy", {}) or {})
    if policy_override is not None and task in POLICY_TASKS.get(policy_override, set()):
        if spec.get("id") != policy_override:
            spec = {"id": policy_override}
    return spec


def _mmlu_items(params: Mapping[str, Any]) -> list[reasoning.McqItem]:
    directory = params.get("mmlu_dir")
    if directory is None:
        print("note: no mmlu_dir configured; using the bundled sample items", file=sys.stderr)
        directory = resources.files("persona_gauge.data").joinpath("mmlu_sample")
    return reasoning.load_mmlu(Path(str(directory)), params.get("per_subject_cap"))


def collect(task: str, config: RunConfig, personas: Sequence[str],
            client: RemoteChatClient | None = None, policy_override: str | None = None) -> dict[str, list[dict]]:
    """Query every persona on one task; returns raw artifacts keyed by file name."""
    profiles = load_personas()
    params = task_params(config, task)
    spec = _policy_spec(config, task, policy_override)
    seed, par = config.master_seed, config.parallelism
    items = _mmlu_items(params) if task == "reasoning" else []

    def agent(code: str) -> AgentHandle:
        if client is not None:
            return AgentHandle(profiles[code], client=client)
        return AgentHandle(profiles[code], policy=build_policy(task, spec, code, seed, items))

    if task == "adaptability":
        catalog = adaptability.load_catalog(params.get("catalog"))
        trajs = []
        for code in personas:
            trajs += adaptability.run_adaptability(agent(code), catalog, int(params.get("periods", 7)),
                                                   int(params.get("repeats", 5)), seed, code, par)
        return {"adaptability": adaptability_raw(catalog, trajs)}
    if task == "bandit":
        keys = ("mu0", "tau0", "tau", "trials_per_block", "blocks")
        bspec = bandit.BanditSpec(**{k: params[k] for k in keys if k in params})
        return {f"bandit_{code}": bandit_raw(bandit.run_campaign(agent(code), bspec, seed, code, par))
                for code in personas}
    if task == "reasoning":
        results = []
        for code in personas:
            results += reasoning.run_reasoning(agent(code), items, seed, persona=code, parallelism=par)
        return {"reasoning": reasoning_raw(results)}
    if task == "safety":
        inventory = safety.load_inventory(params.get("inventory"))
        baseline = safety.load_baseline(params.get("baseline"))
        responses = []
        for code in personas:
            responses += safety.administer(agent(code), inventory, seed, code)
        return {"safety": safety_raw(inventory, baseline, responses)}
    raise ValueError(f"unknown task {task!r}")


def execute_run(config: RunConfig, tasks: Sequence[str], runs_root: str | Path,
                client: RemoteChatClient | None = None, policy_override: str | None = None) -> Path:
    """Collect raw data for `tasks` and persist it with the manifest (no summaries)."""
    personas = resolve_personas(config)
    config = RunConfig.from_dict({**config.to_dict(), "personas": personas})
    manifest = RunManifest.create(config, tasks, personas)
    target = run_dir(runs_root, manifest)
    record = RunRecord(manifest)
    if (target / "manifest.json").exists():
        previous = load_run(target)
        done = set(previous.manifest.tasks) | set(tasks)
        record = RunRecord(RunManifest.create(config, [t for t in TASKS if t in done], personas),
                           previous.raw)
    for task in tasks:
        record.raw.update(collect(task, config, personas, client, policy_override))
    try:
        return persist_run(record, runs_root)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
