# Two-armed bandit: simulate probit agents, replay their beliefs, refit the weights.
# Extraverted personas get a larger uncertainty weight; the E/I split should show it.
import sys
from pathlib import Path

import numpy as np

from persona_gauge.bandit import BanditSpec, run_campaign
from persona_gauge.core import all_codes, load_personas
from persona_gauge.gateway import AgentHandle
from persona_gauge.inference import dimension_proportions, fit_events, replay_beliefs
from persona_gauge.policies import ProbitPolicy
from persona_gauge.reporting import Bar, emit_bars

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)
profiles = load_personas()
spec = BanditSpec(blocks=100, trials_per_block=10)

fits = {}
for code in map(str, all_codes()):
    w2 = 0.4 if code[0] == "E" else 0.2
    agent = AgentHandle(profiles[code], policy=ProbitPolicy(w1=0.4, w2=w2))
    traj = run_campaign(agent, spec, master_seed=2024, persona=code)
    fits[code] = fit_events(replay_beliefs(traj))  # the prompts are text; the fit only sees choices
    f = fits[code]
    print(f"{code}  w1={f.w1:+.3f}  w2={f.w2:+.3f}  (true w2 {w2})  n={f.n_events}")

w = np.array([[f.w1, f.w2] for f in fits.values()])
print(f"\nmean w1 {w[:, 0].mean():.3f}, mean w2 {w[:, 1].mean():.3f}")

bars = []
for axis, d in dimension_proportions(fits).items():
    s = d.exploration
    pa = f"{s.proportion_a:.3f}" if s.valid else "n/a"
    print(f"{axis:<11} exploration share {d.group_a}: {pa}   means {s.group_a_mean:.3f} / {s.group_b_mean:.3f}")
    bars += [Bar(axis, d.group_a, s.proportion_a, s.valid), Bar(axis, d.group_b, s.proportion_b, s.valid)]

(out / "exploration_share.svg").write_text(emit_bars(bars, "exploration share by axis"))
print(f"chart -> {out / 'exploration_share.svg'}")
