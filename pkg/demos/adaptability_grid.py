# Daily-schedule task: habit-driven agents fill a week of time blocks with POI categories.
# Habits attach to a time block, so stickier agents repeat each block across days:
# stability rises while the within-day mix (flexibility) stays high.
import sys
from pathlib import Path

from persona_gauge.adaptability import flexibility, load_catalog, run_adaptability, stability
from persona_gauge.core import load_personas
from persona_gauge.gateway import AgentHandle
from persona_gauge.policies import CyclePolicy, HabitPolicy
from persona_gauge.reporting import emit_adaptability_grid

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)
catalog = load_catalog()
print(f"{len(catalog)} categories in the default catalog")

profiles = load_personas()
for stick in (0.0, 0.5, 0.95):
    agent = AgentHandle(profiles["ISTJ"], policy=HabitPolicy(stickiness=stick, habit_seed=3))
    trajs = run_adaptability(agent, catalog, periods=7, repeats=3, master_seed=1, persona="ISTJ")
    flex = sum(flexibility(t.names()) for t in trajs) / len(trajs)
    stab = sum(stability(t.names()) for t in trajs) / len(trajs)
    print(f"stickiness {stick:.2f}:  flexibility {flex:.3f}  stability {stab:.3f}")
    path = out / f"grid_stickiness_{int(stick * 100):02d}.svg"
    path.write_text(emit_adaptability_grid(trajs[0], f"ISTJ, stickiness {stick}"))

# a fixed routine: one place per block, identical every day
script = {b: catalog.categories[i] for i, b in enumerate(("morning", "noon", "afternoon", "evening", "night"))}
t = run_adaptability(AgentHandle(profiles["ENFP"], policy=CyclePolicy(script)), catalog, 7, 1, 1, "ENFP")[0]
print(f"scripted routine:  flexibility {flexibility(t.names()):.3f}  stability {stability(t.names()):.3f}")
