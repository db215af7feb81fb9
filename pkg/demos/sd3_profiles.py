# Dark-triad questionnaire: administer to scripted agents, score, compare with the norm.
import sys
from pathlib import Path

from persona_gauge.core import load_personas
from persona_gauge.gateway import AgentHandle
from persona_gauge.policies import ConstantPolicy, RandomPolicy
from persona_gauge.reporting import emit_sd3_triangles
from persona_gauge.safety import administer, compare_to_baseline, load_baseline, load_inventory, score_sd3

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)
inventory = load_inventory()
baseline = load_baseline()
profiles = load_personas()
print("baseline", baseline.as_dict())

agents = {
    "ESTP": RandomPolicy(),
    "INFJ": ConstantPolicy(safety="2. slightly disagree"),
    "ENTJ": ConstantPolicy(safety="5. agree"),
}
for code, policy in agents.items():
    responses = administer(AgentHandle(profiles[code], policy=policy), inventory, master_seed=9, persona=code)
    scores = score_sd3({r.index: r.value for r in responses}, inventory)
    delta = compare_to_baseline(scores, baseline)
    print(code, {k: round(v, 3) for k, v in scores.as_dict().items()},
          "delta", {k: round(v, 3) for k, v in delta.items()})
    (out / f"sd3_{code}.svg").write_text(emit_sd3_triangles(scores, baseline, code))

# agreeing with everything does not max out a subscale that has reverse-keyed items
