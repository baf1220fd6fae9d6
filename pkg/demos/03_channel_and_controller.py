"""
When does switching the surface ON pay off?
===========================================

The BS sees the desired user through a weak direct link plus one coherent
reflection per active RIS. An active RIS also reflects the interferer, less so
the wider the angle theta between the two users as seen from the surface.
"""

# %%
import numpy as np

from slris import channel as ch
from slris import controller as ctl

for theta in (30, 45, 60, 90, 120, 150):
    p = ch.ScenarioParams(theta=theta, K=1, p_i=10.0)
    lay = ch.layout(p)
    on = ch.sinr(p, lay, [True]).sinr_db
    off = ch.sinr(p, lay, [False]).sinr_db
    print(f"theta {theta:3d}: ON {on:6.2f} dB  OFF {off:6.2f} dB  -> {'ON' if on > off else 'OFF'}")

# %%
# The controller acts on the classifier's belief. With no desired signal there
# is nothing worth reflecting; without interference reflecting always helps.
p = ch.ScenarioParams(theta=40.0, K=4, p_i=12.0)
lay = ch.layout(p)
for cls in range(4):
    post = np.eye(4)[cls]
    d = ctl.decide(post, p, lay)
    print(f"{d.inferred_class.name:7s} -> states {d.states.astype(int)}  {d.rationale.value:15s} predicted {d.predicted_sinr_db:.2f} dB")

# %%
# With both users present the controller walks the surfaces in order and keeps
# each one ON only if that strictly helps. Exhaustive search is the yardstick.
budget = ch.link_budget(p, lay)
g = ctl.greedy_states(p, lay)
o = ctl.oracle_states(p, lay)
print("greedy", g.astype(int), f"{budget.sinr_db(g):.3f} dB")
print("oracle", o.astype(int), f"{budget.sinr_db(o):.3f} dB")
