"""
Monte Carlo sweeps: SINR versus angle and versus the number of surfaces
=======================================================================

Both sweeps compare the learned ON/OFF control ("Proposed") with leaving every
surface ON or every surface OFF. A ground-truth classifier stands in for the
CNN here so the script runs in seconds; pass a trained model through
``ExperimentConfig(model_path=...)`` to use the real one.
"""

# %%
from slris import harness

config = harness.ExperimentConfig(perfect_classifier=True, realizations=2000)


def show(table, label):
    values = sorted(next(iter(table.values())))
    print(f"{label:>10s} " + " ".join(f"{v:>7g}" for v in values))
    for scheme, row in table.items():
        print(f"{scheme:>10s} " + " ".join(f"{row[v]:7.2f}" for v in values))


# %%
# A wider angle weakens the reflected interference, so leaving the surface ON
# gets better with theta. The interferer also moves closer to the BS, which
# makes leaving it OFF slightly worse. The controller follows whichever is higher.
show(harness.rows_as_table(harness.sweep_theta(config)), "theta")

# %%
# Every extra surface adds coherent desired power; the OFF benchmark ignores
# them entirely and stays flat.
show(harness.rows_as_table(harness.sweep_k(config)), "K")

# %%
# Misclassification costs SINR: a Both window taken for Idle or IOnly turns all
# surfaces OFF. Corrupting labels at a growing rate shows the price.
for rate in (0.0, 0.05, 0.2):
    rows = harness.sweep_k(config.replace(k_grid=(5,)), harness.CorruptedClassifier(rate))
    print(f"corruption {rate:4.0%}: Proposed {harness.rows_as_table(rows)['Proposed'][5]:.2f} dB at K=5")
