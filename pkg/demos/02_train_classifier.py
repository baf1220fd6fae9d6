"""
Training the four-way occupancy classifier
==========================================

A small convolutional network is trained from scratch with Adam. This demo
uses a reduced setup that finishes in a few seconds; the default pipeline (10^4 windows per
class, L=512, 20 epochs) is what the acceptance suite trains.
"""

# %%
import numpy as np

from slris import dataset, harness, neuralnet as nn

data = dataset.build_dataset(n_per_class=1000, L=128, seed=0)
parts = dataset.split(data, ratio=0.8, seed=0)
model = nn.init_model(128, seed=0)
print(nn.describe(model))

# %%
# Untrained, the output is close to uniform, so the loss starts near ln 4.
report_cfg = nn.TrainConfig(epochs=4, batch_size=64, learning_rate=1e-3, seed=0)
trained, report = nn.train(model, parts, report_cfg)
print(f"initial loss {report.initial_loss:.3f} (ln 4 = {np.log(4):.3f})")
for epoch, (loss, acc) in enumerate(zip(report.epoch_loss, report.epoch_accuracy), start=1):
    print(f"epoch {epoch}: loss {loss:.4f}  train accuracy {acc:.4f}")

# %%
# Errors concentrate on low-SNR windows where one user is buried in noise.
ev = harness.eval_classifier(trained, parts.test)
print(ev.to_csv())
