# %% [markdown]
# # Training a small network and reading it out
#
# A four-layer network is trained without labels on sequences of rotated
# and translated views. A linear classifier then learns the symmetry
# class from the top-layer activations. The sizes here are tiny so the
# script finishes in about a minute; `visnet run` uses the full
# configuration.

# %%
import sys
import time
from pathlib import Path

import numpy as np

from visnet.cli import main as visnet
from visnet.config import RunConfig
from visnet.datasets import load_dataset
from visnet.learning import train_network
from visnet.modelfile import save_model
from visnet.readout import readout_accuracy

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output/train")
cfg = RunConfig({
    "dataset": "TWOCLASSES-SQUARE",
    "data.count": 200,
    "grid": 32,
    "patches": (4, 6, 8, 10),
    "epochs": 1,
    "sequence_length": 3,
})
ds = load_dataset(cfg)

# %% [markdown]
# Untrained features first, as the baseline. At the larger settings of
# the acceptance runs the untrained network is already near perfect on
# this set, so compare the two numbers with that in mind.

# %%
net = cfg.network(seed=0)
before, n_train, n_test = readout_accuracy(net, ds, cfg.readout(0))
print(f"untrained: {before:.3f} on {n_test} test images")

# %%
t = time.perf_counter()
train_network(net, ds, cfg.learning(0))
after, _, _ = readout_accuracy(net, ds, cfg.readout(0))
print(f"trained:   {after:.3f}  ({time.perf_counter() - t:.0f} s)")

# %% [markdown]
# Neighbouring neurons start out with unrelated weights.  The trace rule
# has no competition between neurons, so training pulls them toward a
# shared direction.

# %%
cos = [float(np.mean(np.sum(L.weights[:-1] * L.weights[1:], axis=1))) for L in net.layers]
print("mean cosine of neighbouring weight rows per layer:", np.round(cos, 3))

# %% [markdown]
# Save the model and dump a few layer-1 receptive fields as PGM tiles.

# %%
model = out / "model.vnsn"
save_model(net, model)
visnet(["inspect-rf", "--model", str(model), "--layer", "1", "--max-tiles", "8", "--out", str(out / "rf")])
