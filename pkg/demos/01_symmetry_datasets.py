# %% [markdown]
# # Symmetry datasets
#
# Every generator produces an image together with its measured mirror
# symmetry.  The level index picks a target score (100% down to 20%) and
# the generator keeps degrading the shape until the score lands within
# 0.05 of it.

# %%
import sys
from pathlib import Path

import numpy as np

from visnet.ingest import write_pnm
from visnet.symmetry_data import (
    FAMILIES,
    LEVEL_TARGETS,
    SymmetrySpec,
    apply_transform,
    build_dataset,
    generate,
    symmetry_score,
)

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output/symmetry")
out.mkdir(parents=True, exist_ok=True)

# %% [markdown]
# One image per family and level.  The scores printed here are measured
# again from the pixels, not taken from the generator.

# %%
for family in FAMILIES:
    scores = []
    for level in range(5):
        item = generate(family, level, 32, np.random.default_rng(level), SymmetrySpec(family=family))
        scores.append(symmetry_score(item.pixels, mask=item.mask))
        write_pnm(out / f"{family}_level{level}.{'ppm' if item.pixels.ndim == 3 else 'pgm'}", item.pixels)
    print(f"{family:>18}: " + "  ".join(f"{s:.2f}" for s in scores))
print("targets           : " + "  ".join(f"{t:.2f}" for t in LEVEL_TARGETS))

# %% [markdown]
# Rotated and translated views keep the label of the object they came
# from, even though the mirror score of the view itself changes: the
# score is taken about the image's vertical centre line.  A half turn
# keeps a left-right symmetric shape symmetric; a shift moves it off the
# axis.

# %%
human = generate("human-like", 0, 32, np.random.default_rng(3))
for angle, shift in ((0, 0.0), (180, 0.0), (90, 0.0), (0, 0.1)):
    view = apply_transform(human.pixels, angle, (shift, 0.0))
    print(f"rotation {angle:>3}, shift {shift:.1f}: score {symmetry_score(view):.2f}")

# %% [markdown]
# A small named set written to disk with its manifest.

# %%
ds = build_dataset(SymmetrySpec(family="square", levels=2, count=40, seed=7, name="TWOCLASSES-SQUARE"), out / "set")
print(len(ds.indices("train")), "train /", len(ds.indices("test")), "test;",
      "class means", [round(float(ds.measured[ds.labels == c].mean()), 3) for c in range(2)])
