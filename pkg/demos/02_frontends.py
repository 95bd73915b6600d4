# %% [markdown]
# # Front ends
#
# Gray images go through a bank of 32 Gabor filters (4 frequencies,
# 4 orientations, 2 phases).  The colour variant first splits RGB into
# luminance and two opponent channels, smooths each with a
# centre-surround DoG, and runs the same bank on all three, giving 96
# channels.

# %%
import numpy as np

from visnet.frontend import DOG_RGB_GABOR, FrontendConfig, GaborParams, opponent_channels
from visnet.symmetry_data import gen_rgb_symmetric

item = gen_rgb_symmetric(0, 32, np.random.default_rng(1))
rgb = item.pixels

gray = FrontendConfig(out_size=40)
colour = FrontendConfig(kind=DOG_RGB_GABOR, out_size=40)
g = gray.encode(rgb).data
c = colour.encode(rgb).data
print("gray stack", g.shape, "colour stack", c.shape)

# %% [markdown]
# Mean response per orientation.  The object is left-right symmetric, so
# the two diagonal orientations respond equally.

# %%
p = GaborParams()
n_o, n_p = len(p.orientations), len(p.phases)
per_orientation = g.reshape(40, 40, len(p.frequencies), n_o, n_p).mean(axis=(0, 1, 2, 4))
for theta, v in zip(p.orientations, per_orientation):
    print(f"theta {np.degrees(theta):5.1f} deg: {v:.4f}")

# %% [markdown]
# Opponent channels of a gray image are zero, so the colour sub-stacks of
# its DoG-Gabor encoding are zero too.

# %%
achromatic = gen_rgb_symmetric(0, 32, np.random.default_rng(1), achromatic=True).pixels
o = opponent_channels(achromatic)
stack = colour.encode(achromatic).data
print("max |RG|, |BG|:", np.abs(o.RG).max(), np.abs(o.BG).max())
print("energy per sub-stack (L, RG, BG):", [float(stack[:, :, k * 32:(k + 1) * 32].sum()) for k in range(3)])
