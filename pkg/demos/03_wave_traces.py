# %% [markdown]
# # Wave traces
#
# The mollified wave trace sum_k m_k exp(-i sigma_k t) concentrates at the
# lengths of periodic boundary orbits. For the disk those are multiples of 2 pi.

# %%
import math

import numpy as np

from steklov_lab import modelgeo, tracelab

disk = modelgeo.ball_steklov_exact(2, 200)
sig = tracelab.mollified_trace(disk)
peaks = tracelab.find_peaks(sig)
print("strongest peaks", np.sort(peaks.strongest(2)), "expected", 2 * math.pi, 4 * math.pi)

# %% [markdown]
# ## Differences between two spectra
#
# Subtracting a reference spectrum leaves a weak singularity whose strength
# drops as the perturbation is pushed to higher boundary order.

# %%
base = modelgeo.ball_steklov_exact(3, 200)
for J in (1, 2, 3):
    pert = modelgeo.conformal_ball_spectrum(modelgeo.RadialProfile.matched_jet(J, 0.5), 3, 200)
    diff = tracelab.difference_trace(pert, base, bandwidth=base.sigma_max / 20)
    near = np.abs(diff.t - 2 * math.pi) <= 3 * diff.step
    print(J, diff.abs[near].max())

# %% [markdown]
# ## A return operator on the circle
#
# Conjugating exp(-i t A) by a zeroth order multiplier leaves an error that
# halves when the grid is doubled.

# %%
for N in (256, 512):
    print(N, tracelab.return_operator_lab(np.cos, 1, N, math.pi).deviation)
