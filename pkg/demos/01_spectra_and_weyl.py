# %% [markdown]
# # Steklov spectra on model domains
#
# The unit ball has sigma_k = k with the multiplicity of degree-k spherical
# harmonics. A radial conformal factor or a radial potential shifts every mode,
# and the shift decays in k at a rate set by the boundary jet of the perturbation.

# %%
import math

import numpy as np

from steklov_lab import modelgeo, tracelab

disk = modelgeo.ball_steklov_exact(2, 500)
ball = modelgeo.ball_steklov_exact(3, 200)
print(ball.sigma[:6], ball.multiplicity[:6])

# %% [markdown]
# Counting eigenvalues recovers the boundary volume: 2 pi for the circle,
# 4 pi for the sphere.

# %%
print("disk perimeter", tracelab.weyl_fit(disk, 2), "vs", 2 * math.pi)
print("sphere area   ", tracelab.weyl_fit(ball, 3), "vs", 4 * math.pi)

# %% [markdown]
# ## Conformal perturbations
#
# In two dimensions the spectrum ignores the conformal factor entirely.
# In three it does not, and the mode shift behaves like A + B/k + ...

# %%
ks = np.arange(0, 201)
prof = modelgeo.RadialProfile.normal_slope(0.4)
print("2D shift", np.max(np.abs(modelgeo.radial_conformal_modes(prof, ks, 2) - ks)))

shift = modelgeo.radial_conformal_modes(prof, ks, 3) - ks
fit = modelgeo.asymptotic_fit(ks, shift, order=4, k_min=50, k_max=200)
print("3D limit A =", fit.A, "(boundary slope times -1/4)")

# %% [markdown]
# A profile whose first normal derivative vanishes leaves A = 0 and moves the
# effect to the 1/k term.

# %%
flat = modelgeo.RadialProfile.matched_jet(1, 0.5)
shift = modelgeo.radial_conformal_modes(flat, ks, 3) - ks
fit = modelgeo.asymptotic_fit(ks, shift, order=4, k_min=50, k_max=200)
print("A =", fit.A, " B =", fit.B)
