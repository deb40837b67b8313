# %% [markdown]
# # Conformal factors as potentials
#
# A conformal change of metric can be traded for a Schrodinger potential plus
# a boundary shift. Here the trade is checked mode by mode.

# %%
import numpy as np

from steklov_lab import modelgeo, symcalc

n = 3
ks = np.arange(0, 41)
prof = modelgeo.RadialProfile.preset("bump")

lhs = modelgeo.radial_conformal_modes(prof, ks, n)
q = lambda r: -symcalc.conformal_schrodinger_potential(prof, n, [r])[0]
rhs = modelgeo.radial_potential_modes(q, ks, n) - (n - 2) / 4 * prof.at_boundary(1)
print("max mismatch", np.max(np.abs(lhs - rhs)))

# %% [markdown]
# ## Leading symbol terms
#
# If two metrics agree to order J at the boundary, the symbol difference
# starts at degree -J and its coefficient is linear in the next derivative.

# %%
c = np.array([0.3, -0.7])
for J in range(4):
    jet = symcalc.BoundaryJet.from_derivatives("conformal", [1.0] + [0.0] * J + [c])
    term = symcalc.conformal_leading_term(jet, J + 1, n)
    print(J, term.degree, term.coeff)
