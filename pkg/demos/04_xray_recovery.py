# %% [markdown]
# # Recovering boundary jets from geodesic averages
#
# On a compact hyperbolic surface, a function is determined by its averages
# over closed geodesics. Here the surface is the genus two octagon surface and
# functions live in a span of periodized Gaussian bumps.

# %%
import numpy as np

from steklov_lab import anosovgeo, recover

surface = anosovgeo.build_default_surface()
classes = anosovgeo.enumerate_classes(surface, 4)
print(len(classes), "classes, shortest length", classes[0].length)

# %%
basis = anosovgeo.BumpBasis.random(surface, 20, seed=1)
system = anosovgeo.build_xray_system(basis, classes)
print("shape", system.shape, "condition", system.condition)

x0 = np.random.default_rng(0).standard_normal(len(basis))
x = anosovgeo.xray_invert(system, system.matrix @ x0)
print("round trip error", np.linalg.norm(x - x0))

# %% [markdown]
# ## Order by order
#
# Plant a difference in the third normal derivative of the conformal factor
# (jet row 3). The metrics then agree to order J = 2 and the pipeline should
# report that order.

# %%
plant = 0.1 * np.random.default_rng(1).standard_normal(len(basis))
a = recover.SurfaceJet.zeros("conformal", 5, basis)
b = recover.SurfaceJet.planted("conformal", 5, 3, plant, basis)
res = recover.run_pipeline(a, b, system, 3, 4)
print(res.verdict, "at order", res.first_nonzero_order)
pts = recover.sample_points(surface, 200, seed=2)
print("field error", recover.field_error(basis, res.jet.row(3), plant, pts))
