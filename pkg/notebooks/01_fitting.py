# %% [markdown]
# # Fitting rare-event logistic models
#
# Two small datasets with one binary exposure: in the first, no unexposed
# subject has the event, so the data are separated and ML diverges.

# %%
import numpy as np

from ridgetune import (
    PenaltySpec,
    destandardize,
    detect_separation,
    fit_firth,
    fit_ml,
    fit_ridge_augmented,
    flic,
    standardize,
)
from ridgetune.simgen import illustrative_dataset

ds1, ds2 = illustrative_dataset(1), illustrative_dataset(2)
for name, d in (("dataset 1", ds1), ("dataset 2", ds2)):
    print(name, "separated:", detect_separation(d).separated)

# %% [markdown]
# ML on dataset 1 keeps pushing the slope upward. The fit reports
# non-convergence rather than a coefficient.

# %%
ml = fit_ml(ds1)
print("ML converged:", ml.converged, "beta:", np.round(ml.beta, 2), sorted(ml.flags))

# %% [markdown]
# Firth's correction gives finite estimates on both. FLIC then re-estimates
# the intercept so the average prediction equals the observed event rate.

# %%
for d in (ds1, ds2):
    fc = fit_firth(d)
    fl = flic(d, fc)
    print(f"FC slope {fc.beta[1]:.4f}  mean p {fc.predict_proba(d.X).mean():.4f}  "
          f"FLIC mean p {fl.predict_proba(d.X).mean():.4f}  event rate {d.y.mean():.2f}")

# %% [markdown]
# Ridge works on standardized covariates; coefficients are mapped back to the
# original scale afterwards.

# %%
std_data, std = standardize(ds2)
for lam in (0.5, 2.0, 20.0):
    fit = fit_ridge_augmented(std_data, PenaltySpec(lam))
    print(f"lambda {lam:5.1f}: slope {destandardize(fit.beta, std)[1]:.4f}")
