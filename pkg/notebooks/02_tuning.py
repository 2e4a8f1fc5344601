# %% [markdown]
# # Choosing the ridge penalty
#
# Every tuning criterion scores the same 200-point grid of penalties.

# %%
import numpy as np

from ridgetune import destandardize, standardize
from ridgetune.simgen import illustrative_dataset
from ridgetune.tuning import (
    default_grid,
    df_profile,
    loocv_profile,
    oracle_oex,
    profile_AIC,
    profile_CE,
    profile_D,
    profile_GCV,
    rcv,
    ridge_path,
)

data = illustrative_dataset(2)
std_data, std = standardize(data)
grid = default_grid()
path = ridge_path(std_data, grid)
loo = loocv_profile(std_data, path)
df_e = df_profile(path)
print("grid:", grid[0], "...", grid[-1], f"({grid.size} values)")

# %%
profiles = dict(
    D=profile_D(std_data, path, loo),
    CE=profile_CE(std_data, path, loo),
    GCV=profile_GCV(std_data, path, df_e, loo),
    AIC=profile_AIC(std_data, path),
)
for name, prof in profiles.items():
    slope = destandardize(path.betas[prof.selected_index], std)[1]
    print(f"{name:4s} lambda* = {prof.selected:.3g}  slope = {slope:.4f}  boundary: {prof.boundary_hit}")

# %% [markdown]
# Repeated 10-fold CV takes a quantile of the per-repetition choices.

# %%
for theta in (0.5, 0.95):
    lam = rcv(std_data, grid, theta, np.random.default_rng(1))
    print(f"RCV{int(theta * 100)} lambda* = {lam:.3g}")

# %% [markdown]
# Effective degrees of freedom fall from K+1 toward 1 as the penalty grows.

# %%
print(np.round(df_e[::40], 3))

# %% [markdown]
# With a known true slope, the explanation oracle picks the penalty whose
# estimate lands closest to it.

# %%
oex = oracle_oex(path, 0.3, std)
print("OEX lambda*:", oex.selected)
