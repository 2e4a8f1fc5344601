# %% [markdown]
# # Performance measures on one replicate

# %%
import numpy as np

from ridgetune import PenaltySpec, destandardize, fit_firth, fit_ridge_augmented, standardize
from ridgetune.metrics import c_index, calibration_slope, rmsd_log_slope, squared_pred_error
from ridgetune.simgen import ScenarioConfig, default_calibration, generate_dataset, generate_validation

cal = default_calibration()
sc = ScenarioConfig(250, 2, 1.0, 0.25, False)
gen = generate_dataset(sc, 0, 1, cal)
val = generate_validation(sc, 0, 1, cal)

std_data, std = standardize(gen.data)
fits = dict(
    FC=fit_firth(gen.data).beta,
    IP=destandardize(fit_ridge_augmented(std_data, PenaltySpec(2.0)).beta, std),
)

# %%
for name, beta in fits.items():
    p_train = 1 / (1 + np.exp(-gen.data.X @ beta))
    slope = calibration_slope(val, beta)
    print(f"{name}: beta1 error {beta[1] - gen.beta_true[0]:+.3f}  "
          f"pred RMSE x1e4 {1e4 * np.sqrt(squared_pred_error(p_train, gen.pi_true)):.0f}  "
          f"slope {slope:.3f}  c {c_index(val.data.X @ beta, val.data.y):.3f}")

# %% [markdown]
# Slopes below 0.01 are raised to 0.01 before taking logs.

# %%
print(rmsd_log_slope([1.0, 0.8, 1.3, 0.001]))
