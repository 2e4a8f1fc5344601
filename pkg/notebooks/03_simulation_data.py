# %% [markdown]
# # Simulated cohorts
#
# Fifteen covariates come from correlated latent normals. The listed
# correlations do not form a valid matrix, so they are repaired first.

# %%
import numpy as np

from ridgetune.simgen import (
    ScenarioConfig,
    all_scenarios,
    default_calibration,
    default_correlation,
    generate_dataset,
    generate_validation,
)

corr = default_correlation()
print("smallest eigenvalue before / after repair:",
      round(corr.report["min_eigenvalue_assembled"], 3), corr.report["min_eigenvalue_repaired"])
print("entries changed by the repair:", len(corr.report["repaired_entries"]))

# %% [markdown]
# Continuous effects are set so that the log odds ratio between the first and
# fifth sextile is 0.69. This takes a million draws and is cached.

# %%
cal = default_calibration()
print("effects:", np.round(cal.beta, 4))

# %%
print(len(all_scenarios()), "scenarios")
sc = ScenarioConfig.parse("100,5,1,0.1,1")
gen = generate_dataset(sc, replicate=0, master_seed=20240601, calibration=cal)
print(sc.scenario_id, "columns:", gen.data.X.shape[1] - 1, "events:", int(gen.data.y.sum()))
print("intercept:", round(gen.beta0, 4))

# %%
val = generate_validation(sc, 0, 20240601, cal)
print("validation size:", val.data.n, "event rate:", val.data.y.mean())
