# %% [markdown]
# # Running a small study end to end
#
# The same steps are available from the shell:
#
#     ridgetune simulate --scenario 100,2,1,0.25,0 --reps 5 --methods FC,IP,D --out run
#     ridgetune report --in run --out tables
#     ridgetune fit --data my.csv --outcome y --method D

# %%
import tempfile
from pathlib import Path

from ridgetune.harness.config import RunConfig
from ridgetune.harness.report import write_report
from ridgetune.harness.simulate import run_simulation

work = Path(tempfile.mkdtemp())
cfg = RunConfig(scenarios=["100,2,1,0.25,0"], reps=5, methods=["FC", "IP", "D"], out=str(work / "run"))
run_simulation(cfg)
for p in write_report(work / "run", work / "tables"):
    print(p.name)

# %%
print((work / "tables" / "table_rmse_beta1.csv").read_text())

# %% [markdown]
# Fitting one method to a CSV file prints a report and writes JSON next to it.

# %%
from ridgetune.harness.fitcmd import run_fit
from ridgetune.simgen import illustrative_dataset

d = illustrative_dataset(1)
csv_path = work / "ds1.csv"
csv_path.write_text("x,y\n" + "".join(f"{int(x)},{int(y)}\n" for x, y in zip(d.X[:, 1], d.y)))
_, text, json_path = run_fit(csv_path, "y", "D")
print(text)
print(json_path.name)
