# %% [markdown]
# # Studies: schemes, lambda, noise, architecture
#
# Each study trains a batch of runs, caches every run by a hash of its
# configuration, and writes a CSV plus a manifest. The budget here is tiny so
# the script finishes in a couple of minutes; the trends only become
# reliable at the desk-scale defaults (1e4 epochs, 3 repeats), which the
# command line runs as e.g.
#
#     invpot compare-schemes --output out
#     invpot study-lambda --lambdas 1e-4,1e-2,10 --output out

# %% tags=["parameters"]
EPOCHS = 400
OUT = "demo-studies"

# %%
from pathlib import Path

from invpot.config import load_config
from invpot.studies import compare_schemes, study_architecture, study_lambda, study_noise

cfg = load_config(overrides={"epochs": EPOCHS, "repeats": 2, "resolution": 20})
out = Path(OUT)

# %%
res = compare_schemes(cfg, out / "schemes", cache=out)
for row in res.rows:
    print(row["scheme"], f"Re_q {row['re_q_mean']:.3f} +- {row['re_q_std']:.3f}",
          f"Re_lap_u {row['re_lap_u_mean']:.3f}")

# %%
res = study_lambda(cfg, [1e-4, 1e-2, 10], out / "lambda", cache=out)
print(res.summary)

# %%
res = study_noise(cfg, [0.001, 0.01, 0.1], out / "noise", cache=out)
print(res.summary)

# %%
res = study_architecture(cfg, [2], [10, 20], out / "arch", cache=out)
print(res.csv_path.read_text())
