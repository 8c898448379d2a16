# %% [markdown]
# # Flight telemetry corpus
#
# One CSV per flight experiment, 17 predictors plus the remaining flight
# time in seconds. Here a small synthetic corpus is written to disk, read
# back, damaged on purpose and repaired.

# %%
import tempfile
from pathlib import Path

import numpy as np

from batterylife import synthgen, telemetry

workdir = Path(tempfile.mkdtemp())
corpus = synthgen.generate_corpus(synthgen.SynthConfig(n_experiments=3, rows_per_experiment=1000))
for frame in corpus:
    telemetry.write_experiment(frame, workdir / f"{frame.experiment_id}.csv")
loaded = telemetry.load_corpus(workdir)
print([f.experiment_id for f in loaded], loaded[0].values.shape)

# %% [markdown]
# Columns and their roles. Predictors split into aircraft state, battery
# voltages, currents and temperatures.

# %%
schema = telemetry.DEFAULT_SCHEMA
for name in schema.columns[:5]:
    print(f"{name:18s} {schema.role(name):12s} {telemetry.UNITS[name]}")

# %% [markdown]
# Plant a few defects and look at the validation report.

# %%
frame = loaded[0]
frame.values[10, 4] = np.nan
frame.values[11, 7] = np.inf
frame.values[500, 0] = -5.0
report = telemetry.validate_frame(frame)
print(report.missing_cells, report.nonfinite_cells, report.negative_response_rows)

# %% [markdown]
# `drop` removes every defective row, `interpolate` fills interior gaps
# from neighbouring rows in the same column.

# %%
dropped = telemetry.clean_frame(frame, "drop")
filled = telemetry.clean_frame(frame, "interpolate")
print(len(frame), len(dropped), len(filled))
print(telemetry.validate_frame(filled).is_clean)
