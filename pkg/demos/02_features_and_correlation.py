# %% [markdown]
# # Cumulative-AUC features
#
# Every predictor is replaced by its running integral over the flight,
# so each row summarizes the usage history up to that moment. Integration
# restarts at zero for each experiment.

# %%
import numpy as np

from batterylife import features, synthgen

corpus = synthgen.generate_corpus(synthgen.SynthConfig(n_experiments=3, rows_per_experiment=2000))
frame = corpus[0]
engineered = features.featurize(frame)

rpm = frame.column("rpm")
cum_rpm = engineered.values[:, engineered.columns.index("rpm")]
print(rpm[:3], cum_rpm[:3])
print(np.isclose(cum_rpm[-1], rpm.sum() * frame.sample_interval_s))

# %% [markdown]
# The running sums use a compensated prefix sum, so long flights do not
# accumulate rounding error. Plain `np.cumsum` drops the tiny terms below.

# %%
x = np.concatenate([[1.0], np.full(100000, 1e-17)])
print(np.cumsum(x)[-1], features.compensated_cumsum(x)[-1])

# %% [markdown]
# After integration the predictors move together. The pooled correlation
# matrix is entirely positive.

# %%
pooled = features.stack_features(features.featurize_corpus(corpus))
corr = features.correlation(pooled)
print(corr.values.min().round(3), corr.values.shape)
