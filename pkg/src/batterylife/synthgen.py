"""Seeded synthetic flight telemetry.

The generator imitates statistical structure, not physics. Every predictor is a
positive mix of a few shared latent load signals plus small independent
noise, which after cumulative-AUC featurization leaves nearly all variance
in as many principal components as there are latent signals. The response
is a monotone remaining-time estimate driven by consumed energy, shaped so
the pooled histogram is flat over its lower range with a decaying upper tail.

Value bands with the default loadings and noise: voltages 5-70 V,
currents 20-100 A, temperatures 15-85 degC, rpm 1000-5000.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .telemetry import DEFAULT_SCHEMA, PREDICTORS, TelemetryFrame

# Per-predictor magnitude and loading on the first two latent signals.
# The first seven columns follow the propulsion load, the last ten follow
# the slowly rising thermal/electrical load, giving two correlated clusters.
_MAGNITUDE = {
    "rpm": 3000.0, "fmc": 40.0, "amc": 40.0,
    "llf20v": 20.0, "ula20v": 20.0, "lrf40v": 40.0, "ura40v": 40.0,
    "lrf20v": 20.0, "ura20v": 20.0,
    "llf20c": 30.0, "ula20c": 30.0, "lrf40c": 30.0, "ura40c": 30.0,
    "llf20t": 25.0, "ula20t": 25.0, "lrf40t": 25.0, "ura40t": 25.0,
}
_PRIMARY_LOADING = np.array([1.0] * 7 + [0.0] * 10)
_CROSS_LOADING = 0.08


@dataclass(frozen=True)
class SynthConfig:
    n_experiments: int = 9
    rows_per_experiment: int = 5000
    seed: int = 7
    latent_factor_count: int = 2
    noise_scale: float = 0.01
    response_uniform_fraction: float = 0.6
    sample_interval_s: float = 1.0

    def validate(self) -> "SynthConfig":
        if int(self.n_experiments) < 1:
            raise InvalidConfig("n_experiments must be a positive integer")
        if int(self.rows_per_experiment) < 2:
            raise InvalidConfig("rows_per_experiment must be at least 2")
        if not 1 <= int(self.latent_factor_count) <= len(PREDICTORS):
            raise InvalidConfig("latent_factor_count must lie in [1, 17]")
        if not self.noise_scale > 0:
            raise InvalidConfig("noise_scale must be positive")
        if not 0.0 <= self.response_uniform_fraction <= 1.0:
            raise InvalidConfig("response_uniform_fraction must lie in [0, 1]")
        if not self.sample_interval_s > 0:
            raise InvalidConfig("sample_interval_s must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        return self


def loading_matrix(latent_factor_count: int) -> np.ndarray:
    """Non-negative 17 x m mixing weights from latent signals to predictors."""
    m = latent_factor_count
    p = len(PREDICTORS)
    b = np.zeros((p, m))
    if m == 1:
        b[:, 0] = 1.0
        return b
    b[:, 0] = _PRIMARY_LOADING + _CROSS_LOADING * (1 - _PRIMARY_LOADING)
    b[:, 1] = (1 - _PRIMARY_LOADING) + _CROSS_LOADING * _PRIMARY_LOADING
    # further signals each pick up a rotating subset of columns
    for f in range(2, m):
        b[(np.arange(p) + f) % (m - 1) == 0, f] = 0.5
    return b


def _smooth_walk(rng: np.random.Generator, n: int, corr_rows: float) -> np.ndarray:
    """AR(1)-filtered Gaussian noise squashed into (-1, 1)."""
    phi = np.exp(-1.0 / corr_rows)
    shocks = rng.standard_normal(n) * np.sqrt(1 - phi * phi)
    out = np.empty(n)
    acc = rng.standard_normal()
    for k in range(n):
        acc = phi * acc + shocks[k]
        out[k] = acc
    return np.tanh(out)


def latent_signals(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """n x m positive latent signals for one experiment.

    Signal 0 is a fluctuating propulsion load that eases off as the flight
    goes on. Signal f >= 1 rises as (t / T)**(f + 1), a heating-like trend,
    with a small fluctuation on top. The opposite curvature of the two
    trends is what keeps their running integrals from being collinear.
    """
    t = np.arange(n) / n
    out = np.empty((n, m))
    level = 1.0 + 0.05 * rng.standard_normal()
    out[:, 0] = level * (1.0 - 0.6 * t) * (1.0 + 0.3 * _smooth_walk(rng, n, n / 20))
    for f in range(1, m):
        trend = 1.0 + 2.0 * t ** (f + 1) * (1.0 + 0.05 * rng.standard_normal())
        out[:, f] = trend + 0.1 * _smooth_walk(rng, n, n / 10)
    return out


def _shape_remaining(s: np.ndarray, u: float) -> np.ndarray:
    """Map remaining energy fraction s in (0, 1] to a dimensionless remaining time.

    Linear below ``u``; above it the slope grows so that, for s spread
    uniformly, the density of the output decays exponentially.
    """
    g = s.copy()
    if u >= 1.0:
        return g
    k = 0.9 / (1.0 - u)  # log argument stays >= 0.1 at s = 1
    upper = s > u
    g[upper] = u - np.log1p(-(s[upper] - u) * k) / k
    return g


def generate_experiment(config: SynthConfig, index: int, experiment_id: str) -> TelemetryFrame:
    rng = np.random.default_rng(int(config.seed) ^ int(index))
    n = int(config.rows_per_experiment)
    m = int(config.latent_factor_count)
    dt = float(config.sample_interval_s)

    latent = latent_signals(rng, n, m)
    magnitude = np.array([_MAGNITUDE[c] for c in PREDICTORS])
    clean = (latent @ loading_matrix(m).T) * magnitude
    noise = rng.standard_normal(clean.shape) * (config.noise_scale * magnitude)
    predictors = np.abs(clean + noise)

    # remaining time follows the energy drawn by the propulsion load
    used = np.cumsum(latent[:, 0]) * dt
    capacity = used[-1] * (1.0 + rng.uniform(0.01, 0.05))
    remaining_fraction = 1.0 - used / capacity
    scale = n * dt * (1.0 + 0.05 * rng.standard_normal())
    response = scale * _shape_remaining(remaining_fraction, config.response_uniform_fraction)
    response = np.minimum.accumulate(np.maximum(response, 0.0))

    values = np.column_stack([response, predictors])
    return TelemetryFrame(experiment_id, values, dt, DEFAULT_SCHEMA)


def experiment_names(n: int) -> list:
    width = len(str(n))
    return [f"exp{i + 1:0{width}d}" for i in range(n)]


def generate_corpus(config: SynthConfig = SynthConfig()) -> list:
    """Generate ``config.n_experiments`` frames. Same seed, same bits.

    Experiment ``i`` draws from its own stream seeded with ``seed ^ i``, so
    experiments can be produced in any order or in parallel.
    """
    config.validate()
    names = experiment_names(int(config.n_experiments))
    return [generate_experiment(config, i, name) for i, name in enumerate(names)]
