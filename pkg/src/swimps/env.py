"""Soil-water bucket and diurnal weather model.

The environment is the ground truth the simulated device senses and acts
on: a single moisture reservoir dried by an evapotranspiration proxy and
wetted while the pump runs, under sinusoidal daily temperature/humidity
with optional seeded Gaussian noise. Everything here is a pure function
of its inputs, so the model is safe to share between any number of
simulated devices.
"""

import math
from dataclasses import dataclass

from . import rng

DAY_S = 86400.0


@dataclass(frozen=True)
class EnvParams:
    """Environment constants for one scenario.

    Rates are percent moisture per minute; temperatures degrees C;
    humidity percent. ``noise_sigma`` scales the per-second Gaussian
    weather noise; ``seed`` makes it reproducible.
    """

    e0: float = 0.05
    aT: float = 0.02
    aH: float = 0.5
    irr_rate: float = 0.5
    t_mean: float = 28.0
    t_amp: float = 5.0
    rh_mean: float = 70.0
    rh_amp: float = 20.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.e0 < 0:
            raise ValueError("e0 must be >= 0")
        if self.irr_rate <= 0:
            raise ValueError("irr_rate must be > 0")
        if self.t_amp < 0 or self.rh_amp < 0:
            raise ValueError("amplitudes must be >= 0")
        if self.rh_mean - self.rh_amp < 0 or self.rh_mean + self.rh_amp > 100:
            raise ValueError("rh_mean +/- rh_amp must stay within [0, 100]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be an unsigned integer")


@dataclass(frozen=True)
class SoilState:
    """Volumetric water content, percent, always clamped to [0, 100]."""

    moisture: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.moisture <= 100.0:
            raise ValueError(f"moisture {self.moisture} outside [0, 100]")


@dataclass(frozen=True)
class Weather:
    temp_c: float
    rh_pct: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.rh_pct <= 100.0:
            raise ValueError(f"rh_pct {self.rh_pct} outside [0, 100]")


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def weather_at(t: float, params: EnvParams) -> Weather:
    """Weather at ``t`` seconds since scenario start.

    Diurnal sinusoid (temperature peaks a quarter day in, humidity in
    antiphase) plus seeded noise keyed on the whole second, so the same
    (t, params) always yields the same sample.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    phase = math.sin(2.0 * math.pi * t / DAY_S)
    t_noise = 0.0
    rh_noise = 0.0
    if params.noise_sigma > 0:
        tick = int(t)
        t_noise = params.noise_sigma * rng.gauss(params.seed, rng.STREAM_TEMP, tick)
        rh_noise = params.noise_sigma * rng.gauss(params.seed, rng.STREAM_HUMIDITY, tick)
    temp_c = params.t_mean + params.t_amp * phase + t_noise
    rh_pct = _clamp(params.rh_mean - params.rh_amp * phase + rh_noise, 0.0, 100.0)
    return Weather(temp_c=temp_c, rh_pct=rh_pct)


def et_rate(w: Weather, params: EnvParams) -> float:
    """Drying rate in percent moisture per minute, never negative.

    First-order proxy: the base rate scaled up with temperature above
    25 C and down with humidity above 50 %.
    """
    rate = params.e0 * (1.0 + params.aT * (w.temp_c - 25.0)) * (
        1.0 - params.aH * (w.rh_pct - 50.0) / 100.0
    )
    return max(0.0, rate)


def step_soil(s: SoilState, rate: float, pump_on: bool, dt_min: float, params: EnvParams) -> SoilState:
    """Advance the soil bucket by ``dt_min`` minutes.

    Moisture loses ``rate`` per minute and gains ``irr_rate`` per minute
    while the pump runs, clamped to [0, 100].
    """
    if dt_min < 0:
        raise ValueError("dt must be >= 0")
    wet = params.irr_rate * dt_min if pump_on else 0.0
    return SoilState(moisture=_clamp(s.moisture - rate * dt_min + wet, 0.0, 100.0))
