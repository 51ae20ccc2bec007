import math

import pytest
from hypothesis import given, strategies as st

from swimps.env import EnvParams, SoilState, Weather, et_rate, step_soil, weather_at


def quiet_env(**overrides):
    params = dict(t_amp=0.0, rh_amp=0.0, noise_sigma=0.0)
    params.update(overrides)
    return EnvParams(**params)


class TestWeatherAt:
    def test_zero_amplitude_is_constant(self):
        params = quiet_env(t_mean=28.0)
        for t in (0, 3600, 86400, 123456):
            assert weather_at(t, params).temp_c == 28.0

    def test_quarter_day_peak(self):
        params = quiet_env(t_mean=28.0, t_amp=5.0)
        assert weather_at(21600, params).temp_c == pytest.approx(33.0)

    def test_half_day_back_to_mean(self):
        params = quiet_env(t_mean=28.0, t_amp=5.0)
        assert weather_at(43200, params).temp_c == pytest.approx(28.0)

    def test_humidity_antiphase(self):
        params = quiet_env(rh_mean=70.0, rh_amp=20.0)
        assert weather_at(21600, params).rh_pct == pytest.approx(50.0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            weather_at(-1, quiet_env())

    def test_seeded_determinism(self):
        params = EnvParams(noise_sigma=1.5, seed=99)
        for t in range(0, 7200, 600):
            a = weather_at(t, params)
            b = weather_at(t, params)
            assert a == b

    def test_different_seeds_differ(self):
        a = weather_at(300, EnvParams(noise_sigma=1.0, seed=1))
        b = weather_at(300, EnvParams(noise_sigma=1.0, seed=2))
        assert a.temp_c != b.temp_c

    @given(st.integers(min_value=0, max_value=10 * 86400), st.integers(min_value=0, max_value=2**32 - 1))
    def test_humidity_always_in_range(self, t, seed):
        params = EnvParams(noise_sigma=5.0, seed=seed)
        assert 0.0 <= weather_at(t, params).rh_pct <= 100.0


class TestEtRate:
    def test_reference_point_is_base_rate(self):
        params = quiet_env(e0=0.05)
        assert et_rate(Weather(temp_c=25.0, rh_pct=50.0), params) == pytest.approx(0.05)

    def test_hand_evaluated_hot_case(self):
        # e0=0.05, aT=0.02, aH=0.5, T=35, RH=50:
        # 0.05 * (1 + 0.02*10) * (1 - 0) = 0.06
        params = quiet_env(e0=0.05, aT=0.02, aH=0.5)
        assert et_rate(Weather(temp_c=35.0, rh_pct=50.0), params) == pytest.approx(0.06)

    def test_negative_product_clamps_to_zero(self):
        params = quiet_env(e0=0.05, aT=0.02, aH=5.0)
        assert et_rate(Weather(temp_c=25.0, rh_pct=100.0), params) == 0.0

    @given(st.floats(min_value=-10, max_value=60), st.floats(min_value=0, max_value=100))
    def test_never_negative(self, temp, rh):
        params = quiet_env(e0=0.05, aT=0.02, aH=0.5)
        assert et_rate(Weather(temp_c=temp, rh_pct=rh), params) >= 0.0


class TestStepSoil:
    def test_no_flux_leaves_moisture(self):
        params = quiet_env()
        s = step_soil(SoilState(moisture=40.0), 0.0, False, 1.0, params)
        assert s.moisture == 40.0

    def test_hand_evaluated_pump_on(self):
        # 40 - 0.06*1 + 0.5*1 = 40.44
        params = quiet_env(irr_rate=0.5)
        s = step_soil(SoilState(moisture=40.0), 0.06, True, 1.0, params)
        assert s.moisture == pytest.approx(40.44)

    def test_lower_clamp(self):
        params = quiet_env()
        s = step_soil(SoilState(moisture=0.01), 1.0, False, 1.0, params)
        assert s.moisture == 0.0

    def test_upper_clamp(self):
        params = quiet_env(irr_rate=2.0)
        s = step_soil(SoilState(moisture=99.9), 0.0, True, 1.0, params)
        assert s.moisture == 100.0

    @given(
        st.floats(min_value=0, max_value=100),
        st.floats(min_value=0, max_value=5),
        st.booleans(),
        st.floats(min_value=0, max_value=120),
    )
    def test_moisture_stays_bounded(self, moisture, rate, pump_on, dt):
        params = quiet_env(irr_rate=0.5)
        s = step_soil(SoilState(moisture=moisture), rate, pump_on, dt, params)
        assert 0.0 <= s.moisture <= 100.0

    @given(st.floats(min_value=0, max_value=100), st.floats(min_value=0.001, max_value=0.5),
           st.floats(min_value=0.01, max_value=60))
    def test_pump_on_never_decreases_when_wetting_dominates(self, moisture, rate, dt):
        params = quiet_env(irr_rate=0.5)
        s = step_soil(SoilState(moisture=moisture), rate, True, dt, params)
        assert s.moisture >= min(moisture, 100.0) - 1e-9

    @given(st.floats(min_value=0.5, max_value=100), st.floats(min_value=0.01, max_value=2),
           st.floats(min_value=0.01, max_value=10))
    def test_pump_off_strictly_dries(self, moisture, rate, dt):
        params = quiet_env()
        s = step_soil(SoilState(moisture=moisture), rate, False, dt, params)
        assert s.moisture < moisture or s.moisture == 0.0


class TestEnvParams:
    @pytest.mark.parametrize("bad", [
        dict(e0=-0.1),
        dict(irr_rate=0.0),
        dict(t_amp=-1.0),
        dict(rh_mean=95.0, rh_amp=10.0),
        dict(noise_sigma=-1.0),
    ])
    def test_invalid_params_rejected(self, bad):
        with pytest.raises(ValueError):
            EnvParams(**bad)
