import pytest
from hypothesis import given, strategies as st

from swimps.device import (
    DeviceConfig,
    DeviceEventKind,
    DeviceState,
    PowerState,
    apply_command,
    control_step,
    make_telemetry,
    power_step,
    render_display,
    sample_sensors,
)
from swimps.env import SoilState, Weather
from swimps.protocol import (
    ACK_OK,
    ACK_REJECTED,
    CommandPayload,
    OverrideMode,
)


def reading(moisture_cpct, temp_cdegc=2800, rh_cpct=6500, ts=0):
    from swimps.device import SensorReading

    return SensorReading(moisture_cpct=moisture_cpct, temp_cdegc=temp_cdegc,
                         rh_cpct=rh_cpct, timestamp_ms=ts)


class TestSampleSensors:
    def test_temperature_quantized_to_whole_degrees(self):
        r = sample_sensors(SoilState(40.0), Weather(temp_c=25.4, rh_pct=65.0), 0)
        assert r.temp_cdegc == 2500

    def test_temperature_upper_clamp(self):
        r = sample_sensors(SoilState(40.0), Weather(temp_c=55.0, rh_pct=65.0), 0)
        assert r.temp_cdegc == 5000

    def test_humidity_clamps_to_sensor_range(self):
        low = sample_sensors(SoilState(40.0), Weather(temp_c=25.0, rh_pct=5.0), 0)
        high = sample_sensors(SoilState(40.0), Weather(temp_c=25.0, rh_pct=99.0), 0)
        assert low.rh_cpct == 2000
        assert high.rh_cpct == 9000

    def test_moisture_unit_conversion(self):
        r = sample_sensors(SoilState(40.0), Weather(temp_c=25.0, rh_pct=65.0), 0)
        assert r.moisture_cpct == 4000

    def test_noise_is_deterministic_per_timestamp(self):
        kwargs = dict(noise_sigma_cpct=50.0, seed=7, device_id=3)
        a = sample_sensors(SoilState(40.0), Weather(25.0, 65.0), 1000, **kwargs)
        b = sample_sensors(SoilState(40.0), Weather(25.0, 65.0), 1000, **kwargs)
        c = sample_sensors(SoilState(40.0), Weather(25.0, 65.0), 2000, **kwargs)
        assert a == b
        assert a.moisture_cpct != c.moisture_cpct  # overwhelmingly likely

    @given(st.floats(min_value=0, max_value=100), st.integers(0, 2**31))
    def test_moisture_always_in_wire_range(self, moisture, ts):
        r = sample_sensors(SoilState(moisture), Weather(25.0, 65.0), ts,
                           noise_sigma_cpct=500.0, seed=1)
        assert 0 <= r.moisture_cpct <= 10000


class TestControlStep:
    CFG = DeviceConfig(device_id=1, low_threshold=3000, high_threshold=3500)

    def test_low_sample_turns_pump_on_and_latches(self):
        state, events = control_step(DeviceState(), reading(2500), self.CFG)
        assert state.pump_on is True
        assert state.low_latch is True
        assert [e.kind for e in events] == [DeviceEventKind.LOW_MOISTURE]
        assert events[0].moisture_cpct == 2500

    def test_between_thresholds_holds_state(self):
        on = DeviceState(pump_on=True, low_latch=True)
        state, events = control_step(on, reading(3300), self.CFG)
        assert state.pump_on is True
        assert events == []
        off = DeviceState(pump_on=False)
        state, events = control_step(off, reading(3300), self.CFG)
        assert state.pump_on is False
        assert events == []

    def test_high_sample_turns_pump_off_and_clears_latch(self):
        on = DeviceState(pump_on=True, low_latch=True)
        state, events = control_step(on, reading(3600), self.CFG)
        assert state.pump_on is False
        assert state.low_latch is False
        assert events == []

    def test_force_off_keeps_pump_off_but_latch_sets(self):
        cfg = DeviceConfig(device_id=1, low_threshold=3000, high_threshold=3500,
                           override=OverrideMode.FORCE_OFF)
        state, events = control_step(DeviceState(), reading(1000), cfg)
        assert state.pump_on is False
        assert state.low_latch is True
        assert len(events) == 1

    def test_force_on_turns_pump_on_above_high(self):
        cfg = DeviceConfig(device_id=1, override=OverrideMode.FORCE_ON)
        state, _ = control_step(DeviceState(), reading(9000), cfg)
        assert state.pump_on is True

    def test_latch_fires_once_per_cycle(self):
        state = DeviceState()
        total = 0
        for m in (2900, 2800, 2700, 3200, 3600, 2900):
            state, events = control_step(state, reading(m), self.CFG)
            total += len(events)
        # two latch cycles: set at 2900, cleared at 3600, set again at last 2900
        assert total == 2

    @given(st.lists(st.integers(0, 10000), min_size=1, max_size=300))
    def test_trace_invariants(self, trace):
        """Transitions happen only at the thresholds, with no chattering,
        and one event per latch cycle."""
        cfg = self.CFG
        state = DeviceState()
        prev_pump = state.pump_on
        transitions = []
        events_per_cycle = 0
        for m in trace:
            state, events = control_step(state, reading(m), cfg)
            if state.pump_on != prev_pump:
                transitions.append((prev_pump, state.pump_on, m))
            if events:
                events_per_cycle += len(events)
                assert m < cfg.low_threshold
            if m >= cfg.high_threshold:
                # cycle closed; at most one event can have fired in it
                assert events_per_cycle <= 1
                events_per_cycle = 0
            prev_pump = state.pump_on
        for was, now, m in transitions:
            if not was and now:
                assert m < cfg.low_threshold
            if was and not now:
                assert m >= cfg.high_threshold
        # alternation: consecutive transitions always change direction
        for (_, a, _), (_, b, _) in zip(transitions, transitions[1:]):
            assert a != b


def reintegrate_soc(initial_soc, capacity_mah, steps):
    """Independent discrete integration of the power budget."""
    soc = initial_soc
    out = []
    for solar_ma, pump_on, dt_s in steps:
        load = 80.0 + (500.0 if pump_on else 0.0)
        net = min(solar_ma, 1000.0) - load
        soc = soc + net * (dt_s / 3600.0) / capacity_mah
        soc = min(1.0, max(0.0, soc))
        out.append(soc)
    return out


class TestPowerStep:
    def test_discharge_oracle(self):
        p = PowerState(soc=0.5, capacity_mah=2000.0)
        after = power_step(p, True, 0.0, 60.0)
        assert after.soc == pytest.approx(0.5 - 580.0 * (60.0 / 3600.0) / 2000.0)
        assert after.soc == pytest.approx(0.495167, abs=1e-6)
        assert after.charging is False

    def test_full_battery_does_not_overcharge(self):
        p = PowerState(soc=1.0, capacity_mah=2000.0)
        after = power_step(p, False, 900.0, 60.0)
        assert after.soc == 1.0
        assert after.charging is False

    def test_zero_dt_is_identity(self):
        p = PowerState(soc=0.42, capacity_mah=2000.0)
        after = power_step(p, True, 500.0, 0.0)
        assert after.soc == p.soc
        assert after.battery_mv == p.battery_mv

    def test_solar_input_capped(self):
        p = PowerState(soc=0.5, capacity_mah=2000.0)
        capped = power_step(p, False, 5000.0, 3600.0)
        at_limit = power_step(p, False, 1000.0, 3600.0)
        assert capped.soc == at_limit.soc

    def test_charging_flag_needs_surplus(self):
        p = PowerState(soc=0.5, capacity_mah=2000.0)
        assert power_step(p, False, 90.0, 60.0).charging is True
        assert power_step(p, False, 80.0, 60.0).charging is False

    def test_battery_voltage_affine_map(self):
        assert PowerState(soc=0.0).battery_mv == 3000
        assert PowerState(soc=1.0).battery_mv == 4200
        assert PowerState(soc=0.5).battery_mv == 3600

    @given(st.lists(
        st.tuples(st.floats(0, 2000), st.booleans(), st.floats(0, 600)),
        min_size=1, max_size=200,
    ), st.floats(0, 1))
    def test_trace_matches_independent_reintegration(self, steps, initial):
        p = PowerState(soc=initial, capacity_mah=2000.0)
        trace = []
        for solar_ma, pump_on, dt_s in steps:
            p = power_step(p, pump_on, solar_ma, dt_s)
            trace.append(p.soc)
            assert 0.0 <= p.soc <= 1.0
            assert 3000 <= p.battery_mv <= 4200
        assert trace == reintegrate_soc(initial, 2000.0, steps)


class TestRenderDisplay:
    def test_normal_frame(self):
        frame = render_display(reading(4230, temp_cdegc=2800, rh_cpct=6500), True)
        assert frame.line1 == "T:28C H:65%"
        assert frame.line2 == "M:42.3% PUMP:ON"

    def test_zero_moisture_pump_off(self):
        frame = render_display(reading(0), False)
        assert frame.line2 == "M:0.0% PUMP:OFF"

    def test_lower_bounds(self):
        frame = render_display(reading(4000, temp_cdegc=500, rh_cpct=2000), False)
        assert frame.line1 == "T:5C H:20%"

    def test_lines_never_exceed_panel(self):
        frame = render_display(reading(10000), False)
        assert len(frame.line1) <= 16
        assert len(frame.line2) <= 16
        assert frame.line1.isascii() and frame.line2.isascii()


class TestMakeTelemetry:
    def test_flag_composition(self):
        state = DeviceState(pump_on=True,
                            power=PowerState(soc=0.5, charging=True))
        payload = make_telemetry(state, reading(4000), 11000)
        assert payload.flags == 0b011

    def test_all_off_flags_zero(self):
        payload = make_telemetry(DeviceState(power=PowerState(soc=0.5)), reading(4000), 0)
        assert payload.flags == 0

    def test_seq_increments_by_one(self):
        state = DeviceState(power=PowerState(soc=0.5))
        make_telemetry(state, reading(4000), 0)
        first = state.seq
        make_telemetry(state, reading(4000), 0)
        assert state.seq == first + 1

    def test_fields_copied(self):
        state = DeviceState(low_latch=True, power=PowerState(soc=0.5))
        payload = make_telemetry(state, reading(1234, temp_cdegc=3100, rh_cpct=7200), 9876)
        assert payload.moisture_cpct == 1234
        assert payload.temp_cdegc == 3100
        assert payload.rh_cpct == 7200
        assert payload.battery_mv == 3600
        assert payload.solar_mv == 9876
        assert payload.low_latch is True


class TestApplyCommand:
    def test_thresholds_applied(self):
        cfg = DeviceConfig(device_id=1)
        status = apply_command(cfg, CommandPayload.set_thresholds(2000, 2600))
        assert status == ACK_OK
        assert (cfg.low_threshold, cfg.high_threshold) == (2000, 2600)

    def test_out_of_range_thresholds_rejected(self):
        cfg = DeviceConfig(device_id=1)
        status = apply_command(cfg, CommandPayload(cmd=1, low_cpct=0, high_cpct=400))
        assert status == ACK_REJECTED
        assert cfg.low_threshold == 3000

    def test_override_applied(self):
        cfg = DeviceConfig(device_id=1)
        assert apply_command(cfg, CommandPayload.pump_override(OverrideMode.FORCE_ON)) == ACK_OK
        assert cfg.override is OverrideMode.FORCE_ON


class TestDeviceConfig:
    @pytest.mark.parametrize("low,high", [(3500, 3000), (0, 3500), (3000, 10000)])
    def test_bad_thresholds_rejected(self, low, high):
        with pytest.raises(ValueError):
            DeviceConfig(device_id=1, low_threshold=low, high_threshold=high)
