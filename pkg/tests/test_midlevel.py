import numpy as np
import pytest

from emostream.midlevel import (
    MIDLEVEL_NAMES,
    ConstantProvider,
    MidLevelTrace,
    MidLevelVector,
    TraceFormatError,
    TraceProvider,
    load_midlevel_trace,
    parse_provider_spec,
    provider_window_features,
    save_midlevel_trace,
)


def vec(value: float) -> MidLevelVector:
    return MidLevelVector(*([value] * 7))


class TestMidLevelVector:
    def test_canonical_name_order(self):
        assert MIDLEVEL_NAMES == (
            "melodiousness",
            "articulation",
            "rhythm_complexity",
            "rhythm_stability",
            "dissonance",
            "tonal_stability",
            "minorness",
        )

    def test_array_round_trip(self):
        v = MidLevelVector(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
        assert MidLevelVector.from_array(v.as_array()) == v

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            MidLevelVector(0.1, float("nan"), 0.3, 0.4, 0.5, 0.6, 0.7)


class TestProviders:
    def test_constant_provider(self):
        p = ConstantProvider(vec(0.42))
        assert p.window_features(0.0, 5.0) == vec(0.42)
        assert p.window_features(100.0, 105.0) == vec(0.42)

    def test_trace_provider_interpolates_at_midpoint(self):
        # linear ramp per feature: value(t) = t / 10
        ts = np.linspace(0.0, 10.0, 21)
        vectors = np.tile((ts / 10.0)[:, None], (1, 7))
        trace = MidLevelTrace(timestamps=ts, vectors=vectors)
        p = TraceProvider(trace)
        out = p.window_features(2.0, 4.0)  # midpoint 3.0
        assert out.as_array() == pytest.approx(np.full(7, 0.3))

    def test_trace_provider_clamps_outside_span(self):
        ts = np.array([1.0, 2.0])
        vectors = np.vstack([np.full(7, 0.2), np.full(7, 0.8)])
        p = TraceProvider(MidLevelTrace(timestamps=ts, vectors=vectors))
        assert p.window_features(-5.0, -3.0).as_array() == pytest.approx(np.full(7, 0.2))
        assert p.window_features(50.0, 52.0).as_array() == pytest.approx(np.full(7, 0.8))

    def test_window_validation(self):
        p = ConstantProvider(vec(0.5))
        with pytest.raises(ValueError):
            provider_window_features(p, 3.0, 3.0)


class TestTraceIo:
    def test_save_load_round_trip(self, tmp_path):
        ts = np.array([0.0, 1.5, 4.0])
        vectors = np.arange(21, dtype=float).reshape(3, 7) / 21.0
        trace = MidLevelTrace(timestamps=ts, vectors=vectors)
        path = tmp_path / "trace.csv"
        save_midlevel_trace(trace, path)
        loaded = load_midlevel_trace(path)
        assert np.array_equal(loaded.timestamps, ts)
        assert np.array_equal(loaded.vectors, vectors)

    def test_column_order_does_not_matter(self, tmp_path):
        path = tmp_path / "shuffled.csv"
        names = list(MIDLEVEL_NAMES)
        header = ",".join(["minorness", "time_s"] + names[:-1])
        row = "0.9,1.0," + ",".join(str(0.1 * i) for i in range(6))
        path.write_text(header + "\n" + row + "\n")
        loaded = load_midlevel_trace(path)
        assert loaded.vectors[0, MIDLEVEL_NAMES.index("minorness")] == 0.9

    def test_missing_column_error(self, tmp_path):
        path = tmp_path / "partial.csv"
        path.write_text("time_s,melodiousness\n0.0,0.5\n")
        with pytest.raises(TraceFormatError, match="articulation"):
            load_midlevel_trace(path)

    def test_bad_value_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        lines = ["time_s," + ",".join(MIDLEVEL_NAMES)]
        lines.append("0.0," + ",".join(["0.5"] * 7))
        lines.append("1.0," + ",".join(["0.5"] * 6) + ",oops")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(TraceFormatError, match="row 3"):
            load_midlevel_trace(path)

    def test_non_monotonic_times_rejected(self, tmp_path):
        path = tmp_path / "mono.csv"
        lines = ["time_s," + ",".join(MIDLEVEL_NAMES)]
        lines.append("2.0," + ",".join(["0.5"] * 7))
        lines.append("1.0," + ",".join(["0.5"] * 7))
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(TraceFormatError):
            load_midlevel_trace(path)


class TestProviderSpec:
    def test_constant_spec(self):
        p = parse_provider_spec("constant:0.1,0.2,0.3,0.4,0.5,0.6,0.7")
        out = p.window_features(0.0, 1.0)
        assert out.melodiousness == 0.1
        assert out.minorness == 0.7

    def test_trace_spec(self, tmp_path):
        ts = np.array([0.0, 2.0])
        vectors = np.vstack([np.full(7, 0.3), np.full(7, 0.3)])
        path = tmp_path / "p.csv"
        save_midlevel_trace(MidLevelTrace(timestamps=ts, vectors=vectors), path)
        p = parse_provider_spec(f"trace:{path}")
        assert p.window_features(0.0, 2.0).dissonance == pytest.approx(0.3)

    def test_bad_specs(self):
        with pytest.raises(ValueError):
            parse_provider_spec("constant:1,2,3")
        with pytest.raises(ValueError):
            parse_provider_spec("nonsense")
