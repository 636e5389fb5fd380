import math

import numpy as np
import pytest

from fedpart.traces import (
    PerturbedReplay,
    Trace,
    TraceError,
    TraceSynthesisSpec,
    exponential_from_uniform,
    load_trace,
    sample_cloud_latency,
    save_trace,
    synthesize_trace,
)


class TestSynthesis:
    def test_constant_mean_zero_variability(self):
        trace = synthesize_trace(
            TraceSynthesisSpec(length=200, mean=42.0, variability=0.0), seed=1
        )
        assert np.all(trace.samples == 42.0)

    def test_deterministic_for_seed(self):
        spec = TraceSynthesisSpec(length=500, mean=80.0, variability=20.0, outage_rate=0.01)
        a = synthesize_trace(spec, seed=9)
        b = synthesize_trace(spec, seed=9)
        assert np.array_equal(a.samples, b.samples)

    def test_fiveg_range(self):
        spec = TraceSynthesisSpec(
            length=5000, mean=300.0, variability=120.0, max_value=350.0, outage_rate=0.01
        )
        trace = synthesize_trace(spec, seed=2)
        assert trace.samples.min() >= 0.0
        assert trace.samples.max() <= 350.0

    def test_negative_samples_rejected(self):
        with pytest.raises(TraceError):
            Trace(samples=np.array([1.0, -0.5]))

    def test_empty_rejected(self):
        with pytest.raises(TraceError):
            Trace(samples=np.array([]))


class TestTraceFiles:
    def test_round_trip(self, tmp_path):
        trace = synthesize_trace(TraceSynthesisSpec(length=64, variability=10.0), seed=3)
        path = tmp_path / "t.trace"
        save_trace(trace, path)
        loaded = load_trace(path)
        assert loaded.samples.size == 64
        assert np.array_equal(loaded.samples, trace.samples)
        assert loaded.granularity_ms == trace.granularity_ms

    def test_length_matches_rows(self, tmp_path):
        path = tmp_path / "rows.trace"
        path.write_text("0.0,5.0\n250.0,6.0\n500.0,7.0\n")
        assert load_trace(path).samples.size == 3

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.trace"
        path.write_text("")
        with pytest.raises(TraceError, match="empty"):
            load_trace(path)

    def test_negative_value_rejected(self, tmp_path):
        path = tmp_path / "neg.trace"
        path.write_text("0.0,5.0\n250.0,-1.0\n")
        with pytest.raises(TraceError, match="negative"):
            load_trace(path)


class TestPerturbedReplay:
    def test_identity_transformation(self):
        base = Trace(samples=np.arange(1.0, 11.0), granularity_ms=250.0)
        replay = PerturbedReplay(
            base, seed=0, noise_rel=0.0, shift_enabled=False, inversion_enabled=False
        )
        out = [replay.next_sample() for _ in range(25)]
        expected = list(np.tile(base.samples, 3)[:25])
        assert out == expected

    def test_shift_only_preserves_multiset(self):
        base = Trace(samples=np.arange(1.0, 32.0))
        replay = PerturbedReplay(
            base, seed=4, noise_rel=0.0, shift_enabled=True, inversion_enabled=False
        )
        one_pass = replay.next_window(base.samples.size)
        assert sorted(one_pass.tolist()) == sorted(base.samples.tolist())

    def test_inversion_swaps_halves(self):
        base = Trace(samples=np.arange(1.0, 9.0))
        replay = PerturbedReplay(
            base, seed=0, noise_rel=0.0, shift_enabled=False, inversion_enabled=True
        )
        seen = set()
        for _ in range(12):  # inversion is a per-pass coin flip
            seen.add(tuple(replay.next_window(8).tolist()))
        assert tuple(base.samples.tolist()) in seen
        inverted = tuple(np.concatenate([base.samples[4:], base.samples[:4]]).tolist())
        assert inverted in seen

    def test_deterministic_given_seed(self):
        base = synthesize_trace(TraceSynthesisSpec(length=100, variability=15.0), seed=8)
        a = PerturbedReplay(base, seed=123)
        b = PerturbedReplay(base, seed=123)
        assert np.array_equal(a.next_window(1000), b.next_window(1000))

    def test_samples_never_negative(self):
        base = synthesize_trace(TraceSynthesisSpec(length=50, mean=5.0, variability=4.0), seed=1)
        replay = PerturbedReplay(base, seed=2, noise_rel=2.0)  # huge noise to force clamps
        assert np.min(replay.next_window(5000)) >= 0.0

    def test_mean_preserved_with_default_noise(self):
        """Zero-mean multiplicative noise keeps the long-run mean of the base."""
        base = synthesize_trace(TraceSynthesisSpec(length=400, mean=60.0, variability=12.0), seed=5)
        replay = PerturbedReplay(base, seed=6, noise_rel=0.10)
        emitted = replay.next_window(1_000_000)
        assert abs(emitted.mean() - base.mean) / base.mean < 0.02


class TestCloudLatency:
    def test_zero_mean_returns_zero(self):
        rng = np.random.default_rng(0)
        assert sample_cloud_latency(0.0, rng) == 0.0

    def test_negative_mean_rejected(self):
        with pytest.raises(TraceError):
            sample_cloud_latency(-1.0, np.random.default_rng(0))

    def test_inversion_at_e_minus_one(self):
        assert exponential_from_uniform(25.0, math.exp(-1.0)) == pytest.approx(25.0)

    def test_sample_moments(self):
        rng = np.random.default_rng(42)
        t3 = 25.0
        draws = np.array([sample_cloud_latency(t3, rng) for _ in range(1_000_000)])
        assert abs(draws.mean() - t3) / t3 < 0.01
        assert abs(draws.var() - t3 * t3) / (t3 * t3) < 0.03
