"""Throughput traces, perturbed replay, and cloud-latency sampling.

Throughput values are unit-agnostic scalars (MB/s by default, matching the
MB-scale transfer sizes in profiles). Traces are replayed cyclically; each
full pass is re-randomized with a circular shift, a multiplicative noise
factor, and an optional mid-point inversion so training never sees the same
periodic signal twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class TraceError(ValueError):
    """Invalid trace data or synthesis parameters."""


@dataclass(frozen=True)
class Trace:
    """A time series of throughput samples at a fixed sampling period."""

    samples: np.ndarray
    granularity_ms: float = 250.0
    source_label: str = ""

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise TraceError("trace needs at least one sample")
        if np.any(samples < 0):
            raise TraceError("trace samples must be >= 0")
        if self.granularity_ms <= 0:
            raise TraceError("granularity_ms must be positive")

    @property
    def mean(self) -> float:
        return float(self.samples.mean())


@dataclass(frozen=True)
class TraceSynthesisSpec:
    """Parameters for a synthetic throughput trace.

    The signal is a stationary AR(1) process around ``mean`` with standard
    deviation ``variability``, clipped to ``[min_value, max_value]``.
    Optional outages model bursts of degraded connectivity: entered with
    probability ``outage_rate`` per sample, lasting a geometric number of
    samples with the given mean, scaling throughput by ``outage_depth``.
    """

    length: int = 3000
    granularity_ms: float = 250.0
    mean: float = 100.0
    variability: float = 20.0
    correlation: float = 0.98
    min_value: float = 0.0
    max_value: float = 580.0
    outage_rate: float = 0.0
    outage_depth: float = 0.05
    outage_duration_mean: float = 120.0
    label: str = "synthetic"


def synthesize_trace(spec: TraceSynthesisSpec, seed: int) -> Trace:
    """Generate a trace deterministically from ``(spec, seed)``."""
    if spec.length < 1:
        raise TraceError("length must be >= 1")
    if not (0.0 <= spec.correlation < 1.0):
        raise TraceError("correlation must be in [0, 1)")
    if spec.variability < 0 or spec.mean < 0:
        raise TraceError("mean and variability must be >= 0")
    rng = np.random.default_rng(seed)
    phi = spec.correlation
    innovation = spec.variability * math.sqrt(1.0 - phi * phi)
    noise = rng.standard_normal(spec.length)

    level = np.empty(spec.length)
    x = 0.0
    for t in range(spec.length):
        x = phi * x + innovation * noise[t]
        level[t] = spec.mean + x

    if spec.outage_rate > 0.0:
        enter = rng.random(spec.length)
        durations = rng.geometric(1.0 / max(spec.outage_duration_mean, 1.0), size=spec.length)
        in_outage = 0
        for t in range(spec.length):
            if in_outage > 0:
                level[t] *= spec.outage_depth
                in_outage -= 1
            elif enter[t] < spec.outage_rate:
                in_outage = int(durations[t])
                level[t] *= spec.outage_depth

    samples = np.clip(level, spec.min_value, spec.max_value)
    return Trace(samples=samples, granularity_ms=spec.granularity_ms, source_label=spec.label)


def load_trace(path, source_label: str | None = None) -> Trace:
    """Read a two-column ``timestamp_ms,throughput`` text file."""
    timestamps: list[float] = []
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TraceError(f"line {lineno}: expected 'timestamp_ms,throughput'")
            try:
                timestamps.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError as exc:
                raise TraceError(f"line {lineno}: {exc}") from exc
    if not values:
        raise TraceError(f"{path}: empty trace file")
    if any(v < 0 for v in values):
        raise TraceError(f"{path}: negative throughput sample")
    granularity = timestamps[1] - timestamps[0] if len(timestamps) > 1 else 250.0
    if granularity <= 0:
        raise TraceError(f"{path}: timestamps must be strictly increasing")
    return Trace(
        samples=np.asarray(values),
        granularity_ms=granularity,
        source_label=source_label or str(path),
    )


def save_trace(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, v in enumerate(trace.samples):
            fh.write(f"{i * trace.granularity_ms!r},{v!r}\n")


class PerturbedReplay:
    """Cyclic replay of a base trace with per-pass random transformations.

    At the start of every full pass three draws are made (always in the same
    order, so streams are reproducible): a circular shift offset, a
    multiplicative factor ``1 + eps`` with ``eps ~ Normal(0, noise_rel)``,
    and a coin flip for a mid-point inversion (second half of the trace
    played before the first). Disabled transformations still consume their
    draw. Emitted samples are clamped at zero.
    """

    def __init__(
        self,
        base: Trace,
        seed,
        noise_rel: float = 0.10,
        shift_enabled: bool = True,
        inversion_enabled: bool = True,
    ):
        if noise_rel < 0:
            raise TraceError("noise_rel must be >= 0")
        self.base = base
        self.noise_rel = noise_rel
        self.shift_enabled = shift_enabled
        self.inversion_enabled = inversion_enabled
        self._rng = np.random.default_rng(seed)
        self._pass: np.ndarray | None = None
        self._pos = 0

    @property
    def granularity_ms(self) -> float:
        return self.base.granularity_ms

    def _begin_pass(self) -> None:
        samples = self.base.samples
        n = samples.size
        shift = int(self._rng.integers(0, n))
        factor = 1.0 + float(self._rng.normal(0.0, self.noise_rel))
        invert = bool(self._rng.random() < 0.5)
        if self.inversion_enabled and invert:
            mid = n // 2
            samples = np.concatenate((samples[mid:], samples[:mid]))
        if self.shift_enabled and shift:
            samples = np.roll(samples, -shift)
        if self.noise_rel > 0.0:
            samples = samples * factor
        self._pass = np.maximum(samples, 0.0)
        self._pos = 0

    def next_sample(self) -> float:
        if self._pass is None or self._pos >= self._pass.size:
            self._begin_pass()
        value = float(self._pass[self._pos])
        self._pos += 1
        return value

    def next_window(self, n: int) -> np.ndarray:
        """Emit ``n`` consecutive samples (may span pass boundaries)."""
        if n < 1:
            raise TraceError("window size must be >= 1")
        out = np.empty(n)
        filled = 0
        while filled < n:
            if self._pass is None or self._pos >= self._pass.size:
                self._begin_pass()
            take = min(n - filled, self._pass.size - self._pos)
            out[filled : filled + take] = self._pass[self._pos : self._pos + take]
            self._pos += take
            filled += take
        return out


def exponential_from_uniform(mean: float, u: float) -> float:
    """Inverse-CDF map: ``-mean * ln(u)`` for ``u`` in (0, 1]."""
    if mean < 0:
        raise TraceError(f"exponential mean must be >= 0, got {mean}")
    if mean == 0.0:
        return 0.0
    if not (0.0 < u <= 1.0):
        raise TraceError(f"u must be in (0, 1], got {u}")
    return -mean * math.log(u)


def sample_cloud_latency(t3: float, rng: np.random.Generator) -> float:
    """Exponential service time with mean ``t3`` ms (M/M/1 cloud model)."""
    if t3 < 0:
        raise TraceError(f"t3 must be >= 0, got {t3}")
    if t3 == 0.0:
        return 0.0
    u = 1.0 - float(rng.random())  # in (0, 1]
    return exponential_from_uniform(t3, u)
