"""Experiment configuration: typed sections, strict parsing, round-tripping.

The on-disk format is INI (`[section]` headers, `key = value` lines) parsed
with :mod:`configparser`. Every key must match a field of its section
dataclass; unknown sections or keys are rejected with a field-level
diagnostic. Values are coerced from the type of the field's default, so a
resolved config serializes and re-parses to an identical object.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from .agent import AgentSettings
from .env import CostWeights, ObservationBounds
from .profiles import DeviceProfile, ProfileSpec
from .traces import TraceSynthesisSpec


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ProfileSection:
    source: str = "synthetic"  # synthetic | file
    path: str = ""
    name: str = "yolov5-like"
    cut_points: int = 12
    delta0: float = 6.25
    total_flops: float = 5427.0
    sew_mflops_per_ms: float = 12.6
    phone_mflops_per_ms: float = 90.5
    cloud_mflops_per_ms: float = 217.0
    tensor_decay: float = 0.85
    tensor_noise: float = 0.10
    t1_max: float = 450.0
    t2_max: float = 65.0
    t3_max: float = 30.0
    seed: int = 0
    extend_to: int = 0

    def to_spec(self) -> ProfileSpec:
        return ProfileSpec(
            name=self.name,
            cut_points=self.cut_points,
            delta0=self.delta0,
            total_flops=self.total_flops,
            sew_mflops_per_ms=self.sew_mflops_per_ms,
            phone_mflops_per_ms=self.phone_mflops_per_ms,
            cloud_mflops_per_ms=self.cloud_mflops_per_ms,
            tensor_decay=self.tensor_decay,
            tensor_noise=self.tensor_noise,
            t1_max=self.t1_max,
            t2_max=self.t2_max,
            t3_max=self.t3_max,
            rng_seed=self.seed,
        )


@dataclass(frozen=True)
class TracesSection:
    wifi_source: str = "synthetic"
    wifi_path: str = ""
    wifi_length: int = 3000
    wifi_granularity_ms: float = 250.0
    wifi_mean: float = 180.0
    wifi_variability: float = 35.0
    wifi_correlation: float = 0.98
    wifi_max: float = 580.0
    wifi_outage_rate: float = 0.0015
    wifi_outage_depth: float = 0.2
    wifi_outage_duration: float = 160.0
    fiveg_source: str = "synthetic"
    fiveg_path: str = ""
    fiveg_length: int = 11024
    fiveg_granularity_ms: float = 250.0
    fiveg_mean: float = 24.0
    fiveg_variability: float = 7.0
    fiveg_correlation: float = 0.98
    fiveg_max: float = 350.0
    fiveg_outage_rate: float = 0.002
    fiveg_outage_depth: float = 0.2
    fiveg_outage_duration: float = 160.0
    trace_seed: int = 7
    noise_rel: float = 0.10
    shift: bool = True
    inversion: bool = True

    def wifi_spec(self) -> TraceSynthesisSpec:
        return TraceSynthesisSpec(
            length=self.wifi_length,
            granularity_ms=self.wifi_granularity_ms,
            mean=self.wifi_mean,
            variability=self.wifi_variability,
            correlation=self.wifi_correlation,
            max_value=self.wifi_max,
            outage_rate=self.wifi_outage_rate,
            outage_depth=self.wifi_outage_depth,
            outage_duration_mean=self.wifi_outage_duration,
            label="wifi-synthetic",
        )

    def fiveg_spec(self) -> TraceSynthesisSpec:
        return TraceSynthesisSpec(
            length=self.fiveg_length,
            granularity_ms=self.fiveg_granularity_ms,
            mean=self.fiveg_mean,
            variability=self.fiveg_variability,
            correlation=self.fiveg_correlation,
            max_value=self.fiveg_max,
            outage_rate=self.fiveg_outage_rate,
            outage_depth=self.fiveg_outage_depth,
            outage_duration_mean=self.fiveg_outage_duration,
            label="fiveg-synthetic",
        )


@dataclass(frozen=True)
class EnvironmentSection:
    w_sew: float = 0.03
    w_phone: float = 0.02
    w_5g: float = 0.0
    w_lat: float = 0.93
    w_rcfg: float = 0.02
    alpha: float = 1.0
    g: float = 0.1
    lambda_fps: float = 1.0
    tau_normal: float = 10.0
    tau_fast: float = 1.0
    l_max: float = 400.0
    c_sew_max: float = 0.0  # 0 = resolve from the profile
    c_phone_max: float = 0.0
    c_5g_max: float = 0.0
    bound_wifi_max: float = 580.0
    bound_fiveg_max: float = 350.0
    bound_l_sew_max: float = 450.0
    bound_l_phone_max: float = 65.0
    bound_l_cloud_max: float = 30.0
    floor_frac: float = 0.001
    z_sew: float = 1.5e-3
    z_phone: float = 8.0e-4
    theta_sew: float = 7.9
    theta_phone: float = 4.5

    def to_weights(self) -> CostWeights:
        return CostWeights(
            w_sew=self.w_sew,
            w_phone=self.w_phone,
            w_5g=self.w_5g,
            w_lat=self.w_lat,
            w_rcfg=self.w_rcfg,
            c_sew_max=self.c_sew_max or None,
            c_phone_max=self.c_phone_max or None,
            c_5g_max=self.c_5g_max or None,
            alpha=self.alpha,
            g=self.g,
            lambda_fps=self.lambda_fps,
            tau_normal=self.tau_normal,
            tau_fast=self.tau_fast,
            l_max=self.l_max,
        )

    def to_bounds(self) -> ObservationBounds:
        return ObservationBounds(
            wifi=(0.0, self.bound_wifi_max),
            fiveg=(0.0, self.bound_fiveg_max),
            l_sew=(0.0, self.bound_l_sew_max),
            l_phone=(0.0, self.bound_l_phone_max),
            l_cloud=(0.0, self.bound_l_cloud_max),
        )

    def to_devices(self) -> DeviceProfile:
        return DeviceProfile(
            z_sew=self.z_sew,
            z_phone=self.z_phone,
            theta_sew=self.theta_sew,
            theta_phone=self.theta_phone,
        )


@dataclass(frozen=True)
class AgentSection:
    hidden: tuple[int, ...] = (100, 100, 60)
    dropout: tuple[float, ...] = (0.4, 0.3, 0.0)
    lr: float = 0.04
    gamma: float = 0.99
    epsilon: float = 0.05
    batch_size: int = 512
    buffer_capacity: int = 10000
    target_update_freq: int = 400
    train_every: int = 1
    optimizer: str = "adam"
    dtype: str = "float32"

    def to_settings(self) -> AgentSettings:
        return AgentSettings(
            hidden=self.hidden,
            dropout_rates=self.dropout,
            lr=self.lr,
            gamma=self.gamma,
            epsilon=self.epsilon,
            batch_size=self.batch_size,
            buffer_capacity=self.buffer_capacity,
            target_update_freq=self.target_update_freq,
            train_every=self.train_every,
            optimizer=self.optimizer,
            dtype=self.dtype,
        )


@dataclass(frozen=True)
class FederationSection:
    mode: str = "sync"
    agents: int = 10
    steps_per_agent: int = 21000
    freq_updates: int = 500
    proportion_slow: float = 0.0
    max_delay_slow: float = 0.0
    role_policy: str = "fixed"


@dataclass(frozen=True)
class RunSection:
    n_runs: int = 5
    base_seed: int = 1000
    output_dir: str = "runs/out"
    workers: int = 1
    validation_interval: int = 250
    validation_steps: int = 300
    validation_initial: bool = True


_SECTION_TYPES = {
    "profile": ProfileSection,
    "traces": TracesSection,
    "environment": EnvironmentSection,
    "agent": AgentSection,
    "federation": FederationSection,
    "run": RunSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    profile: ProfileSection = field(default_factory=ProfileSection)
    traces: TracesSection = field(default_factory=TracesSection)
    environment: EnvironmentSection = field(default_factory=EnvironmentSection)
    agent: AgentSection = field(default_factory=AgentSection)
    federation: FederationSection = field(default_factory=FederationSection)
    run: RunSection = field(default_factory=RunSection)

    def validate(self) -> None:
        fed = self.federation
        if fed.mode not in ("sync", "async", "single"):
            raise ConfigError(f"[federation] mode: expected sync|async|single, got {fed.mode!r}")
        if fed.agents < 1:
            raise ConfigError("[federation] agents must be >= 1")
        if fed.steps_per_agent < 0:
            raise ConfigError("[federation] steps_per_agent must be >= 0")
        if fed.freq_updates < 1:
            raise ConfigError("[federation] freq_updates must be >= 1")
        if fed.steps_per_agent % fed.freq_updates != 0:
            raise ConfigError(
                "[federation] steps_per_agent must be a multiple of freq_updates "
                f"({fed.steps_per_agent} % {fed.freq_updates} != 0)"
            )
        if not (0.0 <= fed.proportion_slow <= 1.0):
            raise ConfigError("[federation] proportion_slow must be in [0, 1]")
        if fed.max_delay_slow < 0:
            raise ConfigError("[federation] max_delay_slow must be >= 0")
        if fed.role_policy not in ("fixed", "redraw"):
            raise ConfigError("[federation] role_policy must be fixed|redraw")
        if self.run.n_runs < 1:
            raise ConfigError("[run] n_runs must be >= 1")
        if self.profile.source not in ("synthetic", "file"):
            raise ConfigError("[profile] source must be synthetic|file")
        if self.profile.source == "file" and not self.profile.path:
            raise ConfigError("[profile] path required when source = file")
        for prefix in ("wifi", "fiveg"):
            source = getattr(self.traces, f"{prefix}_source")
            if source not in ("synthetic", "file"):
                raise ConfigError(f"[traces] {prefix}_source must be synthetic|file")
            if source == "file" and not getattr(self.traces, f"{prefix}_path"):
                raise ConfigError(f"[traces] {prefix}_path required when source = file")
        # construct derived objects so their own validation fires early
        self.environment.to_weights()
        self.environment.to_bounds()
        self.environment.to_devices()
        self.agent.to_settings()


def _coerce(section: str, key: str, text: str, default):
    text = text.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            element = default[0] if default else 0.0
            parts = [p for p in (s.strip() for s in text.split(",")) if p]
            return tuple(type(element)(p) for p in parts)
        return text
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _parse_ini(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep keys case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    sections = {}
    for name in parser.sections():
        if name not in _SECTION_TYPES:
            raise ConfigError(
                f"unknown section [{name}]; expected one of {sorted(_SECTION_TYPES)}"
            )
        cls = _SECTION_TYPES[name]
        known = {f.name: f for f in dataclasses.fields(cls)}
        defaults = cls()
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
            values[key] = _coerce(name, key, raw, getattr(defaults, key))
        sections[name] = cls(**values)
    config = ExperimentConfig(**sections)
    config.validate()
    return config


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return _parse_ini(fh.read())


def parse_config(text: str) -> ExperimentConfig:
    return _parse_ini(text)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    return str(value)


def dump_config(config: ExperimentConfig) -> str:
    """Serialize the resolved config; parsing the output reproduces it."""
    out = io.StringIO()
    for section_name in _SECTION_TYPES:
        section = getattr(config, section_name)
        out.write(f"[{section_name}]\n")
        for f in dataclasses.fields(section):
            out.write(f"{f.name} = {_format_value(getattr(section, f.name))}\n")
        out.write("\n")
    return out.getvalue()


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(config))


def apply_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Apply `section__key=value` overrides (None values are skipped)."""
    updates: dict[str, dict] = {}
    for dotted, value in overrides.items():
        if value is None:
            continue
        section_name, key = dotted.split("__", 1)
        if section_name not in _SECTION_TYPES:
            raise ConfigError(f"unknown section {section_name!r} in override")
        updates.setdefault(section_name, {})[key] = value
    replaced = {}
    for section_name, kv in updates.items():
        section = getattr(config, section_name)
        known = {f.name for f in dataclasses.fields(section)}
        unknown = set(kv) - known
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in section [{section_name}]")
        replaced[section_name] = dataclasses.replace(section, **kv)
    config = dataclasses.replace(config, **replaced)
    config.validate()
    return config
