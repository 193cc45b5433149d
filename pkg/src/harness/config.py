"""
Scenario configuration: a tree of frozen dataclasses loaded from a versioned YAML file.

A config fully determines a session, so two runs with equal configs produce
identical transcripts.
"""
import dataclasses
import pathlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Union

import yaml

from src.adversary.attacks import AttackModel
from src.constants import (DEFAULT_AUTH_POOL_BITS, DEFAULT_BLOCK_COLS, DEFAULT_BLOCK_ROWS, DEFAULT_QBER_CEILING,
                           SCHEMA_VERSION, AttackKind, BobChoice, EveBoundPolicy, ProtocolName, ResendModel)
from src.errors import ConfigError, ParameterError
from src.optics.channel import ChannelParams
from src.optics.photonics import PulseSource
from src.postprocessing.reconciliation import DEFAULT_MAX_PASSES


@dataclass(frozen=True)
class SourceConfig:
    mean_photon_number: float = 0.3
    pulse_rate: float = 1e6
    photon_number: Optional[int] = None


@dataclass(frozen=True)
class ChannelConfig:
    """Defaults emulate the daylight free-space run: ~0.5 % sift fraction, 1.6 % error rate."""
    transmittance: float = 0.105
    detector_efficiency: float = 0.65
    background_rate: float = 40e3
    dark_rate: float = 10e3
    gate_window: float = 1e-9
    trigger_rate: float = 1e6
    optical_flip_probability: float = 0.011
    photon_misalignment: float = 0.0


@dataclass(frozen=True)
class AttackConfig:
    kind: AttackKind = AttackKind.NONE
    fraction: float = 1.0
    tap_ratio: float = 0.5
    model: ResendModel = ResendModel.BEST_GUESS
    resend_photon_number: Optional[int] = None
    bob_detection_rate: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "model", ResendModel(self.model))


@dataclass(frozen=True)
class QberConfig:
    sample_fraction: float = 0.1
    ceiling: float = DEFAULT_QBER_CEILING


@dataclass(frozen=True)
class ReconciliationConfig:
    rows: int = DEFAULT_BLOCK_ROWS
    cols: int = DEFAULT_BLOCK_COLS
    max_passes: int = DEFAULT_MAX_PASSES


@dataclass(frozen=True)
class PrivacyConfig:
    security_parameter: int = 32
    eve_bound_policy: EveBoundPolicy = EveBoundPolicy.MULTI_PHOTON_PLUS_INTERCEPT
    drop_rows_cols: bool = False

    def __post_init__(self):
        object.__setattr__(self, "eve_bound_policy", EveBoundPolicy(self.eve_bound_policy))


@dataclass(frozen=True)
class AuthConfig:
    pool_bits: int = DEFAULT_AUTH_POOL_BITS
    replenish_bits: int = 512


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    formats: List[str] = field(default_factory=lambda: ["text", "csv"])
    dump_transcript: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    """
    :param name: Scenario name, used for report file names.
    :param seed: 64-bit root seed of every random stream in the session.
    :param pulse_count: Number of clock ticks Alice transmits.
    :param protocol: ``b92`` or ``bb84``.
    :param bob_choice: ``beamsplitter`` draws Bob's choice per tick inside the quantum
        stage; ``sequence`` pre-generates it like Alice's bits.
    :param num_workers: Threads for the quantum stage; never changes results.
    :param tick_batch_size: Ticks per quantum-stage batch and random substream.
    :param entropy_file: Optional bit file supplying Alice's random bits.
    """
    name: str = "scenario"
    seed: int = 0
    pulse_count: int = 50_000
    protocol: ProtocolName = ProtocolName.B92
    bob_choice: BobChoice = BobChoice.BEAMSPLITTER
    num_workers: int = 1
    tick_batch_size: int = 65536
    entropy_file: Optional[str] = None
    source: SourceConfig = SourceConfig()
    channel: ChannelConfig = ChannelConfig()
    attack: AttackConfig = AttackConfig()
    qber: QberConfig = QberConfig()
    reconciliation: ReconciliationConfig = ReconciliationConfig()
    privacy: PrivacyConfig = PrivacyConfig()
    auth: AuthConfig = AuthConfig()
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolName(self.protocol))
        object.__setattr__(self, "bob_choice", BobChoice(self.bob_choice))
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.pulse_count < 1:
            raise ConfigError(f"pulse_count must be >= 1, got {self.pulse_count}")
        if self.num_workers < 1 or self.tick_batch_size < 1:
            raise ConfigError("num_workers and tick_batch_size must be >= 1")
        if not 0.0 < self.qber.sample_fraction <= 1.0:
            raise ConfigError(f"qber.sample_fraction must lie in (0, 1], got {self.qber.sample_fraction}")
        if not 0.0 <= self.qber.ceiling <= 1.0:
            raise ConfigError(f"qber.ceiling must lie in [0, 1], got {self.qber.ceiling}")
        if min(self.reconciliation.rows, self.reconciliation.cols) < 2 or self.reconciliation.max_passes < 1:
            raise ConfigError("Reconciliation needs rows, cols >= 2 and max_passes >= 1")
        if self.privacy.security_parameter < 0:
            raise ConfigError(f"privacy.security_parameter must be >= 0, got {self.privacy.security_parameter}")
        if self.auth.pool_bits < 0 or self.auth.replenish_bits < 0:
            raise ConfigError("Authentication pool sizes must be >= 0")
        if self.protocol is ProtocolName.BB84 and self.attack.kind is AttackKind.INTERCEPT_RESEND_BOBS_BASIS:
            raise ConfigError("attack.kind intercept_resend_bobs_basis needs protocol b92")
        # surface physical range errors at load time
        try:
            self.pulse_source()
            self.channel_params()
            self.attack_model()
        except ParameterError as e:
            raise ConfigError(str(e)) from e

    def pulse_source(self) -> PulseSource:
        return PulseSource(self.source.mean_photon_number, self.source.pulse_rate, self.source.photon_number)

    def channel_params(self) -> ChannelParams:
        c = self.channel
        return ChannelParams(c.transmittance, c.detector_efficiency, c.background_rate, c.dark_rate, c.gate_window,
                             c.trigger_rate, c.photon_misalignment)

    def attack_model(self) -> AttackModel:
        a = self.attack
        return AttackModel(a.kind, a.fraction, a.tap_ratio, a.model, a.resend_photon_number, a.bob_detection_rate)

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with top-level fields replaced; nested sections may be given as dicts of overrides."""
        for name, value in list(changes.items()):
            current = getattr(self, name)
            if dataclasses.is_dataclass(current) and isinstance(value, dict):
                changes[name] = _build(type(current), {**_to_plain(current), **value}, name)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {"version": SCHEMA_VERSION, **_to_plain(self)}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ScenarioConfig":
        d = dict(d)
        version = d.pop("version", None)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported scenario version {version!r}, expected {SCHEMA_VERSION}")
        return _build(cls, d, "scenario")

    @classmethod
    def from_yaml(cls, path: Union[str, pathlib.Path]) -> "ScenarioConfig":
        with open(path) as f:
            data = yaml.safe_load(f)
        if not isinstance(data, dict):
            raise ConfigError(f"{path} does not hold a scenario mapping")
        return cls.from_dict(data)

    def to_yaml(self, path: Union[str, pathlib.Path]):
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _build(cls, d: Dict[str, Any], where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"Section {where!r} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"Unknown keys in {where!r}: {sorted(unknown)}")

    kwargs = {}
    for name, value in d.items():
        default = fields[name].default
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, f"{where}.{name}")
        elif isinstance(default, Enum):
            try:
                kwargs[name] = type(default)(value)
            except ValueError:
                choices = [e.value for e in type(default)]
                raise ConfigError(f"{where}.{name} must be one of {choices}, got {value!r}") from None
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ParameterError) as e:
        raise ConfigError(f"Invalid section {where!r}: {e}") from e
