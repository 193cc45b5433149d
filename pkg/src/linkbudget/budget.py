"""
Ground-to-satellite QKD feasibility estimates and the XOR key relay through a satellite.

The chain runs diffraction spot → collection efficiency → key rate, and in parallel
sky radiance → background rate → background error rate, ending in the key yield of
one QKD transmission window. The spot size uses the λR/D divergence convention.
The same formulas describe a satellite-to-ground link with the seeing multiplier
applied at the ground end.
"""
import dataclasses
import math
import pathlib
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd
import yaml
from scipy.optimize import brentq

from src.constants import (DEFAULT_BLOCK_COLS, DEFAULT_BLOCK_ROWS, INTERCEPT_EVE_ACCURACY, INTERCEPT_QBER,
                           SCHEMA_VERSION)
from src.errors import ConfigError, ParameterError, ProtocolError
from src.optics.photonics import multi_photon_fraction
from src.postprocessing.privacy import compute_final_length, eve_bound_bits
from src.utils.util import as_bits, get_logger

log = get_logger(__name__)

ARCSEC = math.pi / (180 * 3600)
PROBABILITY_FIELDS = ("atmospheric_transmission", "detector_efficiency", "protocol_efficiency", "optical_ber")


@dataclass(frozen=True)
class LinkParams:
    """
    Physical parameters of one ground-to-satellite QKD pass.

    :param wavelength: Transmission wavelength in m.
    :param tx_aperture: Transmitter aperture D_tx in m.
    :param rx_aperture: Receiver aperture D_rx in m.
    :param range: Link distance R in m.
    :param seeing_multiplier: Beam wander as a multiple of the diffraction-limited spot.
    :param pulse_rate: Data pulse rate in Hz.
    :param mean_photon_number: μ per data pulse.
    :param atmospheric_transmission: η_atm.
    :param detector_efficiency: η_D.
    :param protocol_efficiency: η_Q, the sifted fraction of detections (0.25 for B92, 0.5 for BB84).
    :param radiance: Sky radiance in photons s⁻¹ m⁻² sr⁻¹ μm⁻¹.
    :param filter_bandwidth: Receiver filter width in nm.
    :param receiver_fov: Receiver field of view (angular radius) in arcseconds.
    :param gate_window: Detection gate τ in s.
    :param dark_rate: Detector dark-count rate in Hz.
    :param pass_duration: Time the satellite is in view, in s.
    :param qkd_duration: Time spent on QKD transmissions within a pass, in s.
    :param tilt_control: Beam locked on the satellite: the seeing multiplier drops to 1.
    :param trigger_rate: Detector gate rate in Hz; derived from the bright pulses when unset.
    :param bright_pulse_margin: Brightness of a timing pulse relative to a data pulse.
    :param optical_ber: Error rate from optical misalignment and component imperfections.
    :param block_rows: Reconciliation block rows used in the yield estimate.
    :param block_cols: Reconciliation block columns used in the yield estimate.
    :param security_parameter: Bits sacrificed on top of the estimated leakage.
    """
    wavelength: float = 770e-9
    tx_aperture: float = 0.2
    rx_aperture: float = 0.2
    range: float = 300e3
    seeing_multiplier: float = 10.0
    pulse_rate: float = 10e6
    mean_photon_number: float = 1.0
    atmospheric_transmission: float = 0.8
    detector_efficiency: float = 0.65
    protocol_efficiency: float = 0.25
    radiance: float = 4e15
    filter_bandwidth: float = 1.0
    receiver_fov: float = 5.0
    gate_window: float = 1e-9
    dark_rate: float = 50.0
    pass_duration: float = 480.0
    qkd_duration: float = 60.0
    tilt_control: bool = False
    trigger_rate: Optional[float] = None
    bright_pulse_margin: float = 30.0
    optical_ber: float = 0.015
    block_rows: int = DEFAULT_BLOCK_ROWS
    block_cols: int = DEFAULT_BLOCK_COLS
    security_parameter: int = 32

    def __post_init__(self):
        for name in ("wavelength", "tx_aperture", "rx_aperture", "range", "pulse_rate", "gate_window",
                     "bright_pulse_margin"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("radiance", "filter_bandwidth", "receiver_fov", "dark_rate", "pass_duration",
                     "qkd_duration", "mean_photon_number"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in PROBABILITY_FIELDS:
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ParameterError(f"{name} must be a probability, got {getattr(self, name)}")
        if self.seeing_multiplier < 1:
            raise ParameterError(f"Seeing multiplier must be >= 1, got {self.seeing_multiplier}")
        if self.trigger_rate is not None and self.trigger_rate <= 0:
            raise ParameterError(f"Trigger rate must be > 0 Hz, got {self.trigger_rate}")

    def replace(self, **changes) -> "LinkParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "LinkParams":
        d = dict(d)
        version = d.pop("version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported link parameter file version {version!r}")
        base = PRESETS[d.pop("preset")] if "preset" in d else cls()
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"Unknown link parameters: {sorted(unknown)}")
        return base.replace(**d)

    @classmethod
    def from_yaml(cls, path: Union[str, pathlib.Path]) -> "LinkParams":
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path} does not hold a mapping of link parameters")
        return cls.from_dict(data)


def diffraction_spot_diameter(params: LinkParams) -> float:
    """:return: (λ / D_tx) · R in m."""
    return params.wavelength / params.tx_aperture * params.range


def effective_seeing(params: LinkParams) -> float:
    return 1.0 if params.tilt_control else params.seeing_multiplier


def collection_efficiency(params: LinkParams) -> float:
    """Fraction of the wandered spot caught by the receiver aperture, clamped at 1."""
    spot = effective_seeing(params) * diffraction_spot_diameter(params)
    return min(1.0, (params.rx_aperture / spot) ** 2)


def key_rate(params: LinkParams) -> float:
    """
    Sifted-key rate in Hz.

    :return: pulse_rate · min(μ, 1) · collection · η_atm · η_D · η_Q
    """
    mu_effective = min(params.mean_photon_number, 1.0)
    return (params.pulse_rate * mu_effective * collection_efficiency(params) * params.atmospheric_transmission
            * params.detector_efficiency * params.protocol_efficiency)


def background_rate(params: LinkParams) -> float:
    """
    Background photon rate in Hz reaching the detector.

    :return: radiance · π(D_rx/2)² · πθ² · Δλ, with θ the field-of-view radius in rad and
        Δλ the filter width in μm.
    """
    area = math.pi * (params.rx_aperture / 2) ** 2
    solid_angle = math.pi * (params.receiver_fov * ARCSEC) ** 2
    return params.radiance * area * solid_angle * params.filter_bandwidth / 1000.0


def trigger_rate(params: LinkParams) -> float:
    """Rate of bright timing pulses detected at the satellite, each opening one gate."""
    if params.trigger_rate is not None:
        return params.trigger_rate
    return params.pulse_rate * min(1.0, collection_efficiency(params) * params.bright_pulse_margin)


def background_ber(params: LinkParams, trigger: Optional[float] = None, key: Optional[float] = None) -> float:
    """
    Error rate per sifted bit from background and dark clicks: noise inside the gate,
    half of it on the wrong detector, divided by the sifted bits per gate.

    :param params: Link parameters.
    :param trigger: Gate rate in Hz; derived when omitted.
    :param key: Sifted key rate in Hz; derived when omitted.
    """
    trigger = trigger_rate(params) if trigger is None else trigger
    key = key_rate(params) if key is None else key
    if key <= 0:
        raise ParameterError("Background BER is undefined for a zero key rate")
    if trigger < key:
        raise ParameterError(f"Trigger rate {trigger:g} Hz is below the key rate {key:g} Hz")
    noise = (background_rate(params) + params.dark_rate) * params.gate_window * 0.5
    return noise / (key / trigger)


def noise_budget(params: LinkParams) -> Dict[str, float]:
    """Split of the expected error rate into optical, background and dark parts."""
    key, trigger = key_rate(params), trigger_rate(params)
    per_bit = params.gate_window * 0.5 * trigger / key if key > 0 else float("nan")
    background = background_rate(params) * per_bit
    dark = params.dark_rate * per_bit
    return {
        "optical_ber": params.optical_ber,
        "background_ber": background,
        "dark_ber": dark,
        "total_ber": params.optical_ber + background + dark,
    }


@dataclass(frozen=True)
class PassYield:
    raw_bits: int
    post_processing_estimate: int


def _final_bits(params: LinkParams, raw_bits: float, ber: float) -> float:
    rows, cols = params.block_rows, params.block_cols
    # one correcting pass confirmed by one clean pass
    leaked = int(math.ceil(2 * (rows + cols) / (rows * cols) * raw_bits))
    eve = eve_bound_bits(int(raw_bits), min(ber, 1.0), params.mean_photon_number or None)
    return compute_final_length(int(raw_bits), leaked, eve, params.security_parameter)


def pass_yield(params: LinkParams) -> PassYield:
    """
    Key bits produced in one pass: raw sifted bits over the QKD window, and what is left
    after reconciliation leakage, the eavesdropper bound and the security margin.
    """
    duration = min(params.qkd_duration, params.pass_duration)
    if duration <= 0:
        return PassYield(0, 0)
    raw = int(round(key_rate(params) * duration))
    if raw == 0:
        return PassYield(0, 0)
    ber = params.optical_ber + background_ber(params)
    return PassYield(raw, int(_final_bits(params, raw, ber)))


def link_report(params: LinkParams) -> Dict[str, float]:
    """One CSV row of the link budget."""
    key = key_rate(params)
    yield_ = pass_yield(params)
    return {
        "schema_version": SCHEMA_VERSION,
        "spot_diameter_m": diffraction_spot_diameter(params),
        "collection_efficiency": collection_efficiency(params),
        "key_rate": key,
        "trigger_rate": trigger_rate(params),
        "background_rate": background_rate(params),
        "ber": background_ber(params) if key > 0 else float("nan"),
        "raw_bits": yield_.raw_bits,
        "final_bits": yield_.post_processing_estimate,
        "multi_photon_fraction": multi_photon_fraction(params.mean_photon_number)
        if params.mean_photon_number > 0 else 0.0,
    }


def sweep(params: LinkParams, field: str, values: Iterable[float]) -> pd.DataFrame:
    """Evaluate the link report while one parameter runs over ``values``."""
    if field not in {f.name for f in dataclasses.fields(LinkParams)}:
        raise ConfigError(f"Cannot sweep unknown link parameter {field!r}")
    rows = []
    for value in values:
        row = link_report(params.replace(**{field: value}))
        rows.append({field: value, **row})
    return pd.DataFrame(rows)


def break_even_radiance(params: LinkParams) -> float:
    """
    Sky radiance at which one pass stops yielding any final key bits.

    :return: The radiance in photons s⁻¹ m⁻² sr⁻¹ μm⁻¹, 0 if no key survives even in the dark.
    """
    raw = key_rate(params) * min(params.qkd_duration, params.pass_duration)
    if raw <= 0:
        return 0.0

    def margin(radiance: float) -> float:
        shifted = params.replace(radiance=radiance)
        ber = min(1.0, shifted.optical_ber + background_ber(shifted))
        rows, cols = params.block_rows, params.block_cols
        multi = multi_photon_fraction(params.mean_photon_number) if params.mean_photon_number > 0 else 0.0
        eve = (multi + min(1.0, ber / INTERCEPT_QBER) * INTERCEPT_EVE_ACCURACY) * raw
        return raw - 2 * (rows + cols) / (rows * cols) * raw - eve - params.security_parameter

    if margin(0.0) <= 0:
        return 0.0
    upper = max(params.radiance, 1.0)
    while margin(upper) > 0:
        upper *= 10
    return float(brentq(margin, 0.0, upper, rtol=1e-10))


PRESETS: Dict[str, LinkParams] = {
    "night": LinkParams(),
    "night_tilt": LinkParams(tilt_control=True),
    "day": LinkParams(radiance=2e19, filter_bandwidth=0.01),
    "typical_seeing": LinkParams(seeing_multiplier=3.0),
}


def preset(name: str) -> LinkParams:
    if name not in PRESETS:
        raise ConfigError(f"Unknown link preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]


@dataclass(frozen=True)
class RelayResult:
    broadcast: np.ndarray
    bob_final: np.ndarray


def otp_xor(message_bits: np.ndarray, key_bits: np.ndarray) -> np.ndarray:
    """One-time pad: XOR of equal-length bit strings."""
    message_bits, key_bits = as_bits(message_bits), as_bits(key_bits)
    if len(message_bits) != len(key_bits):
        raise ProtocolError(f"One-time pad needs equal lengths, got {len(message_bits)} and {len(key_bits)}")
    return np.bitwise_xor(message_bits, key_bits)


def xor_relay(key_alice_sat: np.ndarray, key_bob_sat: np.ndarray) -> RelayResult:
    """
    Hand Alice's satellite key to Bob: the satellite broadcasts the XOR of the keys it
    shares with each ground station, and Bob strips his own key off it.
    """
    broadcast = otp_xor(key_alice_sat, key_bob_sat)
    return RelayResult(broadcast, otp_xor(broadcast, key_bob_sat))
