"""
Polarization states, projective-measurement probabilities and the photon-number
statistics of weak coherent pulses.

Angles are kept in degrees so that the four named states (H, V, +45°, -45°) and the
0 / 0.5 / 1 projection probabilities between them are exact.
"""
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from scipy.stats import poisson

from src.constants import ANGLE_H, ANGLE_MINUS45, ANGLE_PLUS45, ANGLE_V, Basis, Party
from src.errors import ParameterError


def normalize_angle(angle: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Fold a linear-polarization angle into [0, 180)."""
    folded = np.mod(angle, 180.0)
    if np.ndim(folded) == 0:
        folded = float(folded)
        return 0.0 if folded == 180.0 else folded
    return np.where(folded == 180.0, 0.0, folded)


@dataclass(frozen=True)
class PolarizationState:
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", normalize_angle(float(self.angle)))

    def orthogonal(self) -> "PolarizationState":
        return PolarizationState(self.angle + 90.0)

    def __str__(self):
        names = {ANGLE_H: "H", ANGLE_V: "V", ANGLE_PLUS45: "+45°", ANGLE_MINUS45: "-45°"}
        return names.get(self.angle, f"{self.angle:g}°")


H = PolarizationState(ANGLE_H)
V = PolarizationState(ANGLE_V)
PLUS45 = PolarizationState(ANGLE_PLUS45)
MINUS45 = PolarizationState(ANGLE_MINUS45)

_B92_ALICE_ANGLES = np.array([ANGLE_V, ANGLE_PLUS45])
_B92_BOB_ANGLES = np.array([ANGLE_MINUS45, ANGLE_H])
# indexed [basis, bit]
_BB84_ANGLES = np.array([[ANGLE_H, ANGLE_V], [ANGLE_PLUS45, ANGLE_MINUS45]])


def malus(angles: np.ndarray, analyzer_angles: np.ndarray) -> np.ndarray:
    """
    Vectorized cos² of the angle between polarization and analyzer.

    Differences that are multiples of 45° are returned exactly.
    """
    delta = np.mod(np.asarray(angles, dtype=np.float64) - np.asarray(analyzer_angles, dtype=np.float64), 180.0)
    probs = np.cos(np.radians(delta)) ** 2
    probs = np.where(delta == 0.0, 1.0, probs)
    probs = np.where(delta == 90.0, 0.0, probs)
    probs = np.where((delta == 45.0) | (delta == 135.0), 0.5, probs)
    return np.clip(probs, 0.0, 1.0)


def pass_probability(state: PolarizationState, analyzer: PolarizationState) -> float:
    """
    Probability that a photon in ``state`` passes a linear analyzer (Malus law).

    :param state: The photon polarization.
    :param analyzer: The analyzer orientation.
    :return: cos²(state.angle - analyzer.angle), symmetric in its arguments.
    """
    return float(malus(state.angle, analyzer.angle))


def _check_bit(bit: int):
    if bit not in (0, 1):
        raise ParameterError(f"A bit must be 0 or 1, got {bit!r}")


def encode_b92(bit: int, party: Union[Party, str]) -> PolarizationState:
    """
    B92 alphabet. Alice prepares '0' as V and '1' as +45°; Bob's analyzer for his bit
    '0' is -45° and for '1' is H, so he never passes a state prepared for the other bit.
    """
    _check_bit(bit)
    party = Party(party)
    if party is Party.ALICE:
        return PolarizationState(_B92_ALICE_ANGLES[bit])
    return PolarizationState(_B92_BOB_ANGLES[bit])


def encode_bb84(bit: int, basis: Union[Basis, int]) -> PolarizationState:
    """BB84 alphabet: rectilinear 0→H, 1→V; diagonal 0→+45°, 1→-45°."""
    _check_bit(bit)
    return PolarizationState(_BB84_ANGLES[int(Basis(basis)), bit])


def b92_angles(bits: np.ndarray, party: Union[Party, str]) -> np.ndarray:
    table = _B92_ALICE_ANGLES if Party(party) is Party.ALICE else _B92_BOB_ANGLES
    return table[np.asarray(bits, dtype=np.intp)]


def bb84_angles(bits: np.ndarray, bases: np.ndarray) -> np.ndarray:
    return _BB84_ANGLES[np.asarray(bases, dtype=np.intp), np.asarray(bits, dtype=np.intp)]


@dataclass(frozen=True)
class PulseSource:
    """
    Attenuated pulsed laser.

    :param mean_photon_number: Poisson mean μ of photons per data pulse.
    :param pulse_rate: Clock rate in Hz.
    :param photon_number: When set, every pulse carries exactly this many photons
        (an idealized single-photon source for ``photon_number=1``).
    """
    mean_photon_number: float
    pulse_rate: float = 1e6
    photon_number: Optional[int] = None

    def __post_init__(self):
        if self.mean_photon_number < 0 or not math.isfinite(self.mean_photon_number):
            raise ParameterError(f"Mean photon number must be >= 0, got {self.mean_photon_number}")
        if self.pulse_rate <= 0:
            raise ParameterError(f"Pulse rate must be > 0 Hz, got {self.pulse_rate}")
        if self.photon_number is not None and self.photon_number < 0:
            raise ParameterError(f"Fixed photon number must be >= 0, got {self.photon_number}")


@dataclass(frozen=True)
class PulseEvent:
    tick_index: int
    photon_count: int
    polarization: PolarizationState


@dataclass(frozen=True)
class PulseTrain:
    """
    Columnar batch of pulses: the form every simulation stage works on.

    ``photon_count`` holds emitted photons for a train leaving Alice and surviving
    photons once the train has crossed the channel.
    """
    tick_index: np.ndarray
    photon_count: np.ndarray
    angle: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tick_index", np.asarray(self.tick_index, dtype=np.int64))
        object.__setattr__(self, "photon_count", np.asarray(self.photon_count, dtype=np.int64))
        object.__setattr__(self, "angle", normalize_angle(np.asarray(self.angle, dtype=np.float64)))
        if not (len(self.tick_index) == len(self.photon_count) == len(self.angle)):
            raise ValueError("PulseTrain columns must have equal lengths")

    def __len__(self):
        return len(self.tick_index)

    def __getitem__(self, i: int) -> PulseEvent:
        return PulseEvent(int(self.tick_index[i]), int(self.photon_count[i]), PolarizationState(self.angle[i]))

    @classmethod
    def from_events(cls, events: Iterable) -> "PulseTrain":
        events = list(events)
        counts = [e.photon_count if hasattr(e, "photon_count") else e.surviving_photons for e in events]
        return cls(
            tick_index=[e.tick_index for e in events],
            photon_count=counts,
            angle=[e.polarization.angle for e in events],
        )

    def replace(self, photon_count=None, angle=None) -> "PulseTrain":
        return PulseTrain(
            tick_index=self.tick_index,
            photon_count=self.photon_count if photon_count is None else photon_count,
            angle=self.angle if angle is None else angle,
        )

    def total_photons(self) -> int:
        return int(self.photon_count.sum())


def poisson_pmf(n: Union[int, np.ndarray], mu: float):
    if mu < 0:
        raise ParameterError(f"Mean photon number must be >= 0, got {mu}")
    return poisson.pmf(n, mu)


def at_least_one_probability(mu: float) -> float:
    """P(n >= 1) for a Poisson pulse of mean μ."""
    if mu < 0:
        raise ParameterError(f"Mean photon number must be >= 0, got {mu}")
    return float(-np.expm1(-mu))


def multi_photon_probability(mu: float) -> float:
    """P(n >= 2) for a Poisson pulse of mean μ."""
    if mu < 0:
        raise ParameterError(f"Mean photon number must be >= 0, got {mu}")
    return float(-np.expm1(-mu) - mu * np.exp(-mu))


def multi_photon_fraction(mu: float) -> float:
    """
    Probability that a pulse holds more than one photon given that it holds at least one.

    :param mu: Mean photon number, must be > 0.
    :return: (1 - e^-μ - μe^-μ) / (1 - e^-μ)
    """
    if mu <= 0:
        raise ParameterError(f"Multi-photon fraction needs μ > 0, got {mu}")
    return multi_photon_probability(mu) / at_least_one_probability(mu)


def sample_photon_counts(source: PulseSource, size: int, rng: np.random.Generator) -> np.ndarray:
    if source.photon_number is not None:
        return np.full(size, source.photon_number, dtype=np.int64)
    if source.mean_photon_number == 0:
        return np.zeros(size, dtype=np.int64)
    return rng.poisson(source.mean_photon_number, size=size).astype(np.int64)


def sample_photon_count(source: PulseSource, rng: np.random.Generator) -> int:
    """Draw the photon number of one pulse; Poisson(μ) unless the source is fixed-number."""
    return int(sample_photon_counts(source, 1, rng)[0])
