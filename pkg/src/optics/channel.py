"""
The lossy, noisy free-space channel and Bob's gated pair of photon counters.

Each surviving photon takes one of two receiver arms behind a 50/50 beamsplitter.
The first photon of a tick follows the arm recorded as Bob's choice for that tick;
any further photons pick an arm independently, which is how multi-photon pulses
can make both counters fire in one gate. Background and dark clicks are split
evenly between the two counters.
"""
from dataclasses import dataclass

import numpy as np

from src.constants import ANGLE_H, ANGLE_MINUS45, Cause, Outcome
from src.errors import ParameterError
from src.optics.photonics import PolarizationState, PulseEvent, PulseTrain, bb84_angles, malus


@dataclass(frozen=True)
class ChannelParams:
    """
    :param transmittance: Combined path transmission η_T.
    :param detector_efficiency: Photon-counter efficiency η_D.
    :param background_rate: Background photon rate at the receiver in Hz.
    :param dark_rate: Combined dark-count rate in Hz.
    :param gate_window: Detection gate τ in seconds.
    :param trigger_rate: Gate (clock) rate in Hz.
    :param photon_misalignment: Probability that a detected photon lands in the wrong
        counter; applied per photon, so it can produce dual fires.
    """
    transmittance: float = 1.0
    detector_efficiency: float = 1.0
    background_rate: float = 0.0
    dark_rate: float = 0.0
    gate_window: float = 1e-9
    trigger_rate: float = 1e6
    photon_misalignment: float = 0.0

    def __post_init__(self):
        for name in ("transmittance", "detector_efficiency"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must be a probability, got {value}")
        if not 0.0 <= self.photon_misalignment <= 0.5:
            raise ParameterError(f"photon_misalignment must lie in [0, 0.5], got {self.photon_misalignment}")
        if self.background_rate < 0 or self.dark_rate < 0:
            raise ParameterError("Background and dark rates must be >= 0 Hz")
        if self.gate_window <= 0:
            raise ParameterError(f"Gate window must be > 0 s, got {self.gate_window}")
        if self.trigger_rate <= 0:
            raise ParameterError(f"Trigger rate must be > 0 Hz, got {self.trigger_rate}")
        noise_click_probability(self)

    @property
    def background_click_probability(self) -> float:
        return self.background_rate * self.gate_window

    @property
    def dark_click_probability(self) -> float:
        return self.dark_rate * self.gate_window


@dataclass(frozen=True)
class ArrivalEvent:
    tick_index: int
    surviving_photons: int
    polarization: PolarizationState


@dataclass(frozen=True)
class DetectionRecord:
    tick_index: int
    outcome: Outcome
    cause: Cause

    @property
    def bit(self):
        if self.outcome is Outcome.BIT0:
            return 0
        if self.outcome is Outcome.BIT1:
            return 1
        return None


@dataclass(frozen=True)
class DetectionTrain:
    """Columnar batch of detection records."""
    tick_index: np.ndarray
    outcome: np.ndarray
    cause: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tick_index", np.asarray(self.tick_index, dtype=np.int64))
        object.__setattr__(self, "outcome", np.asarray(self.outcome, dtype=np.int8))
        object.__setattr__(self, "cause", np.asarray(self.cause, dtype=np.int8))

    def __len__(self):
        return len(self.tick_index)

    def __getitem__(self, i: int) -> DetectionRecord:
        return DetectionRecord(int(self.tick_index[i]), Outcome(int(self.outcome[i])), Cause(int(self.cause[i])))

    @classmethod
    def from_records(cls, records) -> "DetectionTrain":
        records = list(records)
        return cls(
            tick_index=[r.tick_index for r in records],
            outcome=[int(r.outcome) for r in records],
            cause=[int(r.cause) for r in records],
        )

    @classmethod
    def concatenate(cls, trains) -> "DetectionTrain":
        trains = list(trains)
        if not trains:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0))
        return cls(
            tick_index=np.concatenate([t.tick_index for t in trains]),
            outcome=np.concatenate([t.outcome for t in trains]),
            cause=np.concatenate([t.cause for t in trains]),
        )

    def replace(self, outcome=None, cause=None) -> "DetectionTrain":
        return DetectionTrain(
            self.tick_index,
            self.outcome if outcome is None else outcome,
            self.cause if cause is None else cause,
        )

    def count(self, outcome: Outcome) -> int:
        return int(np.count_nonzero(self.outcome == outcome))


def noise_click_probability(params: ChannelParams) -> float:
    """
    Probability of a background or dark click somewhere in Bob's receiver during one gate.

    :return: (R_bg + R_dark) · τ
    """
    p_noise = (params.background_rate + params.dark_rate) * params.gate_window
    if p_noise >= 1.0:
        raise ParameterError(f"Per-gate noise probability must be < 1, got {p_noise}")
    return p_noise


def noise_ber_contribution(params: ChannelParams, sift_fraction: float) -> float:
    """
    Error rate added to the sifted key by noise clicks: half of them land on the wrong
    counter, normalized by the fraction of gates that yield a sifted bit.
    """
    if not 0.0 < sift_fraction <= 1.0:
        raise ParameterError(f"Sift fraction must lie in (0, 1], got {sift_fraction}")
    return noise_click_probability(params) / 2 / sift_fraction


def transmit_train(train: PulseTrain, params: ChannelParams, rng: np.random.Generator) -> PulseTrain:
    survivors = rng.binomial(train.photon_count, params.transmittance)
    return train.replace(photon_count=survivors)


def transmit(pulse: PulseEvent, params: ChannelParams, rng: np.random.Generator) -> ArrivalEvent:
    """Each photon survives the path independently with probability η_T; polarization is preserved."""
    arrived = transmit_train(PulseTrain.from_events([pulse]), params, rng)
    return ArrivalEvent(pulse.tick_index, int(arrived.photon_count[0]), pulse.polarization)


def _route_photons(train: PulseTrain, first_arm: np.ndarray, rng: np.random.Generator):
    counts = train.photon_count
    owner = np.repeat(np.arange(len(train)), counts)
    arm = rng.integers(0, 2, size=owner.size)
    first = np.cumsum(counts) - counts
    first = first[counts > 0]
    arm[first] = np.asarray(first_arm, dtype=np.int64)[owner[first]]
    return owner, arm


def _clicks(train: PulseTrain, owner, p_counter0, p_counter1, params: ChannelParams, rng: np.random.Generator):
    u_route = rng.random(owner.size)
    u_detect = rng.random(owner.size)
    u_swap = rng.random(owner.size)

    counter = np.full(owner.size, -1, dtype=np.int64)
    counter[u_route < p_counter0] = 0
    counter[(u_route >= p_counter0) & (u_route < p_counter0 + p_counter1)] = 1
    counter[u_detect >= params.detector_efficiency] = -1
    swapped = (counter >= 0) & (u_swap < params.photon_misalignment)
    counter[swapped] = 1 - counter[swapped]

    n = len(train)
    sig0 = np.bincount(owner[counter == 0], minlength=n) > 0
    sig1 = np.bincount(owner[counter == 1], minlength=n) > 0

    u_noise = rng.random((4, n))
    p_bg = params.background_click_probability / 2
    p_dark = params.dark_click_probability / 2
    bg0, bg1 = u_noise[0] < p_bg, u_noise[1] < p_bg
    dk0, dk1 = u_noise[2] < p_dark, u_noise[3] < p_dark
    return sig0, sig1, bg0, bg1, dk0, dk1


def classify(tick_index, sig0, sig1, bg0, bg1, dk0, dk1) -> DetectionTrain:
    """Turn per-counter click flags into outcomes and causes."""
    noise0, noise1 = bg0 | dk0, bg1 | dk1
    click0, click1 = sig0 | noise0, sig1 | noise1

    outcome = np.full(len(tick_index), Outcome.NONE, dtype=np.int8)
    outcome[click0 & ~click1] = Outcome.BIT0
    outcome[click1 & ~click0] = Outcome.BIT1
    outcome[click0 & click1] = Outcome.DUAL

    signal = sig0 | sig1
    extra_noise = (noise0 & ~sig0) | (noise1 & ~sig1)
    background, dark = bg0 | bg1, dk0 | dk1

    cause = np.full(len(tick_index), Cause.NONE, dtype=np.int8)
    noise_only = ~signal & (background | dark)
    cause[noise_only & background & ~dark] = Cause.BACKGROUND
    cause[noise_only & dark & ~background] = Cause.DARK
    cause[noise_only & dark & background] = Cause.MIXED
    cause[signal] = Cause.SIGNAL
    cause[signal & extra_noise] = Cause.MIXED
    return DetectionTrain(tick_index, outcome, cause)


def measure_b92_train(train: PulseTrain, bob_bits: np.ndarray, params: ChannelParams,
                      rng: np.random.Generator) -> DetectionTrain:
    """
    Vectorized B92 measurement. Arm ``b`` holds Bob's analyzer for bit ``b`` (-45° for 0,
    H for 1) in front of the counter for bit ``b``; photons failing an analyzer are lost.
    """
    owner, arm = _route_photons(train, bob_bits, rng)
    analyzer = np.where(arm == 0, ANGLE_MINUS45, ANGLE_H)
    passed = malus(train.angle[owner], analyzer)
    p0 = np.where(arm == 0, passed, 0.0)
    p1 = np.where(arm == 1, passed, 0.0)
    flags = _clicks(train, owner, p0, p1, params, rng)
    return classify(train.tick_index, *flags)


def measure_bb84_train(train: PulseTrain, bob_bases: np.ndarray, params: ChannelParams,
                       rng: np.random.Generator) -> DetectionTrain:
    """
    Vectorized BB84 measurement with passive basis choice: behind each arm a polarizing
    beamsplitter sends the photon to the bit-0 or bit-1 counter of that basis.
    """
    owner, arm = _route_photons(train, bob_bases, rng)
    p0 = malus(train.angle[owner], bb84_angles(np.zeros_like(arm), arm))
    flags = _clicks(train, owner, p0, 1.0 - p0, params, rng)
    return classify(train.tick_index, *flags)


def measure_b92(arrival: ArrivalEvent, bob_bit: int, params: ChannelParams,
                rng: np.random.Generator) -> DetectionRecord:
    """
    Measure one arrival in Bob's B92 receiver.

    :param arrival: Photons that survived the channel.
    :param bob_bit: The arm taken by the first photon (Bob's bit for this tick).
    :return: The classified detection record.
    """
    detections = measure_b92_train(PulseTrain.from_events([arrival]), np.array([bob_bit]), params, rng)
    return detections[0]


def measure_bb84(arrival: ArrivalEvent, bob_basis: int, params: ChannelParams,
                 rng: np.random.Generator) -> DetectionRecord:
    detections = measure_bb84_train(PulseTrain.from_events([arrival]), np.array([bob_basis]), params, rng)
    return detections[0]


def _check_flip_probability(flip_probability: float):
    if not 0.0 <= flip_probability <= 0.5:
        raise ParameterError(f"Flip probability must lie in [0, 0.5], got {flip_probability}")


def apply_optical_error_train(detections: DetectionTrain, flip_probability: float,
                              rng: np.random.Generator) -> DetectionTrain:
    _check_flip_probability(flip_probability)
    flip = rng.random(len(detections)) < flip_probability
    outcome = detections.outcome.copy()
    outcome[flip & (detections.outcome == Outcome.BIT0)] = Outcome.BIT1
    outcome[flip & (detections.outcome == Outcome.BIT1)] = Outcome.BIT0
    return detections.replace(outcome=outcome)


def apply_optical_error(record: DetectionRecord, flip_probability: float,
                        rng: np.random.Generator) -> DetectionRecord:
    """
    Lumped misalignment / polarizer-imperfection channel: single-bit outcomes swap
    with ``flip_probability``; no-clicks and dual fires pass unchanged.
    """
    flipped = apply_optical_error_train(DetectionTrain.from_records([record]), flip_probability, rng)
    return flipped[0]
