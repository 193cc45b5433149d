"""
Alice and Bob as clocked state machines: bit generation, pulse emission, measurement,
sifting and error-rate estimation for B92 (and the BB84 variant).
"""
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from src.constants import KeyStage, Outcome, Party
from src.errors import ParameterError, ProtocolError
from src.optics.channel import (ArrivalEvent, ChannelParams, DetectionRecord, DetectionTrain, measure_b92,
                                measure_b92_train, measure_bb84_train)
from src.optics.photonics import (PulseEvent, PulseSource, PulseTrain, b92_angles, bb84_angles, encode_b92,
                                  sample_photon_count, sample_photon_counts)
from src.protocol.keys import KeyBuffer, SiftResult
from src.utils.util import as_bits, get_logger

log = get_logger(__name__)

Detections = Union[DetectionTrain, Sequence[DetectionRecord]]


def random_bits(size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=size, dtype=np.uint8)


def alice_round(bit: int, source: PulseSource, rng: np.random.Generator, tick_index: int = 0) -> PulseEvent:
    """
    Emit one data pulse for one of Alice's bits.

    :param bit: Alice's secret bit for this tick.
    :param source: The attenuated laser.
    :param rng: Alice's random stream; only the photon number is drawn from it.
    :param tick_index: Clock tick of the pulse.
    :return: A pulse polarized V for '0' and +45° for '1'.
    """
    polarization = encode_b92(bit, Party.ALICE)
    return PulseEvent(tick_index, sample_photon_count(source, rng), polarization)


def alice_train(bits: np.ndarray, source: PulseSource, rng: np.random.Generator, start_tick: int = 0) -> PulseTrain:
    bits = as_bits(bits)
    ticks = np.arange(start_tick, start_tick + len(bits), dtype=np.int64)
    return PulseTrain(ticks, sample_photon_counts(source, len(bits), rng), b92_angles(bits, Party.ALICE))


def alice_train_bb84(bits: np.ndarray, bases: np.ndarray, source: PulseSource, rng: np.random.Generator,
                     start_tick: int = 0) -> PulseTrain:
    bits = as_bits(bits)
    ticks = np.arange(start_tick, start_tick + len(bits), dtype=np.int64)
    return PulseTrain(ticks, sample_photon_counts(source, len(bits), rng), bb84_angles(bits, bases))


def bob_round(arrival: ArrivalEvent, bob_bit: int, params: ChannelParams, rng: np.random.Generator) -> DetectionRecord:
    """Bob's 'pass' (Y) is a single-bit outcome; everything else is a 'fail' (N)."""
    return measure_b92(arrival, bob_bit, params, rng)


def bob_train(arrivals: PulseTrain, bob_bits: np.ndarray, params: ChannelParams,
              rng: np.random.Generator) -> DetectionTrain:
    return measure_b92_train(arrivals, as_bits(bob_bits), params, rng)


def bob_train_bb84(arrivals: PulseTrain, bob_bases: np.ndarray, params: ChannelParams,
                   rng: np.random.Generator) -> DetectionTrain:
    return measure_bb84_train(arrivals, as_bits(bob_bases), params, rng)


def _as_train(detections: Detections) -> DetectionTrain:
    if isinstance(detections, DetectionTrain):
        return detections
    return DetectionTrain.from_records(detections)


def _detected(detections: DetectionTrain):
    outcome = detections.outcome
    single = (outcome == Outcome.BIT0) | (outcome == Outcome.BIT1)
    dual = outcome == Outcome.DUAL
    return single, dual


def _sift_result(alice_bits: np.ndarray, detections: DetectionTrain, keep: np.ndarray,
                 dual_fire_count: int) -> SiftResult:
    ticks = detections.tick_index[keep]
    bob_bits = (detections.outcome[keep] == Outcome.BIT1).astype(np.uint8)
    alice_key = KeyBuffer(alice_bits[keep], ticks, KeyStage.SIFTED)
    bob_key = KeyBuffer(bob_bits, ticks, KeyStage.SIFTED)
    detected = detections.tick_index[detections.outcome != Outcome.NONE]
    return SiftResult(alice_key, bob_key, detected, dual_fire_count)


def sift(alice_bits: np.ndarray, bob_bits: np.ndarray, detections: Detections) -> SiftResult:
    """
    Keep the ticks on which Bob recorded a single-bit 'pass'.

    Bob announces only the tick indices; his key bit is the bit of the counter that
    fired and Alice's key bit is her own bit at that tick. Dual fires never enter the
    key and are counted separately.

    :param alice_bits: Alice's random bit per tick.
    :param bob_bits: Bob's measurement choice per tick.
    :param detections: Bob's per-tick detection records, aligned with the bit sequences.
    :return: The sifted key pair.
    """
    alice_bits, bob_bits = as_bits(alice_bits), as_bits(bob_bits)
    detections = _as_train(detections)
    if not len(alice_bits) == len(bob_bits) == len(detections):
        raise ProtocolError(f"Sequences are not tick-aligned: alice={len(alice_bits)}, bob={len(bob_bits)}, "
                            f"detections={len(detections)}")
    single, dual = _detected(detections)
    return _sift_result(alice_bits, detections, single, int(np.count_nonzero(dual)))


def sift_bb84(alice_bits: np.ndarray, alice_bases: np.ndarray, bob_bases: np.ndarray,
              detections: Detections) -> SiftResult:
    """Keep the detected ticks where Alice's preparation basis equals Bob's measurement basis."""
    alice_bits, alice_bases, bob_bases = as_bits(alice_bits), as_bits(alice_bases), as_bits(bob_bases)
    detections = _as_train(detections)
    if not len(alice_bits) == len(alice_bases) == len(bob_bases) == len(detections):
        raise ProtocolError("Bits, bases and detections are not tick-aligned")
    single, dual = _detected(detections)
    return _sift_result(alice_bits, detections, single & (alice_bases == bob_bases), int(np.count_nonzero(dual)))


def sift_from_index_list(key_bits: np.ndarray, all_ticks: np.ndarray, announced: Iterable[int]) -> KeyBuffer:
    """Select one party's bits at the ticks announced in an INDEX_LIST message."""
    announced = np.asarray(list(announced), dtype=np.int64)
    positions = np.searchsorted(all_ticks, announced)
    if np.any(positions >= len(all_ticks)) or not np.array_equal(all_ticks[positions], announced):
        raise ProtocolError("Announced tick indices are not part of the transmission")
    return KeyBuffer(as_bits(key_bits)[positions], announced, KeyStage.SIFTED)


@dataclass(frozen=True)
class QberEstimate:
    """
    Result of the disclosed-sample error estimate. The sampled bits are gone from the
    returned keys; ``disclosed`` is the number of bits published.
    """
    qber: float
    disclosed: int
    errors: int
    alice_key: KeyBuffer
    bob_key: KeyBuffer
    sample_ticks: np.ndarray
    sample_bits: Optional[np.ndarray] = None


def sample_positions(n_bits: int, sample_fraction: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 < sample_fraction <= 1.0:
        raise ParameterError(f"Sample fraction must lie in (0, 1], got {sample_fraction}")
    n_sample = min(n_bits, max(1, int(round(sample_fraction * n_bits))))
    return np.sort(rng.choice(n_bits, size=n_sample, replace=False))


def estimate_qber(alice_key: KeyBuffer, bob_key: KeyBuffer, sample_fraction: float,
                  rng: np.random.Generator) -> QberEstimate:
    """
    Publicly compare a random sample of the sifted key.

    :param alice_key: Alice's sifted key.
    :param bob_key: Bob's sifted key, tick-aligned with Alice's.
    :param sample_fraction: Fraction of the key to disclose, in (0, 1].
    :param rng: Stream choosing the disclosed positions.
    :return: The estimate and both keys with the disclosed bits removed.
    """
    if len(alice_key) == 0 or len(bob_key) == 0:
        raise ProtocolError("Cannot estimate the error rate of an empty key")
    if len(alice_key) != len(bob_key) or not np.array_equal(alice_key.ticks, bob_key.ticks):
        raise ProtocolError("Keys are not tick-aligned")

    positions = sample_positions(len(alice_key), sample_fraction, rng)
    errors = int(np.count_nonzero(alice_key.bits[positions] != bob_key.bits[positions]))
    qber = errors / len(positions)
    log.debug(f"QBER sample: {errors} errors in {len(positions)} disclosed bits")
    return QberEstimate(
        qber=qber,
        disclosed=len(positions),
        errors=errors,
        alice_key=alice_key.without(positions),
        bob_key=bob_key.without(positions),
        sample_ticks=alice_key.ticks[positions],
        sample_bits=bob_key.bits[positions],
    )


def compare_disclosed(own_key: KeyBuffer, sample_ticks: np.ndarray, sample_bits: np.ndarray) -> int:
    """Count mismatches between a received QBER_SAMPLE and the local key at the same ticks."""
    positions = np.searchsorted(own_key.ticks, sample_ticks)
    if np.any(positions >= len(own_key)) or not np.array_equal(own_key.ticks[positions], sample_ticks):
        raise ProtocolError("QBER sample refers to ticks outside the sifted key")
    return int(np.count_nonzero(own_key.bits[positions] != as_bits(sample_bits)))
