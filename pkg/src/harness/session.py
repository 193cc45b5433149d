"""
One QKD session run end to end in a single process hosting both parties:

    1. authentication pool setup
    2. random bit sequences
    3. quantum transmission and sifting
    4. error correction
    5. error-rate assessment of Eve's knowledge
    6. privacy amplification
    7. authentication pool replenishment

Every classical message goes through ``ClassicalChannel``, which tags it from the
sender's copy of the pool and checks it against the receiver's copy.
"""
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from tqdm import tqdm

from src.adversary.attacks import AttackModel, EveRecord, apply_attack
from src.constants import (STREAM_ALICE, STREAM_AUTH, STREAM_BOB, STREAM_EVE, STREAM_PRIVACY, STREAM_QBER,
                           STREAM_QUANTUM, STREAM_RECONCILIATION, AmplificationMethod, AttackKind, BobChoice,
                           KeyStage, Outcome, Party, ProtocolName)
from src.errors import AuthenticationError, ProtocolError, QberCeilingExceeded
from src.harness.config import ScenarioConfig
from src.harness.report import SessionTranscript
from src.optics.channel import DetectionTrain, apply_optical_error_train, transmit_train
from src.postprocessing.auth import AuthKeyPool, generate_tag, replenish, verify_tag
from src.postprocessing.privacy import (compute_final_length, drop_rows_cols, eve_bound_bits,
                                        privacy_amplify_subsets)
from src.postprocessing.reconciliation import block_parity_reconcile
from src.protocol import messages
from src.protocol.b92 import (alice_train, alice_train_bb84, bob_train, bob_train_bb84, compare_disclosed,
                              estimate_qber, random_bits, sift, sift_bb84, sift_from_index_list)
from src.protocol.keys import KeyBuffer
from src.protocol.messages import Message, SignedMessage
from src.utils.util import get_logger, make_rng, monobit_z, read_bit_file

log = get_logger(__name__)

Tamper = Callable[[SignedMessage], SignedMessage]


class ClassicalChannel:
    """
    The authenticated public channel between Alice and Bob.

    :param alice_pool: Alice's copy of the authentication pool.
    :param bob_pool: Bob's copy of the authentication pool.
    :param tamper: Optional man-in-the-middle hook applied to each signed message in flight.
    """

    def __init__(self, alice_pool: AuthKeyPool, bob_pool: AuthKeyPool, tamper: Optional[Tamper] = None):
        self.pools = {Party.ALICE: alice_pool, Party.BOB: bob_pool}
        self.tamper = tamper
        self.transcript: List[SignedMessage] = []
        self.ids = itertools.count()

    def next_id(self) -> int:
        return next(self.ids)

    def send(self, message: Message) -> Message:
        sender = Party(message.sender)
        receiver = Party.BOB if sender is Party.ALICE else Party.ALICE
        tag = generate_tag(message.to_bytes(), self.pools[sender], message.message_id)
        signed = SignedMessage(message, tag)
        if self.tamper is not None:
            signed = self.tamper(signed)
        self.transcript.append(signed)
        if not verify_tag(signed.message.to_bytes(), signed.tag, self.pools[receiver]):
            raise AuthenticationError(f"Tag check failed on message {signed.tag.message_id} "
                                      f"({signed.message.type.value} from {sender.value})")
        return signed.message


@dataclass(frozen=True)
class QuantumStage:
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    alice_bases: Optional[np.ndarray]
    detections: DetectionTrain
    eve_record: EveRecord
    attack_feasible: Optional[bool] = None

    @property
    def detection_rate(self) -> float:
        return float(np.mean(self.detections.outcome != Outcome.NONE)) if len(self.detections) else 0.0


def _alice_bits(config: ScenarioConfig) -> np.ndarray:
    if config.entropy_file is None:
        return random_bits(config.pulse_count, make_rng(config.seed, STREAM_ALICE))
    bits = read_bit_file(config.entropy_file)
    if len(bits) < config.pulse_count:
        raise ProtocolError(f"Entropy file holds {len(bits)} bits, the session needs {config.pulse_count}")
    return bits[:config.pulse_count]


def _run_batch(config: ScenarioConfig, attack: AttackModel, batch: int, start: int, alice_bits: np.ndarray,
               alice_bases: Optional[np.ndarray], bob_bits: Optional[np.ndarray]):
    rng = make_rng(config.seed, STREAM_QUANTUM, batch)
    eve_rng = make_rng(config.seed, STREAM_EVE, batch)
    protocol = ProtocolName(config.protocol)
    n = len(alice_bits)
    if bob_bits is None:
        bob_bits = random_bits(n, rng)

    if protocol is ProtocolName.BB84:
        train = alice_train_bb84(alice_bits, alice_bases, config.pulse_source(), rng, start)
    else:
        train = alice_train(alice_bits, config.pulse_source(), rng, start)

    attacked = apply_attack(attack, train, eve_rng, protocol)
    params = config.channel_params()
    arrivals = attacked.forwarded if attacked.lossless else transmit_train(attacked.forwarded, params, rng)
    if protocol is ProtocolName.BB84:
        detections = bob_train_bb84(arrivals, bob_bits, params, rng)
    else:
        detections = bob_train(arrivals, bob_bits, params, rng)
    detections = apply_optical_error_train(detections, config.channel.optical_flip_probability, rng)
    return bob_bits, detections, attacked.record, attacked.stats


def run_quantum_stage(config: ScenarioConfig, attack: Optional[AttackModel] = None,
                      progress: bool = False) -> QuantumStage:
    """
    Generate both parties' random sequences and push every tick through Eve, the
    channel and Bob's receiver.

    Ticks are processed in fixed-size batches, each with its own random substream,
    so the result does not depend on ``num_workers``.
    """
    attack = config.attack_model() if attack is None else attack
    if attack.kind is AttackKind.QND and attack.bob_detection_rate is None:
        baseline = run_quantum_stage(config, AttackModel(), progress=False)
        log.info(f"QND attack: baseline detection rate {baseline.detection_rate:.5f} per pulse")
        attack = AttackModel(AttackKind.QND, bob_detection_rate=baseline.detection_rate)

    n = config.pulse_count
    alice_bits = _alice_bits(config)
    alice_bases = random_bits(n, make_rng(config.seed, STREAM_ALICE, 1)) \
        if config.protocol is ProtocolName.BB84 else None
    bob_sequence = random_bits(n, make_rng(config.seed, STREAM_BOB)) \
        if config.bob_choice is BobChoice.SEQUENCE else None

    starts = list(range(0, n, config.tick_batch_size))

    def work(batch: int):
        start = starts[batch]
        stop = min(n, start + config.tick_batch_size)
        return _run_batch(config, attack, batch, start, alice_bits[start:stop],
                          None if alice_bases is None else alice_bases[start:stop],
                          None if bob_sequence is None else bob_sequence[start:stop])

    with ThreadPoolExecutor(max_workers=config.num_workers) as pool:
        results = list(tqdm(pool.map(work, range(len(starts))), total=len(starts), disable=not progress,
                            desc="quantum transmission", unit="batch"))

    feasible = None
    if attack.kind is AttackKind.QND:
        # judged over the whole train, independent of the batch split
        two_photon_rate = sum(r[3]["multi_photon_pulses"] for r in results) / n
        feasible = two_photon_rate >= attack.bob_detection_rate
        log.info(f"QND attack: two-photon rate {two_photon_rate:.5f}, feasible: {feasible}")
    return QuantumStage(
        alice_bits=alice_bits,
        bob_bits=np.concatenate([r[0] for r in results]).astype(np.uint8),
        alice_bases=alice_bases,
        detections=DetectionTrain.concatenate(r[1] for r in results),
        eve_record=EveRecord.concatenate(r[2] for r in results),
        attack_feasible=feasible,
    )


def initial_pool(config: ScenarioConfig) -> AuthKeyPool:
    """The pre-shared authentication secret of a first session."""
    return AuthKeyPool(make_rng(config.seed, STREAM_AUTH).integers(0, 2, size=config.auth.pool_bits, dtype=np.uint8))


def run_session(config: ScenarioConfig, alice_pool: Optional[AuthKeyPool] = None,
                bob_pool: Optional[AuthKeyPool] = None, tamper: Optional[Tamper] = None,
                progress: bool = False) -> SessionTranscript:
    """
    Run the seven-step key exchange.

    :param config: The scenario.
    :param alice_pool: Alice's authentication pool; a seeded pre-shared pool when omitted.
    :param bob_pool: Bob's copy; a copy of Alice's when omitted.
    :param tamper: Man-in-the-middle hook on the classical channel.
    :param progress: Show a progress bar over the quantum-stage batches.
    :return: The transcript; aborted sessions carry the reason and deliver no key.
    """
    # 1. Authentication pools
    alice_pool = initial_pool(config) if alice_pool is None else alice_pool
    bob_pool = alice_pool.snapshot() if bob_pool is None else bob_pool
    transcript = SessionTranscript(config=config.to_dict(), auth_pool_snapshot=alice_pool.snapshot())
    transcript.stage_lengths[KeyStage.RAW.name.lower()] = config.pulse_count
    channel = ClassicalChannel(alice_pool, bob_pool, tamper)
    consumed_before = alice_pool.total_used
    log.info(f"Session {config.name!r}: seed={config.seed}, pulses={config.pulse_count}, "
             f"protocol={config.protocol.value}, attack={config.attack.kind.value}")

    try:
        _run_steps(config, channel, transcript, progress)
    except ProtocolError as e:
        transcript.abort(f"{type(e).__name__}: {e}")
        log.warning(f"Session aborted: {transcript.abort_reason}")
    finally:
        transcript.messages = list(channel.transcript)
        transcript.auth_bits_consumed = alice_pool.total_used - consumed_before
    return transcript


def _sift_step(config: ScenarioConfig, quantum: QuantumStage, channel: ClassicalChannel):
    ticks = quantum.detections.tick_index
    if config.protocol is ProtocolName.BB84:
        bob_bases = quantum.bob_bits
        result = sift_bb84(quantum.alice_bits, quantum.alice_bases, bob_bases, quantum.detections)
        detected = np.isin(quantum.detections.outcome, (Outcome.BIT0, Outcome.BIT1))
        announced = channel.send(messages.index_list(channel.next_id(), Party.BOB, ticks[detected],
                                                     bob_bases[detected]))
        announced_ticks = np.asarray(announced.payload["ticks"], dtype=np.int64)
        positions = np.searchsorted(ticks, announced_ticks)
        their_bases = announced.bits("bases")
        kept = announced_ticks[quantum.alice_bases[positions] == their_bases]
        confirmed = channel.send(messages.index_list(channel.next_id(), Party.ALICE, kept))
        alice_key = sift_from_index_list(quantum.alice_bits, ticks, confirmed.payload["ticks"])
    else:
        result = sift(quantum.alice_bits, quantum.bob_bits, quantum.detections)
        announced = channel.send(messages.index_list(channel.next_id(), Party.BOB, result.bob_key.ticks))
        alice_key = sift_from_index_list(quantum.alice_bits, ticks, announced.payload["ticks"])
    if not np.array_equal(alice_key.ticks, result.bob_key.ticks):
        raise ProtocolError("Alice and Bob disagree on the sifted tick indices")
    return alice_key, result.bob_key, result.dual_fire_count


def _qber_step(config: ScenarioConfig, alice_key: KeyBuffer, bob_key: KeyBuffer, channel: ClassicalChannel):
    estimate = estimate_qber(alice_key, bob_key, config.qber.sample_fraction, make_rng(config.seed, STREAM_QBER))
    positions = np.searchsorted(alice_key.ticks, estimate.sample_ticks)
    sample = channel.send(messages.qber_sample(channel.next_id(), Party.ALICE, estimate.sample_ticks,
                                               alice_key.bits[positions]))
    sample_ticks = np.asarray(sample.payload["ticks"], dtype=np.int64)
    errors = compare_disclosed(bob_key, sample_ticks, sample.bits())
    reply = channel.send(messages.qber_sample(channel.next_id(), Party.BOB, sample_ticks,
                                              bob_key.bits[np.searchsorted(bob_key.ticks, sample_ticks)]))
    leaked = sample.disclosed_bits + reply.disclosed_bits
    return estimate, errors / len(sample_ticks), errors, leaked


def _run_steps(config: ScenarioConfig, channel: ClassicalChannel, transcript: SessionTranscript, progress: bool):
    # 2-3. Random sequences, quantum transmission, sifting
    quantum = run_quantum_stage(config, progress=progress)
    transcript.attack_feasible = quantum.attack_feasible
    alice_key, bob_key, dual_fires = _sift_step(config, quantum, channel)
    transcript.stage_lengths[KeyStage.SIFTED.name.lower()] = len(alice_key)
    transcript.dual_fire_count = dual_fires
    transcript.sifted_qber_true = alice_key.mismatches(bob_key) / len(alice_key) if len(alice_key) else 0.0
    if config.attack.kind is not AttackKind.NONE:
        transcript.eve = quantum.eve_record.summary(alice_key.ticks, alice_key.bits)
    log.info(f"Sifted {len(alice_key)} bits from {config.pulse_count} pulses, {dual_fires} dual fires")
    if len(alice_key) == 0:
        raise ProtocolError("Sifting produced an empty key")

    # Error-rate estimate on a disclosed sample
    estimate, qber, errors, leaked = _qber_step(config, alice_key, bob_key, channel)
    transcript.qber, transcript.qber_errors = qber, errors
    transcript.leakage["qber_sample"] = leaked
    log.info(f"QBER {qber:.4f} ({errors}/{estimate.disclosed} disclosed bits)")
    if qber > config.qber.ceiling:
        raise QberCeilingExceeded(f"QBER {qber:.4f} exceeds the ceiling {config.qber.ceiling:.4f}")
    alice_key, bob_key = estimate.alice_key, estimate.bob_key
    if len(alice_key) == 0:
        raise ProtocolError("No key left after the error-rate sample")

    # 4. Error correction
    rc = config.reconciliation
    report = block_parity_reconcile(alice_key, bob_key, rc.rows, rc.cols, rc.max_passes,
                                    make_rng(config.seed, STREAM_RECONCILIATION), channel.send, channel.ids)
    transcript.leakage["parity"] = report.parity_bits_disclosed
    transcript.reconciliation_passes = report.passes
    transcript.stage_lengths[KeyStage.RECONCILED.name.lower()] = len(report.alice_key)
    log.info(f"Reconciliation: {report.passes} passes, {report.flips} flips, "
             f"{report.parity_bits_disclosed} parity bits disclosed")
    if not report.converged:
        raise ProtocolError(f"Reconciliation left parity failures after {report.passes} passes")
    alice_key, bob_key = report.alice_key, report.corrected_bob_key

    # 5. Eve's knowledge from the error rate
    pv = config.privacy
    mu = None if config.source.photon_number is not None else config.source.mean_photon_number
    eve_bound = eve_bound_bits(len(alice_key), qber, mu, pv.eve_bound_policy)
    final_length = compute_final_length(len(alice_key), alice_key.leaked_bits, eve_bound, pv.security_parameter)
    transcript.eve_bound_bits = eve_bound
    log.info(f"Eve bound {eve_bound} bits, target length {final_length}")

    # 6. Privacy amplification
    seed = int(make_rng(config.seed, STREAM_PRIVACY).integers(0, 2 ** 63 - 1))
    method = AmplificationMethod.DROP_THEN_SUBSETS if pv.drop_rows_cols else AmplificationMethod.SUBSETS
    announced = channel.send(messages.pa_seed(channel.next_id(), method, seed, final_length))
    if final_length == 0:
        raise ProtocolError("Privacy amplification leaves no secret key")
    alice_final = _amplify(alice_key, announced, rc.rows, rc.cols)
    bob_final = _amplify(bob_key, announced, rc.rows, rc.cols)
    transcript.stage_lengths[KeyStage.AMPLIFIED.name.lower()] = len(alice_final)

    # 7. Replenish the authentication pool from the new key
    k = config.auth.replenish_bits
    alice_rep = replenish(channel.pools[Party.ALICE], alice_final, k)
    bob_rep = replenish(channel.pools[Party.BOB], bob_final, k)
    transcript.replenished = alice_rep.replenished and bob_rep.replenished
    alice_out = alice_rep.delivered_key.advance(KeyStage.FINAL)
    bob_out = bob_rep.delivered_key.advance(KeyStage.FINAL)
    transcript.stage_lengths[KeyStage.FINAL.name.lower()] = len(alice_out)
    transcript.deliver(alice_out.bits, bob_out.bits)
    if len(alice_out) >= 1000:
        transcript.monobit_z = monobit_z(alice_out.bits)
    if not np.array_equal(alice_out.bits, bob_out.bits):
        log.warning("Delivered keys differ: undetected residual errors survived reconciliation")
    log.info(f"Delivered {len(alice_out)} key bits, pool replenished: {transcript.replenished}")


def _amplify(key: KeyBuffer, announced: Message, rows: int, cols: int) -> KeyBuffer:
    seed = int(announced.payload["seed"])
    target = int(announced.payload["target_length"])
    bits = key.bits
    if AmplificationMethod(announced.payload["method"]) is AmplificationMethod.DROP_THEN_SUBSETS:
        bits = drop_rows_cols(bits, rows, cols, seed)
    if target < len(bits):
        bits = privacy_amplify_subsets(bits, target, seed)
    else:
        bits = bits[:target]
    return KeyBuffer(bits, None, KeyStage.AMPLIFIED, key.leaked_bits)
