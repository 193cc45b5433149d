import unittest

import numpy as np

from src.constants import ANGLE_PLUS45, ANGLE_V, Cause, KeyStage, MessageType, Outcome, Party
from src.errors import ConfigError, ParameterError, ProtocolError
from src.optics.channel import ArrivalEvent, ChannelParams, DetectionRecord, DetectionTrain
from src.optics.photonics import PLUS45, PulseSource
from src.protocol import messages
from src.protocol.b92 import (alice_round, alice_train, alice_train_bb84, bob_round, bob_train, bob_train_bb84,
                              compare_disclosed, estimate_qber, random_bits, sample_positions, sift, sift_bb84,
                              sift_from_index_list)
from src.protocol.keys import KeyBuffer
from src.protocol.messages import Message
from src.utils.util import as_bits, make_rng

# 256 sifted bits from a 50,000-pulse daylight run over a 0.5 km path. The last group of the
# first row is printed with nine digits in the source listing; its middle zero is dropped here.
DAYLIGHT_ALICE = (
    "10101110 10011001 10001111 00001101 10011011 10110011 10011001 10000001"
    "11001110 01101010 10010111 10001110 10110000 11001110 11101101 10110011"
    "01000000 01010001 00010000 00010010 01000111 00010011 11001000 01001001"
    "01110101 10110010 01110010 11101111 00101101 00010101 10011111 00101111"
)
DAYLIGHT_BOB = (
    "10101110 10011001 10001111 10001101 10011011 10110011 10011001 10100001"
    "11001110 01101010 10010111 10001110 10110000 11001110 11101101 10110011"
    "01000001 01010001 00010000 00010010 01000111 00010011 11001000 01011001"
    "11110101 10110010 01110010 11101111 00101101 00010101 10011111 00101111"
)


def noiseless_run(n: int, seed: int, source: PulseSource):
    rng = make_rng(seed)
    alice_bits, bob_bits = random_bits(n, rng), random_bits(n, rng)
    arrivals = alice_train(alice_bits, source, rng)
    detections = bob_train(arrivals, bob_bits, ChannelParams(), rng)
    return alice_bits, bob_bits, detections


class TestRounds(unittest.TestCase):
    def test_alice_encodes_b92_states(self):
        pulse = alice_round(1, PulseSource(0.3, photon_number=1), make_rng(0), tick_index=4)
        self.assertEqual(pulse.tick_index, 4)
        self.assertEqual(pulse.photon_count, 1)
        self.assertEqual(pulse.polarization, PLUS45)
        train = alice_train(np.array([0, 1]), PulseSource(0.3), make_rng(0), start_tick=10)
        np.testing.assert_array_equal(train.tick_index, [10, 11])
        np.testing.assert_array_equal(train.angle, [ANGLE_V, ANGLE_PLUS45])

    def test_bob_round_fails_on_the_other_bit(self):
        record = bob_round(ArrivalEvent(0, 1, PLUS45), 0, ChannelParams(), make_rng(0))
        self.assertIs(record.outcome, Outcome.NONE)


class TestSifting(unittest.TestCase):
    def test_four_tick_example(self):
        # results N, N, Y, N: the third tick becomes the first shared bit
        detections = [DetectionRecord(i, o, Cause.SIGNAL if o is not Outcome.NONE else Cause.NONE)
                      for i, o in enumerate([Outcome.NONE, Outcome.NONE, Outcome.BIT1, Outcome.NONE])]
        result = sift(np.array([0, 1, 1, 0]), np.array([1, 0, 1, 0]), detections)
        self.assertEqual(len(result), 1)
        np.testing.assert_array_equal(result.alice_key.bits, [1])
        np.testing.assert_array_equal(result.bob_key.bits, [1])
        np.testing.assert_array_equal(result.alice_key.ticks, [2])
        self.assertIs(result.alice_key.stage, KeyStage.SIFTED)

    def test_sift_yield_with_single_photons(self):
        n = 1_000_000
        alice_bits, bob_bits, detections = noiseless_run(n, 1, PulseSource(1.0, photon_number=1))
        result = sift(alice_bits, bob_bits, detections)
        self.assertAlmostEqual(len(result) / n, 0.25, delta=0.003)
        self.assertEqual(result.alice_key.mismatches(result.bob_key), 0)

    def test_no_false_positives_across_seeds(self):
        for seed in range(20):
            alice_bits, bob_bits, detections = noiseless_run(1_000_000, 100 + seed, PulseSource(0.3))
            result = sift(alice_bits, bob_bits, detections)
            self.assertGreater(len(result), 0)
            self.assertEqual(result.alice_key.mismatches(result.bob_key), 0, f"seed {seed}")

    def test_dual_fires_are_counted_not_kept(self):
        detections = DetectionTrain(np.arange(3), [Outcome.DUAL, Outcome.BIT0, Outcome.DUAL],
                                    [Cause.SIGNAL, Cause.SIGNAL, Cause.MIXED])
        result = sift(np.array([1, 0, 0]), np.array([0, 0, 1]), detections)
        self.assertEqual(result.dual_fire_count, 2)
        np.testing.assert_array_equal(result.bob_key.ticks, [1])
        np.testing.assert_array_equal(result.detected_indices, [0, 1, 2])

    def test_misaligned_sequences(self):
        with self.assertRaises(ProtocolError):
            sift(np.zeros(3), np.zeros(2), DetectionTrain(np.arange(3), np.zeros(3), np.zeros(3)))

    def test_bb84_keeps_matching_bases(self):
        n = 200_000
        rng = make_rng(7)
        bits, bases, bob_bases = random_bits(n, rng), random_bits(n, rng), random_bits(n, rng)
        train = alice_train_bb84(bits, bases, PulseSource(1.0, photon_number=1), rng)
        detections = bob_train_bb84(train, bob_bases, ChannelParams(), rng)
        result = sift_bb84(bits, bases, bob_bases, detections)
        self.assertAlmostEqual(len(result) / n, 0.5, delta=0.005)
        self.assertEqual(result.alice_key.mismatches(result.bob_key), 0)

    def test_index_list_selects_announced_ticks(self):
        key = sift_from_index_list(np.array([1, 0, 1, 1]), np.arange(4), [1, 3])
        np.testing.assert_array_equal(key.bits, [0, 1])
        with self.assertRaises(ProtocolError):
            sift_from_index_list(np.array([1, 0]), np.arange(2), [5])


class TestQberEstimate(unittest.TestCase):
    def test_daylight_sample(self):
        alice = KeyBuffer(as_bits(DAYLIGHT_ALICE), stage=KeyStage.SIFTED)
        bob = KeyBuffer(as_bits(DAYLIGHT_BOB), stage=KeyStage.SIFTED)
        self.assertEqual(len(alice), 256)
        estimate = estimate_qber(alice, bob, 1.0, make_rng(0))
        self.assertEqual(estimate.errors, 5)
        self.assertAlmostEqual(estimate.qber, 5 / 256)
        self.assertEqual(len(estimate.alice_key), 0)

    def test_sample_is_removed_from_both_keys(self):
        rng = make_rng(8)
        bits = random_bits(1000, rng)
        flipped = bits.copy()
        flipped[::50] ^= 1
        alice, bob = KeyBuffer(bits, stage=KeyStage.SIFTED), KeyBuffer(flipped, stage=KeyStage.SIFTED)
        estimate = estimate_qber(alice, bob, 0.1, rng)
        self.assertEqual(estimate.disclosed, 100)
        self.assertEqual(len(estimate.alice_key), 900)
        np.testing.assert_array_equal(estimate.alice_key.ticks, estimate.bob_key.ticks)
        self.assertFalse(np.isin(estimate.sample_ticks, estimate.alice_key.ticks).any())
        self.assertEqual(compare_disclosed(alice, estimate.sample_ticks, estimate.sample_bits), estimate.errors)

    def test_invalid_estimates(self):
        key = KeyBuffer(np.zeros(10, dtype=np.uint8))
        with self.assertRaises(ParameterError):
            sample_positions(10, 0.0, make_rng(0))
        with self.assertRaises(ProtocolError):
            estimate_qber(KeyBuffer(np.zeros(0)), KeyBuffer(np.zeros(0)), 0.5, make_rng(0))
        with self.assertRaises(ProtocolError):
            estimate_qber(key, KeyBuffer(np.zeros(9)), 0.5, make_rng(0))


class TestKeyBuffer(unittest.TestCase):
    def test_stage_never_moves_back(self):
        key = KeyBuffer(np.ones(4), stage=KeyStage.RECONCILED)
        self.assertIs(key.advance(KeyStage.FINAL).stage, KeyStage.FINAL)
        with self.assertRaises(ProtocolError):
            key.advance(KeyStage.SIFTED)

    def test_ledger_and_ticks(self):
        key = KeyBuffer(np.ones(3), ticks=[2, 5, 9])
        self.assertEqual(key.leak(4).leak(1).leaked_bits, 5)
        with self.assertRaises(ProtocolError):
            key.leak(-1)
        with self.assertRaises(ProtocolError):
            KeyBuffer(np.ones(2), ticks=[3, 3])
        np.testing.assert_array_equal(key.without([1]).ticks, [2, 9])


class TestMessages(unittest.TestCase):
    def test_canonical_bytes_round_trip(self):
        message = messages.qber_sample(3, Party.ALICE, [4, 8], np.array([1, 0]))
        self.assertEqual(message.to_bytes(), Message.from_bytes(message.to_bytes()).to_bytes())
        self.assertNotIn(b" ", message.to_bytes())
        np.testing.assert_array_equal(message.bits(), [1, 0])

    def test_disclosed_bits(self):
        self.assertEqual(messages.qber_sample(0, Party.BOB, [1, 2, 3], np.ones(3)).disclosed_bits, 3)
        self.assertEqual(messages.parity_disclosure(0, 0, 1, 16, 16, np.ones(32)).disclosed_bits, 32)
        self.assertEqual(messages.parity_status(0, 0, [1]).disclosed_bits, 0)
        self.assertEqual(messages.index_list(0, Party.BOB, [1, 2]).disclosed_bits, 0)
        self.assertIs(messages.pa_seed(0, "subsets", 5, 10).type, MessageType.PA_SEED)

    def test_unknown_version(self):
        d = messages.index_list(0, Party.BOB, [1]).to_dict()
        d["version"] = 99
        with self.assertRaises(ConfigError):
            Message.from_dict(d)


if __name__ == '__main__':
    unittest.main()
