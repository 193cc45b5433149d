import unittest

import numpy as np
from scipy.stats import binom

from src.constants import ANGLE_H, ANGLE_PLUS45, ANGLE_V, Cause, Outcome, Party
from src.errors import ParameterError
from src.optics.channel import (ArrivalEvent, ChannelParams, DetectionRecord, DetectionTrain, apply_optical_error,
                                apply_optical_error_train, measure_b92, measure_b92_train, noise_ber_contribution,
                                noise_click_probability, transmit, transmit_train)
from src.optics.photonics import PulseEvent, PulseSource, PulseTrain, b92_angles, encode_b92
from src.protocol.b92 import alice_train, random_bits
from src.utils.util import make_rng


def single_photon_train(angle: float, n: int) -> PulseTrain:
    return PulseTrain(np.arange(n), np.ones(n, dtype=np.int64), np.full(n, angle))


class TestTransmission(unittest.TestCase):
    def test_lossless_and_opaque_paths(self):
        train = PulseTrain(np.arange(5), [0, 1, 2, 3, 4], np.full(5, ANGLE_V))
        rng = make_rng(0)
        np.testing.assert_array_equal(transmit_train(train, ChannelParams(transmittance=1.0), rng).photon_count,
                                      train.photon_count)
        self.assertEqual(transmit_train(train, ChannelParams(transmittance=0.0), rng).total_photons(), 0)

    def test_polarization_is_preserved(self):
        pulse = PulseEvent(7, 3, encode_b92(1, Party.ALICE))
        arrival = transmit(pulse, ChannelParams(transmittance=0.5), make_rng(1))
        self.assertEqual(arrival.tick_index, 7)
        self.assertEqual(arrival.polarization, pulse.polarization)
        self.assertLessEqual(arrival.surviving_photons, 3)

    def test_survival_is_binomial(self):
        train = single_photon_train(ANGLE_V, 200_000)
        survived = transmit_train(train, ChannelParams(transmittance=0.105), make_rng(2)).photon_count.mean()
        self.assertAlmostEqual(survived, 0.105, delta=4 * np.sqrt(0.105 * 0.895 / 200_000))

    def test_thinning_composes(self):
        eta_t, eta_d = 0.3, 0.65
        for n in range(6):
            two_stage = np.zeros(n + 1)
            for k in range(n + 1):
                two_stage[:k + 1] += binom.pmf(k, n, eta_t) * binom.pmf(np.arange(k + 1), k, eta_d)
            np.testing.assert_allclose(two_stage, binom.pmf(np.arange(n + 1), n, eta_t * eta_d), atol=1e-12)

    def test_transmission_then_detection_matches_single_thinning(self):
        n = 200_000
        eta_t, eta_d = 0.3, 0.65
        train = single_photon_train(ANGLE_H, n)
        bob_bits = np.ones(n, dtype=np.uint8)
        rates = []
        for transmittance, efficiency in ((eta_t, eta_d), (eta_t * eta_d, 1.0)):
            rng = make_rng(12)
            arrived = transmit_train(train, ChannelParams(transmittance=transmittance), rng)
            detections = measure_b92_train(arrived, bob_bits, ChannelParams(detector_efficiency=efficiency), rng)
            self.assertEqual(detections.count(Outcome.BIT0) + detections.count(Outcome.DUAL), 0)
            rates.append(detections.count(Outcome.BIT1) / n)
        p = eta_t * eta_d
        for rate in rates:
            self.assertAlmostEqual(rate, p, delta=4 * np.sqrt(p * (1 - p) / n))


class TestBobReceiver(unittest.TestCase):
    def test_single_photon_examples(self):
        params = ChannelParams()
        plus45 = encode_b92(1, Party.ALICE)
        # a +45° photon never passes Bob's -45° analyzer
        for seed in range(20):
            record = measure_b92(ArrivalEvent(0, 1, plus45), 0, params, make_rng(seed))
            self.assertIs(record.outcome, Outcome.NONE)
        outcomes = [measure_b92(ArrivalEvent(0, 1, plus45), 1, params, make_rng(seed)).outcome for seed in range(400)]
        self.assertNotIn(Outcome.BIT0, outcomes)
        self.assertAlmostEqual(outcomes.count(Outcome.BIT1) / 400, 0.5, delta=0.1)

    def test_noiseless_receiver_never_reports_the_wrong_bit(self):
        rng = make_rng(3)
        n = 100_000
        bob_bits = random_bits(n, rng)
        detections = measure_b92_train(single_photon_train(ANGLE_V, n), bob_bits, ChannelParams(), rng)
        self.assertEqual(detections.count(Outcome.BIT1), 0)
        self.assertEqual(detections.count(Outcome.DUAL), 0)
        self.assertAlmostEqual(detections.count(Outcome.BIT0) / n, 0.25, delta=4 * np.sqrt(0.25 * 0.75 / n))
        self.assertTrue(np.all(detections.cause[detections.outcome == Outcome.BIT0] == Cause.SIGNAL))

    def test_dark_counts_without_light(self):
        n = 200_000
        params = ChannelParams(dark_rate=2e8, gate_window=1e-9)
        train = PulseTrain(np.arange(n), np.zeros(n, dtype=np.int64), np.full(n, ANGLE_V))
        detections = measure_b92_train(train, np.zeros(n, dtype=np.uint8), params, make_rng(4))
        # each counter fires with probability 0.1
        self.assertAlmostEqual(detections.count(Outcome.BIT0) / n, 0.09, delta=0.003)
        self.assertAlmostEqual(detections.count(Outcome.DUAL) / n, 0.01, delta=0.001)
        clicked = detections.outcome != Outcome.NONE
        self.assertTrue(np.all(detections.cause[clicked] == Cause.DARK))

    def test_dual_fires_from_photon_misalignment(self):
        n = 1_000_000
        mu, e = 0.3, 0.1
        rng = make_rng(5)
        alice_bits, bob_bits = random_bits(n, rng), random_bits(n, rng)
        train = alice_train(alice_bits, PulseSource(mu), rng)
        detections = measure_b92_train(train, bob_bits, ChannelParams(photon_misalignment=e), rng)
        # photons headed for the passing counter form a Poisson(μ/4) stream, thinned by the swap
        lam = mu / 4
        expected = (1 - np.exp(-lam * (1 - e))) * (1 - np.exp(-lam * e))
        self.assertAlmostEqual(detections.count(Outcome.DUAL) / n, expected, delta=4 * np.sqrt(expected / n))

    def test_invalid_parameters(self):
        with self.assertRaises(ParameterError):
            ChannelParams(transmittance=1.5)
        with self.assertRaises(ParameterError):
            ChannelParams(background_rate=2e9, gate_window=1e-9)
        with self.assertRaises(ParameterError):
            ChannelParams(gate_window=0.0)
        with self.assertRaises(ParameterError):
            ChannelParams(photon_misalignment=0.7)


class TestNoise(unittest.TestCase):
    def test_noise_probabilities(self):
        params = ChannelParams(background_rate=40e3, dark_rate=10e3, gate_window=1e-9)
        self.assertAlmostEqual(noise_click_probability(params), 5e-5)
        self.assertAlmostEqual(noise_ber_contribution(params, 0.005), 0.005)
        with self.assertRaises(ParameterError):
            noise_ber_contribution(params, 0.0)

    def test_noise_error_rate_example(self):
        # one noise event per 50,000 triggers at a 0.5 % sift fraction
        self.assertAlmostEqual(noise_ber_contribution(ChannelParams(dark_rate=2e4), 0.005), 0.002)
        # background clicks at twice that rate: one wrong bit per 50,000 triggers
        background = ChannelParams(background_rate=40e3)
        self.assertAlmostEqual(noise_click_probability(background), 4e-5)
        self.assertAlmostEqual(noise_ber_contribution(background, 0.005), 0.004)
        self.assertAlmostEqual(noise_ber_contribution(ChannelParams(dark_rate=10e3), 0.005), 0.001)

    def test_optical_error_only_swaps_single_bits(self):
        detections = DetectionTrain(np.arange(4), [Outcome.NONE, Outcome.BIT0, Outcome.BIT1, Outcome.DUAL],
                                    [Cause.NONE, Cause.SIGNAL, Cause.SIGNAL, Cause.SIGNAL])
        always = apply_optical_error_train(detections, 0.5, make_rng(0))
        np.testing.assert_array_equal(apply_optical_error_train(detections, 0.0, make_rng(0)).outcome,
                                      detections.outcome)
        self.assertEqual(always.outcome[0], Outcome.NONE)
        self.assertEqual(always.outcome[3], Outcome.DUAL)
        record = apply_optical_error(DetectionRecord(0, Outcome.BIT0, Cause.SIGNAL), 0.0, make_rng(0))
        self.assertEqual(record.bit, 0)
        with self.assertRaises(ParameterError):
            apply_optical_error_train(detections, 0.6, make_rng(0))

    def test_flip_rate(self):
        n = 100_000
        detections = DetectionTrain(np.arange(n), np.full(n, Outcome.BIT1), np.full(n, Cause.SIGNAL))
        flipped = apply_optical_error_train(detections, 0.011, make_rng(6))
        self.assertAlmostEqual(flipped.count(Outcome.BIT0) / n, 0.011, delta=4 * np.sqrt(0.011 * 0.989 / n))


class TestDetectionTrain(unittest.TestCase):
    def test_records_and_concatenation(self):
        records = [DetectionRecord(0, Outcome.BIT1, Cause.SIGNAL), DetectionRecord(1, Outcome.NONE, Cause.NONE)]
        train = DetectionTrain.from_records(records)
        self.assertEqual(train[0], records[0])
        self.assertEqual(records[0].bit, 1)
        self.assertIsNone(records[1].bit)
        both = DetectionTrain.concatenate([train, train])
        self.assertEqual(len(both), 4)
        self.assertEqual(both.count(Outcome.BIT1), 2)
        self.assertEqual(len(DetectionTrain.concatenate([])), 0)

    def test_b92_angles_table(self):
        np.testing.assert_array_equal(b92_angles(np.array([0, 1]), Party.ALICE), [ANGLE_V, ANGLE_PLUS45])


if __name__ == '__main__':
    unittest.main()
