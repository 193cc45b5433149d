import unittest

import numpy as np

from src.constants import Basis, Party
from src.errors import ParameterError
from src.optics.photonics import (H, MINUS45, PLUS45, V, PolarizationState, PulseSource, at_least_one_probability,
                                  encode_b92, encode_bb84, malus, multi_photon_fraction, normalize_angle,
                                  pass_probability, poisson_pmf, sample_photon_count, sample_photon_counts)
from src.utils.util import make_rng


class TestPolarization(unittest.TestCase):
    def test_named_states_project_exactly(self):
        self.assertEqual(pass_probability(V, H), 0.0)
        self.assertEqual(pass_probability(V, V), 1.0)
        self.assertEqual(pass_probability(V, MINUS45), 0.5)
        self.assertEqual(pass_probability(PLUS45, H), 0.5)
        self.assertEqual(pass_probability(PLUS45, MINUS45), 0.0)

    def test_malus_is_symmetric(self):
        a, b = PolarizationState(17.0), PolarizationState(61.0)
        self.assertAlmostEqual(pass_probability(a, b), pass_probability(b, a))
        self.assertAlmostEqual(pass_probability(a, b), np.cos(np.radians(44.0)) ** 2)

    def test_angles_fold_into_half_turn(self):
        self.assertEqual(normalize_angle(180.0), 0.0)
        self.assertEqual(normalize_angle(-45.0), 135.0)
        np.testing.assert_array_equal(normalize_angle(np.array([270.0, 360.0])), [90.0, 0.0])
        self.assertEqual(PolarizationState(-90.0), V)

    def test_b92_alphabets(self):
        self.assertEqual(encode_b92(0, Party.ALICE), V)
        self.assertEqual(encode_b92(1, Party.ALICE), PLUS45)
        self.assertEqual(encode_b92(0, Party.BOB), MINUS45)
        self.assertEqual(encode_b92(1, Party.BOB), H)

    def test_bob_never_passes_the_state_of_the_other_bit(self):
        for bit in (0, 1):
            self.assertEqual(pass_probability(encode_b92(bit, Party.ALICE), encode_b92(1 - bit, Party.BOB)), 0.0)
            self.assertEqual(pass_probability(encode_b92(bit, Party.ALICE), encode_b92(bit, Party.BOB)), 0.5)

    def test_bb84_alphabet(self):
        self.assertEqual(encode_bb84(1, Basis.RECTILINEAR), V)
        self.assertEqual(encode_bb84(0, Basis.DIAGONAL), PLUS45)

    def test_invalid_bit(self):
        with self.assertRaises(ParameterError):
            encode_b92(2, Party.ALICE)

    def test_vectorized_malus(self):
        np.testing.assert_array_equal(malus(np.array([90.0, 45.0, 0.0]), np.array([0.0, 0.0, 0.0])), [0.0, 0.5, 1.0])


class TestPhotonStatistics(unittest.TestCase):
    def test_closed_forms_at_mu_point_three(self):
        self.assertAlmostEqual(poisson_pmf(1, 0.3), 0.22225, places=5)
        self.assertAlmostEqual(at_least_one_probability(0.3), 0.25918, places=5)
        self.assertAlmostEqual(multi_photon_fraction(0.3), 0.14251, places=5)
        self.assertAlmostEqual(multi_photon_fraction(1.0), 0.4180, places=4)

    def test_multi_photon_fraction_grows_with_mu(self):
        fractions = [multi_photon_fraction(mu) for mu in np.linspace(0.01, 5.0, 200)]
        self.assertTrue(np.all(np.diff(fractions) > 0))
        self.assertLess(fractions[0], 0.01)

    def test_monte_carlo_matches_closed_forms(self):
        n = 1_000_000
        counts = sample_photon_counts(PulseSource(0.3), n, make_rng(11))
        bins = [(np.mean(counts == k), poisson_pmf(k, 0.3)) for k in range(7)]
        for observed, expected in bins + [(np.mean(counts >= 1), at_least_one_probability(0.3))]:
            sigma = np.sqrt(expected * (1 - expected) / n)
            self.assertAlmostEqual(observed, expected, delta=4 * sigma)
        detectable = counts >= 1
        mpf = np.mean(counts[detectable] >= 2)
        sigma = np.sqrt(0.1425 * 0.8575 / detectable.sum())
        self.assertAlmostEqual(mpf, multi_photon_fraction(0.3), delta=4 * sigma)

    def test_fixed_photon_number(self):
        source = PulseSource(0.3, photon_number=1)
        np.testing.assert_array_equal(sample_photon_counts(source, 100, make_rng(0)), np.ones(100))
        self.assertEqual(sample_photon_count(PulseSource(0.0), make_rng(0)), 0)

    def test_invalid_sources(self):
        with self.assertRaises(ParameterError):
            PulseSource(-0.1)
        with self.assertRaises(ParameterError):
            PulseSource(0.3, pulse_rate=0)
        with self.assertRaises(ParameterError):
            multi_photon_fraction(0.0)


if __name__ == '__main__':
    unittest.main()
