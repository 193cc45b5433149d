import unittest

import numpy as np
from scipy.linalg import toeplitz

from src.constants import EveBoundPolicy
from src.errors import ParameterError
from src.postprocessing.privacy import (compute_final_length, drop_rows_cols, eve_bound_bits, parity_compress,
                                        privacy_amplify_drop, privacy_amplify_subsets, toeplitz_bits)
from src.postprocessing.reconciliation import fold
from src.utils.util import make_rng


class TestRowColumnDrop(unittest.TestCase):
    def test_full_block_keeps_225_bits(self):
        bits = make_rng(0).integers(0, 2, 256, dtype=np.uint8)
        kept = privacy_amplify_drop(fold(bits, 16, 16)[0], make_rng(1))
        self.assertEqual(len(kept), 225)

    def test_both_parties_drop_the_same_bits(self):
        bits = make_rng(2).integers(0, 2, 512, dtype=np.uint8)
        np.testing.assert_array_equal(drop_rows_cols(bits, 16, 16, 9), drop_rows_cols(bits, 16, 16, 9))
        self.assertEqual(len(drop_rows_cols(bits, 16, 16, 9)), 450)

    def test_too_small_block(self):
        block = fold(np.zeros(4), 2, 2)[0]
        self.assertEqual(len(privacy_amplify_drop(block, make_rng(0))), 1)


class TestSubsetParities(unittest.TestCase):
    def test_shared_seed_gives_identical_keys(self):
        key = make_rng(3).integers(0, 2, 1000, dtype=np.uint8)
        a = privacy_amplify_subsets(key, 600, 17)
        self.assertEqual(len(a), 600)
        np.testing.assert_array_equal(a, privacy_amplify_subsets(key.copy(), 600, 17))
        self.assertFalse(np.array_equal(a, privacy_amplify_subsets(key, 600, 18)))

    def test_single_bit_flip_avalanche(self):
        rng = make_rng(4)
        changed = []
        for seed in range(10_000):
            key = rng.integers(0, 2, 64, dtype=np.uint8)
            flipped = key.copy()
            flipped[rng.integers(64)] ^= 1
            changed.append(np.mean(privacy_amplify_subsets(key, 16, seed) != privacy_amplify_subsets(flipped, 16, seed)))
        self.assertAlmostEqual(float(np.mean(changed)), 0.5, delta=0.02)

    def test_fft_path_matches_dense_product(self):
        n, m, seed = 3000, 1400, 5
        key = make_rng(6).integers(0, 2, n, dtype=np.uint8)
        diagonals = toeplitz_bits(n, m, seed)
        dense = toeplitz(diagonals[:m], np.concatenate([diagonals[:1], diagonals[m:]]))
        np.testing.assert_array_equal(privacy_amplify_subsets(key, m, seed), parity_compress(key, dense))

    def test_singleton_subsets_give_the_key_prefix(self):
        key = make_rng(8).integers(0, 2, 64, dtype=np.uint8)
        singletons = np.eye(63, 64, dtype=np.uint8)
        np.testing.assert_array_equal(parity_compress(key, singletons), key[:-1])
        np.testing.assert_array_equal(parity_compress("1011", [[1, 1, 0, 0], [0, 0, 1, 1]]), [1, 0])

    def test_lengths(self):
        key = np.ones(10, dtype=np.uint8)
        self.assertEqual(len(privacy_amplify_subsets(key, 0, 1)), 0)
        with self.assertRaises(ParameterError):
            privacy_amplify_subsets(key, 10, 1)


class TestFinalLength(unittest.TestCase):
    def test_eve_bound(self):
        self.assertEqual(eve_bound_bits(1000, 0.0), 0)
        self.assertEqual(eve_bound_bits(1000, 0.25), 750)
        self.assertEqual(eve_bound_bits(1000, 0.0, mean_photon_number=0.3), 143)
        self.assertEqual(eve_bound_bits(1000, 0.5, mean_photon_number=0.3), 893)
        self.assertEqual(eve_bound_bits(1000, 0.25, policy=EveBoundPolicy.NONE), 0)
        with self.assertRaises(ParameterError):
            eve_bound_bits(10, 1.5)

    def test_final_length(self):
        self.assertEqual(compute_final_length(1000, 100, 200, 32), 668)
        self.assertEqual(compute_final_length(100, 100, 200, 32), 0)
        with self.assertRaises(ParameterError):
            compute_final_length(100, -1, 0, 0)


if __name__ == '__main__':
    unittest.main()
