import unittest

import numpy as np

from src.constants import KeyStage
from src.errors import AuthDesyncError, ParameterError, PoolExhaustedError
from src.postprocessing.auth import (AuthKeyPool, _gf_mul_vec, generate_tag, gf_mul, key_bits_for, levels_for,
                                     replenish, verify_tag, verify_tag_at)
from src.protocol.keys import KeyBuffer
from src.utils.util import make_rng


def shared_pools(n_bits: int, seed: int = 0):
    bits = make_rng(seed).integers(0, 2, n_bits, dtype=np.uint8)
    return AuthKeyPool(bits), AuthKeyPool(bits.copy())


class TestFieldArithmetic(unittest.TestCase):
    def test_reduction(self):
        self.assertEqual(gf_mul(1 << 63, 2), 27)
        self.assertEqual(gf_mul(12345, 1), 12345)
        self.assertEqual(gf_mul(0, 99), 0)

    def test_vector_matches_scalar(self):
        rng = make_rng(1)
        a = rng.integers(0, 2 ** 63, 200, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
        b = rng.integers(0, 2 ** 63, 200, dtype=np.uint64) | np.uint64(1 << 63)
        expected = [gf_mul(int(x), int(y)) for x, y in zip(a, b)]
        self.assertEqual([int(v) for v in _gf_mul_vec(a, b)], expected)


class TestTags(unittest.TestCase):
    def test_round_trip(self):
        alice, bob = shared_pools(4096)
        for size in (0, 7, 64, 9000):
            message = bytes(range(256)) * (size // 256) + bytes(size % 256)
            tag = generate_tag(message, alice, message_id=size)
            self.assertEqual(tag.key_bits_used, key_bits_for(len(message)))
            self.assertTrue(verify_tag(message, tag, bob))
        self.assertEqual(alice.consumed, bob.consumed)

    def test_long_messages_use_a_second_level(self):
        self.assertEqual(levels_for(64), 1)
        self.assertEqual(levels_for(8 * 1023), 1)
        self.assertEqual(levels_for(8 * 1024), 2)
        self.assertEqual(key_bits_for(64), 128)
        self.assertEqual(key_bits_for(9000), 192)

    def test_cost_is_logarithmic(self):
        costs = [key_bits_for(2 ** k) for k in range(6, 21)]
        self.assertEqual(costs, sorted(costs))
        for k, cost in zip(range(6, 21), costs):
            self.assertLessEqual(cost, 16 * k + 128)

    def test_single_byte_tampering_is_caught(self):
        rng = make_rng(2)
        forged = 0
        for trial in range(10_000):
            alice, bob = shared_pools(128, seed=trial)
            message = rng.integers(0, 256, 64, dtype=np.uint8).tobytes()
            tag = generate_tag(message, alice)
            tampered = bytearray(message)
            tampered[rng.integers(64)] ^= int(rng.integers(1, 256))
            forged += verify_tag(bytes(tampered), tag, bob)
        self.assertEqual(forged, 0)

    def test_exhausted_pool_is_left_untouched(self):
        pool = AuthKeyPool(np.zeros(100, dtype=np.uint8))
        with self.assertRaises(PoolExhaustedError):
            generate_tag(b"parity", pool)
        self.assertEqual(pool.consumed, 0)
        self.assertEqual(pool.remaining, 100)

    def test_desynchronised_receiver(self):
        alice, bob = shared_pools(1024)
        bob.take(64)
        tag = generate_tag(b"index list", alice)
        with self.assertRaises(AuthDesyncError):
            verify_tag(b"index list", tag, bob)

    def test_offline_verification(self):
        alice, _ = shared_pools(1024)
        snapshot = alice.snapshot()
        generate_tag(b"first", alice)
        tag = generate_tag(b"second", alice, message_id=1)
        self.assertEqual(tag.key_offset, 128)
        self.assertTrue(verify_tag_at(b"second", tag, snapshot.bits))
        self.assertFalse(verify_tag_at(b"Second", tag, snapshot.bits))
        self.assertFalse(verify_tag_at(b"second", tag, snapshot.bits[:200]))


class TestReplenish(unittest.TestCase):
    def setUp(self):
        self.pool = AuthKeyPool(np.zeros(64, dtype=np.uint8))
        self.key = KeyBuffer(make_rng(3).integers(0, 2, 300, dtype=np.uint8), stage=KeyStage.FINAL)

    def test_donation(self):
        result = replenish(self.pool, self.key, 128)
        self.assertTrue(result.replenished)
        self.assertEqual(len(self.pool), 192)
        np.testing.assert_array_equal(self.pool.bits[64:], self.key.bits[:128])
        np.testing.assert_array_equal(result.delivered_key.bits, self.key.bits[128:])

    def test_short_key_is_delivered_whole(self):
        with self.assertLogs("src.postprocessing.auth", level="WARNING"):
            result = replenish(self.pool, self.key, 512)
        self.assertFalse(result.replenished)
        self.assertEqual(len(self.pool), 64)
        self.assertEqual(len(result.delivered_key), 300)

    def test_no_donation(self):
        result = replenish(self.pool, self.key, 0)
        self.assertTrue(result.replenished)
        self.assertEqual(result.donated_bits, 0)
        with self.assertRaises(ParameterError):
            replenish(self.pool, self.key, -1)


if __name__ == '__main__':
    unittest.main()
