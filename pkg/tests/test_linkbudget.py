import pathlib
import tempfile
import unittest

import numpy as np
import yaml

from src.errors import ConfigError, ParameterError, ProtocolError
from src.linkbudget.budget import (LinkParams, background_ber, background_rate, break_even_radiance,
                                   collection_efficiency, key_rate, link_report, noise_budget, otp_xor, pass_yield,
                                   preset, sweep, trigger_rate, xor_relay)
from src.utils.util import make_rng


class TestNightLink(unittest.TestCase):
    def setUp(self):
        self.params = preset("night")

    def test_rates(self):
        self.assertAlmostEqual(key_rate(self.params), 390.0, delta=2.0)
        self.assertAlmostEqual(background_rate(self.params), 232.0, delta=1.0)
        self.assertAlmostEqual(trigger_rate(self.params), 9.0e4, delta=500.0)
        self.assertAlmostEqual(background_ber(self.params), 3.25e-5, delta=0.05e-5)

    def test_pass_yield(self):
        result = pass_yield(self.params)
        self.assertAlmostEqual(result.raw_bits, 23400, delta=60)
        self.assertGreater(result.post_processing_estimate, 0)
        self.assertLess(result.post_processing_estimate, result.raw_bits)

    def test_tilt_control(self):
        self.assertAlmostEqual(key_rate(preset("night_tilt")), 39e3, delta=200.0)
        self.assertLessEqual(collection_efficiency(self.params.replace(range=1.0)), 1.0)

    def test_bb84_doubles_the_rate(self):
        bb84 = self.params.replace(protocol_efficiency=0.5)
        self.assertAlmostEqual(key_rate(bb84) / key_rate(self.params), 2.0)

    def test_noise_budget_adds_up(self):
        budget = noise_budget(self.params)
        self.assertAlmostEqual(budget["background_ber"] + budget["dark_ber"], background_ber(self.params))
        self.assertAlmostEqual(budget["total_ber"], 0.015 + background_ber(self.params))


class TestDaylightLink(unittest.TestCase):
    def test_background(self):
        day = preset("day")
        self.assertAlmostEqual(background_rate(day), 11.6e3, delta=50.0)
        self.assertAlmostEqual(background_ber(day), 1.34e-3, delta=0.02e-3)

    def test_break_even(self):
        night = preset("night")
        radiance = break_even_radiance(night)
        self.assertGreater(radiance, night.radiance)
        self.assertEqual(pass_yield(night.replace(radiance=2 * radiance)).post_processing_estimate, 0)

    def test_trigger_below_key_rate(self):
        with self.assertRaises(ParameterError):
            background_ber(preset("night"), trigger=10.0, key=100.0)


class TestParams(unittest.TestCase):
    def test_sweep(self):
        frame = sweep(preset("night"), "range", [300e3, 600e3, 1200e3])
        self.assertEqual(len(frame), 3)
        rates = frame["key_rate"].to_numpy()
        np.testing.assert_allclose(rates[:-1] / rates[1:], 4.0)
        with self.assertRaises(ConfigError):
            sweep(preset("night"), "altitude", [1.0])

    def test_report_row(self):
        row = link_report(preset("night"))
        self.assertEqual(row["schema_version"], 1)
        self.assertAlmostEqual(row["multi_photon_fraction"], (1 - 2 / np.e) / (1 - 1 / np.e))

    def test_invalid_values(self):
        with self.assertRaises(ParameterError):
            LinkParams(detector_efficiency=1.5)
        with self.assertRaises(ParameterError):
            LinkParams(seeing_multiplier=0.5)
        with self.assertRaises(ConfigError):
            preset("noon")

    def test_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "link.yaml"
            path.write_text(yaml.safe_dump({"version": 1, "preset": "day", "range": 600e3}))
            params = LinkParams.from_yaml(path)
            self.assertEqual(params.range, 600e3)
            self.assertEqual(params.filter_bandwidth, 0.01)
            path.write_text(yaml.safe_dump({"version": 1, "altitude": 1}))
            with self.assertRaises(ConfigError):
                LinkParams.from_yaml(path)


class TestXorRelay(unittest.TestCase):
    def test_bob_recovers_alices_key(self):
        rng = make_rng(4)
        for _ in range(10_000):
            a, b = rng.integers(0, 2, (2, 32), dtype=np.uint8)
            result = xor_relay(a, b)
            np.testing.assert_array_equal(result.bob_final, a)

    def test_length_mismatch(self):
        with self.assertRaises(ProtocolError):
            otp_xor(np.zeros(4), np.zeros(5))


if __name__ == '__main__':
    unittest.main()
