import pathlib
import subprocess
import tempfile
import unittest

from scripts.generate_scenarios import (ALLOW_ABORT, render_run_all, scenario_configurations, simulate_command,
                                        sweep_commands)
from src.harness.config import ScenarioConfig


class TestGenerateScenarios(unittest.TestCase):
    def test_scenarios_are_valid(self):
        for i, (name, overrides) in enumerate(scenario_configurations.items()):
            with self.subTest(name=name):
                config = ScenarioConfig(name=name, seed=1000 + i).replace(**overrides)
                self.assertEqual(ScenarioConfig.from_dict(config.to_dict()).to_dict(), config.to_dict())

    def test_simulate_commands_tolerate_aborts(self):
        self.assertTrue(simulate_command("x.yaml").endswith(ALLOW_ABORT))
        self.assertFalse(any(c.endswith(ALLOW_ABORT) for c in sweep_commands))

    def test_run_all_continues_after_abort(self):
        with tempfile.TemporaryDirectory() as tmp:
            marker = pathlib.Path(tmp) / "reached"
            script = pathlib.Path(tmp) / "run_all.sh"
            script.write_text(render_run_all(["(exit 2)" + ALLOW_ABORT, f"touch {marker}"]))
            result = subprocess.run(["bash", str(script)], capture_output=True)
            self.assertEqual(result.returncode, 0)
            self.assertTrue(marker.exists())

    def test_run_all_stops_on_usage_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            marker = pathlib.Path(tmp) / "reached"
            script = pathlib.Path(tmp) / "run_all.sh"
            script.write_text(render_run_all(["(exit 1)" + ALLOW_ABORT, f"touch {marker}"]))
            result = subprocess.run(["bash", str(script)], capture_output=True)
            self.assertEqual(result.returncode, 1)
            self.assertFalse(marker.exists())


if __name__ == '__main__':
    unittest.main()
