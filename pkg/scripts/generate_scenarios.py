"""
Script used to configure experiments: writes one scenario YAML per run and a shell
script with the commands that reproduce them.
"""

import os
import pathlib

from src.harness.config import ScenarioConfig

NOISELESS_CHANNEL = {
    "transmittance": 1.0,
    "detector_efficiency": 1.0,
    "background_rate": 0.0,
    "dark_rate": 0.0,
    "optical_flip_probability": 0.0,
}

scenario_configurations = {
    # daylight free-space emulation, ~260 sifted bits per 5e4 pulses
    "emulation": {"pulse_count": 50_000},
    # the same channel run long enough to produce a final key
    "emulation_long": {"pulse_count": 20_000_000, "num_workers": 8, "auth": {"pool_bits": 8192}},
    "noiseless": {
        "pulse_count": 200_000,
        "source": {"photon_number": 1},
        "channel": NOISELESS_CHANNEL,
        "auth": {"pool_bits": 8192},
    },
    "bb84": {
        "protocol": "bb84",
        "pulse_count": 200_000,
        "source": {"photon_number": 1},
        "channel": NOISELESS_CHANNEL,
        "auth": {"pool_bits": 8192},
    },
    "drop_rows_cols": {
        "pulse_count": 200_000,
        "source": {"photon_number": 1},
        "channel": NOISELESS_CHANNEL,
        "privacy": {"drop_rows_cols": True},
        "auth": {"pool_bits": 8192},
    },
    "intercept": {
        "pulse_count": 2_000_000,
        "num_workers": 4,
        "attack": {"kind": "intercept_resend_alice_basis"},
        "auth": {"pool_bits": 8192},
    },
    "intercept_eigenstate": {
        "pulse_count": 2_000_000,
        "num_workers": 4,
        "attack": {"kind": "intercept_resend_alice_basis", "model": "eigenstate"},
        "auth": {"pool_bits": 8192},
    },
    "bobs_basis": {
        "pulse_count": 2_000_000,
        "num_workers": 4,
        "attack": {"kind": "intercept_resend_bobs_basis"},
        "auth": {"pool_bits": 8192},
    },
    "beamsplit": {
        "pulse_count": 2_000_000,
        "num_workers": 4,
        "source": {"mean_photon_number": 1.0},
        "attack": {"kind": "beamsplit", "tap_ratio": 0.5},
        "auth": {"pool_bits": 8192},
    },
    "qnd": {
        "pulse_count": 2_000_000,
        "num_workers": 4,
        "attack": {"kind": "qnd"},
        "auth": {"pool_bits": 8192},
    },
}

sweep_commands = [
    "python -m src.main attack --config {folder}/emulation_long.yaml --fractions 0.1 0.25 0.5 1.0",
    "python -m src.main linkbudget --preset night --sweep_field range --sweep_values 3e5 6e5 1.2e6 2.4e6",
    "python -m src.main linkbudget --preset night --sweep_field radiance --sweep_values 4e15 4e16 4e17 4e18 4e19",
    "python -m src.main linkbudget --preset night_tilt",
    "python -m src.main linkbudget --preset day",
]

OUTPUT_FOLDER = "./scripts/scenarios"
# exit code 2 is an aborted session
ALLOW_ABORT = " || [ $? -eq 2 ]"


def simulate_command(path: str) -> str:
    return f"python -m src.main simulate --config {path} --dump_transcript" + ALLOW_ABORT


def render_run_all(commands) -> str:
    return "#!/bin/bash\nset -e\nset -o xtrace\n\n" + "\n".join(commands) + "\n"


if __name__ == '__main__':
    dirname = pathlib.Path(OUTPUT_FOLDER)
    if not dirname.is_dir():
        dirname.mkdir(parents=True, exist_ok=False)

    commands = []
    for i, (name, overrides) in enumerate(scenario_configurations.items()):
        config = ScenarioConfig(name=name, seed=1000 + i).replace(**overrides)
        path = os.path.join(OUTPUT_FOLDER, f"{name}.yaml")
        config.to_yaml(path)
        commands.append(simulate_command(path))
        print(f"Created scenario: {path}")
    commands += [c.format(folder=OUTPUT_FOLDER) for c in sweep_commands]

    script_path = os.path.join(OUTPUT_FOLDER, "run_all.sh")
    with open(script_path, "w") as f:
        f.write(render_run_all(commands))
    print(f"Created script: {script_path}")
    print("Done")
