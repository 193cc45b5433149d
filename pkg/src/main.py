import argparse
import logging
import pathlib
import sys

import pandas as pd
import wandb
from tqdm import tqdm

from src.constants import STREAM_RECONCILIATION, AttackKind, KeyStage, ProtocolName
from src.errors import ConfigError, ParameterError, ProtocolError
from src.harness.config import ScenarioConfig
from src.harness.report import emit_report, load_transcript, transcript_diagnostics
from src.harness.session import run_session
from src.linkbudget.budget import (PRESETS, LinkParams, break_even_radiance, link_report, noise_budget, preset,
                                   sweep)
from src.postprocessing.reconciliation import DEFAULT_MAX_PASSES, block_parity_reconcile
from src.protocol.keys import KeyBuffer
from src.utils.util import SATELLITE, ensure_dir, get_logger, make_rng, nice_print, read_bit_file

log = get_logger(__name__)

logging.basicConfig(level=logging.INFO)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORTED = 2


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with 1; 2 is reserved for aborted sessions."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def add_session_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--config', type=str, default=None, help='scenario YAML file; built-in defaults if omitted')
    parser.add_argument('--seed', type=int, default=None, help='overrides the scenario seed')
    parser.add_argument('--pulse_count', type=int, default=None, help='overrides the number of pulses')
    parser.add_argument('--num_workers', type=int, default=None, help='threads for the quantum stage')
    parser.add_argument('--output_dir', type=str, default=None, help='overrides the report directory')
    parser.add_argument('--dump_transcript', action='store_true', help='also write the JSON message transcript')
    parser.add_argument('--wandb_project', type=str, default=None, help='log the metric rows to this wandb project')
    parser.add_argument('--no_progress', action='store_true', help='hide progress bars')


def get_parser_main():
    """
    Get the argument parser of the command line interface.

    :return: argparse.ArgumentParser
    """
    parser = CliParser(prog="python -m src.main", description="Free-space QKD simulator and link-budget toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="run one QKD session from a scenario file")
    add_session_arguments(simulate)
    simulate.add_argument('--formats', type=str, nargs='+', default=None, choices=["text", "csv"])

    attack = subparsers.add_parser("attack", help="run a scenario under a sweep of eavesdropping attacks")
    add_session_arguments(attack)
    attack.add_argument('--kinds', type=str, nargs='+', default=[k.value for k in AttackKind],
                        choices=[k.value for k in AttackKind])
    attack.add_argument('--fractions', type=float, nargs='+', default=[1.0],
                        help='attacked fractions for the intercept-resend attacks')

    linkbudget = subparsers.add_parser("linkbudget", help="ground-to-satellite feasibility estimate")
    linkbudget.add_argument('--params', type=str, default=None, help='link parameter YAML file')
    linkbudget.add_argument('--preset', type=str, default="night", choices=sorted(PRESETS))
    linkbudget.add_argument('--sweep_field', type=str, default=None, help='link parameter to sweep')
    linkbudget.add_argument('--sweep_values', type=float, nargs='+', default=None)
    linkbudget.add_argument('--output_dir', type=str, default="results")

    demo = subparsers.add_parser("reconcile-demo", help="block-parity error correction of two bit files")
    demo.add_argument('alice_file', type=str)
    demo.add_argument('bob_file', type=str)
    demo.add_argument('--rows', type=int, default=16)
    demo.add_argument('--cols', type=int, default=16)
    demo.add_argument('--max_passes', type=int, default=DEFAULT_MAX_PASSES)
    demo.add_argument('--seed', type=int, default=0)
    demo.add_argument('--output_dir', type=str, default=None, help='write reconcile_demo.csv here')

    verify = subparsers.add_parser("verify", help="re-check the tags and leakage ledger of a dumped transcript")
    verify.add_argument('transcript', type=str)

    return parser


def load_scenario(args) -> ScenarioConfig:
    config = ScenarioConfig() if args.config is None else ScenarioConfig.from_yaml(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "pulse_count", "num_workers") if getattr(args, k) is not None}
    output = {}
    if args.output_dir is not None:
        output["directory"] = args.output_dir
    if args.dump_transcript:
        output["dump_transcript"] = True
    if getattr(args, "formats", None):
        output["formats"] = args.formats
    if output:
        overrides["output"] = output
    return config.replace(**overrides) if overrides else config


def log_to_wandb(project: str, name: str, config: dict, rows):
    run = wandb.init(project=project, name=name, config=config, reinit=True)
    for row in rows:
        wandb.log({k: v for k, v in row.items() if isinstance(v, (int, float, bool))})
    run.finish()


def simulate(args) -> int:
    config = load_scenario(args)
    log.info(config)
    transcript = run_session(config, progress=not args.no_progress)
    emit_report(transcript, config.output.directory, config.output.formats, config.output.dump_transcript)
    if args.wandb_project:
        log_to_wandb(args.wandb_project, config.name, config.to_dict(), [transcript.metrics()])

    if transcript.aborted:
        log.warning(f"Session aborted: {transcript.abort_reason}")
        return EXIT_ABORTED
    log.info(f"Delivered {transcript.delivered_bits} bits, keys match: {transcript.keys_match}")
    return EXIT_OK


def attack_sweep(args) -> int:
    config = load_scenario(args)
    log.info(config)
    variants = []
    for kind in map(AttackKind, args.kinds):
        if kind is AttackKind.INTERCEPT_RESEND_BOBS_BASIS and config.protocol is ProtocolName.BB84:
            log.info(f"Skipping {kind.value}: it needs protocol b92")
            continue
        intercept = kind in (AttackKind.INTERCEPT_RESEND_ALICE_BASIS, AttackKind.INTERCEPT_RESEND_BOBS_BASIS)
        for fraction in (args.fractions if intercept else [1.0]):
            variants.append((kind, fraction))

    rows = []
    for kind, fraction in tqdm(variants, desc="attack sweep", disable=args.no_progress):
        scenario = config.replace(name=f"{config.name}_{kind.value}_{fraction:g}",
                                  attack={"kind": kind.value, "fraction": fraction})
        transcript = run_session(scenario)
        rows.append(transcript.metrics())
        log.info(f"{kind.value} (fraction {fraction:g}): qber={transcript.qber}, status={rows[-1]['status']}")

    directory = pathlib.Path(config.output.directory)
    ensure_dir(directory)
    path = directory / f"{config.name}_attack_sweep.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    log.info(f"Attack sweep written to {path}")
    if args.wandb_project:
        log_to_wandb(args.wandb_project, f"{config.name}_attack_sweep", config.to_dict(), rows)
    return EXIT_OK


def linkbudget(args) -> int:
    params = LinkParams.from_yaml(args.params) if args.params is not None else preset(args.preset)
    directory = pathlib.Path(args.output_dir)
    ensure_dir(directory)

    if args.sweep_field is not None:
        if not args.sweep_values:
            raise ConfigError("--sweep_field needs --sweep_values")
        frame = sweep(params, args.sweep_field, args.sweep_values)
        path = directory / f"linkbudget_sweep_{args.sweep_field}.csv"
    else:
        frame = pd.DataFrame([link_report(params)])
        path = directory / "linkbudget.csv"
        for name, value in {**link_report(params), **noise_budget(params)}.items():
            print(f"{name:<24}{value:.6g}")
        print(f"{'break_even_radiance':<24}{break_even_radiance(params):.6g}")
    frame.to_csv(path, index=False)
    log.info(f"Link budget written to {path}")
    return EXIT_OK


def reconcile_demo(args) -> int:
    alice_bits, bob_bits = read_bit_file(args.alice_file), read_bit_file(args.bob_file)
    if len(alice_bits) != len(bob_bits):
        raise ConfigError(f"Bit files differ in length: {len(alice_bits)} and {len(bob_bits)}")
    alice_key = KeyBuffer(alice_bits, stage=KeyStage.SIFTED)
    bob_key = KeyBuffer(bob_bits, stage=KeyStage.SIFTED)
    report = block_parity_reconcile(alice_key, bob_key, args.rows, args.cols, args.max_passes,
                                    make_rng(args.seed, STREAM_RECONCILIATION))
    row = {
        "n_bits": len(alice_bits),
        "initial_errors": alice_key.mismatches(bob_key),
        "passes": report.passes,
        "flips": report.flips,
        "parity_bits_disclosed": report.parity_bits_disclosed,
        "residual_errors": report.alice_key.mismatches(report.corrected_bob_key),
        "residual_error_estimate": report.residual_error_estimate,
        "converged": report.converged,
    }
    for name, value in row.items():
        print(f"{name:<24}{value}")
    if args.output_dir is not None:
        ensure_dir(args.output_dir)
        pd.DataFrame([row]).to_csv(pathlib.Path(args.output_dir) / "reconcile_demo.csv", index=False)
    return EXIT_OK if report.converged else EXIT_ABORTED


def verify(args) -> int:
    problems = transcript_diagnostics(load_transcript(args.transcript))
    for problem in problems:
        print(problem)
    print("transcript verified" if not problems else f"{len(problems)} problem(s) found")
    return EXIT_OK if not problems else EXIT_ABORTED


COMMANDS = {
    "simulate": simulate,
    "attack": attack_sweep,
    "linkbudget": linkbudget,
    "reconcile-demo": reconcile_demo,
    "verify": verify,
}


def main(argv=None) -> int:
    """
    Parse the command line and run one subcommand.

    :return: 0 on success, 2 when a session aborted, 1 on a usage or configuration error.
    """
    args = get_parser_main().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError, FileNotFoundError) as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    except ProtocolError as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_ABORTED


if __name__ == "__main__":
    nice_print(SATELLITE)
    sys.exit(main())
