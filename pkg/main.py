"""
Command line interface:

    python main.py VERB --config EXPERIMENT.json --out DIR [--seed N] [--threads N] [--tol-scale X]
                   [--force-uncertified]

VERB is one of stationary, orbits, homology, continue, validate and report. Every call is a sacred run, stored in
DIR/runs next to the result files of the stage.
"""
import argparse
import json
import logging
import os
import sys

from sacred import SETTINGS, Experiment
from sacred.observers import FileStorageObserver

from pipeline.config import load_experiment_config
from pipeline.stages import Pipeline, summary_lines
from travelwave.errors import EXIT_CONFIGURATION, EXIT_SUCCESS, exit_code_for

ex = Experiment('travelwave')
# sys level capturing works inside test runners that redirect the file descriptors
SETTINGS.CAPTURE_MODE = 'sys'

# for visually separating sections in the output
SEP_SYMBOL = "="
SEP_LENGTH = 25

# command line verb -> sacred command; 'continue' is a keyword
VERBS = {
    'stationary': 'stationary',
    'orbits': 'orbits',
    'homology': 'homology',
    'continue': 'continuation',
    'validate': 'validate',
    'report': 'report',
}


@ex.config
def config():
    config_file = None          # the experiment file
    out = 'results'             # the output directory
    seed = None                 # overrides the seed of the experiment file
    threads = 1                 # worker threads of the orbit searches
    tol_scale = 1.0             # factor applied to every solver tolerance
    force_uncertified = False   # build complexes from uncertified orbit counts


def run_stage(stage: str, config_file: str, out: str, seed, threads: int, tol_scale: float,
              force_uncertified: bool, _run) -> dict:
    """
    Runs `stage` and prints its summary.
    """
    experiment = load_experiment_config(config_file, seed, threads, tol_scale, force_uncertified)
    pipeline = Pipeline(experiment, out, log_scalar=_run.log_scalar, add_artifact=ex.add_artifact)

    print(SEP_SYMBOL * SEP_LENGTH)
    print(f"Running '{stage}' for '{experiment.name}' ({pipeline.problem.name}):")
    summary = pipeline.run(stage)
    print(SEP_SYMBOL * SEP_LENGTH)
    for line in summary_lines(summary):
        print(line)
    print(SEP_SYMBOL * SEP_LENGTH)
    return summary


@ex.command
def validate(config_file, out, seed, threads, tol_scale, force_uncertified, _run):
    return run_stage('validate', config_file, out, seed, threads, tol_scale, force_uncertified, _run)


@ex.command
def stationary(config_file, out, seed, threads, tol_scale, force_uncertified, _run):
    return run_stage('stationary', config_file, out, seed, threads, tol_scale, force_uncertified, _run)


@ex.command
def orbits(config_file, out, seed, threads, tol_scale, force_uncertified, _run):
    return run_stage('orbits', config_file, out, seed, threads, tol_scale, force_uncertified, _run)


@ex.command
def homology(config_file, out, seed, threads, tol_scale, force_uncertified, _run):
    summary = run_stage('homology', config_file, out, seed, threads, tol_scale, force_uncertified, _run)
    print(summary['summary'])
    return summary


@ex.command
def continuation(config_file, out, seed, threads, tol_scale, force_uncertified, _run):
    summary = run_stage('continue', config_file, out, seed, threads, tol_scale, force_uncertified, _run)
    if summary['isomorphism verified']:
        print("isomorphism verified")
    return summary


@ex.command
def report(config_file, out, seed, threads, tol_scale, force_uncertified, _run):
    return run_stage('report', config_file, out, seed, threads, tol_scale, force_uncertified, _run)


def parse_arguments(argv) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Travelling wave homology of scalar reaction diffusion problems.")
    parser.add_argument('verb', choices=list(VERBS), help="the stage to run")
    parser.add_argument('--config', required=True, help="the experiment file")
    parser.add_argument('--out', required=True, help="the output directory")
    parser.add_argument('--seed', type=int, default=None, help="overrides the seed of the experiment file")
    parser.add_argument('--threads', type=int, default=1, help="worker threads of the orbit searches")
    parser.add_argument('--tol-scale', type=float, default=1.0, help="factor applied to every solver tolerance")
    parser.add_argument('--force-uncertified', action='store_true',
                        help="build complexes even if the orbit counts are not certified")
    return parser.parse_args(argv)


def diagnostics(error: BaseException, code: int) -> str:
    return json.dumps({'error': type(error).__name__, 'message': str(error), 'exit_code': code}, sort_keys=True)


def main(argv=None) -> int:
    try:
        args = parse_arguments(argv)
    except SystemExit as error:
        return EXIT_SUCCESS if error.code == 0 else EXIT_CONFIGURATION

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    os.makedirs(args.out, exist_ok=True)
    ex.observers[:] = [FileStorageObserver(os.path.join(args.out, 'runs'))]
    updates = {'config_file': args.config, 'out': args.out, 'seed': args.seed, 'threads': args.threads,
               'tol_scale': args.tol_scale, 'force_uncertified': args.force_uncertified}
    try:
        ex.run(VERBS[args.verb], config_updates=updates)
    except Exception as error:
        code = exit_code_for(error)
        sys.stderr.write(diagnostics(error, code) + "\n")
        return code
    return EXIT_SUCCESS


if __name__ == '__main__':
    sys.exit(main())
