#!/usr/bin/env python3
import argparse
import logging
import sys

import sentry_sdk

from utils import config
from utils.constants import ATTR_NORMS, DEFAULT_K, DEFAULT_KAPPA0, DEFAULT_KAPPA1, DEFAULT_S, SIGMA0_SOURCES, \
    VARIANTS
from zsl.commands import COMMANDS, RunConfig
from zsl.models.errors import InvalidArgument, NumericalError, ValidationError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def setup_logging(level):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s:%(name)s: %(message)s'))
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(level.upper())


def setup_sentry():
    if config.SENTRY_DSN is None:
        return
    release = None
    if config.GIT_COMMIT_SHA:
        release = f"bzsl@{config.GIT_COMMIT_SHA}"
    sentry_sdk.init(dsn=config.SENTRY_DSN, environment=config.ENVIRONMENT.title(), release=release)


def log_exception(exception, run_config=None):
    if config.SENTRY_DSN is None:
        return
    with sentry_sdk.push_scope() as scope:
        if run_config is not None:
            scope.set_tag("command", run_config.command)
            scope.set_tag("bundle", str(run_config.bundle))
            scope.set_tag("variant", run_config.variant)
        sentry_sdk.capture_exception(exception)


class ArgumentParser(argparse.ArgumentParser):
    """Raises InvalidArgument on a bad command line, so it exits like any other validation error."""

    def error(self, message):
        raise InvalidArgument(f"{self.prog}: {message}")


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument('--bundle', help="Dataset bundle directory.")
    common.add_argument('--variant', choices=VARIANTS, default='unconstrained')
    common.add_argument('--pca-dim', type=int, default=None,
                        help="PCA target dimension (default: 500 for full-covariance variants when D > 500; 0 = off).")
    common.add_argument('--kappa0', type=float, default=DEFAULT_KAPPA0)
    common.add_argument('--kappa1', type=float, default=DEFAULT_KAPPA1)
    common.add_argument('--m', type=float, default=None, help="Inverse-Wishart dof (default: D + 2).")
    common.add_argument('--s', type=float, default=DEFAULT_S)
    common.add_argument('--K', type=int, default=DEFAULT_K)
    common.add_argument('--a0', type=float, default=None, help="Inverse-Gamma shape (default: m / 2).")
    common.add_argument('--b0', type=float, default=None, help="Inverse-Gamma scale (default: derived from s).")
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--threads', type=int, default=config.THREADS)
    common.add_argument('--out', help="Output directory (or file, for `metaclass dump` and `model dump`).")
    common.add_argument('--sigma0-from', choices=SIGMA0_SOURCES, default='covariance')
    common.add_argument('--attr-norm', choices=ATTR_NORMS, default='none')
    common.add_argument('--protocol', choices=('test', 'validation'), default='test')
    common.add_argument('--model', help="Score a saved model file instead of fitting (eval).")
    common.add_argument('--topk', help="Comma-separated k values for top-k accuracy, e.g. 1,5.")
    common.add_argument('--grid', help="Tuning grid, e.g. \"-kappa0 0.01,0.1 -kappa1 1,10 -m D+2,5D -K 2\".")
    common.add_argument('--param', choices=('kappa0', 'kappa1'), help="Hyperparameter to sweep.")
    common.add_argument('--values', help="Comma-separated sweep values.")
    common.add_argument('--with-flat', action='store_true', help="Add the no-meta-class ablation to `ablate`.")
    common.add_argument('--features-csv', help="Import features from CSV into the bundle first.")
    common.add_argument('--attributes-csv', help="Import attributes from CSV into the bundle first.")
    common.add_argument('--log-level', default=config.LOG_LEVEL)

    parser = ArgumentParser(prog='bzsl', description="Bayesian zero-shot learning.")
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('eval', parents=[common], help="Fit and evaluate in the generalized setting.")
    sub.add_parser('tune', parents=[common], help="Grid-search hyperparameters on the validation split.")
    sub.add_parser('sweep', parents=[common], help="Sweep kappa0 or kappa1.")
    sub.add_parser('ablate', parents=[common], help="Compare the full model against its ablations.")
    synth = sub.add_parser('synth', parents=[common], help="Sample a synthetic bundle.")
    synth.add_argument('--n-meta', type=int, default=5)
    synth.add_argument('--classes-per-meta', type=int, default=4)
    synth.add_argument('--samples-per-class', type=int, default=100)
    synth.add_argument('--dim', type=int, default=10)
    synth.add_argument('--attr-noise', type=float, default=0.1)
    synth.add_argument('--val-per-meta', type=int, default=1)
    synth.add_argument('--test-fraction', type=float, default=0.2)
    for name, what in (('metaclass', "Dump the meta-class map as JSON."), ('model', "Fit and write a model file.")):
        p = sub.add_parser(name, parents=[common], help=what)
        p.add_argument('action', choices=('dump',))
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except InvalidArgument as e:
        setup_logging(config.LOG_LEVEL)
        log.error(str(e))
        return EXIT_VALIDATION
    setup_logging(ns.log_level)
    setup_sentry()

    run_config = None
    try:
        run_config = RunConfig.from_namespace(ns)
        log.info(f"Running {run_config!r}")
        COMMANDS[run_config.command](run_config)
    except ValidationError as e:
        log.error(str(e))
        return EXIT_VALIDATION
    except NumericalError as e:
        log.error(str(e))
        return EXIT_NUMERICAL
    except Exception as e:
        log_exception(e, run_config)
        raise
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
