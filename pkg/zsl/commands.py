"""
Command implementations behind the bzsl entry point. Each cmd_* takes a RunConfig, writes its artifacts under
config.out (when set) and returns its in-memory result.
"""
import csv
import itertools
import json
import logging
import os
import re

import numpy as np

from utils.argparser import argparse
from utils.constants import DEFAULT_GRID, DEFAULT_TOPK, HYPERPARAM_ORDER, TRUTH_FILE, VALIDATION_HOLDOUT
from utils.functions import format_table, parallel_map
from zsl.funcs import bundle, classifier, evaluation, modelio, synth
from zsl.funcs.metaclass import build_meta_classes
from zsl.models.errors import BZSLException, InvalidArgument, SplitError
from zsl.models.hyperparams import Hyperparams

log = logging.getLogger(__name__)

M_RE = re.compile(r'^(?:(\d+(?:\.\d+)?)\s*\*?\s*)?D(?:\s*([+-])\s*(\d+(?:\.\d+)?))?$')


class RunConfig:
    def __init__(self, command, bundle=None, variant='unconstrained', hyperparams=None, grid=None, pca_dim=None,
                 out=None, seed=0, threads=1, sigma0_from='covariance', attr_norm='none', protocol='test',
                 model_path=None, topk=DEFAULT_TOPK, param=None, values=None, with_flat=False,
                 features_csv=None, attributes_csv=None, gen_spec=None):
        self.command = command
        self.bundle = bundle
        self.variant = variant
        self.hyperparams = hyperparams or Hyperparams()
        self.grid = grid
        self.pca_dim = pca_dim
        self.out = out
        self.seed = seed
        self.threads = threads
        self.sigma0_from = sigma0_from
        self.attr_norm = attr_norm
        self.protocol = protocol
        self.model_path = model_path
        self.topk = tuple(topk)
        self.param = param
        self.values = values
        self.with_flat = with_flat
        self.features_csv = features_csv
        self.attributes_csv = attributes_csv
        self.gen_spec = gen_spec

    @classmethod
    def from_namespace(cls, ns):
        """Builds a RunConfig from the parsed command line."""
        hp = Hyperparams(ns.kappa0, ns.kappa1, ns.m, ns.s, ns.K, ns.a0, ns.b0)
        command = ns.command
        if command in ('metaclass', 'model'):
            command = f"{command}_dump"
        gen_spec = None
        if command == 'synth':
            gen_spec = synth.GenSpec(ns.n_meta, ns.classes_per_meta, ns.samples_per_class, ns.dim, ns.kappa0,
                                     ns.kappa1, ns.m, seed=ns.seed, attr_noise=ns.attr_noise,
                                     val_per_meta=ns.val_per_meta, test_fraction=ns.test_fraction)
        inst = cls(
            command, ns.bundle, ns.variant, hp,
            grid=parse_grid(ns.grid) if ns.grid else None, pca_dim=ns.pca_dim, out=ns.out, seed=ns.seed,
            threads=ns.threads, sigma0_from=ns.sigma0_from, attr_norm=ns.attr_norm, protocol=ns.protocol,
            model_path=ns.model, topk=_int_list(ns.topk) if ns.topk else DEFAULT_TOPK, param=ns.param,
            values=_float_list(ns.values) if ns.values else None, with_flat=ns.with_flat,
            features_csv=ns.features_csv, attributes_csv=ns.attributes_csv, gen_spec=gen_spec
        )
        inst.validate()
        return inst

    def validate(self):
        if self.command not in ('synth',) and not self.bundle:
            raise InvalidArgument(f"`{self.command}` needs --bundle.")
        if bool(self.features_csv) != bool(self.attributes_csv):
            raise InvalidArgument("--features-csv and --attributes-csv go together.")
        if self.command == 'tune' and self.grid is not None and not any(self.grid.values()):
            raise InvalidArgument("The tuning grid is empty.")
        if self.command == 'sweep':
            if self.param not in ('kappa0', 'kappa1'):
                raise InvalidArgument("`sweep` needs --param kappa0 or --param kappa1.")
            if not self.values:
                raise InvalidArgument("`sweep` needs --values.")
        if self.command in ('synth', 'model_dump') and not self.out:
            raise InvalidArgument(f"`{self.command}` needs --out.")
        if self.threads < 1:
            raise InvalidArgument("--threads must be at least 1.")
        if self.seed < 0:
            raise InvalidArgument("--seed must be non-negative.")

    def __repr__(self):
        return f"<RunConfig command={self.command} bundle={self.bundle} variant={self.variant}>"


def _int_list(value):
    return argparse(["-v", value]).get_list('v', type_=int)


def _float_list(value):
    return argparse(["-v", value]).get_list('v', type_=float)


# ==== grids ====
def parse_grid(spec: str) -> dict:
    """
    Parses a grid spec such as ``-kappa0 0.01,0.1 -kappa1 1 -kappa1 5 -m D+2,5D -K 2``.
    Values stay raw; m entries may be expressions of the feature dimension D.

    :return: {hyperparameter name: [values]} for every hyperparameter named in the grid.
    """
    args = argparse(spec)
    grid = {}
    for name in HYPERPARAM_ORDER:
        if name in args:
            grid[name] = args.get_list(name)
    if not grid:
        raise InvalidArgument(f"No hyperparameters found in grid spec `{spec}` "
                              f"(expected any of {', '.join('-' + n for n in HYPERPARAM_ORDER)}).")
    return grid


def resolve_m(value, d: int) -> float:
    """Resolves an m grid entry: a number, or an expression such as D+2, 5D or 25D."""
    if not isinstance(value, str):
        return float(value)
    value = value.strip()
    match = M_RE.match(value)
    if match:
        factor, sign, offset = match.groups()
        out = (float(factor) if factor else 1.) * d
        if sign:
            out += float(offset) if sign == '+' else -float(offset)
        return out
    try:
        return float(value)
    except ValueError:
        raise InvalidArgument(f"Cannot read m value `{value}` (expected a number or an expression like D+2, 5D).")


def expand_grid(grid: dict, base: Hyperparams, d: int) -> list:
    """
    The cartesian product of the grid axes, with every other hyperparameter fixed at its base value.

    :param grid: {name: [values]}.
    :param base: The fixed hyperparameters.
    :param d: The (post-PCA) feature dimension used to resolve m expressions.
    :return: A list of Hyperparams.
    """
    names = [n for n in HYPERPARAM_ORDER if n in grid]
    axes = []
    for name in names:
        if name == 'm':
            axes.append([resolve_m(v, d) for v in grid[name]])
        elif name == 'K':
            axes.append([int(float(v)) for v in grid[name]])
        else:
            try:
                axes.append([float(v) for v in grid[name]])
            except ValueError:
                raise InvalidArgument(f"Grid values of {name} must be numbers.")
    points = []
    for combo in itertools.product(*axes):
        points.append(base.replace(**dict(zip(names, combo))))
    return points


# ==== helpers ====
def load(config: RunConfig):
    if config.features_csv:
        bundle.import_csv(config.features_csv, config.attributes_csv, config.bundle)
    dataset, splits = bundle.load_bundle(config.bundle)
    report = bundle.validate_split(dataset, splits)
    log.info(str(report))
    if report.empty_seen:
        raise SplitError(f"Seen classes without training rows: {report.empty_seen}")
    return dataset, splits


def protocol_split(dataset, splits, protocol, seed):
    """The split to fit and score: the real one for `test`, the held-out seen classes for `validation`."""
    if protocol == 'test':
        return splits
    if protocol == 'validation':
        if not splits.val_unseen:
            raise SplitError("The bundle has no validation split (val_unseen).")
        return splits.validation_split(dataset.labels, VALIDATION_HOLDOUT, seed)
    raise InvalidArgument(f"Unknown protocol: {protocol}")


def full_variant(config: RunConfig):
    """The full model a run is built on: the chosen covariance form, or unconstrained for an ablation."""
    return config.variant if config.variant in ('unconstrained', 'constrained') else 'unconstrained'


def run_once(
dataset, splits, hp, config: RunConfig, variant=None, threads=None):
    """Fits one model on a split and evaluates it on the split's test rows."""
    model = classifier.fit(dataset, splits, hp, variant or config.variant, config.pca_dim, config.sigma0_from,
                           config.attr_norm, threads or config.threads, ablation_base=full_variant(config))
    report = evaluation.evaluate(model, dataset, splits.test_rows(dataset.labels), config.topk,
                                 threads or config.threads)
    return model, report


def _ensure_out(config):
    if config.out:
        os.makedirs(config.out, exist_ok=True)
    return config.out


def _write_json(path, data):
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)


def _write_csv(path, headers, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(headers)
        for row in rows:
            writer.writerow(['' if v is None else v for v in row])


# ==== commands ====
def cmd_eval(config: RunConfig):
    """Fits on the training rows (or loads --model) and evaluates the test rows in the generalized space."""
    dataset, splits = load(config)
    split = protocol_split(dataset, splits, config.protocol, config.seed)
    if config.model_path:
        model = modelio.load_model(config.model_path)
    else:
        model = classifier.fit(dataset, split, config.hyperparams, config.variant, config.pca_dim,
                               config.sigma0_from, config.attr_norm, config.threads)
    rows = split.test_rows(dataset.labels)
    preds, scores = classifier.predict_batch(model, dataset.features[rows], 'gzsl', config.threads)
    report = evaluation.build_report(model, dataset.labels[rows], preds, scores, config.topk)
    table = evaluation.report_table([(model.variant, report)])
    print(table)

    out = _ensure_out(config)
    if out:
        _write_json(os.path.join(out, "report.json"), report.to_dict())
        with open(os.path.join(out, "report.txt"), 'w') as f:
            f.write(table + "\n")
        best = scores[np.arange(len(rows)), [model.column(c) for c in preds]]
        evaluation.write_predictions(os.path.join(out, "predictions.csv"), rows, preds, dataset.labels[rows], best)
        log.info(f"Wrote report and predictions to {out}")
    return report


def cmd_tune(config: RunConfig):
    """
    Evaluates every grid point on the validation protocol and ranks them by H, then ts, then the
    hyperparameters in lexicographic order.

    :return: (best Hyperparams, leaderboard rows as (Hyperparams, EvalReport or None, error or None))
    """
    dataset, splits = load(config)
    if not splits.val_unseen:
        raise SplitError("Tuning needs a validation split (val_unseen).")
    vsplit = protocol_split(dataset, splits, 'validation', config.seed)
    d = classifier.resolve_pca_dim(config.variant, dataset.d, config.pca_dim) or dataset.d
    points = expand_grid(config.grid or DEFAULT_GRID, config.hyperparams, d)
    log.info(f"Tuning {config.variant} over {len(points)} grid points")

    def run_point(hp):
        try:
            _, report = run_once(dataset, vsplit, hp, config, threads=1)
            return hp, report, None
        except BZSLException as e:
            log.warning(f"Grid point {hp!r} failed: {e}")
            return hp, None, str(e)

    results = parallel_map(run_point, points, config.threads)
    leaderboard = sorted(results, key=lambda r: (r[1] is None,
                                                 -(r[1].H if r[1] else 0), -(r[1].ts if r[1] else 0),
                                                 r[0].sort_key()))
    if leaderboard[0][1] is None:
        raise InvalidArgument(f"No grid point could be evaluated; first error: {leaderboard[0][2]}")
    best, best_report, _ = leaderboard[0]
    print(f"Best: {best!r} -> ts={best_report.ts:.4f} tr={best_report.tr:.4f} H={best_report.H:.4f}")

    out = _ensure_out(config)
    if out:
        _write_csv(os.path.join(out, "leaderboard.csv"), list(HYPERPARAM_ORDER) + ["ts", "tr", "H", "error"],
                   [[hp.to_dict()[k] for k in HYPERPARAM_ORDER] +
                    ([r.ts, r.tr, r.H] if r else [None, None, None]) + [err] for hp, r, err in leaderboard])
        _write_json(os.path.join(out, "best.json"), {"hyperparams": best.to_dict(), "report": best_report.to_dict()})
        log.info(f"Wrote leaderboard to {out}")
    return best, leaderboard


def cmd_sweep(config: RunConfig):
    """One evaluation per value of kappa0 or kappa1, everything else fixed. Returns [(value, EvalReport)]."""
    dataset, splits = load(config)
    split = protocol_split(dataset, splits, config.protocol, config.seed)

    def run_value(value):
        _, report = run_once(dataset, split, config.hyperparams.replace(**{config.param: value}), config, threads=1)
        return value, report

    results = parallel_map(run_value, config.values, config.threads)
    print(format_table([config.param, "ts", "tr", "H"], [[v, r.ts, r.tr, r.H] for v, r in results]))

    out = _ensure_out(config)
    if out:
        _write_csv(os.path.join(out, f"sweep_{config.param}.csv"), [config.param, "ts", "tr", "H"],
                   [[v, r.ts, r.tr, r.H] for v, r in results])
    return results


def cmd_ablate(config: RunConfig):
    """The full model against the ablations on the same split. Returns [(name, EvalReport)]."""
    dataset, splits = load(config)
    split = protocol_split(dataset, splits, config.protocol, config.seed)
    full = full_variant(config)
    variants = [full, 'ablation_v1', 'ablation_v2'] + (['ablation_flat'] if config.with_flat else [])

    results = []
    for variant in variants:
        _, report = run_once(dataset, split, config.hyperparams, config, variant=variant)
        results.append((variant, report))
    table = evaluation.report_table(results)
    print(table)

    out = _ensure_out(config)
    if out:
        _write_json(os.path.join(out, "ablation.json"), {name: r.to_dict() for name, r in results})
        with open(os.path.join(out, "ablation.txt"), 'w') as f:
            f.write(table + "\n")
    return results


def cmd_synth(config: RunConfig):
    """Samples a synthetic bundle into --out, with its latent parameters in truth.json."""
    dataset, splits, truth = synth.sample_dataset(config.gen_spec)
    bundle.save_bundle(dataset, splits, config.out)
    _write_json(os.path.join(config.out, TRUTH_FILE), truth.to_dict())
    ceiling = synth.bayes_oracle_report(dataset, splits, truth)
    print(f"Wrote {dataset!r} to {config.out}; true-parameter classifier: "
          f"ts={ceiling.ts:.4f} tr={ceiling.tr:.4f} H={ceiling.H:.4f}")
    return dataset, splits, truth


def cmd_metaclass_dump(config: RunConfig):
    """Emits {class id: {support, distances}} as JSON, to --out or stdout."""
    dataset, splits = load(config)
    meta_map = build_meta_classes(dataset, splits, config.hyperparams.K, config.attr_norm)
    data = meta_map.to_dict()
    if config.out:
        _write_json(config.out, data)
        log.info(f"Wrote meta-classes to {config.out}")
    else:
        print(json.dumps(data, indent=2))
    return meta_map


def cmd_model_dump(config: RunConfig):
    """Fits a model and writes it to the --out model file."""
    dataset, splits = load(config)
    model = classifier.fit(dataset, splits, config.hyperparams, config.variant, config.pca_dim,
                           config.sigma0_from, config.attr_norm, config.threads)
    modelio.save_model(model, config.out)
    print(json.dumps(modelio.model_summary(model)["hyperparams"]))
    return model


COMMANDS = {
    'eval': cmd_eval,
    'tune': cmd_tune,
    'sweep': cmd_sweep,
    'ablate': cmd_ablate,
    'synth': cmd_synth,
    'metaclass_dump': cmd_metaclass_dump,
    'model_dump': cmd_model_dump
}
