# This code is part of gama-adapt.
#
# (C) Copyright The gama-adapt Authors 2026.
#
# This code is licensed under the Apache License, Version 2.0. You may
# obtain a copy of this license in the LICENSE.txt file in the root directory
# of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
#
# Any modifications or derivative works of this code must retain this
# copyright notice, and modified files need to carry a notice indicating
# that they have been altered from the originals.

"""Command line interface.

Subcommands::

    gama-adapt train CONFIG
    gama-adapt eval CONFIG --checkpoint FILE
    gama-adapt geoalign (CONFIG --checkpoint FILE | --source-emb CSV --target-emb CSV)
    gama-adapt ablate CONFIG [--drop geom on off] [--baseline] [--jobs N]
    gama-adapt gen-data CONFIG [--output CSV]

Every subcommand accepts ``--set section.key=value`` overrides. Exit codes:
0 on success, 2 for usage, configuration and data errors, 3 when a loss,
gradient or parameter became non-finite.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import ExperimentConfig, load_config, parse_overrides, save_config
from .constants import (EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, AblationComponent, Generator)
from .data import gen_swiss_roll_shift, gen_two_moons_shift, load_csv, save_csv
from .exceptions import (GamaConfigError, GamaDataError, GamaGeometryError, GamaNumericError,
                         GamaParameterError, GamaTrainingError)
from .geometry import DEFAULT_K
from .io import (json_ready, load_checkpoint, read_embeddings, save_checkpoint,
                 validate_report, write_ablation_csv, write_embeddings, write_epoch_csv,
                 write_loss_csv, write_report)
from .metrics import DEFAULT_GEOALIGN_CAP, aggregate, evaluate, geoalign, soft_geoalign
from .model import forward
from .trainer import fit, loss_rows, selected_params
from .version import __version__

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.npz'
LAST_GOOD_NAME = 'last_good.npz'
LOSS_CSV_NAME = 'loss.csv'
EPOCH_CSV_NAME = 'epochs.csv'
TRAINING_REPORT_NAME = 'training_report.json'
METRICS_REPORT_NAME = 'metrics_report.json'
ABLATION_CSV_NAME = 'ablation.csv'
ABLATION_REPORT_NAME = 'ablation_report.json'
DATASET_NAME = 'dataset.csv'

#: Overrides applied when a component is dropped.
DROP_OVERRIDES = {
    AblationComponent.GEOM: {('loss', 'lambda_geom'): '0'},
    AblationComponent.ON: {('loss', 'lambda_on'): '0', ('perturb', 'alpha'): '0'},
    AblationComponent.OFF: {('loss', 'lambda_off'): '0', ('perturb', 'beta'): '0'},
}
SOURCE_ONLY_OVERRIDES = {('loss', 'lambda_on'): '0', ('loss', 'lambda_off'): '0',
                         ('loss', 'lambda_geom'): '0', ('perturb', 'alpha'): '0',
                         ('perturb', 'beta'): '0'}


def build_bundle(config, seed=None):
    """Generate or load the dataset a config describes.

    Args:
        config (ExperimentConfig): experiment configuration.
        seed (int): replaces ``dataset.seed`` when given.

    Returns:
        DatasetBundle: the five dataset splits.
    """
    seed = config.get('dataset', 'seed') if seed is None else seed
    generator = config.get('dataset', 'generator')
    if generator is Generator.TWO_MOONS:
        return gen_two_moons_shift(config.get('dataset', 'n_per_domain'),
                                   noise=config.get('dataset', 'noise'),
                                   rotation_deg=config.get('dataset', 'rotation_deg'),
                                   translation=config.get('dataset', 'translation'),
                                   seed=seed, splits=config.splits())
    if generator is Generator.SWISS_ROLL:
        return gen_swiss_roll_shift(config.get('dataset', 'n_per_domain'),
                                    noise=config.get('dataset', 'noise'),
                                    stretch=config.get('dataset', 'stretch'),
                                    seed=seed, splits=config.splits())
    return load_csv(config.get('dataset', 'csv_path'), config.csv_schema(),
                    config.splits(), seed)


def _override_keys(overrides):
    return {'{}.{}'.format(section, key): text for (section, key), text in overrides.items()}


def _evaluate_config(config, spec, params, bundle, seed, loss_history=None):
    return evaluate(spec, params, bundle, config.attack(), bounds=config.bounds(),
                    k=config.get('metrics', 'geoalign_k'),
                    cap=config.get('metrics', 'geoalign_cap'), seed=seed,
                    pcfg=config.perturb(), tangent_rule=config.geometry().tangent_rule,
                    loss_history=loss_history)


def run_training(config, out_dir, seed=None):
    """Train one model and write its checkpoint, loss CSV, epoch CSV and report.

    Returns:
        tuple: the final ``TrainState``, the training report and the bundle.

    Raises:
        GamaTrainingError: on divergence, after saving the last finite
            parameters to ``last_good.npz``.
    """
    seed = config.get('train', 'seed') if seed is None else seed
    bundle = build_bundle(config)
    cfg = config.train_config(bundle.input_dim, bundle.n_classes, seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    try:
        state, report = fit(bundle, cfg)
    except GamaTrainingError as ex:
        if ex.last_good is not None:
            save_checkpoint(os.path.join(out_dir, LAST_GOOD_NAME), cfg.net, ex.last_good, seed)
        raise
    paths = {'checkpoint': os.path.join(out_dir, CHECKPOINT_NAME),
             'loss_csv': os.path.join(out_dir, LOSS_CSV_NAME),
             'epoch_csv': os.path.join(out_dir, EPOCH_CSV_NAME)}
    save_checkpoint(paths['checkpoint'], cfg.net, selected_params(state), seed)
    write_loss_csv(paths['loss_csv'], loss_rows(state))
    write_epoch_csv(paths['epoch_csv'], [r.row() for r in state.epochs])
    report = dict(report, gama_adapt_version=__version__, config=config.to_dict(),
                  artifacts=paths)
    write_report(os.path.join(out_dir, TRAINING_REPORT_NAME), report, 'training_report')
    return state, report, bundle


def cmd_train(args):
    """Run ``fit`` and write the artifacts to the output directory."""
    config = _load(args)
    out_dir = config.output_dir()
    _, report, _ = run_training(config, out_dir)
    save_config(config, os.path.join(out_dir, 'config.ini'))
    logger.info('Training finished in %.1f s; artifacts in %s', report['wall_time'], out_dir)
    return EXIT_OK


def cmd_eval(args):
    """Evaluate a checkpoint on the configured dataset and write a metrics report."""
    config = _load(args)
    spec, params, header = load_checkpoint(args.checkpoint)
    bundle = build_bundle(config)
    loss_csv = os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)), LOSS_CSV_NAME)
    report = _evaluate_config(config, spec, params, bundle, header.get('seed', 0),
                              loss_history=loss_csv if os.path.isfile(loss_csv) else None)
    atk = config.attack()
    out = dict(report.to_dict(), gama_adapt_version=__version__,
               checkpoint=os.path.abspath(args.checkpoint),
               attack={'epsilon': atk.epsilon, 'steps': atk.steps,
                       'step_size': atk.step_size, 'random_start': atk.random_start})
    target = args.output or os.path.join(config.output_dir(), METRICS_REPORT_NAME)
    write_report(target, out, 'metrics_report')
    if args.dump_embeddings:
        write_embeddings(os.path.join(args.dump_embeddings, 'source_embeddings.csv'),
                         forward(spec, params, bundle.source_train.x).embedding)
        write_embeddings(os.path.join(args.dump_embeddings, 'target_embeddings.csv'),
                         forward(spec, params, bundle.target_train.x).embedding)
    print('target_accuracy={:.2f} robust_accuracy={:.2f} geoalign={:.6g}'.format(
        report.target_accuracy, report.robust_accuracy, report.geoalign))
    return EXIT_OK


def cmd_geoalign(args):
    """GeoAlign between two embedding CSVs, or of a checkpoint on its dataset."""
    if args.source_emb or args.target_emb:
        if not (args.source_emb and args.target_emb):
            raise GamaConfigError('--source-emb and --target-emb must be given together')
        source_emb = read_embeddings(args.source_emb)
        target_emb = read_embeddings(args.target_emb)
        k, cap = args.k or DEFAULT_K, args.cap or DEFAULT_GEOALIGN_CAP
        if args.config:
            config = _load(args)
            k = args.k or config.get('metrics', 'geoalign_k')
            cap = args.cap or config.get('metrics', 'geoalign_cap')
    else:
        if not (args.config and args.checkpoint):
            raise GamaConfigError('geoalign needs CONFIG --checkpoint FILE or two embedding CSVs')
        config = _load(args)
        spec, params, _ = load_checkpoint(args.checkpoint)
        bundle = build_bundle(config)
        if spec.input_dim != bundle.input_dim:
            raise GamaParameterError('Checkpoint expects {} inputs but the dataset has {}'.format(
                spec.input_dim, bundle.input_dim))
        source_emb = forward(spec, params, bundle.source_train.x).embedding
        target_emb = forward(spec, params, bundle.target_train.x).embedding
        k = args.k or config.get('metrics', 'geoalign_k')
        cap = args.cap or config.get('metrics', 'geoalign_cap')
    result = {'geoalign': geoalign(source_emb, target_emb, k=k, cap=cap), 'k': k}
    if args.tau:
        result['soft_geoalign'] = soft_geoalign(source_emb, target_emb, args.tau, k=k, cap=cap)
        result['tau'] = args.tau
    text = json.dumps(json_ready(result), sort_keys=True)
    if args.output:
        with open(args.output, 'w') as handle:
            handle.write(text + '\n')
    print(text)
    return EXIT_OK


def ablation_variants(dropped, baseline=False):
    """Ordered ``{name: overrides}`` of the full run and each ablation."""
    variants = {'full': {}}
    for component in dropped:
        variants['no_' + component.value] = dict(DROP_OVERRIDES[component])
    if baseline:
        variants['source_only'] = dict(SOURCE_ONLY_OVERRIDES)
    return variants


def run_variant(texts, path, variant, overrides, seed, out_dir):
    """Train and evaluate one (variant, seed) pair; the unit of parallel work.

    Both the training seed and the dataset seed are set to ``seed`` so every
    variant sees the same data and initialization for a given seed.
    """
    config = ExperimentConfig.from_texts(texts, path).with_overrides(
        {**overrides, ('train', 'seed'): str(seed), ('dataset', 'seed'): str(seed)})
    run_dir = os.path.join(out_dir, variant, 'seed_{}'.format(seed))
    state, _, bundle = run_training(config, run_dir, seed=seed)
    spec = config.net_spec(bundle.input_dim, bundle.n_classes)
    return _evaluate_config(config, spec, selected_params(state), bundle, seed,
                            loss_history=os.path.join(run_dir, LOSS_CSV_NAME))


def cmd_ablate(args):
    """Run the full objective and each ablation over the shared seed list."""
    config = _load(args)
    dropped = [AblationComponent(c) for c in (args.drop or [])]
    variants = ablation_variants(dropped, baseline=args.baseline)
    seeds = list(config.get('metrics', 'seeds'))
    out_dir = config.output_dir()
    texts = config.to_dict()
    jobs = [(name, overrides, seed) for name, overrides in variants.items() for seed in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(run_variant, texts, config.path, name, overrides, seed,
                                   out_dir) for name, overrides, seed in jobs]
            reports = [f.result() for f in futures]
    else:
        reports = [run_variant(texts, config.path, name, overrides, seed, out_dir)
                   for name, overrides, seed in jobs]

    rows = [(name, seed, r.target_accuracy, r.robust_accuracy, r.geoalign)
            for (name, _, seed), r in zip(jobs, reports)]
    write_ablation_csv(os.path.join(out_dir, ABLATION_CSV_NAME), rows)
    summary = {}
    for name, overrides in variants.items():
        mine = [r for (n, _, _), r in zip(jobs, reports) if n == name]
        combined = aggregate(mine, seeds)
        summary[name] = dict(combined.diagnostics['spread'], overrides=_override_keys(overrides))
        logger.info('%s: target %.2f +- %.2f, robust %.2f +- %.2f, geoalign %.4g +- %.2g', name,
                    *(summary[name][m][s] for m in ('target_accuracy', 'robust_accuracy',
                                                    'geoalign') for s in ('mean', 'std')))
    report = {'gama_adapt_version': __version__, 'config': texts,
              'dropped': [c.value for c in dropped], 'seeds': seeds, 'variants': summary,
              'rows': [dict(zip(('variant', 'seed', 'target_accuracy', 'robust_accuracy',
                                 'geoalign'), row)) for row in rows]}
    write_report(os.path.join(out_dir, ABLATION_REPORT_NAME), report, 'ablation_report')
    for name in variants:
        print('{:<12} target={target_accuracy[mean]:.2f}+-{target_accuracy[std]:.2f} '
              'robust={robust_accuracy[mean]:.2f}+-{robust_accuracy[std]:.2f} '
              'geoalign={geoalign[mean]:.4g}+-{geoalign[std]:.2g}'.format(name, **summary[name]))
    return EXIT_OK


def cmd_gen_data(args):
    """Write the configured dataset to CSV with a JSON metadata sidecar."""
    config = _load(args)
    if config.get('dataset', 'generator') is Generator.CSV:
        raise GamaConfigError('gen-data needs a two_moons or swiss_roll generator',
                              path=config.path, key='dataset.generator')
    bundle = build_bundle(config)
    validate_report(json_ready(bundle.metadata), 'dataset_metadata')
    target = args.output or os.path.join(config.output_dir(), DATASET_NAME)
    os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
    save_csv(bundle, target)
    return EXIT_OK


def _load(args):
    config = load_config(args.config, parse_overrides(args.overrides or []))
    if not args.verbose:
        logging.getLogger().setLevel(config.get('output', 'log_level'))
    return config


def build_parser():
    """Argument parser of the ``gama-adapt`` command."""
    parser = argparse.ArgumentParser(
        prog='gama-adapt',
        description='Geometry-aware adversarial domain adaptation experiments.')
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress, -vv for per-step losses')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    def command(name, func, help_text, config_required=True):
        cmd = sub.add_parser(name, help=help_text)
        if config_required:
            cmd.add_argument('config', help='experiment config file (INI)')
        else:
            cmd.add_argument('config', nargs='?', help='experiment config file (INI)')
        cmd.add_argument('--set', dest='overrides', action='append', metavar='SECTION.KEY=VALUE',
                         help='override one config value; may be repeated')
        cmd.set_defaults(func=func)
        return cmd

    command('train', cmd_train, 'train a model and write its artifacts')

    cmd = command('eval', cmd_eval, 'evaluate a checkpoint')
    cmd.add_argument('--checkpoint', required=True)
    cmd.add_argument('--output', help='metrics report path')
    cmd.add_argument('--dump-embeddings', metavar='DIR',
                     help='also write source and target embedding CSVs to DIR')

    cmd = command('geoalign', cmd_geoalign, 'GeoAlign score of two embedding sets',
                  config_required=False)
    cmd.add_argument('--checkpoint')
    cmd.add_argument('--source-emb', metavar='CSV')
    cmd.add_argument('--target-emb', metavar='CSV')
    cmd.add_argument('--k', type=int)
    cmd.add_argument('--cap', type=int)
    cmd.add_argument('--tau', type=float, help='also report the softmin variant at TAU')
    cmd.add_argument('--output', help='write the scores as JSON')

    cmd = command('ablate', cmd_ablate, 'compare the full objective with ablations')
    cmd.add_argument('--drop', nargs='*', choices=[c.value for c in AblationComponent],
                     default=[c.value for c in AblationComponent])
    cmd.add_argument('--baseline', action='store_true',
                     help='add a source-only run with every lambda, alpha and beta at 0')
    cmd.add_argument('--jobs', type=int, default=1)

    cmd = command('gen-data', cmd_gen_data, 'write a generated dataset to CSV')
    cmd.add_argument('--output', help='dataset CSV path')
    return parser


def main(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level,
                        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        return args.func(args)
    except GamaNumericError as ex:
        logger.error('%s', ex)
        print('error: {}'.format(ex), file=sys.stderr)
        return EXIT_NUMERIC
    except (GamaConfigError, GamaParameterError, GamaDataError, GamaGeometryError) as ex:
        logger.error('%s', ex)
        print('error: {}'.format(ex), file=sys.stderr)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
