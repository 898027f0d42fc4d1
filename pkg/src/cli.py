"""
Command-line front end: ``python main.py <subcommand> ...``.

Subcommands: factor, snf, coktype, theory, simulate, moments, oracle and
compare. Results are JSON on stdout (or ``--out``); ``--csv`` adds a flat
table for plotting tools.
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .config import load_config, merge_options
from .errors import CokernelLabError, DimensionMismatch, InvalidModule, describe_error
from .factorization import factor_ring
from .linalg import MatrixZpk, smith_normal_form
from .mc_engine import (
    ExperimentConfig, MeasureSpec, Tally, build_catalog, empirical_moment,
    exhaustive_distribution, run_experiment,
)
from .measure_theory import cor1_probability, finite_n_cokernel_zero_probability, theory_table
from .module_theory import FiniteModule, module_type, residue_field_module
from .ring_core import RingSpec
from .run_manifest import RunManifest, read_result, write_csv, write_result, write_timing
from .utils import comparison_dataframe, format_probability, theory_dataframe, tally_dataframe

logger = logging.getLogger(__name__)


def _int_list(text: str) -> List[int]:
    try:
        values = [int(x) for x in text.split(',') if x.strip() != '']
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _add_ring_args(parser: argparse.ArgumentParser, poly_required: bool = True):
    parser.add_argument('--p', type=int, required=True, help='prime p')
    parser.add_argument('--k', type=int, default=1, help='precision: work over Z/p^k (default 1)')
    parser.add_argument('--poly', required=poly_required,
                        help='monic P as coefficients, low degree first, e.g. 0,0,1 for t^2')


def _add_output_args(parser: argparse.ArgumentParser):
    parser.add_argument('--out', default=None, help='write JSON here instead of stdout')
    parser.add_argument('--csv', default=None, help='also write a CSV table here')


def _add_sampling_args(parser: argparse.ArgumentParser):
    parser.add_argument('--n', type=_int_list, default=None, help='matrix sizes, e.g. 10,20,30')
    parser.add_argument('--samples', type=int, default=None, help='samples per matrix size')
    parser.add_argument('--measure', default=None, help='haar | bernoulli01 | custom:<file.json>')
    parser.add_argument('--seed', type=int, default=None, help='64-bit seed')
    parser.add_argument('--threads', type=int, default=None, help='worker processes (default COKLAB_THREADS)')
    parser.add_argument('--config', default=None, help='JSON config file (default config/config.json)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='cokernel-lab',
        description='Cokernels of P(X) for random matrices over Z/p^k as modules over (Z/p^k)[t]/(P)',
    )
    parser.add_argument('--version', action='version', version=f"cokernel-lab {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('factor', help='factor P mod p and Hensel-lift the factors')
    _add_ring_args(p)
    _add_output_args(p)

    p = sub.add_parser('snf', help='Smith normal form of a matrix over Z/p^k')
    _add_ring_args(p, poly_required=False)
    p.add_argument('--matrix', required=True, help="Matrix JSON file, or rows separated by ';', e.g. '2,0;0,4'")
    _add_output_args(p)

    p = sub.add_parser('coktype', help='R-module type of cok(P(X)) for one matrix')
    _add_ring_args(p)
    p.add_argument('--matrix', required=True, help="Matrix JSON file, or rows separated by ';'")
    _add_output_args(p)

    p = sub.add_parser('theory', help='limiting probabilities over a catalog')
    _add_ring_args(p)
    p.add_argument('--max-size', type=int, default=16, help='catalog bound on |G| (default 16)')
    p.add_argument('--module', action='append', default=[], help='module JSON file (repeatable)')
    p.add_argument('--abelian', type=_int_list, default=None,
                   help='also report the abelian-group limit for this partition, e.g. 1,1')
    _add_output_args(p)

    p = sub.add_parser('simulate', help='Monte-Carlo tally of cokernel types')
    _add_ring_args(p)
    _add_sampling_args(p)
    p.add_argument('--max-size', type=int, default=None, help='catalog bound on |G| (default 16)')
    p.add_argument('--module', action='append', default=[], help='module JSON file (repeatable)')
    _add_output_args(p)

    p = sub.add_parser('moments', help='empirical E|Sur(cok, G)|')
    _add_ring_args(p)
    _add_sampling_args(p)
    p.add_argument('--module', action='append', default=[],
                   help='module JSON file (repeatable); default: the residue fields of P')
    _add_output_args(p)

    p = sub.add_parser('oracle', help='exact distribution over every matrix of size n')
    _add_ring_args(p)
    p.add_argument('--n', type=int, required=True, help='matrix size')
    p.add_argument('--module', action='append', default=[], help='module JSON file for exact moments')
    _add_output_args(p)

    p = sub.add_parser('compare', help='join a tally with theory rows')
    p.add_argument('--tally', required=True, help='JSON written by simulate')
    p.add_argument('--theory', default=None, help='JSON written by theory (default: theory inside the tally)')
    _add_output_args(p)
    return parser


def _spec(args) -> RingSpec:
    return RingSpec.from_text(args.p, args.k, args.poly if args.poly else "0,1")


def _parse_matrix(text: str, spec: RingSpec) -> MatrixZpk:
    """Matrix JSON file ({"rows", "cols", "entries"}) or inline '2,0;0,4'."""
    if text.endswith('.json') or os.path.isfile(text):
        try:
            with open(text, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DimensionMismatch(f"cannot read matrix file {text}: {e}")
        if not isinstance(data, dict):
            raise DimensionMismatch(f"matrix file {text} must hold a JSON object")
        return MatrixZpk.from_dict(spec.p, spec.k, data)
    rows = [row for row in text.split(';') if row.strip() != '']
    try:
        values = [[int(x) for x in row.split(',')] for row in rows]
    except ValueError:
        raise DimensionMismatch(f"matrix entries must be integers: {text!r}")
    if not values or any(len(row) != len(values[0]) for row in values):
        raise DimensionMismatch(f"matrix rows must all have the same length: {text!r}")
    return MatrixZpk(spec.p, spec.k, np.array(values, dtype=object))


def _load_modules(paths: Sequence[str], spec: RingSpec) -> List[FiniteModule]:
    modules = []
    for path in paths:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidModule(f"cannot read module file {path}: {e}")
        modules.append(FiniteModule.from_dict(spec, data, name=data.get('name') or path))
    return modules


def _stable_argv(argv: Sequence[str]) -> List[str]:
    """argv without --threads, which never changes a result."""
    out = []
    skip = False
    for token in argv:
        if skip:
            skip = False
        elif token == '--threads':
            skip = True
        elif not token.startswith('--threads='):
            out.append(token)
    return out


def _emit(args, command: str, config: Dict[str, Any], result: Dict[str, Any],
          argv: Sequence[str], started: float, table: Optional[pd.DataFrame] = None):
    manifest = RunManifest(command=command, argv=_stable_argv(argv), config=config)
    write_result(args.out, manifest, result)
    manifest.wall_time = time.perf_counter() - started
    manifest.threads = getattr(args, 'threads', None)
    write_timing(args.out, manifest)
    if table is not None and getattr(args, 'csv', None):
        write_csv(args.csv, table)
    logger.info(f"{command} finished in {manifest.wall_time:.2f}s")


def cmd_factor(args, argv, started) -> int:
    spec = _spec(args)
    F = factor_ring(spec)
    result = {'ring': spec.to_dict(), 'squarefree': F.squarefree}
    result.update(F.to_dict())
    _emit(args, 'factor', {'ring': spec.to_dict()}, result, argv, started)
    return 0


def cmd_snf(args, argv, started) -> int:
    spec = _spec(args)
    M = _parse_matrix(args.matrix, spec)
    snf = smith_normal_form(M, transforms=True)
    result = {
        'matrix': M.to_dict(),
        'valuations': list(snf.valuations),
        'partition': list(snf.partition),
        'log_order': snf.log_order,
        'diagonal': MatrixZpk(spec.p, spec.k, snf.diagonal(M.cols)).to_dict(),
        'U': MatrixZpk(spec.p, spec.k, snf.U).to_dict(),
        'V': MatrixZpk(spec.p, spec.k, snf.V).to_dict(),
    }
    _emit(args, 'snf', {'p': spec.p, 'k': spec.k}, result, argv, started)
    return 0


def cmd_coktype(args, argv, started) -> int:
    spec = _spec(args)
    X = _parse_matrix(args.matrix, spec)
    if X.rows != X.cols:
        raise DimensionMismatch(f"X must be square, got {X.rows}x{X.cols}")
    F = factor_ring(spec)
    t = module_type(X, spec, F)
    if t.saturated:
        logger.warning(f"A part reaches p^{spec.k}; raise --k to certify the type")
    result = {
        'type': t.label,
        'log_order': t.log_order,
        'saturated': t.saturated,
        'factors': [f.to_dict() for f in F.factors],
    }
    if t.partitions is not None:
        result['partitions'] = [list(lam) for lam in t.partitions]
        result['abelian'] = list(t.abelian_type(F))
    else:
        result['fingerprint'] = list(t.fingerprint)
    _emit(args, 'coktype', {'ring': spec.to_dict(), 'matrix': X.to_dict()}, result, argv, started)
    return 0


def cmd_theory(args, argv, started) -> int:
    spec = _spec(args)
    F = factor_ring(spec)
    modules = _load_modules(args.module, spec)
    catalog = build_catalog(spec, F, args.max_size, modules)
    table = theory_table(catalog)
    result = table.to_dict()
    result['ring'] = spec.to_dict()
    if args.abelian:
        result['abelian'] = cor1_probability(tuple(args.abelian), spec, F).to_dict()
    for row in table.rows:
        logger.info(f"{row['type']:>16}  {format_probability(row['probability'])}")
    config = {'ring': spec.to_dict(), 'max_size': args.max_size,
              'modules': [M.to_dict() for M in modules], 'abelian': args.abelian}
    _emit(args, 'theory', config, result, argv, started, theory_dataframe(table.rows))
    return 0


def _experiment_config(args, spec: RingSpec, modules: List[FiniteModule]) -> ExperimentConfig:
    options = merge_options(
        {'n': args.n, 'samples': args.samples, 'measure': args.measure, 'seed': args.seed,
         'threads': args.threads, 'max_size': getattr(args, 'max_size', None)},
        load_config(args.config),
    )
    ns = options.get('n', [10])
    if isinstance(ns, int):
        ns = [ns]
    return ExperimentConfig(
        spec=spec,
        ns=tuple(int(n) for n in ns),
        samples=int(options.get('samples', 10000)),
        measure=MeasureSpec.parse(options.get('measure', 'haar'), spec.p),
        seed=int(options.get('seed', 0)),
        max_size=int(options.get('max_size', 16)),
        modules=modules,
        threads=options.get('threads'),
    ).validate()


def cmd_simulate(args, argv, started) -> int:
    spec = _spec(args)
    cfg = _experiment_config(args, spec, _load_modules(args.module, spec))
    tally = run_experiment(cfg)
    result = tally.to_dict()
    if spec.lift == (0, 1):
        result['finite_n_zero'] = {str(n): float(finite_n_cokernel_zero_probability(spec.p, n))
                                   for n in cfg.ns}
    _emit(args, 'simulate', cfg.to_dict(), result, argv, started, tally_dataframe(tally.rows()))
    return 0


def cmd_moments(args, argv, started) -> int:
    spec = _spec(args)
    modules = _load_modules(args.module, spec)
    if not modules:
        F = factor_ring(spec)
        modules = [residue_field_module(spec, F, j) for j in range(F.l)]
    cfg = _experiment_config(args, spec, modules)
    entries = []
    rows = []
    for G in modules:
        estimates = empirical_moment(cfg, G)
        entries.append({'module': G.to_dict(), 'name': G.name,
                        'estimates': [e.to_dict() for e in estimates]})
        for e in estimates:
            row = {'module': G.name}
            row.update(e.to_dict())
            rows.append(row)
    _emit(args, 'moments', cfg.to_dict(), {'moments': entries}, argv, started, pd.DataFrame(rows))
    return 0


def cmd_oracle(args, argv, started) -> int:
    spec = _spec(args)
    modules = _load_modules(args.module, spec)
    exact = exhaustive_distribution(spec, args.n, modules)
    result = exact.to_dict()
    result['type_moments'] = {f"M{i + 1}": str(exact.moment(G)) for i, G in enumerate(modules)}
    if spec.lift == (0, 1):
        result['finite_n_zero'] = str(finite_n_cokernel_zero_probability(spec.p, args.n))
    table = tally_dataframe(exact.to_tally().rows())
    config = {'ring': spec.to_dict(), 'n': args.n, 'modules': [M.to_dict() for M in modules]}
    _emit(args, 'oracle', config, result, argv, started, table)
    return 0


def _plain(value):
    """numpy scalars to Python values, NaN to None."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def compare_results(tally_data: Dict[str, Any], theory_rows: Optional[List[Dict[str, Any]]] = None) -> Dict[str, Any]:
    """
    Join tally rows with theory rows on the type label.

    The output depends only on the sets of rows, not their order.
    """
    tally = Tally.from_dict(tally_data)
    if theory_rows is None:
        theory_rows = [{'type': label, 'probability': prob} for label, prob in tally.theory.items()]
    samples = {b.n: b.samples for b in tally.blocks}
    rows = [row for row in tally_data.get('rows', tally.rows()) if row['type'] != 'other']
    df = comparison_dataframe(rows, theory_rows, samples)
    tv = {}
    for n, group in df.groupby('n'):
        known = group[group['theory'].notna()]
        tv[str(int(n))] = 0.5 * math.fsum(abs(float(f) - float(t)) for f, t in zip(known['freq'], known['theory']))
    records = [{key: _plain(value) for key, value in record.items()} for record in df.to_dict(orient='records')]
    return {'tv_distance': tv, 'rows': records}


def cmd_compare(args, argv, started) -> int:
    _, tally_data = read_result(args.tally)
    theory_rows = None
    if args.theory:
        _, theory_data = read_result(args.theory)
        theory_rows = [{'type': r['type'], 'probability': r['probability']} for r in theory_data['rows']]
    result = compare_results(tally_data, theory_rows)
    for n, tv in sorted(result['tv_distance'].items(), key=lambda item: int(item[0])):
        logger.info(f"n = {n}: TV distance {tv:.4f}")
    config = {'tally': args.tally, 'theory': args.theory}
    _emit(args, 'compare', config, result, argv, started, pd.DataFrame(result['rows']))
    return 0


COMMANDS = {
    'factor': cmd_factor,
    'snf': cmd_snf,
    'coktype': cmd_coktype,
    'theory': cmd_theory,
    'simulate': cmd_simulate,
    'moments': cmd_moments,
    'oracle': cmd_oracle,
    'compare': cmd_compare,
}


def parse_and_dispatch(argv: Sequence[str]) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a computation error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    started = time.perf_counter()
    try:
        return COMMANDS[args.command](args, list(argv), started)
    except CokernelLabError as e:
        logger.error(f"{args.command} failed with {e.code}")
        logger.debug(f"{args.command} traceback", exc_info=True)
        print(describe_error(e), file=sys.stderr)
        return 1
