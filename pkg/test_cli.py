#!/usr/bin/env python3
"""
Tests for the command-line front end and the JSON/CSV outputs.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import json
import random

import numpy as np
import pandas as pd
import pytest

from src.cli import compare_results, parse_and_dispatch
from src.run_manifest import RunManifest, read_result


def _run_json(capsys, argv):
    status = parse_and_dispatch(argv)
    captured = capsys.readouterr()
    assert status == 0, captured.err
    return json.loads(captured.out)


def test_factor_irreducible_quadratic(capsys):
    data = _run_json(capsys, ['factor', '--p', '2', '--k', '1', '--poly', '1,1,1'])
    factors = data['result']['factors']
    assert len(factors) == 1
    assert factors[0]['d'] == 2 and factors[0]['m'] == 1
    assert data['manifest']['command'] == 'factor'
    assert data['manifest']['rng'] == 'PCG64/SeedSequence'


def test_theory_rows(capsys):
    data = _run_json(capsys, ['theory', '--p', '2', '--k', '2', '--poly', '0,1', '--max-size', '4'])
    assert [row['type'] for row in data['result']['rows']] == ["0", "(1)", "(2)", "(1,1)"]
    first = data['result']['rows'][0]
    assert first['probability'] == pytest.approx(0.2887880951, abs=1e-9)
    assert first['aut'] == 1


def test_theory_abelian_limit(capsys):
    data = _run_json(capsys, ['theory', '--p', '3', '--k', '1', '--poly', '2,0,1',
                              '--max-size', '3', '--abelian', '1'])
    assert data['result']['abelian']['tuples'] == ["()|(1)", "(1)|()"]


def test_snf_and_coktype(capsys):
    snf = _run_json(capsys, ['snf', '--p', '2', '--k', '2', '--matrix', '2,1;0,2'])
    assert snf['result']['valuations'] == [0, 2]
    cok = _run_json(capsys, ['coktype', '--p', '2', '--k', '1', '--poly', '0,1,1', '--matrix', '0,0;0,1'])
    assert cok['result']['type'] == "(1)|(1)"


def test_missing_poly_is_usage_error(capsys):
    assert parse_and_dispatch(['theory', '--p', '2']) == 2
    assert 'poly' in capsys.readouterr().err


def test_non_squarefree_without_modules(capsys):
    status = parse_and_dispatch(['simulate', '--p', '2', '--k', '1', '--poly', '0,0,1',
                                 '--n', '3', '--samples', '10', '--threads', '1'])
    assert status == 1
    assert "ERROR E004" in capsys.readouterr().err


def test_simulate_writes_json_csv_and_timing(tmp_path):
    out = tmp_path / "tally.json"
    csv = tmp_path / "tally.csv"
    status = parse_and_dispatch(['simulate', '--p', '2', '--k', '1', '--poly', '0,1', '--n', '3,5',
                                 '--samples', '200', '--seed', '3', '--threads', '1',
                                 '--out', str(out), '--csv', str(csv)])
    assert status == 0
    manifest, result = read_result(str(out))
    assert isinstance(manifest, RunManifest)
    assert manifest.config['samples'] == 200
    assert 'wall_time' not in json.loads(out.read_text())['manifest']
    assert json.loads((tmp_path / "tally.json.timing.json").read_text())['wall_time'] >= 0
    df = pd.read_csv(csv)
    assert list(df.columns) == ['n', 'type', 'count', 'freq', 'theory', 'ci_lo', 'ci_hi']
    assert set(df['n']) == {3, 5}
    assert set(result['finite_n_zero']) == {'3', '5'}


def test_simulate_is_reproducible(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for path, threads in zip(paths, ['1', '2']):
        assert parse_and_dispatch(['simulate', '--p', '2', '--k', '2', '--poly', '0,1', '--n', '4',
                                   '--samples', '120', '--seed', '5', '--threads', threads,
                                   '--out', str(path)]) == 0
    a, b = (p.read_text() for p in paths)
    assert a.replace(str(paths[0]), '') == b.replace(str(paths[1]), '')
    assert '--threads' not in json.loads(a)['manifest']['argv']
    assert json.loads((tmp_path / "b.json.timing.json").read_text())['threads'] == 2


def test_compare_is_order_independent(tmp_path):
    out = tmp_path / "tally.json"
    assert parse_and_dispatch(['simulate', '--p', '2', '--k', '2', '--poly', '0,1', '--n', '3,4',
                               '--samples', '150', '--threads', '1', '--out', str(out)]) == 0
    _, tally = read_result(str(out))
    baseline = compare_results(tally)
    shuffled = dict(tally)
    shuffled['rows'] = list(tally['rows'])
    random.Random(1).shuffle(shuffled['rows'])
    assert compare_results(shuffled) == baseline
    assert set(baseline['tv_distance']) == {'3', '4'}
    assert all(row['z'] is not None for row in baseline['rows'])


def test_compare_with_theory_file(tmp_path, capsys):
    tally_path = tmp_path / "tally.json"
    theory_path = tmp_path / "theory.json"
    assert parse_and_dispatch(['simulate', '--p', '2', '--k', '2', '--poly', '0,1', '--n', '6',
                               '--samples', '100', '--threads', '1', '--out', str(tally_path)]) == 0
    assert parse_and_dispatch(['theory', '--p', '2', '--k', '2', '--poly', '0,1', '--max-size', '4',
                               '--out', str(theory_path)]) == 0
    data = _run_json(capsys, ['compare', '--tally', str(tally_path), '--theory', str(theory_path)])
    types = {row['type'] for row in data['result']['rows'] if row['theory'] is not None}
    assert types == {"0", "(1)", "(2)", "(1,1)"}


def test_oracle_and_moments_with_module_file(tmp_path, capsys):
    module = tmp_path / "g.json"
    module.write_text(json.dumps({'name': 'Z/2', 'abelian': [1], 't_action': [[0]]}))
    data = _run_json(capsys, ['oracle', '--p', '2', '--k', '1', '--poly', '0,1', '--n', '2',
                              '--module', str(module)])
    assert data['result']['finite_n_zero'] == "3/8"
    assert data['result']['moments']['M1'] == data['result']['type_moments']['M1'] == "3/4"
    moments = _run_json(capsys, ['moments', '--p', '2', '--k', '1', '--poly', '0,1', '--n', '3',
                                 '--samples', '50', '--threads', '1', '--module', str(module)])
    estimate = moments['result']['moments'][0]['estimates'][0]
    assert estimate['n'] == 3 and estimate['samples'] == 50


def test_custom_measure_file(tmp_path, capsys):
    measure = tmp_path / "m.json"
    measure.write_text(json.dumps({'p': 2, 'k': 1, 'probabilities': [0.7, 0.3]}))
    data = _run_json(capsys, ['simulate', '--p', '2', '--k', '1', '--poly', '0,1', '--n', '3',
                              '--samples', '40', '--threads', '1', '--measure', f"custom:{measure}"])
    assert data['manifest']['config']['measure']['kind'] == 'custom'


def test_snf_reads_matrix_json_file(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({'rows': 2, 'cols': 2, 'entries': [2, 0, 0, 4]}))
    data = _run_json(capsys, ['snf', '--p', '2', '--k', '3', '--matrix', str(path)])
    result = data['result']
    assert result['valuations'] == [1, 2]
    assert result['partition'] == [2, 1]
    assert result['matrix'] == {'rows': 2, 'cols': 2, 'entries': [2, 0, 0, 4]}
    assert result['diagonal'] == {'rows': 2, 'cols': 2, 'entries': [2, 0, 0, 4]}
    assert result['U']['rows'] == 2 and result['V']['cols'] == 2


def test_snf_diagonal_matches_transforms(capsys):
    data = _run_json(capsys, ['snf', '--p', '3', '--k', '2', '--matrix', '3,1;6,2;1,0'])
    result = data['result']

    def as_matrix(d):
        return np.array(d['entries'], dtype=object).reshape(d['rows'], d['cols'])

    M, U, V, D = (as_matrix(result[key]) for key in ('matrix', 'U', 'V', 'diagonal'))
    assert D.shape == (3, 2)
    assert ((U.dot(M).dot(V) - D) % 9 == 0).all()


def test_matrix_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({'rows': 2, 'cols': 2, 'entries': [1, 2, 3]}))
    assert parse_and_dispatch(['snf', '--p', '2', '--k', '1', '--matrix', str(bad)]) == 1
    missing = tmp_path / "missing.json"
    assert parse_and_dispatch(['coktype', '--p', '2', '--k', '1', '--poly', '0,1',
                               '--matrix', str(missing)]) == 1
    assert "ERROR" in capsys.readouterr().err


def test_coktype_reads_matrix_json_file(tmp_path, capsys):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({'rows': 2, 'cols': 2, 'entries': [0, 0, 0, 1]}))
    data = _run_json(capsys, ['coktype', '--p', '2', '--k', '1', '--poly', '0,1,1', '--matrix', str(path)])
    assert data['result']['type'] == "(1)|(1)"


def test_oracle_csv_uses_exact_probabilities(tmp_path, capsys):
    out = tmp_path / "oracle.json"
    csv = tmp_path / "oracle.csv"
    assert parse_and_dispatch(['oracle', '--p', '2', '--k', '1', '--poly', '0,1', '--n', '2',
                               '--out', str(out), '--csv', str(csv)]) == 0
    df = pd.read_csv(csv)
    assert list(df.columns) == ['n', 'type', 'count', 'freq', 'theory', 'ci_lo', 'ci_hi']
    zero = df[df['type'] == '0'].iloc[0]
    assert zero['count'] == 6 and zero['freq'] == pytest.approx(6 / 16)
    assert zero['theory'] == pytest.approx(zero['freq'])
    assert df['count'].sum() == 16
