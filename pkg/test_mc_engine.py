#!/usr/bin/env python3
"""
Tests for measures, Monte-Carlo tallies, empirical moments and the
exhaustive small-case oracle.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import json
from fractions import Fraction

import numpy as np
import pytest

from src.errors import InvalidMeasure, TooLarge
from src.factorization import factor_ring
from src.mc_engine import (
    ExperimentConfig, MeasureSpec, Tally, empirical_moment, exhaustive_distribution,
    run_experiment, sample_matrix, sample_rng,
)
from src.measure_theory import finite_n_cokernel_zero_probability
from src.module_theory import residue_field_module, zero_module
from src.ring_core import RingSpec


def test_haar_entries_are_uniform():
    measure = MeasureSpec('haar', 2)
    rng = sample_rng(1, 1, 0)
    draws = measure.draw(rng, (100000,), 1)
    sigma = 0.5 / np.sqrt(draws.size)
    assert abs(draws.mean() - 0.5) < 3 * sigma
    assert measure.epsilon == pytest.approx(0.5)


def test_bernoulli_support():
    measure = MeasureSpec('bernoulli01', 3)
    X = sample_matrix(30, measure, sample_rng(4, 30, 0), 2)
    assert set(np.unique(X.entries).tolist()) <= {0, 1}
    assert measure.epsilon == 0.5


def test_custom_measure_balance():
    probs = [0.9] + [0.1 / 8] * 8
    measure = MeasureSpec.from_json({'p': 3, 'k': 2, 'probabilities': probs}, 3)
    assert measure.epsilon == pytest.approx(1 - (0.9 + 2 * 0.1 / 8))
    with pytest.raises(InvalidMeasure):
        MeasureSpec.from_json({'p': 3, 'k': 1, 'probabilities': [1.0, 0.0, 0.0]}, 3)
    with pytest.raises(InvalidMeasure):
        MeasureSpec('custom', 2, (1.0, 0.0))
    with pytest.raises(InvalidMeasure):
        MeasureSpec('custom', 2, (0.5, 0.4))
    with pytest.raises(InvalidMeasure):
        MeasureSpec.from_json({'p': 2, 'k': 1, 'probabilities': [0.5, 0.5]}, 3)


def test_custom_measure_with_epsilon_point_one_is_accepted():
    measure = MeasureSpec('custom', 2, (0.9, 0.1))
    assert measure.epsilon == pytest.approx(0.1)


def test_custom_measure_from_file(tmp_path):
    path = tmp_path / "measure.json"
    path.write_text(json.dumps({'p': 2, 'k': 2, 'probabilities': [0.25, 0.25, 0.25, 0.25]}))
    measure = MeasureSpec.parse(f"custom:{path}", 2)
    assert measure.kind == 'custom'
    with pytest.raises(InvalidMeasure):
        MeasureSpec.parse("gaussian", 2)


def test_sampling_is_deterministic():
    measure = MeasureSpec('haar', 3)
    a = sample_matrix(5, measure, sample_rng(9, 5, 17), 2)
    b = sample_matrix(5, measure, sample_rng(9, 5, 17), 2)
    c = sample_matrix(5, measure, sample_rng(9, 5, 18), 2)
    assert a == b
    assert a != c


def test_config_validation():
    spec = RingSpec(2, 1, (0, 1))
    with pytest.raises(InvalidMeasure):
        ExperimentConfig(spec, (5,), 0, MeasureSpec('haar', 2)).validate()
    with pytest.raises(InvalidMeasure):
        ExperimentConfig(spec, (0,), 10, MeasureSpec('haar', 2)).validate()
    with pytest.raises(InvalidMeasure):
        ExperimentConfig(spec, (5,), 10, MeasureSpec('haar', 3)).validate()


def _config(spec, ns, samples, measure='haar', threads=1, chunk_size=None, seed=11, max_size=16):
    return ExperimentConfig(spec, tuple(ns), samples, MeasureSpec(measure, spec.p),
                            seed=seed, max_size=max_size, threads=threads, chunk_size=chunk_size)


def test_tally_counts_sum_to_samples():
    spec = RingSpec(2, 2, (0, 1))
    tally = run_experiment(_config(spec, [3, 6], 400))
    for block in tally.blocks:
        assert sum(block.counts.values()) + block.other == block.samples
        freqs = [tally.frequency(block.n, label) for label in tally.catalog + ['other']]
        assert sum(freqs) == pytest.approx(1.0)
    assert tally.catalog[:4] == ["0", "(1)", "(2)", "(1,1)"]


def test_tally_does_not_depend_on_chunking():
    spec = RingSpec(2, 1, (0, 1, 1))
    one = run_experiment(_config(spec, [4], 300, chunk_size=300))
    many = run_experiment(_config(spec, [4], 300, chunk_size=37))
    assert json.dumps(one.to_dict(), sort_keys=True) == json.dumps(many.to_dict(), sort_keys=True)


def test_tally_does_not_depend_on_worker_count():
    spec = RingSpec(2, 2, (0, 1))
    serial = run_experiment(_config(spec, [5], 200, chunk_size=50, threads=1))
    parallel = run_experiment(_config(spec, [5], 200, chunk_size=50, threads=2))
    assert json.dumps(serial.to_dict(), sort_keys=True) == json.dumps(parallel.to_dict(), sort_keys=True)


def test_tally_json_round_trip():
    spec = RingSpec(3, 1, (0, 1))
    tally = run_experiment(_config(spec, [2], 100))
    data = json.loads(json.dumps(tally.to_dict()))
    again = Tally.from_dict(data)
    assert again.to_dict() == tally.to_dict()


def test_zero_cokernel_frequency_for_n_10():
    spec = RingSpec(2, 1, (0, 1))
    samples = 4000
    tally = run_experiment(_config(spec, [10], samples))
    expected = float(finite_n_cokernel_zero_probability(2, 10))
    sigma = np.sqrt(expected * (1 - expected) / samples)
    assert abs(tally.frequency(10, "0") - expected) < 4 * sigma


def test_tv_distance_reported_per_n():
    spec = RingSpec(2, 2, (0, 1))
    tally = run_experiment(_config(spec, [8], 500))
    data = tally.to_dict()
    assert set(data['tv_distance']) == {'8'}
    assert 0.0 <= data['tv_distance']['8'] <= 1.0


def test_moment_of_zero_module_is_one():
    spec = RingSpec(2, 1, (0, 1))
    estimates = empirical_moment(_config(spec, [4], 50), zero_module(spec))
    assert estimates[0].mean == 1.0 and estimates[0].stderr == 0.0


def test_moment_of_fp_near_one():
    spec = RingSpec(2, 1, (0, 1))
    F = factor_ring(spec)
    G = residue_field_module(spec, F, 0)
    estimate = empirical_moment(_config(spec, [8], 3000), G)[0]
    assert abs(estimate.mean - 1.0) < 4 * estimate.stderr + 0.02


def test_exhaustive_two_by_two():
    spec = RingSpec(2, 1, (0, 1))
    exact = exhaustive_distribution(spec, 2)
    assert exact.total == 16
    assert exact.probability("0") == Fraction(6, 16)
    assert sum(exact.counts.values()) == 16


def test_exhaustive_one_by_one_mod_3():
    spec = RingSpec(3, 1, (0, 1))
    exact = exhaustive_distribution(spec, 1)
    assert exact.probability("0") == Fraction(2, 3)
    assert exact.probability("(1)") == Fraction(1, 3)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_exhaustive_matches_product_formula(n):
    spec = RingSpec(2, 1, (0, 1))
    exact = exhaustive_distribution(spec, n)
    assert exact.probability("0") == finite_n_cokernel_zero_probability(2, n)


def test_exhaustive_moments_agree():
    spec = RingSpec(2, 1, (0, 1))
    F = factor_ring(spec)
    G = residue_field_module(spec, F, 0)
    exact = exhaustive_distribution(spec, 2, [G])
    assert exact.direct_moments["M1"] == exact.moment(G)
    # E|Sur(cok X, F_2)| = E(|ker X| - 1) = 3/4 over 2x2 matrices over F_2
    assert exact.moment(G) == Fraction(3, 4)


def test_exhaustive_non_squarefree_classes():
    spec = RingSpec(2, 1, (0, 0, 1))
    F = factor_ring(spec)
    G = residue_field_module(spec, F, 0)
    exact = exhaustive_distribution(spec, 1, [G])
    assert exact.total == 2
    assert sum(exact.counts.values()) == 2
    assert exact.direct_moments["M1"] == exact.moment(G)


def test_exhaustive_guard():
    with pytest.raises(TooLarge):
        exhaustive_distribution(RingSpec(2, 2, (0, 1)), 4)


def test_sampled_frequencies_agree_with_exhaustive_counts():
    # k = 1 samples over Z/4, the same matrices the k = 2 oracle enumerates
    exact = exhaustive_distribution(RingSpec(2, 2, (0, 1)), 2)
    samples = 4000
    tally = run_experiment(_config(RingSpec(2, 1, (0, 1)), [2], samples, max_size=4, seed=404))
    assert tally.catalog == ["0", "(1)", "(1,1)"]
    covered = 0.0
    for label in tally.catalog:
        expected = float(exact.probability(label))
        covered += expected
        sigma = np.sqrt(expected * (1 - expected) / samples)
        assert abs(tally.frequency(2, label) - expected) <= 4 * sigma + 1e-12, label
    rest = 1.0 - covered
    sigma = np.sqrt(rest * (1 - rest) / samples)
    assert abs(tally.frequency(2, 'other') - rest) <= 4 * sigma + 1e-12


@pytest.mark.parametrize("measure,precision", [
    (MeasureSpec('haar', 3), 2),
    (MeasureSpec('bernoulli01', 2), 1),
    (MeasureSpec('bernoulli01', 3), 1),
    (MeasureSpec('custom', 2, (0.6, 0.1, 0.2, 0.1)), 2),
])
def test_residue_class_frequencies_respect_epsilon(measure, precision):
    entries = np.concatenate([
        sample_matrix(20, measure, sample_rng(8, 20, index), precision).entries.astype(np.int64).ravel()
        for index in range(50)
    ])
    cap = 1.0 - measure.epsilon
    sigma = np.sqrt(cap * (1 - cap) / entries.size)
    freqs = np.bincount(entries % measure.p, minlength=measure.p) / entries.size
    assert freqs.max() <= cap + 4 * sigma
    assert freqs.max() >= cap - 4 * sigma


def test_sur_counts_do_not_reread_settings(monkeypatch):
    spec = RingSpec(2, 1, (0, 1))
    G = residue_field_module(spec, factor_ring(spec), 0)
    t2 = RingSpec(2, 1, (0, 0, 1))
    H = residue_field_module(t2, factor_ring(t2), 0)

    def no_settings():
        raise AssertionError("settings read per count")

    monkeypatch.setattr('src.module_theory.load_settings', no_settings)
    assert empirical_moment(_config(spec, [4], 30), G)[0].samples == 30
    exact = exhaustive_distribution(spec, 2, [G])
    assert exact.moment(G) == Fraction(3, 4)
    assert exhaustive_distribution(t2, 1, [H]).total == 2
