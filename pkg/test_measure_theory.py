#!/usr/bin/env python3
"""
Tests for limiting probabilities, truncated products and the abelian-group
and split-factor specializations.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import math
from fractions import Fraction

import numpy as np
import pytest

from src.errors import DivergentRatio, NotSquarefree
from src.factorization import factor_ring
from src.measure_theory import (
    abelian_tuples, cor1_probability, cor2_joint_probability,
    finite_n_cokernel_zero_probability, limiting_probability,
    limiting_probability_squarefree, theory_table, truncate_product,
)
from src.linalg import MatrixZpk
from src.module_theory import (
    cokernel_of_matrix, enumerate_catalog, ext1_size, hom_to_residue_field_size,
    module_from_partitions, residue_field_module,
)
from src.ring_core import RingSpec

ETA_2 = 0.2887880950866024
ETA_4 = 0.6885375371203397


def _direct_product(c, q, terms=200):
    value = 1.0
    for i in range(1, terms + 1):
        value *= 1 - c * q ** -i
    return value


def test_truncate_product():
    assert truncate_product(0, 2) == (1.0, 0, 0.0)
    value, N, tail = truncate_product(1, 2)
    assert N > 0 and tail < 1e-14
    assert value == pytest.approx(ETA_2, abs=1e-12)
    assert truncate_product(Fraction(3, 2), 3)[0] == pytest.approx(_direct_product(1.5, 3), abs=1e-12)
    with pytest.raises(DivergentRatio):
        truncate_product(2, 2)


def test_zero_cokernel_for_p_equals_t():
    spec = RingSpec(2, 1, (0, 1))
    F = factor_ring(spec)
    catalog = enumerate_catalog(spec, F, 2)
    result = limiting_probability(catalog.by_label("0"), spec, F)
    assert result.value == pytest.approx(ETA_2, abs=1e-10)
    lo, hi = result.interval
    assert lo <= ETA_2 + 1e-15 and ETA_2 - 1e-15 <= hi


@pytest.mark.parametrize("p", [2, 3, 5])
def test_cyclic_of_order_p(p):
    spec = RingSpec(p, 1, (0, 1))
    F = factor_ring(spec)
    catalog = enumerate_catalog(spec, F, p)
    result = limiting_probability(catalog.by_label("(1)"), spec, F)
    assert result.value == pytest.approx(_direct_product(1, p) / (p - 1), rel=1e-12)


def test_vanishing_for_t_squared():
    spec = RingSpec(2, 1, (0, 0, 1))
    F = factor_ring(spec)
    result = limiting_probability(residue_field_module(spec, F, 0), spec, F)
    assert result.vanishing
    assert result.value == 0.0 and result.radius == 0.0


def test_irreducible_quadratic_zero_type():
    spec = RingSpec(2, 1, (1, 1, 1))
    F = factor_ring(spec)
    catalog = enumerate_catalog(spec, F, 1)
    result = limiting_probability_squarefree(catalog.by_label("0"), spec, F)
    assert result.value == pytest.approx(ETA_4, abs=1e-10)


def test_squarefree_formula_matches_general_formula():
    spec = RingSpec(2, 2, (0, 1, 1))
    F = factor_ring(spec)
    catalog = enumerate_catalog(spec, F, 16)
    for t in catalog.types:
        general = limiting_probability(t, spec, F)
        special = limiting_probability_squarefree(t, spec, F)
        assert general.value == pytest.approx(special.value, rel=1e-12), t.label


def test_squarefree_formula_needs_squarefree():
    spec = RingSpec(2, 1, (0, 0, 1))
    F = factor_ring(spec)
    with pytest.raises(NotSquarefree):
        cor2_joint_probability([(1,)], spec, F)


def test_cor2_joint_zero():
    spec = RingSpec(2, 1, (0, 1, 1))
    F = factor_ring(spec)
    result = cor2_joint_probability([(), ()], spec, F)
    assert result.value == pytest.approx(ETA_2 ** 2, rel=1e-12)


def test_abelian_tuples():
    split = factor_ring(RingSpec(3, 1, (-1, 0, 1)))
    assert abelian_tuples((1,), split) == [((), (1,)), ((1,), ())]
    assert abelian_tuples((), split) == [((), ())]
    quadratic = factor_ring(RingSpec(2, 1, (1, 1, 1)))
    assert abelian_tuples((1,), quadratic) == []
    assert abelian_tuples((1, 1), quadratic) == [((1,),)]


def test_cor1_sums_the_module_types():
    spec = RingSpec(3, 2, (-1, 0, 1))
    F = factor_ring(spec)
    zero = cor1_probability((), spec, F)
    assert zero.value == pytest.approx(limiting_probability(enumerate_catalog(spec, F, 1).types[0], spec, F).value)
    catalog = enumerate_catalog(spec, F, 9)
    by_abelian = {}
    for t in catalog.types:
        by_abelian.setdefault(t.abelian_type(F), 0.0)
        by_abelian[t.abelian_type(F)] += limiting_probability(t, spec, F).value
    for abelian, total in by_abelian.items():
        assert cor1_probability(abelian, spec, F).value == pytest.approx(total, rel=1e-12)


def test_finite_n_zero_probability():
    assert finite_n_cokernel_zero_probability(2, 2) == Fraction(3, 8)
    assert finite_n_cokernel_zero_probability(3, 1) == Fraction(2, 3)
    assert float(finite_n_cokernel_zero_probability(2, 10)) == pytest.approx(0.2891, abs=1e-4)


def test_hom_at_most_ext_with_power_ratio():
    for poly in [(0, 1), (0, 0, 1), (1, 1, 1), (0, 1, 1)]:
        spec = RingSpec(2, 2, poly)
        F = factor_ring(spec)
        modules = [residue_field_module(spec, F, j) for j in range(F.l)]
        if F.squarefree:
            modules += [t.representative for t in enumerate_catalog(spec, F, 16).types]
        for G in modules:
            for j, factor in enumerate(F.factors):
                hom = hom_to_residue_field_size(G, j)
                ext = ext1_size(G, j)
                assert hom <= ext
                ratio, q = ext // hom, 2 ** factor.d
                assert ext % hom == 0
                assert round(math.log(ratio, q)) == pytest.approx(math.log(ratio, q), abs=1e-9)


def test_theory_table_mass():
    spec = RingSpec(2, 3, (0, 1))
    F = factor_ring(spec)
    small = theory_table(enumerate_catalog(spec, F, 4))
    large = theory_table(enumerate_catalog(spec, F, 64))
    assert small.total <= large.total <= 1.0 + 1e-12
    assert large.deficit < small.deficit
    assert [row['type'] for row in small.rows] == ["0", "(1)", "(2)", "(1,1)"]
    assert small.probability("(1,1)") == pytest.approx(ETA_2 / 6, rel=1e-12)
    assert small.probability("(2)") == pytest.approx(ETA_2 / 2, rel=1e-12)


def _assert_same_limit(a, b):
    assert a.aut == b.aut
    assert a.vanishing == b.vanishing
    assert [(t.hom, t.ext) for t in a.terms] == [(t.hom, t.ext) for t in b.terms]
    assert a.value == pytest.approx(b.value, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("raise_by", [1, 3])
def test_limit_does_not_depend_on_k_for_partition_types(raise_by):
    spec = RingSpec(2, 2, (0, 1, 1))
    F = factor_ring(spec)
    higher = spec.with_k(spec.k + raise_by)
    F_higher = factor_ring(higher)
    raised = enumerate_catalog(higher, F_higher, 16)
    for t in enumerate_catalog(spec, F, 16).types:
        u = raised.by_label(t.label)
        _assert_same_limit(limiting_probability(t, spec, F), limiting_probability(u, higher, F_higher))
        # explicit modules take the general route through count_aut
        G = module_from_partitions(spec.with_k(spec.k + 1), t.partitions)
        if G.log_order <= 3:
            _assert_same_limit(limiting_probability(t, spec, F),
                               limiting_probability(G.at_precision(higher.k + 1), higher, F_higher))


@pytest.mark.parametrize("spec", [RingSpec(2, 1, (0, 0, 1)), RingSpec(3, 1, (0, 0, 1)), RingSpec(2, 1, (0, 1, 0, 1))])
def test_limit_does_not_depend_on_k_for_explicit_modules(spec):
    F = factor_ring(spec)
    rng = np.random.default_rng(31)
    for _ in range(6):
        X = MatrixZpk(spec.p, spec.k, rng.integers(0, spec.modulus, size=(2, 2)))
        G = cokernel_of_matrix(X, spec)
        base = limiting_probability(G, spec, F)
        for k in (G.exponent + 2, G.exponent + 4):
            higher = spec.with_k(k)
            _assert_same_limit(base, limiting_probability(G.at_precision(k), higher, factor_ring(higher)))
