"""
Limiting distribution of cok(P(X)) as n -> infinity.

Prob(cok(P(X)) ≅ G) -> (1/|Aut_R(G)|) ∏_j ∏_{i>=1} (1 - |Ext¹(G, F_{q_j})| q_j^{-i} / |Hom(G, F_{q_j})|)

with q_j = p^{d_j}. Infinite products are truncated once an analytic bound
on the remaining tail drops below TAIL_TOLERANCE.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple, Union

from .errors import DivergentRatio, NotSquarefree
from .factorization import FactorData
from .module_theory import (
    FiniteModule, ModuleCatalog, ModuleType, Partition, aut_formula,
    count_aut, ensure_precision, ext1_size, format_type,
    hom_to_residue_field_size, module_from_partitions,
)
from .ring_core import RingSpec

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-14

MAX_TERMS = 10000


@dataclass(frozen=True)
class FactorTerm:
    """Per-factor data entering the product."""
    d: int
    hom: int
    ext: int

    def to_dict(self) -> Dict:
        return {'d': self.d, 'hom': self.hom, 'ext': self.ext}


@dataclass(frozen=True)
class LimitResult:
    """
    A limiting probability with a certified enclosure.

    The exact value lies in [value - radius, value + radius]. ``vanishing``
    marks an exact zero from a factor with |Ext¹| > |Hom|.
    """
    value: float
    radius: float
    aut: int
    terms: Tuple[FactorTerm, ...] = ()
    truncation: int = 0
    tail_bound: float = 0.0
    vanishing: bool = False

    @property
    def interval(self) -> Tuple[float, float]:
        return max(0.0, self.value - self.radius), min(1.0, self.value + self.radius)

    def to_dict(self) -> Dict:
        return {
            'probability': self.value,
            'radius': self.radius,
            'aut': self.aut,
            'hom': [t.hom for t in self.terms],
            'ext': [t.ext for t in self.terms],
            'truncation': self.truncation,
            'tail': self.tail_bound,
            'vanishing': self.vanishing,
        }


def truncate_product(c: Union[int, Fraction, float], q: int) -> Tuple[float, int, float]:
    """
    ∏_{i>=1} (1 - c·q^{-i}) truncated after N terms.

    The bound on |log| of the dropped tail is
    Σ_{i>N} c q^{-i} / (1 - c q^{-N-1}) <= c q^{-N-1} / ((1 - 1/q)(1 - c q^{-N-1})).

    Returns:
        (value of the first N terms, N, tail bound); the full product lies
        in [value·exp(-tail), value]
    """
    if c < 0 or q < 2:
        raise DivergentRatio(f"product needs c >= 0 and q >= 2, got c = {c}, q = {q}")
    if c == 0:
        return 1.0, 0, 0.0
    if c >= q:
        raise DivergentRatio(f"ratio {c} >= q = {q}; the product vanishes or diverges")
    c = float(c)
    value = 1.0
    N = 0
    while True:
        x_next = c * float(q) ** -(N + 1)
        tail = x_next / ((1.0 - 1.0 / q) * (1.0 - x_next))
        if tail < TAIL_TOLERANCE:
            return value, N, tail
        if N >= MAX_TERMS:
            raise DivergentRatio(f"no convergence after {MAX_TERMS} terms")
        N += 1
        value *= 1.0 - c * float(q) ** -N


def _combine(aut: int, factor_values: Sequence[Tuple[float, int, float]], terms: Sequence[FactorTerm]) -> LimitResult:
    value = 1.0 / aut
    tail_total = 0.0
    truncation = 0
    for v, N, tail in factor_values:
        value *= v
        tail_total += tail
        truncation = max(truncation, N)
    # truncation error plus a float rounding allowance per multiplication
    rounding = value * 4 * (truncation + 2) * len(factor_values) * 2.0 ** -53
    radius = value * -math.expm1(-tail_total) + rounding
    return LimitResult(value=value, radius=radius, aut=aut, terms=tuple(terms),
                       truncation=truncation, tail_bound=tail_total)


def _representative(G: Union[FiniteModule, ModuleType], spec: RingSpec) -> FiniteModule:
    if isinstance(G, FiniteModule):
        return G
    if G.representative is not None:
        return G.representative
    return module_from_partitions(spec.with_k(max(spec.k, G.log_order) + 1), G.partitions)


def limiting_probability(G: Union[FiniteModule, ModuleType], spec: RingSpec, F: FactorData) -> LimitResult:
    """
    Limiting probability that cok(P(X)) ≅ G as R-modules.

    Args:
        G: explicit module or catalog type
        spec: the ring
        F: factorization of P̄

    Returns:
        LimitResult; exactly 0 when some |Ext¹| exceeds |Hom|
    """
    module = ensure_precision(_representative(G, spec))
    if isinstance(G, ModuleType) and G.partitions is not None:
        aut = count_aut(G, F)
    else:
        aut = count_aut(module)

    terms = []
    values = []
    vanishing = False
    for j, factor in enumerate(F.factors):
        hom = hom_to_residue_field_size(module, j)
        ext = ext1_size(module, j)
        terms.append(FactorTerm(d=factor.d, hom=hom, ext=ext))
        if ext > hom:
            vanishing = True
            continue
        values.append(truncate_product(Fraction(ext, hom), spec.p ** factor.d))

    if vanishing:
        logger.debug(f"Vanishing factor for module of order p^{module.log_order}: terms {terms}")
        return LimitResult(value=0.0, radius=0.0, aut=aut, terms=tuple(terms), vanishing=True)
    return _combine(aut, values, terms)


def limiting_probability_squarefree(G: ModuleType, spec: RingSpec, F: FactorData) -> LimitResult:
    """(1/|Aut|) ∏_j ∏_i (1 - p^{-i d_j}) for a partition type."""
    if not F.squarefree:
        raise NotSquarefree("the square-free formula needs square-free P̄")
    if G.partitions is None:
        raise NotSquarefree(f"type {G.label} carries no partitions")
    return cor2_joint_probability(G.partitions, spec, F)


def cor2_joint_probability(partitions: Sequence[Partition], spec: RingSpec, F: FactorData) -> LimitResult:
    """
    Limit of Prob(cok(P_j(X)) ≅ G_j for every j), G_j of type λ^(j):
    ∏_j (1/|Aut(G_j)|) ∏_i (1 - p^{-i d_j}).
    """
    if not F.squarefree:
        raise NotSquarefree("the split-factor product needs square-free P̄")
    aut = 1
    values = []
    terms = []
    for lam, factor in zip(partitions, F.factors):
        q = spec.p ** factor.d
        aut *= aut_formula(tuple(lam), q)
        hom = q ** len(lam)
        terms.append(FactorTerm(d=factor.d, hom=hom, ext=hom))
        values.append(truncate_product(1, q))
    return _combine(aut, values, terms)


def abelian_tuples(abelian: Partition, F: FactorData) -> List[Tuple[Partition, ...]]:
    """
    Ordered tuples (λ^(1), ..., λ^(l)) whose group H_{λ^(1)}^{d_1} × ... is
    isomorphic to the abelian group of type ``abelian``.
    """
    target: Dict[int, int] = {}
    for a in abelian:
        target[a] = target.get(a, 0) + 1
    results: List[Tuple[Partition, ...]] = []

    def assign(j: int, remaining: Dict[int, int], chosen: List[Partition]):
        if j == F.l:
            if all(c == 0 for c in remaining.values()):
                results.append(tuple(chosen))
            return
        d = F.factors[j].d
        parts = sorted(remaining)
        # choose how many copies of each part factor j takes (each costs d)
        ranges = [range(remaining[a] // d + 1) for a in parts]
        for counts in itertools.product(*ranges):
            rest = dict(remaining)
            lam = []
            for a, c in zip(parts, counts):
                rest[a] -= c * d
                lam.extend([a] * c)
            assign(j + 1, rest, chosen + [tuple(sorted(lam, reverse=True))])

    assign(0, target, [])
    return sorted(results, key=lambda t: format_type(t))


@dataclass(frozen=True)
class Cor1Result:
    """Abelian-group limit: the sum over every compatible tuple of partitions."""
    value: float
    radius: float
    tuples: Tuple[Tuple[Partition, ...], ...]
    contributions: Tuple[float, ...]

    def to_dict(self) -> Dict:
        return {
            'probability': self.value,
            'radius': self.radius,
            'tuples': [format_type(t) for t in self.tuples],
            'contributions': list(self.contributions),
        }


def cor1_probability(abelian: Partition, spec: RingSpec, F: FactorData) -> Cor1Result:
    """
    Limit of Prob(cok(P(X)) ≅ G as abelian groups).

    Each tuple contributes ∏_j (1/|Aut(G_j)|) ∏_i (1 - p^{-i d_j}), so the
    sum equals Σ of limiting_probability over the R-module types sharing the
    abelian group.
    """
    if not F.squarefree:
        raise NotSquarefree("the abelian-group limit needs square-free P̄")
    tuples = abelian_tuples(tuple(sorted(abelian, reverse=True)), F)
    contributions = []
    radius = 0.0
    for tup in tuples:
        result = cor2_joint_probability(tup, spec, F)
        contributions.append(result.value)
        radius += result.radius
    return Cor1Result(value=math.fsum(contributions), radius=radius,
                      tuples=tuple(tuples), contributions=tuple(contributions))


def finite_n_cokernel_zero_probability(p: int, n: int) -> Fraction:
    """Prob(X in GL_n(F_p)) = ∏_{i=1}^{n} (1 - p^{-i}) for Haar-random X."""
    value = Fraction(1)
    for i in range(1, n + 1):
        value *= 1 - Fraction(1, p ** i)
    return value


@dataclass
class TheoryTable:
    """Limiting probabilities over a catalog, with the mass left outside it."""
    rows: List[Dict]
    total: float
    deficit: float

    def probability(self, label: str) -> float:
        for row in self.rows:
            if row['type'] == label:
                return row['probability']
        raise KeyError(label)

    def to_dict(self) -> Dict:
        return {'rows': self.rows, 'total': self.total, 'deficit': self.deficit}


def theory_table(catalog: ModuleCatalog) -> TheoryTable:
    """limiting_probability for every catalog type."""
    rows = []
    for t in catalog.types:
        result = limiting_probability(t, catalog.spec, catalog.factors)
        row = {'type': t.label, 'order_log': t.log_order}
        row.update(result.to_dict())
        rows.append(row)
    total = math.fsum(r['probability'] for r in rows)
    deficit = max(0.0, 1.0 - total)
    if catalog.max_size is not None and deficit > 1e-3:
        logger.warning(f"Catalog misses {deficit:.4f} of the limiting mass; raise --max-size to cover more")
    return TheoryTable(rows=rows, total=total, deficit=deficit)
