"""
Monte-Carlo ensembles of random matrices over Z/p^kZ, tallies of cokernel
types, empirical moments and exhaustive small-case oracles.

Sample i of size n draws from its own PCG64 stream seeded by
SeedSequence(seed, spawn_key=(n, i)), so tallies do not depend on how the
samples are split across worker processes.
"""

import itertools
import json
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import load_settings
from .errors import InvalidMeasure, NotSquarefree, TooLarge
from .factorization import FactorData, factor_ring
from .linalg import MatrixZpk
from .measure_theory import theory_table
from .module_theory import (
    FiniteModule, ModuleCatalog, catalog_from_modules, cokernel_of_matrix,
    count_sur, enumerate_catalog, fingerprint_of, is_isomorphic, module_type,
    present_cokernel, residue_field_module,
)
from .ring_core import RingSpec
from .utils import mean_and_stderr, total_variation, wilson_interval

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 2 ** 24

OTHER = "other"


@dataclass(frozen=True)
class MeasureSpec:
    """
    Distribution of one matrix entry.

    ``haar`` is uniform mod p^precision, ``bernoulli01`` puts 1/2 on 0 and
    1, ``custom`` puts the given mass on the integers 0..p^k - 1.
    """
    kind: str
    p: int
    probabilities: Optional[Tuple[float, ...]] = None
    source: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ('haar', 'bernoulli01', 'custom'):
            raise InvalidMeasure(f"unknown measure {self.kind!r}")
        if self.kind == 'custom':
            if not self.probabilities:
                raise InvalidMeasure("custom measure needs a probability table")
            probs = tuple(float(x) for x in self.probabilities)
            if any(x < 0 for x in probs):
                raise InvalidMeasure("probabilities must be non-negative")
            if abs(math.fsum(probs) - 1.0) > 1e-12:
                raise InvalidMeasure(f"probabilities sum to {math.fsum(probs)!r}, not 1")
            object.__setattr__(self, 'probabilities', probs)
        if self.epsilon <= 0:
            raise InvalidMeasure(f"measure is not ε-balanced (ε = {self.epsilon})")

    @property
    def epsilon(self) -> float:
        """1 - largest mass carried by a single residue class mod p."""
        if self.kind == 'haar':
            return 1.0 - 1.0 / self.p
        if self.kind == 'bernoulli01':
            return 0.5 if self.p > 1 else 0.0
        classes = [0.0] * self.p
        for x, prob in enumerate(self.probabilities):
            classes[x % self.p] += prob
        return 1.0 - max(classes)

    @property
    def label(self) -> str:
        return self.kind if self.kind != 'custom' else f"custom:{self.source or 'table'}"

    def draw(self, rng: np.random.Generator, size: Tuple[int, int], precision: int) -> np.ndarray:
        if self.kind == 'haar':
            return rng.integers(0, self.p ** precision, size=size, dtype=np.int64)
        if self.kind == 'bernoulli01':
            return rng.integers(0, 2, size=size, dtype=np.int64)
        return rng.choice(len(self.probabilities), size=size, p=np.array(self.probabilities)).astype(np.int64)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'kind': self.kind, 'epsilon': self.epsilon}
        if self.kind == 'custom':
            data['probabilities'] = list(self.probabilities)
            data['source'] = self.source
        return data

    @classmethod
    def from_json(cls, data: Dict[str, Any], p: int, source: Optional[str] = None) -> 'MeasureSpec':
        """Parse ``{"p": p, "k": k, "probabilities": [...]}``."""
        try:
            file_p, file_k, probs = int(data['p']), int(data['k']), list(data['probabilities'])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidMeasure(f"custom measure needs p, k and probabilities: {e}")
        if file_p != p:
            raise InvalidMeasure(f"measure is for p = {file_p}, run uses p = {p}")
        if len(probs) != file_p ** file_k:
            raise InvalidMeasure(f"expected {file_p ** file_k} probabilities, got {len(probs)}")
        return cls('custom', p, tuple(probs), source)

    @classmethod
    def parse(cls, text: str, p: int) -> 'MeasureSpec':
        """``haar``, ``bernoulli01`` or ``custom:<file.json>``."""
        if text in ('haar', 'bernoulli01'):
            return cls(text, p)
        if text.startswith('custom:'):
            path = text[len('custom:'):]
            try:
                with open(path, 'r', encoding='utf-8') as f:
                    data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise InvalidMeasure(f"cannot read custom measure {path}: {e}")
            return cls.from_json(data, p, source=path)
        raise InvalidMeasure(f"unknown measure {text!r}; use haar, bernoulli01 or custom:<file>")


def sample_rng(seed: int, n: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(n, index))))


def sample_matrix(n: int, measure: MeasureSpec, rng: np.random.Generator, precision: int) -> MatrixZpk:
    """n x n matrix of independent entries over Z/p^precision."""
    return MatrixZpk(measure.p, precision, measure.draw(rng, (n, n), precision))


@dataclass
class ExperimentConfig:
    """Everything that determines a Monte-Carlo run."""
    spec: RingSpec
    ns: Tuple[int, ...]
    samples: int
    measure: MeasureSpec
    seed: int = 0
    max_size: int = 16
    modules: List[FiniteModule] = field(default_factory=list)
    threads: Optional[int] = None
    chunk_size: Optional[int] = None

    def validate(self) -> 'ExperimentConfig':
        if self.samples < 1:
            raise InvalidMeasure(f"need at least one sample, got {self.samples}")
        if not self.ns or any(n < 1 for n in self.ns):
            raise InvalidMeasure(f"matrix sizes must be positive, got {list(self.ns)}")
        if self.measure.p != self.spec.p:
            raise InvalidMeasure("measure and ring use different primes")
        return self

    @property
    def sampling_precision(self) -> int:
        """Samples live over Z/p^{k+1} so every part <= k is certified."""
        return self.spec.k + 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'ring': self.spec.to_dict(),
            'n': list(self.ns),
            'samples': self.samples,
            'measure': self.measure.to_dict(),
            'seed': self.seed,
            'max_size': self.max_size,
            'modules': [M.to_dict() for M in self.modules],
            'sampling_precision': self.sampling_precision,
        }


@dataclass
class NBlock:
    """Counts for one matrix size."""
    n: int
    samples: int
    counts: Dict[str, int]
    other: int = 0
    saturated: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'samples': self.samples,
            'counts': {label: self.counts[label] for label in sorted(self.counts)},
            'other': self.other,
            'saturated': self.saturated,
        }


@dataclass
class Tally:
    """Observed cokernel types per n, next to the limiting probabilities."""
    catalog: List[str]
    theory: Dict[str, float]
    blocks: List[NBlock]
    config: Dict[str, Any] = field(default_factory=dict)
    deficit: float = 0.0

    def block(self, n: int) -> NBlock:
        for b in self.blocks:
            if b.n == n:
                return b
        raise KeyError(n)

    def frequency(self, n: int, label: str) -> float:
        b = self.block(n)
        count = b.other if label == OTHER else b.counts.get(label, 0)
        return count / b.samples

    def interval(self, n: int, label: str) -> Tuple[float, float]:
        b = self.block(n)
        count = b.other if label == OTHER else b.counts.get(label, 0)
        return wilson_interval(count, b.samples)

    def tv_distance(self, n: int) -> float:
        """Total variation over the catalog types only."""
        observed = {label: self.frequency(n, label) for label in self.catalog}
        return total_variation(observed, {label: self.theory.get(label, 0.0) for label in self.catalog})

    def rows(self) -> List[Dict[str, Any]]:
        """One row per (n, type), 'other' last."""
        out = []
        for b in sorted(self.blocks, key=lambda x: x.n):
            for label in self.catalog + [OTHER]:
                count = b.other if label == OTHER else b.counts.get(label, 0)
                lo, hi = wilson_interval(count, b.samples)
                out.append({
                    'n': b.n,
                    'type': label,
                    'count': count,
                    'freq': count / b.samples,
                    'theory': self.theory.get(label) if label != OTHER else self.deficit,
                    'ci_lo': lo,
                    'ci_hi': hi,
                })
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config,
            'catalog': list(self.catalog),
            'theory': {label: self.theory[label] for label in self.catalog},
            'deficit': self.deficit,
            'blocks': [b.to_dict() for b in sorted(self.blocks, key=lambda x: x.n)],
            'tv_distance': {str(b.n): self.tv_distance(b.n) for b in sorted(self.blocks, key=lambda x: x.n)},
            'rows': self.rows(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Tally':
        blocks = [NBlock(b['n'], b['samples'], dict(b['counts']), b.get('other', 0), b.get('saturated', 0))
                  for b in data['blocks']]
        return cls(list(data['catalog']), dict(data['theory']), blocks,
                   dict(data.get('config', {})), float(data.get('deficit', 0.0)))


def build_catalog(spec: RingSpec, F: FactorData, max_size: int,
                  modules: Sequence[FiniteModule] = ()) -> ModuleCatalog:
    """Explicit modules when given, otherwise every type up to ``max_size``."""
    if modules:
        return catalog_from_modules(spec, F, list(modules))
    if not F.squarefree:
        raise NotSquarefree("P̄ is not square-free; pass the modules to tally with --module")
    return enumerate_catalog(spec, F, max_size)


def _classify_chunk(args) -> Tuple[Dict[str, int], int, int]:
    """Worker: tally samples [start, stop) for one n."""
    spec, F, catalog, labels, n, start, stop, measure, seed, precision = args
    work = spec.with_k(precision)
    counts: Counter = Counter()
    other = 0
    saturated = 0
    for index in range(start, stop):
        X = sample_matrix(n, measure, sample_rng(seed, n, index), precision)
        t = module_type(X, work, F, None if F.squarefree else catalog)
        if t.saturated:
            saturated += 1
            other += 1
        elif t.label in labels:
            counts[t.label] += 1
        else:
            other += 1
    return dict(counts), other, saturated


def _run_tasks(worker, tasks: List[tuple], threads: int) -> List[Any]:
    if threads <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with Pool(processes=min(threads, len(tasks))) as pool:
        return pool.map(worker, tasks)


def _chunks(samples: int, chunk_size: int) -> List[Tuple[int, int]]:
    return [(start, min(start + chunk_size, samples)) for start in range(0, samples, chunk_size)]


def run_experiment(cfg: ExperimentConfig) -> Tally:
    """
    Sample cfg.samples matrices for each n and tally cok(P(X)) by type.

    Returns:
        Tally with counts, theory over the catalog and the 'other' bucket
    """
    cfg.validate()
    settings = load_settings()
    threads = cfg.threads or settings.threads
    chunk_size = cfg.chunk_size or settings.chunk_size
    spec = cfg.spec
    F = factor_ring(spec)
    catalog = build_catalog(spec, F, cfg.max_size, cfg.modules)
    table = theory_table(catalog)
    theory = {row['type']: row['probability'] for row in table.rows}
    labels = frozenset(catalog.labels())
    precision = cfg.sampling_precision

    blocks = []
    for n in cfg.ns:
        started = time.perf_counter()
        logger.info(f"Sampling {cfg.samples} matrices of size {n} over Z/{spec.p}^{precision} ({cfg.measure.label})")
        tasks = [(spec, F, catalog, labels, n, start, stop, cfg.measure, cfg.seed, precision)
                 for start, stop in _chunks(cfg.samples, chunk_size)]
        counts: Counter = Counter()
        other = saturated = 0
        for chunk_counts, chunk_other, chunk_saturated in _run_tasks(_classify_chunk, tasks, threads):
            counts.update(chunk_counts)
            other += chunk_other
            saturated += chunk_saturated
        if saturated:
            logger.warning(f"n = {n}: {saturated} samples had a part reaching p^{precision} and went to '{OTHER}'")
        block = NBlock(n, cfg.samples, dict(counts), other, saturated)
        blocks.append(block)
        logger.info(f"✅ n = {n} done in {time.perf_counter() - started:.1f}s")

    tally = Tally(catalog.labels(), theory, blocks, cfg.to_dict(), table.deficit)
    for block in blocks:
        logger.info(f"n = {block.n}: TV distance over catalog {tally.tv_distance(block.n):.4f}")
    return tally


@dataclass(frozen=True)
class MomentEstimate:
    """Sample mean of |Sur(cok, G)| for one n."""
    n: int
    samples: int
    mean: float
    stderr: float

    @property
    def deviation(self) -> float:
        return self.mean - 1.0

    @property
    def z(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.deviation == 0 else math.copysign(math.inf, self.deviation)
        return self.deviation / self.stderr

    def to_dict(self) -> Dict[str, Any]:
        return {'n': self.n, 'samples': self.samples, 'mean': self.mean,
                'stderr': self.stderr, 'deviation': self.deviation, 'z': self.z}


def _moment_chunk(args) -> List[int]:
    spec, G, n, start, stop, measure, seed, precision, cap = args
    work = spec.with_k(precision)
    out = []
    for index in range(start, stop):
        X = sample_matrix(n, measure, sample_rng(seed, n, index), precision)
        out.append(count_sur(cokernel_of_matrix(X, work), G, cap=cap))
    return out


def empirical_moment(cfg: ExperimentConfig, G: FiniteModule) -> List[MomentEstimate]:
    """
    Estimate E|Sur_R(cok(P(X)), G)| for every n in the config.

    Matrices are sampled at a precision covering the exponent of G, where
    Sur from the truncated cokernel equals Sur from the Z_p cokernel.
    """
    cfg.validate()
    settings = load_settings()
    threads = cfg.threads or settings.threads
    chunk_size = cfg.chunk_size or settings.chunk_size
    precision = max(cfg.spec.k, G.exponent)
    estimates = []
    for n in cfg.ns:
        tasks = [(cfg.spec, G, n, start, stop, cfg.measure, cfg.seed, precision,
                  settings.sur_cap_exponent)
                 for start, stop in _chunks(cfg.samples, chunk_size)]
        values: List[int] = []
        for chunk in _run_tasks(_moment_chunk, tasks, threads):
            values.extend(chunk)
        mean, stderr = mean_and_stderr(values)
        estimate = MomentEstimate(n, cfg.samples, mean, stderr)
        logger.info(f"n = {n}: E|Sur| = {mean:.4f} ± {stderr:.4f}")
        estimates.append(estimate)
    return estimates


@dataclass
class ExhaustiveResult:
    """Exact distribution of cok(P(X)) over all matrices of size n mod p^k."""
    spec: RingSpec
    n: int
    total: int
    counts: Dict[str, int]
    representatives: Dict[str, FiniteModule]
    saturated: List[str]
    direct_moments: Dict[str, Fraction] = field(default_factory=dict)

    def probability(self, label: str) -> Fraction:
        return Fraction(self.counts.get(label, 0), self.total)

    def moment(self, G: FiniteModule) -> Fraction:
        """Σ over types of Prob(type)·|Sur(type, G)|."""
        total = Fraction(0)
        cap = load_settings().sur_cap_exponent
        for label, count in self.counts.items():
            total += Fraction(count, self.total) * count_sur(self.representatives[label], G, cap=cap)
        return total

    def to_tally(self) -> Tally:
        """The exact counts as a one-block tally; theory holds the exact probabilities."""
        labels = sorted(self.counts, key=lambda x: (self.representatives[x].log_order, x))
        block = NBlock(self.n, self.total, dict(self.counts))
        return Tally(labels, {label: float(self.probability(label)) for label in labels}, [block])

    def to_dict(self) -> Dict[str, Any]:
        labels = sorted(self.counts, key=lambda x: (self.representatives[x].log_order, x))
        return {
            'ring': self.spec.to_dict(),
            'n': self.n,
            'total': self.total,
            'types': [{'type': label, 'count': self.counts[label],
                       'probability': str(self.probability(label)),
                       'saturated': label in self.saturated} for label in labels],
            'moments': {name: str(value) for name, value in sorted(self.direct_moments.items())},
        }


def exhaustive_distribution(spec: RingSpec, n: int,
                            moment_modules: Sequence[FiniteModule] = ()) -> ExhaustiveResult:
    """
    Enumerate every n x n matrix mod p^k.

    Types are partitions for square-free P̄ and exact isomorphism classes
    otherwise. Moments of the given modules are summed matrix by matrix,
    through the presentation of cok_R(X - t̄I_n).
    """
    p, k = spec.p, spec.k
    total = (p ** k) ** (n * n)
    if total > EXHAUSTIVE_LIMIT:
        raise TooLarge(f"{p}^{k * n * n} matrices exceed the enumeration limit 2^24")
    F = factor_ring(spec)
    cap = load_settings().sur_cap_exponent
    tests = [residue_field_module(spec, F, j) for j in range(F.l)]
    counts: Counter = Counter()
    reps: Dict[str, FiniteModule] = {}
    saturated = set()
    classes: List[Tuple[str, Tuple[int, ...], FiniteModule]] = []
    direct = {f"M{i + 1}": Fraction(0) for i in range(len(moment_modules))}

    for values in itertools.product(range(p ** k), repeat=n * n):
        X = MatrixZpk(p, k, np.array(values, dtype=np.int64).reshape(n, n))
        if F.squarefree:
            t = module_type(X, spec, F)
            label = t.label
            if label not in reps:
                reps[label] = cokernel_of_matrix(X, spec)
            if t.saturated:
                saturated.add(label)
        else:
            G = cokernel_of_matrix(X, spec)
            fp = fingerprint_of(G, tests)
            label = None
            for known, known_fp, rep in classes:
                if known_fp == fp and rep.log_order == G.log_order and is_isomorphic(G, rep, cap=cap):
                    label = known
                    break
            if label is None:
                label = f"M{len(classes) + 1}/{G.log_order}"
                classes.append((label, fp, G))
                reps[label] = G
                if any(e >= k for e in G.exponents):
                    saturated.add(label)
        counts[label] += 1
        if moment_modules:
            cok = present_cokernel(X, spec).module()
            for i, H in enumerate(moment_modules):
                direct[f"M{i + 1}"] += Fraction(count_sur(cok, H, cap=cap), total)

    logger.info(f"Enumerated {total} matrices of size {n}: {len(counts)} types")
    return ExhaustiveResult(spec, n, total, dict(counts), reps, sorted(saturated), direct)
