"""
Finite R-modules and the counting functions the limiting formula needs.

A finite R-module is stored by restriction of scalars: an abelian p-group
⊕ Z/p^{e_i} together with the matrix of t acting on column vectors of
coordinates. Every count (Hom, Sur, Aut, Ext¹) reduces to a linear system
over Z/p^kZ solved by Howell reduction.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import load_settings
from .errors import (
    CatalogTooLarge, DimensionMismatch, InternalError, InvalidModule,
    KViolation, NotSquarefree, TooLargeForBruteForce,
)
from .factorization import FactorData, factor_ring
from .linalg import (
    MatrixZpk, count_solutions, eval_poly_at_matrix, howell_form,
    smith_normal_form, span_log_size,
)
from .ring_core import RingSpec, companion_matrix, companion_of, mat_mul, poly_at_matrix, poly_mul, poly_trim

logger = logging.getLogger(__name__)

Partition = Tuple[int, ...]

# Direct enumeration of homomorphisms stops here.
BRUTE_FORCE_LIMIT = 2 ** 16

# Submodule lattices bigger than this are not enumerated.
MAX_SUBMODULES = 20000

MAX_CATALOG = 10000


@lru_cache(maxsize=256)
def factor_data_at(spec: RingSpec) -> FactorData:
    """Factorization with Hensel lifts at the precision of ``spec`` (cached)."""
    return factor_ring(spec)


@dataclass(frozen=True, eq=False)
class FiniteModule:
    """
    ⊕_i Z/p^{e_i} with t acting by ``t_action`` on column vectors.

    Entries of ``t_action`` are stored mod p^k of ``spec``; row i is only
    meaningful modulo p^{e_i}.
    """
    spec: RingSpec
    exponents: Tuple[int, ...]
    t_action: np.ndarray
    name: Optional[str] = None

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        object.__setattr__(self, 'exponents', exps)
        T = np.mod(np.array(self.t_action, dtype=object).reshape(len(exps), len(exps)), self.spec.modulus)
        object.__setattr__(self, 't_action', T)

    @property
    def m(self) -> int:
        return len(self.exponents)

    @property
    def log_order(self) -> int:
        return sum(self.exponents)

    @property
    def order(self) -> int:
        return self.spec.p ** self.log_order

    @property
    def exponent(self) -> int:
        """e with p^e the exponent of the group (0 for the zero module)."""
        return max(self.exponents, default=0)

    def is_zero(self) -> bool:
        return self.m == 0

    def relation_rows(self, k: Optional[int] = None) -> np.ndarray:
        """diag(p^{e_i}); as rows these span the relations of the group."""
        p = self.spec.p
        k = self.spec.k if k is None else k
        return np.diag([p ** e % p ** k for e in self.exponents]).astype(object).reshape(self.m, self.m)

    def validate(self) -> 'FiniteModule':
        """Check exponents, that t is well defined, and P(t) = 0."""
        p, k = self.spec.p, self.spec.k
        for e in self.exponents:
            if not 1 <= e <= k:
                raise InvalidModule(f"exponent {e} outside 1..{k}")
        T = self.t_action
        for r, er in enumerate(self.exponents):
            for c, ec in enumerate(self.exponents):
                if er > ec and int(T[r, c]) % p ** (er - ec) != 0:
                    raise InvalidModule(f"t_action[{r}][{c}] does not respect the orders of the generators")
        PT = poly_at_matrix(self.spec.poly, T.astype(object), self.spec.modulus)
        for r, er in enumerate(self.exponents):
            if any(int(x) % p ** er for x in PT[r, :]):
                raise InvalidModule("P(t) does not act as zero on the module")
        return self

    def at_precision(self, k: int) -> 'FiniteModule':
        """Same module over Z/p^k for any k at least its exponent."""
        if k < self.exponent:
            raise KViolation(f"cannot view a module of exponent p^{self.exponent} over Z/p^{k}")
        if k == self.spec.k:
            return self
        return FiniteModule(self.spec.with_k(k), self.exponents, self.t_action, self.name)

    def canonical_vector(self, y: Sequence[int]) -> Tuple[int, ...]:
        p = self.spec.p
        return tuple(int(x) % p ** e for x, e in zip(y, self.exponents))

    def to_dict(self) -> Dict:
        return {
            'abelian': list(self.exponents),
            't_action': [[int(x) for x in row] for row in self.t_action],
        }

    @classmethod
    def from_dict(cls, spec: RingSpec, data: Dict, name: Optional[str] = None) -> 'FiniteModule':
        """Parse ``{"abelian": [e_1, ...], "t_action": [[...], ...]}`` and validate it."""
        try:
            exps = [int(e) for e in data['abelian']]
            T = data.get('t_action', [])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidModule(f"module JSON needs 'abelian' and 't_action': {e}")
        m = len(exps)
        arr = np.array(T, dtype=object)
        if m == 0:
            arr = np.zeros((0, 0), dtype=object)
        if arr.shape != (m, m):
            raise InvalidModule(f"t_action must be {m}x{m}, got shape {arr.shape}")
        needed = max(exps, default=0) + 1
        work = spec if spec.k >= needed else spec.with_k(needed)
        return cls(work, tuple(exps), arr, name or data.get('name')).validate()


def zero_module(spec: RingSpec) -> FiniteModule:
    return FiniteModule(spec, (), np.zeros((0, 0), dtype=object), name='0')


def direct_sum(*modules: FiniteModule) -> FiniteModule:
    if not modules:
        raise InvalidModule("direct sum of nothing")
    k = max(M.spec.k for M in modules)
    lifted = [M.at_precision(k) for M in modules]
    _check_same_ring(*lifted)
    exps = tuple(e for M in lifted for e in M.exponents)
    T = np.zeros((len(exps), len(exps)), dtype=object)
    offset = 0
    for M in lifted:
        T[offset:offset + M.m, offset:offset + M.m] = M.t_action
        offset += M.m
    return FiniteModule(lifted[0].spec, exps, T)


def _check_same_ring(*modules: FiniteModule):
    first = modules[0].spec
    for M in modules[1:]:
        if (M.spec.p, M.spec.poly_mod_p, M.spec.lift) != (first.p, first.poly_mod_p, first.lift):
            raise DimensionMismatch("modules are over different rings")


def cokernel_module(spec: RingSpec, relations: np.ndarray, t_action: np.ndarray,
                    name: Optional[str] = None) -> FiniteModule:
    """
    (Z/p^k)^m / (column span of ``relations``) with t acting by ``t_action``.

    The Smith transform U moves to coordinates where the group is
    ⊕ Z/p^{v_i}; t then acts by U·T·U⁻¹ on the coordinates with v_i > 0.
    """
    p, k = spec.p, spec.k
    mod = spec.modulus
    m = t_action.shape[0]
    if m == 0:
        return zero_module(spec)
    rel = np.array(relations, dtype=object)
    rel = np.zeros((m, 1), dtype=object) if rel.size == 0 else rel.reshape(m, -1)
    snf = smith_normal_form(MatrixZpk(p, k, rel), transforms=True)
    U = snf.U.astype(object)
    U_inv = snf.U_inv.astype(object)
    T_new = np.mod(U.dot(np.array(t_action, dtype=object)).dot(U_inv), mod)
    keep = [i for i, v in enumerate(snf.valuations) if v > 0]
    exps = tuple(snf.valuations[i] for i in keep)
    T_keep = T_new[np.ix_(keep, keep)] if keep else np.zeros((0, 0), dtype=object)
    for r, e in enumerate(exps):
        T_keep[r, :] = np.mod(T_keep[r, :], p ** e)
    return FiniteModule(spec, exps, T_keep, name)


@dataclass(frozen=True, eq=False)
class ModulePresentation:
    """
    An R-module given by ``ngens`` generators and relations.

    ``relations`` is the (d·ngens) x r matrix over Z/p^kZ whose columns are
    the relations written in the Z/p^k-basis t^a·g_i (index i·d + a).
    """
    spec: RingSpec
    ngens: int
    relations: np.ndarray
    t_action: Optional[np.ndarray] = None

    def action(self) -> np.ndarray:
        if self.t_action is not None:
            return np.array(self.t_action, dtype=object)
        C = companion_matrix(self.spec).astype(object)
        return np.kron(np.eye(self.ngens, dtype=object), C)

    def module(self) -> FiniteModule:
        return cokernel_module(self.spec, self.relations, self.action())


def present_cokernel(X: MatrixZpk, spec: RingSpec) -> ModulePresentation:
    """
    Presentation of cok_R(X - t̄·I_n), isomorphic to cok(P(X)) with t acting as X.

    Over Z/p^k the matrix is X⊗I_d - I_n⊗C with C the companion matrix of P.
    """
    if X.rows != X.cols:
        raise DimensionMismatch(f"X must be square, got {X.rows}x{X.cols}")
    if X.p != spec.p:
        raise DimensionMismatch("matrix and ring use different primes")
    n, d = X.rows, spec.d
    Xo = np.mod(X.entries.astype(object), spec.modulus)
    C = companion_matrix(spec).astype(object)
    rel = np.mod(np.kron(Xo, np.eye(d, dtype=object)) - np.kron(np.eye(n, dtype=object), C), spec.modulus)
    return ModulePresentation(spec, n, rel)


def free_module(spec: RingSpec, rank: int = 1) -> FiniteModule:
    """R^rank as a finite module."""
    C = companion_matrix(spec).astype(object)
    T = np.kron(np.eye(rank, dtype=object), C)
    return FiniteModule(spec, (spec.k,) * (spec.d * rank), T)


def cokernel_of_matrix(X: MatrixZpk, spec: RingSpec) -> FiniteModule:
    """cok(P(X)) with t acting as X."""
    PX = eval_poly_at_matrix(spec.poly, X)
    return cokernel_module(spec, PX.entries, X.entries)


def _as_module(M: Union[FiniteModule, ModulePresentation]) -> FiniteModule:
    return M.module() if isinstance(M, ModulePresentation) else M


# ---------------------------------------------------------------------------
# Module algebra
# ---------------------------------------------------------------------------

def quotient_by_endomorphisms(G: FiniteModule, maps: Sequence[np.ndarray]) -> FiniteModule:
    """G / (E_1(G) + E_2(G) + ...) for R-linear endomorphisms E_i."""
    if G.is_zero():
        return G
    blocks = [G.relation_rows().T] + [np.mod(np.array(E, dtype=object), G.spec.modulus) for E in maps]
    return cokernel_module(G.spec, np.concatenate(blocks, axis=1), G.t_action)


def quotient_by_endomorphism(G: FiniteModule, E: np.ndarray) -> FiniteModule:
    return quotient_by_endomorphisms(G, [E])


def mod_p_quotient(G: FiniteModule) -> FiniteModule:
    """G / pG."""
    return quotient_by_endomorphism(G, np.eye(G.m, dtype=object) * G.spec.p)


def top_quotient(G: FiniteModule, j: int, F: FactorData) -> FiniteModule:
    """G / (p, P̄_j(t))G, an F_{p^{d_j}}-vector space."""
    if G.is_zero():
        return G
    Pj = F.factors[j].poly
    E = poly_at_matrix(Pj, G.t_action, G.spec.modulus)
    return quotient_by_endomorphisms(G, [np.eye(G.m, dtype=object) * G.spec.p, E])


def crt_decompose(M: Union[FiniteModule, ModulePresentation], F: FactorData) -> List[FiniteModule]:
    """
    Split G into its components G_j = G / Q_j(t)G.

    Q_j kills G_j and acts invertibly on every other component, so the
    quotient is exactly the j-th CRT summand.
    """
    G = _as_module(M)
    if F.l == 1:
        return [G]
    lifts = factor_data_at(G.spec).lifts
    return [quotient_by_endomorphism(G, poly_at_matrix(Q, G.t_action, G.spec.modulus)) for Q in lifts]


# ---------------------------------------------------------------------------
# Module types and catalogs
# ---------------------------------------------------------------------------

def format_partition(lam: Partition) -> str:
    return "(" + ",".join(str(x) for x in lam) + ")"


def format_type(partitions: Sequence[Partition]) -> str:
    """'0' for the zero module, else per-factor partitions joined by '|'."""
    if all(len(lam) == 0 for lam in partitions):
        return "0"
    return "|".join(format_partition(lam) for lam in partitions)


def parse_type(label: str, l: int) -> Tuple[Partition, ...]:
    if label == "0":
        return tuple(() for _ in range(l))
    out = []
    for part in label.split("|"):
        inner = part.strip().strip("()")
        out.append(tuple(int(x) for x in inner.split(",") if x.strip()))
    if len(out) != l:
        raise InvalidModule(f"type {label!r} has {len(out)} factors, expected {l}")
    return tuple(out)


@dataclass(frozen=True)
class ModuleType:
    """
    Isomorphism type of a finite R-module.

    Square-free P̄: per-factor partitions (the module is ⊕_j ⊕_i R_j/(p^{λ_i})).
    Otherwise a fingerprint of |Hom| counts against a test set, plus a
    representative module used to confirm matches.
    """
    label: str
    log_order: int
    partitions: Optional[Tuple[Partition, ...]] = None
    fingerprint: Optional[Tuple[int, ...]] = None
    saturated: bool = False
    representative: Optional[FiniteModule] = field(default=None, compare=False, hash=False, repr=False)

    @property
    def is_zero(self) -> bool:
        return self.log_order == 0

    def abelian_type(self, F: FactorData) -> Partition:
        """Partition of G as an abelian group (each R_j-part repeated d_j times)."""
        if self.partitions is None:
            return tuple(sorted(self.representative.exponents, reverse=True))
        parts = []
        for lam, factor in zip(self.partitions, F.factors):
            for a in lam:
                parts.extend([a] * factor.d)
        return tuple(sorted(parts, reverse=True))


@dataclass
class ModuleCatalog:
    """Module types in canonical order, with the test set used for fingerprints."""
    spec: RingSpec
    factors: FactorData
    types: List[ModuleType]
    max_size: Optional[int] = None
    test_modules: List[FiniteModule] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.types)

    def labels(self) -> List[str]:
        return [t.label for t in self.types]

    def by_label(self, label: str) -> ModuleType:
        for t in self.types:
            if t.label == label:
                return t
        raise KeyError(label)

def partitions_with_max_part(weight: int, max_part: int) -> List[Partition]:
    """All partitions of ``weight`` with parts at most ``max_part``, largest part first."""
    if weight == 0:
        return [()]
    out = []
    for first in range(min(weight, max_part), 0, -1):
        for rest in partitions_with_max_part(weight - first, first):
            out.append((first,) + rest)
    return out


def _type_sort_key(partitions: Sequence[Partition], F: FactorData):
    log_order = sum(f.d * sum(lam) for lam, f in zip(partitions, F.factors))
    return (log_order, tuple(tuple(-a for a in lam) for lam in partitions))


def residue_field_module(spec: RingSpec, F: FactorData, j: int) -> FiniteModule:
    """F_{p^{d_j}} = F_p[t]/(P̄_j) as an R-module."""
    factor = F.factors[j]
    C = companion_of(factor.poly, spec.p, dtype=object)
    return FiniteModule(spec, (1,) * factor.d, C, name=f"F_{spec.p}^{factor.d}[{j}]")


def cyclic_module(spec: RingSpec, Q: Sequence[int], a: int) -> FiniteModule:
    """(Z/p^a)[t]/(Q) for a monic divisor Q of P."""
    Qt = poly_trim(Q, spec.modulus)
    C = companion_of(Qt, spec.modulus, dtype=object)
    D = len(Qt) - 1
    return FiniteModule(spec, (a,) * D, np.mod(C, spec.p ** a))


def module_from_partitions(spec: RingSpec, partitions: Sequence[Partition]) -> FiniteModule:
    """⊕_j ⊕_i R_j/(p^{λ^(j)_i}); ``spec`` must have k above every part."""
    F = factor_data_at(spec)
    pieces = []
    for lam, Q in zip(partitions, F.lifts):
        for a in lam:
            pieces.append(cyclic_module(spec, Q, a))
    if not pieces:
        return zero_module(spec)
    return direct_sum(*pieces)


def enumerate_catalog(spec: RingSpec, F: FactorData, max_size: int) -> ModuleCatalog:
    """
    Every module type with |G| <= max_size and all parts <= k.

    Representatives are built over Z/p^{k+1} so Ext¹ needs no precision raise.
    """
    if not F.squarefree:
        raise NotSquarefree(
            f"P̄ = {spec.poly_mod_p} is not square-free; supply explicit modules (--module)")
    if max_size < 1:
        raise CatalogTooLarge(f"size bound must be at least 1, got {max_size}")
    p, k = spec.p, spec.k
    bound = 0
    while p ** (bound + 1) <= max_size:
        bound += 1

    per_factor: List[List[Partition]] = []
    for factor in F.factors:
        options = []
        for w in range(bound // factor.d + 1):
            options.extend(partitions_with_max_part(w, k))
        per_factor.append(options)

    combos = []
    for combo in itertools.product(*per_factor):
        weight = sum(f.d * sum(lam) for lam, f in zip(combo, F.factors))
        if weight <= bound:
            combos.append(combo)
            if len(combos) > MAX_CATALOG:
                raise CatalogTooLarge(f"more than {MAX_CATALOG} types below size {max_size}")
    combos.sort(key=lambda c: _type_sort_key(c, F))

    rep_spec = spec.with_k(k + 1)
    types = []
    for combo in combos:
        log_order = sum(f.d * sum(lam) for lam, f in zip(combo, F.factors))
        types.append(ModuleType(
            label=format_type(combo),
            log_order=log_order,
            partitions=tuple(combo),
            representative=module_from_partitions(rep_spec, combo),
        ))
    logger.info(f"Catalog for P = {list(spec.lift)}, p = {p}, |G| <= {max_size}: {len(types)} types")
    return ModuleCatalog(spec, F, types, max_size=max_size)


def catalog_from_modules(spec: RingSpec, F: FactorData, modules: Sequence[FiniteModule]) -> ModuleCatalog:
    """
    Catalog of user-supplied modules, for any P.

    Types are fingerprinted by |Hom(G, H)| over the test set made of the
    residue fields and the supplied modules themselves.
    """
    tests = [residue_field_module(spec, F, j) for j in range(F.l)] + list(modules)
    types: List[ModuleType] = []
    for index, G in enumerate(modules):
        if F.squarefree:
            t = classify_module(G, F)
            label = t.label
            fingerprint = None
            partitions = t.partitions
        else:
            label = G.name or f"M{index + 1}"
            fingerprint = fingerprint_of(G, tests)
            partitions = None
        for other in types:
            if other.log_order == G.log_order and is_isomorphic(G, other.representative):
                raise InvalidModule(f"modules {other.label} and {label} are isomorphic")
            if fingerprint is not None and other.fingerprint == fingerprint:
                logger.warning(f"Fingerprint collision between {other.label} and {label}")
        types.append(ModuleType(label=label, log_order=G.log_order, partitions=partitions,
                                fingerprint=fingerprint, representative=G))
    return ModuleCatalog(spec, F, types, test_modules=tests)


def fingerprint_of(G: FiniteModule, tests: Sequence[FiniteModule]) -> Tuple[int, ...]:
    return tuple(count_hom(G, H) for H in tests)


def classify_module(G: FiniteModule, F: FactorData) -> ModuleType:
    """Type of an explicit module over square-free P̄, from its CRT components."""
    if not F.squarefree:
        raise NotSquarefree("partition types exist only for square-free P̄")
    comps = crt_decompose(G, F)
    partitions = []
    for comp, factor in zip(comps, F.factors):
        partitions.append(_parts_from_valuations(comp.exponents, factor.d))
    return ModuleType(format_type(partitions), G.log_order, tuple(partitions), representative=G)


def _parts_from_valuations(valuations: Iterable[int], d: int) -> Partition:
    counts: Dict[int, int] = {}
    for v in valuations:
        if v > 0:
            counts[v] = counts.get(v, 0) + 1
    parts = []
    for v, c in counts.items():
        if c % d != 0:
            raise InternalError(f"valuation {v} occurs {c} times, not a multiple of d = {d}")
        parts.extend([v] * (c // d))
    return tuple(sorted(parts, reverse=True))


def module_type(X: MatrixZpk, spec: RingSpec, F: FactorData,
                catalog: Optional[ModuleCatalog] = None) -> ModuleType:
    """
    Type of cok(P(X)) as an R-module.

    Square-free case: λ^(j) comes from the Smith valuations of Q_j(X). A
    valuation equal to the working k marks the type as saturated. Otherwise
    the cokernel is fingerprinted against the catalog's test set and matched
    to a catalog entry when one is isomorphic.
    """
    k = X.k
    work = spec if spec.k == k else spec.with_k(k)
    if F.squarefree:
        lifts = factor_data_at(work).lifts
        partitions = []
        saturated = False
        for Q, factor in zip(lifts, F.factors):
            vals = smith_normal_form(eval_poly_at_matrix(Q, X)).valuations
            saturated = saturated or any(v >= k for v in vals)
            partitions.append(_parts_from_valuations(vals, factor.d))
        log_order = sum(f.d * sum(lam) for lam, f in zip(partitions, F.factors))
        return ModuleType(format_type(partitions), log_order, tuple(partitions), saturated=saturated)

    G = cokernel_of_matrix(X, work)
    saturated = any(e >= k for e in G.exponents)
    tests = catalog.test_modules if catalog is not None else \
        [residue_field_module(work, F, j) for j in range(F.l)]
    fingerprint = fingerprint_of(G, tests)
    if catalog is not None and not saturated:
        for t in catalog.types:
            if t.log_order == G.log_order and t.fingerprint == fingerprint \
                    and is_isomorphic(G, t.representative):
                return ModuleType(t.label, t.log_order, fingerprint=fingerprint, representative=G)
    label = "fp" + "-".join(str(x) for x in fingerprint) + f"/{G.log_order}"
    return ModuleType(label, G.log_order, fingerprint=fingerprint, saturated=saturated, representative=G)


# ---------------------------------------------------------------------------
# Hom, Sur, Aut
# ---------------------------------------------------------------------------

def _common_precision(M: FiniteModule, G: FiniteModule) -> Tuple[FiniteModule, FiniteModule]:
    _check_same_ring(M, G)
    k = max(M.spec.k, G.spec.k)
    return M.at_precision(k), G.at_precision(k)


def _hom_system(M: FiniteModule, G: FiniteModule, constraint: Optional[np.ndarray] = None):
    """
    Linear system for the images y_1..y_s of M's generators.

    Unknown x = (y_1, ..., y_s) as one row vector. Columns encode
    t-linearity Σ_r T_M[r,i] y_r = T_G y_i and p^{a_i} y_i = 0 in G, plus
    y_i mod p in the kernel of ``constraint`` when given.
    """
    p, k = G.spec.p, G.spec.k
    s, m = M.m, G.m
    TM = M.t_action.astype(object)
    TG = G.t_action.astype(object)
    I_m = np.eye(m, dtype=object)
    I_s = np.eye(s, dtype=object)
    linear = np.kron(TM, I_m) - np.kron(I_s, TG.T)
    annihilate = np.kron(np.diag([p ** a for a in M.exponents]).astype(object).reshape(s, s), I_m)
    blocks = [linear, annihilate]
    G_rel = [p ** e % p ** k for e in G.exponents]
    rel_diag = G_rel * s * 2
    if constraint is not None and constraint.shape[1] > 0:
        blocks.append(np.kron(I_s, np.array(constraint, dtype=object)))
        rel_diag += [p] * (s * constraint.shape[1])
    A = np.mod(np.concatenate(blocks, axis=1), p ** k)
    relations = np.diag(rel_diag).astype(object).reshape(len(rel_diag), len(rel_diag))
    unknown_relations = np.diag(G_rel * s).astype(object).reshape(s * m, s * m)
    return MatrixZpk(p, k, A), relations, unknown_relations


def count_hom(M: Union[FiniteModule, ModulePresentation], G: Union[FiniteModule, ModulePresentation],
              constraint: Optional[np.ndarray] = None) -> int:
    """
    |Hom_R(M, G)|.

    Args:
        M: source module
        G: target module
        constraint: optional m x c matrix; only homs whose images y satisfy
            y^T·constraint ≡ 0 (mod p) are counted

    Returns:
        Exact number of R-linear maps
    """
    M, G = _common_precision(_as_module(M), _as_module(G))
    if M.is_zero() or G.is_zero():
        return 1
    A, rel, unknown_rel = _hom_system(M, G, constraint)
    return count_solutions(A, rel, unknown_rel)


def enumerate_homs(M: FiniteModule, G: FiniteModule, limit: int = BRUTE_FORCE_LIMIT) -> List[Tuple[Tuple[int, ...], ...]]:
    """
    Every hom M -> G as the tuple of images of M's generators.

    Coordinate c of an image is scaled by p^{k - e_c}, which kills exactly
    the multiples of p^{e_c}. Elements of the Howell-form span of the scaled
    solutions are Σ c_i h_i with 0 <= c_i < p^{k - v_i}, each exactly once.
    """
    M, G = _common_precision(M, G)
    if M.is_zero() or G.is_zero():
        return [tuple(tuple(0 for _ in range(G.m)) for _ in range(M.m))]
    total = count_hom(M, G)
    if total > limit:
        raise TooLargeForBruteForce(f"{total} homomorphisms exceed the enumeration limit {limit}")
    p, k = G.spec.p, G.spec.k
    s, m = M.m, G.m
    A, rel, _ = _hom_system(M, G)
    stacked = MatrixZpk(p, k, np.concatenate([A.entries.astype(object), rel], axis=0))
    kernel = howell_form(stacked).kernel[:, :s * m].astype(object)
    scale = np.array([p ** (k - e) for e in G.exponents] * s, dtype=object)
    scaled = np.mod(kernel * scale, p ** k)
    basis = howell_form(MatrixZpk(p, k, scaled), with_kernel=False) if scaled.shape[0] else None
    seen = set()
    if basis is None or basis.rows.shape[0] == 0:
        seen.add(tuple(tuple(0 for _ in range(m)) for _ in range(s)))
    else:
        rows = basis.rows.astype(object)
        ranges = [range(p ** (k - v)) for _, v in basis.pivots]
        for coeffs in itertools.product(*ranges):
            vec = np.mod(np.array(coeffs, dtype=object).dot(rows), p ** k) // scale
            images = tuple(G.canonical_vector(vec[i * m:(i + 1) * m]) for i in range(s))
            seen.add(images)
    if len(seen) != total:
        raise InternalError(f"enumerated {len(seen)} homs, expected {total}")
    return sorted(seen)


def image_log_order(G: FiniteModule, images: Sequence[Sequence[int]]) -> int:
    """log_p of the subgroup of G generated by ``images``."""
    if G.is_zero():
        return 0
    p, k = G.spec.p, G.spec.k
    rows = np.array([list(y) for y in images], dtype=object).reshape(len(images), G.m)
    D = G.relation_rows()
    total = span_log_size(np.concatenate([rows, D], axis=0), p, k)
    return total - span_log_size(D, p, k)


class _TopLattice:
    """
    R-submodules W of G/JG, J the Jacobson radical of R, kept as F_p-subspaces
    Ŵ ⊇ JG/pG of V = G/pG (canonical row-reduced bases).
    """

    def __init__(self, G: FiniteModule, F: FactorData):
        p = G.spec.p
        self.p = p
        self.m = G.m
        self.Tt = np.mod(G.t_action.astype(object), p).T
        radical = (1,)
        for factor in F.factors:
            radical = poly_mul(radical, factor.poly, p)
        E = poly_at_matrix(radical, np.mod(G.t_action.astype(object), p), p)
        self.base = self.closure(E.T)
        self.factor_maps = [
            (factor.d, poly_at_matrix(factor.poly, np.mod(G.t_action.astype(object), p), p).T)
            for factor in F.factors
        ]
        self.full_dims = [self._component_dim(np.eye(self.m, dtype=object), Pt) for _, Pt in self.factor_maps]

    def span(self, rows: np.ndarray) -> np.ndarray:
        rows = np.array(rows, dtype=object).reshape(-1, self.m)
        return howell_form(MatrixZpk(self.p, 1, rows), with_kernel=False).rows.astype(object)

    def closure(self, rows: np.ndarray) -> np.ndarray:
        span = self.span(rows)
        while True:
            grown = self.span(np.concatenate([span, mat_mul(span, self.Tt, self.p)], axis=0))
            if grown.shape[0] == span.shape[0]:
                return span
            span = grown

    def _component_dim(self, W: np.ndarray, Pt: np.ndarray) -> int:
        image = mat_mul(W, Pt, self.p) if W.shape[0] else W
        return self.span(W).shape[0] - self.span(np.concatenate([image, self.base], axis=0)).shape[0]

    def mobius(self, W: np.ndarray) -> int:
        """μ(W, top) in the submodule lattice of a semisimple module."""
        mu = 1
        for (d, Pt), full in zip(self.factor_maps, self.full_dims):
            codim = (full - self._component_dim(W, Pt)) // d
            q = self.p ** d
            mu *= (-1) ** codim * q ** (codim * (codim - 1) // 2)
        return mu

    def annihilator(self, W: np.ndarray) -> np.ndarray:
        """m x c matrix C with {y : y^T C ≡ 0 mod p} = Ŵ."""
        if W.shape[0] == 0:
            return np.eye(self.m, dtype=object)
        if W.shape[0] == self.m:
            return np.zeros((self.m, 0), dtype=object)
        kernel = howell_form(MatrixZpk(self.p, 1, W.T)).kernel
        return np.array(kernel, dtype=object).T

    def enumerate(self, limit: int = MAX_SUBMODULES) -> List[np.ndarray]:
        start = self.base
        seen = {self._key(start): start}
        queue = [start]
        while queue:
            W = queue.pop()
            pivots = {int(np.nonzero(row)[0][0]) for row in W}
            free = [c for c in range(self.m) if c not in pivots]
            for coeffs in itertools.product(range(self.p), repeat=len(free)):
                if not any(coeffs):
                    continue
                v = np.zeros((1, self.m), dtype=object)
                v[0, free] = coeffs
                grown = self.closure(np.concatenate([W, v], axis=0))
                key = self._key(grown)
                if key not in seen:
                    seen[key] = grown
                    queue.append(grown)
                    if len(seen) > limit:
                        raise CatalogTooLarge(f"more than {limit} submodules to enumerate")
        return list(seen.values())

    @staticmethod
    def _key(W: np.ndarray):
        return tuple(tuple(int(x) for x in row) for row in W)


_lattice_cache: Dict[tuple, Tuple[List[int], List[np.ndarray]]] = {}


def _lattice_for(G: FiniteModule, F: FactorData) -> Tuple[List[int], List[np.ndarray]]:
    """Möbius values and image constraints for every submodule above JG (memoized per module)."""
    key = _module_key(G)
    if key not in _lattice_cache:
        lattice = _TopLattice(G, F)
        subs = lattice.enumerate()
        logger.debug(f"{len(subs)} submodules above the radical of a module of order p^{G.log_order}")
        _lattice_cache[key] = ([lattice.mobius(W) for W in subs], [lattice.annihilator(W) for W in subs])
    return _lattice_cache[key]


def _module_key(G: FiniteModule):
    return (G.spec, G.exponents, tuple(int(x) for x in G.t_action.flatten()))


def count_sur(M: Union[FiniteModule, ModulePresentation], G: Union[FiniteModule, ModulePresentation],
              method: str = 'mobius', cap: Optional[int] = None) -> int:
    """
    |Sur_R(M, G)|.

    ``mobius`` sums μ(W)·|Hom(M, H_W)| over submodules H_W ⊇ JG; the Möbius
    function of the full submodule lattice vanishes everywhere else.
    ``direct`` enumerates every hom and keeps the surjective ones.
    """
    M, G = _common_precision(_as_module(M), _as_module(G))
    if G.is_zero():
        return 1
    if M.is_zero():
        return 0
    if cap is None:
        cap = load_settings().sur_cap_exponent
    if G.log_order > cap:
        raise CatalogTooLarge(f"|G| = p^{G.log_order} is above the submodule cap p^{cap}")
    if method == 'direct':
        full = G.log_order
        return sum(1 for images in enumerate_homs(M, G) if image_log_order(G, images) == full)
    if method != 'mobius':
        raise ValueError(f"unknown method {method!r}")
    F = factor_data_at(G.spec)
    mus, constraints = _lattice_for(G, F)
    total = 0
    for mu, C in zip(mus, constraints):
        total += mu * count_hom(M, G, constraint=C)
    if total < 0:
        raise InternalError(f"negative surjection count {total}")
    return total


def is_isomorphic(M: FiniteModule, G: FiniteModule, cap: Optional[int] = None) -> bool:
    """Equal orders and a surjection M -> G."""
    M, G = _common_precision(M, G)
    if M.log_order != G.log_order:
        return False
    if sorted(M.exponents) != sorted(G.exponents):
        return False
    if G.is_zero():
        return True
    return count_sur(M, G, cap=cap) > 0


def aut_formula(lam: Partition, q: int) -> int:
    """
    |Aut| of ⊕ O/(π^{λ_i}) over a DVR O with residue field of size q:
    q^{Σ (λ'_i)^2} · ∏_parts ∏_{s=1}^{mult} (1 - q^{-s}).
    """
    if not lam:
        return 1
    conj = [sum(1 for a in lam if a >= i) for i in range(1, max(lam) + 1)]
    exponent = sum(c * c for c in conj)
    numerator = q ** exponent
    mults: Dict[int, int] = {}
    for a in lam:
        mults[a] = mults.get(a, 0) + 1
    denominator_power = 0
    factor = 1
    for c in mults.values():
        for s in range(1, c + 1):
            factor *= q ** s - 1
            denominator_power += s
    value = numerator * factor
    if value % (q ** denominator_power) != 0:
        raise InternalError(f"automorphism count of {lam} over q = {q} is not an integer")
    return value // q ** denominator_power


def count_aut(G: Union[ModuleType, FiniteModule], F: Optional[FactorData] = None) -> int:
    """
    |Aut_R(G)|.

    Partition types use the closed formula per factor (q = p^{d_j}); explicit
    modules are counted by enumerating endomorphisms and keeping bijections.
    """
    if isinstance(G, ModuleType) and G.partitions is not None:
        if F is None:
            raise DimensionMismatch("factor data needed for a partition type")
        value = 1
        for lam, factor in zip(G.partitions, F.factors):
            value *= aut_formula(lam, F.p ** factor.d)
        return value
    module = G.representative if isinstance(G, ModuleType) else G
    if module is None:
        raise TooLargeForBruteForce(f"type {G.label} has no representative module")
    if module.is_zero():
        return 1
    full = module.log_order
    return sum(1 for images in enumerate_homs(module, module) if image_log_order(module, images) == full)


# ---------------------------------------------------------------------------
# Hom into residue fields and Ext¹
# ---------------------------------------------------------------------------

def hom_to_residue_field_size(G: FiniteModule, j: int, F: Optional[FactorData] = None) -> int:
    """|Hom_R(G, F_{p^{d_j}})| = |G_j / m_j G_j| = p^{d_j s_j}."""
    F = F or factor_data_at(G.spec)
    return G.spec.p ** top_quotient(G, j, F).log_order


def ensure_precision(G: FiniteModule, auto_raise: bool = True) -> FiniteModule:
    """View G over a k with p^{k-1}G = 0."""
    needed = G.exponent + 1
    if G.spec.k >= needed:
        return G
    if not auto_raise:
        raise KViolation(f"p^{G.spec.k - 1}G != 0; need k >= {needed}")
    logger.info(f"Raising working precision from k = {G.spec.k} to k = {needed}")
    return G.at_precision(needed)


@dataclass(frozen=True)
class ExtComputation:
    """Intermediate data of the Ext¹ computation for one factor."""
    s: int
    r: int
    dim_A_mod_p: int
    hom_size: int
    ext_size: int


def ext1_computation(G: FiniteModule, j: int, auto_raise: bool = True) -> ExtComputation:
    """
    |Ext¹_{Z_p[t]/(P)}(G, F_{p^{d_j}})| through the first syzygy.

    Choose a minimal surjection R_j^s -> G_j, let A be its kernel, then
    |Ext¹| = |A/(p, P̄_j)A| · p^{-d_j s} · |Hom(G, F_{p^{d_j}})|.
    """
    G = ensure_precision(G, auto_raise)
    spec = G.spec
    p, k = spec.p, spec.k
    F = factor_data_at(spec)
    factor = F.factors[j]
    d, mult = factor.d, factor.m
    hom = hom_to_residue_field_size(G, j, F)
    Gj = crt_decompose(G, F)[j]
    if Gj.is_zero():
        return ExtComputation(0, 0, 0, 1, 1)

    gens = _minimal_generators(Gj, factor.poly)
    s = len(gens)
    if p ** (d * s) != hom:
        raise InternalError(f"{s} generators but |Hom| = {hom}")

    Q = F.lifts[j]
    D = len(Q) - 1
    T = Gj.t_action.astype(object)
    columns = []
    for g in gens:
        v = np.array(g, dtype=object)
        for _ in range(D):
            columns.append(v)
            v = np.mod(T.dot(v), p ** k)
    Phi = np.array(columns, dtype=object).reshape(s * D, Gj.m)
    stacked = MatrixZpk(p, k, np.concatenate([Phi, Gj.relation_rows()], axis=0))
    A = howell_form(stacked).kernel[:, :s * D].astype(object)

    C = np.kron(np.eye(s, dtype=object), companion_of(Q, p ** k, dtype=object))
    Pj_at_C = poly_at_matrix(factor.poly, C, p ** k)
    log_A = span_log_size(A, p, k)
    dim_mod_p = log_A - span_log_size(np.mod(A * p, p ** k), p, k)
    if dim_mod_p != s * mult * d:
        raise InternalError(f"dim A/pA = {dim_mod_p}, expected s*m*d = {s * mult * d}")
    J_A = np.concatenate([np.mod(A * p, p ** k), mat_mul(A, Pj_at_C.T, p ** k)], axis=0)
    top_dim = log_A - span_log_size(J_A, p, k)
    ext = p ** top_dim * hom // p ** (d * s)
    return ExtComputation(s=s, r=top_dim // d, dim_A_mod_p=dim_mod_p, hom_size=hom, ext_size=ext)


def ext1_size(G: FiniteModule, j: int, auto_raise: bool = True) -> int:
    return ext1_computation(G, j, auto_raise).ext_size


def _minimal_generators(Gj: FiniteModule, Pj: Sequence[int]) -> List[Tuple[int, ...]]:
    """
    Coordinate vectors of G_j whose images span G_j/(p, P̄_j)G_j over F_q.

    Each added generator raises the F_p-dimension of the covered part of
    the top by exactly d_j.
    """
    p = Gj.spec.p
    m = Gj.m
    Tp = np.mod(Gj.t_action.astype(object), p)
    E = poly_at_matrix(Pj, Tp, p).T
    lattice_rows = np.array(E, dtype=object).reshape(-1, m)

    def span(rows):
        return howell_form(MatrixZpk(p, 1, np.array(rows, dtype=object).reshape(-1, m)), with_kernel=False).rows

    def closure(rows):
        cur = span(rows)
        while True:
            grown = span(np.concatenate([cur, mat_mul(cur, Tp.T, p)], axis=0))
            if grown.shape[0] == cur.shape[0]:
                return cur
            cur = grown

    covered = closure(lattice_rows)
    gens = []
    for c in range(m):
        if covered.shape[0] == m:
            break
        e = np.zeros((1, m), dtype=object)
        e[0, c] = 1
        grown = closure(np.concatenate([covered, e], axis=0))
        if grown.shape[0] > covered.shape[0]:
            gens.append(tuple(int(x) for x in e[0]))
            covered = grown
    return gens
