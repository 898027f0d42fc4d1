"""
Factorization of P̄ over F_p and Hensel lifting to Z/p^kZ.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidRingSpec, NotCoprime
from .ring_core import (
    Poly, RingSpec, format_poly, poly_add, poly_degree, poly_derivative,
    poly_divmod, poly_gcd, poly_monic, poly_mul, poly_powmod, poly_sub,
    poly_trim, poly_xgcd,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240601

ONE: Poly = (1,)
T: Poly = (0, 1)


@dataclass(frozen=True)
class IrreducibleFactor:
    """One factor P̄_j^{m_j} of P̄ with d_j = deg P̄_j."""
    poly: Poly
    m: int

    @property
    def d(self) -> int:
        return len(self.poly) - 1

    def to_dict(self) -> Dict:
        return {'poly': format_poly(self.poly), 'm': self.m, 'd': self.d}


@dataclass(frozen=True)
class FactorData:
    """Factorization of P̄ over F_p, with Hensel lifts Q_j once lifted."""
    p: int
    factors: Tuple[IrreducibleFactor, ...]
    lifts: Tuple[Poly, ...] = field(default=())
    k: Optional[int] = None

    @property
    def squarefree(self) -> bool:
        return all(f.m == 1 for f in self.factors)

    @property
    def l(self) -> int:
        return len(self.factors)

    def powers(self) -> List[Poly]:
        """F_j = P̄_j^{m_j} over F_p."""
        out = []
        for f in self.factors:
            acc = ONE
            for _ in range(f.m):
                acc = poly_mul(acc, f.poly, self.p)
            out.append(acc)
        return out

    def to_dict(self) -> Dict:
        return {
            'factors': [f.to_dict() for f in self.factors],
            'lifts': [format_poly(q) for q in self.lifts],
        }


def _exact_div(a: Poly, b: Poly, modulus: int) -> Poly:
    q, r = poly_divmod(a, b, modulus)
    if r:
        raise InvalidRingSpec(f"{format_poly(b)} does not divide {format_poly(a)}")
    return q


def _pth_root(f: Poly, p: int) -> Poly:
    """Over F_p a^p = a, so the p-th root keeps every p-th coefficient."""
    return poly_trim([f[i] for i in range(0, len(f), p)], p)


def squarefree_decomposition(f: Poly, p: int) -> List[Tuple[Poly, int]]:
    """
    Write monic f as ∏ g_i^{m_i} with g_i square-free and pairwise coprime.

    The derivative can vanish in characteristic p; that part is a p-th power
    and is handled by taking the p-th root and recursing.
    """
    result: List[Tuple[Poly, int]] = []
    c = poly_gcd(f, poly_derivative(f, p), p)
    w = _exact_div(f, c, p)
    i = 1
    while w != ONE:
        y = poly_gcd(w, c, p)
        z = _exact_div(w, y, p)
        if z != ONE:
            result.append((z, i))
        i += 1
        w = y
        c = _exact_div(c, y, p)
    if c != ONE:
        for g, m in squarefree_decomposition(_pth_root(c, p), p):
            result.append((g, m * p))
    return result


def distinct_degree(f: Poly, p: int) -> List[Tuple[Poly, int]]:
    """Split square-free f into products of irreducibles of equal degree."""
    out = []
    rest = f
    h = T
    i = 1
    while poly_degree(rest) >= 2 * i:
        h = poly_powmod(h, p, rest, p)
        g = poly_gcd(rest, poly_sub(h, T, p), p)
        if g != ONE:
            out.append((g, i))
            rest = _exact_div(rest, g, p)
            h = poly_divmod(h, rest, p)[1]
        i += 1
    if rest != ONE:
        out.append((rest, len(rest) - 1))
    return out


def _random_poly(rng: np.random.Generator, degree: int, p: int) -> Poly:
    return poly_trim([int(c) for c in rng.integers(0, p, size=degree)], p)


def _split_once(f: Poly, d: int, p: int, rng: np.random.Generator) -> Poly:
    """Find a proper factor of f, a product of irreducibles of degree d."""
    n = len(f) - 1
    while True:
        a = _random_poly(rng, n, p)
        if poly_degree(a) < 1:
            continue
        if p == 2:
            # trace map F_{2^d} -> F_2
            b, power = a, a
            for _ in range(d - 1):
                power = poly_powmod(power, 2, f, p)
                b = poly_add(b, power, p)
        else:
            b = poly_sub(poly_powmod(a, (p ** d - 1) // 2, f, p), ONE, p)
        g = poly_gcd(f, b, p)
        if g != ONE and g != f:
            return g


def equal_degree(f: Poly, d: int, p: int, rng: np.random.Generator) -> List[Poly]:
    """Cantor-Zassenhaus splitting of a product of degree-d irreducibles."""
    if len(f) - 1 == d:
        return [f]
    g = _split_once(f, d, p, rng)
    return equal_degree(g, d, p, rng) + equal_degree(_exact_div(f, g, p), d, p, rng)


def is_irreducible(f: Poly, p: int) -> bool:
    """Rabin test: f | t^{p^d} - t and gcd(t^{p^{d/r}} - t, f) = 1 for primes r | d."""
    f = poly_monic(poly_trim(f, p), p)
    d = len(f) - 1
    if d < 1:
        return False
    if poly_sub(poly_powmod(T, p ** d, f, p), poly_divmod(T, f, p)[1], p):
        return False
    r, n, primes = 2, d, []
    while r * r <= n:
        if n % r == 0:
            primes.append(r)
            while n % r == 0:
                n //= r
        r += 1
    if n > 1:
        primes.append(n)
    for r in primes:
        h = poly_sub(poly_powmod(T, p ** (d // r), f, p), T, p)
        if poly_gcd(f, h, p) != ONE:
            return False
    return True


def factor_mod_p(poly: Sequence[int], p: int, seed: int = DEFAULT_SEED) -> FactorData:
    """
    Factor P̄ over F_p into distinct monic irreducible powers.

    Args:
        poly: monic polynomial coefficients, low degree first
        p: prime
        seed: seed for the equal-degree splitting

    Returns:
        FactorData sorted by (degree, coefficients); lifts are left empty
    """
    f = poly_trim(poly, p)
    if len(f) < 2 or f[-1] != 1:
        raise InvalidRingSpec(f"factor_mod_p needs a monic polynomial of degree >= 1, got {format_poly(f)}")
    rng = np.random.Generator(np.random.PCG64(seed))
    multiplicity: Dict[Poly, int] = {}
    for g, m in squarefree_decomposition(f, p):
        for block, d in distinct_degree(g, p):
            for irreducible in equal_degree(block, d, p, rng):
                multiplicity[irreducible] = multiplicity.get(irreducible, 0) + m
    factors = tuple(
        IrreducibleFactor(g, m)
        for g, m in sorted(multiplicity.items(), key=lambda item: (len(item[0]), item[0]))
    )
    logger.debug(f"P̄ = {format_poly(f)} over F_{p}: {[(format_poly(x.poly), x.m) for x in factors]}")
    return FactorData(p=p, factors=factors)


def _hensel_step(f: Poly, g: Poly, h: Poly, s: Poly, t: Poly, modulus: int) -> Tuple[Poly, Poly, Poly, Poly]:
    """
    One quadratic lifting step.

    Input satisfies f ≡ gh and sg + th ≡ 1 modulo sqrt(modulus); output
    satisfies both modulo ``modulus``, with h monic and g = f / h.
    """
    e = poly_sub(f, poly_mul(g, h, modulus), modulus)
    q, r = poly_divmod(poly_mul(s, e, modulus), h, modulus)
    g_new = poly_add(poly_add(g, poly_mul(t, e, modulus), modulus), poly_mul(q, g, modulus), modulus)
    h_new = poly_add(h, r, modulus)
    g_exact, rem = poly_divmod(f, h_new, modulus)
    if rem:
        raise NotCoprime("lifting step lost exactness; factors are not coprime mod p")
    g_new = g_exact
    b = poly_sub(poly_add(poly_mul(s, g_new, modulus), poly_mul(t, h_new, modulus), modulus), ONE, modulus)
    c, dd = poly_divmod(poly_mul(s, b, modulus), h_new, modulus)
    s_new = poly_sub(s, dd, modulus)
    t_new = poly_sub(poly_sub(t, poly_mul(t, b, modulus), modulus), poly_mul(c, g_new, modulus), modulus)
    return g_new, h_new, s_new, t_new


def _lift_pair(f: Poly, g_bar: Poly, h_bar: Poly, p: int, k: int) -> Tuple[Poly, Poly]:
    """Lift f ≡ g_bar * h_bar (mod p) to f = g * h (mod p^k), g and h monic."""
    one, s, t = poly_xgcd(g_bar, h_bar, p)
    if one != ONE:
        raise NotCoprime(f"gcd({format_poly(g_bar)}, {format_poly(h_bar)}) = {format_poly(one)} over F_{p}")
    target = p ** k
    g, h = g_bar, h_bar
    modulus = p
    while modulus < target:
        modulus = min(modulus * modulus, target)
        g, h, s, t = _hensel_step(poly_trim(f, modulus), g, h, s, t, modulus)
    return g, h


def hensel_lift(spec: RingSpec, factors: Sequence[Poly]) -> List[Poly]:
    """
    Lift pairwise coprime monic F_j over F_p with ∏ F_j = P̄ to monic Q_j
    over Z/p^kZ with ∏ Q_j = P and Q_j ≡ F_j (mod p).
    """
    p, k = spec.p, spec.k
    parts = [poly_monic(poly_trim(f, p), p) for f in factors]
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            g = poly_gcd(parts[i], parts[j], p)
            if g != ONE:
                raise NotCoprime(f"gcd({format_poly(parts[i])}, {format_poly(parts[j])}) = {format_poly(g)}")
    product = ONE
    for f in parts:
        product = poly_mul(product, f, p)
    if product != spec.poly_mod_p:
        raise InvalidRingSpec(f"factors multiply to {format_poly(product)}, not P̄ = {format_poly(spec.poly_mod_p)}")
    return _lift_tree(spec.poly, parts, p, k)


def _lift_tree(f: Poly, parts: List[Poly], p: int, k: int) -> List[Poly]:
    if len(parts) == 1:
        return [f]
    half = len(parts) // 2
    left, right = ONE, ONE
    for x in parts[:half]:
        left = poly_mul(left, x, p)
    for x in parts[half:]:
        right = poly_mul(right, x, p)
    g, h = _lift_pair(f, left, right, p, k)
    return _lift_tree(g, parts[:half], p, k) + _lift_tree(h, parts[half:], p, k)


def factor_ring(spec: RingSpec, seed: int = DEFAULT_SEED) -> FactorData:
    """Factor P̄ and attach the Hensel lifts Q_j at precision p^k."""
    data = factor_mod_p(spec.lift, spec.p, seed)
    lifts = hensel_lift(spec, data.powers())
    return FactorData(p=spec.p, factors=data.factors, lifts=tuple(lifts), k=spec.k)
