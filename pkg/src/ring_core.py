"""
Exact arithmetic in Z/p^kZ, polynomials over it, the quotient ring
R = (Z/p^kZ)[t]/(P) and finite fields F_p[t]/(P̄_j).

Polynomials are tuples of integer coefficients, low degree first. The zero
polynomial is the empty tuple and has degree ``ZERO_DEGREE`` (minus
infinity), so degree comparisons never need a -1 sentinel.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, InvalidRingSpec, NonUnit

logger = logging.getLogger(__name__)

Poly = Tuple[int, ...]

ZERO_DEGREE = float('-inf')

# Residues are machine integers; p^k must fit in a signed 64-bit word.
MAX_MODULUS = 2 ** 63

# Above this modulus products of two residues overflow int64, so matrices
# fall back to Python integers (dtype=object).
INT64_SAFE_MODULUS = 2 ** 31

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for every n < 3.3 * 10^24."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def valuation(x: int, p: int, k: int) -> int:
    """p-adic valuation of a residue mod p^k, with v(0) = k."""
    x %= p ** k
    if x == 0:
        return k
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def inverse_mod(x: int, modulus: int) -> int:
    """Inverse of x modulo ``modulus``; raises NonUnit when none exists."""
    try:
        return pow(x % modulus, -1, modulus)
    except ValueError:
        raise NonUnit(f"{x} is not invertible modulo {modulus}")


# ---------------------------------------------------------------------------
# Polynomials over Z/mZ
# ---------------------------------------------------------------------------

def poly_trim(a: Sequence[int], modulus: int) -> Poly:
    """Reduce coefficients and drop trailing zeros."""
    coeffs = [c % modulus for c in a]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def poly_degree(a: Poly) -> Union[int, float]:
    return len(a) - 1 if a else ZERO_DEGREE


def poly_add(a: Poly, b: Poly, modulus: int) -> Poly:
    n = max(len(a), len(b))
    return poly_trim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)], modulus)


def poly_sub(a: Poly, b: Poly, modulus: int) -> Poly:
    n = max(len(a), len(b))
    return poly_trim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)], modulus)


def poly_scale(a: Poly, c: int, modulus: int) -> Poly:
    return poly_trim([c * x for x in a], modulus)


def poly_mul(a: Poly, b: Poly, modulus: int) -> Poly:
    if not a or not b:
        return ()
    res = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            res[i + j] += x * y
    return poly_trim(res, modulus)


def poly_divmod(a: Poly, b: Poly, modulus: int) -> Tuple[Poly, Poly]:
    """
    Euclidean division a = q*b + r with deg r < deg b.

    The leading coefficient of b must be a unit modulo ``modulus``.
    """
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    inv_lc = inverse_mod(b[-1], modulus)
    rem = [c % modulus for c in a]
    db = len(b) - 1
    if len(rem) - 1 < db:
        return (), poly_trim(rem, modulus)
    quot = [0] * (len(rem) - db)
    for i in range(len(rem) - 1, db - 1, -1):
        c = rem[i] * inv_lc % modulus
        if c == 0:
            continue
        quot[i - db] = c
        for j in range(db + 1):
            rem[i - db + j] = (rem[i - db + j] - c * b[j]) % modulus
    return poly_trim(quot, modulus), poly_trim(rem[:db], modulus)


def poly_mod(a: Poly, b: Poly, modulus: int) -> Poly:
    return poly_divmod(a, b, modulus)[1]


def poly_mulmod(a: Poly, b: Poly, f: Poly, modulus: int) -> Poly:
    return poly_mod(poly_mul(a, b, modulus), f, modulus)


def poly_powmod(a: Poly, e: int, f: Poly, modulus: int) -> Poly:
    """a^e mod (f, modulus) by square and multiply."""
    result: Poly = poly_trim((1,), modulus)
    base = poly_mod(a, f, modulus)
    while e > 0:
        if e & 1:
            result = poly_mulmod(result, base, f, modulus)
        base = poly_mulmod(base, base, f, modulus)
        e >>= 1
    return result


def poly_monic(a: Poly, modulus: int) -> Poly:
    if not a:
        return a
    return poly_scale(a, inverse_mod(a[-1], modulus), modulus)


def poly_gcd(a: Poly, b: Poly, p: int) -> Poly:
    """Monic gcd over the field F_p."""
    a, b = poly_trim(a, p), poly_trim(b, p)
    while b:
        a, b = b, poly_mod(a, b, p)
    return poly_monic(a, p)


def poly_xgcd(a: Poly, b: Poly, p: int) -> Tuple[Poly, Poly, Poly]:
    """
    Extended Euclid over F_p.

    Returns:
        (g, s, t) with s*a + t*b = g and g monic
    """
    r0, r1 = poly_trim(a, p), poly_trim(b, p)
    s0, s1 = poly_trim((1,), p), ()
    t0, t1 = (), poly_trim((1,), p)
    while r1:
        q, r = poly_divmod(r0, r1, p)
        r0, r1 = r1, r
        s0, s1 = s1, poly_sub(s0, poly_mul(q, s1, p), p)
        t0, t1 = t1, poly_sub(t0, poly_mul(q, t1, p), p)
    if not r0:
        return (), s0, t0
    inv = inverse_mod(r0[-1], p)
    return poly_scale(r0, inv, p), poly_scale(s0, inv, p), poly_scale(t0, inv, p)


def poly_derivative(a: Poly, modulus: int) -> Poly:
    return poly_trim([i * a[i] for i in range(1, len(a))], modulus)


def poly_eval(a: Poly, x: int, modulus: int) -> int:
    acc = 0
    for c in reversed(a):
        acc = (acc * x + c) % modulus
    return acc


def parse_poly(text: str) -> List[int]:
    """
    Parse the ``--poly`` text format.

    Args:
        text: comma-separated integer coefficients, low degree first,
            e.g. ``"0,0,1"`` for t^2

    Returns:
        List of integer coefficients as written
    """
    parts = [part.strip() for part in text.split(',') if part.strip() != '']
    if not parts:
        raise InvalidRingSpec(f"empty polynomial {text!r}")
    try:
        return [int(part) for part in parts]
    except ValueError:
        raise InvalidRingSpec(f"polynomial coefficients must be integers: {text!r}")


def format_poly(a: Sequence[int]) -> str:
    return ",".join(str(c) for c in a) if a else "0"


# ---------------------------------------------------------------------------
# Ring specification and elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RingSpec:
    """
    The ring R = (Z/p^kZ)[t]/(P).

    ``lift`` keeps the integer coefficients exactly as supplied; they are the
    polynomial over Z_p, so raising k later reduces the same integers.
    """
    p: int
    k: int
    lift: Tuple[int, ...]
    poly: Poly = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidRingSpec(f"k must be at least 1, got {self.k}")
        if not is_prime(self.p):
            raise InvalidRingSpec(f"p = {self.p} is not prime")
        if self.p ** self.k >= MAX_MODULUS:
            raise InvalidRingSpec(f"p^k = {self.p}^{self.k} does not fit in 63 bits")
        lift = tuple(int(c) for c in self.lift)
        while len(lift) > 1 and lift[-1] % (self.p ** self.k) == 0:
            lift = lift[:-1]
        if len(lift) < 2:
            raise InvalidRingSpec("P must have degree at least 1")
        if lift[-1] % (self.p ** self.k) != 1:
            raise InvalidRingSpec(f"P must be monic, leading coefficient is {lift[-1]}")
        object.__setattr__(self, 'lift', lift)
        object.__setattr__(self, 'poly', poly_trim(lift, self.p ** self.k))

    @classmethod
    def from_text(cls, p: int, k: int, text: str) -> 'RingSpec':
        return cls(p, k, tuple(parse_poly(text)))

    @property
    def modulus(self) -> int:
        return self.p ** self.k

    @property
    def d(self) -> int:
        return len(self.poly) - 1

    @property
    def dtype(self):
        return np.int64 if self.modulus < INT64_SAFE_MODULUS else object

    @property
    def poly_mod_p(self) -> Poly:
        return poly_trim(self.lift, self.p)

    def with_k(self, k: int) -> 'RingSpec':
        """Same P over a different precision."""
        return RingSpec(self.p, k, self.lift)

    def to_dict(self) -> dict:
        return {'p': self.p, 'k': self.k, 'poly': list(self.lift)}


@dataclass(frozen=True)
class Residue:
    """An element of Z/p^kZ."""
    value: int
    p: int
    k: int

    def __post_init__(self):
        object.__setattr__(self, 'value', self.value % (self.p ** self.k))

    @property
    def modulus(self) -> int:
        return self.p ** self.k

    def _check(self, other: 'Residue'):
        if (self.p, self.k) != (other.p, other.k):
            raise DimensionMismatch("residues live in different rings")

    def __add__(self, other: 'Residue') -> 'Residue':
        self._check(other)
        return Residue(self.value + other.value, self.p, self.k)

    def __sub__(self, other: 'Residue') -> 'Residue':
        self._check(other)
        return Residue(self.value - other.value, self.p, self.k)

    def __mul__(self, other: 'Residue') -> 'Residue':
        self._check(other)
        return Residue(self.value * other.value, self.p, self.k)

    def __neg__(self) -> 'Residue':
        return Residue(-self.value, self.p, self.k)

    def valuation(self) -> int:
        return valuation(self.value, self.p, self.k)

    def is_unit(self) -> bool:
        return self.value % self.p != 0

    def inverse(self) -> 'Residue':
        return Residue(inverse_mod(self.value, self.modulus), self.p, self.k)


@dataclass(frozen=True)
class PolyMod:
    """A polynomial over Z/mZ, normalized (no trailing zero coefficients)."""
    coeffs: Poly
    modulus: int

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', poly_trim(self.coeffs, self.modulus))

    @property
    def degree(self) -> Union[int, float]:
        return poly_degree(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == 1 % self.modulus

    def reduce(self, modulus: int) -> 'PolyMod':
        return PolyMod(self.coeffs, modulus)

    def __add__(self, other: 'PolyMod') -> 'PolyMod':
        return PolyMod(poly_add(self.coeffs, other.coeffs, self.modulus), self.modulus)

    def __sub__(self, other: 'PolyMod') -> 'PolyMod':
        return PolyMod(poly_sub(self.coeffs, other.coeffs, self.modulus), self.modulus)

    def __mul__(self, other: 'PolyMod') -> 'PolyMod':
        return PolyMod(poly_mul(self.coeffs, other.coeffs, self.modulus), self.modulus)

    def __divmod__(self, other: 'PolyMod') -> Tuple['PolyMod', 'PolyMod']:
        q, r = poly_divmod(self.coeffs, other.coeffs, self.modulus)
        return PolyMod(q, self.modulus), PolyMod(r, self.modulus)

    def __call__(self, x: int) -> int:
        return poly_eval(self.coeffs, x, self.modulus)

    def __str__(self) -> str:
        return format_poly(self.coeffs)


@dataclass(frozen=True)
class RElement:
    """c_0 + c_1 t̄ + ... + c_{d-1} t̄^{d-1} in R = (Z/p^kZ)[t]/(P)."""
    spec: RingSpec
    coeffs: Tuple[int, ...]

    def __post_init__(self):
        coeffs = [c % self.spec.modulus for c in self.coeffs]
        if len(coeffs) > self.spec.d:
            coeffs = list(poly_mod(tuple(coeffs), self.spec.poly, self.spec.modulus))
        coeffs += [0] * (self.spec.d - len(coeffs))
        object.__setattr__(self, 'coeffs', tuple(coeffs))

    @classmethod
    def t_bar(cls, spec: RingSpec) -> 'RElement':
        return cls(spec, (0, 1))

    @classmethod
    def one(cls, spec: RingSpec) -> 'RElement':
        return cls(spec, (1,))

    def _check(self, other: 'RElement'):
        if self.spec != other.spec:
            raise DimensionMismatch("ring elements belong to different rings")

    def __add__(self, other: 'RElement') -> 'RElement':
        self._check(other)
        return RElement(self.spec, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: 'RElement') -> 'RElement':
        self._check(other)
        return RElement(self.spec, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> 'RElement':
        return RElement(self.spec, tuple(-a for a in self.coeffs))

    def __mul__(self, other: 'RElement') -> 'RElement':
        self._check(other)
        m = self.spec.modulus
        return RElement(self.spec, poly_mulmod(self.coeffs, other.coeffs, self.spec.poly, m))

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def coefficient(self, i: int) -> Residue:
        return Residue(self.coeffs[i], self.spec.p, self.spec.k)

    def is_unit(self) -> bool:
        """A unit iff its reduction mod p is coprime to P̄ (nonzero in every residue field)."""
        p = self.spec.p
        g = poly_gcd(poly_trim(self.coeffs, p), self.spec.poly_mod_p, p)
        return g == (1,)

    def inverse(self) -> 'RElement':
        """
        Inverse in R.

        Inverts modulo (p, P) by extended Euclid, then lifts with the Newton
        step b <- b(2 - ab), which doubles the p-adic precision each round.
        """
        spec, p = self.spec, self.spec.p
        a_bar = poly_trim(self.coeffs, p)
        g, s, _ = poly_xgcd(a_bar, spec.poly_mod_p, p)
        if g != (1,):
            raise NonUnit(f"{format_poly(self.coeffs)} is not a unit in R")
        b = RElement(spec, s)
        two = RElement(spec, (2,))
        precision = 1
        while precision < spec.k:
            b = b * (two - self * b)
            precision *= 2
        return b

    def __str__(self) -> str:
        return format_poly(poly_trim(self.coeffs, self.spec.modulus))


def ring_add(a: RElement, b: RElement) -> RElement:
    return a + b


def ring_mul(a: RElement, b: RElement) -> RElement:
    return a * b


def ring_inv(a: RElement) -> RElement:
    return a.inverse()


def companion_matrix(spec: RingSpec) -> np.ndarray:
    """
    d x d matrix of multiplication by t̄ on the basis 1, t̄, ..., t̄^{d-1}.

    Column j < d-1 is e_{j+1}; the last column is -P_0, ..., -P_{d-1}.
    """
    return companion_of(spec.poly, spec.modulus, spec.dtype)


def companion_of(poly: Poly, modulus: int, dtype=np.int64) -> np.ndarray:
    d = len(poly) - 1
    C = np.zeros((d, d), dtype=dtype)
    for j in range(d - 1):
        C[j + 1, j] = 1
    for i in range(d):
        C[i, d - 1] = (-poly[i]) % modulus
    return C


@dataclass(frozen=True)
class FqElement:
    """An element of F_p[t]/(f) for monic irreducible f over F_p."""
    p: int
    modulus_poly: Poly
    coeffs: Poly

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', poly_mod(poly_trim(self.coeffs, self.p), self.modulus_poly, self.p))

    @property
    def order(self) -> int:
        """Size of the field."""
        return self.p ** (len(self.modulus_poly) - 1)

    def _make(self, coeffs: Poly) -> 'FqElement':
        return FqElement(self.p, self.modulus_poly, coeffs)

    def __add__(self, other: 'FqElement') -> 'FqElement':
        return self._make(poly_add(self.coeffs, other.coeffs, self.p))

    def __sub__(self, other: 'FqElement') -> 'FqElement':
        return self._make(poly_sub(self.coeffs, other.coeffs, self.p))

    def __mul__(self, other: 'FqElement') -> 'FqElement':
        return self._make(poly_mul(self.coeffs, other.coeffs, self.p))

    def is_zero(self) -> bool:
        return not self.coeffs

    def inverse(self) -> 'FqElement':
        if self.is_zero():
            raise NonUnit("zero has no inverse in a field")
        g, s, _ = poly_xgcd(self.coeffs, self.modulus_poly, self.p)
        if g != (1,):
            raise NonUnit(f"modulus {format_poly(self.modulus_poly)} is not irreducible")
        return self._make(s)

    @classmethod
    def elements(cls, p: int, modulus_poly: Poly) -> List['FqElement']:
        """All q elements, in lexicographic order of coefficient vectors."""
        d = len(modulus_poly) - 1
        out = []
        for index in range(p ** d):
            coeffs, x = [], index
            for _ in range(d):
                coeffs.append(x % p)
                x //= p
            out.append(cls(p, modulus_poly, tuple(coeffs)))
        return out


def mat_mod(A: np.ndarray, modulus: int) -> np.ndarray:
    return np.mod(A, modulus)


def mat_mul(A: np.ndarray, B: np.ndarray, modulus: int) -> np.ndarray:
    """Matrix product mod ``modulus`` without int64 overflow."""
    inner = A.shape[1] if A.ndim == 2 else 1
    if A.dtype != object and B.dtype != object and (modulus - 1) ** 2 * max(inner, 1) < 2 ** 63:
        return np.mod(A @ B, modulus)
    return np.mod(A.astype(object) @ B.astype(object), modulus).astype(A.dtype if modulus < INT64_SAFE_MODULUS else object)


def poly_at_matrix(poly: Sequence[int], X: np.ndarray, modulus: int) -> np.ndarray:
    """Horner evaluation of a polynomial at a square matrix."""
    n = X.shape[0]
    dtype = X.dtype
    result = np.zeros((n, n), dtype=dtype)
    identity = np.eye(n, dtype=dtype)
    for c in reversed(list(poly)):
        result = mat_mul(result, X, modulus)
        result = np.mod(result + (c % modulus) * identity, modulus)
    return result
