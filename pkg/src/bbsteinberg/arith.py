"""Finite fields GF(p^k) and the small number theory the group algorithms need.

Field elements are encoded as integers in ``[0, q)``: the base-``p`` digits of
the code are the little-endian coefficients of the residue polynomial.  The
:class:`GF` object carries log/antilog tables so that scalar and array
arithmetic are table lookups; :class:`FieldElem` is a thin value type on top
of it for callers that want operator syntax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np

from .errors import IncompleteFactorization

__all__ = [
    "FactoredInteger",
    "FieldElem",
    "FieldParams",
    "GF",
    "factor_small",
    "ff_add",
    "ff_inv",
    "ff_make",
    "ff_mul",
    "ff_neg",
    "ff_pow",
    "gf",
    "is_prime",
    "lcm",
    "two_adic_split",
]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def lcm(*values: int) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


@dataclass(frozen=True)
class FactoredInteger:
    value: int
    factors: tuple[tuple[int, int], ...]

    @property
    def primes(self) -> list[int]:
        return [r for r, _ in self.factors]

    def product(self) -> int:
        out = 1
        for r, e in self.factors:
            out *= r**e
        return out


def factor_small(n: int, trial_bound: int) -> FactoredInteger:
    """Factor ``n`` by trial division with primes up to ``trial_bound``.

    A cofactor left over after trial division is accepted as prime only when
    it is at most ``trial_bound**2``; otherwise :class:`IncompleteFactorization`
    is raised with the cofactor attached.
    """
    if n < 1:
        raise ValueError("n must be positive")
    factors = []
    rest = n
    d = 2
    while d <= trial_bound and d * d <= rest:
        if rest % d == 0:
            e = 0
            while rest % d == 0:
                rest //= d
                e += 1
            factors.append((d, e))
        d += 1 if d == 2 else 2
    if rest > 1:
        if rest > trial_bound * trial_bound and not (d * d > rest):
            raise IncompleteFactorization(n, rest)
        factors.append((rest, 1))
    factors.sort()
    return FactoredInteger(n, tuple(factors))


def two_adic_split(E: int) -> tuple[int, int]:
    """Return ``(a, m)`` with ``E == 2**a * m`` and ``m`` odd."""
    if E < 1:
        raise ValueError("E must be positive")
    a = (E & -E).bit_length() - 1
    return a, E >> a


# -- polynomials over GF(p), little-endian coefficient lists -----------------


def _ptrim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _pmod(a: list[int], f: list[int], p: int) -> list[int]:
    a = _ptrim(list(a))
    df = len(f) - 1
    inv_lead = pow(f[-1], -1, p)
    while len(a) - 1 >= df:
        c = a[-1] * inv_lead % p
        shift = len(a) - 1 - df
        for i, fi in enumerate(f):
            a[shift + i] = (a[shift + i] - c * fi) % p
        _ptrim(a)
    return a


def _pmul(a: list[int], b: list[int], p: int) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return _ptrim(out)


def _pgcd(a: list[int], b: list[int], p: int) -> list[int]:
    a, b = _ptrim(list(a)), _ptrim(list(b))
    while b:
        a, b = b, _pmod(a, b, p)
    return a


def _ppowmod(base: list[int], e: int, f: list[int], p: int) -> list[int]:
    result = [1]
    base = _pmod(base, f, p)
    while e:
        if e & 1:
            result = _pmod(_pmul(result, base, p), f, p)
        base = _pmod(_pmul(base, base, p), f, p)
        e >>= 1
    return result


def _is_irreducible(f: list[int], p: int) -> bool:
    # Rabin's test
    k = len(f) - 1
    if k == 1:
        return True
    x = [0, 1]
    if _ptrim(_psub(_ppowmod(x, p**k, f, p), x, p)):
        return False
    for r, _ in factor_small(k, k).factors:
        h = _psub(_ppowmod(x, p ** (k // r), f, p), x, p)
        if len(_pgcd(f, h, p)) != 1:
            return False
    return True


def _psub(a: list[int], b: list[int], p: int) -> list[int]:
    n = max(len(a), len(b))
    out = [((a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0)) % p for i in range(n)]
    return _ptrim(out)


@dataclass(frozen=True)
class FieldParams:
    """GF(p^k) presented as GF(p)[x]/(x^k + c_{k-1}x^{k-1} + ... + c_0).

    ``modulus`` holds ``(c_0, ..., c_{k-1})``.  For ``k == 1`` it is ``(0,)``,
    i.e. the polynomial ``x``.
    """

    p: int
    k: int
    modulus: tuple[int, ...]

    @property
    def q(self) -> int:
        return self.p**self.k


@lru_cache(maxsize=None)
def ff_make(p: int, k: int) -> FieldParams:
    if p % 2 == 0 or not is_prime(p):
        raise ValueError(f"p={p} must be an odd prime")
    if k < 1:
        raise ValueError("k must be positive")
    if k == 1:
        return FieldParams(p, 1, (0,))
    # least in the order of the code sum(c_i p^i), constant term least significant
    for code in range(p**k):
        coeffs = [(code // p**i) % p for i in range(k)]
        if coeffs[0] == 0:
            continue
        if _is_irreducible(coeffs + [1], p):
            return FieldParams(p, k, tuple(coeffs))
    raise AssertionError("no irreducible polynomial found")


class GF:
    """Table-driven arithmetic on integer codes of GF(p^k)."""

    def __init__(self, params: FieldParams):
        self.params = params
        p, k = params.p, params.k
        self.p, self.k, self.q = p, k, params.q
        q = self.q
        self.order_factors = factor_small(q - 1, math.isqrt(q) + 1)
        self.weights = np.array([p**i for i in range(k)], dtype=np.int64)
        codes = np.arange(q, dtype=np.int64)
        self.digits = (codes[:, None] // self.weights[None, :]) % p
        if k == 1:
            self.gen = self._primitive_root_prime()
            exp = [1] * (q - 1)
            for e in range(1, q - 1):
                exp[e] = exp[e - 1] * self.gen % p
        else:
            self.gen, exp = self._primitive_element_ext()
        self.exp = np.array(exp, dtype=np.int64)
        self.log = np.full(q, -1, dtype=np.int64)
        self.log[self.exp] = np.arange(q - 1, dtype=np.int64)
        self.neg_table = self.encode((-self.digits) % p)
        self._exp_list = exp
        self._log_list = self.log.tolist()
        self._neg_list = self.neg_table.tolist()

    # -- construction helpers
    def _primitive_root_prime(self) -> int:
        p = self.p
        for g in range(2, p):
            if all(pow(g, (p - 1) // r, p) != 1 for r in self.order_factors.primes):
                return g
        return 1  # p == 3 has g = 2 above; unreachable for odd p >= 3

    def _poly(self, code: int) -> list[int]:
        return _ptrim([(code // self.p**i) % self.p for i in range(self.k)])

    def _code(self, poly: list[int]) -> int:
        return sum(c * self.p**i for i, c in enumerate(poly))

    def _primitive_element_ext(self):
        p, k, q = self.p, self.k, self.q
        f = list(self.params.modulus) + [1]
        for cand in range(p, q):
            g = self._poly(cand)
            if all(_ppowmod(g, (q - 1) // r, f, p) != [1] for r in self.order_factors.primes):
                break
        else:
            raise AssertionError("no primitive element")
        # columns of multiplication by g, as coefficient vectors
        cols = []
        for i in range(k):
            v = _pmod(_pmul([0] * i + [1], g, p), f, p)
            cols.append(v + [0] * (k - len(v)))
        exp = [1] * (q - 1)
        vec = [1] + [0] * (k - 1)
        pw = [p**i for i in range(k)]
        for e in range(1, q - 1):
            new = [0] * k
            for i, vi in enumerate(vec):
                if vi:
                    col = cols[i]
                    for r in range(k):
                        new[r] += vi * col[r]
            vec = [c % p for c in new]
            exp[e] = sum(c * w for c, w in zip(vec, pw))
        return cand, exp

    # -- codes <-> coefficient vectors
    def encode(self, digits: np.ndarray) -> np.ndarray:
        return np.asarray(digits, dtype=np.int64) @ self.weights

    def from_int(self, n: int) -> int:
        """Image of the integer ``n`` in the prime field."""
        return n % self.p

    # -- scalar arithmetic
    def add(self, a: int, b: int) -> int:
        if self.k == 1:
            return (a + b) % self.p
        return int(self.encode((self.digits[a] + self.digits[b]) % self.p))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def neg(self, a: int) -> int:
        return (-a) % self.p if self.k == 1 else self._neg_list[a]

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self.k == 1:
            return a * b % self.p
        return self._exp_list[(self._log_list[a] + self._log_list[b]) % (self.q - 1)]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero in GF(%d)" % self.q)
        if self.k == 1:
            return pow(a, -1, self.p)
        return self._exp_list[(-self._log_list[a]) % (self.q - 1)]

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            if e < 0:
                raise ZeroDivisionError("inverse of zero")
            return 1 if e == 0 else 0
        return self._exp_list[(self._log_list[a] * e) % (self.q - 1)]

    def power_of_gen(self, e: int) -> int:
        return self._exp_list[e % (self.q - 1)]

    # -- array arithmetic (elementwise; shapes broadcast)
    def add_arr(self, a, b):
        if self.k == 1:
            return (a + b) % self.p
        return self.encode((self.digits[a] + self.digits[b]) % self.p)

    def neg_arr(self, a):
        if self.k == 1:
            return (-a) % self.p
        return self.neg_table[a]

    def mul_arr(self, a, b):
        if self.k == 1:
            return (a * b) % self.p
        a = np.asarray(a)
        b = np.asarray(b)
        out = self.exp[(self.log[a] + self.log[b]) % (self.q - 1)]
        return np.where((a == 0) | (b == 0), 0, out)

    def matmul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """(Batched) matrix product over the field."""
        if self.k == 1:
            return np.matmul(A, B) % self.p
        prod = self.mul_arr(A[..., :, :, None], B[..., None, :, :])
        summed = self.digits[prod].sum(axis=-3) % self.p
        return self.encode(summed)

    def scale(self, lam: int, A: np.ndarray) -> np.ndarray:
        if self.k == 1:
            return (A * lam) % self.p
        return self.mul_arr(np.int64(lam), A)

    def mat_inv(self, A: np.ndarray) -> np.ndarray:
        n = A.shape[0]
        M = np.concatenate([np.array(A, dtype=np.int64), np.eye(n, dtype=np.int64)], axis=1)
        for c in range(n):
            piv = next((r for r in range(c, n) if M[r, c] != 0), None)
            if piv is None:
                raise ZeroDivisionError("singular matrix")
            if piv != c:
                M[[c, piv]] = M[[piv, c]]
            M[c] = self.scale(self.inv(int(M[c, c])), M[c])
            col = M[:, c].copy()
            col[c] = 0
            nz = np.nonzero(col)[0]
            if len(nz):
                M[nz] = self.add_arr(M[nz], self.neg_arr(self.mul_arr(col[nz, None], M[c][None, :])))
        return M[:, n:]

    def to_poly(self, a: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.digits[a])


@lru_cache(maxsize=None)
def gf(p: int, k: int) -> GF:
    return GF(ff_make(p, k))


@dataclass(frozen=True)
class FieldElem:
    params: FieldParams
    coeffs: tuple[int, ...]

    @classmethod
    def from_code(cls, params: FieldParams, code: int) -> "FieldElem":
        F = gf(params.p, params.k)
        return cls(params, F.to_poly(code))

    @classmethod
    def of(cls, params: FieldParams, value) -> "FieldElem":
        if isinstance(value, int):
            return cls.from_code(params, value % params.p)
        coeffs = tuple(int(c) % params.p for c in value)
        if len(coeffs) != params.k:
            raise ValueError("expected %d coefficients" % params.k)
        return cls(params, coeffs)

    @property
    def code(self) -> int:
        return sum(c * self.params.p**i for i, c in enumerate(self.coeffs))

    def _field(self, other: "FieldElem") -> GF:
        if other.params != self.params:
            raise ValueError("operands from different fields")
        return gf(self.params.p, self.params.k)

    def __add__(self, other):
        return FieldElem.from_code(self.params, self._field(other).add(self.code, other.code))

    def __sub__(self, other):
        return FieldElem.from_code(self.params, self._field(other).sub(self.code, other.code))

    def __mul__(self, other):
        return FieldElem.from_code(self.params, self._field(other).mul(self.code, other.code))

    def __neg__(self):
        return FieldElem.from_code(self.params, gf(self.params.p, self.params.k).neg(self.code))

    def inv(self) -> "FieldElem":
        return FieldElem.from_code(self.params, gf(self.params.p, self.params.k).inv(self.code))

    def __pow__(self, e: int):
        return FieldElem.from_code(self.params, gf(self.params.p, self.params.k).pow(self.code, e))

    def is_zero(self) -> bool:
        return not any(self.coeffs)


def ff_add(a: FieldElem, b: FieldElem) -> FieldElem:
    return a + b


def ff_mul(a: FieldElem, b: FieldElem) -> FieldElem:
    return a * b


def ff_neg(a: FieldElem) -> FieldElem:
    return -a


def ff_inv(a: FieldElem) -> FieldElem:
    return a.inv()


def ff_pow(a: FieldElem, e: int) -> FieldElem:
    return a**e
