"""Classical matrix groups over GF(q) and the white-box Curtis-Tits backend.

Matrices are ``numpy`` int64 arrays of field codes (see :mod:`.arith`).  A
projective group is handled by keeping any linear representative and letting
:meth:`MatrixBackend.eq` compare modulo the selected scalar subgroup.

Coordinates are 0-based; the "mirror" of coordinate ``j`` is ``d - 1 - j``,
which is how the antidiagonal forms pair basis vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .arith import GF, gf, is_prime, lcm
from .errors import GroupSpecSyntaxError, PreconditionError

Matrix = np.ndarray

_NAMES = {
    "SL": ("A", "trivial"),
    "PSL": ("A", "center"),
    "Sp": ("C", "trivial"),
    "PSp": ("C", "center"),
    "Omega": ("B", "trivial"),
    "OmegaPlus": ("D", "trivial"),
    "POmegaPlus": ("D", "center"),
}
_MIN_RANK = {"A": 1, "B": 3, "C": 2, "D": 4}


@dataclass(frozen=True)
class GroupSpec:
    family: str
    n: int
    p: int
    k: int = 1
    quotient: str = "trivial"  # trivial | center | order2

    def __post_init__(self):
        if self.family not in _MIN_RANK:
            raise PreconditionError(f"unsupported family {self.family!r}")
        if self.p % 2 == 0 or not is_prime(self.p):
            raise PreconditionError(f"p={self.p} is not an odd prime")
        if self.k < 1:
            raise PreconditionError("k must be positive")
        if self.q <= 3:
            raise PreconditionError("q must exceed 3")
        if self.n < _MIN_RANK[self.family]:
            raise PreconditionError(
                f"family {self.family} needs rank >= {_MIN_RANK[self.family]}, got {self.n}"
            )
        if self.quotient not in ("trivial", "center", "order2"):
            raise PreconditionError(f"bad quotient selector {self.quotient!r}")

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        try:
            name, n, p, k = text.split(":")
            family, quotient = _NAMES[name]
            return cls(family, int(n), int(p), int(k), quotient)
        except (ValueError, KeyError) as exc:
            if isinstance(exc, PreconditionError):
                raise
            raise GroupSpecSyntaxError(f"cannot parse group spec {text!r}") from exc

    @property
    def name(self) -> str:
        for name, (fam, quo) in _NAMES.items():
            if fam == self.family and quo == self.quotient:
                return name
        return f"{self.family}/{self.quotient}"

    def __str__(self) -> str:
        return f"{self.name}:{self.n}:{self.p}:{self.k}"

    @property
    def q(self) -> int:
        return self.p**self.k

    @property
    def dim(self) -> int:
        return {"A": self.n + 1, "B": 2 * self.n + 1, "C": 2 * self.n, "D": 2 * self.n}[self.family]

    @property
    def field(self) -> GF:
        return gf(self.p, self.k)

    def center_scalars(self) -> list[int]:
        """Codes of the scalars lambda with lambda*I in the quotiented central subgroup."""
        F = self.field
        if self.quotient == "trivial":
            return [1]
        if self.family == "A" and self.quotient == "center":
            d = self.dim
            # lambda^d == 1 in GF(q)*
            g = math.gcd(d, self.q - 1)
            return sorted({F.power_of_gen(j * (self.q - 1) // g) for j in range(g)})
        if self.family == "B":
            return [1]
        return [1, F.neg(1)]

    def form(self) -> Matrix | None:
        F, d = self.field, self.dim
        if self.family == "A":
            return None
        M = np.zeros((d, d), dtype=np.int64)
        for i in range(d):
            sign = 1 if (self.family != "C" or i < d // 2) else F.neg(1)
            M[i, d - 1 - i] = sign
        return M


# -- root elements -------------------------------------------------------------


def _zero(d):
    return np.zeros((d, d), dtype=np.int64)


def _unit(d, i, j):
    E = _zero(d)
    E[i, j] = 1
    return E


def _identity(d):
    return np.eye(d, dtype=np.int64)


def _in_lie_algebra(F: GF, Y: Matrix, form: Matrix | None) -> bool:
    if form is None:
        return True
    lhs = F.add_arr(F.matmul(Y.T, form), F.matmul(form, Y))
    return not lhs.any()


def _root_vector(spec: GroupSpec, pair: tuple[int, int]) -> Matrix:
    """Nilpotent Lie algebra element for the root whose leading term is E_{i,j}."""
    F, d = spec.field, spec.dim
    i, j = pair
    Y = _unit(d, i, j)
    form = spec.form()
    if form is None:
        return Y
    mi, mj = d - 1 - i, d - 1 - j
    if (mj, mi) == (i, j):
        if _in_lie_algebra(F, Y, form):
            return Y
        raise AssertionError("root pair not in the Lie algebra")
    for c in (1, F.neg(1)):
        Z = Y.copy()
        Z[mj, mi] = c
        if _in_lie_algebra(F, Z, form):
            return Z
    raise AssertionError(f"no Lie algebra partner for {pair}")


def _exp_nilpotent(F: GF, Y: Matrix, t: int) -> Matrix:
    d = Y.shape[0]
    tY = F.scale(t, Y)
    Y2 = F.matmul(tY, tY)
    if F.matmul(Y2, tY).any():
        raise AssertionError("root vector not nilpotent of degree 3")
    half = F.inv(F.from_int(2))
    return F.add_arr(F.add_arr(_identity(d), tY), F.scale(half, Y2))


@dataclass(frozen=True)
class RootSL2:
    """Homomorphic image of SL2(q) attached to one root: x_alpha, x_{-alpha}."""

    spec: GroupSpec
    pair: tuple[int, int]

    @cached_property
    def _vectors(self):
        F = self.spec.field
        e = _root_vector(self.spec, self.pair)
        f = _root_vector(self.spec, (self.pair[1], self.pair[0]))
        h = F.add_arr(F.matmul(e, f), F.neg_arr(F.matmul(f, e)))
        he = F.add_arr(F.matmul(h, e), F.neg_arr(F.matmul(e, h)))
        # [h, e] = s e; rescale f so that [[e, f], e] = 2 e
        idx = tuple(np.argwhere(e != 0)[0])
        s = F.mul(int(he[idx]), F.inv(int(e[idx])))
        f = F.scale(F.mul(F.from_int(2), F.inv(s)), f)
        return e, f

    def x(self, t: int) -> Matrix:
        return _exp_nilpotent(self.spec.field, self._vectors[0], t)

    def y(self, t: int) -> Matrix:
        return _exp_nilpotent(self.spec.field, self._vectors[1], t)

    def n(self, t: int) -> Matrix:
        F = self.spec.field
        a = self.x(t)
        return F.matmul(F.matmul(a, self.y(F.neg(F.inv(t)))), a)

    def h(self, t: int) -> Matrix:
        F = self.spec.field
        return F.matmul(self.n(t), self.n(F.neg(1)))

    def generators(self) -> list[Matrix]:
        F = self.spec.field
        return [self.x(1), self.y(1), self.h(F.gen)]

    @cached_property
    def support(self) -> tuple[int, ...]:
        e, f = self._vectors
        nz = (e != 0) | (f != 0)
        rows = np.nonzero(nz.any(axis=0) | nz.any(axis=1))[0]
        return tuple(int(r) for r in rows)


def node_roots(spec: GroupSpec) -> list[tuple[int, int]]:
    """Root pairs for nodes 0..n of the extended Dynkin diagram."""
    n, d = spec.n, spec.dim
    simple = [(l - 1, l) for l in range(1, n)]
    if spec.family == "A":
        simple.append((n - 1, n))
        lowest = (d - 1, 0)
    elif spec.family == "B":
        simple.append((n - 1, n))  # e_n -> middle coordinate: short root
        lowest = (d - 2, 0)
    elif spec.family == "C":
        simple.append((n - 1, n))  # 2 eps_n
        lowest = (d - 1, 0)
    else:
        simple.append((n - 2, n))  # eps_{n-1} + eps_n
        lowest = (d - 2, 0)
    return [lowest] + simple


def diagram_edges(family: str, n: int) -> frozenset[frozenset[int]]:
    edges = {frozenset((l, l + 1)) for l in range(1, n - 1)}
    if family == "A":
        edges |= {frozenset((n - 1, n)), frozenset((0, 1)), frozenset((0, n))}
    elif family == "B":
        edges |= {frozenset((n - 1, n)), frozenset((0, 2))}
    elif family == "C":
        edges |= {frozenset((n - 1, n)), frozenset((0, 1))}
    else:
        edges |= {frozenset((n - 2, n)), frozenset((0, 2))}
    return frozenset(e for e in edges if len(e) == 2)


# -- backend ------------------------------------------------------------------


class MatrixBackend:
    """Multiply / invert / compare for the matrix group described by ``spec``."""

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.field = F = spec.field
        self.dim = spec.dim
        self.scalars = spec.center_scalars()
        self._scalar_set = set(self.scalars)
        self.form = spec.form()
        self.form_inv = None if self.form is None else F.mat_inv(self.form)
        self.identity = _identity(self.dim)

    def mul(self, a: Matrix, b: Matrix) -> Matrix:
        return self.field.matmul(a, b)

    def inv(self, a: Matrix) -> Matrix:
        if self.form is None:
            return self.field.mat_inv(a)
        F = self.field
        return F.matmul(F.matmul(self.form_inv, a.T), self.form)

    def pow(self, a: Matrix, N: int) -> Matrix:
        if N < 0:
            a, N = self.inv(a), -N
        result = self.identity
        base = a
        while N:
            if N & 1:
                result = self.mul(result, base)
            N >>= 1
            if N:
                base = self.mul(base, base)
        return result

    def scalar_ratio(self, a: Matrix, b: Matrix) -> int | None:
        """lambda with a == lambda * b, or None."""
        flat_b = b.reshape(-1)
        pos = int(np.flatnonzero(flat_b)[0])
        av = int(a.reshape(-1)[pos])
        if av == 0:
            return None
        F = self.field
        lam = F.mul(av, F.inv(int(flat_b[pos])))
        if np.array_equal(a, F.scale(lam, b)):
            return lam
        return None

    def eq(self, a: Matrix, b: Matrix) -> bool:
        if len(self.scalars) == 1:
            return np.array_equal(a, b)
        lam = self.scalar_ratio(a, b)
        return lam is not None and lam in self._scalar_set

    def is_identity(self, a: Matrix) -> bool:
        return self.eq(a, self.identity)

    def canonical(self, a: Matrix) -> Matrix:
        if len(self.scalars) == 1:
            return a
        F = self.field
        pos = int(np.flatnonzero(a.reshape(-1))[0])
        v = int(a.reshape(-1)[pos])
        lam = min(self.scalars, key=lambda s: F.mul(s, v))
        return F.scale(lam, a)

    def key(self, a: Matrix) -> bytes:
        return self.canonical(a).tobytes()

    def canonical_batch(self, A: np.ndarray) -> np.ndarray:
        """Canonical representatives for a stack of matrices, shape (N, d, d)."""
        if len(self.scalars) == 1:
            return A
        F = self.field
        flat = A.reshape(len(A), -1)
        pos = np.argmax(flat != 0, axis=1)
        v = flat[np.arange(len(A)), pos]
        cands = np.stack([F.mul_arr(np.int64(s), v) for s in self.scalars], axis=1)
        choice = np.array(self.scalars, dtype=np.int64)[np.argmin(cands, axis=1)]
        return F.mul_arr(choice[:, None, None], A)


def projective_eq(a: Matrix, b: Matrix, spec: GroupSpec) -> bool:
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return MatrixBackend(spec).eq(a, b)


def exponent_bound(spec: GroupSpec) -> int:
    """Global exponent: the exponent of GL_d(q) divides the returned value."""
    d, p, q = spec.dim, spec.p, spec.q
    e = 0
    while p**e < d:
        e += 1
    return p**e * lcm(*(q**i - 1 for i in range(1, d + 1)))


# -- Curtis-Tits configuration --------------------------------------------------


@dataclass
class WhiteboxConfig:
    spec: GroupSpec
    roots: list[tuple[int, int]]
    node_gens: list[list[Matrix]]
    supports: list[tuple[int, ...]]
    is_sl2: list[bool]
    central_involutions: list[Matrix | None]
    edges: frozenset
    j: Matrix | None = None
    sl2s: list[RootSL2] = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return self.spec.n

    def adjacent(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.edges

    def neighbors(self, a: int) -> list[int]:
        return sorted(b for e in self.edges if a in e for b in e if b != a)


def ct_config(spec: GroupSpec) -> WhiteboxConfig:
    if spec.family == "A" and spec.n < 2:
        raise PreconditionError("extended Curtis-Tits configuration needs rank >= 2")
    backend = MatrixBackend(spec)
    F = spec.field
    roots = node_roots(spec)
    sl2s = [RootSL2(spec, r) for r in roots]
    gens, supports, flags, cinv = [], [], [], []
    minus_one = F.neg(1)
    for s in sl2s:
        gens.append(s.generators())
        supports.append(s.support)
        z = s.h(minus_one)
        central = backend.is_identity(z)
        flags.append(not central)
        cinv.append(None if central else z)
    j = None
    if spec.family == "C":
        if spec.q % 4 != 1:
            raise PreconditionError("type C configuration needs q = 1 mod 4")
        eps = F.power_of_gen((spec.q - 1) // 4)
        n = spec.n
        j = np.diag([eps] * n + [F.inv(eps)] * n).astype(np.int64)
    return WhiteboxConfig(
        spec=spec,
        roots=roots,
        node_gens=gens,
        supports=supports,
        is_sl2=flags,
        central_involutions=cinv,
        edges=diagram_edges(spec.family, spec.n),
        j=j,
        sl2s=sl2s,
    )


def classical_generators(spec: GroupSpec) -> list[Matrix]:
    if spec.family == "A" and spec.n == 1:
        s = RootSL2(spec, (0, 1))
        return [s.x(1), s.h(spec.field.gen), s.n(1)]
    gens = []
    for r in node_roots(spec)[1:]:
        gens.extend(RootSL2(spec, r).generators())
    return gens


# -- white-box oracles ----------------------------------------------------------


def oracle_is_unipotent(M: Matrix, spec: GroupSpec) -> bool:
    F, d = spec.field, spec.dim
    neg_one = F.neg(1)
    for lam in spec.center_scalars():
        N = F.add_arr(F.scale(lam, M), F.scale(neg_one, _identity(d)))
        P = N
        for _ in range(d - 1):
            P = F.matmul(P, N)
        if not P.any():
            return True
    return False


def oracle_in_block(M: Matrix, node: int, config: WhiteboxConfig) -> bool:
    spec = config.spec
    F, d = spec.field, spec.dim
    inside = np.zeros((d, d), dtype=bool)
    sup = list(config.supports[node])
    inside[np.ix_(sup, sup)] = True
    I = _identity(d)
    for lam in spec.center_scalars():
        S = F.scale(lam, M)
        if np.array_equal(S[~inside], I[~inside]):
            return True
    return False


def oracle_is_toral(M: Matrix, spec: GroupSpec) -> bool:
    backend = MatrixBackend(spec)
    P = backend.pow(M, spec.q - 1)
    off = P[~np.eye(spec.dim, dtype=bool)]
    return not off.any() and len(set(np.diag(P).tolist())) == 1
