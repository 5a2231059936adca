"""Black box groups, straight-line programs and the involution toolkit.

A :class:`BlackBox` only exposes multiplication, inversion, equality and random
elements.  Every element carries a reference into a shared straight-line
program so that any output can be re-evaluated from the input generators.

Conjugation is ``x^g = g^-1 x g`` throughout.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .arith import two_adic_split
from .errors import BudgetExceeded, EvenCase, OddCase, OddOrder, TrivialProduct

# -- straight-line programs ---------------------------------------------------


class SLP:
    """A DAG of ``gen`` / ``mul`` / ``inv`` / ``pow`` nodes, deduplicated."""

    def __init__(self, ngens: int):
        self.ngens = ngens
        self.nodes: list[tuple] = []
        self._index: dict[tuple, int] = {}
        for i in range(ngens):
            self.add(("gen", i))

    def add(self, node: tuple) -> int:
        idx = self._index.get(node)
        if idx is None:
            idx = len(self.nodes)
            self.nodes.append(node)
            self._index[node] = idx
        return idx

    def __len__(self) -> int:
        return len(self.nodes)

    def _children(self, node: tuple) -> tuple[int, ...]:
        kind = node[0]
        if kind == "mul":
            return node[1], node[2]
        if kind in ("inv", "pow"):
            return (node[1],)
        return ()

    def closure(self, roots: Iterable[int]) -> list[int]:
        """Node indices reachable from ``roots``, in increasing (topological) order."""
        seen: set[int] = set()
        stack = list(roots)
        while stack:
            r = stack.pop()
            if r in seen:
                continue
            seen.add(r)
            stack.extend(self._children(self.nodes[r]))
        return sorted(seen)

    def evaluate(self, roots: Sequence[int], gens: Sequence, mul, inv, power) -> list:
        """Replay the program on concrete generators; iterative, shared subterms evaluated once."""
        values: dict[int, Any] = {}
        for idx in self.closure(roots):
            node = self.nodes[idx]
            kind = node[0]
            if kind == "gen":
                values[idx] = gens[node[1]]
            elif kind == "mul":
                values[idx] = mul(values[node[1]], values[node[2]])
            elif kind == "inv":
                values[idx] = inv(values[node[1]])
            else:
                values[idx] = power(values[node[1]], node[2])
        return [values[r] for r in roots]

    def to_steps(self, roots: Sequence[int]) -> tuple[list[dict], list[int]]:
        """Serialize the sub-DAG below ``roots``; returns (steps, root step indices)."""
        order = self.closure(roots)
        remap = {old: new for new, old in enumerate(order)}
        steps = []
        for old in order:
            node = self.nodes[old]
            kind = node[0]
            if kind == "gen":
                steps.append({"gen": node[1]})
            elif kind == "mul":
                steps.append({"mul": [remap[node[1]], remap[node[2]]]})
            elif kind == "inv":
                steps.append({"inv": remap[node[1]]})
            else:
                steps.append({"pow": [remap[node[1]], str(node[2])]})
        return steps, [remap[r] for r in roots]


def replay_steps(steps: Sequence[dict], gens: Sequence, mul, inv, power) -> list:
    """Evaluate a serialized step list; returns the value of every step."""
    out: list = []
    for st in steps:
        if "gen" in st:
            out.append(gens[st["gen"]])
        elif "mul" in st:
            a, b = st["mul"]
            out.append(mul(out[a], out[b]))
        elif "inv" in st:
            out.append(inv(out[st["inv"]]))
        elif "pow" in st:
            a, e = st["pow"]
            out.append(power(out[a], int(e)))
        else:
            raise ValueError(f"unknown SLP step {st!r}")
    return out


def slp_json(box: "BlackBox", named: dict[str, "Element"]) -> dict:
    names = list(named)
    steps, idx = box.slp.to_steps([named[k].ref for k in names])
    return {"ngens": box.slp.ngens, "steps": steps, "outputs": dict(zip(names, idx))}


def replay_slp_json(doc: dict | str, gens: Sequence, mul, inv, power) -> dict:
    if isinstance(doc, str):
        doc = json.loads(doc)
    values = replay_steps(doc["steps"], gens, mul, inv, power)
    return {k: values[i] for k, i in doc["outputs"].items()}


# -- elements and boxes --------------------------------------------------------


@dataclass(eq=False)
class Element:
    box: "BlackBox"
    ref: int
    value: Any = field(repr=False)

    def __mul__(self, other: "Element") -> "Element":
        return self.box.mul(self, other)

    def __pow__(self, N: int) -> "Element":
        return self.box.pow(self, N)

    def inverse(self) -> "Element":
        return self.box.inv(self)

    def conj(self, g: "Element") -> "Element":
        """self^g = g^-1 self g."""
        return self.box.conj(self, g)

    def is_one(self) -> bool:
        return self.box.is_one(self)


class BlackBox:
    """Black box group over an arbitrary backend.

    ``mul``, ``inv``, ``eq`` act on backend values; ``exponent`` is a global
    exponent E (multiple of every element order).  ``key`` (optional) maps a
    value to a hashable canonical representative for closure computations.
    """

    def __init__(
        self,
        gens: Sequence,
        mul: Callable,
        inv: Callable,
        eq: Callable,
        identity,
        exponent: int,
        key: Callable | None = None,
        power: Callable | None = None,
        seed: int = 0,
        name: str = "G",
    ):
        self._mul, self._inv, self._eq = mul, inv, eq
        self._key = key
        self._power = power
        self.identity_value = identity
        self.name = name
        self.slp = SLP(len(gens))
        self.gens = [Element(self, i, g) for i, g in enumerate(gens)]
        self.set_exponent(exponent)
        self.stats: Counter = Counter()
        self.rng = random.Random(seed)
        self._pr: _ProductReplacement | None = None

    # exponent data
    def set_exponent(self, E: int):
        self.E = E
        self.a2, self.m = two_adic_split(E)

    @property
    def root(self) -> "BlackBox":
        return self

    # raw operations
    def _wrap(self, node: tuple, value) -> Element:
        return Element(self, self.slp.add(node), value)

    def mul(self, x: Element, y: Element) -> Element:
        self.stats["mul"] += 1
        return self._wrap(("mul", x.ref, y.ref), self._mul(x.value, y.value))

    def inv(self, x: Element) -> Element:
        self.stats["inv"] += 1
        return self._wrap(("inv", x.ref), self._inv(x.value))

    def pow(self, x: Element, N: int) -> Element:
        self.stats["pow"] += 1
        N = int(N)
        return self._wrap(("pow", x.ref, N), self._raw_pow(x.value, N))

    def _raw_pow(self, v, N: int):
        if self._power is not None:
            return self._power(v, N)
        if N < 0:
            v, N = self._inv(v), -N
        result, base = self.identity_value, v
        while N:
            if N & 1:
                result = self._mul(result, base)
            N >>= 1
            if N:
                base = self._mul(base, base)
        return result

    def identity(self) -> Element:
        return self._wrap(("pow", 0, 0), self.identity_value)

    def conj(self, x: Element, g: Element) -> Element:
        return self.mul(self.mul(self.inv(g), x), g)

    def comm(self, x: Element, y: Element) -> Element:
        """[x, y] = x^-1 y^-1 x y."""
        return self.mul(self.mul(self.inv(x), self.inv(y)), self.mul(x, y))

    def raw_eq(self, a, b) -> bool:
        return self._eq(a, b)

    def eq(self, x: Element, y: Element) -> bool:
        self.stats["eq"] += 1
        return self._eq(x.value, y.value)

    def is_one(self, x: Element) -> bool:
        self.stats["eq"] += 1
        return self._eq(x.value, self.identity_value)

    def raw_key(self, v):
        if self._key is None:
            raise TypeError("this black box has no canonical keys")
        return self._key(v)

    def key(self, x: Element):
        return self.raw_key(x.value)

    def element(self, ref: int, value) -> Element:
        return Element(self, ref, value)

    # random elements
    def random(self) -> Element:
        if self._pr is None:
            self._pr = _ProductReplacement(self, self.gens)
        self.stats["random"] += 1
        return self._pr.next()

    def sub_box(self, gens: Sequence[Element], center: Sequence[Element] = (), exponent: int | None = None, name: str = "H") -> "SubBox":
        return SubBox(self, gens, center=center, exponent=exponent, name=name)


class SubBox(BlackBox):
    """Subgroup of a parent box, optionally modulo a central subgroup ``center``.

    Shares the parent's program and backend; equality and keys are taken
    modulo the listed central elements (which must form a subgroup).
    """

    def __init__(self, parent: BlackBox, gens: Sequence[Element], center: Sequence[Element] = (), exponent: int | None = None, name: str = "H"):
        self.parent = parent
        self._mul, self._inv = parent._mul, parent._inv
        self._key = parent._key
        self._power = parent._power
        self.identity_value = parent.identity_value
        self.name = name
        self.slp = parent.slp
        self.gens = [Element(self, g.ref, g.value) for g in gens]
        self.center_elements = list(center) + list(getattr(parent, "center_elements", []))
        self.center_values = [z.value for z in center]
        self.set_exponent(parent.E if exponent is None else exponent)
        self.stats = parent.stats
        self.rng = random.Random(parent.rng.getrandbits(64))
        self._pr = None

    @property
    def root(self) -> BlackBox:
        return self.parent.root

    def _eq(self, a, b) -> bool:
        if self.parent.raw_eq(a, b):
            return True
        return any(self.parent.raw_eq(a, self._mul(b, z)) for z in self.center_values)

    def raw_eq(self, a, b) -> bool:
        return self._eq(a, b)

    def raw_key(self, v):
        keys = [self.parent.raw_key(v)]
        keys += [self.parent.raw_key(self._mul(v, z)) for z in self.center_values]
        return min(keys)

    def adopt(self, x: Element) -> Element:
        """View an element of the ambient program as a member of this box."""
        return Element(self, x.ref, x.value)


class _ProductReplacement:
    def __init__(self, box: BlackBox, gens: Sequence[Element], slots: int = 10, burn_in: int = 50):
        if not gens:
            raise ValueError("product replacement needs a nonempty generator list")
        self.box = box
        self.nslots = max(slots, 10, 2 * len(gens))
        self.slots = [gens[i % len(gens)] for i in range(self.nslots)]
        self.acc = box.identity()
        for _ in range(max(burn_in, 50)):
            self._step()

    def _step(self) -> Element:
        box, rng = self.box, self.box.rng
        i, j = rng.sample(range(self.nslots), 2)
        other = self.slots[j] if rng.random() < 0.5 else box.inv(self.slots[j])
        if rng.random() < 0.5:
            self.slots[i] = box.mul(self.slots[i], other)
        else:
            self.slots[i] = box.mul(other, self.slots[i])
        self.acc = box.mul(self.acc, self.slots[i])
        return self.acc

    def next(self) -> Element:
        return self._step()


def pr_init(box: BlackBox, gens: Sequence[Element] | None = None, slots: int = 10, burn_in: int = 50) -> "_ProductReplacement":
    """(Re)initialize the random-element state of ``box``."""
    box._pr = _ProductReplacement(box, box.gens if gens is None else gens, slots, burn_in)
    return box._pr


def pr_next(box: BlackBox) -> Element:
    return box.random()


def sub_box(box: BlackBox, gens: Sequence[Element]) -> "SubBox":
    if not gens:
        raise ValueError("sub_box needs generators")
    return box.sub_box(gens)


def matrix_box(spec, gens=None, seed: int = 0, name: str | None = None) -> BlackBox:
    """Black box for a classical matrix group (see :mod:`.matgroup`)."""
    from .matgroup import MatrixBackend, classical_generators, exponent_bound

    backend = MatrixBackend(spec)
    if gens is None:
        gens = classical_generators(spec)
    box = BlackBox(
        gens,
        mul=backend.mul,
        inv=backend.inv,
        eq=backend.eq,
        identity=backend.identity,
        exponent=exponent_bound(spec),
        key=backend.key,
        power=backend.pow,
        seed=seed,
        name=name or str(spec),
    )
    box.backend = backend
    return box


# -- involution toolkit ----------------------------------------------------------


def bb_pow(x: Element, N: int) -> Element:
    return x.box.pow(x, N)


def is_odd_order(x: Element) -> bool:
    return x.box.is_one(x.box.pow(x, x.box.m))


def extract_involution(x: Element) -> Element:
    """Last non-identity term of x^m, x^2m, x^4m, ...; raises OddOrder."""
    box = x.box
    y = box.pow(x, box.m)
    if box.is_one(y):
        raise OddOrder("element has odd order")
    for _ in range(box.a2 + 1):
        z = box.mul(y, y)
        if box.is_one(z):
            return y
        y = z
    raise AssertionError("exponent bound too small for this element")


def _product(i: Element, x: Element) -> Element:
    """i * (i^-1)^x; equals i i^x for a true involution."""
    box = i.box
    return box.mul(i, box.conj(box.inv(i), x))


def zeta1(i: Element, x: Element) -> Element:
    """Element of C(i) built from x when i i^x has odd order."""
    box = i.box
    c = _product(i, x)
    if not box.is_one(box.pow(c, box.m)):
        raise EvenCase("product has even order")
    s = box.pow(c, (box.m + 1) // 2)
    return box.mul(s, box.inv(x))


def zeta0(i: Element, x: Element) -> Element:
    """Involution of C(i) built from x when i i^x has even order."""
    box = i.box
    c = _product(i, x)
    if box.is_one(c):
        raise TrivialProduct("i i^x is trivial")
    if box.is_one(box.pow(c, box.m)):
        raise OddCase("product has odd order")
    return extract_involution(c)


def classify(i: Element, x: Element) -> tuple[str, Element]:
    """Dispatch to zeta1 or zeta0: returns ("zeta1" | "zeta0", value)."""
    box = i.box
    c = _product(i, x)
    if box.is_one(box.pow(c, box.m)):
        s = box.pow(c, (box.m + 1) // 2)
        return "zeta1", box.mul(s, box.inv(x))
    return "zeta0", extract_involution(c)


class CentralizerSampler:
    """Random elements of C(i) via zeta1; zeta0 values are kept on the side."""

    def __init__(self, i: Element, budget: int = 256):
        self.i = i
        self.budget = budget
        self.zeta0_values: list[Element] = []
        self.draws = 0

    def next(self) -> Element:
        box = self.i.box
        for _ in range(self.budget):
            self.draws += 1
            kind, val = classify(self.i, box.random())
            if kind == "zeta1":
                return val
            self.zeta0_values.append(val)
        raise BudgetExceeded("centralizer sampling", self.budget)

    def __iter__(self):
        while True:
            yield self.next()


def centralizer_sampler(i: Element, budget: int = 256) -> CentralizerSampler:
    return CentralizerSampler(i, budget)
