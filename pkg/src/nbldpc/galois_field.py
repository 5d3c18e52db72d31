"""GF(2^p) arithmetic and the label groups acting on it.

Symbols are plain integers in ``[0, 2**p)``; bit ``j`` of the integer is the
constituent bit ``b_j``.  Two label groups are supported:

* ``"field"``  -- nonzero field elements acting by field multiplication;
* ``"matrix"`` -- invertible p x p binary matrices acting on the bit vector.

Every label exposes the same small surface (``apply``, ``inverse``,
``matrix``, ``perm``) so the rest of the package never needs to know which
group it is working with.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

MAX_DEGREE = 8
MAX_MATRIX_ENUM_DEGREE = 4
GROUP_KINDS = ("field", "matrix")


def _clmul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def _polymod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def is_irreducible(poly: int) -> bool:
    """Exhaustive factor check; fine for the degrees used here (<= 8)."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for cand in range(1 << d, 1 << (d + 1)):
            if _polymod(poly, cand) == 0:
                return False
    return True


@lru_cache(maxsize=None)
def default_polynomial(p: int) -> int:
    """Lexicographically smallest irreducible polynomial of degree ``p``."""
    for poly in range(1 << p, 1 << (p + 1)):
        if is_irreducible(poly):
            return poly
    raise ValueError(f"no irreducible polynomial of degree {p}")  # pragma: no cover


class GaloisField:
    """GF(2^p) defined by a reduction polynomial given as a bit pattern."""

    def __init__(self, p: int, poly: int | None = None):
        if not 1 <= p <= MAX_DEGREE:
            raise ValueError(f"extension degree must be in [1, {MAX_DEGREE}], got {p}")
        if poly is None:
            poly = default_polynomial(p)
        if poly.bit_length() - 1 != p:
            raise ValueError(f"polynomial {poly:#b} does not have degree {p}")
        if not is_irreducible(poly):
            raise ValueError(f"polynomial {poly:#b} is reducible")
        self.p = p
        self.poly = poly
        self.q = 1 << p
        q = self.q
        mul = np.zeros((q, q), dtype=np.int64)
        for a in range(q):
            for b in range(a, q):
                mul[a, b] = mul[b, a] = _polymod(_clmul(a, b), poly)
        mul.setflags(write=False)
        self.mul_table = mul
        inv = np.zeros(q, dtype=np.int64)
        for a in range(1, q):
            inv[a] = int(np.flatnonzero(mul[a] == 1)[0])
        inv.setflags(write=False)
        self.inv_table = inv

    def __repr__(self):
        return f"GaloisField(p={self.p}, poly={self.poly:#b})"

    def __eq__(self, other):
        return isinstance(other, GaloisField) and (self.p, self.poly) == (other.p, other.poly)

    def __hash__(self):
        return hash((self.p, self.poly))

    def __reduce__(self):
        return (get_field, (self.p, self.poly))

    def check(self, s: int) -> int:
        if not 0 <= s < self.q:
            raise ValueError(f"symbol {s} outside GF({self.q})")
        return s

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        return int(self.mul_table[a, b])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return int(self.inv_table[a])

    def bits(self, s: int) -> tuple[int, ...]:
        """Constituent bits ``(b_0, ..., b_{p-1})``."""
        return tuple((s >> j) & 1 for j in range(self.p))

    def from_bits(self, bits) -> int:
        return sum(int(b) << j for j, b in enumerate(bits))


@lru_cache(maxsize=None)
def get_field(p: int, poly: int | None = None) -> GaloisField:
    return GaloisField(p, poly)


# --- labels -----------------------------------------------------------------


def _rows_to_masks(rows) -> tuple[int, ...]:
    return tuple(sum(int(b) << j for j, b in enumerate(row)) for row in rows)


def _apply_masks(masks: tuple[int, ...], s: int) -> int:
    out = 0
    for i, m in enumerate(masks):
        out |= (bin(m & s).count("1") & 1) << i
    return out


def _gf2_inverse(rows: tuple[tuple[int, ...], ...]) -> tuple[tuple[int, ...], ...] | None:
    p = len(rows)
    aug = [list(r) + [int(i == j) for j in range(p)] for i, r in enumerate(rows)]
    for c in range(p):
        piv = next((r for r in range(c, p) if aug[r][c]), None)
        if piv is None:
            return None
        aug[c], aug[piv] = aug[piv], aug[c]
        for r in range(p):
            if r != c and aug[r][c]:
                aug[r] = [x ^ y for x, y in zip(aug[r], aug[c])]
    return tuple(tuple(r[p:]) for r in aug)


class _LabelMixin:
    @property
    def p(self) -> int:  # pragma: no cover - overridden
        raise NotImplementedError

    def apply(self, s: int) -> int:  # pragma: no cover - overridden
        raise NotImplementedError

    @cached_property
    def perm(self) -> tuple[int, ...]:
        """Image of every symbol, ``perm[s] == h*s``."""
        return tuple(self.apply(s) for s in range(1 << self.p))

    def __mul__(self, other):
        return compose_labels(self, other)


@dataclass(frozen=True)
class FieldUnit(_LabelMixin):
    """Nonzero field element acting by multiplication."""

    value: int
    gf: GaloisField = field(repr=False)
    kind = "field"

    def __post_init__(self):
        if not 0 < self.value < self.gf.q:
            raise ValueError(f"field label must be a nonzero element of GF({self.gf.q})")

    @property
    def p(self) -> int:
        return self.gf.p

    def apply(self, s: int) -> int:
        return int(self.gf.mul_table[self.value, s])

    def inverse(self) -> "FieldUnit":
        return FieldUnit(self.gf.inv(self.value), self.gf)

    @cached_property
    def matrix(self) -> tuple[tuple[int, ...], ...]:
        # column j is the image of the j-th unit vector
        cols = [self.apply(1 << j) for j in range(self.p)]
        return tuple(tuple((cols[j] >> i) & 1 for j in range(self.p)) for i in range(self.p))

    def serialize(self) -> str:
        return str(self.value)

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class BinMatrix(_LabelMixin):
    """Invertible p x p matrix over GF(2); row ``i`` yields output bit ``b_i``."""

    rows: tuple[tuple[int, ...], ...]
    kind = "matrix"

    def __post_init__(self):
        rows = tuple(tuple(int(b) & 1 for b in r) for r in self.rows)
        p = len(rows)
        if p == 0 or any(len(r) != p for r in rows):
            raise ValueError("label matrix must be square and nonempty")
        if _gf2_inverse(rows) is None:
            raise ValueError("label matrix is singular over GF(2)")
        object.__setattr__(self, "rows", rows)

    @property
    def p(self) -> int:
        return len(self.rows)

    @cached_property
    def _masks(self) -> tuple[int, ...]:
        return _rows_to_masks(self.rows)

    def apply(self, s: int) -> int:
        return _apply_masks(self._masks, s)

    def inverse(self) -> "BinMatrix":
        return BinMatrix(_gf2_inverse(self.rows))

    @property
    def matrix(self) -> tuple[tuple[int, ...], ...]:
        return self.rows

    def serialize(self) -> str:
        return "".join(str(b) for r in self.rows for b in r)

    def __str__(self):
        return self.serialize()

    @classmethod
    def from_pattern(cls, pattern: str) -> "BinMatrix":
        """Parse a row-major bit pattern such as ``"0110"``."""
        pattern = pattern.strip()
        p = int(round(len(pattern) ** 0.5))
        if p * p != len(pattern) or set(pattern) - {"0", "1"}:
            raise ValueError(f"bad matrix label pattern {pattern!r}")
        return cls(tuple(tuple(int(c) for c in pattern[i * p:(i + 1) * p]) for i in range(p)))

    @classmethod
    def identity(cls, p: int) -> "BinMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(p)) for i in range(p)))


Label = FieldUnit | BinMatrix


def apply_label(h: Label, s: int) -> int:
    return h.apply(s)


def invert_label(h: Label) -> Label:
    return h.inverse()


def compose_labels(g: Label, h: Label) -> Label:
    """The label acting as ``s -> g(h(s))``."""
    if isinstance(g, FieldUnit) and isinstance(h, FieldUnit):
        if g.gf != h.gf:
            raise ValueError("labels from different fields")
        return FieldUnit(g.gf.mul(g.value, h.value), g.gf)
    a, b = g.matrix, h.matrix
    p = len(a)
    rows = tuple(
        tuple(sum(a[i][k] & b[k][j] for k in range(p)) & 1 for j in range(p)) for i in range(p)
    )
    return BinMatrix(rows)


def identity_label(gf: GaloisField, kind: str) -> Label:
    if kind == "field":
        return FieldUnit(1, gf)
    if kind == "matrix":
        return BinMatrix.identity(gf.p)
    raise ValueError(f"unknown label group {kind!r}")


def parse_label(gf: GaloisField, kind: str, text: str) -> Label:
    if kind == "field":
        return FieldUnit(int(text, 0), gf)
    if kind == "matrix":
        m = BinMatrix.from_pattern(text)
        if m.p != gf.p:
            raise ValueError(f"matrix label {text!r} is not {gf.p}x{gf.p}")
        return m
    raise ValueError(f"unknown label group {kind!r}")


@lru_cache(maxsize=None)
def _invertible_matrices(p: int) -> tuple[BinMatrix, ...]:
    out = []
    for pattern in itertools.product((0, 1), repeat=p * p):
        rows = tuple(tuple(pattern[i * p:(i + 1) * p]) for i in range(p))
        if _gf2_inverse(rows) is not None:
            out.append(BinMatrix(rows))
    return tuple(out)


def enumerate_label_group(gf: GaloisField, kind: str) -> list[Label]:
    """Every element of the label group, each exactly once."""
    if kind == "field":
        return [FieldUnit(v, gf) for v in range(1, gf.q)]
    if kind == "matrix":
        if gf.p > MAX_MATRIX_ENUM_DEGREE:
            raise ValueError(
                f"refusing to enumerate GL({gf.p}, 2); only p <= {MAX_MATRIX_ENUM_DEGREE} supported"
            )
        return list(_invertible_matrices(gf.p))
    raise ValueError(f"unknown label group {kind!r}")
