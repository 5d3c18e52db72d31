"""Linear and affine GF(2)-subspaces of GF(2^p).

Subspaces are stored as reduced row-echelon bases of bit vectors (pivot =
highest set bit), so equal subspaces have identical encodings and can be
hashed directly.  Affine sets are ``offset + direction`` with the offset
reduced against the direction basis.

:class:`AffineAlgebra` indexes every affine subspace of a small field and
tabulates sum, intersection and label action; the decoders run on those
integer codes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .galois_field import Label

MAX_GRASSMANNIAN_DEGREE = 4


class CapacityError(ValueError):
    """Requested object is too large to enumerate."""


def _insert(basis: list[int], v: int) -> int:
    """Reduce ``v`` against an echelon ``basis``; append it if independent."""
    for b in basis:
        if v ^ b < v:
            v ^= b
    if v:
        basis.append(v)
        basis.sort(reverse=True)
    return v


def _rref(vectors) -> tuple[int, ...]:
    basis: list[int] = []
    for v in vectors:
        _insert(basis, int(v))
    # back-substitute so every pivot bit appears in exactly one vector
    basis.sort(reverse=True)
    for i, b in enumerate(basis):
        top = 1 << (b.bit_length() - 1)
        for j in range(len(basis)):
            if j != i and basis[j] & top:
                basis[j] ^= b
    return tuple(sorted(basis, reverse=True))


@dataclass(frozen=True)
class Subspace:
    """GF(2)-linear subspace of GF(2^p) in canonical echelon form."""

    p: int
    basis: tuple[int, ...] = ()

    @classmethod
    def span(cls, p: int, vectors=()) -> "Subspace":
        return cls(p, _rref(vectors))

    @classmethod
    def zero(cls, p: int) -> "Subspace":
        return cls(p, ())

    @classmethod
    def full(cls, p: int) -> "Subspace":
        return cls(p, tuple(1 << j for j in reversed(range(p))))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def size(self) -> int:
        return 1 << self.dim

    @cached_property
    def pivot_mask(self) -> int:
        m = 0
        for b in self.basis:
            m |= 1 << (b.bit_length() - 1)
        return m

    def reduce(self, v: int) -> int:
        """Canonical coset representative: ``v`` with pivot coordinates cleared."""
        for b in self.basis:
            if v & (1 << (b.bit_length() - 1)):
                v ^= b
        return v

    def __contains__(self, v: int) -> bool:
        return self.reduce(v) == 0

    def elements(self) -> list[int]:
        out = [0]
        for b in self.basis:
            out += [x ^ b for x in out]
        return sorted(out)

    def __add__(self, other: "Subspace") -> "Subspace":
        return Subspace.span(self.p, self.basis + other.basis)

    def __and__(self, other: "Subspace") -> "Subspace":
        # Zassenhaus: rows (u|u) and (w|0); rows with empty left half span the meet
        p = self.p
        rows: list[int] = []
        for u in self.basis:
            _insert(rows, (u << p) | u)
        for w in other.basis:
            _insert(rows, w << p)
        mask = (1 << p) - 1
        return Subspace.span(p, [r & mask for r in rows if r >> p == 0])

    def act(self, h: Label) -> "Subspace":
        return Subspace.span(self.p, [h.apply(b) for b in self.basis])

    def __le__(self, other: "Subspace") -> bool:
        return all(b in other for b in self.basis)

    def __repr__(self):
        return f"Subspace(p={self.p}, {self.elements()})"


@dataclass(frozen=True)
class AffineSet:
    """``offset + direction``, or the empty set when ``direction`` is None."""

    p: int
    offset: int
    direction: Subspace | None

    def __post_init__(self):
        if self.direction is not None:
            object.__setattr__(self, "offset", self.direction.reduce(self.offset))

    @classmethod
    def empty(cls, p: int) -> "AffineSet":
        return cls(p, 0, None)

    @classmethod
    def point(cls, p: int, s: int) -> "AffineSet":
        return cls(p, s, Subspace.zero(p))

    @classmethod
    def full(cls, p: int) -> "AffineSet":
        return cls(p, 0, Subspace.full(p))

    @classmethod
    def linear(cls, v: Subspace) -> "AffineSet":
        return cls(v.p, 0, v)

    @classmethod
    def from_elements(cls, p: int, elements) -> "AffineSet":
        """Build from an explicit element list; raises if it is not affine."""
        els = sorted(set(int(e) for e in elements))
        if not els:
            return cls.empty(p)
        base = els[0]
        direction = Subspace.span(p, [e ^ base for e in els])
        out = cls(p, base, direction)
        if out.elements() != els:
            raise ValueError(f"{els} is not an affine subspace")
        return out

    @property
    def is_empty(self) -> bool:
        return self.direction is None

    @property
    def size(self) -> int:
        return 0 if self.direction is None else self.direction.size

    @property
    def is_singleton(self) -> bool:
        return self.direction is not None and self.direction.dim == 0

    def elements(self) -> list[int]:
        if self.direction is None:
            return []
        return sorted(self.offset ^ v for v in self.direction.elements())

    def __contains__(self, s: int) -> bool:
        return self.direction is not None and self.direction.reduce(s ^ self.offset) == 0

    def __add__(self, other: "AffineSet") -> "AffineSet":
        if self.is_empty or other.is_empty:
            return AffineSet.empty(self.p)
        return AffineSet(self.p, self.offset ^ other.offset, self.direction + other.direction)

    def __and__(self, other: "AffineSet") -> "AffineSet":
        if self.is_empty or other.is_empty:
            return AffineSet.empty(self.p)
        u, w = self.direction, other.direction
        # write offset difference as u_part + w_part, tracking the u component
        rows: list[tuple[int, int]] = []
        for vec, tag in [(b, b) for b in u.basis] + [(b, 0) for b in w.basis]:
            for r, t in rows:
                if vec ^ r < vec:
                    vec ^= r
                    tag ^= t
            if vec:
                rows.append((vec, tag))
                rows.sort(reverse=True)
        d = self.offset ^ other.offset
        upart = 0
        for r, t in rows:
            if d ^ r < d:
                d ^= r
                upart ^= t
        if d:
            return AffineSet.empty(self.p)
        return AffineSet(self.p, self.offset ^ upart, u & w)

    def act(self, h: Label) -> "AffineSet":
        if self.is_empty:
            return self
        return AffineSet(self.p, h.apply(self.offset), self.direction.act(h))

    def __repr__(self):
        if self.is_empty:
            return f"AffineSet(p={self.p}, empty)"
        return f"AffineSet(p={self.p}, {self.elements()})"


def sum_sets(a: AffineSet, b: AffineSet) -> AffineSet:
    return a + b


def intersect(a: AffineSet, b: AffineSet) -> AffineSet:
    return a & b


def act(h: Label, a):
    return a.act(h)


class Grassmannian:
    """All linear subspaces of GF(2^p), ordered by (dimension, basis)."""

    def __init__(self, p: int):
        if p > MAX_GRASSMANNIAN_DEGREE:
            raise CapacityError(
                f"Grassmannian enumeration limited to p <= {MAX_GRASSMANNIAN_DEGREE}, got {p}"
            )
        self.p = p
        found = {Subspace.zero(p)}
        frontier = list(found)
        while frontier:
            nxt = []
            for v in frontier:
                for x in range(1, 1 << p):
                    if x not in v:
                        w = Subspace.span(p, v.basis + (x,))
                        if w not in found:
                            found.add(w)
                            nxt.append(w)
            frontier = nxt
        self.spaces: list[Subspace] = sorted(found, key=lambda v: (v.dim, v.basis))
        self.index: dict[Subspace, int] = {v: i for i, v in enumerate(self.spaces)}

    def __len__(self):
        return len(self.spaces)

    def __iter__(self):
        return iter(self.spaces)

    def __getitem__(self, i):
        return self.spaces[i]

    @cached_property
    def sum_table(self) -> np.ndarray:
        n = len(self)
        t = np.empty((n, n), dtype=np.int64)
        for i, a in enumerate(self.spaces):
            for j, b in enumerate(self.spaces):
                t[i, j] = self.index[a + b]
        t.setflags(write=False)
        return t

    @cached_property
    def meet_table(self) -> np.ndarray:
        n = len(self)
        t = np.empty((n, n), dtype=np.int64)
        for i, a in enumerate(self.spaces):
            for j, b in enumerate(self.spaces):
                t[i, j] = self.index[a & b]
        t.setflags(write=False)
        return t

    def action(self, h: Label) -> np.ndarray:
        """Permutation of subspace indices induced by ``V -> hV``."""
        return np.array([self.index[v.act(h)] for v in self.spaces], dtype=np.int64)

    @cached_property
    def dims(self) -> np.ndarray:
        return np.array([v.dim for v in self.spaces], dtype=np.int64)


@lru_cache(maxsize=None)
def enumerate_grassmannian(p: int) -> Grassmannian:
    return Grassmannian(p)


def conjugation_classes(g: Grassmannian, labels) -> list[list[int]]:
    """Orbits of the label action on ``g``, as sorted index lists."""
    perms = [g.action(h) for h in labels]
    seen: set[int] = set()
    classes = []
    for i in range(len(g)):
        if i in seen:
            continue
        orbit = {i}
        stack = [i]
        while stack:
            j = stack.pop()
            for perm in perms:
                k = int(perm[j])
                if k not in orbit:
                    orbit.add(k)
                    stack.append(k)
        seen |= orbit
        classes.append(sorted(orbit))
    return classes


class AffineAlgebra:
    """Integer-coded affine subspaces of GF(2^p) with tabulated operations.

    Code 0 is the empty set.  Tables are numpy arrays so they can be used
    from vectorized or jitted code; ``sets[c]`` maps a code back to its
    :class:`AffineSet`.
    """

    def __init__(self, p: int):
        g = enumerate_grassmannian(p)
        self.p = p
        self.q = q = 1 << p
        sets = [AffineSet.empty(p)]
        lin_of = [-1]
        off_of = [0]
        for li, v in enumerate(g.spaces):
            for off in sorted({v.reduce(s) for s in range(q)}):
                sets.append(AffineSet(p, off, v))
                lin_of.append(li)
                off_of.append(off)
        self.sets = sets
        self.code = {a: i for i, a in enumerate(sets)}
        n = len(sets)
        self.n = n

        masks = np.zeros(n, dtype=np.int64)
        for i, a in enumerate(sets):
            for e in a.elements():
                masks[i] |= 1 << e
        self.masks = masks
        self.size = np.array([a.size for a in sets], dtype=np.int64)
        self.is_single = self.size == 1

        # sum: offsets add, directions span
        lin = np.array(lin_of)
        off = np.array(off_of)
        red = np.array([[v.reduce(s) for s in range(q)] for v in g.spaces], dtype=np.int64)
        lut = {(lin_of[i], off_of[i]): i for i in range(1, n)}
        code_of = np.zeros((len(g), q), dtype=np.int64)
        for (li, o), c in lut.items():
            for s in range(q):
                if red[li, s] == o:
                    code_of[li, s] = c
        ls = g.sum_table[lin[1:, None], lin[None, 1:]]
        os_ = red[ls, off[1:, None] ^ off[None, 1:]]
        add = np.zeros((n, n), dtype=np.int64)
        add[1:, 1:] = code_of[ls, os_]

        # intersection via element bitmasks
        order = np.argsort(masks)
        meet_masks = masks[:, None] & masks[None, :]
        pos = np.searchsorted(masks[order], meet_masks)
        meet = order[pos]
        assert np.array_equal(masks[meet], meet_masks)

        for t in (add, meet):
            t.setflags(write=False)
        self.add = add
        self.meet = meet
        self.zero = self.code[AffineSet.point(p, 0)]
        self.full = self.code[AffineSet.full(p)]
        # bit constraints: bit_set[j, v] = {s : b_j(s) = v}
        self.bit_set = np.array(
            [[self.code[AffineSet.from_elements(p, [s for s in range(q) if (s >> j) & 1 == v])]
              for v in (0, 1)] for j in range(p)],
            dtype=np.int64,
        )

    def action(self, h: Label) -> np.ndarray:
        perm = h.perm
        out = np.zeros(self.n, dtype=np.int64)
        for i, m in enumerate(self.masks):
            img = 0
            for s in range(self.q):
                if (int(m) >> s) & 1:
                    img |= 1 << perm[s]
            out[i] = self._code_of_mask[img]
        return out

    @cached_property
    def _code_of_mask(self) -> dict[int, int]:
        return {int(m): i for i, m in enumerate(self.masks)}

    def encode(self, a: AffineSet) -> int:
        return self.code[a]

    def decode(self, c: int) -> AffineSet:
        return self.sets[int(c)]

    def singleton_value(self, c: int) -> int:
        return self.sets[int(c)].offset


@lru_cache(maxsize=None)
def affine_algebra(p: int) -> AffineAlgebra:
    return AffineAlgebra(p)
