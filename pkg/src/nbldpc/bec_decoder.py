"""Iterative erasure decoding on sets of eligible symbols.

Messages are affine subspaces of GF(2^p).  :func:`decode` runs a flooding
schedule; for p <= 4 it works on integer set codes from
:class:`~nbldpc.subspace_lattice.AffineAlgebra` inside a jitted kernel,
otherwise it falls back to :func:`decode_reference`, which applies
:func:`check_update` and :func:`variable_update` edge by edge on
:class:`AffineSet` objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numba
import numpy as np

from .subspace_lattice import MAX_GRASSMANNIAN_DEGREE, AffineSet, Subspace, affine_algebra
from .tanner_code import LdpcCode, symbols_to_bits

ERASED = -1


class DecodingContradiction(RuntimeError):
    """An eligible set became empty: the observations fit no codeword."""


@dataclass
class ChannelOutput:
    """Per-symbol bit observations; ``bits[n, j]`` is ``b_j`` of symbol ``n``
    (0, 1, or ``ERASED``)."""

    bits: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.int8)
        if self.bits.ndim != 2 or np.any((self.bits < -1) | (self.bits > 1)):
            raise ValueError("channel output must be an (N, p) array over {0, 1, -1}")

    @property
    def N(self) -> int:
        return self.bits.shape[0]

    @property
    def p(self) -> int:
        return self.bits.shape[1]

    def classify(self) -> np.ndarray:
        """Per symbol: ``"received"``, ``"partial"`` or ``"erased"``."""
        n_erased = (self.bits == ERASED).sum(axis=1)
        out = np.full(self.N, "partial", dtype=object)
        out[n_erased == 0] = "received"
        out[n_erased == self.p] = "erased"
        return out

    @classmethod
    def from_lines(cls, lines, epsilon=None) -> "ChannelOutput":
        rows = []
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            # most significant bit first
            rows.append([{"0": 0, "1": 1, "x": ERASED}[ch] for ch in reversed(line)])
        if len({len(r) for r in rows}) > 1:
            raise ValueError("channel lines have different lengths")
        return cls(np.array(rows, dtype=np.int8).reshape(len(rows), -1), epsilon)

    def to_lines(self) -> list[str]:
        sym = {0: "0", 1: "1", ERASED: "x"}
        return ["".join(sym[int(b)] for b in row[::-1]) for row in self.bits]

    @classmethod
    def read(cls, path) -> "ChannelOutput":
        return cls.from_lines(Path(path).read_text().splitlines())

    def write(self, path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n")


def transmit(codeword, p: int, epsilon: float, rng: np.random.Generator) -> ChannelOutput:
    """Send the constituent bits of ``codeword`` through BEC(epsilon)."""
    bits = symbols_to_bits(codeword, p).astype(np.int8).reshape(-1, p)
    erased = rng.random(bits.shape) < epsilon
    bits[erased] = ERASED
    return ChannelOutput(bits, epsilon)


def a_priori_set(bits, p: int) -> AffineSet:
    offset = 0
    free = []
    for j, b in enumerate(bits):
        if b == ERASED:
            free.append(1 << j)
        else:
            offset |= int(b) << j
    return AffineSet(p, offset, Subspace.span(p, free))


def a_priori_sets(channel: ChannelOutput) -> list[AffineSet]:
    return [a_priori_set(row, channel.p) for row in channel.bits]


@lru_cache(maxsize=None)
def _pattern_codes(p: int) -> np.ndarray:
    """Set code for each observation pattern, indexed by sum((b_j + 1) * 3**j)."""
    alg = affine_algebra(p)
    out = np.zeros(3 ** p, dtype=np.int64)
    for idx in range(3 ** p):
        bits = [(idx // 3 ** j) % 3 - 1 for j in range(p)]
        out[idx] = alg.code[a_priori_set(bits, p)]
    return out


def a_priori_codes(channel: ChannelOutput) -> np.ndarray:
    p = channel.p
    idx = ((channel.bits.astype(np.int64) + 1) * (3 ** np.arange(p))).sum(axis=1)
    return _pattern_codes(p)[idx]


# --- object-level update rules ----------------------------------------------


@dataclass
class DecoderState:
    """Eligible sets at one point of the iteration.

    ``var_to_check[e]`` and ``check_to_var[e]`` are indexed by edge.
    """

    a_priori: list
    var_to_check: list
    check_to_var: list
    a_posteriori: list
    iteration: int = 0

    @classmethod
    def initial(cls, code: LdpcCode, channel: ChannelOutput) -> "DecoderState":
        prior = a_priori_sets(channel)
        full = AffineSet.full(code.p)
        return cls(
            prior,
            [prior[int(v)] for v in code.vars],
            [full] * code.E,
            list(prior),
        )


def check_update(code: LdpcCode, state: DecoderState, e: int) -> AffineSet:
    """Message from check ``checks[e]`` to variable ``vars[e]``: the sum of
    the other incoming messages, each multiplied by its edge label."""
    m = int(code.checks[e])
    out = AffineSet.point(code.p, 0)
    for f in code.check_edges[m]:
        if f != e:
            out = out + state.var_to_check[f].act(code.edge_label(f))
    return out


def variable_update(code: LdpcCode, state: DecoderState, e: int) -> AffineSet:
    """Message from variable ``vars[e]`` to check ``checks[e]``: the a priori
    set intersected with the other incoming messages pulled back by their
    labels."""
    n = int(code.vars[e])
    out = state.a_priori[n]
    for f in code.var_edges[n]:
        if f != e:
            out = out & state.check_to_var[f].act(code.edge_label(f).inverse())
    return out


def a_posteriori(code: LdpcCode, state: DecoderState, n: int) -> AffineSet:
    out = state.a_priori[n]
    for f in code.var_edges[n]:
        out = out & state.check_to_var[f].act(code.edge_label(f).inverse())
    return out


@dataclass
class DecodeResult:
    sets: list
    outcome: str  # "success" | "stalled"
    iterations: int
    codes: np.ndarray | None = field(default=None, repr=False)

    @property
    def success(self) -> bool:
        return self.outcome == "success"

    @property
    def symbols(self) -> list[int | None]:
        return [s.offset if s.is_singleton else None for s in self.sets]

    def residual_bits(self) -> int:
        """Constituent bits still undetermined."""
        return sum(s.direction.dim for s in self.sets)


def decode_reference(code: LdpcCode, channel: ChannelOutput, max_iters: int | None = None,
                     trace=None) -> DecodeResult:
    """Flooding decoder on :class:`AffineSet` objects; any p."""
    max_iters = code.N if max_iters is None else max_iters
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    state = DecoderState.initial(code, channel)
    it = 0
    outcome = "stalled"
    for it in range(1, max_iters + 1):
        old = (state.var_to_check, state.check_to_var, state.a_posteriori)
        state.check_to_var = [check_update(code, state, e) for e in range(code.E)]
        state.var_to_check = [variable_update(code, state, e) for e in range(code.E)]
        state.a_posteriori = [a_posteriori(code, state, n) for n in range(code.N)]
        state.iteration = it
        if trace is not None:
            trace(state)
        if any(s.is_empty for s in state.a_posteriori):
            raise DecodingContradiction(f"empty eligible set at iteration {it}")
        if all(s.is_singleton for s in state.a_posteriori):
            outcome = "success"
            break
        if (state.var_to_check, state.check_to_var, state.a_posteriori) == old:
            break
    return DecodeResult(list(state.a_posteriori), outcome, it)


# --- fast path ---------------------------------------------------------------


@numba.njit(cache=True)
def _flood_once(add, meet, act, inv_act, lab, check_ptr, var_ptr, var_list, prior,
                A, B, post, zero, full, buf, pre):
    """One flooding iteration in place; returns whether any message changed."""
    changed = False
    n_checks = check_ptr.shape[0] - 1
    for m in range(n_checks):
        lo = check_ptr[m]
        d = check_ptr[m + 1] - lo
        acc = zero
        for k in range(d):
            e = lo + k
            buf[k] = act[lab[e], A[e]]
            pre[k] = acc
            acc = add[acc, buf[k]]
        acc = zero
        for k in range(d - 1, -1, -1):
            e = lo + k
            v = add[pre[k], acc]
            if B[e] != v:
                B[e] = v
                changed = True
            acc = add[acc, buf[k]]
    n_vars = var_ptr.shape[0] - 1
    for n in range(n_vars):
        lo = var_ptr[n]
        d = var_ptr[n + 1] - lo
        acc = full
        for k in range(d):
            e = var_list[lo + k]
            buf[k] = inv_act[lab[e], B[e]]
            pre[k] = acc
            acc = meet[acc, buf[k]]
        p = meet[prior[n], acc]
        if post[n] != p:
            post[n] = p
            changed = True
        acc = full
        for k in range(d - 1, -1, -1):
            e = var_list[lo + k]
            v = meet[prior[n], meet[pre[k], acc]]
            if A[e] != v:
                A[e] = v
                changed = True
            acc = meet[acc, buf[k]]
    return changed


class FastTables:
    """Per-code arrays consumed by the jitted kernels."""

    def __init__(self, code: LdpcCode):
        alg = affine_algebra(code.p)
        self.alg = alg
        self.act = np.stack([alg.action(h) for h in code.labels]) if code.labels else \
            np.zeros((1, alg.n), dtype=np.int64)
        self.inv_act = np.stack([alg.action(h.inverse()) for h in code.labels]) if code.labels else \
            np.zeros((1, alg.n), dtype=np.int64)
        self.lab = code.label_idx.astype(np.int64)
        self.check_ptr = np.concatenate([[0], np.cumsum(code.check_degrees())]).astype(np.int64)
        self.var_ptr = np.concatenate([[0], np.cumsum(code.var_degrees())]).astype(np.int64)
        self.var_list = np.argsort(code.vars, kind="stable").astype(np.int64)
        dmax = max(int(code.check_degrees().max(initial=0)), int(code.var_degrees().max(initial=0)), 1)
        self.buf = np.zeros(dmax, dtype=np.int64)
        self.pre = np.zeros(dmax, dtype=np.int64)


def fast_tables(code: LdpcCode) -> FastTables:
    cached = code.__dict__.get("_fast_tables")
    if cached is None:
        cached = code.__dict__["_fast_tables"] = FastTables(code)
    return cached


def decode(code: LdpcCode, channel: ChannelOutput, max_iters: int | None = None,
           trace=None) -> DecodeResult:
    """Flooding decoder; stops on all-singleton a posteriori sets, on a fixed
    point, or after ``max_iters`` iterations (default ``N``).

    ``trace``, if given, receives a :class:`DecoderState` after every
    iteration.
    """
    if channel.N != code.N or channel.p != code.p:
        raise ValueError("channel output does not match the code dimensions")
    if code.p > MAX_GRASSMANNIAN_DEGREE:
        return decode_reference(code, channel, max_iters, trace)
    max_iters = code.N if max_iters is None else max_iters
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    t = fast_tables(code)
    alg = t.alg
    prior = a_priori_codes(channel)
    A = prior[code.vars].copy()
    B = np.full(code.E, alg.full, dtype=np.int64)
    post = prior.copy()
    outcome = "stalled"
    it = 0
    for it in range(1, max_iters + 1):
        changed = _flood_once(alg.add, alg.meet, t.act, t.inv_act, t.lab, t.check_ptr,
                                    t.var_ptr, t.var_list, prior, A, B, post, alg.zero,
                                    alg.full, t.buf, t.pre)
        if trace is not None:
            trace(DecoderState([alg.sets[c] for c in prior], [alg.sets[c] for c in A],
                               [alg.sets[c] for c in B], [alg.sets[c] for c in post], it))
        if np.any(post == 0):
            raise DecodingContradiction(f"empty eligible set at iteration {it}")
        if alg.is_single[post].all():
            outcome = "success"
            break
        if not changed:
            break
    return DecodeResult([alg.sets[c] for c in post], outcome, it, post)


def decode_erasures(code: LdpcCode, channel: ChannelOutput, max_iters: int | None = None
                    ) -> tuple[bool, int]:
    """(success, residual undetermined bits) without materializing sets."""
    res = decode(code, channel, max_iters)
    if res.codes is not None:
        sizes = affine_algebra(code.p).size[res.codes]
        return res.success, int(np.log2(sizes).sum())
    return res.success, res.residual_bits()
