"""Minimum-delay (on-the-fly) decoding and inefficiency measurement.

Bits arrive one at a time.  Each arrival trims the eligible set of its
symbol, then every check touching a shrunken symbol is re-solved and any
neighbour that shrinks is queued in turn.  The queue is FIFO; the final
state does not depend on the order because every step only intersects.

The module also carries the Monte-Carlo side: per-trial inefficiency
``mu = K_received / K_bin``, fixed-epsilon block failure curves, and a
trapezoidal integral of such a curve with its standard error.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._parallel import parallel_map
from .bec_decoder import ERASED, ChannelOutput, DecodingContradiction, decode, transmit
from .subspace_lattice import MAX_GRASSMANNIAN_DEGREE, AffineSet, affine_algebra
from .tanner_code import LdpcCode, random_codeword, symbols_to_bits

# --- arrival streams -----------------------------------------------------------


@dataclass
class ArrivalStream:
    """Ordered ``(symbol, bit position, bit value)`` triples."""

    triples: np.ndarray  # (K, 3) int64

    def __post_init__(self):
        t = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)
        self.triples = t

    def __len__(self):
        return len(self.triples)

    def __iter__(self):
        return iter(map(tuple, self.triples.tolist()))

    def prefix(self, k: int) -> "ArrivalStream":
        return ArrivalStream(self.triples[:k])

    def validate(self, n: int, p: int) -> None:
        t = self.triples
        if len(t) == 0:
            return
        if t[:, 0].min() < 0 or t[:, 0].max() >= n:
            raise ValueError("symbol index out of range")
        if t[:, 1].min() < 0 or t[:, 1].max() >= p:
            raise ValueError(f"bit position outside [0, {p})")
        if not np.isin(t[:, 2], (0, 1)).all():
            raise ValueError("bit values must be 0 or 1")
        slots = t[:, 0] * p + t[:, 1]
        if len(np.unique(slots)) != len(slots):
            raise ValueError("duplicate (symbol, position) pair in stream")

    @classmethod
    def shuffled(cls, codeword, p: int, rng: np.random.Generator) -> "ArrivalStream":
        """All ``N*p`` bits of ``codeword`` in uniformly random order."""
        bits = symbols_to_bits(codeword, p)
        order = rng.permutation(len(bits))
        return cls(np.stack([order // p, order % p, bits[order]], axis=1))

    @classmethod
    def read(cls, path) -> "ArrivalStream":
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                tok = line.split()
                if len(tok) != 3:
                    raise ValueError(f"{path}: expected 'symbol position value', got {line!r}")
                rows.append([int(x) for x in tok])
        return cls(np.array(rows, dtype=np.int64).reshape(-1, 3))

    def write(self, path) -> None:
        Path(path).write_text("".join(f"{n} {j} {b}\n" for n, j, b in self))

    def to_channel(self, n: int, p: int) -> ChannelOutput:
        """The same received bits as a channel output (everything else erased)."""
        bits = np.full((n, p), ERASED, dtype=np.int8)
        t = self.triples
        bits[t[:, 0], t[:, 1]] = t[:, 2]
        return ChannelOutput(bits)


# --- set operations backends --------------------------------------------------------


class _TableOps:
    """Integer-coded affine sets with tabulated operations (p <= 4)."""

    def __init__(self, code: LdpcCode):
        alg = affine_algebra(code.p)
        self.alg = alg
        self.add = alg.add.tolist()
        self.meet = alg.meet.tolist()
        self.act = [alg.action(h).tolist() for h in code.labels]
        self.inv_act = [alg.action(h.inverse()).tolist() for h in code.labels]
        self.bit_set = alg.bit_set.tolist()
        self.single = alg.is_single.tolist()
        self.zero = alg.zero
        self.full = alg.full
        self.empty = 0

    def to_set(self, c) -> AffineSet:
        return self.alg.sets[c]


class _ObjectOps:
    """Same interface on :class:`AffineSet` objects, for any p."""

    class _Table2:
        def __init__(self, fn):
            self.fn = fn

        def __getitem__(self, a):
            return _ObjectOps._Row(self.fn, a)

    class _Row:
        def __init__(self, fn, a):
            self.fn, self.a = fn, a

        def __getitem__(self, b):
            return self.fn(self.a, b)

    class _Single:
        def __getitem__(self, a):
            return a.is_singleton

    def __init__(self, code: LdpcCode):
        p = code.p
        self.add = self._Table2(lambda a, b: a + b)
        self.meet = self._Table2(lambda a, b: a & b)
        self.act = [self._Act(h) for h in code.labels]
        self.inv_act = [self._Act(h.inverse()) for h in code.labels]
        self.bit_set = [[AffineSet.from_elements(p, [s for s in range(1 << p) if (s >> j) & 1 == v])
                         for v in (0, 1)] for j in range(p)]
        self.single = self._Single()
        self.zero = AffineSet.point(p, 0)
        self.full = AffineSet.full(p)
        self.empty = AffineSet.empty(p)

    class _Act:
        def __init__(self, h):
            self.h = h

        def __getitem__(self, a):
            return a.act(self.h)

    def to_set(self, c) -> AffineSet:
        return c


# --- decoder -------------------------------------------------------------------


class OnTheFlyDecoder:
    """Incremental decoder state for one code; starts with every set full."""

    def __init__(self, code: LdpcCode):
        self.code = code
        ops = _TableOps(code) if code.p <= MAX_GRASSMANNIAN_DEGREE else _ObjectOps(code)
        self.ops = ops
        self.sets = [ops.full] * code.N
        # per check: parallel lists of variables and label indices
        self.check_vars = [code.vars[list(es)].tolist() for es in code.check_edges]
        self.check_labs = [code.label_idx[list(es)].tolist() for es in code.check_edges]
        self.var_checks = [code.checks[list(es)].tolist() for es in code.var_edges]
        self.unresolved = code.N
        self.received = 0

    @property
    def complete(self) -> bool:
        return self.unresolved == 0

    def _set(self, n: int, new) -> None:
        ops = self.ops
        if new == ops.empty:
            raise DecodingContradiction(f"eligible set of symbol {n} became empty")
        if ops.single[new] and not ops.single[self.sets[n]]:
            self.unresolved -= 1
        self.sets[n] = new

    def ingest_bit(self, n: int, pos: int, value: int) -> set[int]:
        """Receive bit ``pos`` of symbol ``n``; returns the symbols whose set shrank."""
        ops = self.ops
        if not 0 <= pos < self.code.p:
            raise ValueError(f"bit position {pos} outside [0, {self.code.p})")
        self.received += 1
        new = ops.meet[self.sets[n]][ops.bit_set[pos][int(value)]]
        if new == self.sets[n]:
            return set()
        self._set(n, new)
        changed = {n}
        queue = deque([n])
        queued = {n}
        while queue:
            v = queue.popleft()
            queued.discard(v)
            for m in self.var_checks[v]:
                for u in self._solve_check(m, skip=v):
                    changed.add(u)
                    if u not in queued:
                        queued.add(u)
                        queue.append(u)
        return changed

    def _solve_check(self, m: int, skip: int) -> list[int]:
        ops = self.ops
        vs = self.check_vars[m]
        labs = self.check_labs[m]
        d = len(vs)
        terms = [ops.act[labs[k]][self.sets[vs[k]]] for k in range(d)]
        pre = [ops.zero] * d
        acc = ops.zero
        for k in range(d):
            pre[k] = acc
            acc = ops.add[acc][terms[k]]
        shrunk = []
        acc = ops.zero
        for k in range(d - 1, -1, -1):
            u = vs[k]
            if u != skip:
                others = ops.add[pre[k]][acc]
                old = self.sets[u]
                new = ops.meet[old][ops.inv_act[labs[k]][others]]
                if new != old:
                    self._set(u, new)
                    shrunk.append(u)
            acc = ops.add[acc][terms[k]]
        return shrunk

    def affine_sets(self) -> list[AffineSet]:
        return [self.ops.to_set(c) for c in self.sets]

    def symbols(self) -> list[int | None]:
        return [s.offset if s.is_singleton else None for s in self.affine_sets()]


def ingest_bit(state: OnTheFlyDecoder, n: int, pos: int, value: int) -> set[int]:
    return state.ingest_bit(n, pos, value)


@dataclass
class StreamResult:
    k_received: int | None  # None when the stream ran out first
    sets: list = field(repr=False)

    @property
    def complete(self) -> bool:
        return self.k_received is not None


def decode_stream(code: LdpcCode, stream: ArrivalStream, stop_when_complete: bool = True
                  ) -> StreamResult:
    """Feed ``stream`` bit by bit; ``k_received`` is the first prefix length
    after which every symbol is known."""
    dec = OnTheFlyDecoder(code)
    if code.N == 0:
        return StreamResult(0, [])
    k_done = None
    for k, (n, j, b) in enumerate(stream, start=1):
        dec.ingest_bit(n, j, b)
        if k_done is None and dec.complete:
            k_done = k
            if stop_when_complete:
                break
    return StreamResult(k_done, dec.affine_sets())


def fixed_point_iterations(code: LdpcCode) -> int:
    """Iteration budget after which flooding has surely reached its fixed point:
    each productive iteration shrinks some message, and a message can shrink
    at most ``p`` times."""
    return 2 * code.E * code.p + code.N * code.p + 1


def equivalence_check(code: LdpcCode, prefix: ArrivalStream) -> bool:
    """On-the-fly state after ``prefix`` equals the batch fixed point on the same bits."""
    otf = decode_stream(code, prefix, stop_when_complete=False)
    batch = decode(code, prefix.to_channel(code.N, code.p), max_iters=fixed_point_iterations(code))
    return otf.sets == batch.sets


# --- Monte-Carlo ----------------------------------------------------------------


@dataclass
class InefficiencyReport:
    mu_samples: list[float]
    mu_mean: float
    std_error: float
    trials: int
    incomplete: int
    k_bin: int
    n_bits: int

    def to_json(self) -> dict:
        return {
            "mu_mean": self.mu_mean,
            "std_error": self.std_error,
            "trials": self.trials,
            "incomplete": self.incomplete,
            "K_bin": self.k_bin,
            "n_bits": self.n_bits,
        }


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf
    return float(x.mean()), se


def _mu_trial(args) -> int | None:
    code, seed, t = args
    rng = np.random.default_rng([seed, t])
    word = random_codeword(code, rng)
    return decode_stream(code, ArrivalStream.shuffled(word, code.p, rng)).k_received


def estimate_inefficiency(code: LdpcCode, trials: int, seed: int = 0, jobs: int = 1
                          ) -> InefficiencyReport:
    """Monte-Carlo estimate of the mean inefficiency of ``code``.

    Each trial encodes a random message and presents its bits in random
    order; trial ``t`` is seeded from ``(seed, t)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if code.K_bin == 0:
        raise ValueError("code has binary dimension 0; inefficiency is undefined")
    ks = parallel_map(_mu_trial, [(code, seed, t) for t in range(trials)], jobs)
    mus = [k / code.K_bin for k in ks if k is not None]
    mean, se = _mean_se(mus)
    return InefficiencyReport(mus, mean, se, trials, sum(k is None for k in ks),
                              code.K_bin, code.N * code.p)


@dataclass
class FailurePoint:
    epsilon: float
    trials: int
    block_failures: int
    bit_erasures_residual: int

    @property
    def rate(self) -> float:
        return self.block_failures / self.trials


def _curve_cell(args) -> tuple[int, int]:
    code, eps, seed, i, trials, zero_word = args
    fails = residual = 0
    iters = fixed_point_iterations(code)
    for t in range(trials):
        rng = np.random.default_rng([seed, i, t])
        word = np.zeros(code.N, dtype=np.int64) if zero_word else random_codeword(code, rng)
        res = decode(code, transmit(word, code.p, eps, rng), max_iters=iters)
        if not res.success:
            fails += 1
            if res.codes is not None:
                residual += int(np.log2(affine_algebra(code.p).size[res.codes]).sum())
            else:
                residual += res.residual_bits()
    return fails, residual


def failure_curve(code: LdpcCode, epsilons, trials: int, seed: int = 0, jobs: int = 1,
                  zero_word: bool = True) -> list[FailurePoint]:
    """Block failure counts of the batch decoder on an epsilon grid.

    Trial ``t`` at grid index ``i`` is seeded from ``(seed, i, t)``.  The
    erasure channel is symmetric, so the all-zero word is sent by default.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    eps = [float(e) for e in epsilons]
    if any(not 0.0 <= e <= 1.0 for e in eps):
        raise ValueError("erasure probabilities must lie in [0, 1]")
    cells = parallel_map(_curve_cell, [(code, e, seed, i, trials, zero_word)
                                       for i, e in enumerate(eps)], jobs)
    return [FailurePoint(e, trials, f, r) for e, (f, r) in zip(eps, cells)]


def integrate_curve(points: list[FailurePoint]) -> tuple[float, float]:
    """Trapezoidal integral of the failure rate over epsilon and its standard
    error (binomial variance per grid point, points independent)."""
    x = np.array([pt.epsilon for pt in points])
    if len(x) < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("need an increasing grid of at least two points")
    rate = np.array([pt.rate for pt in points])
    n = np.array([pt.trials for pt in points])
    w = np.zeros(len(x))
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    var = w ** 2 * rate * (1 - rate) / n
    return float(w @ rate), float(math.sqrt(var.sum()))


@dataclass
class IdentityCheck:
    """Side-by-side view of the mean inefficiency and the failure-curve integral."""

    mu_mean: float
    mu_se: float
    integral: float
    integral_se: float
    n_bits: int
    k_bin: int

    @property
    def combined_se(self) -> float:
        return math.hypot(self.mu_se, self.integral_se)

    @property
    def gap(self) -> float:
        """``(mu_m - 1) - integral``."""
        return (self.mu_mean - 1.0) - self.integral

    @property
    def scaled_gap(self) -> float:
        """``mu_m - (Np + 1) / K_bin * integral``: the expected number of bits
        read before completion equals ``Np + 1`` times the integral, because
        a uniform epsilon makes the number of received bits uniform on
        ``0..Np``."""
        return self.mu_mean - (self.n_bits + 1) / self.k_bin * self.integral

    @property
    def scaled_se(self) -> float:
        return math.hypot(self.mu_se, (self.n_bits + 1) / self.k_bin * self.integral_se)

    def to_json(self) -> dict:
        return {
            "mu_mean": self.mu_mean,
            "mu_se": self.mu_se,
            "mu_mean_minus_1": self.mu_mean - 1.0,
            "integral_p": self.integral,
            "integral_se": self.integral_se,
            "combined_se": self.combined_se,
            "gap": self.gap,
            "gap_in_se": self.gap / self.combined_se if self.combined_se else math.inf,
            "scaled_prediction": (self.n_bits + 1) / self.k_bin * self.integral,
            "scaled_gap": self.scaled_gap,
            "scaled_gap_in_se": self.scaled_gap / self.scaled_se if self.scaled_se else math.inf,
        }


def identity_check(report: InefficiencyReport, curve: list[FailurePoint]) -> IdentityCheck:
    integral, se = integrate_curve(curve)
    return IdentityCheck(report.mu_mean, report.std_error, integral, se,
                         report.n_bits, report.k_bin)


def write_mu_csv(report: InefficiencyReport, path) -> None:
    lines = ["trial,mu"] + [f"{i},{mu:.9f}" for i, mu in enumerate(report.mu_samples)]
    Path(path).write_text("\n".join(lines) + "\n")
