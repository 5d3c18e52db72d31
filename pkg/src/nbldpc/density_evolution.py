"""Density evolution for labeled non-binary LDPC ensembles on the BEC.

Under the all-zero codeword every message is a linear subspace of GF(2^p),
so the decoder state is a probability vector over the Grassmannian
(subspaces indexed as in :class:`~nbldpc.subspace_lattice.Grassmannian`,
index 0 is ``{0}``).  One iteration:

* check side: push the variable-to-check law through a random label, then
  sum-convolve ``d-1`` copies and mix over ``rho``;
* variable side: pull the check-to-variable law back through a random
  label, intersect-convolve ``d-1`` copies with the channel law and mix over
  ``lambda``.

The convolutions are pairwise, which is exact because incoming messages are
independent on the computation tree.  :func:`de_iteration_direct` evaluates
the same update by brute-force enumeration of label sequences and subspace
tuples and is kept as a test oracle.

Thresholds are found by bisection over epsilon; the inner loop runs in a
jitted kernel that works on sparse (src, dst, weight) transition lists, so
the same code serves the full recursion and the conjugation-class reduced
one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numba
import numpy as np

from ._parallel import parallel_map
from .galois_field import GaloisField, enumerate_label_group
from .subspace_lattice import Subspace, conjugation_classes, enumerate_grassmannian
from .tanner_code import DegreeDist, LabelPdf

MASS_TOL = 1e-9
DIRECT_BUDGET = 2_000_000


@dataclass(frozen=True)
class ThresholdQuery:
    """An ensemble ``E(lambda, rho, f)`` over GF(2^p) plus numerical settings.

    ``max_de_iters`` is large because ensembles whose threshold is set by
    the stability condition converge only linearly near it.
    """

    gf: GaloisField
    kind: str
    dist: DegreeDist
    pdf: LabelPdf
    max_de_iters: int = 100_000
    convergence_delta: float = 1e-9
    bisection_tolerance: float = 1e-5
    stall_tolerance: float = 1e-12
    stall_window: int = 10

    def __post_init__(self):
        if self.max_de_iters < 1:
            raise ValueError("max_de_iters must be >= 1")
        if min(self.convergence_delta, self.bisection_tolerance, self.stall_tolerance) <= 0:
            raise ValueError("tolerances must be positive")
        if self.pdf.gf != self.gf or self.pdf.kind != self.kind:
            raise ValueError("label pdf does not match the field / label group")

    def with_pdf(self, pdf: LabelPdf) -> "ThresholdQuery":
        return replace(self, pdf=pdf)


@dataclass
class EvolveResult:
    converged: bool
    iterations: int
    P: np.ndarray

    @property
    def error(self) -> float:
        """Probability that a variable-to-check message is not ``{0}``."""
        return float(self.P[1:].sum())


# --- jitted inner loop -------------------------------------------------------


@numba.njit(cache=True)
def _push(x, src, dst, w, out):
    out[:] = 0.0
    for t in range(src.shape[0]):
        out[dst[t]] += w[t] * x[src[t]]


@numba.njit(cache=True)
def _convolve(x, y, a, b, c, w, out):
    out[:] = 0.0
    for t in range(a.shape[0]):
        out[c[t]] += w[t] * x[a[t]] * y[b[t]]


@numba.njit(cache=True)
def _iterate(P, gamma, fwd, inv, sums, meets, rho, lam, Q, X, Y, cur, tmp):
    """One DE iteration; writes the new check law to Q and variable law to P."""
    _push(P, fwd[0], fwd[1], fwd[2], X)
    Q[:] = 0.0
    cur[:] = 0.0
    cur[0] = 1.0
    for d in range(1, rho.shape[0]):
        if d > 1:
            _convolve(cur, X, sums[0], sums[1], sums[2], sums[3], tmp)
            cur[:] = tmp
        if rho[d] != 0.0:
            Q += rho[d] * cur
    # the update squares total-mass errors; renormalize to keep it stable
    Q /= Q.sum()
    _push(Q, inv[0], inv[1], inv[2], Y)
    P[:] = 0.0
    cur[:] = gamma
    for d in range(1, lam.shape[0]):
        if d > 1:
            _convolve(cur, Y, meets[0], meets[1], meets[2], meets[3], tmp)
            cur[:] = tmp
        if lam[d] != 0.0:
            P += lam[d] * cur
    P /= P.sum()


@numba.njit(cache=True)
def _evolve(gamma, fwd, inv, sums, meets, rho, lam, max_iters, delta, stall_tol, stall_window):
    G = gamma.shape[0]
    P = gamma.copy()
    Q = np.zeros(G)
    X = np.zeros(G)
    Y = np.zeros(G)
    cur = np.zeros(G)
    tmp = np.zeros(G)
    err = P[1:].sum()
    if err <= delta:
        return True, 0, P
    stall = 0
    for it in range(1, max_iters + 1):
        _iterate(P, gamma, fwd, inv, sums, meets, rho, lam, Q, X, Y, cur, tmp)
        new = P[1:].sum()
        if new <= delta:
            return True, it, P
        if abs(err - new) <= stall_tol * new:
            stall += 1
            if stall >= stall_window:
                return False, it, P
        else:
            stall = 0
        err = new
    return False, max_iters, P


def _dense_by_degree(coeffs: dict[int, float]) -> np.ndarray:
    out = np.zeros(max(coeffs) + 1)
    for d, c in coeffs.items():
        out[d] = c
    return out


def _table_triples(table: np.ndarray):
    n = table.shape[0]
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return (a.ravel().astype(np.int64), b.ravel().astype(np.int64),
            table.ravel().astype(np.int64), np.ones(n * n))


def _dense_triples(kernel: np.ndarray):
    a, b, c = np.nonzero(kernel > 0)
    return (a.astype(np.int64), b.astype(np.int64), c.astype(np.int64), kernel[a, b, c].copy())


# --- full recursion ----------------------------------------------------------


class DensityEvolution:
    """DE over the full Grassmannian for one ensemble."""

    def __init__(self, query: ThresholdQuery):
        self.query = query
        self.grass = enumerate_grassmannian(query.gf.p)
        self.G = len(self.grass)
        self._fwd_perms = [(self.grass.action(h), w) for h, w in query.pdf.support]
        self._inv_perms = [(self.grass.action(h.inverse()), w) for h, w in query.pdf.support]

    # elementary operations

    def gamma(self, epsilon: float) -> np.ndarray:
        return gamma_dist(self.query.gf.p, epsilon)

    def scale_push(self, dist: np.ndarray, direction: str = "forward") -> np.ndarray:
        """Law of ``hV`` (forward) or ``h^-1 V`` (inverse) for ``V ~ dist``, ``h ~ f``."""
        perms = {"forward": self._fwd_perms, "inverse": self._inv_perms}[direction]
        out = np.zeros(self.G)
        for perm, w in perms:
            out[perm] += w * dist
        return out

    def check_convolve(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(self.grass.sum_table.ravel(), np.outer(a, b).ravel(), self.G)

    def variable_convolve(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(self.grass.meet_table.ravel(), np.outer(a, b).ravel(), self.G)

    def point_mass(self, v: Subspace) -> np.ndarray:
        out = np.zeros(self.G)
        out[self.grass.index[v]] = 1.0
        return out

    def de_iteration(self, P: np.ndarray, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(Q_next, P_next)`` from the current variable-to-check law."""
        dist = self.query.dist
        X = self.scale_push(P, "forward")
        Q = np.zeros(self.G)
        cur = np.zeros(self.G)
        cur[0] = 1.0
        for d in range(1, dist.d_c + 1):
            if d > 1:
                cur = self.check_convolve(cur, X)
            Q += dist.rho.get(d, 0.0) * cur
        Q /= Q.sum()
        Y = self.scale_push(Q, "inverse")
        P_next = np.zeros(self.G)
        cur = gamma.copy()
        for d in range(1, dist.d_v + 1):
            if d > 1:
                cur = self.variable_convolve(cur, Y)
            P_next += dist.lam.get(d, 0.0) * cur
        return Q, P_next / P_next.sum()

    # jitted paths

    @cached_property
    def _kernel_args(self):
        g = self.grass
        fsrc, fdst, fw, isrc, idst, iw = [], [], [], [], [], []
        for (perm, w), (iperm, _) in zip(self._fwd_perms, self._inv_perms):
            fsrc.append(np.arange(self.G))
            fdst.append(perm)
            fw.append(np.full(self.G, w))
            isrc.append(np.arange(self.G))
            idst.append(iperm)
            iw.append(np.full(self.G, w))
        fwd = (np.concatenate(fsrc), np.concatenate(fdst), np.concatenate(fw))
        inv = (np.concatenate(isrc), np.concatenate(idst), np.concatenate(iw))
        return (fwd, inv, _table_triples(g.sum_table), _table_triples(g.meet_table),
                _dense_by_degree(self.query.dist.rho), _dense_by_degree(self.query.dist.lam))

    def evolve(self, epsilon: float, max_iters: int | None = None) -> EvolveResult:
        """Iterate from ``P_0 = gamma(epsilon)`` until ``P({0}) > 1 - delta``
        (converged), the residual stalls, or the iteration budget runs out."""
        q = self.query
        fwd, inv, sums, meets, rho, lam = self._kernel_args
        conv, it, P = _evolve(self.gamma(epsilon), fwd, inv, sums, meets, rho, lam,
                              q.max_de_iters if max_iters is None else max_iters,
                              q.convergence_delta, q.stall_tolerance, q.stall_window)
        return EvolveResult(bool(conv), int(it), P)

    def threshold(self) -> float:
        return _bisect(self.evolve, self.query.bisection_tolerance)


def _bisect(evolve, tol: float) -> float:
    lo, hi = 0.0, 1.0
    if evolve(hi).converged:
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if evolve(mid).converged:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gamma_dist(p: int, epsilon: float) -> np.ndarray:
    """Law of the a priori set: the span of the erased unit vectors."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"erasure probability {epsilon} outside [0, 1]")
    g = enumerate_grassmannian(p)
    out = np.zeros(len(g))
    for erased in itertools.product((0, 1), repeat=p):
        k = sum(erased)
        v = Subspace.span(p, [1 << j for j in range(p) if erased[j]])
        out[g.index[v]] += epsilon ** k * (1.0 - epsilon) ** (p - k)
    return out


# --- functional API ---------------------------------------------------------


def scale_push(de: DensityEvolution, dist, direction="forward"):
    return de.scale_push(dist, direction)


def check_convolve(de: DensityEvolution, a, b):
    return de.check_convolve(a, b)


def variable_convolve(de: DensityEvolution, a, b):
    return de.variable_convolve(a, b)


def de_iteration(P, query: ThresholdQuery, epsilon: float):
    de = DensityEvolution(query)
    return de.de_iteration(P, de.gamma(epsilon))


def evolve(query: ThresholdQuery, epsilon: float) -> EvolveResult:
    return DensityEvolution(query).evolve(epsilon)


def threshold(query: ThresholdQuery) -> float:
    return DensityEvolution(query).threshold()


# --- brute-force oracle --------------------------------------------------------


def de_iteration_direct(P, query: ThresholdQuery, epsilon: float, budget: int = DIRECT_BUDGET):
    """Un-factored update: explicit sums over label sequences and subspace tuples.

    Works on :class:`Subspace` objects rather than the precomputed tables.
    """
    g = enumerate_grassmannian(query.gf.p)
    G = len(g)
    P = np.asarray(P, dtype=float)
    gamma = gamma_dist(query.gf.p, epsilon)
    support = query.pdf.support
    dist = query.dist
    L = len(support)
    cost = sum(L ** (d - 1) * G ** d for d in set(dist.rho) | set(dist.lam))
    if cost > budget:
        raise ValueError(f"direct enumeration needs ~{cost} terms, over budget {budget}")

    Q = np.zeros(G)
    for d, r in dist.rho.items():
        for hs in itertools.product(support, repeat=d - 1):
            fh = math.prod(w for _, w in hs)
            for vs in itertools.product(g.spaces, repeat=d - 1):
                total = Subspace.zero(g.p)
                term = fh * r
                for (h, _), v in zip(hs, vs):
                    total = total + v
                    term *= P[g.index[v.act(h.inverse())]]
                Q[g.index[total]] += term

    P_next = np.zeros(G)
    for d, lw in dist.lam.items():
        for hs in itertools.product(support, repeat=d - 1):
            fh = math.prod(w for _, w in hs)
            for v0 in g.spaces:
                if gamma[g.index[v0]] == 0.0:
                    continue
                for vs in itertools.product(g.spaces, repeat=d - 1):
                    meet = v0
                    term = fh * lw * gamma[g.index[v0]]
                    for (h, _), v in zip(hs, vs):
                        meet = meet & v
                        term *= Q[g.index[v.act(h)]]
                    P_next[g.index[meet]] += term
    return Q, P_next


# --- symmetry reduction --------------------------------------------------------


class ReducedDensityEvolution:
    """DE on conjugation classes, valid for a uniform label distribution.

    With uniform labels the pushed laws are uniform inside each orbit, so the
    recursion only needs class masses.  The class kernels give the class of
    ``U1 + U2`` (or ``U1 & U2``) for independent orbit-uniform ``U1, U2``.

    ``by="dimension"`` lumps subspaces by dimension instead; this is only
    exact when the orbits are the dimension layers, as for the full matrix
    group or the multiplicative group of GF(4) or GF(8).
    """

    def __init__(self, query: ThresholdQuery, by: str = "class"):
        if not query.pdf.is_uniform():
            raise ValueError("conjugation-class reduction requires a uniform label pdf")
        self.query = query
        self.by = by
        self.grass = g = enumerate_grassmannian(query.gf.p)
        orbits = conjugation_classes(g, enumerate_label_group(query.gf, query.kind))
        if by == "class":
            self.classes = orbits
        elif by == "dimension":
            dims = np.asarray(g.dims)
            self.classes = [list(np.flatnonzero(dims == d)) for d in range(query.gf.p + 1)]
            if len(orbits) != len(self.classes):
                raise ValueError("dimension collapse needs the label group to be transitive "
                                 "on each dimension layer")
        else:
            raise ValueError(f"unknown reduction {by!r}")
        self.class_of = np.zeros(len(g), dtype=np.int64)
        for c, members in enumerate(self.classes):
            self.class_of[members] = c
        self.sum_kernel = self._kernel(g.sum_table)
        self.meet_kernel = self._kernel(g.meet_table)

    @property
    def size(self) -> int:
        return len(self.classes)

    def _kernel(self, table: np.ndarray) -> np.ndarray:
        k = self.size
        out = np.zeros((k, k, k))
        for a, ca in enumerate(self.classes):
            for b, cb in enumerate(self.classes):
                w = 1.0 / (len(ca) * len(cb))
                for i in ca:
                    for j in cb:
                        out[a, b, self.class_of[table[i, j]]] += w
        return out

    def lump(self, dist: np.ndarray) -> np.ndarray:
        return np.bincount(self.class_of, dist, self.size)

    def gamma(self, epsilon: float) -> np.ndarray:
        return self.lump(gamma_dist(self.query.gf.p, epsilon))

    @cached_property
    def _kernel_args(self):
        ident = (np.arange(self.size), np.arange(self.size), np.ones(self.size))
        return (ident, ident, _dense_triples(self.sum_kernel), _dense_triples(self.meet_kernel),
                _dense_by_degree(self.query.dist.rho), _dense_by_degree(self.query.dist.lam))

    def evolve(self, epsilon: float, max_iters: int | None = None) -> EvolveResult:
        q = self.query
        fwd, inv, sums, meets, rho, lam = self._kernel_args
        conv, it, P = _evolve(self.gamma(epsilon), fwd, inv, sums, meets, rho, lam,
                              q.max_de_iters if max_iters is None else max_iters,
                              q.convergence_delta, q.stall_tolerance, q.stall_window)
        return EvolveResult(bool(conv), int(it), P)

    def iterate(self, P: np.ndarray, epsilon: float, n: int = 1) -> np.ndarray:
        """Class law of the variable-to-check message after ``n`` iterations."""
        fwd, inv, sums, meets, rho, lam = self._kernel_args
        k = self.size
        P = np.array(P, dtype=float)
        gamma = self.gamma(epsilon)
        bufs = [np.zeros(k) for _ in range(5)]
        for _ in range(n):
            _iterate(P, gamma, fwd, inv, sums, meets, rho, lam, *bufs)
        return P

    def threshold(self) -> float:
        return _bisect(self.evolve, self.query.bisection_tolerance)


def reduce_by_conjugation(query: ThresholdQuery, by: str = "class") -> ReducedDensityEvolution:
    return ReducedDensityEvolution(query, by)


# --- surfaces ------------------------------------------------------------------


def simplex_grid(resolution: int) -> list[tuple[float, float, float]]:
    """Points ``(i, j, k) / (resolution - 1)`` of the 2-simplex."""
    if resolution < 2:
        raise ValueError("surface resolution must be at least 2 points per axis")
    n = resolution - 1
    return [(i / n, j / n, (n - i - j) / n) for i in range(n + 1) for j in range(n + 1 - i)]


def _threshold_at(args) -> float:
    query, weights = args
    labels = enumerate_label_group(query.gf, query.kind)
    support = tuple((h, w) for h, w in zip(labels, weights) if w > 0)
    pdf = LabelPdf(query.gf, query.kind, support)
    return DensityEvolution(query.with_pdf(pdf)).threshold()


def threshold_points(query: ThresholdQuery, points, jobs: int = 1) -> list[float]:
    """Thresholds for explicit label-probability vectors over the whole group."""
    return parallel_map(_threshold_at, [(query, tuple(pt)) for pt in points], jobs)


def threshold_surface(query: ThresholdQuery, resolution: int, jobs: int = 1):
    """Thresholds over the label simplex for a 3-element label group.

    Returns rows ``(f1, f2, f3, threshold)``.
    """
    n_labels = len(enumerate_label_group(query.gf, query.kind))
    if n_labels != 3:
        raise ValueError(f"surface mode needs a 3-element label group, got {n_labels}; "
                         "use threshold_points instead")
    grid = simplex_grid(resolution)
    return [(*pt, thr) for pt, thr in zip(grid, threshold_points(query, grid, jobs))]
