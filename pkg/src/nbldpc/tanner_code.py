"""Labeled Tanner graphs: ensembles, sampling, binary image and encoding."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .galois_field import (
    GROUP_KINDS,
    GaloisField,
    enumerate_label_group,
    get_field,
    identity_label,
    parse_label,
)

PDF_TOL = 1e-9


class InfeasibleEnsemble(ValueError):
    """Degree profile cannot be realized at the requested length."""


# --- degree distributions ---------------------------------------------------


def _normalize(coeffs: dict[int, float], name: str) -> dict[int, float]:
    out = {int(d): float(c) for d, c in coeffs.items() if float(c) != 0.0}
    if not out:
        raise ValueError(f"{name} is empty")
    if any(d < 1 for d in out) or any(c < 0 for c in out.values()):
        raise ValueError(f"{name} needs degrees >= 1 and nonnegative coefficients")
    if abs(sum(out.values()) - 1.0) > PDF_TOL:
        raise ValueError(f"{name} coefficients sum to {sum(out.values())}, expected 1")
    return dict(sorted(out.items()))


def parse_poly(text: str) -> dict[int, float]:
    """Parse ``"0.5@2,0.5@5"`` (coefficient @ node degree, edge perspective).

    A leading ``"tag:"`` on the whole string is ignored.
    """
    text = text.strip()
    if ":" in text.split("@", 1)[0]:
        text = text.split(":", 1)[1]
    out: dict[int, float] = {}
    for term in text.split(","):
        term = term.strip()
        if not term:
            continue
        coeff, _, deg = term.partition("@")
        if not deg:
            raise ValueError(f"degree term {term!r} must look like coeff@degree")
        out[int(deg)] = out.get(int(deg), 0.0) + float(coeff)
    return out


def format_poly(coeffs: dict[int, float]) -> str:
    return ",".join(f"{c:g}@{d}" for d, c in sorted(coeffs.items()))


@dataclass(frozen=True)
class DegreeDist:
    """Edge-perspective degree distributions ``lambda_d`` and ``rho_d``."""

    lam: dict
    rho: dict

    def __post_init__(self):
        object.__setattr__(self, "lam", _normalize(self.lam, "lambda"))
        object.__setattr__(self, "rho", _normalize(self.rho, "rho"))

    @classmethod
    def parse(cls, lam: str | dict, rho: str | dict) -> "DegreeDist":
        lam = parse_poly(lam) if isinstance(lam, str) else {int(k): v for k, v in lam.items()}
        rho = parse_poly(rho) if isinstance(rho, str) else {int(k): v for k, v in rho.items()}
        return cls(lam, rho)

    @property
    def d_v(self) -> int:
        return max(self.lam)

    @property
    def d_c(self) -> int:
        return max(self.rho)

    @property
    def lam_integral(self) -> float:
        return sum(c / d for d, c in self.lam.items())

    @property
    def rho_integral(self) -> float:
        return sum(c / d for d, c in self.rho.items())

    @property
    def design_rate(self) -> float:
        return 1.0 - self.rho_integral / self.lam_integral

    @property
    def mean_var_degree(self) -> float:
        return 1.0 / self.lam_integral

    @property
    def mean_check_degree(self) -> float:
        return 1.0 / self.rho_integral

    def node_fractions(self, which: str) -> dict[int, float]:
        coeffs = self.lam if which == "variable" else self.rho
        tot = sum(c / d for d, c in coeffs.items())
        return {d: (c / d) / tot for d, c in coeffs.items()}

    def to_json(self) -> dict:
        return {"lambda": format_poly(self.lam), "rho": format_poly(self.rho)}


# --- label distributions ----------------------------------------------------


@dataclass(frozen=True)
class LabelPdf:
    """Finite-support probability distribution over edge labels."""

    gf: GaloisField
    kind: str
    support: tuple

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown label group {self.kind!r}")
        merged: dict = {}
        for h, w in self.support:
            w = float(w)
            if w < 0:
                raise ValueError("label probabilities must be nonnegative")
            if h.p != self.gf.p or h.kind != self.kind:
                raise ValueError(f"label {h} does not belong to the {self.kind} group of GF({self.gf.q})")
            merged[h] = merged.get(h, 0.0) + w
        support = tuple((h, w) for h, w in merged.items() if w > 0)
        if not support:
            raise ValueError("label pdf has empty support")
        total = sum(w for _, w in support)
        if abs(total - 1.0) > PDF_TOL:
            raise ValueError(f"label pdf sums to {total}, expected 1")
        object.__setattr__(self, "support", support)

    @classmethod
    def uniform(cls, gf: GaloisField, kind: str) -> "LabelPdf":
        labels = enumerate_label_group(gf, kind)
        return cls(gf, kind, tuple((h, 1.0 / len(labels)) for h in labels))

    @classmethod
    def point(cls, gf: GaloisField, kind: str, label=None) -> "LabelPdf":
        return cls(gf, kind, ((label or identity_label(gf, kind), 1.0),))

    @classmethod
    def parse(cls, gf: GaloisField, kind: str, text) -> "LabelPdf":
        """``"uniform"``, ``"value:prob,..."``, a dict, or a probability list.

        A list gives probabilities of field labels ``1, 2, ..., q-1`` in order.
        """
        if isinstance(text, str) and text.strip().lower() == "uniform":
            return cls.uniform(gf, kind)
        if isinstance(text, (list, tuple)):
            if kind != "field":
                raise ValueError("positional label pdf only supported for field labels")
            if len(text) != gf.q - 1:
                raise ValueError(f"expected {gf.q - 1} probabilities, got {len(text)}")
            items = [(str(i + 1), w) for i, w in enumerate(text)]
        elif isinstance(text, dict):
            items = list(text.items())
        else:
            items = []
            for term in str(text).split(","):
                if term.strip():
                    val, _, prob = term.partition(":")
                    items.append((val.strip(), _parse_prob(prob)))
        support = tuple((parse_label(gf, kind, str(v)), _parse_prob(w)) for v, w in items)
        return cls(gf, kind, support)

    @property
    def labels(self):
        return [h for h, _ in self.support]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.support])

    def is_uniform(self) -> bool:
        try:
            group = enumerate_label_group(self.gf, self.kind)
        except ValueError:
            return False
        if len(self.support) != len(group):
            return False
        return all(abs(w - 1.0 / len(group)) <= PDF_TOL for _, w in self.support)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Indices into :attr:`labels`."""
        return rng.choice(len(self.support), size=size, p=self.weights / self.weights.sum())

    def to_json(self):
        return {str(h.serialize()): w for h, w in self.support}


def _parse_prob(x) -> float:
    if isinstance(x, (int, float)):
        return float(x)
    return float(Fraction(str(x).strip()))


# --- codes -------------------------------------------------------------------


def _gf2_echelon(rows) -> dict[int, int]:
    """Echelon basis of int-bitset rows keyed by leading bit."""
    basis: dict[int, int] = {}
    for r in rows:
        while r:
            lead = r.bit_length() - 1
            b = basis.get(lead)
            if b is None:
                basis[lead] = r
                break
            r ^= b
    return basis


class LdpcCode:
    """Parity-check matrix over a label group, stored as a labeled edge list.

    Edge ``e`` joins check ``checks[e]`` and variable ``vars[e]`` with label
    ``labels[label_idx[e]]``.  Edges are sorted by (check, variable).
    """

    def __init__(self, gf: GaloisField, kind: str, n: int, m: int, edges):
        self.gf = gf
        self.kind = kind
        self.N = int(n)
        self.M = int(m)
        edges = sorted((int(c), int(v), h) for c, v, h in edges)
        seen = set()
        labels: list = []
        lab_index: dict = {}
        ck, vr, li = [], [], []
        for c, v, h in edges:
            if not (0 <= c < self.M and 0 <= v < self.N):
                raise ValueError(f"edge ({c}, {v}) out of range")
            if (c, v) in seen:
                raise ValueError(f"parallel edge between check {c} and variable {v}")
            if h.p != gf.p or h.kind != kind:
                raise ValueError(f"label {h} is not a {kind} label over GF({gf.q})")
            seen.add((c, v))
            if h not in lab_index:
                lab_index[h] = len(labels)
                labels.append(h)
            ck.append(c)
            vr.append(v)
            li.append(lab_index[h])
        self.checks = np.array(ck, dtype=np.int64)
        self.vars = np.array(vr, dtype=np.int64)
        self.label_idx = np.array(li, dtype=np.int64)
        self.labels = labels
        self.check_edges = [[] for _ in range(self.M)]
        self.var_edges = [[] for _ in range(self.N)]
        for e, (c, v) in enumerate(zip(ck, vr)):
            self.check_edges[c].append(e)
            self.var_edges[v].append(e)

    @property
    def p(self) -> int:
        return self.gf.p

    @property
    def E(self) -> int:
        return len(self.checks)

    def edge_label(self, e: int):
        return self.labels[self.label_idx[e]]

    def edges(self):
        for e in range(self.E):
            yield int(self.checks[e]), int(self.vars[e]), self.edge_label(e)

    def __eq__(self, other):
        return (
            isinstance(other, LdpcCode)
            and (self.gf, self.kind, self.N, self.M) == (other.gf, other.kind, other.N, other.M)
            and list(self.edges()) == list(other.edges())
        )

    def var_degrees(self) -> np.ndarray:
        return np.bincount(self.vars, minlength=self.N)

    def check_degrees(self) -> np.ndarray:
        return np.bincount(self.checks, minlength=self.M)

    def parity_rows(self) -> list[int]:
        """Rows of the binary image as int bitsets (bit ``n*p + j``)."""
        p = self.p
        rows = [0] * (self.M * p)
        for c, v, h in self.edges():
            for i, row in enumerate(h.matrix):
                for j, bit in enumerate(row):
                    if bit:
                        rows[c * p + i] ^= 1 << (v * p + j)
        return rows

    @cached_property
    def _echelon(self) -> dict[int, int]:
        return _gf2_echelon(self.parity_rows())

    @cached_property
    def info_columns(self) -> list[int]:
        """Binary positions carrying message bits in :func:`encode`."""
        return sorted(set(range(self.N * self.p)) - set(self._echelon))

    @property
    def K_bin(self) -> int:
        return self.N * self.p - len(self._echelon)

    @property
    def rate(self) -> float:
        return self.K_bin / (self.N * self.p)


@dataclass(frozen=True)
class BinaryImage:
    H_bin: np.ndarray
    K_bin: int


def binary_image(code: LdpcCode) -> BinaryImage:
    """Expand every label into its p x p action matrix.

    Column ``n*p + j`` carries bit ``b_j`` of symbol ``n``; row ``m*p + i``
    is output bit ``i`` of check ``m``.
    """
    p = code.p
    H = np.zeros((code.M * p, code.N * p), dtype=np.uint8)
    for c, v, h in code.edges():
        H[c * p:(c + 1) * p, v * p:(v + 1) * p] = np.array(h.matrix, dtype=np.uint8)
    return BinaryImage(H, code.K_bin)


def symbols_to_bits(symbols, p: int) -> np.ndarray:
    s = np.asarray(symbols, dtype=np.int64)
    return ((s[:, None] >> np.arange(p)) & 1).astype(np.uint8).reshape(-1)


def bits_to_symbols(bits, p: int) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).reshape(-1, p)
    return (b << np.arange(p)).sum(axis=1)


def encode(code: LdpcCode, message) -> np.ndarray:
    """Map ``K_bin`` message bits onto a codeword.

    Message bits land on :attr:`LdpcCode.info_columns`; the remaining bits are
    solved from the echelon form of ``H_bin`` by back-substitution.
    """
    free = code.info_columns
    msg = np.asarray(message, dtype=np.int64).reshape(-1)
    if msg.size != len(free):
        raise ValueError(f"message has {msg.size} bits, code dimension is {len(free)}")
    if np.any((msg != 0) & (msg != 1)):
        raise ValueError("message must be binary")
    word = 0
    for c, b in zip(free, msg):
        if b:
            word |= 1 << c
    for lead in sorted(code._echelon):
        if bin(code._echelon[lead] & word).count("1") & 1:
            word |= 1 << lead
    bits = np.array([(word >> i) & 1 for i in range(code.N * code.p)], dtype=np.int64)
    return bits_to_symbols(bits, code.p)


def verify_codeword(code: LdpcCode, word) -> bool:
    word = [int(s) for s in word]
    if len(word) != code.N:
        raise ValueError(f"word length {len(word)} != N = {code.N}")
    acc = [0] * code.M
    for c, v, h in code.edges():
        acc[c] ^= h.apply(word[v])
    return not any(acc)


def random_codeword(code: LdpcCode, rng: np.random.Generator) -> np.ndarray:
    return encode(code, rng.integers(0, 2, size=code.K_bin))


# --- sampling ----------------------------------------------------------------


def _largest_remainder(total: int, fractions: dict[int, float]) -> dict[int, int]:
    raw = {d: total * f for d, f in fractions.items()}
    counts = {d: int(np.floor(r + 1e-9)) for d, r in raw.items()}
    short = total - sum(counts.values())
    for d in sorted(raw, key=lambda d: raw[d] - counts[d], reverse=True)[:short]:
        counts[d] += 1
    return counts


def degree_sequences(n: int, dist: DegreeDist) -> tuple[list[int], list[int]]:
    """Variable and check node degrees realizing ``dist`` with ``n`` variables.

    Variable counts use largest-remainder rounding; check counts must come out
    integral from the resulting edge count.
    """
    if n < 1:
        raise InfeasibleEnsemble("need at least one variable node")
    vcounts = _largest_remainder(n, dist.node_fractions("variable"))
    n_edges = sum(d * k for d, k in vcounts.items())
    ccounts = {}
    for d, r in dist.rho.items():
        x = n_edges * r / d
        if abs(x - round(x)) > 1e-6:
            raise InfeasibleEnsemble(
                f"{n_edges} edges give {x:.4f} check nodes of degree {d}; not an integer"
            )
        ccounts[d] = int(round(x))
    if sum(d * k for d, k in ccounts.items()) != n_edges:
        raise InfeasibleEnsemble("check degrees do not match the edge count")
    vdeg = [d for d, k in sorted(vcounts.items()) for _ in range(k)]
    cdeg = [d for d, k in sorted(ccounts.items()) for _ in range(k)]
    return vdeg, cdeg


def sample_code(n: int, dist: DegreeDist, pdf: LabelPdf, seed=None,
                retries: int = 200, restarts: int = 50, min_girth: int | None = None) -> LdpcCode:
    """Configuration-model sample of the ensemble with labels drawn from ``pdf``.

    ``min_girth`` optionally conditions the graph: check sockets on cycles
    shorter than this are swapped away until none are left (the degree
    profile is unchanged).  This samples an expurgated ensemble, not the
    plain one.
    """
    vdeg, cdeg = degree_sequences(n, dist)
    if max(cdeg) > n:
        raise InfeasibleEnsemble(f"check degree {max(cdeg)} exceeds N = {n}")
    rng = np.random.default_rng(seed)
    vsock = np.repeat(np.arange(len(vdeg)), vdeg)
    csock = np.repeat(np.arange(len(cdeg)), cdeg)
    for _ in range(restarts):
        perm = rng.permutation(len(csock))
        cs = csock[perm]
        ok = _resolve_parallel(vsock, cs, rng, retries)
        if ok and min_girth:
            ok = _remove_short_cycles(vsock, cs, len(cdeg), min_girth, rng, retries)
        if ok:
            labels = pdf.labels
            lab = pdf.sample(rng, len(vsock))
            edges = [(int(c), int(v), labels[i]) for c, v, i in zip(cs, vsock, lab)]
            return LdpcCode(pdf.gf, pdf.kind, len(vdeg), len(cdeg), edges)
    raise InfeasibleEnsemble("could not sample a graph without parallel edges")


def _resolve_parallel(vs: np.ndarray, cs: np.ndarray, rng, retries: int) -> bool:
    """Swap check sockets in place until no (check, variable) pair repeats."""
    E = len(vs)
    for _ in range(retries):
        pairs = cs * (vs.max() + 1) + vs
        _, first = np.unique(pairs, return_index=True)
        dup = np.setdiff1d(np.arange(E), first)
        if dup.size == 0:
            return True
        for e in dup:
            f = rng.integers(E)
            cs[e], cs[f] = cs[f], cs[e]
    return False


def _short_cycle_edges(vs: np.ndarray, cs: np.ndarray, m: int, girth: int) -> list[int]:
    """Edges lying on a cycle of length < ``girth``."""
    n = int(vs.max()) + 1
    var_adj = [[] for _ in range(n)]
    chk_adj = [[] for _ in range(m)]
    for e, (v, c) in enumerate(zip(vs.tolist(), cs.tolist())):
        var_adj[v].append((e, c))
        chk_adj[c].append((e, v))
    bad = []
    for e0, (v0, c0) in enumerate(zip(vs.tolist(), cs.tolist())):
        # walk from c0 without e0; reaching v0 within girth-2 steps closes a short cycle
        seen_c, seen_v = {c0}, set()
        frontier, depth, hit = [c0], 0, False
        while frontier and depth + 1 <= girth - 2 and not hit:
            nxt = []
            for c in frontier:
                for e, v in chk_adj[c]:
                    if e == e0 or v in seen_v:
                        continue
                    if v == v0:
                        hit = True
                        break
                    seen_v.add(v)
                    nxt.append(v)
                if hit:
                    break
            depth += 1
            if hit or depth + 1 > girth - 2:
                break
            frontier = []
            for v in nxt:
                for e, c in var_adj[v]:
                    if c not in seen_c:
                        seen_c.add(c)
                        frontier.append(c)
            depth += 1
        if hit:
            bad.append(e0)
    return bad


def _remove_short_cycles(vs, cs, m: int, girth: int, rng, passes: int) -> bool:
    for _ in range(passes):
        bad = _short_cycle_edges(vs, cs, m, girth)
        if not bad:
            return True
        for e in rng.permutation(bad)[: max(1, len(bad) // 2)]:
            f = rng.integers(len(cs))
            cs[e], cs[f] = cs[f], cs[e]
        if not _resolve_parallel(vs, cs, rng, passes):
            return False
    return False


# --- file formats ------------------------------------------------------------


def write_code(code: LdpcCode, path) -> None:
    """Labeled alist: header ``N M q kind``, a ``# poly`` line, then one line
    of 1-based ``variable label`` pairs per check."""
    lines = [f"{code.N} {code.M} {code.gf.q} {code.kind}", f"# poly {code.gf.poly}"]
    for c in range(code.M):
        pairs = [f"{code.vars[e] + 1} {code.edge_label(e).serialize()}" for e in code.check_edges[c]]
        lines.append(" ".join(pairs))
    Path(path).write_text("\n".join(lines) + "\n")


def read_code(path) -> LdpcCode:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty code file")
    head = text[0].split()
    if len(head) != 4:
        raise ValueError(f"{path}: header must be 'N M q group-kind'")
    n, m, q, kind = int(head[0]), int(head[1]), int(head[2]), head[3]
    p = q.bit_length() - 1
    if 1 << p != q:
        raise ValueError(f"{path}: q = {q} is not a power of two")
    poly = None
    body = []
    for line in text[1:]:
        if line.startswith("#"):
            tok = line[1:].split()
            if len(tok) == 2 and tok[0] == "poly":
                poly = int(tok[1])
            continue
        body.append(line)
    if len(body) < m:
        raise ValueError(f"{path}: expected {m} check lines, found {len(body)}")
    gf = get_field(p, poly)
    edges = []
    for c, line in enumerate(body[:m]):
        tok = line.split()
        if len(tok) % 2:
            raise ValueError(f"{path}: check line {c + 1} has an odd number of tokens")
        for i in range(0, len(tok), 2):
            edges.append((c, int(tok[i]) - 1, parse_label(gf, kind, tok[i + 1])))
    return LdpcCode(gf, kind, n, m, edges)


@dataclass(frozen=True)
class EnsembleConfig:
    gf: GaloisField
    kind: str
    dist: DegreeDist
    pdf: LabelPdf
    seed: int | None = None
    n: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        gf = get_field(int(d["p"]), d.get("poly"))
        kind = d.get("group", "field")
        dist = DegreeDist.parse(d["lambda"], d["rho"])
        pdf = LabelPdf.parse(gf, kind, d.get("f", "uniform"))
        return cls(gf, kind, dist, pdf, d.get("seed"), d.get("n"))

    @classmethod
    def load(cls, path) -> "EnsembleConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "p": self.gf.p,
            "poly": self.gf.poly,
            "group": self.kind,
            **self.dist.to_json(),
            "f": self.pdf.to_json(),
            "seed": self.seed,
            "n": self.n,
        }
