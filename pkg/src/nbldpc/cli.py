"""``nbldpc`` command line.

Every command accepts ``--config file.json``; keys are the long option
names with dashes replaced by underscores, and explicit flags win over the
file.  The fully resolved configuration, its hash and the package version
are written next to every result (inside JSON outputs, or in a
``<name>.meta.json`` sidecar for CSV outputs).

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bec_decoder import ChannelOutput, DecodingContradiction, decode, transmit
from .density_evolution import (
    DensityEvolution,
    ThresholdQuery,
    reduce_by_conjugation,
    threshold_surface,
)
from .galois_field import get_field
from .onthefly_decoder import (
    ArrivalStream,
    decode_stream,
    estimate_inefficiency,
    failure_curve,
    identity_check,
    write_mu_csv,
)
from .tanner_code import (
    DegreeDist,
    InfeasibleEnsemble,
    LabelPdf,
    encode,
    read_code,
    sample_code,
    symbols_to_bits,
    write_code,
)

log = logging.getLogger("nbldpc")

SCHEMA_VERSION = 1

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "poly": None,
    "group": "field",
    "f": "uniform",
    "min_girth": None,
    "max_iters": None,
    "trials": 100,
    "epsilon": None,
    "max_de_iters": 100_000,
    "convergence_delta": 1e-9,
    "bisection_tolerance": 1e-5,
    "reduce": "none",
    "resolution": 25,
    "curve_points": 0,
    "curve_trials": 500,
}

# keys that never influence results and stay out of the hash
_NON_RESULT_KEYS = {"config", "out", "jobs", "verbose", "mu_csv", "command"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- config plumbing -------------------------------------------------------


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for k, v in vars(args).items():
        if v is not None and k != "func":
            cfg[k] = v
    return cfg


def config_hash(cfg: dict) -> str:
    kept = {k: v for k, v in cfg.items() if k not in _NON_RESULT_KEYS}
    blob = json.dumps(kept, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance(cfg: dict) -> dict:
    return {
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "config_hash": config_hash(cfg),
        "config": {k: v for k, v in sorted(cfg.items()) if k not in {"func"}},
    }


def _require(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _ensemble(cfg: dict):
    _require(cfg, "p", "lambda", "rho")
    try:
        gf = get_field(int(cfg["p"]), None if cfg["poly"] is None else int(cfg["poly"]))
        dist = DegreeDist.parse(cfg["lambda"], cfg["rho"])
        pdf = LabelPdf.parse(gf, cfg["group"], cfg["f"])
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    return gf, dist, pdf


def _query(cfg: dict) -> ThresholdQuery:
    gf, dist, pdf = _ensemble(cfg)
    try:
        return ThresholdQuery(gf, cfg["group"], dist, pdf, max_de_iters=int(cfg["max_de_iters"]),
                              convergence_delta=float(cfg["convergence_delta"]),
                              bisection_tolerance=float(cfg["bisection_tolerance"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _code(cfg: dict):
    """Read ``--code`` or sample one from the ensemble flags."""
    if cfg.get("code"):
        return read_code(cfg["code"])
    _require(cfg, "n")
    gf, dist, pdf = _ensemble(cfg)
    return sample_code(int(cfg["n"]), dist, pdf, seed=int(cfg["seed"]), min_girth=cfg["min_girth"])


def _write_json(obj, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(header: str, rows: list[str], out, cfg: dict) -> None:
    text = "\n".join([header, *rows]) + "\n"
    if out:
        Path(out).write_text(text)
        _write_json(provenance(cfg), str(out) + ".meta.json")
    else:
        sys.stdout.write(text)


def _eps_grid(text) -> list[float]:
    """``"0.1,0.2"`` or ``"start:stop:count"`` (inclusive linspace)."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    text = str(text)
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(n))]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad epsilon grid {text!r}") from exc


# --- commands --------------------------------------------------------------


def cmd_gen_code(cfg: dict) -> int:
    _require(cfg, "n", "out")
    code = _code({**cfg, "code": None})
    write_code(code, cfg["out"])
    print(f"N={code.N} M={code.M} K_bin={code.K_bin} rate={code.rate:.6f}")
    return 0


def cmd_encode(cfg: dict) -> int:
    _require(cfg, "code", "out")
    code = read_code(cfg["code"])
    rng = np.random.default_rng(int(cfg["seed"]))
    msg = cfg.get("message")
    if msg is None:
        bits = rng.integers(0, 2, size=code.K_bin)
    else:
        if set(str(msg)) - {"0", "1"}:
            raise UsageError("--message must be a string of 0/1 characters")
        bits = np.array([int(c) for c in str(msg)], dtype=np.int64)
        if len(bits) != code.K_bin:
            raise UsageError(f"message has {len(bits)} bits, code needs K_bin = {code.K_bin}")
    word = encode(code, bits)
    eps = cfg["epsilon"]
    if eps is None:
        channel = ChannelOutput(symbols_to_bits(word, code.p).reshape(-1, code.p).astype(np.int8))
    else:
        channel = transmit(word, code.p, float(eps), rng)
    channel.write(cfg["out"])
    return 0


def cmd_decode(cfg: dict) -> int:
    _require(cfg, "code")
    code = read_code(cfg["code"])
    if cfg.get("stream"):
        stream = ArrivalStream.read(cfg["stream"])
        stream.validate(code.N, code.p)
        res = decode_stream(code, stream)
        sets = res.sets
        body = {"mode": "stream", "outcome": "success" if res.complete else "incomplete",
                "k_received": res.k_received}
    else:
        _require(cfg, "channel")
        channel = ChannelOutput.read(cfg["channel"])
        res = decode(code, channel, None if cfg["max_iters"] is None else int(cfg["max_iters"]))
        sets = res.sets
        body = {"mode": "batch", "outcome": res.outcome, "iterations": res.iterations}
    body["symbols"] = [s.offset if s.is_singleton else None for s in sets]
    body["unresolved"] = {str(i): s.elements() for i, s in enumerate(sets) if not s.is_singleton}
    body["residual_bits"] = sum(s.direction.dim for s in sets)
    body.update(provenance(cfg))
    _write_json(body, cfg.get("out"))
    return 0


def cmd_simulate(cfg: dict) -> int:
    _require(cfg, "eps")
    code = _code(cfg)
    curve = failure_curve(code, _eps_grid(cfg["eps"]), int(cfg["trials"]), int(cfg["seed"]),
                          int(cfg["jobs"]))
    rows = [f"{pt.epsilon:.6f},{pt.trials},{pt.block_failures},{pt.bit_erasures_residual}"
            for pt in curve]
    _write_csv("epsilon,trials,block_failures,bit_erasures_residual", rows, cfg.get("out"), cfg)
    return 0


def cmd_threshold(cfg: dict) -> int:
    q = _query(cfg)
    if cfg["reduce"] == "none":
        engine = DensityEvolution(q)
    else:
        try:
            engine = reduce_by_conjugation(q, cfg["reduce"])
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    thr = engine.threshold()
    _write_json({"threshold": thr, **provenance(cfg)}, cfg.get("out"))
    return 0


def cmd_threshold_surface(cfg: dict) -> int:
    q = _query(cfg)
    try:
        rows = threshold_surface(q, int(cfg["resolution"]), int(cfg["jobs"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = [f"{a:.6f},{b:.6f},{c:.6f},{t:.6f}" for a, b, c, t in rows]
    _write_csv("f1,f2,f3,threshold", lines, cfg.get("out"), cfg)
    return 0


def cmd_inefficiency(cfg: dict) -> int:
    code = _code(cfg)
    report = estimate_inefficiency(code, int(cfg["trials"]), int(cfg["seed"]), int(cfg["jobs"]))
    body = {"inefficiency": report.to_json()}
    n_pts = int(cfg["curve_points"])
    if n_pts:
        curve = failure_curve(code, np.linspace(0.0, 1.0, n_pts), int(cfg["curve_trials"]),
                              int(cfg["seed"]) + 1, int(cfg["jobs"]))
        body["integral_check"] = identity_check(report, curve).to_json()
    body.update(provenance(cfg))
    _write_json(body, cfg.get("out"))
    if cfg.get("mu_csv"):
        write_mu_csv(report, cfg["mu_csv"])
    return 0


# --- parser ----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", "-o", help="output path (stdout if omitted where allowed)")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--verbose", "-v", action="count")


def _add_ensemble(p: argparse.ArgumentParser, with_n: bool = True) -> None:
    g = p.add_argument_group("ensemble")
    g.add_argument("--p", type=int, help="extension degree, q = 2^p")
    g.add_argument("--poly", type=lambda s: int(s, 0), help="reduction polynomial as an integer")
    g.add_argument("--group", choices=("field", "matrix"))
    g.add_argument("--lambda", dest="lambda", help='edge-perspective variable degrees, e.g. "0.5@2,0.5@5"')
    g.add_argument("--rho", help='edge-perspective check degrees, e.g. "1@3"')
    g.add_argument("--f", help='label pdf: "uniform" or "value:prob,..."')
    if with_n:
        g.add_argument("--n", type=int, help="number of variable nodes")
        g.add_argument("--min-girth", type=int, help="remove cycles shorter than this")


def _add_de(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-de-iters", type=int)
    p.add_argument("--convergence-delta", type=float)
    p.add_argument("--bisection-tolerance", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nbldpc", description="Non-binary LDPC codes on the erasure channel.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-code", help="sample a code from an ensemble")
    _add_common(p)
    _add_ensemble(p)
    p.set_defaults(func=cmd_gen_code)

    p = sub.add_parser("encode", help="encode a message (optionally through the erasure channel)")
    _add_common(p)
    p.add_argument("--code")
    p.add_argument("--message", help="K_bin bits as a 0/1 string; random if omitted")
    p.add_argument("--epsilon", type=float, help="erase each bit with this probability")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a channel output or an arrival stream")
    _add_common(p)
    p.add_argument("--code")
    p.add_argument("--channel", help="channel output file")
    p.add_argument("--stream", help="arrival stream file (on-the-fly decoding)")
    p.add_argument("--max-iters", type=int)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", help="block failure rate over an epsilon grid")
    _add_common(p)
    _add_ensemble(p)
    p.add_argument("--code", help="code file (otherwise sampled from the ensemble flags)")
    p.add_argument("--eps", help='"0.3,0.4" or "start:stop:count"')
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("threshold", help="density-evolution threshold")
    _add_common(p)
    _add_ensemble(p, with_n=False)
    _add_de(p)
    p.add_argument("--reduce", choices=("none", "class", "dimension"))
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("threshold-surface", help="thresholds over the label simplex")
    _add_common(p)
    _add_ensemble(p, with_n=False)
    _add_de(p)
    p.add_argument("--resolution", type=int, help="grid points per simplex edge")
    p.set_defaults(func=cmd_threshold_surface)

    p = sub.add_parser("inefficiency", help="mean on-the-fly inefficiency")
    _add_common(p)
    _add_ensemble(p)
    p.add_argument("--code", help="code file (otherwise sampled from the ensemble flags)")
    p.add_argument("--trials", type=int)
    p.add_argument("--curve-points", type=int,
                   help="also measure the failure curve on this many epsilon points in [0, 1]")
    p.add_argument("--curve-trials", type=int)
    p.add_argument("--mu-csv", help="write per-trial mu values here")
    p.set_defaults(func=cmd_inefficiency)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * (args.verbose or 0),
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(cfg)
    except UsageError as exc:
        print(f"nbldpc: error: {exc}", file=sys.stderr)
        return 1
    except (InfeasibleEnsemble, DecodingContradiction, ValueError, OSError) as exc:
        print(f"nbldpc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
