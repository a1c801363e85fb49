"""Command-line runner: constants, sampling, coupling, verification, W2 and sweeps.

Configs are JSON files. A minimal one::

    {"mixture": "two_mode.json", "T": 4.0, "h": 0.01, "n_samples": 2048, "seed": 0}

``mixture`` is a path (relative to the config file) or an inline mixture
object. Every CSV starts with ``# config_hash=<hex> seed=<int>``.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _accel, streams
from . import constants as K
from .errors import ConfigurationError, NumericError
from .grid import TimeGrid
from .mixture import (
    ConvexityParams,
    GaussianMixture,
    gmm_lipschitz_proof_variant,
    gmm_m2,
    gmm_sample,
    gmm_weak_convexity_params,
    two_mode_params,
)
from .sampler import ScoreOracle, run_coupled, run_sgm
from .verify import DEFAULT_S_GRID, verify_suite
from .wasserstein import MATCHING_CAP, w2_exact_matching, w2_sliced

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

_KNOWN_KEYS = {
    "mixture", "T", "N", "h", "n_samples", "seed", "eps", "oracle", "perturbation",
    "init", "params", "sweep", "out", "fine_factor", "nproj", "n_boot", "w2_init",
    "l_variant", "proof_faithful", "s_grid", "n_pairs", "n_moment", "n_points",
}


@dataclass
class ExperimentConfig:
    mixture: GaussianMixture
    T: float = 4.0
    N: int | None = None
    h: float | None = None
    n_samples: int = 2048
    seed: int = 0
    eps: float = 0.0
    oracle: str = "exact"
    perturbation: str = "fixed"
    init: str = "stationary"
    params: object = "general"
    sweep: dict = field(default_factory=dict)
    out: str | None = None
    fine_factor: int = 16
    nproj: int = 256
    n_boot: int = 200
    w2_init: float | None = None
    l_variant: str = "statement"
    proof_faithful: bool = False
    s_grid: list | None = None
    n_pairs: int = 10_000
    n_moment: int = 100_000
    n_points: int = 100

    @classmethod
    def load(cls, path, seed: int | None = None) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(raw, base=path.parent, seed=seed)

    @classmethod
    def from_dict(cls, raw: dict, base=Path("."), seed: int | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
        unknown = set(raw) - _KNOWN_KEYS
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "mixture" not in raw:
            raise ConfigurationError("config needs a 'mixture' entry")
        source = raw["mixture"]
        if isinstance(source, str):
            mpath = Path(base) / source
            if not mpath.is_file():
                raise ConfigurationError(f"mixture file not found: {mpath}")
            try:
                g = GaussianMixture.load(mpath)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"mixture file {mpath} is not valid JSON: {exc}") from None
        elif isinstance(source, dict):
            g = GaussianMixture.from_dict(source)
        else:
            raise ConfigurationError("'mixture' must be a path or an object")
        kw = {k: v for k, v in raw.items() if k != "mixture"}
        if seed is not None:
            kw["seed"] = seed
        try:
            cfg = cls(mixture=g, **kw)
            cfg._validate()
        except TypeError as exc:
            raise ConfigurationError(f"bad config value: {exc}") from None
        return cfg

    def _validate(self):
        if self.N is not None and self.h is not None:
            raise ConfigurationError("give exactly one of N or h")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")
        if self.eps < 0:
            raise ConfigurationError("eps must be nonnegative")
        if self.oracle not in ("exact", "perturbed"):
            raise ConfigurationError("oracle must be 'exact' or 'perturbed'")
        if self.init not in ("stationary", "exact_forward_T"):
            raise ConfigurationError("init must be 'stationary' or 'exact_forward_T'")

    def grid(self) -> TimeGrid:
        if self.N is None and self.h is None:
            raise ConfigurationError("give exactly one of N or h")
        if self.N is not None:
            return TimeGrid(self.T, self.N)
        return TimeGrid.from_step(self.T, self.h)

    def resolve_params(self) -> ConvexityParams:
        p = self.params
        g = self.mixture
        if p in (None, "general"):
            return gmm_weak_convexity_params(g)
        if p == "sharp":
            return two_mode_params(g, p)
        if isinstance(p, dict):
            extra = set(p) - {"alpha", "big_m", "l_u"}
            if extra:
                raise ConfigurationError(f"unknown params keys: {sorted(extra)}")
            base = asdict(gmm_weak_convexity_params(g))
            base.update({k: float(v) for k, v in p.items()})
            return ConvexityParams(**base)
        raise ConfigurationError(f"params must be 'general', 'sharp' or an object, got {p!r}")

    def effective_eps(self) -> float:
        return self.eps if self.oracle == "perturbed" else 0.0

    def config_hash(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k not in ("mixture", "out")}
        d["mixture"] = self.mixture.to_dict()
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class CsvSink:
    """Collects rows in memory and writes them once, so failures leave no partial file."""

    def __init__(self, header: list[str], config_hash: str, seed: int):
        self.buf = io.StringIO()
        self.buf.write(f"# config_hash={config_hash} seed={seed}\n")
        self.buf.write(",".join(header) + "\n")

    def comment(self, text: str):
        self.buf.write(f"# {text}\n")

    def row(self, values):
        self.buf.write(",".join(_fmt(v) for v in values) + "\n")

    def emit(self, out_dir, name: str):
        text = self.buf.getvalue()
        if out_dir is None:
            sys.stdout.write(text)
            return
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)


def _oracle(cfg: ExperimentConfig) -> ScoreOracle:
    return ScoreOracle(cfg.mixture, cfg.effective_eps(), cfg.perturbation)


def _report(cfg: ExperimentConfig, grid: TimeGrid, p: ConvexityParams, eps: float):
    g = cfg.mixture
    return K.build_report(
        p,
        grid,
        eps,
        g.dim,
        gmm_m2(g),
        w2_init=cfg.w2_init,
        w2_init_source="config" if cfg.w2_init is not None else "analytic",
        l_variant=cfg.l_variant,
        proof_faithful=cfg.proof_faithful,
        l_u_proof=gmm_lipschitz_proof_variant(g),
    )


def cmd_constants(cfg: ExperimentConfig, out=None) -> int:
    p = cfg.resolve_params()
    rep = _report(cfg, cfg.grid(), p, cfg.effective_eps())
    items = rep.flat()
    sink = CsvSink(["key", "value"], cfg.config_hash(), cfg.seed)
    for k, v in items.items():
        sink.row([k, v])
    if out is not None:
        sink.emit(out, "constants.csv")
    for k, v in items.items():
        print(f"{k}={_fmt(v)}")
    return EXIT_OK


def cmd_sample(cfg: ExperimentConfig, out=None) -> int:
    g = cfg.mixture
    batch = run_sgm(_oracle(cfg), cfg.grid(), cfg.init, cfg.n_samples, cfg.seed, cfg.resolve_params())
    sink = CsvSink([f"x{i}" for i in range(g.dim)], cfg.config_hash(), cfg.seed)
    for row in batch.points:
        sink.row(row)
    sink.emit(out, "samples.csv")
    return EXIT_OK


def cmd_coupling(cfg: ExperimentConfig, out=None) -> int:
    grid = cfg.grid()
    run = run_coupled(
        cfg.mixture,
        grid,
        cfg.n_samples,
        cfg.seed,
        cfg.fine_factor,
        cfg.effective_eps(),
        cfg.perturbation,
        cfg.resolve_params(),
    )
    cols = ["k", "t_k", "dist_fine_em", "dist_em_init", "dist_init_star", "delta_k_pred"]
    sink = CsvSink(cols, cfg.config_hash(), cfg.seed)
    sink.comment(f"N_h={run.n_h} init_distance_bound={_fmt(run.init_distance_bound)}")
    for k in range(grid.N + 1):
        delta = run.delta_pred[k] if k < grid.N else None
        sink.row([k, run.t[k], run.dist_fine_em[k], run.dist_em_init[k], run.dist_init_star[k], delta])
    sink.emit(out, "coupling.csv")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out=None) -> int:
    s_grid = DEFAULT_S_GRID if cfg.s_grid is None else np.asarray(cfg.s_grid, dtype=np.float64)
    reports = verify_suite(
        cfg.mixture,
        cfg.resolve_params(),
        s_grid,
        cfg.T,
        cfg.n_pairs,
        cfg.n_moment,
        cfg.n_points,
        cfg.seed,
    )
    sink = CsvSink(["name", "pass", "worst_margin", "n_trials", "tolerance"], cfg.config_hash(), cfg.seed)
    for r in reports:
        sink.row([r.name, r.passed, r.worst_margin, r.n_trials, r.tolerance])
    sink.emit(out, "verify.csv")
    return EXIT_OK if all(r.passed for r in reports if r.gating) else EXIT_VERIFY


def read_points(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"sample file not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    if len(lines) < 2:
        raise ConfigurationError(f"{path} holds no sample rows")
    try:
        return np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def cmd_w2(path_a, path_b, method="both", nproj=256, seed=0, n_boot=0, out=None) -> int:
    a = read_points(path_a)
    b = read_points(path_b)
    if a.shape != b.shape:
        raise ConfigurationError(f"sample shapes differ: {a.shape} vs {b.shape}")
    ests = []
    if method in ("exact", "both"):
        if len(a) > MATCHING_CAP:
            raise ConfigurationError(f"exact matching is capped at n={MATCHING_CAP}")
        ests.append(w2_exact_matching(a, b, n_boot, seed))
    if method in ("sliced", "both"):
        ests.append(w2_sliced(a, b, nproj, seed, n_boot))
    blob = f"{Path(path_a).name}|{Path(path_b).name}|{method}|{nproj}|{n_boot}"
    sink = CsvSink(["method", "value", "se", "n", "nproj", "seed"], hashlib.sha256(blob.encode()).hexdigest()[:16], seed)
    for e in ests:
        sink.row([e.method, e.value, None if math.isnan(e.se) else e.se, e.n, e.nproj, seed])
    sink.emit(out, "w2.csv")
    return EXIT_OK


def _sweep_axes(cfg: ExperimentConfig):
    sw = cfg.sweep or {}
    axes = {
        "h": sw.get("h", [cfg.h] if cfg.h is not None else None),
        "T": sw.get("T", [cfg.T]),
        "eps": sw.get("eps", [cfg.eps]),
    }
    for k, v in axes.items():
        if not v:
            raise ConfigurationError(f"sweep axis {k!r} must be a nonempty list")
    return axes


def cmd_sweep(cfg: ExperimentConfig, out=None) -> int:
    axes = _sweep_axes(cfg)
    g = cfg.mixture
    p = cfg.resolve_params()
    lu = K.uniform_l(p)
    n = cfg.n_samples
    if n > MATCHING_CAP:
        raise ConfigurationError(f"sweep uses exact matching, n_samples must be <= {MATCHING_CAP}")
    reference = gmm_sample(g, n, streams.substream(cfg.seed, streams.REFERENCE).integers(2**63)).points
    cols = ["h", "T", "eps", "w2_exact", "w2_exact_se", "w2_sliced", "bound", "ratio"]
    sink = CsvSink(cols, cfg.config_hash(), cfg.seed)
    for T in axes["T"]:
        for h in axes["h"]:
            for eps in axes["eps"]:
                if not h < K.h_max(lu):
                    msg = f"skipped h={h!r} T={T!r} eps={eps!r}: h >= 2/(9 L^2) = {K.h_max(lu)!r}"
                    print(f"warning: {msg}", file=sys.stderr)
                    sink.comment(f"warning: {msg}")
                    continue
                grid = TimeGrid.from_step(T, h)
                oracle = ScoreOracle(g, eps, cfg.perturbation)
                x = run_sgm(oracle, grid, "stationary", n, cfg.seed, p).points
                ex = w2_exact_matching(x, reference, cfg.n_boot, cfg.seed)
                sl = w2_sliced(x, reference, cfg.nproj, cfg.seed)
                bound = _report(cfg, grid, p, eps).bound
                sink.row([h, T, eps, ex.value, ex.se, sl.value, bound, ex.value / bound])
    sink.emit(out, "sweep.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output directory (default: stdout)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (speed only)")

    with_cfg = argparse.ArgumentParser(add_help=False, parents=[common])
    with_cfg.add_argument("--config", required=True, help="JSON experiment config")

    ap = argparse.ArgumentParser(prog="sgmw2", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[with_cfg], help="print every constant and the W2 bound")
    sub.add_parser("sample", parents=[with_cfg], help="run the EM sampler, write samples.csv")
    sub.add_parser("coupling", parents=[with_cfg], help="synchronously coupled runs, write coupling.csv")
    sub.add_parser("verify", parents=[with_cfg], help="regularity checks, write verify.csv")
    sub.add_parser("sweep", parents=[with_cfg], help="bound vs empirical W2 over (h, T, eps)")
    w2 = sub.add_parser("w2", parents=[common], help="W2 between two sample CSVs")
    w2.add_argument("a")
    w2.add_argument("b")
    w2.add_argument("--method", choices=("exact", "sliced", "both"), default="both")
    w2.add_argument("--nproj", type=int, default=256)
    w2.add_argument("--n-boot", type=int, default=0)
    return ap


_COMMANDS = {
    "constants": cmd_constants,
    "sample": cmd_sample,
    "coupling": cmd_coupling,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _accel.set_threads(args.threads)
    try:
        if args.command == "w2":
            return cmd_w2(args.a, args.b, args.method, args.nproj, args.seed or 0, args.n_boot, args.out)
        cfg = ExperimentConfig.load(args.config, seed=args.seed)
        return _COMMANDS[args.command](cfg, args.out if args.out is not None else cfg.out)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
