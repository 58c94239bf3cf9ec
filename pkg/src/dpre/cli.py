"""Command line interface.

Every run resolves its configuration in three layers: documented
defaults, then an optional JSON config file (--config), then explicit
flags, with later layers winning. The resolved configuration plus the
package version is echoed into every output file (the '# ' header line
of a CSV, the config block of a JSON report), so a result file remains
self-describing without a sidecar.

Determinism contract: the master --seed expands into per-task counter
seeds before any task runs, and the reduction walks results in task
order, so --workers changes wall time but never output bytes. Output
files are written only after the computation completes; a failed run
reports its error instead of leaving silently truncated files.

Exit codes: 0 success, 1 usage or input error, 2 resource cap exceeded,
3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import multiprocessing
import sys
from dataclasses import asdict, dataclass, fields

from . import __version__, chaos, env, estimator, moments, partition, records, rng
from .chaos import BoxSpec, ChaosParams
from .errors import (
    DegenerateInputError,
    InsufficientDataError,
    OracleMismatchError,
    ResourceCapError,
    WindowViolationError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RESOURCE = 2
EXIT_ORACLE = 3

MODEL_ALIASES = {
    "gaussian": env.GAUSSIAN_UNIT,
    "gaussian-unit": env.GAUSSIAN_UNIT,
    "rademacher": env.RADEMACHER,
    "finite-discrete": env.FINITE_DISCRETE,
}

DEFAULTS = {
    "model": "gaussian",
    "d": 2,
    "theta": 0.5,
    "K": 5.0,
    "gamma_hat": 1.0,
    "C1": 2.0,
    "C2": 4.0,
    "q": 2,
    "samples": 200,
    "seed": 1,
    "workers": 1,
    "weighted": False,
    "max_horizon": 4096,
    "max_box": 4096,
}


@dataclass
class RunConfig:
    """Fully resolved parameters of one run.

    Fields a command does not use stay None and are dropped from the
    echoed configuration. Grids arrive as comma-separated flag strings
    or JSON lists and are normalized to tuples here.
    """

    command: str
    model: object = None
    d: int = None
    beta: tuple = None
    beta_hat: float = None
    C1: float = None
    C2: float = None
    q: int = None
    n: tuple = None
    N: tuple = None
    samples: int = None
    samples_direct: int = None
    theta: float = None
    K: float = None
    gamma_hat: float = None
    cap: int = None
    seed: int = None
    out: str = None
    workers: int = None
    points: str = None
    weighted: bool = None
    max_horizon: int = None
    max_box: int = None

    def resolved(self) -> dict:
        """Configuration echoed into outputs. Delivery knobs that cannot
        change a single result byte (the worker count, the output path
        itself) are excluded so equal results compare byte-equal."""
        doc = {k: v for k, v in asdict(self).items() if v is not None}
        doc.pop("workers", None)
        doc.pop("out", None)
        doc["version"] = __version__
        return doc


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)} - {"command"}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code map."""

    def error(self, message):
        raise DegenerateInputError(message)


def _as_tuple(value, kind, field):
    """Normalize a grid flag ('32,64') or config list ([32, 64])."""
    if isinstance(value, str):
        tokens = [t.strip() for t in value.split(",") if t.strip()]
    elif isinstance(value, (list, tuple)):
        tokens = list(value)
    else:
        tokens = [value]
    if not tokens:
        raise DegenerateInputError(f"{field}: empty grid")
    out = []
    for tok in tokens:
        try:
            v = kind(tok)
        except (TypeError, ValueError):
            raise DegenerateInputError(
                f"{field}: expected {kind.__name__} values, got {tok!r}"
            )
        if kind is int and isinstance(tok, float) and tok != v:
            raise DegenerateInputError(f"{field}: {tok!r} is not an integer")
        out.append(v)
    return tuple(out)


def _resolve_model(spec):
    """Accept an alias string or a config object with family/values."""
    if isinstance(spec, env.EnvironmentModel):
        return spec
    if isinstance(spec, str):
        name = spec.strip().lower()
        if name in MODEL_ALIASES and name != "finite-discrete":
            return env.EnvironmentModel(MODEL_ALIASES[name])
        raise DegenerateInputError(
            f"model: unknown model {spec!r} (gaussian, rademacher, or a "
            "config-file object for finite-discrete)"
        )
    if isinstance(spec, dict):
        family = MODEL_ALIASES.get(str(spec.get("family", "")).lower())
        if family is None:
            raise DegenerateInputError(
                f"model: unknown family {spec.get('family')!r}"
            )
        return env.EnvironmentModel(
            family=family,
            values=tuple(spec.get("values", ())),
            probabilities=tuple(spec.get("probabilities", ())),
        )
    raise DegenerateInputError("model: expected a name or an object")


def _load_config_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DegenerateInputError(f"config: cannot read {path} ({exc})")
    except json.JSONDecodeError as exc:
        raise DegenerateInputError(f"config: invalid JSON in {path} ({exc})")
    if not isinstance(doc, dict):
        raise DegenerateInputError("config: top level must be an object")
    unknown = sorted(set(doc) - _CONFIG_FIELDS)
    if unknown:
        raise DegenerateInputError(f"config: unknown field {unknown[0]!r}")
    return doc


def _positive(value, field, kind=float, minimum=None, strict=True):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise DegenerateInputError(f"{field}: expected {kind.__name__}")
    low = 0 if minimum is None else minimum
    if (strict and v <= low and minimum is None) or (
        minimum is not None and v < minimum
    ):
        bound = f">= {minimum}" if minimum is not None else "positive"
        raise DegenerateInputError(f"{field}: must be {bound}, got {value}")
    return v


def resolve_config(args) -> RunConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}

    def pick(name):
        v = getattr(args, name, None)
        if v is None:
            v = file_cfg.get(name, DEFAULTS.get(name))
        return v

    cfg = RunConfig(command=args.command)
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        setattr(cfg, f.name, pick(f.name))
    cfg.model = _resolve_model(cfg.model)
    if cfg.beta is not None:
        cfg.beta = _as_tuple(cfg.beta, float, "beta")
    if cfg.n is not None:
        cfg.n = _as_tuple(cfg.n, int, "n")
    if cfg.N is not None:
        cfg.N = _as_tuple(cfg.N, int, "N")
    for name in ("samples", "seed", "workers"):
        if getattr(cfg, name) is not None:
            setattr(cfg, name, _positive(getattr(cfg, name), name, int, 1))
    if cfg.out is None:
        cfg.out = f"dpre_{cfg.command}"
    return cfg


def _check_caps(cfg):
    if cfg.n is not None and max(cfg.n) > cfg.max_horizon:
        raise ResourceCapError(
            f"n: horizon {max(cfg.n)} exceeds max_horizon {cfg.max_horizon}"
        )
    if cfg.N is not None and max(cfg.N) > cfg.max_box:
        raise ResourceCapError(
            f"N: box parameter {max(cfg.N)} exceeds max_box {cfg.max_box}"
        )


def _map_tasks(fn, tasks, workers):
    """Order-preserving map; the pool size never touches the results."""
    if workers <= 1:
        return [fn(t) for t in tasks]
    with multiprocessing.Pool(workers) as pool:
        return pool.map(fn, tasks)


def _write_outputs(cfg, rows, results):
    config = cfg.resolved()
    # Render the JSON first; a serialization bug must not leave a lone CSV.
    doc = records.report_json(config, results)
    records.write_csv(cfg.out + ".csv", rows, config=config)
    with open(cfg.out + ".json", "w") as fh:
        fh.write(doc + "\n")
    print(f"wrote {cfg.out}.csv and {cfg.out}.json")


def _fe_task(task):
    model, beta, d, schedule, M, seed, theta = task
    return estimator.free_energy_lower(
        model, beta, d, schedule, M, seed, theta=theta
    )


def cmd_free_energy(cfg) -> int:
    if cfg.beta is None:
        raise DegenerateInputError("beta: required (one value or a grid)")
    if cfg.n is None:
        raise DegenerateInputError("n: required (horizon schedule)")
    for b in cfg.beta:
        if b < 0:
            raise DegenerateInputError(f"beta: must be >= 0, got {b}")
    if cfg.samples < 100:
        raise DegenerateInputError("samples: need at least 100")
    _check_caps(cfg)
    tasks = [
        (cfg.model, b, cfg.d, cfg.n, cfg.samples,
         rng.task_seed(cfg.seed, i), cfg.theta)
        for i, b in enumerate(cfg.beta)
    ]
    points = _map_tasks(_fe_task, tasks, cfg.workers)
    rows = []
    for p in points:
        for entry in p.profile:
            rows.append({
                "beta": p.beta, "d": p.d, "n": entry["n"],
                "samples": p.M, "theta": p.theta,
                "value": entry["value"], "se": entry["se"],
                "p_lower": p.p_lower, "p_se": p.se,
                "certificate": p.certificate,
                "monotone_ok": p.monotone_ok,
            })
    _write_outputs(cfg, rows, points)
    return EXIT_OK


def cmd_second_moment(cfg) -> int:
    if cfg.beta_hat is None:
        raise DegenerateInputError("beta_hat: required")
    if cfg.N is None:
        raise DegenerateInputError("N: required (box-parameter grid)")
    _positive(cfg.beta_hat, "beta_hat")
    _check_caps(cfg)
    recs = moments.intermediate_scan(cfg.model, cfg.beta_hat, cfg.N, d=cfg.d)
    rows = [r.as_row() for r in recs]
    results = {"records": rows, "verdict": recs[0].verdict if recs else None}
    _write_outputs(cfg, rows, results)
    return EXIT_OK


def _chaos_task(task):
    model, params, M, seed, cap = task
    return chaos.chaos_second_moment_mc(model, params, M, seed, cap=cap)


def cmd_chaos(cfg) -> int:
    if cfg.N is None:
        raise DegenerateInputError("N: required (box-parameter grid)")
    if cfg.gamma_hat is None or cfg.gamma_hat < 0:
        raise DegenerateInputError("gamma_hat: must be >= 0")
    if cfg.samples < 100:
        raise DegenerateInputError("samples: need at least 100")
    _check_caps(cfg)
    tasks = []
    for i, N in enumerate(cfg.N):
        params = ChaosParams(
            q=cfg.q, gamma_hat=cfg.gamma_hat, N=N, K=cfg.K,
            C1=cfg.C1, C2=cfg.C2, theta=cfg.theta,
        )
        tasks.append((cfg.model, params, cfg.samples,
                      rng.task_seed(cfg.seed, i), cfg.cap))
    recs = _map_tasks(_chaos_task, tasks, cfg.workers)
    _write_outputs(cfg, recs, [r.as_row() for r in recs])
    return EXIT_OK


def cmd_certificate(cfg) -> int:
    if cfg.N is None or len(cfg.N) != 1:
        raise DegenerateInputError("N: required (exactly one box parameter)")
    if cfg.n is None or len(cfg.n) != 1:
        raise DegenerateInputError("n: required (exactly one block count)")
    N, n = cfg.N[0], cfg.n[0]
    _check_caps(cfg)
    if cfg.beta is not None:
        if len(cfg.beta) != 1:
            raise DegenerateInputError("beta: certificate takes one value")
        beta = cfg.beta[0]
    else:
        beta = estimator.beta_of_N(cfg.C1, cfg.q, N)
    report = estimator.negativity_certificate(
        cfg.model, cfg.d, beta, n, N, cfg.theta, cfg.K, cfg.q,
        cfg.gamma_hat, cfg.samples, cfg.seed, M_direct=cfg.samples_direct,
    )
    rows = [asdict(c) for c in report.components]
    _write_outputs(cfg, rows, report)
    best = report.best()
    print(
        f"contraction factor {best.factor!r} at theta={best.theta!r}; "
        f"{report.label}"
    )
    return EXIT_OK


@dataclass
class _Point:
    beta: float
    p_lower: float
    se: float


def _points_from_file(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DegenerateInputError(f"points: cannot read {path} ({exc})")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    needed = {"beta", "p_lower", "se"}
    if reader.fieldnames is None or not needed <= set(reader.fieldnames):
        raise DegenerateInputError(
            f"points: {path} needs columns beta, p_lower, se"
        )
    out = []
    for i, row in enumerate(reader):
        try:
            out.append(_Point(float(row["beta"]), float(row["p_lower"]),
                              float(row["se"])))
        except (TypeError, ValueError):
            raise DegenerateInputError(
                f"points: non-numeric entry on data row {i + 1} of {path}"
            )
    if not out:
        raise DegenerateInputError(f"points: {path} has no data rows")
    return out


def cmd_conjecture(cfg) -> int:
    if cfg.points is not None:
        pts = _points_from_file(cfg.points)
    else:
        if cfg.beta is None or cfg.n is None:
            raise DegenerateInputError(
                "points: required unless beta and n are given to estimate "
                "fresh points"
            )
        if cfg.samples < 100:
            raise DegenerateInputError("samples: need at least 100")
        _check_caps(cfg)
        tasks = [
            (cfg.model, b, cfg.d, cfg.n, cfg.samples,
             rng.task_seed(cfg.seed, i), cfg.theta)
            for i, b in enumerate(cfg.beta)
        ]
        pts = _map_tasks(_fe_task, tasks, cfg.workers)
    lam_pp0 = env.tilted_law(cfg.model, 0.0).variance
    fit = estimator.conjecture_fit(pts, weighted=bool(cfg.weighted),
                                   lambda_pp0=lam_pp0)
    rows = [
        {"beta": b, "inv_beta_sq": b ** -2, "log_abs_p": y, "residual": r}
        for (b, y), r in zip(fit.points, fit.residuals)
    ]
    _write_outputs(cfg, rows, asdict(fit))
    print(
        f"slope {fit.slope!r} vs conjectured {fit.conjectured_slope!r}, "
        f"r_squared {fit.r_squared!r}, mismatch_flag {fit.mismatch_flag}"
    )
    return EXIT_OK


def _oracle_suite(seed):
    """Brute-force twins against the fast paths; small and deterministic."""
    checks = []

    def add(name, fast, oracle, tol):
        scale = max(abs(oracle), 1.0)
        err = abs(fast - oracle) / scale
        checks.append({
            "check": name, "fast": fast, "oracle": oracle,
            "error": err, "tol": tol, "ok": err <= tol,
        })

    for family in (env.GAUSSIAN_UNIT, env.RADEMACHER):
        model = env.EnvironmentModel(family)
        for d in (1, 2):
            for beta in (0.5, 1.1):
                add(
                    f"second-moment {family} d={d} beta={beta}",
                    moments.second_moment_exact(model, beta, 3, d),
                    moments.second_moment_bruteforce(model, beta, 3, d),
                    1e-10,
                )

    model = env.EnvironmentModel(env.GAUSSIAN_UNIT)
    for N in (4, 8):
        add(
            f"V-second-moment renewal vs dp N={N}",
            chaos.v_second_moment_exact(model, 1.0, N),
            chaos._v_second_moment_dp(model, 1.0, N),
            1e-10,
        )

    N = 8
    box = BoxSpec(N).box_range((0, 0))
    dilated = tuple((lo - N, hi + N) for lo, hi in box)
    for k in range(2):
        field = env.EnvironmentField(
            model=model, seed=rng.task_seed(seed, k),
            time_range=(1, N), spatial_box=dilated,
        )
        add(
            f"V-statistic backward vs forward sample={k}",
            chaos.v_statistic(field, 0.8, N, method="backward"),
            chaos.v_statistic(field, 0.8, N, method="forward"),
            1e-10,
        )

    for k in range(2):
        field = env.EnvironmentField(
            model=model, seed=rng.task_seed(seed, 10 + k),
            time_range=(1, 6), spatial_box=((-6, 6), (-6, 6)),
        )
        logw, _ = partition.log_partition(field, model, 0.0, 6)
        add(f"log-partition beta=0 sample={k}", logw, 0.0, 0.0)

    return checks


def cmd_oracle(cfg) -> int:
    checks = _oracle_suite(cfg.seed)
    bad = [c["check"] for c in checks if not c["ok"]]
    results = {"checks": checks, "failures": bad}
    _write_outputs(cfg, checks, results)
    if bad:
        raise OracleMismatchError(
            f"{len(bad)} oracle check(s) failed: " + "; ".join(bad)
        )
    print(f"all {len(checks)} oracle checks passed")
    return EXIT_OK


COMMANDS = {
    "free-energy": cmd_free_energy,
    "second-moment": cmd_second_moment,
    "chaos": cmd_chaos,
    "certificate": cmd_certificate,
    "conjecture": cmd_conjecture,
    "oracle": cmd_oracle,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="dpre", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"dpre {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override")
    common.add_argument("--out", help="output path stem; writes "
                        "STEM.csv and STEM.json (default: dpre_<command>)")
    common.add_argument("--model", help="gaussian or rademacher "
                        f"(default: {DEFAULTS['model']})")
    common.add_argument("--samples", type=int, help="Monte Carlo samples "
                        f"per task (default: {DEFAULTS['samples']})")
    common.add_argument("--seed", type=int, help="master seed; tasks get "
                        f"counter-split subseeds (default: {DEFAULTS['seed']})")
    common.add_argument("--workers", type=int, help="process count; never "
                        f"affects output bytes (default: {DEFAULTS['workers']})")

    p = sub.add_parser("free-energy", parents=[common],
                       help="quenched free-energy profile over a horizon "
                       "schedule, one row per (beta, n)")
    p.add_argument("--beta", help="disorder strength, one value or a "
                   "comma grid")
    p.add_argument("--d", type=int, help=f"dimension (default: {DEFAULTS['d']})")
    p.add_argument("--n", help="comma-separated strictly increasing horizons")
    p.add_argument("--theta", type=float, help="fractional exponent for the "
                   f"certificate column (default: {DEFAULTS['theta']})")
    p.add_argument("--max-horizon", dest="max_horizon", type=int,
                   help=f"resource cap (default: {DEFAULTS['max_horizon']})")

    p = sub.add_parser("second-moment", parents=[common],
                       help="exact Q[W_N^2] scan at beta_N = "
                       "beta_hat/sqrt(log N) with verdicts")
    p.add_argument("--beta-hat", dest="beta_hat", type=float,
                   help="block coupling strength")
    p.add_argument("--d", type=int, help=f"dimension (default: {DEFAULTS['d']})")
    p.add_argument("--N", help="comma-separated box parameters")
    p.add_argument("--max-box", dest="max_box", type=int,
                   help=f"resource cap (default: {DEFAULTS['max_box']})")

    p = sub.add_parser("chaos", parents=[common],
                       help="Monte Carlo Q[A^2] of the order-q chaos "
                       "statistic per box parameter")
    p.add_argument("--q", type=int, help=f"chaos order (default: {DEFAULTS['q']})")
    p.add_argument("--gamma-hat", dest="gamma_hat", type=float,
                   help=f"tilt strength (default: {DEFAULTS['gamma_hat']})")
    p.add_argument("--N", help="comma-separated box parameters")
    p.add_argument("--K", type=float, help="penalty level "
                   f"(default: {DEFAULTS['K']})")
    p.add_argument("--C2", type=float, help="coincidence window constant "
                   f"(default: {DEFAULTS['C2']})")
    p.add_argument("--theta", type=float,
                   help=f"penalty exponent (default: {DEFAULTS['theta']})")
    p.add_argument("--cap", type=int, help="chaos domain cap (default: exact)")
    p.add_argument("--max-box", dest="max_box", type=int,
                   help=f"resource cap (default: {DEFAULTS['max_box']})")

    p = sub.add_parser("certificate", parents=[common],
                       help="fractional-moment negativity certificate at "
                       "one (beta, n, N)")
    p.add_argument("--beta", help="disorder strength (default: "
                   "beta_of_N(C1, q, N))")
    p.add_argument("--C1", type=float, help="coupling constant when beta "
                   f"is derived (default: {DEFAULTS['C1']})")
    p.add_argument("--d", type=int, help=f"dimension (default: {DEFAULTS['d']})")
    p.add_argument("--n", help="number of coarse blocks (one value)")
    p.add_argument("--N", help="box parameter (one value)")
    p.add_argument("--q", type=int, help=f"chaos order (default: {DEFAULTS['q']})")
    p.add_argument("--K", type=float,
                   help=f"penalty level (default: {DEFAULTS['K']})")
    p.add_argument("--gamma-hat", dest="gamma_hat", type=float,
                   help=f"tilt strength (default: {DEFAULTS['gamma_hat']})")
    p.add_argument("--theta", type=float, help="reported fractional exponent "
                   f"(default: {DEFAULTS['theta']})")
    p.add_argument("--samples-direct", dest="samples_direct", type=int,
                   help="direct-estimate sample count (default: samples/2)")
    p.add_argument("--max-box", dest="max_box", type=int,
                   help=f"resource cap (default: {DEFAULTS['max_box']})")

    p = sub.add_parser("conjecture", parents=[common],
                       help="fit log|p_lower| against 1/beta^2 and compare "
                       "the slope with -pi/lambda''(0)")
    p.add_argument("--points", help="CSV of beta, p_lower, se rows; "
                   "otherwise fresh estimates need --beta and --n")
    p.add_argument("--beta", help="comma grid for fresh estimates")
    p.add_argument("--d", type=int, help=f"dimension (default: {DEFAULTS['d']})")
    p.add_argument("--n", help="horizon schedule for fresh estimates")
    p.add_argument("--theta", type=float,
                   help=f"certificate exponent (default: {DEFAULTS['theta']})")
    p.add_argument("--weighted", action=argparse.BooleanOptionalAction,
                   help="weight the fit by (|p|/se)^2 (default: off)")
    p.add_argument("--max-horizon", dest="max_horizon", type=int,
                   help=f"resource cap (default: {DEFAULTS['max_horizon']})")

    sub.add_parser("oracle", parents=[common],
                   help="run the brute-force oracle suite against the fast "
                   "paths; exit 3 on any mismatch")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OracleMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (DegenerateInputError, WindowViolationError,
            InsufficientDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
