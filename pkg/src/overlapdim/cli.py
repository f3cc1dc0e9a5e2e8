"""Command-line front end.

Every subcommand writes one JSON document to stdout (``sweep`` writes a
CSV file and a JSON summary). Exit codes: 0 ok, 2 invalid input, 3 I/O
failure, 4 too few samples for the estimator.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from . import __version__
from .dim_formulas import (
    DEFAULT_PHI_TOL,
    HypothesisWarning,
    ToleranceUnreachable,
    measure_dimension,
    overlap_dimension,
    phi_series,
    similarity_dimension,
    subsystem_dimension,
)
from .empirical import InsufficientSamples, geometric_radii, local_dimension_estimate, phi_oracle
from .ifs_core import NINTH, RNG_ALGORITHM, IfsParams, ProbVector
from .separation import (
    DEFAULT_MAX_EXPONENT,
    DEFAULT_REFINE_DEPTH,
    check_forward_separation,
    dmn_bands_containing,
)

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_SAMPLES = 0, 2, 3, 4
DEFAULT_SEED = 0
DEFAULT_RADII = "geom:1e-2:1e-4:9"
THREADS_ENV = "OVERLAPDIM_THREADS"


class InputError(ValueError):
    pass


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n < 0:
        raise InputError(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


@contextmanager
def pool():
    n = worker_count()
    if n == 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=n) as ex:
        yield ex


def _finite(obj):
    """Replace non-finite floats by None so the output stays valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _metadata(argv, seed, tolerances, started) -> dict:
    return {
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command_line": list(argv),
        "seed": seed,
        "tolerances": tolerances,
        "rng_algorithm": RNG_ALGORITHM,
        "duration_seconds": time.perf_counter() - started,
    }


def emit(command: str, result: dict, argv, seed, tolerances, started, out=None) -> None:
    doc = {
        "command": command,
        "result": result,
        "metadata": _metadata(argv, seed, tolerances, started),
    }
    out = out or sys.stdout
    out.write(json.dumps(_finite(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")


# -- argument types ---------------------------------------------------------


def nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def pos_int(text: str) -> int:
    v = nonneg_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def pos_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def parse_radii(text: str) -> list[float]:
    """Comma list of radii, or geom:<max>:<min>:<count> for a geometric grid."""
    if text.startswith("geom:"):
        try:
            _, hi, lo, n = text.split(":")
            radii = geometric_radii(float(hi), float(lo), int(n))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad geometric radii {text!r}, expected geom:<max>:<min>:<count>")
    else:
        try:
            radii = [float(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad radii list {text!r}")
    if len(radii) < 2 or any(b >= a for a, b in zip(radii, radii[1:])) or radii[-1] <= 0:
        raise argparse.ArgumentTypeError("radii must be at least two positive, strictly decreasing values")
    return radii


def _params(ns) -> IfsParams:
    try:
        return IfsParams(ns.alpha, ns.beta, ns.gamma)
    except ValueError as e:
        raise InputError(str(e))


def _probs(ns) -> ProbVector:
    try:
        return ProbVector(ns.p1, ns.p2, ns.p3)
    except ValueError as e:
        raise InputError(str(e))


def _add_params(p, required=True):
    p.add_argument("--alpha", type=float, required=required)
    p.add_argument("--beta", type=float, required=required)
    p.add_argument("--gamma", type=float, required=required)


def _add_probs(p, required=True):
    default = None if required else 1 / 3
    p.add_argument("--p1", type=float, required=required, default=default)
    p.add_argument("--p2", type=float, required=required, default=default)
    p.add_argument("--p3", type=float, required=required, default=None if required else 1 - 2 / 3)


# -- commands ---------------------------------------------------------------


def cmd_dim_measure(ns, argv, started):
    params, probs = _params(ns), _probs(ns)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        report = measure_dimension(params, probs, ns.tol)
    result = {"params": params.to_dict(), "probs": probs.to_dict(), **report.to_dict()}
    emit("dim-measure", result, argv, None, {"phi_tol": ns.tol}, started)


def cmd_dim_attractor(ns, argv, started):
    params = _params(ns)
    if ns.which == "s0":
        sol = similarity_dimension(params)
    elif ns.which == "s1":
        sol = overlap_dimension(params)
    else:
        sol = subsystem_dimension(params, ns.n)
    result = {
        "params": params.to_dict(),
        "which": ns.which,
        "n": ns.n if ns.which == "shat" else None,
        **sol.to_dict(),
        "dimension": min(1.0, sol.exponent),
    }
    emit("dim-attractor", result, argv, None, {"root_tol": 1e-13}, started)


def cmd_check_separation(ns, argv, started):
    params = _params(ns)
    if not params.in_ninth_range:
        raise InputError("alpha, beta and gamma must lie in (0, 1/9)")
    verdict = check_forward_separation(params, ns.depth, ns.max_exponent)
    result = {"params": params.to_dict(), **verdict.to_dict(params, ns.emit_certificate)}
    emit(
        "check-separation", result, argv, None,
        {"refine_depth": ns.depth, "max_exponent": ns.max_exponent}, started,
    )


def _sweep_row(args):
    alpha, beta, gamma, probs, tol, depth, max_exp = args
    params = IfsParams(alpha, beta, gamma)
    rep = measure_dimension(params, probs, tol)
    verdict = check_forward_separation(params, depth, max_exp)
    bands = dmn_bands_containing(alpha, beta, gamma, max_exp)
    return {
        "alpha": alpha,
        "s0": similarity_dimension(params).exponent,
        "s1": overlap_dimension(params).exponent,
        "dim_measure": rep.dimension,
        "phi": rep.phi,
        "separation_status": verdict.status.value,
        "in_dmn_band": ";".join(f"({m},{n})" for m, n in bands),
    }


SWEEP_COLUMNS = ["alpha", "s0", "s1", "dim_measure", "phi", "separation_status", "in_dmn_band"]


def cmd_sweep(ns, argv, started):
    if not (0 < ns.beta < NINTH and 0 < ns.gamma < NINTH):
        raise InputError("beta and gamma must lie in (0, 1/9)")
    if not 0 < ns.alpha_min < ns.alpha_max < min(ns.beta, NINTH):
        raise InputError("need 0 < alpha-min < alpha-max < min(beta, 1/9)")
    if ns.steps < 2:
        raise InputError("steps must be >= 2")
    probs = _probs(ns)
    h = (ns.alpha_max - ns.alpha_min) / (ns.steps - 1)
    alphas = [ns.alpha_min + i * h for i in range(ns.steps - 1)] + [ns.alpha_max]
    jobs = [(a, ns.beta, ns.gamma, probs, ns.tol, ns.depth, ns.max_exponent) for a in alphas]
    # the warnings filter is process-global, so set it outside the workers
    with warnings.catch_warnings(), pool() as ex:
        warnings.simplefilter("ignore", HypothesisWarning)
        rows = list(ex.map(_sweep_row, jobs)) if ex else [_sweep_row(j) for j in jobs]
    try:
        with open(ns.out, "w", newline="", encoding="ascii") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    except OSError as e:
        raise IOError(f"cannot write {ns.out}: {e}") from e
    result = {"out": ns.out, "rows": len(rows), "columns": SWEEP_COLUMNS}
    emit(
        "sweep", result, argv, None,
        {"phi_tol": ns.tol, "refine_depth": ns.depth, "max_exponent": ns.max_exponent}, started,
    )


def cmd_phi(ns, argv, started):
    probs = _probs(ns)
    if ns.mode == "series":
        phi, bound, K = phi_series(probs, ns.tol)
        result = {"mode": "series", "probs": probs.to_dict(), "phi": phi, "bound": bound, "terms_used": K}
        emit("phi", result, argv, None, {"phi_tol": ns.tol}, started)
        return
    with pool() as ex:
        res = phi_oracle(probs, ns.samples, ns.seed, ex)
    result = {"mode": "oracle", "probs": probs.to_dict(), **res}
    emit("phi", result, argv, ns.seed, {}, started)


def cmd_estimate(ns, argv, started):
    params, probs = _params(ns), _probs(ns)
    depth = ns.depth if ns.depth is not None else params.depth_for_accuracy(1e-12)
    with pool() as ex:
        try:
            est = local_dimension_estimate(
                params, probs, ns.probes, ns.samples, ns.radii, depth, ns.seed, ex
            )
        except ValueError as e:
            raise InputError(str(e))
    result = {"params": params.to_dict(), "probs": probs.to_dict(), **est.to_dict(ns.verbose)}
    emit("estimate", result, argv, ns.seed, {"min_cell_hits": 10}, started)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="overlapdim",
        description="Dimension of self-similar measures for {alpha x, beta x, gamma x + 1 - gamma}.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dim-measure", help="dimension of the self-similar measure")
    _add_params(p)
    _add_probs(p)
    p.add_argument("--tol", type=pos_float, default=DEFAULT_PHI_TOL)
    p.set_defaults(func=cmd_dim_measure)

    p = sub.add_parser("dim-attractor", help="Moran-type exponents s0, s1, s_hat_n")
    _add_params(p)
    p.add_argument("--which", choices=["s0", "s1", "shat"], required=True)
    p.add_argument("--n", type=nonneg_int)
    p.set_defaults(func=cmd_dim_attractor)

    p = sub.add_parser("check-separation", help="forward separation verdict")
    _add_params(p)
    p.add_argument("--depth", type=nonneg_int, default=DEFAULT_REFINE_DEPTH)
    p.add_argument("--max-exponent", type=pos_int, default=DEFAULT_MAX_EXPONENT)
    p.add_argument("--emit-certificate", action="store_true")
    p.set_defaults(func=cmd_check_separation)

    p = sub.add_parser("sweep", help="CSV sweep over alpha")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--alpha-min", type=float, required=True)
    p.add_argument("--alpha-max", type=float, required=True)
    p.add_argument("--steps", type=pos_int, required=True)
    p.add_argument("--out", required=True)
    _add_probs(p, required=False)
    p.add_argument("--tol", type=pos_float, default=DEFAULT_PHI_TOL)
    p.add_argument("--depth", type=nonneg_int, default=DEFAULT_REFINE_DEPTH)
    p.add_argument("--max-exponent", type=pos_int, default=DEFAULT_MAX_EXPONENT)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("phi", help="entropy correction series or its Monte Carlo oracle")
    _add_probs(p)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--series", dest="mode", action="store_const", const="series")
    mode.add_argument("--oracle", dest="mode", action="store_const", const="oracle")
    p.add_argument("--samples", type=pos_int)
    p.add_argument("--seed", type=nonneg_int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=pos_float, default=DEFAULT_PHI_TOL)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("estimate", help="empirical local dimension by ball-mass regression")
    _add_params(p)
    _add_probs(p)
    p.add_argument("--samples", type=pos_int, default=200_000)
    p.add_argument("--probes", type=pos_int, default=50)
    p.add_argument("--radii", type=parse_radii, default=parse_radii(DEFAULT_RADII))
    p.add_argument("--depth", type=pos_int)
    p.add_argument("--seed", type=nonneg_int, default=DEFAULT_SEED)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_estimate)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    started = time.perf_counter()
    if ns.command == "dim-attractor" and ns.which == "shat" and ns.n is None:
        parser.error("--which shat needs --n")
    if ns.command == "phi" and ns.mode == "oracle" and ns.samples is None:
        parser.error("--oracle needs --samples")
    try:
        ns.func(ns, argv, started)
    except (InputError, ToleranceUnreachable) as e:
        print(f"overlapdim: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InsufficientSamples as e:
        print(f"overlapdim: insufficient samples: {e}", file=sys.stderr)
        return EXIT_SAMPLES
    except OSError as e:
        print(f"overlapdim: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
