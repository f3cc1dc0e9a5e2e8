"""Independent numerical checks of the dimension formula.

Monte Carlo for the phi integral, certified finite-depth bounds on
nu(I), ball-mass regression for local dimension, and conditional
measures of dyadic cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .ifs_core import (
    AffineEnclosure,
    Interval,
    IfsParams,
    ProbVector,
    chunk_sizes,
    draw_symbols,
    project_symbols,
    sample_measure,
)
from .separation import Status, check_forward_separation

STREAM_CAP = 10**6
MIN_CELL_HITS = 10
MAX_INTERVAL_DEPTH = 20
MAX_NODES = 10**7
RADIUS_SAFETY = 10.0


class InsufficientSamples(RuntimeError):
    def __init__(self, message: str, cell=None):
        super().__init__(message)
        self.cell = cell


class HypothesisError(ValueError):
    pass


def _seed_seq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _map(executor, fn, items):
    if executor is None:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


# -- phi oracle -------------------------------------------------------------


def _phi_chunk(args) -> tuple[np.ndarray, int]:
    probs, size, seq = args
    rng = np.random.Generator(np.random.PCG64(seq))
    q = float(probs.p1) + float(probs.p2)
    block = max(8, min(STREAM_CAP, math.ceil(math.log(1e-3) / math.log(q)) + 1)) if q > 0 else 8
    first = np.zeros(size, dtype=np.int8)
    count = np.zeros(size, dtype=np.int64)
    length = np.zeros(size, dtype=np.int64)
    active = np.arange(size)
    truncated = 0
    offset = 0
    while active.size:
        width = min(block, STREAM_CAP - offset)
        sym = draw_symbols(rng, probs, (active.size, width))
        if offset == 0:
            first[active] = sym[:, 0]
        is3 = sym == 3
        has3 = is3.any(axis=1)
        pos = np.where(has3, is3.argmax(axis=1), width)
        before = np.arange(width)[None, :] < pos[:, None]
        count[active] += ((sym == first[active, None]) & before).sum(axis=1)
        length[active] += pos
        offset += width
        active = active[~has3]
        if offset >= STREAM_CAP and active.size:
            truncated += active.size
            break
    # length = T - 1 symbols before the first 3; T = 1 contributes 0
    vals = np.zeros(size)
    nz = length > 0
    vals[nz] = np.log(count[nz] / length[nz])
    return vals, truncated


def phi_oracle(probs: ProbVector, samples: int, seed: int, executor=None) -> dict:
    """Monte Carlo estimate of the phi integral from i.i.d. symbol streams.

    A stream whose first 3 is at position T contributes log(c / (T - 1)),
    c counting the occurrences of the first symbol among positions
    1..T-1, and 0 when T = 1.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sizes = chunk_sizes(samples)
    seqs = _seed_seq(seed).spawn(len(sizes))
    parts = _map(executor, _phi_chunk, [(probs, n, s) for n, s in zip(sizes, seqs)])
    vals = np.concatenate([p[0] for p in parts])
    truncated = sum(p[1] for p in parts)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    q = float(probs.p1) + float(probs.p2)
    return {
        "estimate": est,
        "stderr": se,
        "samples": samples,
        "seed": seed,
        "truncated_streams": truncated,
        "truncation_probability": q**STREAM_CAP,
    }


# -- certified interval masses ---------------------------------------------


@dataclass(frozen=True)
class IntervalMass:
    lower: float
    upper: float
    depth: int


def _cylinder_masses(params, probs, target: Interval, depth: int, first_symbols=(1, 2, 3)):
    """(inside, straddling) mass per first symbol, by pruned depth-first search.

    Masses are exact rationals in the probabilities renormalized to sum
    to exactly 1, so splitting a cylinder never changes its total and the
    bounds move monotonically with depth.
    """
    if depth > MAX_INTERVAL_DEPTH:
        raise ValueError(f"depth must be <= {MAX_INTERVAL_DEPTH}")
    raw = [Fraction(p) for p in probs.as_tuple]
    total = sum(raw)
    ps = (None,) + tuple(p / total for p in raw)
    inside = {s: Fraction(0) for s in first_symbols}
    straddle = {s: Fraction(0) for s in first_symbols}
    nodes = 0
    root = AffineEnclosure.identity()
    stack = [(root.then(params, s), ps[s], 1, s) for s in reversed(first_symbols)]
    while stack:
        enc, w, level, s0 = stack.pop()
        nodes += 1
        if nodes > MAX_NODES:
            raise RuntimeError(f"interval_mass visited more than {MAX_NODES} cylinders")
        hull = enc.image_unit()
        if hull.disjoint(target):
            continue
        if target.contains(hull):
            inside[s0] += w
        elif level >= depth:
            straddle[s0] += w
        else:
            for s in (3, 2, 1):
                stack.append((enc.then(params, s), w * ps[s], level + 1, s0))
    return inside, straddle


def _round_down(x: Fraction) -> float:
    f = float(x)
    return math.nextafter(f, -math.inf) if Fraction(f) > x else f


def _round_up(x: Fraction) -> float:
    f = float(x)
    return math.nextafter(f, math.inf) if Fraction(f) < x else f


def interval_mass(
    params: IfsParams, probs: ProbVector, interval: Interval, depth: int
) -> IntervalMass:
    """Certified bounds on nu(interval) from cylinders of length <= depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    inside, straddle = _cylinder_masses(params, probs, interval, depth)
    lo = sum(inside.values())
    hi = lo + sum(straddle.values())
    return IntervalMass(_round_down(lo), _round_up(hi), depth)


# -- local dimension --------------------------------------------------------


@dataclass
class LocalDimEstimate:
    slope: float
    intercept: float
    radii: list[float]
    log_masses: list[float]
    stderr: float
    sample_size: int
    seed: int
    probes_used: int
    resampled_probes: int
    depth: int
    per_probe_slopes: list[float] = field(default_factory=list)

    def to_dict(self, verbose: bool = False) -> dict:
        d = {
            "slope": self.slope,
            "intercept": self.intercept,
            "radii": list(self.radii),
            "log_masses": list(self.log_masses),
            "stderr": self.stderr,
            "sample_size": self.sample_size,
            "seed": self.seed,
            "probes_used": self.probes_used,
            "resampled_probes": self.resampled_probes,
            "depth": self.depth,
        }
        if verbose:
            d["per_probe_slopes"] = list(self.per_probe_slopes)
        return d


def stratified_uniforms(rng: np.random.Generator, count: int) -> np.ndarray:
    """One uniform draw from each of ``count`` equal strata of [0, 1), shuffled."""
    u = (np.arange(count) + rng.random(count)) / count
    return rng.permutation(u)


def symbols_from_uniform(u: float, probs: ProbVector, levels: int) -> list[int]:
    """Leading symbols of the Bernoulli sequence whose mu-quantile is u."""
    p = [float(x) for x in probs.as_tuple]
    out = []
    for _ in range(levels):
        if u < p[0]:
            s = 1
        elif u < p[0] + p[1]:
            s, u = 2, u - p[0]
        else:
            s, u = 3, u - p[0] - p[1]
        u = min(max(u / p[s - 1], 0.0), np.nextafter(1.0, 0.0))
        out.append(s)
    return out


def stratified_probes(params, probs, count, depth, r_min, seed) -> tuple[list[float], int]:
    """Probe points distributed as nu, stratified over mu-quantiles.

    The first few symbols come from stratified uniforms, so the probes
    spread evenly over the top cylinder levels; the remaining symbols are
    i.i.d. Probes within r_min of 0 are redrawn.
    """
    rng = np.random.Generator(np.random.PCG64(_seed_seq(seed)))
    pmax = max(float(p) for p in probs.as_tuple)
    # enough levels that every cylinder there has mass well below 1/count
    levels = min(depth, 30, math.ceil(math.log(count) / -math.log(pmax)) + 2)
    pts: list[float] = []
    resampled = 0
    while len(pts) < count:
        need = count - len(pts)
        us = stratified_uniforms(rng, need)
        tail = draw_symbols(rng, probs, (need, depth))
        for u, row in zip(us, tail):
            head = symbols_from_uniform(float(u), probs, levels)
            word = head + [int(v) for v in row[: depth - len(head)]]
            x = project_symbols(params, np.array([word], dtype=np.int8))[0]
            # 0 is a nu-null fixed point of S_1 and S_2
            if x <= r_min:
                resampled += 1
                continue
            pts.append(float(x))
    return pts, resampled


def geometric_radii(r_max: float, r_min: float, count: int) -> list[float]:
    return [float(r) for r in np.geomspace(r_max, r_min, count)]


def local_dimension_estimate(
    params: IfsParams,
    probs: ProbVector,
    probes: int,
    samples: int,
    radii,
    depth: int,
    seed: int,
    executor=None,
) -> LocalDimEstimate:
    """Mean over probe points of the log nu(B(x, r)) vs log r regression slope.

    Ball masses are empirical fractions of ``samples`` points; cells with
    fewer than MIN_CELL_HITS hits are dropped and a probe needs two
    populated radii to contribute.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    if any(b >= a for a, b in zip(radii, radii[1:])) or radii[-1] <= 0:
        raise ValueError("radii must be positive and strictly decreasing")
    floor = params.max_ratio**depth * RADIUS_SAFETY
    if radii[-1] <= floor:
        raise ValueError(f"smallest radius must exceed {floor:.3g}; increase depth")
    if probes < 1 or samples < 1:
        raise ValueError("probes and samples must be >= 1")

    sample_seq, probe_seq = _seed_seq(seed).spawn(2)
    pts = np.sort(sample_measure(params, probs, depth, samples, sample_seq, executor))

    probe_pts, resampled = stratified_probes(params, probs, probes, depth, radii[-1], probe_seq)

    r = np.array(radii)
    log_r = np.log(r)
    x = np.array(probe_pts)[:, None]
    hits = np.searchsorted(pts, x + r, side="right") - np.searchsorted(pts, x - r, side="left")
    ok = hits >= MIN_CELL_HITS
    with np.errstate(divide="ignore"):
        log_frac = np.log(hits / samples)

    slopes, intercepts = [], []
    for i in range(len(probe_pts)):
        sel = ok[i]
        if sel.sum() < 2:
            continue
        b, a = np.polyfit(log_r[sel], log_frac[i, sel], 1)
        slopes.append(float(b))
        intercepts.append(float(a))
    if not slopes:
        i, j = np.unravel_index(np.argmin(hits), hits.shape)
        raise InsufficientSamples(
            f"no probe has two radii with >= {MIN_CELL_HITS} hits; "
            f"worst cell probe={i} radius={radii[j]} hits={int(hits[i, j])}",
            cell={"probe": int(i), "radius": radii[j], "hits": int(hits[i, j])},
        )
    log_masses = []
    for j in range(len(radii)):
        col = log_frac[ok[:, j], j]
        log_masses.append(float(col.mean()) if col.size else None)
    s = np.array(slopes)
    se = float(s.std(ddof=1) / math.sqrt(len(s))) if len(s) > 1 else math.inf
    return LocalDimEstimate(
        slope=float(s.mean()),
        intercept=float(np.mean(intercepts)),
        radii=radii,
        log_masses=log_masses,
        stderr=se,
        sample_size=samples,
        seed=seed,
        probes_used=len(slopes),
        resampled_probes=resampled,
        depth=depth,
        per_probe_slopes=slopes,
    )


# -- conditional measures ---------------------------------------------------


@dataclass
class ConditionalCheck:
    m: int
    n: int
    level: int
    cell: tuple[float, float]
    representative: float
    bounds: dict[int, tuple[float, float]]
    expected: dict[int, float]
    depth: int

    @property
    def ratio1(self) -> tuple[float, float]:
        return self.bounds[1]

    @property
    def ratio2(self) -> tuple[float, float]:
        return self.bounds[2]

    def brackets_expected(self) -> bool:
        return all(lo <= self.expected[s] <= hi for s, (lo, hi) in self.bounds.items() if s in self.expected)


def dyadic_cell(x: Fraction, level: int) -> tuple[Fraction, Fraction]:
    """[k 2^-level, (k+1) 2^-level) containing x; x = 1 falls in the last cell."""
    size = Fraction(1, 2**level)
    k = min(math.floor(x / size), 2**level - 1)
    return k * size, (k + 1) * size


def conditional_measure_check(
    params: IfsParams,
    probs: ProbVector,
    m: int,
    n: int,
    dyadic_level: int,
    depth: int = MAX_INTERVAL_DEPTH,
    verdict=None,
) -> ConditionalCheck:
    """Certified bounds on mu(pi^-1(Q) & [i]) / mu(pi^-1(Q)) for each first symbol i.

    Q is the dyadic cell of ``dyadic_level`` containing the point
    alpha^m beta^n = pi(1^m 2^n 3 3 3 ...). On a forward separated system
    the ratios approach m/(m+n) and n/(m+n) for i = 1, 2 (and 1 for
    i = 3 when m = n = 0) as the level grows.
    """
    if m < 0 or n < 0:
        raise ValueError("m and n must be >= 0")
    if verdict is None:
        verdict = check_forward_separation(params)
    if verdict.status is not Status.SEPARATED:
        raise HypothesisError(
            f"conditional measures need a forward separated system; checker says {verdict.status.value}"
        )
    x = Fraction(params.alpha) ** m * Fraction(params.beta) ** n
    a, b = dyadic_cell(x, dyadic_level)
    # Q is half-open; the closed enclosure only loosens the bounds
    target = Interval(float(a), float(b))
    inside, straddle = _cylinder_masses(params, probs, target, depth)
    bounds = {}
    for s in (1, 2, 3):
        own_lo, own_hi = inside[s], inside[s] + straddle[s]
        rest_lo = sum(inside[t] for t in (1, 2, 3) if t != s)
        rest_hi = rest_lo + sum(straddle[t] for t in (1, 2, 3) if t != s)
        lo = own_lo / (own_lo + rest_hi) if own_lo + rest_hi > 0 else Fraction(0)
        hi = own_hi / (own_hi + rest_lo) if own_hi + rest_lo > 0 else Fraction(1)
        bounds[s] = (_round_down(lo), _round_up(hi))
    if m + n == 0:
        expected = {1: 0.0, 2: 0.0, 3: 1.0}
    else:
        expected = {1: m / (m + n), 2: n / (m + n), 3: 0.0}
    return ConditionalCheck(m, n, dyadic_level, (float(a), float(b)), float(x), bounds, expected, depth)
