"""Closed-form dimension quantities for the IFS {alpha x, beta x, gamma x + 1 - gamma}."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .ifs_core import Interval, IfsParams, ProbVector

ROOT_TOL = 1e-13
RESIDUAL_TOL = 1e-12
BISECT_WIDTH = 1e-6
DEFAULT_PHI_TOL = 1e-10
MAX_PHI_TERMS = 10**6


class ToleranceUnreachable(ValueError):
    pass


class HypothesisWarning(UserWarning):
    """Parameters fall outside the range where the measure formula is proved."""


@dataclass(frozen=True)
class MoranSolution:
    exponent: float
    residual: float
    bracket: Interval
    iterations: int

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "residual": self.residual,
            "bracket": self.bracket.as_list(),
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class DimensionReport:
    entropy: float
    phi: float
    phi_truncation_bound: float
    lyapunov: float
    raw_dimension: float
    dimension: float
    uncertainty: float
    terms_used: int
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["warnings"] = list(self.warnings)
        return d


def solve_moran(
    f: Callable[[float], float],
    df: Callable[[float], float],
    lo: float = 1e-9,
    hi: float = 4.0,
    max_hi: float = 1e6,
) -> MoranSolution:
    """Root of a decreasing function with f(lo) > 0.

    Bisection down to BISECT_WIDTH, then safeguarded Newton. ``hi`` is
    doubled until f(hi) < 0; contraction ratios close to 1 push the root
    well past 4.
    """
    if not f(lo) > 0:
        raise ArithmeticError(f"Moran function not positive at s={lo}")
    while f(hi) >= 0:
        hi *= 2
        if hi > max_hi:
            raise ArithmeticError("could not bracket the Moran root")
    it = 0
    while hi - lo > BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    s = 0.5 * (lo + hi)
    for _ in range(50):
        it += 1
        fs = f(s)
        if fs > 0:
            lo = max(lo, s)
        elif fs < 0:
            hi = min(hi, s)
        else:
            lo = hi = s
            break
        d = df(s)
        s_new = s - fs / d if d != 0 else 0.5 * (lo + hi)
        if not lo <= s_new <= hi:
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= ROOT_TOL * max(1.0, abs(s)) or hi - lo <= ROOT_TOL:
            s = s_new
            break
        s = s_new
    # tighten to a verified sign-change bracket around s
    h = 4 * math.ulp(s) if s else 1e-300
    while True:
        a, b = s - h, s + h
        if f(a) >= 0 >= f(b):
            break
        h *= 2
        if h > 1e-12:
            a, b = lo, hi
            break
    residual = f(s)
    return MoranSolution(s, residual, Interval(a, b), it)


def similarity_dimension(params: IfsParams) -> MoranSolution:
    """Root s0 of alpha^s + beta^s + gamma^s = 1."""
    r = np.array(params.ratios)
    lr = np.log(r)
    return solve_moran(
        lambda s: float(np.sum(r**s)) - 1.0,
        lambda s: float(np.sum(lr * r**s)),
    )


def _overlap_fn(params: IfsParams, s: float) -> float:
    a, b, g = params.ratios
    return a**s + b**s + g**s - (a * b) ** s - 1.0


def _overlap_dfn(params: IfsParams, s: float) -> float:
    a, b, g = params.ratios
    la, lb, lg = math.log(a), math.log(b), math.log(g)
    return la * a**s + lb * b**s + lg * g**s - (la + lb) * (a * b) ** s


def overlap_dimension(params: IfsParams) -> MoranSolution:
    """Root s1 of alpha^s + beta^s + gamma^s - (alpha beta)^s = 1."""
    sol = solve_moran(
        lambda s: _overlap_fn(params, s), lambda s: _overlap_dfn(params, s)
    )
    if params.in_ninth_range:
        slope = _overlap_dfn(params, sol.exponent)
        assert slope < 0, f"overlap Moran function not decreasing at root ({slope})"
    return sol


def _subsystem_terms(params: IfsParams, n: int) -> list[float]:
    """log(gamma alpha^i beta^j) for i + j <= n, in a fixed order."""
    la, lb, lg = (math.log(r) for r in params.ratios)
    return [lg + i * la + j * lb for i in range(n + 1) for j in range(n + 1 - i)]


def _subsystem_value(exps: list[float], s: float) -> float:
    # fsum is correctly rounded, so extra nonnegative terms can only
    # raise the result: f_{n+1}(s) >= f_n(s) holds in floats as well
    return math.fsum([math.exp(s * e) for e in exps]) - 1.0


def _largest_nonnegative(f: Callable[[float], float], s: float, max_steps: int = 256) -> float:
    """Largest float t near s with f(t) >= 0, for f nonincreasing in floats.

    The answer does not depend on how s was found, so pointwise ordered
    functions get ordered roots.
    """
    if f(s) >= 0:
        for _ in range(max_steps):
            t = math.nextafter(s, math.inf)
            if f(t) < 0:
                return s
            s = t
    else:
        for _ in range(max_steps):
            s = math.nextafter(s, -math.inf)
            if f(s) >= 0:
                return s
    raise ArithmeticError("no sign change within the ulp search window")


def subsystem_dimension(params: IfsParams, n: int) -> MoranSolution:
    """Root of the Moran equation for the subsystem {S_1^k S_2^l S_3 : k + l <= n}.

    For n = 0 the only map is S_3 and gamma^s = 1 forces s = 0. The
    exponent returned is the largest float where the sum is still >= 1,
    which keeps it nondecreasing in n.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return MoranSolution(0.0, 0.0, Interval(0.0, 0.0), 0)
    exps = _subsystem_terms(params, n)
    arr = np.array(exps)

    def f(s):
        return _subsystem_value(exps, s)

    sol = solve_moran(f, lambda s: float(np.sum(arr * np.exp(s * arr))))
    s = _largest_nonnegative(f, sol.exponent)
    return MoranSolution(s, f(s), Interval(s, math.nextafter(s, math.inf)), sol.iterations)


def entropy(probs: ProbVector) -> float:
    return -sum(p * math.log(p) for p in probs.as_tuple)


def lyapunov(params: IfsParams, probs: ProbVector) -> float:
    return -sum(p * math.log(r) for p, r in zip(probs.as_tuple, params.ratios))


def _sum_k_qk_tail(K: int, q: float) -> float:
    """sum_{k > K} k q^k in closed form."""
    return q ** (K + 1) * ((K + 1) * (1 - q) + q) / (1 - q) ** 2


def phi_tail_bound(probs: ProbVector, K: int) -> float:
    """Upper bound on |sum_{k > K} term_k| of the phi series.

    |log(m/k)| <= log k and the binomial weights at level k sum to q^k
    with q = p1 + p2. For k >= K + 1 >= 3, log k / k is decreasing, so
    log k <= k log(K+1)/(K+1); below that we fall back to log k <= k.
    """
    p3 = float(probs.p3)
    q = float(probs.p1) + float(probs.p2)
    factor = math.log(K + 1) / (K + 1) if K + 1 >= 3 else 1.0
    return p3 * factor * _sum_k_qk_tail(K, q)


def phi_terms_needed(probs: ProbVector, tol: float) -> int:
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if phi_tail_bound(probs, MAX_PHI_TERMS) > tol:
        raise ToleranceUnreachable(
            f"tolerance {tol} unreachable within {MAX_PHI_TERMS} terms"
        )
    lo, hi = 0, 1
    while phi_tail_bound(probs, hi) > tol:
        lo, hi = hi, min(2 * hi, MAX_PHI_TERMS)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if phi_tail_bound(probs, mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def phi_level_weights(p1: float, p2: float, K: int):
    """Yield (k, w_k, v_k) for k = 1..K.

    w_k[m-1] = C(k-1, m-1) p1^m p2^(k-m) and v_k[m-1] = C(k-1, m-1)
    p1^(k-m) p2^m, both via w_{k+1}(m) = p1 w_k(m-1) + p2 w_k(m), which
    stays in range where factorials would overflow.
    """
    w = np.array([p1])
    v = np.array([p2])
    for k in range(1, K + 1):
        yield k, w, v
        w = np.concatenate(([0.0], p1 * w)) + np.concatenate((p2 * w, [0.0]))
        v = np.concatenate(([0.0], p2 * v)) + np.concatenate((p1 * v, [0.0]))


def phi_truncated(probs: ProbVector, K: int) -> float:
    """Partial sum of the phi series over k <= K."""
    p1, p2, p3 = (float(p) for p in probs.as_tuple)
    total = 0.0
    for k, w, v in phi_level_weights(p1, p2, K):
        m = np.arange(1, k + 1)
        total += p3 * float(np.sum(np.log(m / k) * (w + v)))
    return total


def phi_series(probs: ProbVector, tol: float = DEFAULT_PHI_TOL) -> tuple[float, float, int]:
    """Entropy correction from the commuting maps S_1 S_2 = S_2 S_1.

    Returns (phi, bound, K) where phi is the sum over k <= K and bound
    >= |phi_exact - phi|, with bound <= tol.
    """
    K = phi_terms_needed(probs, tol)
    return phi_truncated(probs, K), phi_tail_bound(probs, K), K


def phi_weight_total(probs: ProbVector, K: int) -> float:
    """sum_{k<=K} p3 * sum_m (w_k + v_k); equals p3 q (1 - q^K) / (1 - q)."""
    p1, p2, p3 = (float(p) for p in probs.as_tuple)
    return sum(p3 * float(np.sum(w + v)) for _, w, v in phi_level_weights(p1, p2, K))


def measure_dimension(
    params: IfsParams, probs: ProbVector, tol: float = DEFAULT_PHI_TOL
) -> DimensionReport:
    notes = []
    if not (params.beta < 1 / 9 and params.gamma < 1 / 9):
        msg = "beta and gamma should lie in (0, 1/9) for the formula to be proved"
        warnings.warn(msg, HypothesisWarning, stacklevel=2)
        notes.append(msg)
    h = entropy(probs)
    chi = lyapunov(params, probs)
    phi, bound, K = phi_series(probs, tol)
    raw = (h + phi) / chi
    return DimensionReport(
        entropy=h,
        phi=phi,
        phi_truncation_bound=bound,
        lyapunov=chi,
        raw_dimension=raw,
        dimension=min(1.0, raw),
        uncertainty=bound / chi,
        terms_used=K,
        warnings=tuple(notes),
    )


def osc_two_map_dimension(params: IfsParams, probs: ProbVector) -> float:
    """Entropy over Lyapunov exponent for the pair {S_2, S_3} alone.

    The p1 -> 0 limit of the measure formula, where phi vanishes.
    """
    p2, p3 = float(probs.p2), float(probs.p3)
    s = p2 + p3
    p2, p3 = p2 / s, p3 / s
    return (-p2 * math.log(p2) - p3 * math.log(p3)) / (
        -p2 * math.log(params.beta) - p3 * math.log(params.gamma)
    )


def partition_measure(probs: ProbVector, m: int, n: int):
    """mu(H(m, n)), mu(H(m, n) & [1]), mu(H(m, n) & [2]).

    H(m, n) holds the sequences whose first 3 sits at position m + n + 1
    with m ones and n twos before it. Works for any numeric type in
    ``probs`` (Fractions give exact values).
    """
    if m < 0 or n < 0:
        raise ValueError("m and n must be >= 0")
    p1, p2, p3 = probs.as_tuple
    base = p1**m * p2**n * p3
    total = math.comb(m + n, m) * base
    in1 = math.comb(m + n - 1, m - 1) * base if m > 0 else 0 * base
    in2 = math.comb(m + n - 1, n - 1) * base if n > 0 else 0 * base
    return total, in1, in2


def phi_from_partition(probs: ProbVector, K: int) -> float:
    """Sum of in_cyl1 log(m/(m+n)) + in_cyl2 log(n/(m+n)) over 1 <= m+n <= K."""
    total = 0.0
    for k in range(1, K + 1):
        level = 0.0
        for m in range(0, k + 1):
            n = k - m
            _, in1, in2 = partition_measure(probs, m, n)
            if m:
                level += in1 * math.log(m / k)
            if n:
                level += in2 * math.log(n / k)
        total += level
    return total
