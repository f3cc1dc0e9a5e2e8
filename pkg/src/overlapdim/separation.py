"""Forward separation of S_1^m(R) and S_2^n(R), with R = S_3(attractor).

S_1^m(R) = alpha^m R and S_2^n(R) = beta^n R, so whether a pair meets
depends only on the ratio alpha^m / beta^n. When log(alpha)/log(beta)
is irrational those ratios come arbitrarily close to 1, so no finite
check covers every pair. Verdicts are therefore resolution-limited:
``Separated`` certifies every pair with m, n <= max_exponent, which
includes every pair whose pieces are longer than ``resolved_scale``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .ifs_core import (
    NINTH,
    AffineEnclosure,
    Interval,
    IfsParams,
    cylinder_interval,
    project_prefix,
)

LOWER_RATIO = 8.0 / 9.0
UPPER_RATIO = 9.0 / 8.0
LOG_BAND = math.log(UPPER_RATIO)
COINCIDENCE_TOL = 1e-14
DEFAULT_MAX_EXPONENT = 30
DEFAULT_REFINE_DEPTH = 8
MAX_COVER_PIECES = 10**7
# Fraction of the hull magnitude allowed for the evaluation-order mismatch
# between a sampled point and the canonical hull S_1^m S_2^n S_3([0, 1]).
MEMBERSHIP_SLACK = 1e-12


class Status(str, Enum):
    SEPARATED = "Separated"
    INTERSECTING = "Intersecting"
    INCONCLUSIVE = "Inconclusive"


_PRECEDENCE = {Status.SEPARATED: 0, Status.INCONCLUSIVE: 1, Status.INTERSECTING: 2}


def merge_status(a: Status, b: Status) -> Status:
    return a if _PRECEDENCE[a] >= _PRECEDENCE[b] else b


class ExhaustivenessError(ValueError):
    def __init__(self, required: int, message: str):
        super().__init__(message)
        self.required = required


class CoverLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class RatioBand:
    m: int
    n: int
    interval: Interval | None

    @property
    def empty(self) -> bool:
        return self.interval is None

    def contains(self, alpha: float) -> bool:
        return self.interval is not None and self.interval.contains(alpha)


@dataclass(frozen=True)
class CandidateSet:
    pairs: list[tuple[int, int]]
    max_exponent: int
    # every band pair outside the box has max(alpha^m, beta^n) below this
    resolved_scale: float


@dataclass
class PairCertificate:
    m: int
    n: int
    status: Status
    level: int
    left: list[tuple[int, ...]] = field(default_factory=list)
    right: list[tuple[int, ...]] = field(default_factory=list)

    def to_dict(self, params: IfsParams | None = None) -> dict:
        d = {"m": self.m, "n": self.n, "status": self.status.value, "level": self.level}
        if params is not None and self.status is Status.SEPARATED:
            d["left"] = [
                {"word": list(w), "hull": piece_hull(params, 1, self.m, w).as_list()}
                for w in self.left
            ]
            d["right"] = [
                {"word": list(w), "hull": piece_hull(params, 2, self.n, w).as_list()}
                for w in self.right
            ]
        return d


@dataclass
class SeparationVerdict:
    status: Status
    depth_used: int
    max_exponent: int
    resolved_scale: float
    witness: tuple[int, int] | None
    checked_pairs: list[tuple[int, int]]
    certificates: list[PairCertificate]

    def to_dict(self, params: IfsParams | None = None, certificate: bool = False) -> dict:
        d = {
            "status": self.status.value,
            "depth_used": self.depth_used,
            "max_exponent": self.max_exponent,
            "resolved_scale": self.resolved_scale,
            "witness": list(self.witness) if self.witness else None,
            "checked_pairs": [list(p) for p in self.checked_pairs],
        }
        if certificate:
            d["certificate"] = [c.to_dict(params) for c in self.certificates]
        return d


def _require_ninth(params: IfsParams) -> None:
    if not params.in_ninth_range:
        raise ValueError("forward separation needs alpha, beta, gamma in (0, 1/9)")


def log_ratio(params: IfsParams, m: int, n: int) -> float:
    """log(alpha^m / beta^n)."""
    return m * math.log(params.alpha) - n * math.log(params.beta)


def in_band(params: IfsParams, m: int, n: int) -> bool:
    return abs(log_ratio(params, m, n)) <= LOG_BAND


def exponent_for_scale(params: IfsParams, scale: float) -> int:
    """Smallest box size whose resolved_scale is <= scale."""
    r = max(params.alpha, params.beta)
    return max(1, math.ceil(math.log(scale / UPPER_RATIO) / math.log(r)))


def candidate_pairs(
    params: IfsParams, max_exponent: int, min_scale: float | None = None
) -> CandidateSet:
    """Pairs (m, n) in the box [1, max_exponent]^2 with alpha^m / beta^n in [8/9, 9/8].

    Outside the box m > max_exponent or n > max_exponent, so inside the
    band max(alpha^m, beta^n) < (9/8) max(alpha, beta)^max_exponent. If
    ``min_scale`` is given and the box does not reach it, raise with the
    required max_exponent.
    """
    _require_ninth(params)
    if max_exponent < 1:
        raise ValueError("max_exponent must be >= 1")
    resolved = UPPER_RATIO * max(params.alpha, params.beta) ** max_exponent
    if min_scale is not None and resolved > min_scale:
        need = exponent_for_scale(params, min_scale)
        raise ExhaustivenessError(
            need,
            f"max_exponent={max_exponent} resolves only down to {resolved:.3g}; "
            f"need max_exponent >= {need} for scale {min_scale:.3g}",
        )
    la, lb = math.log(params.alpha), math.log(params.beta)
    pairs = []
    for m in range(1, max_exponent + 1):
        # |m la - n lb| <= LOG_BAND pins n to a window of width < 1
        centre = m * la / lb
        half = LOG_BAND / -lb
        for n in range(max(1, math.floor(centre - half)), math.ceil(centre + half) + 1):
            if n <= max_exponent and in_band(params, m, n):
                pairs.append((m, n))
    return CandidateSet(pairs, max_exponent, resolved)


def is_coincidence(params: IfsParams, m: int, n: int) -> bool:
    """alpha^m == beta^n at working precision."""
    return abs(log_ratio(params, m, n)) <= COINCIDENCE_TOL * max(m, n)


def piece_enclosure(params: IfsParams, symbol: int, power: int) -> AffineEnclosure:
    enc = AffineEnclosure.identity()
    for _ in range(power):
        enc = enc.then(params, symbol)
    return enc.then(params, 3)


def piece_hull(params: IfsParams, symbol: int, power: int, word: Sequence[int]) -> Interval:
    """Enclosure of S_symbol^power S_3 S_word([0, 1])."""
    return cylinder_interval(params, (symbol,) * power + (3,) + tuple(word))


def conflicts(a: list[Interval], b: list[Interval]) -> tuple[set[int], set[int]]:
    """Indices of intervals in a and b that overlap something on the other side."""
    ev = sorted(
        [(iv.lo, iv.hi, 0, i) for i, iv in enumerate(a)]
        + [(iv.lo, iv.hi, 1, i) for i, iv in enumerate(b)]
    )
    bad = (set(), set())
    # running max of hi on each side with the index achieving it
    active: list[list[tuple[float, int]]] = [[], []]
    for lo, hi, side, i in ev:
        other = active[1 - side]
        keep = []
        for h, j in other:
            if h >= lo:
                bad[1 - side].add(j)
                bad[side].add(i)
                keep.append((h, j))
        active[1 - side] = keep
        active[side] = [(h, j) for h, j in active[side] if h >= lo] + [(hi, i)]
    return bad


def _separate_pair(params: IfsParams, m: int, n: int, refine_depth: int) -> PairCertificate:
    base = (piece_enclosure(params, 1, m), piece_enclosure(params, 2, n))
    leaves: list[list[tuple[tuple[int, ...], AffineEnclosure]]] = [
        [((), base[0])],
        [((), base[1])],
    ]
    for level in range(refine_depth + 1):
        hulls = [[enc.image_unit() for _, enc in side] for side in leaves]
        bad_a, bad_b = conflicts(hulls[0], hulls[1])
        if not bad_a and not bad_b:
            return PairCertificate(
                m, n, Status.SEPARATED, level,
                [w for w, _ in leaves[0]], [w for w, _ in leaves[1]],
            )
        if level == refine_depth:
            break
        new = []
        for side, bad in zip(leaves, (bad_a, bad_b)):
            nxt = []
            for idx, (w, enc) in enumerate(side):
                if idx in bad:
                    nxt.extend((w + (s,), enc.then(params, s)) for s in (1, 2, 3))
                else:
                    nxt.append((w, enc))
            new.append(nxt)
        if sum(len(s) for s in new) > MAX_COVER_PIECES:
            raise CoverLimitError(f"refinement of pair ({m}, {n}) exceeds {MAX_COVER_PIECES} pieces")
        leaves = new
    return PairCertificate(m, n, Status.INCONCLUSIVE, refine_depth)


def check_forward_separation(
    params: IfsParams,
    refine_depth: int = DEFAULT_REFINE_DEPTH,
    max_exponent: int = DEFAULT_MAX_EXPONENT,
) -> SeparationVerdict:
    _require_ninth(params)
    if refine_depth < 0:
        raise ValueError("refine_depth must be >= 0")
    cands = candidate_pairs(params, max_exponent)
    status = Status.SEPARATED
    witness = None
    certs = []
    depth_used = 0
    for m, n in cands.pairs:
        if is_coincidence(params, m, n):
            cert = PairCertificate(m, n, Status.INTERSECTING, 0)
            if witness is None:
                witness = (m, n)
        else:
            cert = _separate_pair(params, m, n, refine_depth)
        certs.append(cert)
        depth_used = max(depth_used, cert.level)
        status = merge_status(status, cert.status)
    if status is Status.INCONCLUSIVE and witness is None:
        witness = next((c.m, c.n) for c in certs if c.status is Status.INCONCLUSIVE)
    return SeparationVerdict(
        status, depth_used, max_exponent, cands.resolved_scale, witness, cands.pairs, certs
    )


def is_complete_cover(words: Sequence[tuple[int, ...]]) -> bool:
    """True iff the words are the leaves of a full ternary tree (prefix-free, Kraft sum 1)."""
    if not words:
        return False
    ws = sorted(set(words))
    if len(ws) != len(words):
        return False
    for a, b in zip(ws, ws[1:]):
        if b[: len(a)] == a:
            return False
    from fractions import Fraction

    return sum(Fraction(1, 3 ** len(w)) for w in ws) == 1


def verify_certificate(params: IfsParams, verdict: SeparationVerdict) -> bool:
    """Independent re-check of a Separated verdict.

    Re-enumerates the band pairs by brute force over the box, recomputes
    every cover hull from its word and compares all pieces pairwise.
    """
    if verdict.status is not Status.SEPARATED:
        return False
    box = verdict.max_exponent
    brute = [
        (m, n)
        for m in range(1, box + 1)
        for n in range(1, box + 1)
        if LOWER_RATIO <= params.alpha**m / params.beta**n <= UPPER_RATIO
    ]
    by_pair = {(c.m, c.n): c for c in verdict.certificates}
    for m, n in brute:
        cert = by_pair.get((m, n))
        if cert is None or cert.status is not Status.SEPARATED:
            return False
        if not (is_complete_cover(cert.left) and is_complete_cover(cert.right)):
            return False
        left = [piece_hull(params, 1, m, w) for w in cert.left]
        right = [piece_hull(params, 2, n, w) for w in cert.right]
        for a in left:
            for b in right:
                if a.overlaps(b):
                    return False
    return True


def hull_disjointness_lemma(params: IfsParams, i: int, m: int, n: int) -> bool:
    """Check S_i^m(R) and S_i^n(R) are disjoint via their hulls r^k [1 - gamma, 1].

    Valid whenever gamma < 1/2; this relaxed check does not need the 1/9 range.
    """
    if i not in (1, 2):
        raise ValueError("i must be 1 or 2")
    if m == n:
        raise ValueError("m and n must differ")
    if m < 0 or n < 0:
        raise ValueError("m and n must be >= 0")
    if not params.gamma < 0.5:
        raise ValueError("the hull check needs gamma < 1/2")
    a = cylinder_interval(params, (i,) * m + (3,))
    b = cylinder_interval(params, (i,) * n + (3,))
    return a.disjoint(b)


def decomposition_cover_check(
    params: IfsParams, depth: int, sample_count: int, seed: int
) -> float:
    """Fraction of sampled attractor points lying in their hull S_1^m S_2^n S_3([0, 1]).

    Words of length ``depth`` are drawn uniformly among those containing
    a 3; (m, n) counts the ones and twos before the first 3.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = random.Random(seed)
    hulls: dict[tuple[int, int], Interval] = {}
    covered = 0
    for _ in range(sample_count):
        while True:
            w = tuple(rng.choice((1, 2, 3)) for _ in range(depth))
            if 3 in w:
                break
        k = w.index(3)
        m, n = w[:k].count(1), w[:k].count(2)
        if m + n > depth:
            continue
        h = hulls.get((m, n))
        if h is None:
            h = hulls[(m, n)] = cylinder_interval(params, (1,) * m + (2,) * n + (3,))
        x = project_prefix(params, w)
        slack = MEMBERSHIP_SLACK * h.hi
        if h.lo - slack <= x <= h.hi + slack:
            covered += 1
    return covered / sample_count


def dmn_interval(beta: float, gamma: float, m: int, n: int) -> RatioBand:
    """Values of alpha in (0, 1/9) with 8/9 <= alpha^m / beta^n <= 9/8."""
    if not (0 < beta < NINTH and 0 < gamma < NINTH):
        raise ValueError("beta and gamma must lie in (0, 1/9)")
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    lo = (LOWER_RATIO * beta**n) ** (1.0 / m)
    hi = min((UPPER_RATIO * beta**n) ** (1.0 / m), NINTH)
    if lo >= NINTH or lo > hi:
        return RatioBand(m, n, None)
    return RatioBand(m, n, Interval(lo, hi))


def dmn_bands_containing(alpha: float, beta: float, gamma: float, max_exponent: int) -> list[tuple[int, int]]:
    out = []
    for m in range(1, max_exponent + 1):
        for n in range(1, max_exponent + 1):
            if dmn_interval(beta, gamma, m, n).contains(alpha):
                out.append((m, n))
    return out


def symbolic_dim_bound(a: float) -> tuple[float, bool]:
    """Dimension log 3 / (-log a) of {1,2,3}^N under the metric a^(first mismatch).

    The flag is True when it is below 1/2, i.e. a < 1/9.
    """
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    return math.log(3) / -math.log(a), a < NINTH


# Lipschitz lower bound M = 5 beta^n for alpha -> phi_1 - phi_2 on D_{m,n}; metadata only.
def displacement_constant(beta: float, n: int) -> float:
    return 5.0 * beta**n
