"""The three-map IFS {alpha x, beta x, gamma x + 1 - gamma}.

Words, certified cylinder hulls, finite-depth projection and seeded
sampling of the self-similar measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ALPHABET = (1, 2, 3)
NINTH = 1.0 / 9.0
PROB_TOL = 1e-12

# Recorded in every output that depends on random draws.
RNG_ALGORITHM = "numpy.PCG64/SeedSequence.spawn"
# Samples per spawned child stream; fixes results independent of worker count.
CHUNK_SIZE = 1 << 15

Word = tuple


def _down(x: float) -> float:
    return math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    return math.nextafter(x, math.inf)


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi].

    Arithmetic helpers round outward by one unit in the last place per
    operation, which is enough to contain the exact result of a single
    round-to-nearest operation.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> Interval:
        return cls(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, other: Interval | float) -> bool:
        if isinstance(other, Interval):
            return self.lo <= other.lo and other.hi <= self.hi
        return self.lo <= other <= self.hi

    def overlaps(self, other: Interval) -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def disjoint(self, other: Interval) -> bool:
        return not self.overlaps(other)

    def hull(self, other: Interval) -> Interval:
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def scale(self, r: float) -> Interval:
        """Outward enclosure of r * self for r >= 0."""
        if r < 0:
            raise ValueError("scale factor must be nonnegative")
        return Interval(_down(r * self.lo), _up(r * self.hi))

    def shift(self, other: Interval) -> Interval:
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    def as_list(self) -> list[float]:
        return [self.lo, self.hi]


@dataclass(frozen=True)
class IfsParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
        if not max(self.alpha, self.beta) + self.gamma < 1.0:
            raise ValueError("max(alpha, beta) + gamma must be < 1")

    @property
    def in_ninth_range(self) -> bool:
        return max(self.alpha, self.beta, self.gamma) < NINTH

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)

    def ratio(self, symbol: int) -> float:
        _check_symbol(symbol)
        return self.ratios[symbol - 1]

    def translation(self, symbol: int) -> float:
        _check_symbol(symbol)
        return 1.0 - self.gamma if symbol == 3 else 0.0

    def translation_enclosure(self, symbol: int) -> Interval:
        if symbol == 3:
            t = 1.0 - self.gamma
            # 1 - gamma is exact for gamma >= 1/2 (Sterbenz), not in general.
            return Interval(_down(t), _up(t))
        _check_symbol(symbol)
        return Interval(0.0, 0.0)

    def depth_for_accuracy(self, delta: float) -> int:
        """Word length whose prefix projection is within delta of the limit."""
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        return max(1, math.ceil(math.log(delta) / math.log(self.max_ratio)))

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}


@dataclass(frozen=True)
class ProbVector:
    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        ps = (self.p1, self.p2, self.p3)
        if any(not p > 0 for p in ps):
            raise ValueError("probabilities must be strictly positive")
        if abs(sum(ps) - 1) > PROB_TOL:
            raise ValueError(f"probabilities must sum to 1, got {float(sum(ps))!r}")

    @classmethod
    def uniform(cls) -> ProbVector:
        return cls(1 / 3, 1 / 3, 1 - 2 / 3)

    @property
    def as_tuple(self) -> tuple:
        return (self.p1, self.p2, self.p3)

    def swapped(self) -> ProbVector:
        """The vector with p1 and p2 exchanged."""
        return ProbVector(self.p2, self.p1, self.p3)

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "p3": self.p3}


def _check_symbol(symbol) -> None:
    if symbol not in ALPHABET:
        raise ValueError(f"symbol must be one of 1, 2, 3, got {symbol!r}")


def make_word(symbols: Iterable[int]) -> Word:
    w = tuple(int(s) for s in symbols)
    for s in w:
        _check_symbol(s)
    return w


def apply_map(params: IfsParams, symbol: int, x: float) -> float:
    _check_symbol(symbol)
    if symbol == 1:
        return params.alpha * x
    if symbol == 2:
        return params.beta * x
    return params.gamma * x + (1.0 - params.gamma)


@dataclass(frozen=True)
class AffineEnclosure:
    """Enclosure of a composed map x -> scale * x + shift (scale > 0).

    Composition runs left to right: appending a symbol s to the word w
    gives S_w o S_s, so shift += scale * t_s and scale *= r_s.
    """

    scale: Interval
    shift: Interval

    @classmethod
    def identity(cls) -> AffineEnclosure:
        return cls(Interval(1.0, 1.0), Interval(0.0, 0.0))

    def then(self, params: IfsParams, symbol: int) -> AffineEnclosure:
        r = params.ratio(symbol)
        if symbol == 3:
            t = params.translation_enclosure(3)
            step = Interval(_down(self.scale.lo * t.lo), _up(self.scale.hi * t.hi))
            shift = self.shift.shift(step)
        else:
            shift = self.shift
        return AffineEnclosure(self.scale.scale(r), shift)

    def image_unit(self) -> Interval:
        """Enclosure of the image of [0, 1].

        Every map sends [0, 1] into itself, so clipping to [0, 1] keeps
        the enclosure sound.
        """
        return Interval(max(self.shift.lo, 0.0), min(_up(self.shift.hi + self.scale.hi), 1.0))


def word_enclosure(params: IfsParams, word: Sequence[int]) -> AffineEnclosure:
    enc = AffineEnclosure.identity()
    for s in word:
        enc = enc.then(params, s)
    return enc


def cylinder_interval(params: IfsParams, word: Sequence[int]) -> Interval:
    """Certified enclosure of S_word([0, 1])."""
    return word_enclosure(params, make_word(word)).image_unit()


def project_prefix(params: IfsParams, word: Sequence[int]) -> float:
    """S_{i_1} o ... o S_{i_n}(0) for a nonempty word.

    Evaluated left to right in the same operation order as
    ``word_enclosure`` so the float result always lies inside the
    certified cylinder hull.
    """
    w = make_word(word)
    if not w:
        raise ValueError("word must be nonempty")
    scale, shift = 1.0, 0.0
    for s in w:
        shift = shift + scale * params.translation(s)
        scale = scale * params.ratio(s)
    return shift


def child_seeds(seed, n_chunks: int) -> list[np.random.SeedSequence]:
    """Split an int seed (or an existing SeedSequence) into independent children."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(n_chunks)


def chunk_sizes(count: int, chunk: int = CHUNK_SIZE) -> list[int]:
    full, rest = divmod(count, chunk)
    return [chunk] * full + ([rest] if rest else [])


def draw_symbols(rng: np.random.Generator, probs: ProbVector, shape) -> np.ndarray:
    """Symbols in {1, 2, 3} as int8, drawn by inverse CDF from uniforms."""
    u = rng.random(shape)
    c1 = float(probs.p1)
    c2 = float(probs.p1) + float(probs.p2)
    return (1 + (u >= c1) + (u >= c2)).astype(np.int8)


def project_symbols(params: IfsParams, symbols: np.ndarray) -> np.ndarray:
    """Vectorised ``project_prefix`` over the rows of a symbol matrix."""
    ratios = np.array([0.0, params.alpha, params.beta, params.gamma])
    shifts = np.array([0.0, 0.0, 0.0, 1.0 - params.gamma])
    n = symbols.shape[0]
    scale = np.ones(n)
    shift = np.zeros(n)
    for col in symbols.T:
        shift = shift + scale * shifts[col]
        scale = scale * ratios[col]
    return shift


def _sample_chunk(params, probs, depth, size, seq) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seq))
    return project_symbols(params, draw_symbols(rng, probs, (size, depth)))


def sample_measure(
    params: IfsParams,
    probs: ProbVector,
    depth: int,
    count: int,
    seed: int,
    executor=None,
) -> np.ndarray:
    """Approximate samples of the self-similar measure.

    Each value is the depth-``depth`` prefix projection of a Bernoulli
    word, so it lies within max_ratio**depth of an exact sample. The
    output depends only on (seed, count, depth): chunk k always uses the
    k-th spawned child stream.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    sizes = chunk_sizes(count)
    seqs = child_seeds(seed, len(sizes))
    args = [(params, probs, depth, n, s) for n, s in zip(sizes, seqs)]
    if executor is None:
        parts = [_sample_chunk(*a) for a in args]
    else:
        parts = list(executor.map(lambda a: _sample_chunk(*a), args))
    return np.concatenate(parts)


def mean_of_measure(params: IfsParams, probs: ProbVector) -> float:
    """Exact first moment from nu = sum p_i (S_i)_* nu."""
    p1, p2, p3 = probs.as_tuple
    a, b, g = params.ratios
    return p3 * (1 - g) / (1 - p1 * a - p2 * b - p3 * g)
