"""High-precision reference computations, independent of the package code paths."""

import mpmath as mp

mp.mp.dps = 40


def moran_root(ratios, subtract_product=False):
    a, b, g = (mp.mpf(r) for r in ratios)

    def f(s):
        v = a**s + b**s + g**s - 1
        return v - (a * b) ** s if subtract_product else v

    return mp.findroot(f, (mp.mpf("1e-6"), mp.mpf(1)), solver="anderson")


def subsystem_root(ratios, n):
    a, b, g = (mp.mpf(r) for r in ratios)

    def f(s):
        return g**s * mp.fsum(a ** (i * s) * b ** (j * s) for i in range(n + 1) for j in range(n + 1 - i)) - 1

    return mp.findroot(f, (mp.mpf("1e-6"), mp.mpf(1)), solver="anderson")


def phi(probs, K=120):
    """Direct sum with exact binomials; the tail past K is below 1e-18 for the inputs used."""
    p1, p2, p3 = (mp.mpf(p) for p in probs)
    total = mp.mpf(0)
    for k in range(1, K + 1):
        for m in range(1, k + 1):
            c = mp.binomial(k - 1, m - 1)
            total += p3 * c * mp.log(mp.mpf(m) / k) * (p1**m * p2 ** (k - m) + p1 ** (k - m) * p2**m)
    return total


def dimension(ratios, probs):
    h = -mp.fsum(mp.mpf(p) * mp.log(p) for p in probs)
    chi = -mp.fsum(mp.mpf(p) * mp.log(r) for p, r in zip(probs, ratios))
    return (h + phi(probs)) / chi
