import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlapdim.ifs_core import IfsParams
from overlapdim.separation import (
    ExhaustivenessError,
    Status,
    candidate_pairs,
    check_forward_separation,
    conflicts,
    decomposition_cover_check,
    dmn_bands_containing,
    dmn_interval,
    hull_disjointness_lemma,
    is_complete_cover,
    merge_status,
    symbolic_dim_bound,
    verify_certificate,
)
from overlapdim.ifs_core import Interval

small = st.floats(min_value=1e-3, max_value=1 / 9 - 1e-6)


def test_main_case_separated(main_params):
    v = check_forward_separation(main_params)
    assert v.status is Status.SEPARATED
    # 0.03^6 / 0.05^7 is about 0.933, inside [8/9, 9/8]
    assert (6, 7) in v.checked_pairs
    assert verify_certificate(main_params, v)


def test_exact_coincidence_intersects():
    p = IfsParams(0.09**2, 0.09, 0.07)
    v = check_forward_separation(p)
    assert v.status is Status.INTERSECTING
    assert v.witness == (1, 2)
    assert not verify_certificate(p, v)


def test_needs_ninth_range():
    with pytest.raises(ValueError):
        check_forward_separation(IfsParams(0.03, 0.2, 0.07))


def test_negative_depth_rejected(main_params):
    with pytest.raises(ValueError):
        check_forward_separation(main_params, refine_depth=-1)


def test_close_ratio_needs_refinement():
    p = IfsParams(0.052, 0.05, 0.07)
    assert check_forward_separation(p, 0).status is Status.INCONCLUSIVE
    v = check_forward_separation(p, 1)
    assert v.status is Status.SEPARATED and v.depth_used == 1
    assert verify_certificate(p, v)


def test_candidate_pairs_match_brute_force(main_params):
    got = candidate_pairs(main_params, 30).pairs
    brute = [
        (m, n)
        for m in range(1, 31)
        for n in range(1, 31)
        if 8 / 9 <= 0.03**m / 0.05**n <= 9 / 8
    ]
    assert got == brute


def test_exhaustiveness_error(main_params):
    with pytest.raises(ExhaustivenessError) as e:
        candidate_pairs(main_params, 5, min_scale=1e-20)
    assert e.value.required > 5
    candidate_pairs(main_params, e.value.required, min_scale=1e-20)


def test_merge_precedence():
    S, X, I = Status.SEPARATED, Status.INTERSECTING, Status.INCONCLUSIVE
    assert merge_status(S, I) is I
    assert merge_status(I, X) is X
    assert merge_status(S, S) is S


def test_conflicts_sweep():
    a = [Interval(0, 1), Interval(2, 3)]
    b = [Interval(1.5, 1.9), Interval(2.5, 4)]
    assert conflicts(a, b) == ({1}, {1})
    assert conflicts([Interval(0, 1)], [Interval(1, 2)]) == ({0}, {0})


def test_complete_cover():
    assert is_complete_cover([()])
    assert is_complete_cover([(1,), (2,), (3, 1), (3, 2), (3, 3)])
    assert not is_complete_cover([(1,), (2,)])
    assert not is_complete_cover([(1,), (1, 2), (2,), (3,)])


@given(small, small, small)
@settings(max_examples=80, deadline=None)
def test_refinement_monotone(a, b, g):
    p = IfsParams(a, b, g)
    statuses = [check_forward_separation(p, d).status for d in range(0, 5)]
    for s, t in zip(statuses, statuses[1:]):
        if s is Status.SEPARATED:
            assert t is Status.SEPARATED
        assert (s is Status.INTERSECTING) == (t is Status.INTERSECTING)


@given(small, small, small)
@settings(max_examples=80, deadline=None)
def test_separated_certificates_reverify(a, b, g):
    p = IfsParams(a, b, g)
    v = check_forward_separation(p)
    if v.status is Status.SEPARATED:
        assert verify_certificate(p, v)


def test_hull_disjointness_powers(main_params):
    for i in (1, 2):
        for m in range(0, 6):
            for n in range(m + 1, 7):
                assert hull_disjointness_lemma(main_params, i, m, n)
    with pytest.raises(ValueError):
        hull_disjointness_lemma(main_params, 1, 2, 2)


def test_decomposition_cover(main_params):
    assert decomposition_cover_check(main_params, 12, 2000, seed=4) == 1.0


def test_dmn_interval_endpoints():
    band = dmn_interval(0.09, 0.07, 1, 1)
    assert band.interval.lo == pytest.approx(0.08)
    assert band.interval.hi == pytest.approx(9 / 8 * 0.09)
    assert band.contains(0.085) and not band.contains(0.07)
    assert dmn_interval(0.09, 0.07, 1, 3).empty is False
    assert (1, 1) in dmn_bands_containing(0.085, 0.09, 0.07, 10)


def test_dmn_agrees_with_candidates(main_params):
    bands = dmn_bands_containing(0.03, 0.05, 0.07, 30)
    assert bands == candidate_pairs(main_params, 30).pairs


def test_symbolic_bound():
    d, ok = symbolic_dim_bound(1 / 10)
    assert d == pytest.approx(math.log(3) / math.log(10)) and ok
    assert not symbolic_dim_bound(0.2)[1]


def test_random_triples_fast():
    rng = random.Random(0)
    for _ in range(50):
        p = IfsParams(*(rng.uniform(1e-3, 1 / 9 - 1e-9) for _ in range(3)))
        v = check_forward_separation(p)
        assert v.status is not Status.INTERSECTING


def test_prefilter_completeness():
    # pairs outside the band have disjoint hulls [r^k (1 - gamma), r^k]
    rng = random.Random(309)
    checked = 0
    while checked < 10_000:
        p = IfsParams(*(rng.uniform(1e-3, 1 / 9 - 1e-9) for _ in range(3)))
        m, n = rng.randint(1, 30), rng.randint(1, 30)
        if (m, n) in candidate_pairs(p, 30).pairs:
            continue
        a, b = p.alpha**m, p.beta**n
        assert Interval(a * (1 - p.gamma), a).disjoint(Interval(b * (1 - p.gamma), b))
        checked += 1
