import numpy as np
import pytest

from pairecho.dephasing import (
    CLASS_CODE,
    CoherenceCurve,
    ContributionSet,
    PairClass,
    coherence_curve,
    first_maximum_time,
    modulation_depth,
    pair_frequency,
    rank_pairs,
    w_of_t,
)
from pairecho.model import InputError


def make_set(deltas, bs, kinds=None, r=1.5):
    n = len(deltas)
    kinds = kinds or [PairClass.INTRAMOLECULAR] * n
    return ContributionSet(
        index_k=np.arange(n) * 2,
        index_l=np.arange(n) * 2 + 1,
        delta=deltas,
        b=bs,
        r_nn=np.full(n, r),
        kind_code=[CLASS_CODE[k] for k in kinds],
    )


# --- modulation depth --------------------------------------------------------

def test_depth_zero_delta():
    assert modulation_depth(0.0, 2.7) == 0.0


def test_depth_equal_couplings_is_unity():
    assert modulation_depth(1.3, 1.3) == 1.0
    assert modulation_depth(-0.04, 0.04) == 1.0


def test_depth_three_four():
    # (2*3*4 / 25)^2 = (24/25)^2
    assert modulation_depth(3.0, 4.0) == pytest.approx(0.9216, rel=1e-12)


def test_depth_degenerate_pair_is_zero():
    assert modulation_depth(0.0, 0.0) == 0.0


def test_depth_bounded_and_sign_symmetric():
    rng = np.random.default_rng(7)
    d = rng.uniform(-10, 10, 500)
    b = rng.uniform(-10, 10, 500)
    a2 = modulation_depth(d, b)
    assert np.all(a2 >= 0) and np.all(a2 <= 1)
    assert np.allclose(modulation_depth(-d, b), a2, rtol=0, atol=0)


def test_depth_barrier_monotonicity():
    # fixed b: strictly increasing on 0 < |delta| < b, decreasing beyond
    b = 2.0
    rising = modulation_depth(np.linspace(0.05, b, 60), b)
    falling = modulation_depth(np.linspace(b, 50 * b, 200), b)
    assert np.all(np.diff(rising) > 0)
    assert np.all(np.diff(falling) < 0)


# --- frequency ---------------------------------------------------------------

def test_frequency_zero():
    assert pair_frequency(0.0, 0.0) == 0.0


def test_frequency_three_four():
    assert pair_frequency(3.0, 4.0) == pytest.approx(1.25, rel=1e-15)


def test_frequency_homogeneity():
    rng = np.random.default_rng(11)
    for _ in range(50):
        d, b, c = rng.uniform(0.1, 5, 3)
        assert pair_frequency(c * d, c * b) == pytest.approx(
            c * pair_frequency(d, b), rel=1e-12)


# --- kernel ------------------------------------------------------------------

def test_w_zero_at_t0():
    assert w_of_t(0.0, 3.0, 4.0) == 0.0


def test_w_first_maximum_equals_depth():
    d, b = 2.2, 0.7
    t_star = 2.0 * np.pi / np.hypot(d, b)
    assert first_maximum_time(d, b) == pytest.approx(t_star, rel=1e-15)
    assert w_of_t(t_star, d, b) == pytest.approx(
        modulation_depth(d, b), rel=1e-12)


def test_w_max_is_one_for_equal_couplings():
    d = b = 1.7
    t = np.linspace(0, 2 * np.pi / np.hypot(d, b), 2001)
    assert np.max(w_of_t(t, d, b)) == pytest.approx(1.0, rel=1e-12)


def test_w_bounded_by_depth():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d, b = rng.uniform(-5, 5, 2)
        t = rng.uniform(0, 100, 200)
        t.sort()
        w = w_of_t(t, d, b)
        assert np.all(w >= 0)
        assert np.all(w <= modulation_depth(d, b) + 1e-15)


def test_w_sign_flip_invariance():
    t = np.linspace(0, 30, 100)
    assert np.array_equal(w_of_t(t, 1.2, 0.4), w_of_t(t, -1.2, 0.4))


def test_w_rejects_negative_time():
    with pytest.raises(InputError):
        w_of_t(-1.0, 1.0, 1.0)


# --- coherence curves --------------------------------------------------------

def test_empty_contributions_give_constant_one():
    curve = coherence_curve(ContributionSet.empty(), np.linspace(0, 10, 11))
    assert np.all(curve.values == 1.0)


def test_single_pair_curve_matches_closed_form():
    d, b = 1.1, 0.9
    times = np.linspace(0, 3 * 2 * np.pi / np.hypot(d, b), 400)
    curve = coherence_curve(make_set([d], [b]), times)
    assert np.allclose(curve.values, np.exp(-w_of_t(times, d, b)),
                       rtol=1e-14, atol=0)
    assert curve.values.min() == pytest.approx(
        np.exp(-modulation_depth(d, b)), rel=1e-6)


def test_adding_a_pair_never_increases_coherence():
    times = np.linspace(0, 40, 101)
    base = coherence_curve(make_set([1.0], [0.5]), times)
    more = coherence_curve(make_set([1.0, 0.3], [0.5, 0.3]), times)
    assert np.all(more.values <= base.values)


def test_class_product_decomposition():
    rng = np.random.default_rng(5)
    n = 30
    kinds = [PairClass.INTRAMOLECULAR, PairClass.MOLECULE_SOLVENT,
             PairClass.SOLVENT_SOLVENT]
    contribs = make_set(rng.uniform(-3, 3, n), rng.uniform(-3, 3, n),
                        kinds=[kinds[i % 3] for i in range(n)])
    times = np.linspace(0, 50, 200)
    total = coherence_curve(contribs, times).values
    product = np.ones_like(times)
    for kind in kinds:
        product *= coherence_curve(contribs, times, class_filter={kind}).values
    assert np.allclose(total, product, rtol=1e-12, atol=0)


def test_curve_validation():
    with pytest.raises(InputError):
        CoherenceCurve(np.array([0.0, 1.0]), np.array([0.9, 0.5]))
    with pytest.raises(InputError):
        CoherenceCurve(np.array([1.0, 2.0]), np.array([1.0, 0.5]))
    with pytest.raises(InputError):
        CoherenceCurve(np.array([0.0, 1.0, 1.0]), np.array([1.0, 0.5, 0.4]))
    with pytest.raises(InputError):
        CoherenceCurve(np.array([0.0, 1.0]), np.array([1.0, 1.2]))


def test_kernel_curves_strictly_positive():
    curve = coherence_curve(make_set([2.0], [2.0]), np.linspace(0, 10, 50))
    assert np.all(curve.values > 0)


# --- ranking -----------------------------------------------------------------

def test_rank_ties_break_by_index():
    contribs = make_set([1.0, 1.0], [0.5, 0.5])
    ranked = rank_pairs(contribs, horizon=100.0, top_n=2)
    assert ranked[0].score == ranked[1].score
    assert ranked[0].contribution.coupling.index_k \
        < ranked[1].contribution.coupling.index_k


def test_rank_depth_dominates_at_comparable_frequency():
    # two pairs reaching their maxima within the horizon: the deeper wins
    contribs = make_set([1.0, 1.0], [0.3159, 2.958e-3])
    a2 = np.atleast_1d(contribs.alpha2)
    assert a2[0] == pytest.approx(0.33, rel=0.01)
    assert a2[1] == pytest.approx(3.5e-5, rel=0.01)
    ranked = rank_pairs(contribs, horizon=1000.0, top_n=2)
    assert ranked[0].alpha2 == pytest.approx(a2[0], rel=1e-12)


def test_rank_slow_pair_scored_at_horizon():
    # huge depth but first maximum far beyond the horizon
    eps = 1e-4
    horizon = 10.0  # eps * horizon << 1
    fast = (1.0, 0.05)
    slow = (eps, eps)  # alpha2 = 1, maximum at ~ 2 pi / (eps sqrt 2)
    contribs = make_set([fast[0], slow[0]], [fast[1], slow[1]])
    ranked = rank_pairs(contribs, horizon=horizon, top_n=2)
    slow_rank = [p for p in ranked
                 if p.contribution.coupling.delta == eps][0]
    assert slow_rank.score == pytest.approx(
        w_of_t(horizon, eps, eps), rel=1e-12)
    assert ranked[0].contribution.coupling.delta == fast[0]


def test_rank_horizon_validation():
    with pytest.raises(InputError):
        rank_pairs(make_set([1.0], [1.0]), horizon=0.0, top_n=1)
