import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_bowen_distance, brute_min_cover, decimal_ceil_exp_product

from hilbert_escape.covering import (
    BowenSpec,
    EstimationError,
    bowen_contains,
    bowen_distance,
    box_prediction,
    ceil_exp,
    conjugated_ball_cover,
    decompose_box,
    entropy_estimate,
    fit_c0,
    greedy_cover,
    inductive_cover_count,
    mass_entropy_check,
    random_plabel,
)
from hilbert_escape.flow import FlowElement, FlowRangeError
from hilbert_escape.measures import DiscreteMeasure, cusp_point, geodesic_point, unstable_box
from hilbert_escape.module_space import SpacePoint, random_point, translate_cloud, u_plus
from hilbert_escape.number_field import ConfigurationError, FieldSpec
from hilbert_escape.partitions import PLabel, QLabel, choices_admissible

Q = FieldSpec("rational")
R2 = FieldSpec("real-quadratic", 2)
Qi = FieldSpec("imaginary-quadratic", 1)
A02 = FlowElement.for_field(Q, [0.2])

# (N, a_*, a_j, ceil(e^{N (a_* - a_j)}) from 80-digit decimal arithmetic)
FROZEN_CONJUGATED = [
    (50, 0.3, 0.1, 22027),
    (200, 0.7, 0.2, 26881171418161056043171882133380599819069140),
    (333, 0.9, 0.35,
     34756365895281243358450933392272987897188260808306286281251715839044054517544728),
]


def test_ceil_exp():
    assert ceil_exp(0) == 1 and ceil_exp(-3.0) == 1
    assert ceil_exp(math.log(4.0)) == 4
    assert ceil_exp(2.0) == 8
    assert ceil_exp(100) == int(decimal_ceil_exp_product(100, 1, 0))


@pytest.mark.parametrize("N, a_star, rate, expected", FROZEN_CONJUGATED)
def test_conjugated_matches_frozen_oracle(N, a_star, rate, expected):
    a = FlowElement.for_field(R2, [a_star, rate])
    rep = conjugated_ball_cover(N, a)
    assert rep.count == expected
    assert rep.count <= rep.bound_value


@pytest.mark.parametrize("N, a_star, rate, expected", FROZEN_CONJUGATED)
def test_oracle_reproduces_frozen(N, a_star, rate, expected):
    assert decimal_ceil_exp_product(N, a_star, rate) == expected


def test_conjugated_examples():
    a = FlowElement.for_field(R2, [1.0, 0.5])
    for N in range(0, 30):
        assert conjugated_ball_cover(N, a).count == math.ceil(math.exp(0.5 * N) - 1e-9)
    eq = FlowElement.for_field(R2, [1.0, 1.0])
    assert all(conjugated_ball_cover(N, eq).count == 1 for N in range(20))
    assert conjugated_ball_cover(0, FlowElement.for_field(Qi, [0.3])).count == 1
    with pytest.raises(FlowRangeError):
        conjugated_ball_cover(800, a)


@given(r1=st.floats(0.01, 2.0), r2=st.floats(0.0, 2.0), n=st.integers(0, 150), m=st.integers(0, 150))
def test_conjugated_submultiplicative(r1, r2, n, m):
    a = FlowElement.for_field(R2, [r1, r2])
    if (n + m) * a.a_star > 700:
        return
    c = conjugated_ball_cover
    assert c(n + m, a).count <= c(n, a).count * c(m, a).count


def _pair(F, rng, scale=0.1):
    x = random_point(F, rng, 1.0)
    h = np.eye(2) + scale * (rng.normal(size=(F.places, 2, 2)) + 1j * rng.normal(size=(F.places, 2, 2)) * (F.s > 0))
    h = h / np.sqrt(np.linalg.det(h))[:, None, None]
    return x, translate_cloud(x, h[None])[0]


@pytest.mark.parametrize("F, rates, angles", [(Q, [0.3], None), (R2, [0.3, 0.1], None),
                                              (Qi, [0.25], [0.9])], ids=str)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(1, 12))
def test_bowen_distance_matches_matrix_products(F, rates, angles, seed, N):
    rng = np.random.default_rng(seed)
    a = FlowElement.for_field(F, rates, angles)
    x, y = _pair(F, rng)
    got = bowen_distance(BowenSpec(N, a, 0.5), x.mats, y[None])[0]
    want = brute_bowen_distance(a.rates, a.angles, N, x.mats, y)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
    back = bowen_distance(BowenSpec(N, a, 0.5), y, x.mats[None])[0]
    assert back == pytest.approx(got, rel=1e-9, abs=1e-12)


def test_unstable_and_stable_translates(rng):
    a = FlowElement.for_field(R2, [0.3, 0.1])
    x = random_point(R2, rng)
    N, eta = 10, 0.25
    spec = BowenSpec(N, a, eta)
    edge = eta * np.exp(-(N - 1) * np.asarray(a.rates))
    for factor, inside in ((0.99, True), (1.01, False)):
        y = SpacePoint(R2, translate_cloud(x, u_plus(R2, factor * edge)[None])[0])
        assert bowen_contains(spec, x, y) is inside
    stable = np.tile(np.array([[1, 0.24], [0, 1]], dtype=complex), (2, 1, 1))
    y = SpacePoint(R2, translate_cloud(x, stable[None])[0])
    assert all(bowen_contains(BowenSpec(n, a, eta), x, y) for n in (1, 10, 100))
    assert bowen_contains(spec, x, x)


def test_greedy_trivial_cases(rng):
    spec = BowenSpec(8, A02, 0.25)
    x = geodesic_point(Q)
    assert greedy_cover([x], spec).count == 1
    tiny = unstable_box(x, [1e-3 * math.exp(-7 * 0.2)], 50, rng)
    rep = greedy_cover(tiny, spec)
    assert rep.count == 1 and rep.lower == 1
    assert greedy_cover(np.empty((0, 1, 2, 2)), spec).count == 0


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_greedy_sandwich_against_exact_cover(seed):
    rng = np.random.default_rng(seed)
    spec = BowenSpec(6, A02, 0.25)
    Y = unstable_box(geodesic_point(Q), [0.5], 9, rng)
    rep = greedy_cover(Y, spec)
    best = brute_min_cover(list(Y), lambda c, p: bowen_distance(spec, c, p[None])[0] < spec.eta)
    assert rep.lower <= best <= rep.count


def test_greedy_grid_near_box_prediction():
    spec = BowenSpec(10, A02, 0.25)
    Y = unstable_box(geodesic_point(Q), [1.0], 2000)
    count = greedy_cover(Y, spec).count
    pred = box_prediction([1.0], spec)
    assert pred / 4 <= count <= 4 * pred


def test_decompose_box_examples():
    a = FlowElement.for_field(Q, [1.0])
    assert decompose_box([2.0], 0, 4, a, 1.0)[0] == 8
    assert decompose_box([4.0], 0, 4, a, 0.25)[0] == 4
    assert decompose_box([-math.inf], 0, 4, a, 0.25)[0] == math.ceil(math.e ** 4)
    r2 = FlowElement.for_field(R2, [0.5, 0.25])
    assert decompose_box([-math.inf, -math.inf], 3, 8, r2, 0.25)[0] == 55 * 8
    with pytest.raises(ConfigurationError):
        decompose_box([9.0], 0, 4, a, 0.25)


@given(ell=st.integers(0, 15), i1=st.integers(0, 16), i2=st.integers(0, 16),
       r1=st.floats(0.05, 1.0), r2=st.floats(0.05, 1.0), b=st.integers(1, 20))
def test_decompose_box_under_cap(ell, i1, i2, r1, r2, b):
    from hilbert_escape.covering import _left_endpoints
    a = FlowElement.for_field(R2, [r1, r2])
    choice = (min(i1, ell + 1), min(i2, ell + 1))
    if not choices_admissible(choice, ell, a)[0]:
        return
    count, cap = decompose_box(_left_endpoints(b, ell, choice, a), b, ell, a, 0.25)
    assert count <= cap * (1 + 1e-9)


@pytest.mark.parametrize("F, rates", [(Q, [0.3]), (R2, [0.3, 0.1]), (Qi, [0.2])], ids=str)
def test_inductive_without_excursions(F, rates):
    a = FlowElement.for_field(F, rates)
    N = 40
    rep = inductive_cover_count(PLabel(QLabel(50.0, N, (), 5), ()), a, 50.0)
    want = 1
    for r, d in zip(a.rates, a.deltas):
        want *= math.ceil(math.exp((N - 1) * r)) ** d
    assert rep.count == want


def test_inductive_contracting_excursion():
    a = FlowElement.for_field(Q, [1.0])
    M, N, ell = math.exp(3), 30, 9
    label = PLabel(QLabel(M, N, ((10, ell),), 5), ((ell + 1,),))
    rep = inductive_cover_count(label, a, M, eta=0.25)
    blocks = math.ceil(math.exp(9)) * math.ceil(math.exp(N - 1 - 19))
    assert rep.count == blocks * 4
    assert rep.extras["log_base"] == pytest.approx(N - (ell + 1) / 2)
    with pytest.raises(ConfigurationError):
        inductive_cover_count(PLabel(QLabel(M, N, ((0, 2),), 5), ((3,),)), a, M)


def test_inductive_meets_fitted_target(rng):
    a = FlowElement.for_field(R2, [0.3, 0.2])
    M = math.exp(3 * a.h_max)
    reports = [inductive_cover_count(random_plabel(rng, M, 40, a), a, M) for _ in range(60)]
    c0 = fit_c0(reports)
    for rep in reports:
        expo = a.h_max * 40 / math.log(M)
        assert rep.count <= c0 ** expo * math.exp(rep.extras["log_base"]) * (1 + 1e-9)


def test_inductive_dominates_separated_sets(rng):
    # the label with V empty covers x B_eta^{U+}; any separated subset is at most that large
    N = 10
    spec = BowenSpec(N, A02, 0.25)
    Y = unstable_box(geodesic_point(Q), [0.25], 400, rng)
    lower = greedy_cover(Y, spec).lower
    count = inductive_cover_count(PLabel(QLabel(50.0, N, (), 5), ()), A02, 50.0).count
    assert lower <= count


def test_entropy_point_mass_and_stable_leaf(rng):
    x = geodesic_point(Q)
    est = entropy_estimate(np.repeat(x.mats[None], 5, axis=0), A02, 0.25, range(6, 15))
    assert est.slope == 0.0 and est.log_counts[0] == 0.0
    stable = np.zeros((300, 1, 2, 2), dtype=complex)
    stable[:, 0] = np.eye(2)
    stable[:, 0, 0, 1] = np.linspace(-1, 1, 300)
    leaf = translate_cloud(x, stable)
    assert abs(entropy_estimate(leaf, A02, 0.25, range(6, 15)).slope) < 0.02
    with pytest.raises(EstimationError):
        entropy_estimate(leaf, A02, 0.25, range(6, 8))


def test_mass_entropy_extremes(rng):
    a = FlowElement.for_field(Q, [0.4])
    compact = DiscreteMeasure.uniform(Q, unstable_box(geodesic_point(Q), [0.05], 50, rng))
    rep = mass_entropy_check(compact, a, 100.0, N_range=range(6, 11))
    assert rep.escape == 0.0 and rep.slack > 0
    assert rep.h_hat <= a.h_max + rep.phi_hat
    M = 10.0
    high = DiscreteMeasure.uniform(Q, unstable_box(cusp_point(Q, 1e4), [1e-6], 20, rng))
    rep = mass_entropy_check(high, a, M, N_range=range(4, 9))
    assert rep.escape == pytest.approx(1.0)
    assert rep.h_hat <= a.h_max / 2 + rep.phi_hat


def test_bowen_spec_validation():
    with pytest.raises(ConfigurationError):
        BowenSpec(0, A02)
    with pytest.raises(ConfigurationError):
        BowenSpec(5, A02, 0.6)
    with pytest.raises(FlowRangeError):
        BowenSpec(10 ** 5, A02)
