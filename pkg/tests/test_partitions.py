import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_q_count

from hilbert_escape.flow import FlowElement, RatioProfile, itinerary, make_profile
from hilbert_escape.module_space import random_point
from hilbert_escape.number_field import ConfigurationError, EnumerationCapError, FieldSpec
from hilbert_escape.partitions import (
    LabelingError,
    PLabel,
    QLabel,
    choices_admissible,
    count_p_refinement,
    count_q_labels,
    fit_phi_constant,
    p_label,
    q_label,
    relation_admissible,
)

Q = FieldSpec("rational")
R2 = FieldSpec("real-quadratic", 2)
A04 = FlowElement.for_field(Q, [0.4])

# (M, N, h_max, admissible sets counted by brute-force subset enumeration)
FROZEN_Q_COUNTS = [(math.e, 12, 0.4, 296), (10.0, 14, 0.4, 111), (5.0, 10, 1.0, 189)]


@pytest.mark.parametrize("M, N, h, expected", FROZEN_Q_COUNTS)
def test_q_count_matches_frozen_oracle(M, N, h, expected):
    assert count_q_labels(M, N, FlowElement.for_field(Q, [h]))[0] == expected


def test_oracle_reproduces_frozen():
    M, N, h, expected = FROZEN_Q_COUNTS[0]
    assert brute_q_count(M, N, h) == expected


@given(logM=st.floats(0.1, 4.0), N=st.integers(1, 11), h=st.floats(0.2, 2.0))
def test_q_count_matches_subsets(logM, N, h):
    M = math.exp(logM)
    assert count_q_labels(M, N, FlowElement.for_field(Q, [h]))[0] == brute_q_count(M, N, h)


def test_q_count_examples():
    assert count_q_labels(50.0, 1, A04)[0] == 2
    count, bound = count_q_labels(math.exp(10), 40, FlowElement.for_field(Q, [1.0]))
    assert count <= bound
    with pytest.raises(EnumerationCapError):
        count_q_labels(50.0, 65, A04)


def test_label_admissibility_examples():
    lab = QLabel(10.0, 30, ((3, 2), (20, 1)), 6)
    assert lab.admissible and lab.V == (3, 4, 5, 20, 21) and lab.size == 5
    assert not QLabel(10.0, 30, ((3, 2), (8, 1)), 6).admissible
    assert QLabel(10.0, 30, (), 6).admissible


def test_refinement_counts():
    assert count_p_refinement(QLabel(10.0, 30, (), 6), 2) == (1, 1.0)
    count, cap = count_p_refinement(QLabel(10.0, 30, ((5, 4),), 6), 2)
    assert count == 36 and count <= cap
    with pytest.raises(ConfigurationError):
        count_p_refinement(QLabel(10.0, 30, ((3, 2), (8, 1)), 6), 1)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=5), st.integers(0, 3))
def test_refinement_under_am_gm_cap(lengths, places):
    starts, t = [], 1
    for ell in lengths:
        starts.append((t, ell))
        t += ell + 1 + 3
    q = QLabel(10.0, t, tuple(starts), 3)
    count, cap = count_p_refinement(q, places)
    assert count <= cap * (1 + 1e-12)


def test_relation_examples():
    a = FlowElement.for_field(R2, [1.0, 1.0])
    bad = RatioProfile(0, 9, (-1.0, 5.0), ("L", "C"), (0, 5))
    ok, slack = relation_admissible(bad, 9, a)
    assert not ok and slack == pytest.approx(10 - 20)
    good = RatioProfile(0, 9, (6.0, 6.0), ("C", "C"), (6, 6))
    ok, slack = relation_admissible(good, 9, a)
    assert ok and slack == pytest.approx(24 - 20)
    right = RatioProfile(0, 9, (20.0, 20.0), ("R", "R"), (10, 10))
    assert relation_admissible(right, 9, a)[0]


@given(ell=st.integers(0, 12), i1=st.integers(0, 13), i2=st.integers(0, 13),
       r1=st.floats(0.05, 1.0), r2=st.floats(0.05, 1.0))
def test_choices_admissible_is_best_case(ell, i1, i2, r1, r2):
    # the best profile inside the chosen intervals decides admissibility
    i1, i2 = min(i1, ell + 1), min(i2, ell + 1)
    a = FlowElement.for_field(R2, [r1, r2])
    _, best = choices_admissible((i1, i2), ell, a)
    for frac in (0.0, 0.3, 0.999):
        s = []
        for i, r in ((i1, r1), (i2, r2)):
            if i == 0:
                s.append(-1.0)
            elif i <= ell:
                s.append((i - 1 + frac) * r + 1e-9)
            else:
                s.append((ell + 1 + frac) * r + 1e-9)
        prof = make_profile(a, 0, ell, [(0.0, 2 * x) for x in s])
        assert relation_admissible(prof, ell, a)[1] <= best + 1e-9


def test_labels_from_itineraries(rng):
    a = FlowElement.for_field(Q, [0.5])
    M = 3.0
    seen = set()
    for _ in range(30):
        it = itinerary(a, random_point(Q, rng, 2.0), M, 14)
        q = q_label(it)
        assert q.admissible
        seen.add(q.hash)
        try:
            p = p_label(it)
        except LabelingError:
            continue
        assert len(p.choices) == len(q.intervals)
        for pr, (_, ell) in zip(it.profiles, q.intervals):
            if not pr.truncated:
                assert relation_admissible(pr, ell, a)[0]
    assert len(seen) <= count_q_labels(M, 14, a)[0]


def test_plabel_validates_choices():
    q = QLabel(10.0, 30, ((5, 2),), 6)
    assert PLabel(q, ((3,),)).hash != PLabel(q, ((2,),)).hash
    with pytest.raises(ConfigurationError):
        PLabel(q, ((4,),))
    with pytest.raises(ConfigurationError):
        PLabel(q, ())


def test_phi_constant_dominates_counts():
    C = fit_phi_constant(100.0, A04, range(16, 65, 8))
    rate = math.log(math.log(100.0)) / math.log(100.0)
    for N in range(16, 65, 8):
        assert math.log(count_q_labels(100.0, N, A04)[0]) <= C * rate * N + 1e-9
