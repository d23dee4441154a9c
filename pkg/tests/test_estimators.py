import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from hilbert_escape.estimators import (
    CoverEntropyEstimator,
    HeightTransformer,
    ItineraryTransformer,
    UnstableDimensionEstimator,
    points_to_array,
)
from hilbert_escape.measures import geodesic_point, unstable_box
from hilbert_escape.module_space import height, random_point
from hilbert_escape.number_field import FieldSpec

Q = FieldSpec("rational")
Qi = FieldSpec("imaginary-quadratic", 1)
R5 = FieldSpec("real-quadratic", 5)


def test_array_layout_roundtrip(rng):
    from hilbert_escape._validation import array_to_mats
    pts = [random_point(Qi, rng) for _ in range(3)]
    X = points_to_array(pts)
    assert X.shape == (3, 8) and X.dtype == float
    assert np.array_equal(array_to_mats(X, Qi), np.stack([p.mats for p in pts]))


def test_height_transformer(rng):
    pts = [random_point(R5, rng, 2.0) for _ in range(5)]
    X = points_to_array(pts)
    est = HeightTransformer(field="Q(sqrt5)")
    with pytest.raises(NotFittedError):
        est.transform(X)
    out = est.fit_transform(X)
    assert out.shape == (5, 1)
    assert out[:, 0] == pytest.approx([height(p).height for p in pts])
    assert list(est.get_feature_names_out()) == ["height"]
    assert clone(est).get_params() == est.get_params()


def test_itinerary_transformer_in_pipeline(rng):
    X = points_to_array([random_point(Q, rng, 2.0) for _ in range(4)])
    pipe = make_pipeline(ItineraryTransformer(field="Q", rates=(0.5,), M=3.0, N=40))
    out = pipe.fit_transform(X)
    assert out.shape == (4, 4)
    assert np.all((out[:, 3] >= 0) & (out[:, 3] <= 1))
    assert np.all(out[:, 2] <= out[:, 0])


def test_bad_input_rejected():
    with pytest.raises(ValueError):
        HeightTransformer(field="Q").fit(np.full((2, 8), np.nan))
    with pytest.raises(ValueError):
        HeightTransformer(field="Q").fit(np.zeros((2, 7)))


def test_cover_and_dimension_estimators(rng):
    x = geodesic_point(Q)
    X = points_to_array(unstable_box(x, [1.0], 400))
    ent = CoverEntropyEstimator(field="Q", rates=(0.4,), N_min=6, N_max=10).fit(X)
    assert 0 < ent.slope_min_ <= ent.slope_ <= ent.slope_max_
    assert len(ent.log_counts_) == 5
    dim = UnstableDimensionEstimator(field="Q").fit(X)
    assert dim.d_hat_ == pytest.approx(1.0, abs=0.2)
    assert dim.residuals_.shape == (4,)
