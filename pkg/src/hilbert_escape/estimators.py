"""scikit-learn style wrappers around heights, itineraries and cover-growth fits.

Points enter as rows of a real array: for every place the four matrix
entries, each split into real and imaginary part (see
:func:`points_to_array`).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import array_to_mats, as_field, mats_to_array
from .covering import entropy_estimate
from .escape import unstable_dimension_estimate
from .flow import FlowElement, itinerary
from .measures import DiscreteMeasure
from .module_space import DET_TOL, HEIGHT_CAP, SpacePoint, height
from .number_field import DEFAULT_ELEMENT_CAP

__all__ = [
    "points_to_array",
    "HeightTransformer",
    "ItineraryTransformer",
    "CoverEntropyEstimator",
    "UnstableDimensionEstimator",
]


def points_to_array(points) -> np.ndarray:
    """Stack points (or a matrix stack) into the flat real layout."""
    if isinstance(points, np.ndarray):
        return mats_to_array(points)
    return mats_to_array(np.stack([p.mats for p in points]))


class _PointInput(BaseEstimator):
    def _points(self, X, reset):
        field = as_field(self.field)
        mats = array_to_mats(X, field)
        if reset:
            self.field_ = field
            self.n_features_in_ = mats.shape[1] * 8
        return field, mats


class HeightTransformer(TransformerMixin, _PointInput):
    """Map points to their heights (one output column).

    Parameters
    ----------
    field : str
        Field tag such as ``"Q(sqrt5)"``.
    cap : int
        Enumeration cap handed to :func:`~hilbert_escape.module_space.height`.
    height_cap : float
        Heights above this are flagged by the certificate; the value is
        returned as computed.
    """

    def __init__(self, field="Q", cap=DEFAULT_ELEMENT_CAP, height_cap=HEIGHT_CAP):
        self.field = field
        self.cap = cap
        self.height_cap = height_cap

    def fit(self, X, y=None):
        self._points(X, reset=True)
        return self

    def transform(self, X):
        check_is_fitted(self, "field_")
        field, mats = self._points(X, reset=False)
        out = [height(SpacePoint(field, m, DET_TOL), self.cap, self.height_cap).height
               for m in mats]
        return np.asarray(out)[:, None]

    def get_feature_names_out(self, input_features=None):
        return np.array(["height"], dtype=object)


class ItineraryTransformer(TransformerMixin, _PointInput):
    """Cusp-itinerary summary per point.

    Columns are ``|V|``, the number of excursions, the longest excursion
    length and the fraction of the window spent at height at least ``M``.
    """

    def __init__(self, field="Q", rates=(1.0,), M=20.0, N=50):
        self.field = field
        self.rates = rates
        self.M = M
        self.N = N

    def fit(self, X, y=None):
        field, _ = self._points(X, reset=True)
        self.flow_ = FlowElement.for_field(field, self.rates)
        return self

    def transform(self, X):
        check_is_fitted(self, "flow_")
        field, mats = self._points(X, reset=False)
        rows = []
        for m in mats:
            it = itinerary(self.flow_, SpacePoint(field, m, DET_TOL), self.M, self.N)
            longest = max((ell + 1 for _, ell in it.intervals), default=0)
            rows.append((len(it.V), len(it.intervals), longest, len(it.V) / self.N))
        return np.asarray(rows, dtype=float)

    def get_feature_names_out(self, input_features=None):
        return np.array(["cusp_steps", "excursions", "longest", "cusp_fraction"], dtype=object)


class CoverEntropyEstimator(_PointInput):
    """Cover-growth slope of a sample, fitted on ``N`` in ``[N_min, N_max]``.

    Attributes
    ----------
    slope_, slope_min_, slope_max_ : float
    log_counts_ : ndarray
    """

    def __init__(self, field="Q", rates=(0.4,), eta=0.25, N_min=6, N_max=14):
        self.field = field
        self.rates = rates
        self.eta = eta
        self.N_min = N_min
        self.N_max = N_max

    def fit(self, X, y=None):
        field, mats = self._points(X, reset=True)
        a = FlowElement.for_field(field, self.rates)
        est = entropy_estimate(mats, a, self.eta, range(self.N_min, self.N_max + 1))
        self.slope_ = est.slope
        self.slope_min_ = est.slope_min
        self.slope_max_ = est.slope_max
        self.log_counts_ = np.asarray(est.log_counts)
        return self


class UnstableDimensionEstimator(_PointInput):
    """Local dimension of a uniform sample along the unstable horospheres.

    Attributes
    ----------
    d_hat_ : float
    residuals_ : ndarray
    """

    def __init__(self, field="Q", scales=(0.01, 0.02, 0.04, 0.08), eta=0.25, max_centers=200):
        self.field = field
        self.scales = scales
        self.eta = eta
        self.max_centers = max_centers

    def fit(self, X, y=None):
        field, mats = self._points(X, reset=True)
        est = unstable_dimension_estimate(DiscreteMeasure.uniform(field, mats), self.scales,
                                          self.eta, self.max_centers)
        self.d_hat_ = est.d_hat
        self.residuals_ = np.asarray(est.residuals)
        return self
