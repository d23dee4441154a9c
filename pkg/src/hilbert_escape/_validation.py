"""Conversions between matrix stacks and the flat real arrays estimators consume."""

import numpy as np
from sklearn.utils.validation import check_array

from .number_field import FieldSpec, parse_field


def as_field(field):
    return field if isinstance(field, FieldSpec) else parse_field(str(field))


def mats_to_array(mats) -> np.ndarray:
    """``(k, places, 2, 2)`` complex -> ``(k, 8 places)`` real, real parts first per entry."""
    m = np.asarray(mats, dtype=complex)
    flat = m.reshape(m.shape[0], -1)
    return np.stack([flat.real, flat.imag], axis=2).reshape(m.shape[0], -1)


def array_to_mats(X, field: FieldSpec) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_all_finite=True)
    width = 8 * field.places
    if X.shape[1] != width:
        raise ValueError(f"{field} points need {width} features, got {X.shape[1]}")
    pairs = X.reshape(X.shape[0], -1, 2)
    return (pairs[..., 0] + 1j * pairs[..., 1]).reshape(X.shape[0], field.places, 2, 2)
