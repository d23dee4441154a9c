"""Finitely supported probability measures on X with exact rational weights."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .module_space import DET_TOL, DomainError, SpacePoint
from .number_field import ConfigurationError, FieldSpec

__all__ = ["DiscreteMeasure", "unstable_box", "window_sample", "geodesic_point", "cusp_point"]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms on X stored as a matrix stack.

    Parameters
    ----------
    field : FieldSpec
    mats : ndarray, shape (k, places, 2, 2)
        Representatives of the atoms.
    weights : tuple of Fraction
        Non-negative weights, one per atom.
    groups : tuple of int, optional
        Component label per atom.  Entropy is affine in the measure, so
        estimators that need ergodic pieces treat each group separately.
    """

    field: FieldSpec
    mats: np.ndarray
    weights: tuple
    groups: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.mats, dtype=complex)
        if m.ndim != 4 or m.shape[1:] != (self.field.places, 2, 2):
            raise DomainError(f"expected shape (k, {self.field.places}, 2, 2), got {m.shape}")
        w = tuple(Fraction(x) for x in self.weights)
        if len(w) != m.shape[0]:
            raise ConfigurationError("one weight per atom required")
        if any(x < 0 for x in w):
            raise ConfigurationError("weights must be non-negative")
        if self.groups is not None and len(self.groups) != len(w):
            raise ConfigurationError("one group label per atom required")
        m.setflags(write=False)
        object.__setattr__(self, "mats", m)
        object.__setattr__(self, "weights", w)
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))

    @classmethod
    def uniform(cls, field: FieldSpec, mats, groups=None) -> DiscreteMeasure:
        mats = np.asarray(mats, dtype=complex)
        k = mats.shape[0]
        if k == 0:
            raise ConfigurationError("empty measure")
        return cls(field, mats, (Fraction(1, k),) * k, groups)

    @classmethod
    def from_points(cls, points, weights=None) -> DiscreteMeasure:
        points = list(points)
        if not points:
            raise ConfigurationError("empty measure")
        field = points[0].field
        mats = np.stack([p.mats for p in points])
        if weights is None:
            return cls.uniform(field, mats)
        return cls(field, mats, tuple(weights))

    @classmethod
    def mixture(cls, parts, coefficients) -> DiscreteMeasure:
        """Convex combination of measures; each part becomes its own group."""
        coefficients = [Fraction(c) for c in coefficients]
        if len(parts) != len(coefficients) or not parts:
            raise ConfigurationError("one coefficient per part required")
        mats, weights, groups = [], [], []
        for g, (part, c) in enumerate(zip(parts, coefficients)):
            total = part.total
            mats.append(part.mats)
            weights.extend(c * w / total for w in part.weights)
            groups.extend([g] * len(part.weights))
        return cls(parts[0].field, np.concatenate(mats), tuple(weights), tuple(groups))

    def __len__(self):
        return len(self.weights)

    @property
    def total(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    @property
    def atoms(self):
        """List of ``(SpacePoint, weight)`` pairs."""
        return [(SpacePoint(self.field, m, DET_TOL), w) for m, w in zip(self.mats, self.weights)]

    def normalized(self) -> DiscreteMeasure:
        t = self.total
        if t == 0:
            raise ConfigurationError("zero total mass")
        return DiscreteMeasure(self.field, self.mats, tuple(w / t for w in self.weights), self.groups)

    def float_weights(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def support(self) -> DiscreteMeasure:
        """Drop zero-weight atoms."""
        keep = [i for i, w in enumerate(self.weights) if w > 0]
        groups = None if self.groups is None else tuple(self.groups[i] for i in keep)
        return DiscreteMeasure(self.field, self.mats[keep],
                               tuple(self.weights[i] for i in keep), groups)

    def components(self):
        """``(mass, sub-measure)`` per group, sub-measures normalized."""
        if self.groups is None:
            return [(self.total, self)]
        out = []
        for g in sorted(set(self.groups)):
            idx = [i for i, x in enumerate(self.groups) if x == g]
            sub = DiscreteMeasure(self.field, self.mats[idx], tuple(self.weights[i] for i in idx))
            if sub.total > 0:
                out.append((sub.total, sub.normalized()))
        return out


# -- synthetic atom clouds -------------------------------------------------


def _coords(field: FieldSpec, draws):
    """Turn ``D`` real coordinates per sample into ``places`` complex parameters."""
    out = np.zeros((draws.shape[0], field.places), dtype=complex)
    k = 0
    for j in range(field.places):
        if j < field.r:
            out[:, j] = draws[:, k]
            k += 1
        else:
            out[:, j] = draws[:, k] + 1j * draws[:, k + 1]
            k += 2
    return out


def _real_extents(field: FieldSpec, extents):
    ext = np.broadcast_to(np.asarray(extents, dtype=float), (field.places,))
    return np.concatenate([[ext[j]] * (1 if j < field.r else 2) for j in range(field.places)])


def unstable_box(base: SpacePoint, extents, count: int, rng=None) -> np.ndarray:
    """Atoms ``base u^+(t)`` with ``t`` filling a box centred at ``0``.

    Each real coordinate of ``t_j`` ranges over ``[-extents_j / 2, extents_j / 2]``
    (a square at complex places).  With ``rng=None`` the atoms form a regular
    grid with ``round(count^(1/D))`` nodes per axis, otherwise ``count``
    uniform draws.
    """
    field = base.field
    ext = _real_extents(field, extents)
    D = len(ext)
    if rng is None:
        per_axis = max(1, int(round(count ** (1.0 / D))))
        axes = [(np.arange(per_axis) + 0.5) / per_axis - 0.5 for _ in range(D)]
        draws = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    else:
        draws = rng.random((count, D)) - 0.5
    t = _coords(field, draws * ext)
    h = np.tile(np.eye(2, dtype=complex), (len(t), field.places, 1, 1))
    h[:, :, 1, 0] = t
    return np.einsum("pij,kpjl->kpil", base.mats, h)


def window_sample(base: SpacePoint, count: int, rng, unstable=1.0, stable=0.1,
                  central=0.1) -> np.ndarray:
    """Uniform draws ``base u^-(s) a(c) u^+(t)`` from a compact window around ``base``.

    ``u^-`` is upper unipotent, ``a(c) = diag(e^{c/2}, e^{-c/2})``; the three
    arguments are the full side lengths in each direction.
    """
    field = base.field
    D = field.r + 2 * field.s
    t = _coords(field, (rng.random((count, D)) - 0.5) * _real_extents(field, unstable))
    s = _coords(field, (rng.random((count, D)) - 0.5) * _real_extents(field, stable))
    c = (rng.random((count, field.places)) - 0.5) * central
    eye = np.tile(np.eye(2, dtype=complex), (count, field.places, 1, 1))
    up, um, d = eye.copy(), eye.copy(), np.zeros_like(eye)
    up[:, :, 1, 0] = t
    um[:, :, 0, 1] = s
    d[:, :, 0, 0] = np.exp(c / 2)
    d[:, :, 1, 1] = np.exp(-c / 2)
    h = um @ d @ up
    return np.einsum("pij,kpjl->kpil", base.mats, h)


def geodesic_point(field: FieldSpec) -> SpacePoint:
    """Point on the closed geodesic of ``[[2, 1], [1, 1]]``, embedded at every place.

    Over ``Q`` its orbit under any diagonal flow stays at height below 1.06,
    which makes it a convenient compact base for unstable boxes.
    """
    lam = (3 + 5 ** 0.5) / 2
    m = np.array([[1.0, -1.0], [lam - 2, 2 - 1 / lam]])
    m = m / np.sqrt(np.linalg.det(m))
    return SpacePoint(field, np.repeat(m[None], field.places, axis=0).astype(complex))


def cusp_point(field: FieldSpec, H: float) -> SpacePoint:
    """Point of height ``H`` whose short vector ``(0, H^{-1/D})`` per place shrinks under the flow."""
    c = H ** (1.0 / (field.r + 2 * field.s))
    m = np.array([[0.0, 1 / c], [-c, 0.0]], dtype=complex)
    return SpacePoint(field, np.repeat(m[None], field.places, axis=0))
