"""Points of the Hilbert modular space as rank-2 O-module lattices.

A point is stored as one unimodular 2x2 matrix per archimedean place; the
rows are the two generators ``v, w`` of the module, so a module vector with
coefficients ``(lam1, lam2)`` has place components
``(sigma_j(lam1), sigma_j(lam2)) @ mats[j]``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field as dc_field

import numpy as np

from .lattice import box_coefficients, lll
from .number_field import (
    DEFAULT_ELEMENT_CAP,
    ONE,
    ZERO,
    FieldSpec,
    RingElement,
    parse_field,
)

__all__ = [
    "DomainError",
    "SpacePoint",
    "ModuleVector",
    "HeightCertificate",
    "identity_point",
    "make_vector",
    "is_primitive",
    "short_vectors",
    "candidate_vectors",
    "enumerate_classes",
    "log_product_norm",
    "height",
    "reduce_point",
    "act_left",
    "random_sl2o",
    "random_point",
    "serialize_point",
    "parse_point",
    "u_plus",
    "translate_cloud",
]

DET_TOL = 1e-9
HEIGHT_CAP = 1e6


class DomainError(ValueError):
    """Raised when an operation's mathematical precondition fails."""


@dataclass(frozen=True, eq=False)
class SpacePoint:
    """A point ``Gamma g`` of X: per-place unimodular matrices.

    ``mats`` has shape ``(r + s, 2, 2)`` and complex dtype; real places must
    have real entries.
    """

    field: FieldSpec
    mats: np.ndarray
    det_tol: float = DET_TOL

    def __post_init__(self):
        m = np.array(self.mats, dtype=complex)
        if m.shape != (self.field.places, 2, 2):
            raise DomainError(
                f"expected shape {(self.field.places, 2, 2)}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DomainError("non-finite matrix entries")
        if self.field.r and np.any(np.abs(m[: self.field.r].imag) > 0):
            raise DomainError("real places need real matrices")
        det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        if np.any(np.abs(det - 1) > self.det_tol):
            raise DomainError(f"determinants {det} not within {self.det_tol} of 1")
        m.setflags(write=False)
        object.__setattr__(self, "mats", m)

    def __repr__(self):
        return f"SpacePoint({self.field}, {self.mats.tolist()!r})"


def _renormalized(field, mats, det_tol=DET_TOL):
    det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
    root = np.sqrt(det)
    if field.r:
        # real places keep real entries; det > 0 there by construction
        root[: field.r] = np.sqrt(np.abs(det[: field.r].real))
    return SpacePoint(field, mats / root[:, None, None], det_tol)


def identity_point(field: FieldSpec) -> SpacePoint:
    return SpacePoint(field, np.tile(np.eye(2, dtype=complex), (field.places, 1, 1)))


@dataclass(frozen=True, eq=False)
class ModuleVector:
    coeffs: tuple
    components: np.ndarray  # (places, 2) complex
    place_norms: np.ndarray
    product_norm: float

    @classmethod
    def from_components(cls, field, coeffs, components):
        comps = np.asarray(components, dtype=complex)
        pn = np.sqrt(np.sum(np.abs(comps) ** 2, axis=1))
        norm = float(np.prod(pn ** np.asarray(field.deltas)))
        return cls(coeffs, comps, pn, norm)


def _sigma_pair(field, lam1, lam2):
    return np.stack([field.embed_float(lam1), field.embed_float(lam2)], axis=1)


def make_vector(p: SpacePoint, lam1: RingElement, lam2: RingElement) -> ModuleVector:
    if lam1.is_zero() and lam2.is_zero():
        raise DomainError("zero coefficient pair")
    sig = _sigma_pair(p.field, lam1, lam2)
    comps = np.einsum("pi,pij->pj", sig, p.mats)
    return ModuleVector.from_components(p.field, (lam1, lam2), comps)


def _ideal_index(field: FieldSpec, gens) -> int:
    """Index in O of the ideal generated by ``gens`` (its absolute norm)."""
    if field.kind == "rational":
        return abs(math.gcd(*(g.x for g in gens)))
    omega = RingElement(0, 1)
    cols = []
    for g in gens:
        cols.append(g.coords)
        cols.append(field.mul(g, omega).coords)
    # Hermite-style gcd of 2x2 minors gives the lattice index
    idx = 0
    for i in range(len(cols)):
        for j in range(i + 1, len(cols)):
            a, b = cols[i], cols[j]
            idx = math.gcd(idx, a[0] * b[1] - a[1] * b[0])
    return abs(idx)


def is_primitive(p, lam1: RingElement, lam2: RingElement) -> bool:
    """True iff ``(lam1, lam2)`` generate the unit ideal.

    ``p`` may be a :class:`SpacePoint` or a :class:`FieldSpec`; primitivity
    only depends on the coefficients because the module is free.
    """
    field = p.field if isinstance(p, SpacePoint) else p
    if lam1.is_zero() and lam2.is_zero():
        raise DomainError("zero coefficient pair")
    return _ideal_index(field, [lam1, lam2]) == 1


# -- Z-lattice view ------------------------------------------------------------


def _real_coords(field, comps):
    """Flatten per-place component pairs into real coordinates.

    ``comps`` has shape ``(..., places, 2)``.
    """
    parts = []
    for j in range(field.places):
        c = comps[..., j, :]
        if j < field.r:
            parts.append(c.real)
        else:
            parts.append(np.stack([c[..., 0].real, c[..., 0].imag,
                                   c[..., 1].real, c[..., 1].imag], axis=-1))
    return np.concatenate(parts, axis=-1)


def _z_basis(p: SpacePoint):
    """Real Z-basis ``(v, omega v, w, omega w)`` of the module."""
    field = p.field
    basis_elems = [ONE] if field.kind == "rational" else [ONE, RingElement(0, 1)]
    rows = []
    for row in range(2):
        for e in basis_elems:
            sig = field.embed_float(e)
            comps = sig[:, None] * p.mats[:, row, :]
            rows.append(_real_coords(field, comps))
    return np.array(rows)


def _coeffs_from_z(field, z):
    if field.kind == "rational":
        return RingElement(int(z[0]), 0), RingElement(int(z[1]), 0)
    return RingElement(int(z[0]), int(z[1])), RingElement(int(z[2]), int(z[3]))


def _place_bound(field: FieldSpec, threshold: float) -> float:
    """Per-place norm bound for balanced representatives of norm <= threshold.

    Balancing leaves ``|log n_1 - log n_2| <= regulator``, so each place norm
    is at most ``threshold^(1/degree) * e^(regulator/2)``.
    """
    return threshold ** (1.0 / field.degree) * math.exp(field.regulator / 2)


def _euclid_bound(field: FieldSpec, threshold: float) -> float:
    """Bound on the full Euclidean length of a balanced representative."""
    if field.kind == "rational":
        return threshold
    if field.kind == "imaginary-quadratic":
        return math.sqrt(threshold)
    return math.sqrt(2 * threshold * math.cosh(field.regulator))


def _balance_shift(field, place_norms):
    """Power ``k`` such that multiplying by ``u**-k`` balances the two places."""
    if field.unit_rank == 0:
        return 0
    reg = field.regulator
    ratio = math.log(place_norms[0]) - math.log(place_norms[1])
    return int(math.floor(ratio / (2 * reg) + 0.5))


def _balanced(field, lam1, lam2, place_norms):
    k = _balance_shift(field, place_norms)
    if k:
        uk = field.power(field.unit, -k)
        lam1, lam2 = field.mul(uk, lam1), field.mul(uk, lam2)
    return lam1, lam2


def same_unit_class(field, a, b) -> bool:
    """Primitive pairs are unit multiples of each other iff they are O-parallel."""
    return field.mul(a[0], b[1]) == field.mul(a[1], b[0])


def _log_squares(field, X):
    """Per-place ``(log|v'|^2, log|v''|^2)`` from real coordinates, shape ``(k, places, 2)``."""
    out = np.empty((X.shape[0], field.places, 2))
    col = 0
    with np.errstate(divide="ignore"):
        for j in range(field.places):
            if j < field.r:
                out[:, j, 0] = np.log(X[:, col] ** 2)
                out[:, j, 1] = np.log(X[:, col + 1] ** 2)
                col += 2
            else:
                out[:, j, 0] = np.log(X[:, col] ** 2 + X[:, col + 1] ** 2)
                out[:, j, 1] = np.log(X[:, col + 2] ** 2 + X[:, col + 3] ** 2)
                col += 4
    return out


def log_product_norm(deltas, ls):
    """``log ||v||`` from per-place log-squares (last two axes ``(places, 2)``)."""
    w = 0.5 * np.asarray(deltas, dtype=float)
    return np.sum(w * np.logaddexp(ls[..., 0], ls[..., 1]), axis=-1)


def candidate_vectors(p: SpacePoint, threshold: float, cap: int = DEFAULT_ELEMENT_CAP):
    """All nonzero module vectors in the certified box for ``threshold``.

    Returns ``(z, ls)``: integer Z-coordinates (rows of ``(x1, y1, x2, y2)``,
    or ``(x1, x2)`` over Q) relative to the generators of ``p``, and the
    per-place log-squares of the components.  Only vectors with product norm
    at most ``threshold`` are kept.  Every unit class of norm at most
    ``threshold`` has at least one representative in the result.
    """
    field = p.field
    Bred, U = lll(_z_basis(p))
    C = box_coefficients(Bred, _euclid_bound(field, threshold) * (1 + 1e-9), cap)
    C = C[np.any(C != 0, axis=1)]
    X = C @ Bred
    ls = _log_squares(field, X)
    keep = log_product_norm(field.deltas, ls) <= math.log(threshold) + 1e-12
    Uf = np.array(U.tolist(), dtype=float)
    z = np.rint(C[keep] @ Uf).astype(np.int64)
    return z, ls[keep]


def _class_key(field, lam1, lam2):
    """Projective key: primitive pairs share a unit class iff their ratios agree."""
    if lam2.is_zero():
        return None
    n = field.norm(lam2)
    num = field.mul(lam1, field.conj(lam2))
    return (Fraction(num.x, n), Fraction(num.y, n))


def enumerate_classes(p: SpacePoint, threshold: float, cap: int = DEFAULT_ELEMENT_CAP):
    """Unit classes of primitive module vectors with product norm <= ``threshold``.

    One balanced representative per class, sorted by product norm.
    """
    field = p.field
    z, ls = candidate_vectors(p, threshold, cap)
    order = np.argsort(log_product_norm(field.deltas, ls), kind="stable")
    kept = {}
    for i in order:
        lam1, lam2 = _coeffs_from_z(field, z[i])
        key = _class_key(field, lam1, lam2)
        if key in kept or not is_primitive(field, lam1, lam2):
            continue
        vec = make_vector(p, lam1, lam2)
        kept[key] = make_vector(p, *_balanced(field, lam1, lam2, vec.place_norms))
    return sorted(kept.values(), key=lambda v: v.product_norm)


def short_vectors(p: SpacePoint, threshold: float, cap: int = DEFAULT_ELEMENT_CAP):
    """Primitive vectors of product norm <= ``threshold`` (< 1), one per unit class."""
    if threshold > 1:
        raise DomainError("threshold must be <= 1 (uniqueness only holds below 1)")
    if threshold <= 0:
        raise DomainError("threshold must be positive")
    return enumerate_classes(p, threshold, cap)


@dataclass
class HeightCertificate:
    height: float
    witness: ModuleVector | None
    search_radius: tuple
    balanced: bool = True
    unit_class_count_below_1: int = 0
    capped: bool = False
    partial: bool = False
    minimum_norm: float = dc_field(default=math.inf)


def height(p: SpacePoint, cap: int = DEFAULT_ELEMENT_CAP, height_cap: float = HEIGHT_CAP):
    """Certified height ``max 1/||v||``, clamped to be at least 1.

    The witness is reported when some primitive vector has norm at most 1;
    its coefficients refer to the generators of ``p``.  Heights at or above
    ``height_cap`` are flagged as ``capped`` but still reported exactly.
    """
    field = p.field
    gamma, q = reduce_point(p)
    classes = enumerate_classes(q, 1.0, cap)
    radius = (_place_bound(field, 1.0),) * field.places
    below = sum(1 for v in classes if v.product_norm < 1)
    if not classes:
        return HeightCertificate(1.0, None, radius, True, 0)
    lam = _apply_row(field, classes[0].coeffs, gamma)
    witness = make_vector(p, *lam)
    mn = witness.product_norm
    ht = max(1.0, 1.0 / mn)
    return HeightCertificate(ht, witness, radius, True, below, ht >= height_cap, False, mn)


# -- Gamma action and reduction -----------------------------------------------


def _embed_matrix(field, gamma):
    """``Delta(gamma)`` as a ``(places, 2, 2)`` complex array."""
    out = np.empty((field.places, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            out[:, i, j] = field.embed_float(gamma[i][j])
    return out


def _apply_row(field, coeffs, gamma):
    """Row vector ``coeffs @ gamma`` over O."""
    a, b = coeffs
    return (field.mul(a, gamma[0][0]) + field.mul(b, gamma[1][0]),
            field.mul(a, gamma[0][1]) + field.mul(b, gamma[1][1]))


def _matmul_o(field, g, h):
    return [[field.mul(g[i][0], h[0][j]) + field.mul(g[i][1], h[1][j]) for j in range(2)]
            for i in range(2)]


def act_left(p: SpacePoint, gamma) -> SpacePoint:
    """The same point ``Gamma g`` written with generators ``Delta(gamma) g``."""
    field = p.field
    det = field.mul(gamma[0][0], gamma[1][1]) - field.mul(gamma[0][1], gamma[1][0])
    if det != ONE:
        raise DomainError("gamma must have determinant 1")
    mats = np.einsum("pij,pjk->pik", _embed_matrix(field, gamma), p.mats)
    return _renormalized(field, mats, p.det_tol)


def _nearest_ring_element(field, targets):
    """Ring element whose embedding is close to ``targets`` (complex per place)."""
    if field.kind == "rational":
        return RingElement(int(round(targets[0].real)), 0)
    A = field.basis_embedding_matrix()
    rhs = []
    for j, t in enumerate(targets):
        rhs.extend([t.real] if j < field.r else [t.real, t.imag])
    xy = np.linalg.solve(A, np.asarray(rhs))
    return RingElement(int(round(xy[0])), int(round(xy[1])))


_IDENTITY = ((ONE, ZERO), (ZERO, ONE))


def _reduce_once(p: SpacePoint):
    field = p.field
    _, U = lll(_z_basis(p))
    lam1, lam2 = _coeffs_from_z(field, [int(t) for t in U[0]])
    g, _, _ = field.xgcd(lam1, lam2)
    lam1 = field.exact_div(lam1, g)
    lam2 = field.exact_div(lam2, g)
    unit, s, t = field.xgcd(lam1, lam2)
    inv = field.inverse_unit(unit)
    s, t = field.mul(s, inv), field.mul(t, inv)
    # s*lam1 + t*lam2 = 1, so [[lam1, lam2], [-t, s]] has determinant 1
    gamma = [[lam1, lam2], [-t, s]]
    q = act_left(p, gamma)
    if field.unit_rank:
        k = _balance_shift(field, np.linalg.norm(q.mats[:, 0, :], axis=1))
        if k:
            uk, uik = field.power(field.unit, -k), field.power(field.unit, k)
            bal = [[uk, ZERO], [ZERO, uik]]
            gamma = _matmul_o(field, bal, gamma)
            q = act_left(q, bal)
    v, w = q.mats[:, 0, :], q.mats[:, 1, :]
    proj = np.sum(w * v.conj(), axis=1) / np.sum(np.abs(v) ** 2, axis=1)
    kappa = _nearest_ring_element(field, proj)
    if not kappa.is_zero():
        shear = [[ONE, ZERO], [-kappa, ONE]]
        gamma = _matmul_o(field, shear, gamma)
        q = act_left(q, shear)
    return gamma, q


def reduce_point(p: SpacePoint, max_rounds: int = 12):
    """Replace the generators by a well-conditioned basis of the same module.

    Returns ``(gamma, q)`` with ``q`` the point ``p`` written with generators
    ``Delta(gamma) g``.  The first row of ``q`` is a primitive vector from the
    LLL-shortest vector of the underlying Z-lattice; the second row is
    size-reduced against it.  Rounds repeat until the basis is stable, which
    matters for badly conditioned input.
    """
    field = p.field
    gamma = [list(r) for r in _IDENTITY]
    q = p
    for _ in range(max_rounds):
        step, q = _reduce_once(q)
        gamma = _matmul_o(field, step, gamma)
        if tuple(map(tuple, step)) == _IDENTITY:
            break
    return gamma, q


# -- sampling and serialization --------------------------------------------


def random_sl2o(field: FieldSpec, rng, size=10, steps=4):
    """Random element of SL2(O) as a product of elementary matrices.

    Off-diagonal entries of each factor have coordinates in ``[-size, size]``.
    """
    g = [[ONE, ZERO], [ZERO, ONE]]
    for i in range(steps):
        x = int(rng.integers(-size, size + 1))
        y = int(rng.integers(-size, size + 1)) if field.kind != "rational" else 0
        e = RingElement(x, y)
        el = [[ONE, e], [ZERO, ONE]] if i % 2 == 0 else [[ONE, ZERO], [e, ONE]]
        g = _matmul_o(field, el, g)
    return g


def random_point(field: FieldSpec, rng, log_scale=1.0) -> SpacePoint:
    """A random point ``n(x) a(t) k`` per place, with ``t`` uniform in +-log_scale."""
    mats = np.empty((field.places, 2, 2), dtype=complex)
    for j in range(field.places):
        t = rng.uniform(-log_scale, log_scale)
        x = rng.uniform(-0.5, 0.5)
        diag = np.diag([np.exp(t / 2), np.exp(-t / 2)]).astype(complex)
        if j < field.r:
            phi = rng.uniform(0, 2 * np.pi)
            k = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]], dtype=complex)
            n = np.array([[1, 0], [x, 1]], dtype=complex)
        else:
            x = x + 1j * rng.uniform(-0.5, 0.5)
            alpha, beta = rng.normal(size=2) + 1j * rng.normal(size=2)
            nrm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
            alpha, beta = alpha / nrm, beta / nrm
            k = np.array([[alpha, beta], [-np.conj(beta), np.conj(alpha)]])
            n = np.array([[1, 0], [x, 1]], dtype=complex)
        mats[j] = n @ diag @ k
    return _renormalized(field, mats)


def serialize_point(p: SpacePoint) -> str:
    """``field;entries`` with row-major per-place entries at 17 significant digits."""
    parts = [str(p.field)]
    for j in range(p.field.places):
        for z in p.mats[j].ravel():
            if j < p.field.r:
                parts.append(f"{z.real:.17g}")
            else:
                parts.append(f"{z.real:.17g}{z.imag:+.17g}j")
    return ";".join(parts)


def parse_point(text: str) -> SpacePoint:
    items = text.strip().split(";")
    field = parse_field(items[0])
    vals = [complex(v) for v in items[1:]]
    if len(vals) != 4 * field.places:
        raise DomainError(f"expected {4 * field.places} entries, got {len(vals)}")
    mats = np.array(vals, dtype=complex).reshape(field.places, 2, 2)
    return SpacePoint(field, mats)


# -- right translates ------------------------------------------------------


def u_plus(field: FieldSpec, t) -> np.ndarray:
    """Per-place lower unipotent matrices ``[[1, 0], [t_j, 1]]`` (unstable direction)."""
    t = np.asarray(t, dtype=complex).reshape(field.places)
    out = np.tile(np.eye(2, dtype=complex), (field.places, 1, 1))
    out[:, 1, 0] = t
    return out


def translate_cloud(p: SpacePoint, h) -> np.ndarray:
    """Matrices of ``p h`` for a stack of per-place elements ``h`` of shape ``(k, places, 2, 2)``."""
    return np.einsum("pij,kpjl->kpil", p.mats, np.asarray(h, dtype=complex))
