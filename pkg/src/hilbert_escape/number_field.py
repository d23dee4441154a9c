"""Exact arithmetic in the ring of integers of Q, real and imaginary quadratic fields.

Elements are stored in integral-basis coordinates ``x + y*omega`` with
``omega = sqrt(D)`` for ``D = 2, 3 (mod 4)`` and ``omega = (1 + sqrt(D)) / 2``
for ``D = 1 (mod 4)``, where ``D`` is ``d`` for real fields and ``-d`` for
imaginary ones.  Only class-number-one fields are supported, so every ideal
is principal and every module over the ring is free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import mpmath
import numpy as np

__all__ = [
    "ConfigurationError",
    "EnumerationCapError",
    "RingElement",
    "FieldSpec",
    "parse_field",
    "embed",
    "field_norm",
    "fundamental_unit",
    "enumerate_box",
]

REAL_QUADRATIC_D = (2, 3, 5, 13)
IMAGINARY_QUADRATIC_D = (1, 2, 3, 7, 11)
DEFAULT_PRECISION = 106
DEFAULT_ELEMENT_CAP = 2_000_000


class ConfigurationError(ValueError):
    """Raised for unsupported fields or malformed field tags."""


class EnumerationCapError(RuntimeError):
    """Raised when a lattice enumeration would exceed its element cap."""

    def __init__(self, needed, cap):
        super().__init__(f"enumeration needs {needed} candidates, cap is {cap}")
        self.needed = needed
        self.cap = cap


@dataclass(frozen=True, order=True)
class RingElement:
    """``x + y*omega`` with exact integer coordinates."""

    x: int
    y: int = 0

    def __add__(self, other):
        return RingElement(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return RingElement(self.x - other.x, self.y - other.y)

    def __neg__(self):
        return RingElement(-self.x, -self.y)

    def scale(self, k: int) -> RingElement:
        return RingElement(k * self.x, k * self.y)

    def is_zero(self) -> bool:
        return self.x == 0 and self.y == 0

    @property
    def coords(self):
        return (self.x, self.y)


ZERO = RingElement(0, 0)
ONE = RingElement(1, 0)


@dataclass(frozen=True)
class FieldSpec:
    """A supported number field.

    Parameters
    ----------
    kind : {"rational", "real-quadratic", "imaginary-quadratic"}
    d : int
        Positive square-free integer; ignored (forced to 1) for ``rational``.
    """

    kind: str
    d: int = 1

    def __post_init__(self):
        if self.kind == "rational":
            object.__setattr__(self, "d", 1)
        elif self.kind == "real-quadratic":
            if self.d not in REAL_QUADRATIC_D:
                raise ConfigurationError(
                    f"real quadratic d={self.d} not in allow-list {REAL_QUADRATIC_D}")
        elif self.kind == "imaginary-quadratic":
            if self.d not in IMAGINARY_QUADRATIC_D:
                raise ConfigurationError(
                    f"imaginary quadratic d={self.d} not in allow-list {IMAGINARY_QUADRATIC_D}")
        else:
            raise ConfigurationError(f"unsupported field kind {self.kind!r}")

    # -- structure ---------------------------------------------------------

    @property
    def r(self) -> int:
        return {"rational": 1, "real-quadratic": 2, "imaginary-quadratic": 0}[self.kind]

    @property
    def s(self) -> int:
        return 1 if self.kind == "imaginary-quadratic" else 0

    @property
    def places(self) -> int:
        return self.r + self.s

    @property
    def degree(self) -> int:
        return self.r + 2 * self.s

    @property
    def deltas(self):
        """Place weights: 1 for real places, 2 for complex ones."""
        return (1,) * self.r + (2,) * self.s

    @property
    def disc_root(self) -> int:
        """Signed radicand ``D``."""
        return -self.d if self.kind == "imaginary-quadratic" else self.d

    @property
    def omega_relation(self):
        """``(c0, c1)`` with ``omega**2 = c0 + c1*omega``."""
        if self.kind == "rational":
            return (0, 0)
        D = self.disc_root
        if D % 4 == 1:
            return ((D - 1) // 4, 1)
        return (D, 0)

    @property
    def unit_rank(self) -> int:
        return 1 if self.kind == "real-quadratic" else 0

    def __str__(self):
        if self.kind == "rational":
            return "Q"
        return f"Q(sqrt{self.disc_root})"

    # -- arithmetic --------------------------------------------------------

    def element(self, x: int, y: int = 0) -> RingElement:
        if self.kind == "rational" and y != 0:
            raise ValueError("rational integers have no omega coordinate")
        return RingElement(int(x), int(y))

    def mul(self, a: RingElement, b: RingElement) -> RingElement:
        c0, c1 = self.omega_relation
        yy = a.y * b.y
        return RingElement(a.x * b.x + c0 * yy, a.x * b.y + a.y * b.x + c1 * yy)

    def power(self, a: RingElement, k: int) -> RingElement:
        if k < 0:
            return self.power(self.inverse_unit(a), -k)
        out = ONE
        base = a
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def conj(self, a: RingElement) -> RingElement:
        """Galois conjugate (complex conjugate for imaginary fields)."""
        c1 = self.omega_relation[1]
        return RingElement(a.x + c1 * a.y, -a.y)

    def norm(self, a: RingElement) -> int:
        c0, c1 = self.omega_relation
        return a.x * a.x + c1 * a.x * a.y - c0 * a.y * a.y

    def exact_div(self, a: RingElement, b: RingElement):
        """Return ``a / b`` if it lies in the ring, else ``None``."""
        n = self.norm(b)
        if n == 0:
            raise ZeroDivisionError("division by zero ring element")
        num = self.mul(a, self.conj(b))
        if num.x % n or num.y % n:
            return None
        return RingElement(num.x // n, num.y // n)

    def inverse_unit(self, u: RingElement) -> RingElement:
        n = self.norm(u)
        if abs(n) != 1:
            raise ValueError(f"{u} is not a unit (norm {n})")
        c = self.conj(u)
        return c if n == 1 else -c

    def divmod(self, a: RingElement, b: RingElement):
        """Euclidean division ``a = q*b + rem`` with ``|N(rem)| < |N(b)|``.

        Every allow-listed field is norm-Euclidean; the quotient is the best
        of the nine lattice points around the coordinate-rounded ``a/b``.
        """
        n = self.norm(b)
        if n == 0:
            raise ZeroDivisionError("division by zero ring element")
        num = self.mul(a, self.conj(b))
        qx0 = _round_div(num.x, n)
        qy0 = _round_div(num.y, n) if self.kind != "rational" else 0
        best = None
        if self.kind == "rational":
            offsets = ((0, 0),)
        else:
            offsets = product((0, -1, 1), repeat=2)
        for dx, dy in offsets:
            q = RingElement(qx0 + dx, qy0 + dy)
            rem = a - self.mul(q, b)
            key = abs(self.norm(rem))
            if best is None or key < best[0]:
                best = (key, q, rem)
        if best[0] >= abs(n):
            raise ArithmeticError(f"no Euclidean quotient for {a} / {b} in {self}")
        return best[1], best[2]

    def xgcd(self, a: RingElement, b: RingElement):
        """Return ``(g, s, t)`` with ``s*a + t*b = g`` and ``g`` a gcd."""
        r0, r1 = a, b
        s0, s1 = ONE, ZERO
        t0, t1 = ZERO, ONE
        while not r1.is_zero():
            q, rem = self.divmod(r0, r1)
            r0, r1 = r1, rem
            s0, s1 = s1, s0 - self.mul(q, s1)
            t0, t1 = t1, t0 - self.mul(q, t1)
        return r0, s0, t0

    def is_unit(self, a: RingElement) -> bool:
        return abs(self.norm(a)) == 1

    @cached_property
    def torsion_units(self):
        """Roots of unity in the ring."""
        if self.kind == "imaginary-quadratic" and self.d == 1:
            return (ONE, -ONE, RingElement(0, 1), RingElement(0, -1))
        if self.kind == "imaginary-quadratic" and self.d == 3:
            w = RingElement(0, 1)
            return (ONE, -ONE, w, -w, RingElement(-1, 1), RingElement(1, -1))
        return (ONE, -ONE)

    @cached_property
    def unit(self):
        """Fundamental unit (``None`` when the unit rank is 0)."""
        return fundamental_unit(self)

    @cached_property
    def regulator(self) -> float:
        u = self.unit
        if u is None:
            return 0.0
        return math.log(max(abs(z) for z in self.embed_float(u)))

    # -- embeddings --------------------------------------------------------

    @cached_property
    def omega_embeddings(self):
        """Float images of ``omega`` under each place (complex dtype)."""
        return np.array([complex(z) for z in self._omega_mp(53)], dtype=complex)

    def _omega_mp(self, precision):
        if self.kind == "rational":
            return [mpmath.mpf(0)]
        c0, c1 = self.omega_relation
        with mpmath.workprec(precision + 10):
            disc = c1 * c1 + 4 * c0
            if disc > 0:
                root = mpmath.sqrt(disc)
                return [(c1 + root) / 2, (c1 - root) / 2]
            root = mpmath.sqrt(-disc)
            return [mpmath.mpc(mpmath.mpf(c1) / 2, root / 2)]

    def embed_float(self, a: RingElement) -> np.ndarray:
        """Double-precision embedding; complex dtype for every place."""
        return a.x + a.y * self.omega_embeddings

    def basis_embedding_matrix(self) -> np.ndarray:
        """Real matrix mapping coordinates ``(x, y)`` to real embedding coordinates.

        Real places contribute one row each; the complex place contributes
        its real and imaginary parts.
        """
        rows = []
        for j, w in enumerate(self.omega_embeddings):
            if j < self.r:
                rows.append([1.0, w.real])
            else:
                rows.append([1.0, w.real])
                rows.append([0.0, w.imag])
        m = np.array(rows, dtype=float)
        if self.kind == "rational":
            m = m[:, :1]
        return m


def parse_field(tag: str) -> FieldSpec:
    """Parse ``"Q"``, ``"Q(sqrt5)"``, ``"Q(sqrt-3)"`` or ``"Q(i)"``."""
    t = tag.strip().replace(" ", "").replace("√", "sqrt")
    if t == "Q":
        return FieldSpec("rational")
    if t == "Q(i)":
        return FieldSpec("imaginary-quadratic", 1)
    if t.startswith("Q(sqrt") and t.endswith(")"):
        try:
            D = int(t[len("Q(sqrt"):-1])
        except ValueError:
            raise ConfigurationError(f"malformed field tag {tag!r}") from None
        if D > 0:
            return FieldSpec("real-quadratic", D)
        if D < 0:
            return FieldSpec("imaginary-quadratic", -D)
    raise ConfigurationError(f"malformed field tag {tag!r}")


def _round_div(a: int, n: int) -> int:
    # nearest integer to a/n, exact
    if n < 0:
        a, n = -a, -n
    return (2 * a + n) // (2 * n)


def embed(field: FieldSpec, lam: RingElement, precision: int = DEFAULT_PRECISION):
    """Archimedean embeddings ``(sigma_1(lam), ..., sigma_{r+s}(lam))``.

    Values are mpmath numbers carrying ``precision`` binary digits; real
    places return ``mpf`` and the complex place ``mpc``.
    """
    if not isinstance(field, FieldSpec):
        raise ConfigurationError(f"not a FieldSpec: {field!r}")
    if precision < 53:
        raise ValueError("precision must be at least 53 bits")
    with mpmath.workprec(precision + 10):
        out = [lam.x + lam.y * w for w in field._omega_mp(precision)]
    return out


def field_norm(field: FieldSpec, lam: RingElement) -> int:
    return field.norm(lam)


def _quadratic_cf(P: int, Q: int, d: int):
    """Continued-fraction partial quotients of ``(P + sqrt(d)) / Q``."""
    s = math.isqrt(d)
    if (d - P * P) % Q:
        # standard normalization so that Q divides d - P^2
        P, Q, d = P * abs(Q), Q * abs(Q), d * Q * Q
        s = math.isqrt(d)
    while True:
        if Q <= 0:
            raise ArithmeticError("continued fraction lost reduction")
        a = (P + s) // Q
        yield a
        P = a * Q - P
        Q = (d - P * P) // Q


def fundamental_unit(field: FieldSpec):
    """Fundamental unit ``u > 1`` under the first real place, or ``None``.

    Walks the convergents ``p/q`` of ``omega`` and returns the inverse of
    the first ``p - q*omega`` of norm +-1; the first such convergent gives
    the fundamental unit.
    """
    if field.kind != "real-quadratic":
        return None
    D = field.d
    P, Q = (1, 2) if D % 4 == 1 else (0, 1)
    p_prev, p = 1, None
    q_prev, q = 0, None
    for k, a in enumerate(_quadratic_cf(P, Q, D)):
        if k == 0:
            p, q = a, 1
        else:
            p, p_prev = a * p + p_prev, p
            q, q_prev = a * q + q_prev, q
        cand = RingElement(p, -q)
        if abs(field.norm(cand)) == 1:
            u = field.inverse_unit(cand)
            sigma1 = field.embed_float(u)[0].real
            if sigma1 < 0:
                u = -u
                sigma1 = -sigma1
            if sigma1 < 1:
                u = field.inverse_unit(u)
            return u
        if k > 200:
            raise ArithmeticError(f"no unit found for d={D}")


def _coordinate_box(field: FieldSpec, bounds):
    """Outward-rounded integer box in ``(x, y)`` containing the embedding box."""
    A = field.basis_embedding_matrix()
    rows = []
    for j in range(field.places):
        rows.extend([bounds[j]] * (1 if j < field.r else 2))
    b = np.asarray(rows, dtype=float)
    Ainv = np.linalg.inv(A)
    half = np.abs(Ainv) @ b
    half = half * (1 + 1e-9) + 1e-9
    return [int(math.floor(h)) for h in half]


def enumerate_box(field: FieldSpec, bounds, cap: int = DEFAULT_ELEMENT_CAP):
    """All ``lam`` with ``|sigma_j(lam)| <= bounds[j]`` for every place, including 0."""
    bounds = [float(b) for b in bounds]
    if len(bounds) != field.places:
        raise ValueError(f"expected {field.places} bounds, got {len(bounds)}")
    if not all(math.isfinite(b) and b > 0 for b in bounds):
        raise ValueError("bounds must be finite and positive")
    half = _coordinate_box(field, bounds)
    if field.kind == "rational":
        half = [half[0], 0]
    needed = (2 * half[0] + 1) * (2 * half[1] + 1)
    if needed > cap:
        raise EnumerationCapError(needed, cap)
    xs = np.arange(-half[0], half[0] + 1)
    ys = np.arange(-half[1], half[1] + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    w = field.omega_embeddings
    vals = np.abs(X[:, None] + Y[:, None] * w[None, :])
    b = np.asarray(bounds)
    keep = np.all(vals <= b * (1 + 1e-12), axis=1)
    # near-boundary points are re-decided at high precision
    close = np.any(np.abs(vals - b) <= 1e-9 * (1 + b), axis=1)
    out = []
    for x, y, k, c in zip(X, Y, keep, close):
        lam = RingElement(int(x), int(y))
        if c:
            k = all(abs(z) <= bj for z, bj in zip(embed(field, lam), bounds))
        if k:
            out.append(lam)
    return out
