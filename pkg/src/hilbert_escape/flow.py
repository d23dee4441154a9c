"""The diagonal flow ``T(x) = x a`` and cusp itineraries of its orbits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .module_space import (
    ModuleVector,
    SpacePoint,
    _renormalized,
    candidate_vectors,
    log_product_norm,
    reduce_point,
)
from .number_field import ConfigurationError, FieldSpec

__all__ = [
    "FlowRangeError",
    "FlowElement",
    "RatioProfile",
    "Itinerary",
    "step_vector",
    "step_point",
    "trajectory_heights",
    "itinerary",
    "min_return_time",
    "excursion_intervals",
    "write_itinerary_csv",
    "write_profile_csv",
]

MAX_EXPONENT = 1400.0
HEIGHT_TOL = 1e-6
TRACK_THRESHOLD = 0.9


class FlowRangeError(OverflowError):
    """Raised when ``|n a_j|`` would overflow the float range."""


@dataclass(frozen=True)
class FlowElement:
    """Diagonal element with per-place rates ``a_j >= 0`` and angles ``theta_j``."""

    rates: tuple
    angles: tuple
    r: int
    s: int

    def __post_init__(self):
        rates = tuple(float(x) for x in self.rates)
        angles = tuple(float(x) for x in self.angles)
        if len(rates) != self.r + self.s or len(angles) != len(rates):
            raise ConfigurationError(
                f"need {self.r + self.s} rates and angles, got {len(rates)} and {len(angles)}")
        if any(x < 0 or not math.isfinite(x) for x in rates):
            raise ConfigurationError("rates must be finite and non-negative")
        if any(angles[j] != 0 for j in range(self.r)):
            raise ConfigurationError("real places carry no rotation")
        if sum(rates) <= 0:
            raise ConfigurationError("h_max must be positive")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "angles", angles)

    @classmethod
    def for_field(cls, field: FieldSpec, rates, angles=None) -> FlowElement:
        rates = tuple(rates)
        if len(rates) == 1 and field.places > 1:
            rates = rates * field.places
        if angles is None:
            angles = (0.0,) * len(rates)
        return cls(rates, tuple(angles), field.r, field.s)

    @property
    def deltas(self):
        return (1,) * self.r + (2,) * self.s

    @property
    def h_r(self) -> float:
        return sum(self.rates[: self.r])

    @property
    def h_s(self) -> float:
        return sum(self.rates[self.r:])

    @property
    def h_max(self) -> float:
        return self.h_r + 2 * self.h_s

    @property
    def a_star(self) -> float:
        return max(self.rates)

    @property
    def D(self) -> int:
        return self.r + 2 * self.s

    def check_range(self, n):
        if abs(n) * self.a_star > MAX_EXPONENT:
            raise FlowRangeError(f"|n a_j| = {abs(n) * self.a_star} exceeds {MAX_EXPONENT}")

    def factors(self, n):
        """Per-place diagonal entries ``e^{i n theta} e^{n a / 2}`` of ``a^n``."""
        self.check_range(n)
        a = np.asarray(self.rates)
        th = np.asarray(self.angles)
        return np.exp(1j * n * th + n * a / 2)


def _check_compatible(a: FlowElement, field: FieldSpec):
    if (a.r, a.s) != (field.r, field.s):
        raise ConfigurationError(f"flow signature {(a.r, a.s)} does not match {field}")


def step_vector(a: FlowElement, v: ModuleVector, n: int) -> ModuleVector:
    f = a.factors(n)
    comps = np.stack([v.components[:, 0] * f, v.components[:, 1] / f], axis=1)
    return ModuleVector.from_components(a, v.coeffs, comps)


def step_point(a: FlowElement, p: SpacePoint, n: int) -> SpacePoint:
    _check_compatible(a, p.field)
    if n == 0:
        return p
    f = a.factors(n)
    mats = p.mats.copy()
    mats[:, :, 0] *= f[:, None]
    mats[:, :, 1] /= f[:, None]
    return _renormalized(p.field, mats, p.det_tol)


def min_return_time(M: float, a: FlowElement) -> int:
    """Smallest number of steps between leaving one excursion and entering the next."""
    if M <= 1:
        raise ConfigurationError("M must exceed 1")
    return math.ceil(2 * math.log(M) / a.h_max - 1e-12)


# -- trajectory engine ---------------------------------------------------------


def _search_radius(a: FlowElement, field: FieldSpec):
    """Enumeration radius and the number of steps one search stays valid for.

    A vector of norm below 1 at time ``n0 + k`` had norm below ``e^{k h/2}``
    at ``n0``, so a search at radius ``R`` covers ``floor(2 log R / h)`` steps.
    """
    cap = 12.0 if field.unit_rank else 24.0
    R = min(cap, max(4.0, math.exp(2.5 * a.h_max)))
    R = max(R, math.exp(a.h_max / 2))
    return R, max(0, int(math.floor(2 * math.log(R) / a.h_max + 1e-12)))


def _advance(a, q, tq, t, chunk):
    """Step a reduced point from time ``tq`` to ``t`` re-reducing every ``chunk`` steps."""
    while tq != t:
        m = max(-chunk, min(chunk, t - tq))
        q = reduce_point(step_point(a, q, m))[1]
        tq += m
    return q


def trajectory_heights(a: FlowElement, p: SpacePoint, start: int, stop: int):
    """Certified heights of ``T^n p`` for ``n`` in ``[start, stop]``.

    Returns ``(heights, witness)`` where ``witness[k]`` holds the per-place
    ``(log|v'|^2, log|v''|^2)`` of the shortest vector at time ``start + k``
    (NaN when no vector of norm below the search radius exists).
    """
    _check_compatible(a, p.field)
    a.check_range(start)
    a.check_range(stop)
    field = p.field
    rates = np.asarray(a.rates)
    deltas = a.deltas
    count = stop - start + 1
    log_norm = np.full(count, np.inf)
    witness = np.full((count, field.places, 2), np.nan)
    R, window = _search_radius(a, field)
    chunk = max(1, int(6.0 / a.a_star))
    log_track_cut = math.log(TRACK_THRESHOLD)

    q = _advance(a, reduce_point(p)[1], 0, start, chunk)
    tq = start
    t = start
    track = None
    while t <= stop:
        if track is not None:
            ln = float(log_product_norm(deltas, track))
            if ln < log_track_cut:
                # below 1 the short vector is the unique minimiser
                log_norm[t - start] = ln
                witness[t - start] = track
                track = track + np.stack([rates, -rates], axis=1)
                t += 1
                continue
        q = _advance(a, q, tq, t, chunk)
        tq = t
        _, ls = candidate_vectors(q, R)
        steps = min(window, stop - t)
        if len(ls) == 0:
            t += steps + 1
            track = None
            continue
        k = np.arange(steps + 1)[:, None, None]
        shifted = ls[None] + k[..., None] * np.stack([rates, -rates], axis=1)[None, None]
        lns = log_product_norm(deltas, shifted)
        best = np.argmin(lns, axis=1)
        for i in range(steps + 1):
            log_norm[t - start + i] = lns[i, best[i]]
            witness[t - start + i] = shifted[i, best[i]]
        track = shifted[-1, best[-1]] + np.stack([rates, -rates], axis=1)
        t += steps + 1
    heights = np.maximum(1.0, np.exp(-log_norm))
    return heights, witness


# -- itineraries -----------------------------------------------------------


@dataclass
class RatioProfile:
    """Per-place log-ratios of the short vector one step before an excursion."""

    start: int
    length: int
    s: tuple
    classes: tuple
    interval_index: tuple
    resolved: bool = True
    truncated: bool = False


def classify_ratio(s_j: float, length: int, rate: float) -> str:
    if s_j <= 0:
        return "L"
    if s_j <= (length + 1) * rate:
        return "C"
    return "R"


def interval_index(s_j: float, length: int, rate: float) -> int:
    """Index of the interval ``(b + (i-1) a, b + i a]`` of ``I_j`` holding ``b + s_j``."""
    if s_j <= 0:
        return 0
    if rate <= 0 or s_j > length * rate:
        return length + 1
    return min(length, max(1, math.ceil(s_j / rate - 1e-12)))


def make_profile(a: FlowElement, start: int, length: int, ls_before, resolved=True,
                 truncated=False) -> RatioProfile:
    s = []
    for lp1, lp2 in ls_before:
        s.append(math.inf if lp1 == -math.inf else 0.5 * (lp2 - lp1))
    classes = tuple(classify_ratio(x, length, r) for x, r in zip(s, a.rates))
    idx = tuple(interval_index(x, length, r) for x, r in zip(s, a.rates))
    return RatioProfile(start, length, tuple(s), classes, idx, resolved, truncated)


def excursion_intervals(V):
    """Maximal runs ``(b, length)`` of a sorted integer set, with ``length = len - 1``."""
    out = []
    for n in V:
        if out and n == out[-1][0] + out[-1][1] + 1:
            out[-1] = (out[-1][0], out[-1][1] + 1)
        else:
            out.append((n, 0))
    return out


@dataclass
class Itinerary:
    M: float
    N: int
    V: tuple
    intervals: list
    profiles: list
    heights: np.ndarray
    boundary: tuple = ()
    a: FlowElement | None = dc_field(default=None, repr=False)

    def gaps(self):
        """Steps strictly between consecutive excursions."""
        return [b2 - (b1 + l1) - 1
                for (b1, l1), (b2, _) in zip(self.intervals, self.intervals[1:])]


def itinerary(a: FlowElement, p: SpacePoint, M: float, N: int) -> Itinerary:
    """Times in ``[0, N-1]`` at height at least ``M``, with excursion profiles."""
    if M <= 1:
        raise ConfigurationError("M must exceed 1")
    if N < 1:
        raise ConfigurationError("N must be positive")
    heights, witness = trajectory_heights(a, p, -1, N - 1)
    hts = heights[1:]
    boundary = tuple(int(n) for n in np.flatnonzero(np.abs(hts - M) <= HEIGHT_TOL * M))
    V = tuple(int(n) for n in np.flatnonzero(hts >= M))
    intervals = excursion_intervals(V)
    step_back = np.stack([-np.asarray(a.rates), np.asarray(a.rates)], axis=1)
    profiles = []
    for b, ell in intervals:
        ls = witness[b + 1] + step_back
        touched = any(b - 1 <= n <= b + ell + 1 for n in boundary)
        # an orbit already in the cusp at time -1 has no entry step in view
        truncated = heights[b] >= M
        profiles.append(make_profile(a, b, ell, ls, resolved=not touched, truncated=bool(truncated)))
    return Itinerary(M, N, V, intervals, profiles, hts, boundary, a)


# -- CSV output -------------------------------------------------------------


def write_itinerary_csv(path, its, ids=None):
    """Rows ``trajectory_id, n, height, in_cusp, excursion_id``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory_id", "n", "height", "in_cusp", "excursion_id"])
        for k, it in enumerate(its):
            tid = ids[k] if ids is not None else k
            exc = np.full(it.N, -1)
            for m, (b, ell) in enumerate(it.intervals):
                exc[b:b + ell + 1] = m
            for n in range(it.N):
                w.writerow([tid, n, f"{it.heights[n]:.12g}", int(it.heights[n] >= it.M), int(exc[n])])


def write_profile_csv(path, its, ids=None):
    """Rows ``trajectory_id, excursion_id, place, s_j, class, interval_index``.

    An infinite ratio is written as the sentinel ``1e308``.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory_id", "excursion_id", "place", "s_j", "class", "interval_index"])
        for k, it in enumerate(its):
            tid = ids[k] if ids is not None else k
            for m, prof in enumerate(it.profiles):
                for j, (s, c, i) in enumerate(zip(prof.s, prof.classes, prof.interval_index)):
                    sv = 1e308 if math.isinf(s) else s
                    w.writerow([tid, m, j, f"{sv:.12g}", c, i])
