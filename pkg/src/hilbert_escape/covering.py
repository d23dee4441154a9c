"""Bowen balls and the cover counts that bound entropy from above.

Distances between atoms are measured on representatives in G: two atoms
``x, y`` are Bowen-close when ``a^{-n} x^{-1} y a^n`` stays entrywise within
``eta`` of the identity for ``n`` in ``[0, N-1]``.  Conjugation scales the
lower-left entry by ``e^{n a_j}`` and the upper-right one by ``e^{-n a_j}``,
so the whole window reduces to one check at each end.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import mpmath
import numpy as np

from .flow import FlowElement, FlowRangeError, min_return_time
from .measures import DiscreteMeasure
from .module_space import SpacePoint
from .number_field import ConfigurationError
from .partitions import PLabel, QLabel, choices_admissible, fit_phi_constant

__all__ = [
    "EstimationError",
    "BowenSpec",
    "CoverReport",
    "EntropyEstimate",
    "MassEntropyReport",
    "bowen_distance",
    "bowen_contains",
    "greedy_cover",
    "box_prediction",
    "decompose_box",
    "inductive_cover_count",
    "fit_c0",
    "random_plabel",
    "conjugated_ball_cover",
    "entropy_estimate",
    "phi_hat",
    "mass_entropy_check",
    "write_cover_csv",
    "write_entropy_csv",
]

MAX_ETA = 0.5
SNAP = 1e-9


def ceil_exp(x) -> int:
    """Exact ``ceil(e^x)`` for counts beyond float precision.

    ``x`` may be an ``mpf`` built exactly from float inputs.  Values within
    ``1e-9`` of an integer snap to it, so that side ratios which are integers
    in exact arithmetic (``e^0``, ``1 / eta``) are not pushed up by rounding
    in ``x``.
    """
    if x <= 0:
        return 1
    with mpmath.workdps(30 + int(float(x) / 2.3)):
        v = mpmath.exp(mpmath.mpf(x))
        near = mpmath.nint(v)
        if abs(v - near) <= SNAP:
            return int(near)
        return int(mpmath.ceil(v))


class EstimationError(ValueError):
    """Raised when an estimator gets too little data to fit."""


@dataclass(frozen=True)
class BowenSpec:
    """Horizon ``N``, radius ``eta`` and flow of a Bowen ``N``-ball."""

    N: int
    a: FlowElement
    eta: float = 0.25

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError("N must be positive")
        if not 0 < self.eta <= MAX_ETA:
            raise ConfigurationError(f"eta must lie in (0, {MAX_ETA}]")
        self.a.check_range(self.N)

    @property
    def expansion(self) -> np.ndarray:
        """Per-place growth ``e^{(N-1) a_j}`` of the lower-left entry over the window."""
        return np.exp((self.N - 1) * np.asarray(self.a.rates))


@dataclass
class CoverReport:
    """Outcome of one cover count.

    ``method`` is one of ``greedy-oracle``, ``inductive-construction`` or
    ``box-arithmetic``; ``bound_value`` is the formula the count is compared
    against.  For greedy covers ``lower`` is the size of a maximal separated
    subset, which no cover by Bowen balls can beat.
    """

    count: int
    method: str
    bound_value: float = math.nan
    centers: tuple | None = None
    lower: int | None = None
    extras: dict = dc_field(default_factory=dict)


def _as_stack(points):
    if isinstance(points, DiscreteMeasure):
        return points.mats
    if isinstance(points, np.ndarray):
        return points
    return np.stack([p.mats for p in points])


def bowen_distance(spec: BowenSpec, x, Y) -> np.ndarray:
    """Largest entrywise deviation of ``a^{-n} x^{-1} y a^n`` from ``I`` over the window.

    ``x`` is one matrix stack ``(places, 2, 2)``; ``Y`` has shape
    ``(k, places, 2, 2)``.  The value is symmetric in ``x`` and ``y``.
    """
    x = np.asarray(x.mats if isinstance(x, SpacePoint) else x)
    Y = np.asarray(Y)
    x11, x12, x21, x22 = x[:, 0, 0], x[:, 0, 1], x[:, 1, 0], x[:, 1, 1]
    y11, y12, y21, y22 = Y[..., 0, 0], Y[..., 0, 1], Y[..., 1, 0], Y[..., 1, 1]
    h11 = x22 * y11 - x12 * y21
    h12 = x22 * y12 - x12 * y22
    h21 = x11 * y21 - x21 * y11
    h22 = x11 * y22 - x21 * y12
    dev = np.maximum.reduce([np.abs(h11 - 1), np.abs(h22 - 1), np.abs(h12),
                             np.abs(h21) * spec.expansion])
    return dev.max(axis=-1)


def bowen_contains(spec: BowenSpec, x: SpacePoint, y: SpacePoint) -> bool:
    """Whether ``y`` lies in the Bowen ``N``-ball of radius ``eta`` about ``x``."""
    return bool(bowen_distance(spec, x, y.mats[None])[0] < spec.eta)


def greedy_cover(points, spec: BowenSpec, keep_centers: bool = False) -> CoverReport:
    """Greedy Bowen-ball cover of a finite sample with a separated-set sandwich.

    Centres are chosen in sample order.  The lower bound is a maximal set
    whose pairwise distances are at least ``2 eta + 2 eta^2``: a product of
    two elements of ``B_eta`` deviates from ``I`` by less than that, so no
    Bowen ball holds two of its points.
    """
    Y = _as_stack(points)
    k = Y.shape[0]
    if k == 0:
        return CoverReport(0, "greedy-oracle", lower=0)
    if k > 10 ** 6:
        raise ConfigurationError("greedy cover is limited to 10^6 points")
    eta = spec.eta
    rho = 2 * eta + 2 * eta ** 2
    covered = np.zeros(k, dtype=bool)
    blocked = np.zeros(k, dtype=bool)
    centers = []
    separated = 0
    for i in range(k):
        if covered[i] and blocked[i]:
            continue
        d = bowen_distance(spec, Y[i], Y)
        if not covered[i]:
            centers.append(i)
            covered |= d < eta
        if not blocked[i]:
            separated += 1
            blocked |= d < rho
    kept = tuple(int(c) for c in centers) if keep_centers else None
    return CoverReport(len(centers), "greedy-oracle", centers=kept, lower=separated)


def box_prediction(extents, spec: BowenSpec, deltas=None) -> float:
    """Volume ratio of an unstable box to the unstable part of one Bowen ball.

    ``extents`` are per-place side lengths of the box in ``t_j``; the Bowen
    ball has side ``2 eta e^{-(N-1) a_j}``.
    """
    deltas = spec.a.deltas if deltas is None else deltas
    ext = np.broadcast_to(np.asarray(extents, dtype=float), (len(deltas),))
    side = 2 * spec.eta / spec.expansion
    return float(np.prod(np.maximum(1.0, ext / side) ** np.asarray(deltas)))


# -- constructive counts -------------------------------------------------------


def _left_endpoints(b, ell, choice, a: FlowElement):
    out = []
    for i, rate in zip(choice, a.rates):
        if i == 0:
            out.append(-math.inf)
        elif i <= ell:
            out.append(b + (i - 1) * rate)
        else:
            out.append(b + ell * rate)
    return out


def decompose_box(left, b: float, ell: int, a: FlowElement, eta: float,
                  B1: float = 1.0, B2: float = 1.0):
    """Tile ``{|t_j| < B1 min(eta, e^{b - n_j})}`` by boxes of radius ``B2 eta e^{-l a_j}``.

    Parameters
    ----------
    left : sequence of float
        Left endpoint ``n_j`` of the chosen interval per place (``-inf`` for
        the first interval).
    b, ell : float, int
        Entry time and length of the excursion.

    Returns
    -------
    count : int
        ``prod_j ceil(side ratio_j)^{delta_j}``.
    cap : float
        ``(2 max(1, B1/B2) / eta)^D exp((l + 1) h / 2 - sum_L a_j delta_j)``,
        an upper bound on ``count`` whenever the choices pass
        :func:`choices_admissible`.
    """
    count = 1
    sum_left = 0.0
    for n_j, rate, d in zip(left, a.rates, a.deltas):
        if n_j != -math.inf and not b - 1e-9 <= n_j <= b + ell * rate + 1e-9:
            raise ConfigurationError(f"left endpoint {n_j} outside [b, b + l a_j]")
        if n_j == -math.inf:
            sum_left += rate * d
        outer = math.log(B1) + (math.log(eta) if n_j == -math.inf else min(math.log(eta), b - n_j))
        inner = math.log(B2) + math.log(eta) - ell * rate
        count *= ceil_exp(outer - inner) ** d
    cap = (2 * max(1.0, B1 / B2) / eta) ** a.D * math.exp((ell + 1) * a.h_max / 2 - sum_left)
    return count, cap


def _exact_product(n, x, y=0.0):
    """``n (x - y)`` evaluated without rounding the float inputs."""
    with mpmath.workdps(60):
        return mpmath.mpf(n) * (mpmath.mpf(x) - mpmath.mpf(y))


def _block_factor(w: int, a: FlowElement) -> int:
    out = 1
    for rate, d in zip(a.rates, a.deltas):
        out *= ceil_exp(_exact_product(w, rate)) ** d
    return out


def inductive_cover_count(label: PLabel, a: FlowElement, M: float, N: int | None = None,
                          eta: float = 0.25, c0: float = 1.0, B1: float = 1.0,
                          B2: float = 1.0) -> CoverReport:
    """Bowen ``N``-balls used by the inductive construction for one refined label.

    Steps outside excursions multiply the running count by
    ``prod_j ceil(e^{|W| a_j})^{delta_j}``; each excursion multiplies it by
    its :func:`decompose_box` count.  ``bound_value`` is the target
    ``c0^{h N / log M} e^{h (N - |V| / 2)}`` and ``extras['c0_required']``
    the smallest ``c0 >= 1`` meeting it.
    """
    q = label.base
    N = q.N if N is None else N
    if N != q.N:
        raise ConfigurationError(f"label horizon {q.N} does not match N={N}")
    if not q.admissible:
        raise ConfigurationError("label is not admissible")
    a.check_range(N)
    if q.intervals and q.intervals[0][0] == 0:
        raise ConfigurationError("the construction needs 0 outside V")
    count = 1
    t = 0
    for (b, ell), choice in zip(q.intervals, label.choices):
        count *= _block_factor(b - 1 - t, a)
        box, _ = decompose_box(_left_endpoints(b, ell, choice, a), b, ell, a, eta, B1, B2)
        count *= box
        t = b + ell
    count *= _block_factor(N - 1 - t, a)
    h = a.h_max
    log_base = h * (N - q.size / 2)
    expo = h * N / math.log(M)
    required = max(1.0, math.exp((math.log(count) - log_base) / expo))
    return CoverReport(count, "inductive-construction",
                       bound_value=c0 ** expo * math.exp(log_base),
                       extras={"c0_required": required, "log_base": log_base})


def fit_c0(reports) -> float:
    """Single constant ``c0 >= 1`` that makes every report meet its target."""
    return max([1.0] + [r.extras["c0_required"] for r in reports])


def random_plabel(rng, M: float, N: int, a: FlowElement, mean_length: float = 4.0,
                  start_prob: float = 0.15, tries: int = 50) -> PLabel:
    """Random admissible refined label with ``0`` outside ``V``.

    Excursion lengths are geometric with the given mean, gaps are at least
    the return-time floor, and each excursion's interval choices are redrawn
    until :func:`choices_admissible` accepts them (the all-contracting
    choice always does).
    """
    floor = min_return_time(M, a) - 1
    intervals = []
    t = 1
    while t < N:
        if rng.random() < start_prob:
            ell = int(min(rng.geometric(1.0 / (mean_length + 1)) - 1, N - 1 - t))
            intervals.append((t, ell))
            t += ell + 1 + floor
        else:
            t += 1
    choices = []
    for _, ell in intervals:
        pick = (ell + 1,) * len(a.rates)
        for _ in range(tries):
            cand = tuple(int(x) for x in rng.integers(0, ell + 2, size=len(a.rates)))
            if choices_admissible(cand, ell, a)[0]:
                pick = cand
                break
        choices.append(pick)
    return PLabel(QLabel(M, N, tuple(intervals), floor), tuple(choices))


def conjugated_ball_cover(N: int, a: FlowElement, eta: float = 0.25) -> CoverReport:
    """Translates of the shrunken unstable ball needed for ``a^N B^{U+} a^{-N} B^{U-L}``.

    Exact count ``prod_j ceil(e^{N (a_* - a_j)})^{delta_j}`` against the bound
    ``2^{r + 2s} e^{(D a_* - h) N}``.  ``eta`` cancels from the side ratios.
    """
    if N < 0:
        raise ConfigurationError("N must be non-negative")
    if N * a.a_star > 700:
        raise FlowRangeError("N a_* exceeds 700")
    count = 1
    for rate, d in zip(a.rates, a.deltas):
        count *= ceil_exp(_exact_product(N, a.a_star, rate)) ** d
    bound = 2 ** a.D * math.exp((a.D * a.a_star - a.h_max) * N)
    return CoverReport(count, "box-arithmetic", bound_value=bound)


# -- entropy estimation ------------------------------------------------------------


@dataclass
class EntropyEstimate:
    """Cover-growth fit: slope over the full range, its sub-window spread, the raw counts."""

    slope: float
    slope_min: float
    slope_max: float
    Ns: tuple
    log_counts: tuple
    window: int

    @property
    def ratio(self) -> float:
        """``log BC(N) / N`` at the largest horizon."""
        return self.log_counts[-1] / self.Ns[-1]


def _slope(x, y):
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def entropy_estimate(sample, a: FlowElement, eta: float = 0.25, N_range=range(6, 15),
                     window: int | None = None) -> EntropyEstimate:
    """Least-squares slope of ``log greedy_cover`` against ``N``.

    Sub-window slopes use every run of ``window`` consecutive horizons
    (default half the range, at least 3).
    """
    Ns = tuple(int(n) for n in N_range)
    if len(Ns) < 3:
        raise EstimationError("need at least three horizons")
    Y = _as_stack(sample.support() if isinstance(sample, DiscreteMeasure) else sample)
    logs = tuple(math.log(greedy_cover(Y, BowenSpec(N, a, eta)).count) for N in Ns)
    window = max(3, len(Ns) // 2) if window is None else window
    window = min(window, len(Ns))
    subs = [_slope(Ns[i:i + window], logs[i:i + window]) for i in range(len(Ns) - window + 1)]
    return EntropyEstimate(_slope(Ns, logs), min(subs), max(subs), Ns, logs, window)


def phi_hat(M: float, a: FlowElement, N_values=range(16, 65, 8)) -> float:
    """Fitted slack ``C loglog M / log M`` from exact partition counts."""
    if M <= math.e:
        raise ConfigurationError("phi_hat needs M > e")
    C = fit_phi_constant(M, a, N_values)
    return C * math.log(math.log(M)) / math.log(M)


@dataclass
class MassEntropyReport:
    escape: float
    h_hat: float
    phi_hat: float
    slack: float
    h_max: float
    escape_drift: float
    components: tuple


def mass_entropy_check(sample: DiscreteMeasure, a: FlowElement, M: float, eta: float = 0.25,
                       N_range=range(6, 15), phi: float | None = None,
                       heights=None) -> MassEntropyReport:
    """Slack ``h (1 - mu(X_{>=M}) / 2) + phi - h_hat`` for a near-invariant sample.

    ``h_hat`` is the cover ratio ``log BC(N) / N`` at the largest horizon,
    averaged over the sample's groups with their masses.  The escape
    fraction is the time average over the same window, and the drift is the
    difference between its first- and second-half averages.  ``heights``
    may hold precomputed :func:`~hilbert_escape.escape.window_heights` of
    the support atoms.
    """
    from .escape import window_heights

    Ns = tuple(int(n) for n in N_range)
    if not Ns:
        raise EstimationError("empty horizon range")
    N = Ns[-1]
    sample = sample.support()
    w = sample.float_weights()
    w = w / w.sum()
    heights = window_heights(sample, a, N) if heights is None else np.asarray(heights)[:, :N]
    cusp = heights >= M
    per_time = w @ cusp
    escape = float(per_time.mean())
    half = N // 2
    drift = float(abs(per_time[:half].mean() - per_time[half:].mean())) if half else 0.0
    parts = []
    h_hat = 0.0
    for mass, comp in sample.components():
        r = math.log(greedy_cover(comp.mats, BowenSpec(N, a, eta)).count) / N
        parts.append((float(mass), r))
        h_hat += float(mass) * r
    phi = phi_hat(M, a) if phi is None else phi
    slack = a.h_max * (1 - escape / 2) + phi - h_hat
    return MassEntropyReport(escape, h_hat, phi, slack, a.h_max, drift, tuple(parts))


# -- CSV output ------------------------------------------------------------------------


def write_cover_csv(path, rows):
    """Rows ``N, label_hash, constructed_count, paper_bound, greedy_lower, greedy_upper``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "label_hash", "constructed_count", "paper_bound",
                    "greedy_lower", "greedy_upper"])
        for r in rows:
            w.writerow([r["N"], r["label_hash"], r["constructed_count"],
                        f"{r['paper_bound']:.12g}", r.get("greedy_lower", 0),
                        r.get("greedy_upper", 0)])


def write_entropy_csv(path, est: EntropyEstimate):
    """Rows ``N, log_count, slope_window`` (the sub-window slope starting at ``N``)."""
    Ns, logs, win = est.Ns, est.log_counts, est.window
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "log_count", "slope_window"])
        for i, (n, lc) in enumerate(zip(Ns, logs)):
            sw = _slope(Ns[i:i + win], logs[i:i + win]) if i + win <= len(Ns) else est.slope
            w.writerow([n, f"{lc:.12g}", f"{sw:.12g}"])
