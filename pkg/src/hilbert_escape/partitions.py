"""Labels of the itinerary partition and its ratio refinement, with exact counts."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

from .flow import FlowElement, Itinerary, RatioProfile, excursion_intervals, min_return_time
from .number_field import ConfigurationError, EnumerationCapError

__all__ = [
    "LabelingError",
    "QLabel",
    "PLabel",
    "q_label",
    "p_label",
    "count_q_labels",
    "count_p_refinement",
    "relation_admissible",
    "choices_admissible",
    "fit_phi_constant",
    "write_label_csv",
]

DP_MAX_N = 64


class LabelingError(ValueError):
    """Raised when an itinerary cannot be labelled unambiguously."""

    def __init__(self, excursions):
        self.excursions = tuple(excursions)
        super().__init__(f"unresolved excursion profiles: {list(self.excursions)}")


@dataclass(frozen=True)
class QLabel:
    """The set ``V`` of cusp times in ``[0, N-1]``, stored as ``(b, length)`` runs."""

    M: float
    N: int
    intervals: tuple
    gap_floor: int

    @property
    def V(self):
        return tuple(n for b, ell in self.intervals for n in range(b, b + ell + 1))

    @property
    def size(self) -> int:
        return sum(ell + 1 for _, ell in self.intervals)

    def gaps(self):
        return [b2 - (b1 + l1) - 1
                for (b1, l1), (b2, _) in zip(self.intervals, self.intervals[1:])]

    @property
    def admissible(self) -> bool:
        return all(g >= self.gap_floor for g in self.gaps())

    @property
    def hash(self) -> str:
        key = f"{self.N}|" + ",".join(f"{b}+{ell}" for b, ell in self.intervals)
        return hashlib.sha1(key.encode()).hexdigest()[:16]

    @classmethod
    def from_set(cls, V, M, N, a: FlowElement):
        return cls(M, N, tuple(excursion_intervals(sorted(V))), min_return_time(M, a) - 1)


@dataclass(frozen=True)
class PLabel:
    """A QLabel refined by one interval index per excursion and place."""

    base: QLabel
    choices: tuple

    def __post_init__(self):
        if len(self.choices) != len(self.base.intervals):
            raise ConfigurationError("one choice tuple per excursion required")
        for (b, ell), ch in zip(self.base.intervals, self.choices):
            if any(not 0 <= c <= ell + 1 for c in ch):
                raise ConfigurationError(f"interval index out of range for excursion at {b}")

    @property
    def hash(self) -> str:
        key = self.base.hash + "|" + ";".join(",".join(map(str, c)) for c in self.choices)
        return hashlib.sha1(key.encode()).hexdigest()[:16]


def q_label(it: Itinerary, a: FlowElement | None = None) -> QLabel:
    a = a or it.a
    return QLabel(it.M, it.N, tuple(it.intervals), min_return_time(it.M, a) - 1)


def p_label(it: Itinerary, a: FlowElement | None = None) -> PLabel:
    bad = [m for m, pr in enumerate(it.profiles) if not pr.resolved]
    if bad:
        raise LabelingError(bad)
    return PLabel(q_label(it, a), tuple(tuple(pr.interval_index) for pr in it.profiles))


def count_q_labels(M: float, N: int, a: FlowElement, cap: int = DP_MAX_N):
    """Exact number of admissible cusp-time sets in ``[0, N-1]`` and the comparison bound.

    Admissible sets are unions of runs separated by at least
    ``min_return_time(M, a) - 1`` steps.  Returns ``(count, bound)`` with
    ``bound = exp(2 h_max loglog M / log M * N)``.
    """
    if N < 1:
        raise ConfigurationError("N must be positive")
    if N > cap:
        raise EnumerationCapError(N, cap)
    g = min_return_time(M, a) - 1
    bound = math.exp(2 * a.h_max * math.log(math.log(M)) / math.log(M) * N)
    if g <= 0:
        return 2 ** N, bound
    # before any run / inside a run / k zeros since the last run (k = g means >= g)
    none, run = 1, 1
    zeros = [0] * (g + 1)
    for _ in range(N - 1):
        new_zeros = [0] * (g + 1)
        new_zeros[1] = run
        for k in range(1, g):
            new_zeros[k + 1] += zeros[k]
        new_zeros[g] += zeros[g]
        none, run, zeros = none, none + run + zeros[g], new_zeros
    return none + run + sum(zeros), bound


def count_p_refinement(q: QLabel, places: int, N: int | None = None):
    """Refinements of ``q``: ``prod (l_m + 2)^places`` and the AM-GM cap ``((N/k)^k)^places``.

    Each excursion ``[b, b + l]`` offers ``l + 2`` intervals per place.  The
    cap dominates the product whenever ``0`` is not a cusp time.
    """
    if not q.admissible:
        raise ConfigurationError("label is not admissible")
    N = q.N if N is None else N
    k = len(q.intervals)
    count = 1
    for _, ell in q.intervals:
        count *= (ell + 2) ** places
    cap = 1.0 if k == 0 else ((N / k) ** k) ** places
    return count, cap


def relation_admissible(profile: RatioProfile, length: int, a: FlowElement):
    """Ratio-sum inequality ``(l+1)(sum_L a d + sum_C a d - sum_R a d) < 2 sum_C s d``.

    Returns ``(passes, slack)`` where ``slack = RHS - LHS``.
    """
    lhs = 0.0
    rhs = 0.0
    for c, s, rate, d in zip(profile.classes, profile.s, a.rates, a.deltas):
        if c == "R":
            lhs -= rate * d
        else:
            lhs += rate * d
            if c == "C":
                rhs += 2 * s * d
    lhs *= length + 1
    return lhs < rhs, rhs - lhs


def choices_admissible(choices, length: int, a: FlowElement):
    """Whether some ratio profile with these interval indices satisfies the inequality.

    Index ``0`` forces class L.  Index ``i`` in ``1..l`` is class C with
    ``s_j <= i a_j``, so the right endpoint is the most favourable value.
    Index ``l + 1`` is taken as R, which gives the same slack as the largest
    C value ``(l + 1) a_j``.  Returns ``(passes, best_slack)``.
    """
    lhs = 0.0
    rhs = 0.0
    for i, rate, d in zip(choices, a.rates, a.deltas):
        if i == 0:
            lhs += rate * d
        elif i <= length:
            lhs += rate * d
            rhs += 2 * i * rate * d
        else:
            lhs -= rate * d
    lhs *= length + 1
    return lhs < rhs, rhs - lhs


def fit_phi_constant(M: float, a: FlowElement, N_values):
    """Constant ``C`` with ``log count_q_labels(N) <= C loglog M / log M * N`` on ``N_values``.

    The constant is fitted from exact counts rather than assumed.
    """
    rate = math.log(math.log(M)) / math.log(M)
    best = 0.0
    for N in N_values:
        count, _ = count_q_labels(M, N, a)
        best = max(best, math.log(count) / (rate * N))
    return best


def write_label_csv(path, labels, ids=None):
    """Rows ``trajectory_id, label_hash, intervals, choices``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory_id", "label_hash", "intervals", "choices"])
        for k, lab in enumerate(labels):
            tid = ids[k] if ids is not None else k
            base = lab.base if isinstance(lab, PLabel) else lab
            iv = " ".join(f"[{b},{b + ell}]" for b, ell in base.intervals)
            ch = " ".join("(" + ",".join(map(str, c)) + ")" for c in lab.choices) \
                if isinstance(lab, PLabel) else ""
            w.writerow([tid, lab.hash, iv, ch])
