"""Averaged push-forwards, unstable dimension and finite-horizon escape of mass."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .covering import EstimationError
from .flow import FlowElement, _check_compatible, trajectory_heights
from .measures import DiscreteMeasure
from .module_space import DET_TOL, SpacePoint
from .number_field import ConfigurationError
from .partitions import fit_phi_constant

__all__ = [
    "window_heights",
    "escape_fraction",
    "escape_curve",
    "average_pushforward",
    "DimensionEstimate",
    "unstable_dimension_estimate",
    "KappaReport",
    "kappa_bound_check",
    "mass_floor",
    "MassBoundReport",
    "mass_bound_check",
    "write_escape_csv",
]


def window_heights(nu: DiscreteMeasure, a: FlowElement, n: int) -> np.ndarray:
    """Heights of ``T^j x_i`` for every atom and ``j`` in ``[0, n-1]``, shape ``(k, n)``."""
    if n < 1:
        raise ConfigurationError("n must be positive")
    _check_compatible(a, nu.field)
    a.check_range(n)
    out = np.empty((len(nu), n))
    for i, m in enumerate(nu.mats):
        out[i] = trajectory_heights(a, SpacePoint(nu.field, m, DET_TOL), 0, n - 1)[0]
    return out


def _weights(nu):
    w = nu.float_weights()
    return w / w.sum()


def escape_curve(nu: DiscreteMeasure, a: FlowElement, M: float, n_max: int,
                 heights=None) -> np.ndarray:
    """``mu_N(X_{>=M})`` for ``N = 1..n_max`` from one pass of height computations."""
    heights = window_heights(nu, a, n_max) if heights is None else heights
    per_time = _weights(nu) @ (heights[:, :n_max] >= M)
    return np.cumsum(per_time) / np.arange(1, n_max + 1)


def escape_fraction(nu: DiscreteMeasure, a: FlowElement, M: float, n: int,
                    heights=None) -> float:
    """Mass of ``mu_n = (1/n) sum_j T^j_* nu`` at height at least ``M``.

    Evaluated atom by atom along orbits, which equals the value on the
    atom cloud of :func:`average_pushforward` without building it.
    """
    return float(escape_curve(nu, a, M, n, heights)[-1])


def average_pushforward(nu: DiscreteMeasure, a: FlowElement, n: int) -> DiscreteMeasure:
    """Atom cloud ``{(T^j x_i, w_i / n) : 0 <= j < n}`` with exact weights."""
    if n < 1:
        raise ConfigurationError("n must be positive")
    _check_compatible(a, nu.field)
    a.check_range(n)
    mats, weights, groups = [], [], []
    for j in range(n):
        f = a.factors(j)
        m = np.array(nu.mats)
        m[:, :, :, 0] *= f[None, :, None]
        m[:, :, :, 1] /= f[None, :, None]
        mats.append(m)
        weights.extend(w / n for w in nu.weights)
        if nu.groups is not None:
            groups.extend(nu.groups)
    return DiscreteMeasure(nu.field, np.concatenate(mats), tuple(weights),
                           tuple(groups) if nu.groups is not None else None)


# -- unstable dimension ------------------------------------------------------------


@dataclass
class DimensionEstimate:
    d_hat: float
    scales: tuple
    log_mass: tuple
    residuals: tuple
    centers: int
    degenerate: bool = False


def _slab_masses(x, Y, w, scales, eta):
    """``nu(x B_eps^{U+} B_eta^{U-L})`` for each ``eps``.

    ``x^{-1} y = u^+(t) g`` with ``g`` upper triangular gives ``g_11 = h_11``,
    ``g_12 = h_12`` and ``t = h_21 / h_11``.
    """
    x11, x12, x21, x22 = x[:, 0, 0], x[:, 0, 1], x[:, 1, 0], x[:, 1, 1]
    y11, y12, y21, y22 = Y[..., 0, 0], Y[..., 0, 1], Y[..., 1, 0], Y[..., 1, 1]
    h11 = x22 * y11 - x12 * y21
    h12 = x22 * y12 - x12 * y22
    h21 = x11 * y21 - x21 * y11
    ok = np.all((np.abs(h11 - 1) < eta) & (np.abs(h12) < eta), axis=1)
    t = np.max(np.abs(h21 / np.where(ok[:, None], h11, 1.0)), axis=1)
    return [float(w[ok & (t < eps)].sum()) for eps in scales]


def unstable_dimension_estimate(nu: DiscreteMeasure, scales, eta: float = 0.25,
                                max_centers: int = 200, rng=None) -> DimensionEstimate:
    """Slope of ``log max_x nu(x-centred unstable eps-slab)`` against ``log eps``.

    Centres are atoms of ``nu``: all of them when there are at most
    ``max_centers``, else a subsample drawn with ``rng`` (or evenly spaced).
    """
    scales = tuple(sorted(float(s) for s in scales))
    if len(scales) < 3 or scales[-1] / scales[0] < math.e ** 2 * (1 - 1e-12):
        raise EstimationError("need at least three scales spanning a factor e^2")
    nu = nu.support()
    if len(nu) == 1:
        return DimensionEstimate(0.0, scales, (0.0,) * len(scales), (0.0,) * len(scales), 1, True)
    w = _weights(nu)
    k = len(nu)
    if k <= max_centers:
        idx = np.arange(k)
    elif rng is None:
        idx = np.linspace(0, k - 1, max_centers).round().astype(int)
    else:
        idx = rng.choice(k, size=max_centers, replace=False)
    best = np.zeros(len(scales))
    for i in idx:
        best = np.maximum(best, _slab_masses(nu.mats[i], nu.mats, w, scales, eta))
    logs = np.log(best)
    x = np.log(scales)
    coef = np.polyfit(x, logs, 1)
    resid = logs - np.polyval(coef, x)
    return DimensionEstimate(float(coef[0]), scales, tuple(logs), tuple(resid), len(idx))


# -- finite-horizon bounds ---------------------------------------------------------


@dataclass
class KappaReport:
    observed: float
    bound: float
    exponent: float
    slack: float


def kappa_bound_check(nu: DiscreteMeasure, a: FlowElement, M: float, N: int, kappa: float,
                      delta: float, d_hat: float, C: float | None = None,
                      heights=None) -> KappaReport:
    """Mass of atoms starting below ``M`` with more than ``kappa N`` cusp times.

    Compared with ``exp([D a_* - h kappa / 2 - (d_hat - delta) a_* + C loglog M / log M] N)``
    where ``C`` defaults to the fitted partition constant.
    """
    if not 0 <= kappa <= 1 or delta <= 0:
        raise ConfigurationError("need kappa in [0, 1] and delta > 0")
    heights = window_heights(nu, a, N) if heights is None else heights[:, :N]
    C = fit_phi_constant(M, a, range(16, 65, 8)) if C is None else C
    start_low = heights[:, 0] < M
    many = (heights >= M).sum(axis=1) > kappa * N
    observed = float(_weights(nu)[start_low & many].sum())
    expo = (a.D * a.a_star - a.h_max * kappa / 2 - (d_hat - delta) * a.a_star
            + C * math.log(math.log(M)) / math.log(M))
    bound = math.exp(min(expo * N, 700.0))
    return KappaReport(observed, bound, expo, bound - observed)


def mass_floor(D, d, a_star, h_max):
    """``1 - 2 a_* (D - d) / h_max``; exact when the inputs are Fractions or ints."""
    if isinstance(h_max, (int, Fraction)):
        return 1 - Fraction(2) * a_star * (D - d) / h_max
    return 1 - 2 * a_star * (D - d) / h_max


@dataclass
class MassBoundReport:
    escape: float
    eps_M: float
    floor: float
    vacuous: bool
    kappa_rows: tuple

    @property
    def slack(self) -> float:
        """Mass left above the floor, ``1 - escape - floor``."""
        return 1 - self.escape - self.floor


def mass_bound_check(nu: DiscreteMeasure, a: FlowElement, M: float, N: int, d_hat: float,
                     kappas=(0.1, 0.25, 0.5), heights=None) -> MassBoundReport:
    """``mu_N(X_{>=M})`` with its split into ``kappa``, ``nu(X_{>=M})`` and the excess mass.

    Each row of ``kappa_rows`` is ``(kappa, decay, holds)`` where ``decay`` is
    the measured mass of atoms starting below ``M`` with more than
    ``kappa N`` cusp times and ``holds`` says ``escape <= kappa + eps_M + decay``.
    """
    heights = window_heights(nu, a, N) if heights is None else heights[:, :N]
    w = _weights(nu)
    cusp = heights >= M
    escape = float(w @ cusp.mean(axis=1))
    eps_M = float(w[cusp[:, 0]].sum())
    rows = []
    for kappa in kappas:
        decay = float(w[(~cusp[:, 0]) & (cusp.sum(axis=1) > kappa * N)].sum())
        rows.append((kappa, decay, escape <= kappa + eps_M + decay + 1e-12))
    floor = mass_floor(a.D, d_hat, a.a_star, a.h_max)
    return MassBoundReport(escape, eps_M, float(floor), floor <= 0, tuple(rows))


def write_escape_csv(path, rows):
    """Rows ``M, N, escape_fraction, d_hat, floor, slack``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["M", "N", "escape_fraction", "d_hat", "floor", "slack"])
        for r in rows:
            w.writerow([f"{r['M']:.12g}", r["N"], f"{r['escape_fraction']:.12g}",
                        f"{r['d_hat']:.12g}", f"{r['floor']:.12g}", f"{r['slack']:.12g}"])
