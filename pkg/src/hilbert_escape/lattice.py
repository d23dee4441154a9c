"""Small-dimension LLL reduction and box enumeration for real Z-lattices."""

import math
from itertools import product

import numpy as np

from .number_field import EnumerationCapError


def lll(basis, delta=0.99):
    """LLL-reduce the rows of ``basis``.

    Returns ``(reduced, U)`` with ``reduced = U @ basis`` and ``U`` an integer
    unimodular matrix (Python ints in an object array).  Intended for the
    2- and 4-dimensional lattices used here; floating point Gram-Schmidt is
    recomputed from scratch on every swap.
    """
    B = np.array(basis, dtype=float)
    n = B.shape[0]
    U = np.eye(n, dtype=object)
    for i in range(n):
        for j in range(n):
            U[i, j] = int(U[i, j])

    def gso(B):
        Bs = np.zeros_like(B)
        mu = np.zeros((n, n))
        for i in range(n):
            v = B[i].copy()
            for j in range(i):
                denom = Bs[j] @ Bs[j]
                mu[i, j] = (B[i] @ Bs[j]) / denom if denom > 0 else 0.0
                v -= mu[i, j] * Bs[j]
            Bs[i] = v
        return Bs, mu

    Bs, mu = gso(B)
    k = 1
    guard = 0
    while k < n:
        guard += 1
        if guard > 10_000:
            raise ArithmeticError("LLL did not converge")
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                B[k] -= q * B[j]
                U[k] = U[k] - q * U[j]
                Bs, mu = gso(B)
        lhs = Bs[k] @ Bs[k]
        rhs = (delta - mu[k, k - 1] ** 2) * (Bs[k - 1] @ Bs[k - 1])
        if lhs >= rhs:
            k += 1
        else:
            B[[k, k - 1]] = B[[k - 1, k]]
            U[[k, k - 1]] = U[[k - 1, k]]
            Bs, mu = gso(B)
            k = max(k - 1, 1)
    return B, U


def box_coefficients(basis, radius, cap):
    """Integer vectors ``c`` with ``||c @ basis|| <= radius`` possibly satisfied.

    Uses ``|c_i| <= radius * ||column i of basis^-1||``; the returned array is
    a superset that callers filter.
    """
    B = np.asarray(basis, dtype=float)
    Binv = np.linalg.inv(B)
    bound = radius * np.sqrt(np.sum(Binv ** 2, axis=0))
    m = [int(math.floor(b * (1 + 1e-9) + 1e-9)) for b in bound]
    needed = 1
    for mi in m:
        needed *= 2 * mi + 1
    if needed > cap:
        raise EnumerationCapError(needed, cap)
    axes = [np.arange(-mi, mi + 1) for mi in m]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def small_combinations(n, radius=1):
    return np.array(list(product(range(-radius, radius + 1), repeat=n)))
