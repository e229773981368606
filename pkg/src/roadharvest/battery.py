"""Quantized battery Markov chain.

The battery level at the start of a cycle is measured in packet energies
``E_tx`` and takes values ``0..N_s``. One cycle adds the harvested quanta
(clipped at ``N_s``) and removes one quantum per transmit-phase slot
(floored at 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .energy_cdf import EnergyCdf, NumericalError
from .scenario import Derived, Platoon, Poisson, TrafficModel

__all__ = [
    "QuantizedPmf",
    "TransitionMatrix",
    "harvest_quanta_pmf",
    "tp_quanta_pmf",
    "transition_matrix",
    "steady_state",
    "post_harvest_pmf",
]

PMF_TOL = 1e-10
ROW_TOL = 1e-9


@dataclass(frozen=True)
class QuantizedPmf:
    """Probability mass over battery quanta ``0..N_s``.

    ``role`` is one of ``p_E``, ``p_T``, ``p_B``, ``p_hat_B``, ``pi``.
    """

    values: np.ndarray
    role: str
    reducible: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 1:
            raise ValueError("pmf must be a non-empty vector")
        if np.any(v < -PMF_TOL) or abs(v.sum() - 1.0) > PMF_TOL:
            raise ValueError(f"{self.role}: not a pmf (min {v.min():g}, sum {v.sum():.12g})")
        v = np.clip(v, 0.0, None)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N_s(self) -> int:
        return len(self.values) - 1

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def mean(self) -> float:
        return float(np.arange(len(self.values)) @ self.values)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.values)

    @classmethod
    def unit(cls, k: int, N_s: int, role: str) -> "QuantizedPmf":
        v = np.zeros(N_s + 1)
        v[k] = 1.0
        return cls(v, role)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic ``(N_s+1) x (N_s+1)`` matrix; ``M[i, j] = P(j | i)``."""

    M: np.ndarray
    post_harvest: np.ndarray = field(repr=False)  # B[i, m] = P(level m after harvest | start i)

    @property
    def N_s(self) -> int:
        return self.M.shape[0] - 1


def harvest_quanta_pmf(cdf: EnergyCdf, d: Derived) -> QuantizedPmf:
    """Number of whole quanta harvested in one cycle, saturating at ``N_s``."""
    if d.N_s < 1:
        raise ValueError("battery must hold at least one quantum")
    F = np.asarray(cdf(np.arange(d.N_s + 1) * d.E_tx), dtype=float)
    F = np.maximum.accumulate(F)  # guard against approximation wiggle
    p = np.empty(d.N_s + 1)
    p[:-1] = np.diff(F)
    p[-1] = 1.0 - F[-1]
    return QuantizedPmf(p, "p_E")


def tp_quanta_pmf(traffic: TrafficModel, d: Derived, ell: float | None = None) -> QuantizedPmf:
    """Number of transmit-phase slots in one cycle, capped at ``N_s``."""
    ell = d.ell if ell is None else ell
    N_s, slot = d.N_s, d.slot_length
    if isinstance(traffic, Platoon):
        if traffic.d0 < 2.0 * ell:
            k = 0
        else:
            k = math.floor(min(traffic.d0 - 2.0 * ell, N_s * slot) / slot + 1e-9)
            k = min(max(k, 0), N_s)
        return QuantizedPmf.unit(k, N_s, "p_T")
    edges = traffic.cdf(2.0 * ell + np.arange(N_s) * slot)  # F_D(2l + k v0T), k = 0..N_s-1
    p = np.empty(N_s + 1)
    p[0] = edges[0]
    p[1:N_s] = np.diff(edges)
    p[N_s] = 1.0 - edges[-1]
    return QuantizedPmf(p, "p_T")


def _post_harvest_kernel(p_E: np.ndarray) -> np.ndarray:
    n = len(p_E)
    B = np.zeros((n, n))
    tail = np.cumsum(p_E[::-1])[::-1]  # tail[h] = P(harvest >= h)
    for i in range(n):
        B[i, i : n - 1] = p_E[: n - 1 - i]
        B[i, n - 1] = tail[n - 1 - i]
    return B


def transition_matrix(p_E: QuantizedPmf, p_T: QuantizedPmf, d: Derived | None = None) -> TransitionMatrix:
    """Battery chain from the harvest and transmit-phase quanta distributions."""
    if len(p_E) != len(p_T):
        raise ValueError("p_E and p_T must cover the same quanta range")
    n = len(p_E)
    B = _post_harvest_kernel(p_E.values)
    pt = p_T.values
    # D[m, j]: from m quanta after harvesting to j after the transmit phase
    D = np.zeros((n, n))
    for m in range(n):
        D[m, 1 : m + 1] = pt[m - 1 :: -1][:m]
        D[m, 0] = pt[m:].sum()
    M = B @ D
    dev = np.abs(M.sum(axis=1) - 1.0).max()
    if dev > ROW_TOL:
        raise NumericalError(f"transition matrix rows deviate from 1 by {dev:g}")
    return TransitionMatrix(M, B)


def _closed_classes(M: np.ndarray) -> int:
    adj = M > 0
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    closed = 0
    for c in range(n_comp):
        members = labels == c
        if not np.any(adj[np.ix_(members, ~members)]):
            closed += 1
    return closed


def steady_state(tm: TransitionMatrix | np.ndarray, tol: float = 1e-12, max_iter: int = 10**6) -> QuantizedPmf:
    """Stationary distribution by power iteration from the uniform vector.

    Iterating ``(I + M)/2`` instead of ``M`` keeps periodic chains from
    oscillating; convergence is judged on ``||pi M - pi||_1``.

    Chains with several closed classes have no unique stationary law; the
    limit reached from the uniform start is returned and ``reducible`` set.
    """
    M = tm.M if isinstance(tm, TransitionMatrix) else np.asarray(tm, dtype=float)
    n = M.shape[0]
    # iterate the lazy chain (I + M)/2: same fixed points, but aperiodic
    lazy = 0.5 * (M + np.eye(n))
    pi = np.full(n, 1.0 / n)
    resid = math.inf
    for _ in range(max_iter):
        step = pi @ M
        resid = np.abs(step - pi).sum()
        if resid < tol:
            break
        pi = pi @ lazy
        pi /= pi.sum()
    else:
        raise NumericalError(f"power iteration did not converge: residual {resid:.3g} after {max_iter} steps")
    return QuantizedPmf(pi, "pi", reducible=_closed_classes(M) > 1)


def post_harvest_pmf(p_B: QuantizedPmf, p_E: QuantizedPmf) -> QuantizedPmf:
    """Battery level right after the harvest phase (overflow folded into ``N_s``)."""
    if len(p_B) != len(p_E):
        raise ValueError("p_B and p_E must cover the same quanta range")
    return QuantizedPmf(p_B.values @ _post_harvest_kernel(p_E.values), "p_hat_B")
