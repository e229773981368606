"""Per-cycle black-out probability for platoon traffic.

A black-out is a silent window (no decoded packet) of at least ``x - 1``
slots, ``x = round(Qs / T)``. The harvest phase is always silent; the rest
of the window comes either from an energy outage at the end of the
transmit phase or from a run of failed decodings.

The run combinatorics accept ``fractions.Fraction`` probabilities and then
return exact rationals, which is what the tests compare against brute-force
enumeration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy.special import gammaln

from .battery import QuantizedPmf
from .scenario import Platoon, Scenario, ScenarioError

__all__ = [
    "BlackoutQuery",
    "blackout_query",
    "runs_given_k",
    "run_failure_prob",
    "blackout_probability",
]

LOG_SPACE_ABOVE = 60


def _comb(n: int, k: int) -> int:
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def _log_comb(n: int, k: int) -> float:
    if n < 0 or k < 0 or k > n:
        return -math.inf
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def runs_given_k(L: int, j: int, k: int, exact: bool = False):
    """Probability that the longest success run is exactly ``j``.

    Conditioned on ``k`` successes placed uniformly among ``L`` attempts.
    Only ``j >= L/2`` is covered: a run that long is necessarily unique,
    which is what makes the counting below exact.

    Parameters
    ----------
    L, j, k : int
        Attempts, run length, number of successes.
    exact : bool
        Return a :class:`fractions.Fraction` instead of a float.
    """
    if L < 1:
        raise ValueError(f"need at least one attempt, got L={L}")
    if not 0 <= k <= L:
        raise ValueError(f"k={k} outside 0..{L}")
    if not (2 * j >= L and j <= L):
        raise ValueError(f"run length j={j} outside the valid range [{L}/2, {L}]")
    one = Fraction(1) if exact else 1.0
    if k == L:
        return one if j == L else 0 * one
    if k == L - 1:
        # one failure at position p: runs p and L-1-p
        hits = sum(1 for p in range(L) if max(p, L - 1 - p) == j)
        return Fraction(hits, L) if exact else hits / L
    if exact or L <= LOG_SPACE_ABOVE:
        num = 2 * _comb(L - j - 1, k - j) + (L - j - 1) * _comb(L - j - 2, k - j)
        return Fraction(num, math.comb(L, k)) if exact else num / math.comb(L, k)
    # boundary placements (2) and interior placements (L-j-1), both flanked by failures
    logs = [math.log(2.0) + _log_comb(L - j - 1, k - j)]
    if L - j - 1 > 0:
        logs.append(math.log(L - j - 1) + _log_comb(L - j - 2, k - j))
    top = max(logs)
    if top == -math.inf:
        return 0.0
    log_num = top + math.log(sum(math.exp(v - top) for v in logs))
    return min(1.0, math.exp(log_num - _log_comb(L, k)))


def run_failure_prob(run_len: int, q):
    """Probability of a run of at least ``run_len`` events in ``2*run_len`` trials.

    Each trial is an independent event with probability ``q``. Passing a
    :class:`fractions.Fraction` for ``q`` gives an exact result.
    """
    if run_len < 1:
        raise ValueError(f"run length must be >= 1, got {run_len}")
    exact = isinstance(q, Rational)
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    n = 2 * run_len
    if exact:
        q = Fraction(q)
        total = Fraction(0)
        for k in range(run_len, n + 1):
            weight = math.comb(n, k) * q**k * (1 - q) ** (n - k)
            total += weight * sum(runs_given_k(n, j, k, exact=True) for j in range(run_len, k + 1))
        return total
    q = float(q)
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    ks = np.arange(run_len, n + 1)
    if n > LOG_SPACE_ABOVE:
        log_c = gammaln(n + 1) - gammaln(ks + 1) - gammaln(n - ks + 1)
        binom = np.exp(log_c + ks * math.log(q) + (n - ks) * math.log1p(-q))
    else:
        binom = np.array([math.comb(n, int(k)) for k in ks], dtype=float) * q**ks * (1 - q) ** (n - ks)
    tail = np.array([sum(runs_given_k(n, j, int(k)) for j in range(run_len, int(k) + 1)) for k in ks])
    return float(min(1.0, binom @ tail))


@dataclass(frozen=True)
class BlackoutQuery:
    """Geometry of one black-out evaluation, all in slots.

    ``x`` is the AoI threshold, ``N`` the cycle length, ``N_H`` the harvest
    phase and ``N_s`` the battery capacity in quanta.
    """

    Qs: float
    x: int
    N: int
    N_H: int
    N_s: int

    def __post_init__(self):
        if self.x < 1:
            raise ValueError(f"threshold must span at least one slot, got x={self.x}")
        if self.N <= self.N_H:
            raise ValueError(f"cycle of {self.N} slots leaves no transmit phase after {self.N_H} harvest slots")

    @property
    def N_T(self) -> int:
        return self.N - self.N_H


def blackout_query(s: Scenario, Qs: float) -> BlackoutQuery:
    """Build the query for a platoon scenario and AoI threshold ``Qs`` [s]."""
    if not isinstance(s.traffic, Platoon):
        raise ScenarioError("black-out analysis is only available for platoon traffic", "traffic")
    if not Qs > 0:
        raise ScenarioError(f"Qs must be positive, got {Qs}", "Qs")
    d = s.derived
    N = int(round(s.traffic.d0 / d.slot_length))
    return BlackoutQuery(Qs=Qs, x=int(round(Qs / s.T)), N=N, N_H=d.N_H, N_s=d.N_s)


def blackout_probability(query: BlackoutQuery, p_hat_B: QuantizedPmf, phi_s: float) -> float:
    """Probability that a cycle contains a black-out.

    ``p_hat_B`` is the battery level (quanta) right after the harvest phase.
    A cycle that starts the transmit phase with ``i`` quanta sends
    ``min(i, N_T)`` packets.
    """
    if len(p_hat_B) != query.N_s + 1:
        raise ValueError("p_hat_B does not match the battery size of the query")
    if not 0 <= phi_s <= 1:
        raise ValueError(f"decoding probability must lie in [0, 1], got {phi_s}")
    x, N = query.x, query.N
    if x <= query.N_H:
        return 1.0
    q = 1.0 - phi_s
    cond = np.ones(query.N_s + 1)
    for i in range(query.N_s + 1):
        if i <= N - x + 1:
            continue
        run = min(i, query.N_T) - N + x - 1
        cond[i] = 1.0 if run < 1 else run_failure_prob(run, q)
    return float(np.clip(p_hat_B.values @ cond, 0.0, 1.0))
