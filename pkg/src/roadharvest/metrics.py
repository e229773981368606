"""Throughput, RF energy density and energy efficiency of the cycle policy.

``psi(k)`` is the expected number of transmissions in a cycle that starts
with ``k`` quanta in the battery. Throughput weights it by the stationary
battery distribution and the cycle rate ``v0 / E[d_v]``.

Integrals over harvested energy are carried out in units of ``E_tx`` so the
quadrature tolerance reads directly in packets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .battery import (
    QuantizedPmf,
    TransitionMatrix,
    harvest_quanta_pmf,
    post_harvest_pmf,
    steady_state,
    tp_quanta_pmf,
    transition_matrix,
)
from .energy_cdf import EnergyCdf, NumericalError, energy_cdf
from .scenario import Derived, Platoon, Poisson, Scenario, decoding_probability

__all__ = [
    "ThroughputResult",
    "EfficiencyResult",
    "psi_general",
    "psi_poisson",
    "psi_platoon",
    "throughput",
    "energy_density",
    "efficiency",
]

QUAD_TOL = 1e-6  # absolute, per unit of N_s, on psi


@dataclass(frozen=True)
class ThroughputResult:
    theta_pkt: float
    psi: np.ndarray
    pi: QuantizedPmf
    p_E: QuantizedPmf
    p_T: QuantizedPmf
    chain: TransitionMatrix
    phi_s: float
    ell: float
    S: float
    traffic: str

    @property
    def theta_bits(self) -> float:
        return self.S * self.theta_pkt

    @property
    def theta_kbit(self) -> float:
        return self.theta_bits / 1e3

    @property
    def p_hat_B(self) -> QuantizedPmf:
        return post_harvest_pmf(self.pi, self.p_E)


@dataclass(frozen=True)
class EfficiencyResult:
    epsilon: float  # W
    upsilon: float  # bit/J


_GL_LO = np.polynomial.legendre.leggauss(16)
_GL_HI = np.polynomial.legendre.leggauss(24)


def _gauss_cells(h, a: np.ndarray, b: np.ndarray):
    """Gauss-Legendre integrals over ``[a_i, b_i]`` at two orders, in one call to ``h``."""
    nodes = np.concatenate([_GL_LO[0], _GL_HI[0]])
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    vals = np.asarray(h((mid[:, None] + half[:, None] * nodes).ravel()), dtype=float).reshape(len(a), -1)
    n = len(_GL_LO[0])
    lo = half * (vals[:, :n] @ _GL_LO[1])
    hi = half * (vals[:, n:] @ _GL_HI[1])
    return hi, np.abs(hi - lo)


def _quanta_integrals(h: Callable[[np.ndarray], np.ndarray], limits, tol: float) -> np.ndarray:
    """``int_0^a h(u) du`` for every ``a`` in ``limits`` (quanta units).

    ``h`` must accept an array. The integral is accumulated over unit
    lattice cells plus one fractional remainder per limit. A fixed
    Gauss-Legendre pair handles the smooth case in a single vectorised call;
    adaptive quadrature takes over when the two orders disagree.
    """
    limits = np.asarray(limits, dtype=float)
    if np.any(limits < 0):
        raise ValueError("integration limits must be non-negative")
    n_cells = int(math.ceil(limits.max())) if limits.size else 0
    base = np.minimum(np.floor(limits + 1e-9), limits)
    frac = limits - base
    part = frac > 1e-12
    if n_cells or part.any():
        a = np.concatenate([np.arange(n_cells, dtype=float), base[part]])
        b = np.concatenate([np.arange(1, n_cells + 1, dtype=float), limits[part]])
        vals, err = _gauss_cells(h, a, b)
        if err.max(initial=0.0) <= tol:
            cum = np.concatenate([[0.0], np.cumsum(vals[:n_cells])])
            out = cum[base.astype(int)]
            out[part] += vals[n_cells:]
            return out
    return _adaptive_quanta_integrals(h, limits, n_cells, tol)


def _adaptive_quanta_integrals(h, limits: np.ndarray, n_cells: int, tol: float) -> np.ndarray:
    cum = np.zeros(n_cells + 1)
    if n_cells:
        j = np.arange(n_cells)
        cells, err = integrate.quad_vec(lambda t: h(j + t), 0.0, 1.0, epsabs=tol, epsrel=0.0, norm="max")
        if err > 10 * tol:
            raise NumericalError(f"lattice quadrature error {err:g} exceeds tolerance {tol:g}")
        cum[1:] = np.cumsum(cells)
    base = np.floor(limits + 1e-9)
    base = np.minimum(base, limits)
    frac = limits - base
    out = cum[base.astype(int)]
    part = frac > 1e-12
    if part.any():
        b, f = base[part], frac[part]
        rem, err = integrate.quad_vec(lambda t: f * h(b + f * t), 0.0, 1.0, epsabs=tol, epsrel=0.0, norm="max")
        if err > 10 * tol:
            raise NumericalError(f"remainder quadrature error {err:g} exceeds tolerance {tol:g}")
        out = out.copy()
        out[part] += rem
    return out


def _ks(d: Derived, k) -> np.ndarray:
    k = np.atleast_1d(np.asarray(k if k is not None else np.arange(d.N_s + 1)))
    if np.any((k < 0) | (k > d.N_s)):
        raise ValueError(f"battery level k must lie in 0..{d.N_s}")
    return k


def psi_poisson(k, cdf: EnergyCdf, mu: float, s: Scenario) -> np.ndarray:
    """Closed form for exponential inter-vehicle gaps."""
    d = s.derived
    k = _ks(d, k)
    R = d.R(k)
    slot, E = d.slot_length, d.E_tx
    # e^{-mu y/m} with y = u*E_tx is e^{-mu u v0 T}
    # QUAD_TOL per lattice cell keeps the accumulated error below QUAD_TOL * N_s
    integral = _quanta_integrals(lambda u: (1.0 - cdf(u * E)) * np.exp(-mu * u * slot), d.N_s - k, QUAD_TOL)
    return (np.exp(-2.0 * d.ell * mu) - np.exp(-mu * R)) / (mu * slot) + np.exp(-mu * R) * integral


def psi_platoon(k, cdf: EnergyCdf, d0: float, s: Scenario) -> np.ndarray:
    """Four-branch closed form for a fixed inter-vehicle distance ``d0``."""
    d = s.derived
    k = _ks(d, k).astype(float)
    slot = d.slot_length
    n_T = (d0 - 2.0 * d.ell) / slot  # transmit-phase slots, possibly fractional
    if d0 < 2.0 * d.ell:
        return np.zeros_like(k)
    R, W = d.R(k), d.W
    upper = np.where(d0 >= W, d.N_s - k, np.clip(n_T - k, 0.0, None))
    integral = _quanta_integrals(lambda u: 1.0 - cdf(u * d.E_tx), upper, QUAD_TOL)
    return np.where(d0 < R, n_T, k + integral)


def psi_general(
    k,
    cdf: EnergyCdf,
    F_D: Callable,
    s: Scenario,
    breakpoints: Sequence[float] = (),
) -> np.ndarray:
    """Generic expression for an arbitrary inter-vehicle distance CDF ``F_D``.

    ``breakpoints`` lists distances [m] where ``F_D`` is not smooth.
    """
    d = s.derived
    k = _ks(d, k)
    slot, E, N_s = d.slot_length, d.E_tx, d.N_s
    tol = QUAD_TOL * N_s
    lo, hi = 2.0 * d.ell, d.W
    pts = [p for p in breakpoints if lo < p < hi]
    first, err = integrate.quad(
        lambda y: float(F_D(y)), lo, hi, epsabs=tol * slot / 2, epsrel=0.0, points=pts or None, limit=200
    )
    if err > tol * slot:
        raise NumericalError(f"quadrature of F_D did not converge (error {err:g})")
    first /= slot
    span = (N_s - k).astype(float)
    R = d.R(k)

    def integrand(t):
        u = span * t
        return span * np.asarray(cdf(u * E)) * (1.0 - np.asarray(F_D(u * slot + R)))

    # pieces between breakpoints of F_D(u v0T + R), mapped onto t for every k
    second = np.zeros(len(k))
    if np.any(span > 0):
        cuts = set()
        for p in breakpoints:
            with np.errstate(divide="ignore", invalid="ignore"):
                tp = (p - R) / (span * slot)
            cuts.update(float(v) for v in tp[np.isfinite(tp)] if 0.0 < v < 1.0)
        t_breaks = sorted({0.0, 1.0} | cuts)
        for a, b in zip(t_breaks[:-1], t_breaks[1:]):
            part, err = integrate.quad_vec(integrand, a, b, epsabs=tol / 2, epsrel=0.0, norm="max", limit=500)
            if err > tol:
                raise NumericalError(f"quadrature of the energy term did not converge (error {err:g})")
            second += part
    return N_s - first - second


def _psi(s: Scenario, cdf: EnergyCdf) -> np.ndarray:
    tr = s.traffic
    if isinstance(tr, Platoon):
        return psi_platoon(None, cdf, tr.d0, s)
    if isinstance(tr, Poisson) and tr.d_min == 0.0:
        return psi_poisson(None, cdf, tr.mu, s)
    return psi_general(None, cdf, tr.cdf, s, breakpoints=(tr.d_min,) if tr.d_min else ())


def throughput(s: Scenario, cdf: EnergyCdf | None = None) -> ThroughputResult:
    """Long-run delivered packets per second under the cycle policy."""
    d = s.derived
    cdf = energy_cdf(s) if cdf is None else cdf
    p_E = harvest_quanta_pmf(cdf, d)
    p_T = tp_quanta_pmf(s.traffic, d, s.ell)
    chain = transition_matrix(p_E, p_T, d)
    pi = steady_state(chain)
    psi = _psi(s, cdf)
    phi = decoding_probability(s)
    theta = phi * s.v0 / s.traffic.mean_distance * float(pi.values @ psi)
    return ThroughputResult(
        theta_pkt=theta,
        psi=psi,
        pi=pi,
        p_E=p_E,
        p_T=p_T,
        chain=chain,
        phi_s=phi,
        ell=s.ell,
        S=s.S,
        traffic=s.traffic.name,
    )


def energy_density(s: Scenario) -> float:
    """Average RF power [W] reaching the EHD from the whole vehicle stream."""
    a = s.alpha
    if a <= 1:
        raise ValueError(f"energy density diverges for alpha <= 1 (alpha={a})")
    mean_d = s.traffic.mean_distance
    if a == 3.0:
        return 2.0 * s.Pv / (s.w_off**2 * mean_d)
    shape = math.exp(math.lgamma((a - 1.0) / 2.0) - math.lgamma(a / 2.0))
    return s.Pv / mean_d * math.sqrt(math.pi) * s.w_off ** (1.0 - a) * shape


def efficiency(s: Scenario, theta: ThroughputResult | float) -> EfficiencyResult:
    """Delivered bits per joule of incident RF energy."""
    eps = energy_density(s)
    if eps <= 0:
        raise ValueError("energy density must be positive")
    theta_pkt = theta.theta_pkt if isinstance(theta, ThroughputResult) else float(theta)
    return EfficiencyResult(epsilon=eps, upsilon=s.S * theta_pkt / eps)
