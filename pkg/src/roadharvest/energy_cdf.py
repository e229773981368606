"""Distribution of the energy harvested during one harvest phase.

During the harvest phase the passing vehicle crosses ``L`` road segments of
length ``v0*T``; in segment ``i`` the EHD collects ``X_i / lambda_i`` joules,
with ``X_i`` the unit-mean fading power gain. Three constructors produce an
:class:`EnergyCdf` for the total ``E_h = sum_i X_i / lambda_i``:

* :func:`saddle_cdf` -- Lugannani-Rice saddle-point approximation (Rician);
* :func:`rayleigh_cdf` -- exact hypoexponential convolution (Rayleigh);
* :func:`empirical_cdf` -- Monte Carlo reference.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import elementwise

from .scenario import FadingModel, Rayleigh, Rician, Scenario

__all__ = [
    "SegmentRates",
    "EnergyCdf",
    "SaddlepointCdf",
    "HypoexpCdf",
    "EmpiricalCdf",
    "NumericalError",
    "segment_rates",
    "cgf_and_derivatives",
    "saddle_cdf",
    "rayleigh_cdf",
    "empirical_cdf",
    "energy_cdf",
    "sample_cycle_energy",
    "accuracy_metric",
    "ks_distance",
]

MEAN_WINDOW = 1e-6  # relative distance to the mean below which the LR limit is used
DEGENERATE_RATES = 1e-9


class NumericalError(ArithmeticError):
    """A numerical routine failed (root bracketing, quadrature, convergence)."""


@dataclass(frozen=True)
class SegmentRates:
    """Inverse mean energies ``lambda_i`` [1/J] of the harvest-phase segments."""

    lam: np.ndarray

    @property
    def L(self) -> int:
        return len(self.lam)

    @property
    def mean(self) -> float:
        return float(np.sum(1.0 / self.lam))

    def lam_hat(self, kappa: float) -> np.ndarray:
        return 2.0 * (kappa + 1.0) * self.lam

    def variance(self, kappa: float) -> float:
        return float(np.sum((1.0 + 2.0 * kappa) / ((1.0 + kappa) ** 2 * self.lam**2)))


def segment_rates(s: Scenario) -> SegmentRates:
    """Rates at the segment midpoints ``(i + 1/2) v0 T - ell``, ``i = 0..L-1``."""
    d = s.derived
    if d.L < 2 or d.L % 2:
        raise ValueError(f"harvest phase must span an even number of slots >= 2, got L={d.L}")
    i = np.arange(d.L)
    x = (i + 0.5) * d.slot_length - s.ell
    # mirror the second half so lambda_i == lambda_{L-1-i} holds bit-for-bit
    x = np.where(i < d.L // 2, x, -x[::-1])
    lam = (s.w_off**2 + x**2) ** (s.alpha / 2.0) / (s.eta * s.Pv * s.T)
    lam.setflags(write=False)
    return SegmentRates(lam)


# --------------------------------------------------------------------------
# cumulant generating function
# --------------------------------------------------------------------------


def cgf_and_derivatives(rates: SegmentRates, kappa: float, t):
    """Return ``(K(t), K'(t), K''(t))`` of the harvested energy.

    ``t`` may be an array; it must lie below ``min(lambda_hat) / 2``.
    """
    lam_hat = rates.lam_hat(kappa)
    t = np.asarray(t, dtype=float)
    if np.any(t >= lam_hat.min() / 2.0):
        raise ValueError(f"t must be below {lam_hat.min() / 2.0:g} (domain of the MGF)")
    a = lam_hat - 2.0 * t[..., None]
    K = np.sum(-np.log1p(-2.0 * t[..., None] / lam_hat) + 2.0 * kappa * t[..., None] / a, axis=-1)
    K1 = np.sum(2.0 / a * (1.0 + kappa * lam_hat / a), axis=-1)
    K2 = np.sum(4.0 / a**2 * (1.0 + 2.0 * kappa * lam_hat / a), axis=-1)
    return K, K1, K2


def _k1(z, lam_hat, kappa):
    a = lam_hat - 2.0 * z[..., None]
    return np.sum(2.0 / a * (1.0 + kappa * lam_hat / a), axis=-1)


def _legendre_half(r):
    """``r/(1-r) + log(1-r)`` without cancellation near ``r = 0``."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-3
    rs = np.where(small, r, 0.0)
    series = rs**2 * (1 / 2 + rs * (2 / 3 + rs * (3 / 4 + rs * (4 / 5 + rs * 5 / 6))))
    rb = np.where(small, 0.5, r)
    direct = rb / (1.0 - rb) + np.log1p(-rb)
    return np.where(small, series, direct)


# --------------------------------------------------------------------------
# CDF objects
# --------------------------------------------------------------------------


class EnergyCdf:
    """Evaluable CDF of the per-cycle harvested energy (joules).

    Subclasses implement :meth:`_raw`; values are clamped to ``[0, 1]`` and
    ``F(x) = 0`` for ``x <= 0``.
    """

    kind: str = ""

    def __init__(self, rates: SegmentRates):
        self.rates = rates

    @property
    def mean(self) -> float:
        return self.rates.mean

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x > 0
        if np.any(pos):
            out[pos] = np.clip(self._raw(x[pos]), 0.0, 1.0)
        return out if out.ndim else float(out)

    cdf = __call__

    def sf(self, x):
        return 1.0 - np.asarray(self(x))

    def _raw(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} L={self.rates.L} mean={self.mean:.4g} J>"


class SaddlepointCdf(EnergyCdf):
    """Lugannani-Rice approximation for Rician fading with Rice factor ``kappa``."""

    kind = "saddle_rician"

    def __init__(self, rates: SegmentRates, kappa: float):
        super().__init__(rates)
        self.kappa = float(kappa)
        self._lam_hat = rates.lam_hat(self.kappa)
        self._zmax = self._lam_hat.min() / 2.0
        lh = self._lam_hat
        k2 = np.sum(4.0 * (1.0 + 2.0 * self.kappa) / lh**2)
        k3 = np.sum((16.0 + 48.0 * self.kappa) / lh**3)
        self._at_mean = 0.5 + k3 / (6.0 * math.sqrt(2.0 * math.pi) * k2**1.5)

    def saddlepoint(self, x) -> np.ndarray:
        """Solve ``K'(z) = x`` for each positive ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lam_hat, kappa = self._lam_hat, self.kappa
        L = self.rates.L
        lo = -2.0 * L * (1.0 + kappa) / x  # K'(lo) <= x/2
        j = np.ones(x.shape)
        hi = self._zmax * (1.0 - 2.0**-j)
        for _ in range(200):
            short = _k1(hi, lam_hat, kappa) <= x
            if not short.any():
                break
            j[short] += 1.0
            hi = self._zmax * (1.0 - 2.0**-j)
        else:
            raise NumericalError(
                f"saddle-point bracketing failed: K' below x={x[short].max():g} J up to the pole"
            )
        res = elementwise.find_root(lambda z, xx: _k1(z, lam_hat, kappa) - xx, (lo, hi), args=(x,))
        if not np.all(res.success):
            bad = ~res.success
            raise NumericalError(
                f"saddle-point root search failed at {bad.sum()} point(s), e.g. x={x[bad][0]:g} J "
                f"(status {res.status[bad][0]})"
            )
        return res.x

    def _raw(self, x):
        out = np.empty(x.shape)
        near = np.abs(x - self.mean) <= MEAN_WINDOW * self.mean
        out[near] = self._at_mean
        xs = x[~near]
        if xs.size:
            z = self.saddlepoint(xs)
            lam_hat, kappa = self._lam_hat, self.kappa
            r = 2.0 * z[:, None] / lam_hat
            # z*x - K(z), summed term by term so no cancellation occurs
            excess = np.sum(_legendre_half(r) + kappa * (r / (1.0 - r)) ** 2, axis=1)
            u = np.sign(z) * np.sqrt(2.0 * excess)
            a = lam_hat - 2.0 * z[:, None]
            k2 = np.sum(4.0 / a**2 * (1.0 + 2.0 * kappa * lam_hat / a), axis=1)
            v = z * np.sqrt(k2)
            out[~near] = stats.norm.cdf(u) + stats.norm.pdf(u) * (1.0 / u - 1.0 / v)
        return out


class HypoexpCdf(EnergyCdf):
    """Exact CDF under Rayleigh fading.

    Each half of the harvest phase is a hypoexponential sum with distinct
    rates; the two halves are identically distributed, and the full-cycle
    CDF is their self-convolution in closed form.
    """

    kind = "hypoexp_rayleigh"

    def __init__(self, rates: SegmentRates):
        super().__init__(rates)
        lam = np.asarray(rates.lam[: rates.L // 2], dtype=float)
        # work in units of the smallest rate; F is invariant under lam -> lam/c, x -> c*x
        self._scale = lam.min()
        lam = lam / self._scale
        self._lam = lam
        n = len(lam)
        diff = lam[None, :] - lam[:, None]  # diff[i, k] = lam_k - lam_i
        offdiag = ~np.eye(n, dtype=bool)
        log_abs_Lam = np.array([np.sum(np.log(np.abs(diff[i][offdiag[i]]))) for i in range(n)])
        sign_Lam = np.array([np.prod(np.sign(diff[i][offdiag[i]])) for i in range(n)])
        log_A = 2.0 * np.sum(np.log(lam))
        # self term: A e^{-l_i x}(1 + l_i x) / (l_i^2 Lam_i^2)
        self._c_self = np.exp(log_A - 2.0 * np.log(lam) - 2.0 * log_abs_Lam)
        # cross term (i != j): A (e^{-l_j x}/l_j - e^{-l_i x}/l_i) / ((l_i - l_j) Lam_i Lam_j)
        with np.errstate(divide="ignore"):
            log_abs_d = np.log(np.abs(-diff))
        c = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    sgn = np.sign(lam[i] - lam[j]) * sign_Lam[i] * sign_Lam[j]
                    c[i, j] = sgn * np.exp(log_A - log_abs_d[i, j] - log_abs_Lam[i] - log_abs_Lam[j])
        self._c_cross = c

    def _raw(self, x):
        xs = x[:, None] * self._scale
        lam = self._lam
        e = np.exp(-lam * xs)  # (n_x, n)
        e_over = e / lam
        total = e * (1.0 + lam * xs) @ self._c_self
        # sum_{i != j} c_ij (e_j/l_j - e_i/l_i)
        total += np.einsum("ij,xj->x", self._c_cross, e_over) - np.einsum("ij,xi->x", self._c_cross, e_over)
        return 1.0 - total


class EmpiricalCdf(EnergyCdf):
    """Step CDF of Monte Carlo samples of ``E_h``."""

    kind = "empirical"

    def __init__(self, rates: SegmentRates, samples: np.ndarray):
        super().__init__(rates)
        self.samples = np.sort(np.asarray(samples, dtype=float))
        self.samples.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def sample_mean(self) -> float:
        return float(self.samples.mean())

    def _raw(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.n

    def quantile(self, p):
        return np.quantile(self.samples, p)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------


def saddle_cdf(rates: SegmentRates, kappa: float) -> SaddlepointCdf:
    if rates.L < 2:
        raise ValueError("saddle-point CDF needs at least two segments")
    return SaddlepointCdf(rates, kappa)


def _rates_degenerate(lam: np.ndarray) -> bool:
    if len(lam) < 2:
        return False
    srt = np.sort(lam)
    return bool(np.any(np.diff(srt) <= DEGENERATE_RATES * srt[1:]))


def rayleigh_cdf(rates: SegmentRates, *, fallback_draws: int = 10**6, seed: int = 0) -> EnergyCdf:
    """Hypoexponential CDF for Rayleigh fading.

    If two rates within a half coincide to relative ``1e-9`` the closed form
    is ill-conditioned; an empirical CDF is returned instead, with a warning.
    """
    half = rates.lam[: rates.L // 2]
    if _rates_degenerate(half):
        warnings.warn(
            "near-equal segment rates make the hypoexponential form unstable; "
            "falling back to the empirical CDF",
            RuntimeWarning,
            stacklevel=2,
        )
        return empirical_cdf(rates, Rayleigh(), fallback_draws, seed)
    return HypoexpCdf(rates)


def sample_cycle_energy(
    rates: SegmentRates, fading: FadingModel, n: int, rng: np.random.Generator, chunk: int = 100_000
) -> np.ndarray:
    """Draw ``n`` independent harvest-phase energies [J]."""
    inv = 1.0 / rates.lam
    out = np.empty(n)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        out[start:stop] = fading.power_gain((stop - start, rates.L), rng) @ inv
    return out


def empirical_cdf(rates: SegmentRates, fading: FadingModel, n_draws: int, seed) -> EmpiricalCdf:
    if n_draws < 10_000:
        raise ValueError(f"empirical CDF needs at least 10^4 draws, got {n_draws}")
    rng = np.random.default_rng(seed)
    return EmpiricalCdf(rates, sample_cycle_energy(rates, fading, n_draws, rng))


def energy_cdf(s: Scenario) -> EnergyCdf:
    """Analytic CDF matching the scenario's fading model."""
    rates = segment_rates(s)
    if isinstance(s.fading, Rayleigh):
        return rayleigh_cdf(rates)
    return saddle_cdf(rates, s.fading.kappa)


# --------------------------------------------------------------------------
# comparison helpers
# --------------------------------------------------------------------------


def accuracy_metric(
    analytic: EnergyCdf,
    empirical: EmpiricalCdf,
    prob_range: tuple[float, float] | None = None,
    *,
    tail: str = "cdf",
    reduce: str = "mean",
) -> float:
    """Relative discrepancy of ``analytic`` against ``empirical``.

    Evaluated at the empirical sample points whose empirical CDF lies strictly
    inside ``prob_range``. With ``tail="cdf"`` the error at each point is
    ``|F - Fe| / Fe`` and the default range is (0.001, 0.5); with
    ``tail="ccdf"`` it is ``|F - Fe| / (1 - Fe)`` over (0.5, 0.999).
    ``reduce`` selects the mean (default) or the maximum over those points.
    """
    if tail not in ("cdf", "ccdf"):
        raise ValueError(f"tail must be 'cdf' or 'ccdf', got {tail!r}")
    if prob_range is None:
        prob_range = (0.001, 0.5) if tail == "cdf" else (0.5, 0.999)
    lo, hi = prob_range
    xs = empirical.samples
    n = empirical.n
    fe = np.arange(1, n + 1) / n
    # collapse ties onto the last copy so fe is the right-continuous CDF value
    keep = np.r_[xs[1:] != xs[:-1], True]
    xs, fe = xs[keep], fe[keep]
    sel = (fe > lo) & (fe < hi)
    if not sel.any():
        raise ValueError(f"no empirical support inside probability range {prob_range}")
    xs, fe = xs[sel], fe[sel]
    if len(xs) > 4000:  # thin uniformly in probability; every retained point is still exact
        idx = np.unique(np.linspace(0, len(xs) - 1, 4000).round().astype(int))
        xs, fe = xs[idx], fe[idx]
    fa = np.asarray(analytic(xs))
    denom = fe if tail == "cdf" else 1.0 - fe
    err = np.abs(fa - fe) / denom
    if reduce == "mean":
        return float(err.mean())
    if reduce == "max":
        return float(err.max())
    raise ValueError(f"reduce must be 'mean' or 'max', got {reduce!r}")


def ks_distance(a: EnergyCdf, b: EnergyCdf, grid=None) -> float:
    """Sup-distance between two CDFs on ``grid`` (default: the empirical support)."""
    if grid is None:
        pts = [c.samples for c in (a, b) if isinstance(c, EmpiricalCdf)]
        grid = np.concatenate(pts) if pts else np.linspace(0, 4 * a.mean, 4001)
    grid = np.asarray(grid)
    d = np.abs(np.asarray(a(grid)) - np.asarray(b(grid)))
    # left limits matter for step functions
    d_left = np.abs(np.asarray(a(np.nextafter(grid, -np.inf))) - np.asarray(b(np.nextafter(grid, -np.inf))))
    return float(max(d.max(), d_left.max()))
