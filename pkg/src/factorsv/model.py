"""Model containers, the data-generating process and conditional covariances.

Layout conventions used throughout the package:

* ``h`` has shape ``(m + r, T + 1)``; column 0 holds the initial states.
* ``f`` has shape ``(r, T)``; column ``t - 1`` is the factor at time ``t``.
* the first ``m`` volatility series are idiosyncratic, the last ``r``
  belong to the factors and have their level fixed at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelDims:
    m: int
    r: int
    T: int

    def __post_init__(self):
        if self.m < 1 or self.r < 0 or self.r > self.m or self.T < 1:
            raise ValueError(f"invalid dimensions m={self.m}, r={self.r}, T={self.T}")


class RestrictionPattern:
    """Boolean mask of free loadings cells (``True`` = free, ``False`` = fixed at 0)."""

    def __init__(self, free, kind: str = "custom"):
        free = np.array(free, dtype=bool)
        if free.ndim != 2:
            raise ValueError("restriction mask must be two-dimensional")
        free.setflags(write=False)
        self.free = free
        self.kind = kind

    @classmethod
    def lower_triangular(cls, m: int, r: int) -> "RestrictionPattern":
        return cls(np.tril(np.ones((m, r), dtype=bool)), kind="lower_triangular")

    @classmethod
    def unrestricted(cls, m: int, r: int) -> "RestrictionPattern":
        return cls(np.ones((m, r), dtype=bool), kind="unrestricted")

    @property
    def shape(self) -> tuple[int, int]:
        return self.free.shape

    def apply(self, loadings: np.ndarray) -> np.ndarray:
        """Return a copy of ``loadings`` with every restricted cell set to 0.0."""
        out = np.array(loadings, dtype=float)
        out[..., ~self.free] = 0.0
        return out

    def __eq__(self, other):
        return isinstance(other, RestrictionPattern) and np.array_equal(self.free, other.free)

    def __repr__(self):
        return f"RestrictionPattern(kind={self.kind!r}, shape={self.shape})"


@dataclass(frozen=True)
class SvParams:
    mu: float
    phi: float
    sigma: float

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise ValueError(f"persistence must lie in (-1, 1), got {self.phi}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")


@dataclass(frozen=True)
class FsvParams:
    loadings: np.ndarray
    pattern: RestrictionPattern
    sv: tuple[SvParams, ...]

    def __post_init__(self):
        lam = np.array(self.loadings, dtype=float)
        if lam.ndim != 2 or lam.shape != self.pattern.shape:
            raise ValueError("loadings shape does not match restriction pattern")
        m, r = lam.shape
        if len(self.sv) != m + r:
            raise ValueError(f"expected {m + r} SV parameter triples, got {len(self.sv)}")
        for j in range(r):
            if self.sv[m + j].mu != 0.0:
                raise ValueError("factor log-variance levels are fixed at zero")
        lam = self.pattern.apply(lam)
        lam.setflags(write=False)
        object.__setattr__(self, "loadings", lam)
        object.__setattr__(self, "sv", tuple(self.sv))

    @property
    def m(self) -> int:
        return self.loadings.shape[0]

    @property
    def r(self) -> int:
        return self.loadings.shape[1]

    def sv_array(self) -> np.ndarray:
        """SV parameters as an ``(m + r, 3)`` array of (mu, phi, sigma)."""
        return np.array([[p.mu, p.phi, p.sigma] for p in self.sv], dtype=float).reshape(-1, 3)

    @classmethod
    def from_arrays(cls, loadings, pattern: RestrictionPattern, sv) -> "FsvParams":
        sv = np.asarray(sv, dtype=float)
        return cls(np.asarray(loadings, dtype=float), pattern,
                   tuple(SvParams(float(a), float(b), float(c)) for a, b, c in sv))


@dataclass
class LatentState:
    h: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        if self.h.ndim != 2 or self.f.ndim != 2 or self.h.shape[1] != self.f.shape[1] + 1:
            raise ValueError("h must be (m + r, T + 1) and f must be (r, T)")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.f))):
            raise ValueError("latent state contains non-finite entries")

    def copy(self) -> "LatentState":
        return LatentState(self.h.copy(), self.f.copy())


@dataclass(frozen=True)
class PriorConfig:
    """Prior hyperparameters; defaults are the values used in the simulation study."""

    b_mu: float = 0.0
    B_mu: float = 100.0
    a0: float = 20.0
    b0: float = 1.5
    B_sigma: float = 1.0
    B_lambda: float = 1.0
    B0: float = 1e8

    def __post_init__(self):
        for name in ("B_mu", "a0", "b0", "B_sigma", "B_lambda", "B0"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"prior hyperparameter {name} must be positive, got {value}")
        if not np.isfinite(self.b_mu):
            raise ValueError("b_mu must be finite")


def _check_h(params: FsvParams, h_t) -> np.ndarray:
    h_t = np.asarray(h_t, dtype=float)
    if h_t.shape != (params.m + params.r,):
        raise ValueError(f"h_t must have length {params.m + params.r}")
    if not np.all(np.isfinite(h_t)):
        raise ValueError("h_t contains non-finite values")
    return h_t


def covariance_at_t(params: FsvParams, h_t) -> np.ndarray:
    """Conditional covariance ``Lambda V_t Lambda' + U_t`` of the returns at one time point."""
    h_t = _check_h(params, h_t)
    m = params.m
    lam = params.loadings
    cov = (lam * np.exp(h_t[m:])) @ lam.T
    cov[np.diag_indices(m)] += np.exp(h_t[:m])
    return 0.5 * (cov + cov.T)


def correlation_at_t(params: FsvParams, h_t) -> np.ndarray:
    cov = covariance_at_t(params, h_t)
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def simulate_fsv(dims: ModelDims, params: FsvParams, rng_seed) -> tuple[np.ndarray, LatentState]:
    """Draw returns and latent paths from the factor SV data-generating process.

    Initial log-variances come from the stationary AR(1) law. Returns the
    ``(m, T)`` return matrix and the true latent state.
    """
    m, r, T = dims.m, dims.r, dims.T
    if (params.m, params.r) != (m, r):
        raise ValueError("parameter dimensions do not match ModelDims")
    sv = params.sv_array()
    mu, phi, sigma = sv[:, 0], sv[:, 1], sv[:, 2]
    if np.any(np.abs(phi) >= 1):
        raise ValueError("stationary initial distribution requires |phi| < 1")
    rng = np.random.default_rng(rng_seed)
    n = m + r
    eta = rng.standard_normal((n, T + 1))
    h = np.empty((n, T + 1))
    h[:, 0] = mu + sigma / np.sqrt(1.0 - phi**2) * eta[:, 0]
    for t in range(1, T + 1):
        h[:, t] = mu + phi * (h[:, t - 1] - mu) + sigma * eta[:, t]
    f = np.exp(0.5 * h[m:, 1:]) * rng.standard_normal((r, T))
    eps = np.exp(0.5 * h[:m, 1:]) * rng.standard_normal((m, T))
    y = params.loadings @ f + eps
    return y, LatentState(h, f)


def table_ai_params() -> FsvParams:
    """Data-generating values of the m=10, r=2 simulation study."""
    m, r = 10, 2
    lam = np.zeros((m, r))
    lam[:, 0] = np.round(np.arange(10, 0, -1) / 10, 2)
    lam[1, 1] = 1.0
    lam[2:, 1] = np.round(np.arange(1, 9) / 10, 2)
    idio = [SvParams(round(-2.0 + 0.1 * i, 2), round(0.80 + 0.02 * i, 2), round(0.60 - 0.05 * i, 2))
            for i in range(m)]
    fac = [SvParams(0.0, 0.99, 0.10), SvParams(0.0, 0.95, 0.30)]
    return FsvParams(lam, RestrictionPattern.lower_triangular(m, r), tuple(idio + fac))
