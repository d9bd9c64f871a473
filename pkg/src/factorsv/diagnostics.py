"""Mixing diagnostics, sign identification, column ordering and posterior summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft


class DiagnosticsError(ValueError):
    pass


def _as_trace(trace, min_len: int = 2) -> np.ndarray:
    x = np.asarray(trace, dtype=float).ravel()
    if x.size < min_len:
        raise DiagnosticsError(f"trace needs at least {min_len} draws, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DiagnosticsError("trace contains non-finite values")
    return x


def _autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    # biased (divide by K) sample autocovariances via zero-padded FFT
    n = x.size
    d = x - x.mean()
    size = fft.next_fast_len(2 * n - 1)
    fx = fft.rfft(d, size)
    acov = fft.irfft(fx * np.conj(fx), size)[: max_lag + 1] / n
    return acov


def acf(trace, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag, normalized by K."""
    x = _as_trace(trace)
    if not 0 <= max_lag < x.size:
        raise DiagnosticsError(f"max_lag must lie in [0, {x.size - 1}]")
    acov = _autocovariance(x, max_lag)
    if not acov[0] > 0 or np.ptp(x) == 0:
        raise DiagnosticsError("trace is constant; autocorrelation undefined")
    rho = acov / acov[0]
    rho[0] = 1.0
    return rho


def _levinson(acov: np.ndarray, order_max: int):
    """Yule-Walker fits of every order 0..order_max.

    Returns the innovation variances per order and the coefficient vectors.
    """
    var = np.empty(order_max + 1)
    var[0] = acov[0]
    coefs = [np.empty(0)]
    a = np.empty(0)
    for k in range(1, order_max + 1):
        refl = (acov[k] - a @ acov[k - 1:0:-1]) / var[k - 1]
        a = np.concatenate([a - refl * a[::-1], [refl]])
        var[k] = var[k - 1] * (1.0 - refl * refl)
        coefs.append(a)
    return var, coefs


def _if_ar_spectral(x: np.ndarray) -> float:
    n = x.size
    order_max = min(n - 1, int(math.floor(10 * math.log10(n))))
    acov = _autocovariance(x, order_max)
    var, coefs = _levinson(acov, order_max)
    with np.errstate(divide="ignore"):
        aic = n * np.log(np.maximum(var, 1e-300)) + 2.0 * np.arange(order_max + 1)
    order = int(np.argmin(aic))
    var_pred = var[order] * n / (n - (order + 1))
    spec0 = var_pred / (1.0 - coefs[order].sum()) ** 2
    return float(spec0 / np.var(x, ddof=1))


def _if_geyer(x: np.ndarray) -> float:
    n = x.size
    acov = _autocovariance(x, n - 1)
    pairs = acov[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    neg = np.flatnonzero(pairs <= 0)
    stop = neg[0] if neg.size else pairs.size
    gam = np.minimum.accumulate(pairs[:stop])  # initial monotone sequence
    return float((-acov[0] + 2.0 * gam.sum()) / acov[0])


def inefficiency_factor(trace, method: str = "ar") -> float:
    """Inefficiency factor (integrated autocorrelation time) of a trace.

    ``method="ar"`` estimates the spectral density at zero from an
    autoregression whose order is chosen by AIC; ``method="geyer"`` uses the
    initial monotone positive sequence of autocovariance pairs.
    """
    x = _as_trace(trace, min_len=100)
    if np.ptp(x) == 0:
        raise DiagnosticsError("trace is constant; inefficiency factor undefined")
    if method == "ar":
        return _if_ar_spectral(x)
    if method == "geyer":
        return _if_geyer(x)
    raise DiagnosticsError(f"unknown method {method!r}")


# --------------------------------------------------------------------------- identification

def _as_draws(loadings_draws) -> np.ndarray:
    lam = np.asarray(loadings_draws, dtype=float)
    if lam.ndim != 3 or lam.shape[0] < 1:
        raise DiagnosticsError("loadings draws must have shape (K, m, r) with K >= 1")
    return lam


def _align(lam: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    r = lam.shape[2]
    signs = np.sign(lam[:, anchors, np.arange(r)])
    return lam * signs[:, None, :]


def sign_identify_maximin(loadings_draws) -> tuple[np.ndarray, np.ndarray]:
    """Flip each column draw so the row whose smallest |draw| is largest stays positive."""
    lam = _as_draws(loadings_draws)
    floor = np.abs(lam).min(axis=0)
    anchors = floor.argmax(axis=0)
    for j, i in enumerate(anchors):
        if floor[i, j] == 0.0:
            raise DiagnosticsError(f"column {j}: every row has a zero draw, no sign anchor")
    return _align(lam, anchors), anchors


def sign_identify_diagonal(loadings_draws) -> np.ndarray:
    """Flip each column draw so its diagonal element is positive."""
    lam = _as_draws(loadings_draws)
    r = lam.shape[2]
    if r > lam.shape[1]:
        raise DiagnosticsError("more factors than series; no diagonal anchor")
    anchors = np.arange(r)
    zero = lam[:, anchors, anchors] == 0.0
    if zero.any():
        k, j = np.argwhere(zero)[0]
        raise DiagnosticsError(f"column {j}: zero diagonal draw at draw {k}")
    return _align(lam, anchors)


@dataclass
class Reordered:
    permutation: np.ndarray
    loadings: np.ndarray
    f: Optional[np.ndarray] = None
    h_factors: Optional[np.ndarray] = None


def reorder_columns_by_median(loadings_draws, f_draws=None, h_factor_draws=None) -> Reordered:
    """Sort factor columns by their largest posterior-median loading, descending.

    ``f_draws`` (K, r, ...) and ``h_factor_draws`` (K, r, ...) are permuted
    along their factor axis in the same way. The sort is stable.
    """
    lam = _as_draws(loadings_draws)
    key = np.median(lam, axis=0).max(axis=0)
    perm = np.argsort(-key, kind="stable")
    out = Reordered(perm, lam[:, :, perm])
    if f_draws is not None:
        out.f = np.asarray(f_draws)[:, perm]
    if h_factor_draws is not None:
        out.h_factors = np.asarray(h_factor_draws)[:, perm]
    return out


# --------------------------------------------------------------------------- summaries

@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    q05: float
    q50: float
    q95: float
    inefficiency: Optional[float]


def summarize_trace(name: str, trace, if_method: str = "ar") -> ParameterSummary:
    x = np.asarray(trace, dtype=float).ravel()
    if x.size == 0:
        raise DiagnosticsError(f"{name}: empty chain")
    q05, q50, q95 = np.quantile(x, [0.05, 0.5, 0.95], method="linear")
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    ineff = None
    if x.size >= 100 and np.ptp(x) > 0:
        ineff = inefficiency_factor(x, if_method)
    return ParameterSummary(name, float(np.mean(x)), sd, float(q05), float(q50), float(q95), ineff)


def chain_traces(chain, include_restricted: bool = False) -> dict[str, np.ndarray]:
    """Named scalar traces of a ChainOutput, 1-based indices (lambda_i_j, mu_i, phi_i, sigma_i).

    Loadings cells fixed at zero are skipped unless ``include_restricted``.
    """
    lam = np.asarray(chain.loadings)
    sv = np.asarray(chain.sv)
    K, m, r = lam.shape
    mask = chain.meta.get("config", {}).get("restriction_mask")
    free = np.ones((m, r), bool) if mask is None else np.asarray(mask, bool)
    traces = {}
    for i in range(m):
        for j in range(r):
            if free[i, j] or include_restricted:
                traces[f"lambda_{i + 1}_{j + 1}"] = lam[:, i, j]
    for i in range(sv.shape[1]):
        if i < m:
            traces[f"mu_{i + 1}"] = sv[:, i, 0]
        traces[f"phi_{i + 1}"] = sv[:, i, 1]
        traces[f"sigma_{i + 1}"] = sv[:, i, 2]
    return traces


def posterior_summary(chain, if_method: str = "ar") -> list[ParameterSummary]:
    """Mean, sd, 5/50/95% quantiles and inefficiency factor of every free parameter."""
    if chain.loadings.shape[0] == 0:
        raise DiagnosticsError("empty chain")
    return [summarize_trace(name, x, if_method) for name, x in chain_traces(chain).items()]
