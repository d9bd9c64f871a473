"""Univariate stochastic volatility update used for every volatility series.

Each series is linearized as ``log(x_t**2) = h_t + log(eps_t**2)`` and the
log chi-square(1) error is replaced by the 10-component normal mixture of
Omori, Chib, Shephard and Nakajima (2007). One sweep

1. draws the mixture indicators given the current path,
2. draws the whole path ``h_0, ..., h_T`` from its Gaussian full conditional
   (tridiagonal precision, banded LDL' factorization),
3. updates (mu, phi, sigma) in the centered parameterization: Gibbs for mu,
   independence MH for phi (transition likelihood as proposal) and for
   sigma**2 (inverse-gamma proposal, prior ratio as acceptance),
4. re-draws (mu, sigma) in the non-centered parameterization
   ``h = mu + sigma * h_tilde`` by Gaussian regression and maps back.

Priors: ``mu ~ N(b_mu, B_mu)``, ``(phi + 1) / 2 ~ Beta(a0, b0)``,
``sigma**2 ~ B_sigma * chi2_1`` and ``h_0 ~ N(mu, sigma**2 / (1 - phi**2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._fastexp import exp_inplace
from .model import PriorConfig, SvParams

LOG_OFFSET = 1e-300


@dataclass(frozen=True)
class MixtureApprox:
    prob: np.ndarray
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        if not (len(self.prob) == len(self.mean) == len(self.var)):
            raise ValueError("mixture arrays must have equal length")
        if abs(float(np.sum(self.prob)) - 1.0) > 1e-12:
            raise ValueError("mixture probabilities must sum to one")

    @property
    def K(self) -> int:
        return len(self.prob)

    @property
    def log_weight(self) -> np.ndarray:
        """log(prob) - log(var) / 2, the component constant of the normal kernel."""
        return np.log(self.prob) - 0.5 * np.log(self.var)


_OMORI_P = np.array([0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                     0.18842, 0.12047, 0.05591, 0.01575, 0.00115])
OMORI10 = MixtureApprox(
    prob=_OMORI_P / _OMORI_P.sum(),
    mean=np.array([1.92677, 1.34744, 0.73504, 0.02266, -0.85173,
                   -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]),
    var=np.array([0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                  0.98583, 1.57469, 2.54498, 4.16591, 7.33342]),
)


@dataclass
class SvSeriesView:
    """One volatility series: raw observations, its path (with h_0) and parameters."""

    obs: np.ndarray
    h: np.ndarray
    params: SvParams
    mu_fixed_to_zero: bool = False

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        if self.h.shape != (self.obs.shape[0] + 1,):
            raise ValueError("h must have one more entry than obs (the initial state)")
        if self.mu_fixed_to_zero and self.params.mu != 0.0:
            raise ValueError("mu must be 0 when it is fixed")


@njit(cache=True)
def log_square(x):
    return math.log(x * x + LOG_OFFSET)


@njit(cache=True)
def _log_squares(obs, out):
    for t in range(obs.shape[0]):
        out[t] = log_square(obs[t])


def log_squares(obs) -> np.ndarray:
    """Augmented observations ``log(obs**2 + 1e-300)``; exact zeros stay finite."""
    obs = np.ascontiguousarray(obs, dtype=float)
    out = np.empty(obs.shape)
    _log_squares(obs.ravel(), out.ravel())
    return out


# --------------------------------------------------------------------------- kernels

@njit(fastmath=True, cache=True)
def _indicator_weights(ystar, h, mix_logw, mix_mean, mix_var, w, ibuf):
    # w is a flat (K * T) buffer of unnormalized weights, component-major
    T = ystar.shape[0]
    K = mix_mean.shape[0]
    best = np.full(T, -np.inf)
    for k in range(K):
        c = -0.5 / mix_var[k]
        for t in range(T):
            e = ystar[t] - h[t + 1] - mix_mean[k]
            v = mix_logw[k] + c * e * e
            w[k * T + t] = v
            best[t] = max(best[t], v)
    for k in range(K):
        for t in range(T):
            w[k * T + t] -= best[t]
    exp_inplace(w, ibuf)


@njit(cache=True)
def draw_indicators(ystar, h, mix_logw, mix_mean, mix_var, gen, out):
    T = ystar.shape[0]
    K = mix_mean.shape[0]
    w = np.empty(K * T)
    ibuf = np.empty(K * T, dtype=np.int64)
    _indicator_weights(ystar, h, mix_logw, mix_mean, mix_var, w, ibuf)
    for t in range(T):
        tot = 0.0
        for k in range(K):
            tot += w[k * T + t]
        u = gen.random() * tot
        acc = 0.0
        pick = K - 1
        for k in range(K):
            acc += w[k * T + t]
            if u < acc:
                pick = k
                break
        out[t] = pick


@njit(cache=True)
def gaussian_path(z, zvar, mu, phi, sigma, noise, out):
    """Draw h_0..h_T given ``z[t] = h[t + 1] + N(0, zvar[t])`` and the AR(1) prior.

    With ``noise = 0`` the result is the conditional mean. Uses an LDL'
    factorization of the tridiagonal precision. Returns -1 on success or the
    index at which the precision stopped being positive definite.
    """
    T = z.shape[0]
    n = T + 1
    s2 = sigma * sigma
    off = -phi / s2
    d = np.empty(n)
    w = np.empty(n)
    # forward sweep: pivots d and the solution w of L w = rhs
    d[0] = 1.0 / s2
    w[0] = mu * (1.0 - phi) / s2
    for t in range(1, n):
        if t < T:
            diag = (1.0 + phi * phi) / s2
            rhs = mu * (1.0 - phi) * (1.0 - phi) / s2
        else:
            diag = 1.0 / s2
            rhs = mu * (1.0 - phi) / s2
        diag += 1.0 / zvar[t - 1]
        rhs += z[t - 1] / zvar[t - 1]
        ell = off / d[t - 1]
        d[t] = diag - ell * off
        if not d[t] > 0.0:
            return t
        w[t] = rhs - ell * w[t - 1]
    # backward sweep: x = L'^{-1} (D^{-1} w + D^{-1/2} noise)
    out[n - 1] = w[n - 1] / d[n - 1] + noise[n - 1] / math.sqrt(d[n - 1])
    for t in range(n - 2, -1, -1):
        out[t] = w[t] / d[t] + noise[t] / math.sqrt(d[t]) - (off / d[t]) * out[t + 1]
    return -1


@njit(cache=True)
def _log_phi_target(phi, d0, a0, b0):
    # stationary h_0 density and Beta prior, as functions of phi
    return (0.5 * math.log(1.0 - phi * phi) - 0.5 * (1.0 - phi * phi) * d0
            + (a0 - 1.0) * math.log1p(phi) + (b0 - 1.0) * math.log1p(-phi))


@njit(cache=True)
def sv_sweep(ystar, h, mu, phi, sigma, fix_mu, b_mu, B_mu, a0, b0, B_sigma,
             mix_logw, mix_mean, mix_var, gen):
    """One full SV sweep; updates ``h`` in place, returns (mu, phi, sigma, status)."""
    T = ystar.shape[0]
    n = T + 1
    ind = np.empty(T, dtype=np.int64)
    draw_indicators(ystar, h, mix_logw, mix_mean, mix_var, gen, ind)
    z = np.empty(T)
    zvar = np.empty(T)
    for t in range(T):
        z[t] = ystar[t] - mix_mean[ind[t]]
        zvar[t] = mix_var[ind[t]]

    noise = np.empty(n)
    for t in range(n):
        noise[t] = gen.standard_normal()
    bad = gaussian_path(z, zvar, mu, phi, sigma, noise, h)
    if bad >= 0:
        return mu, phi, sigma, bad

    # centered: mu | phi, sigma, h
    s2 = sigma * sigma
    if not fix_mu:
        acc = 0.0
        for t in range(1, n):
            acc += h[t] - phi * h[t - 1]
        prec = ((1.0 - phi * phi) + T * (1.0 - phi) ** 2) / s2 + 1.0 / B_mu
        lin = ((1.0 - phi * phi) * h[0] + (1.0 - phi) * acc) / s2 + b_mu / B_mu
        mu = lin / prec + gen.standard_normal() / math.sqrt(prec)

    # centered: phi | mu, sigma, h
    sxx = 0.0
    sxy = 0.0
    for t in range(1, n):
        x = h[t - 1] - mu
        sxx += x * x
        sxy += x * (h[t] - mu)
    phi_prop = sxy / sxx + math.sqrt(s2 / sxx) * gen.standard_normal()
    u = gen.random()
    if abs(phi_prop) < 1.0:
        d0 = (h[0] - mu) ** 2 / s2
        if math.log(u) < _log_phi_target(phi_prop, d0, a0, b0) - _log_phi_target(phi, d0, a0, b0):
            phi = phi_prop

    # centered: sigma^2 | mu, phi, h; inverse-gamma proposal, prior term in the ratio
    ss = (1.0 - phi * phi) * (h[0] - mu) ** 2
    for t in range(1, n):
        e = h[t] - mu - phi * (h[t - 1] - mu)
        ss += e * e
    s2_prop = 0.5 * ss / gen.standard_gamma(0.5 * T)
    u = gen.random()
    if math.log(u) < -(s2_prop - s2) / (2.0 * B_sigma):
        s2 = s2_prop
    sigma = math.sqrt(s2)

    # non-centered: (mu, sigma) | h_tilde, indicators
    ht = np.empty(n)
    for t in range(n):
        ht[t] = (h[t] - mu) / sigma
    if fix_mu:
        p_ss = 1.0 / B_sigma
        l_s = 0.0
        for t in range(T):
            p_ss += ht[t + 1] * ht[t + 1] / zvar[t]
            l_s += ht[t + 1] * z[t] / zvar[t]
        sig_new = l_s / p_ss + gen.standard_normal() / math.sqrt(p_ss)
        mu_new = 0.0
    else:
        p_mm = 1.0 / B_mu
        p_ms = 0.0
        p_ss = 1.0 / B_sigma
        l_m = b_mu / B_mu
        l_s = 0.0
        for t in range(T):
            w = 1.0 / zvar[t]
            x = ht[t + 1]
            p_mm += w
            p_ms += w * x
            p_ss += w * x * x
            l_m += w * z[t]
            l_s += w * x * z[t]
        c11 = math.sqrt(p_mm)
        c21 = p_ms / c11
        c22 = math.sqrt(p_ss - c21 * c21)
        w1 = l_m / c11
        w2 = (l_s - c21 * w1) / c22
        e1 = gen.standard_normal()
        e2 = gen.standard_normal()
        sig_new = (w2 + e2) / c22
        mu_new = (w1 + e1 - c21 * sig_new) / c11
    if sig_new == 0.0:
        # measure-zero event; keep the centered draw
        return mu, phi, sigma, -1
    for t in range(n):
        h[t] = mu_new + sig_new * ht[t]
    return mu_new, phi, abs(sig_new), -1


def _prior_args(fix_mu: bool, priors: PriorConfig):
    if fix_mu:
        # the level prior is never consulted for fixed-level series
        b_mu, B_mu = 0.0, 1.0
    else:
        b_mu, B_mu = float(priors.b_mu), float(priors.B_mu)
    return (b_mu, B_mu, float(priors.a0), float(priors.b0), float(priors.B_sigma))


def sv_update(view: SvSeriesView, priors: PriorConfig, rng: np.random.Generator,
              mixture: MixtureApprox = OMORI10) -> tuple[np.ndarray, SvParams]:
    """One MCMC sweep for a single volatility series.

    Returns the new path (length T + 1, including h_0) and new parameters;
    the view is left untouched.
    """
    h = view.h.copy()
    p = view.params
    fix = bool(view.mu_fixed_to_zero)
    mu, phi, sigma, bad = sv_sweep(log_squares(view.obs), h, float(p.mu), float(p.phi),
                                   float(p.sigma), fix, *_prior_args(fix, priors),
                                   mixture.log_weight, mixture.mean, mixture.var, rng)
    if bad >= 0:
        raise np.linalg.LinAlgError(
            f"latent path precision not positive definite at index {bad} "
            f"(mu={mu}, phi={phi}, sigma={sigma})")
    return h, SvParams(mu, phi, sigma)


def sample_indicators(view: SvSeriesView, rng: np.random.Generator,
                      mixture: MixtureApprox = OMORI10) -> np.ndarray:
    """Mixture component indices (0-based) given the current path."""
    out = np.empty(view.obs.shape[0], dtype=np.int64)
    draw_indicators(log_squares(view.obs), view.h, mixture.log_weight, mixture.mean,
                    mixture.var, rng, out)
    return out


def _linear_obs(view, indicators, mixture):
    ind = np.asarray(indicators, dtype=np.int64)
    if ind.shape != view.obs.shape or ind.min() < 0 or ind.max() >= mixture.K:
        raise ValueError("indicators must be one valid component index per observation")
    return log_squares(view.obs) - mixture.mean[ind], mixture.var[ind]


def path_posterior_mean(view: SvSeriesView, indicators,
                        mixture: MixtureApprox = OMORI10) -> np.ndarray:
    z, zvar = _linear_obs(view, indicators, mixture)
    p = view.params
    out = np.empty(z.shape[0] + 1)
    bad = gaussian_path(z, zvar, p.mu, p.phi, p.sigma, np.zeros(out.shape[0]), out)
    if bad >= 0:
        raise np.linalg.LinAlgError(f"precision not positive definite at index {bad}")
    return out


def sample_h_given_params(view: SvSeriesView, indicators, rng: np.random.Generator,
                          mixture: MixtureApprox = OMORI10) -> np.ndarray:
    """Exact draw of h_0..h_T from the conditionally Gaussian state space model."""
    z, zvar = _linear_obs(view, indicators, mixture)
    p = view.params
    out = np.empty(z.shape[0] + 1)
    bad = gaussian_path(z, zvar, p.mu, p.phi, p.sigma, rng.standard_normal(out.shape[0]), out)
    if bad >= 0:
        raise np.linalg.LinAlgError(
            f"latent path precision not positive definite at index {bad} "
            f"(mu={p.mu}, phi={p.phi}, sigma={p.sigma})")
    return out
