"""Shallow and deep interweaving of the loadings column scales.

For each factor column an anchor loading (the diagonal element, or the
element of largest magnitude when the loadings are unrestricted) is
re-drawn in an alternative parameterization and the column, the factor
path and, for the deep variant, the factor log-variance path are rescaled
so that the observation equation is unchanged.

* shallow: the squared anchor given the scaled factors is GIG distributed;
* deep: the anchor enters as the level ``mu = log(anchor**2)`` of the factor
  log-variance process and is updated by an independence Metropolis-Hastings
  step whose proposal is the Gaussian auxiliary posterior.

The anchor's sign is kept; only its magnitude moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .gig import gig_draw_counted, check_gig_params
from .model import LatentState, RestrictionPattern

ANCHOR_DIAGONAL = 0
ANCHOR_MAXABS = 1


def anchor_mode_for(pattern: RestrictionPattern) -> int:
    """Diagonal anchors when every diagonal cell is free, max-abs anchors otherwise."""
    m, r = pattern.shape
    if pattern.kind == "unrestricted":
        return ANCHOR_MAXABS
    if r and all(pattern.free[j, j] for j in range(min(m, r))):
        return ANCHOR_DIAGONAL
    return ANCHOR_MAXABS


@dataclass
class ColumnView:
    j: int
    anchor: int
    lam_anchor: float
    lam_star: np.ndarray
    f: np.ndarray
    h: np.ndarray
    phi: float
    sigma: float

    def __post_init__(self):
        if self.lam_anchor == 0.0 or not math.isfinite(self.lam_anchor):
            raise ValueError(f"column {self.j}: anchor loading must be nonzero and finite")
        self.lam_star = np.asarray(self.lam_star, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        if self.h.shape != (self.f.shape[0] + 1,):
            raise ValueError("factor log-variance path must include h_0")

    @property
    def k(self) -> int:
        return self.lam_star.shape[0]


# --------------------------------------------------------------------------- kernels

@njit(cache=True)
def find_anchor(lam, free, j, mode):
    m = lam.shape[0]
    if mode == ANCHOR_DIAGONAL:
        return j if free[j, j] and lam[j, j] != 0.0 else -1
    best = -1
    best_abs = 0.0
    for i in range(m):
        if free[i, j] and abs(lam[i, j]) > best_abs:
            best = i
            best_abs = abs(lam[i, j])
    return best


@njit(cache=True)
def _column_stats(lam, free, j, anchor):
    # k_j and the squared norm of the transformed free loadings
    k = 0
    ss = 0.0
    a = lam[anchor, j]
    for i in range(lam.shape[0]):
        if free[i, j] and i != anchor:
            k += 1
            ss += (lam[i, j] / a) ** 2
    return k, ss


@njit(cache=True)
def shallow_params(lam_anchor, k, lam_star_ss, f_j, h_j, B_lambda):
    """GIG (p, a, b) of the squared anchor; ``h_j`` includes h_0."""
    T = f_j.shape[0]
    b = 0.0
    for t in range(T):
        fs = lam_anchor * f_j[t]
        b += fs * fs * math.exp(-h_j[t + 1])
    return 0.5 * (1.0 + k - T), (1.0 + lam_star_ss) / B_lambda, b


@njit(cache=True)
def shallow_core(lam_anchor, k, lam_star_ss, f_j, h_j, B_lambda, gen):
    p, a, b = shallow_params(lam_anchor, k, lam_star_ss, f_j, h_j, B_lambda)
    if not (b > 1e-14 or p > 0.0):
        return math.nan
    x, _ = gig_draw_counted(p, a, b, gen)
    if x <= 0.0:
        return math.nan
    return math.copysign(math.sqrt(x), lam_anchor)


@njit(cache=True)
def deep_moments(h0, hsum_inner, hT, T, phi, sigma, B0):
    """Proposal mean and variance; ``hsum_inner`` is the sum of h*_1..h*_{T-1}."""
    denom = T + 1.0 / B0
    mean = (hsum_inner + (hT - phi * h0) / (1.0 - phi)) / denom
    var = (sigma * sigma / (1.0 - phi) ** 2) / denom
    return mean, var


@njit(cache=True)
def deep_log_ratio(mu_prop, mu_old, k, lam_star_ss, h0, phi, sigma, B_lambda, B0):
    def log_target(mu):
        lstar = 0.5 * k * mu - 0.5 * math.exp(mu) * lam_star_ss / B_lambda
        init = -0.5 * (h0 - mu) ** 2 * (1.0 - phi * phi) / (sigma * sigma)
        prior = 0.5 * mu - 0.5 * math.exp(mu) / B_lambda
        return lstar + init + prior

    def log_aux(mu):
        return -0.5 * mu * mu * (1.0 - phi) ** 2 / (B0 * sigma * sigma)

    return (log_target(mu_prop) - log_target(mu_old)) + (log_aux(mu_old) - log_aux(mu_prop))


@njit(cache=True)
def deep_core(lam_anchor, k, lam_star_ss, h_j, phi, sigma, B_lambda, B0, gen):
    T = h_j.shape[0] - 1
    shift = 2.0 * math.log(abs(lam_anchor))
    inner = 0.0
    for t in range(1, T):
        inner += h_j[t] + shift
    h0 = h_j[0] + shift
    mean, var = deep_moments(h0, inner, h_j[T] + shift, T, phi, sigma, B0)
    mu_old = shift
    mu_prop = mean + math.sqrt(var) * gen.standard_normal()
    log_r = deep_log_ratio(mu_prop, mu_old, k, lam_star_ss, h0, phi, sigma, B_lambda, B0)
    if math.log(gen.random()) < log_r:
        return math.copysign(math.exp(0.5 * mu_prop), lam_anchor), True
    return lam_anchor, False


@njit(cache=True)
def rescale_core(lam, f, h, m, j, lam_old, lam_new, deep):
    up = lam_new / lam_old
    down = lam_old / lam_new
    for i in range(lam.shape[0]):
        lam[i, j] *= up
    for t in range(f.shape[1]):
        f[j, t] *= down
    if deep:
        shift = 2.0 * math.log(abs(down))
        for t in range(h.shape[1]):
            h[m + j, t] += shift


# --------------------------------------------------------------------------- API

def column_view(loadings, pattern: RestrictionPattern, state: LatentState, sv, j: int,
                anchor_mode: int | None = None) -> ColumnView:
    """Collect everything the column-j interweaving step conditions on."""
    lam = np.asarray(loadings, dtype=float)
    m = lam.shape[0]
    mode = anchor_mode_for(pattern) if anchor_mode is None else anchor_mode
    anchor = int(find_anchor(lam, pattern.free, j, mode))
    if anchor < 0:
        raise ValueError(f"column {j}: no nonzero anchor loading")
    rows = [i for i in range(m) if pattern.free[i, j] and i != anchor]
    sv = np.asarray(sv, dtype=float)
    return ColumnView(j, anchor, float(lam[anchor, j]), lam[rows, j] / lam[anchor, j],
                      state.f[j].copy(), state.h[m + j].copy(), float(sv[m + j, 1]),
                      float(sv[m + j, 2]))


def shallow_gig_params(view: ColumnView, B_lambda: float) -> tuple[float, float, float]:
    return shallow_params(view.lam_anchor, view.k, float(view.lam_star @ view.lam_star),
                          view.f, view.h, float(B_lambda))


def shallow_redraw(view: ColumnView, B_lambda: float, rng: np.random.Generator) -> float:
    """New anchor value from the GIG full conditional of its square."""
    p, a, b = shallow_gig_params(view, B_lambda)
    try:
        check_gig_params(p, a, b)
    except ValueError as exc:
        raise ValueError(f"column {view.j}: {exc}") from None
    out = shallow_core(view.lam_anchor, view.k, float(view.lam_star @ view.lam_star),
                       view.f, view.h, float(B_lambda), rng)
    if math.isnan(out):
        raise RuntimeError(f"column {view.j}: GIG draw failed for p={p}, a={a}, b={b}")
    return out


def deep_proposal_moments(h_star, phi: float, sigma: float, B0: float) -> tuple[float, float]:
    """Mean and variance of the Gaussian proposal for the factor log-variance level."""
    h_star = np.asarray(h_star, dtype=float)
    if not abs(phi) < 1 or not sigma > 0:
        raise ValueError("requires |phi| < 1 and sigma > 0")
    T = h_star.shape[0] - 1
    return deep_moments(h_star[0], float(np.sum(h_star[1:T])), h_star[T], T,
                        float(phi), float(sigma), float(B0))


def deep_acceptance_log_ratio(mu_prop: float, mu_old: float, view: ColumnView,
                              B_lambda: float, B0: float) -> float:
    """log R for moving the level from ``mu_old`` to ``mu_prop``.

    ``view.lam_star`` holds the transformed loadings and ``h*_0`` is built
    from the view's current anchor.
    """
    h0_star = view.h[0] + 2.0 * math.log(abs(view.lam_anchor))
    return deep_log_ratio(float(mu_prop), float(mu_old), view.k,
                          float(view.lam_star @ view.lam_star), h0_star,
                          view.phi, view.sigma, float(B_lambda), float(B0))


def deep_redraw(view: ColumnView, B_lambda: float, B0: float,
                rng: np.random.Generator) -> tuple[float, bool]:
    lam_new, accepted = deep_core(view.lam_anchor, view.k, float(view.lam_star @ view.lam_star),
                                  view.h, view.phi, view.sigma, float(B_lambda), float(B0), rng)
    return float(lam_new), bool(accepted)


def apply_rescale(state: LatentState, loadings: np.ndarray, j: int, lam_old: float,
                  lam_new: float, deep: bool) -> None:
    """Rescale column j of ``loadings``, factor j and (deep) its log-variances in place."""
    if lam_new == 0.0 or not math.isfinite(lam_new):
        raise ValueError("new anchor value must be nonzero and finite")
    m = loadings.shape[0]
    rescale_core(loadings, state.f, state.h, m, j, float(lam_old), float(lam_new), bool(deep))
