"""Full-conditional Gibbs sampler for the factor SV model, with optional interweaving.

One iteration runs, in this order,

(a)  an SV sweep for each of the m + r log-variance series,
(b)  a draw of every loadings row from its Gaussian full conditional,
(b*) the interweaving re-draw of every column scale (if enabled),
(c)  a draw of every factor vector from its Gaussian full conditional.

The whole loop runs inside one compiled kernel. Randomness comes from
independent streams spawned from the run seed: one per volatility series,
one for the loadings rows, one for the factors and one per factor column
for interweaving. Loadings and factor noise are drawn as a fixed
``(m, r)`` / ``(T, r)`` block per iteration, so each row or time point
always uses the same slot of that block.
"""

from __future__ import annotations

import logging
import math
import os
import time
import warnings
from dataclasses import dataclass, field, asdict
from typing import Optional

import numba
import numpy as np
from numba import njit, prange

from . import __version__
from ._fastexp import exp_inplace
from .interweaving import (anchor_mode_for, deep_core, find_anchor,
                           rescale_core, shallow_core, _column_stats)
from .model import FsvParams, LatentState, PriorConfig, RestrictionPattern
from .sv import OMORI10, log_square, sv_sweep

log = logging.getLogger(__name__)

INTERWEAVING_MODES = {"none": 0, "shallow": 1, "deep": 2, "both": 3}
THREADS_ENV = "FACTORSV_NUM_THREADS"

# status codes returned by the kernel: code * STEP_BASE + unit index
STEP_BASE = 1_000_000
_ERR_PATH = 1
_ERR_LOADINGS = 2
_ERR_SHALLOW = 3
_ERR_FACTORS = 4
_ERR_NONFINITE = 5
_STEP_NAMES = {_ERR_PATH: "step (a) SV update, series",
               _ERR_LOADINGS: "step (b) loadings, row",
               _ERR_SHALLOW: "step (b*) shallow interweaving, column",
               _ERR_FACTORS: "step (c) factors, time index",
               _ERR_NONFINITE: "non-finite state after iteration, series"}


@dataclass(frozen=True)
class SamplerConfig:
    draws: int = 1000
    burn_in: int = 0
    thin: int = 1
    interweaving: str = "deep"
    restriction: Optional[RestrictionPattern] = None
    rng_seed: int = 0
    store_latents: bool = False
    # model time points (1..T) whose h and f are stored; None stores all, h_0 included
    latent_times: Optional[tuple[int, ...]] = None
    track_invariants: bool = False

    def __post_init__(self):
        if self.draws < 0 or self.burn_in < 0:
            raise ValueError("draws and burn_in must be non-negative")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.interweaving not in INTERWEAVING_MODES:
            raise ValueError(f"interweaving must be one of {sorted(INTERWEAVING_MODES)}")
        if self.latent_times is not None:
            object.__setattr__(self, "latent_times", tuple(int(t) for t in self.latent_times))

    @property
    def n_stored(self) -> int:
        return self.draws // self.thin


@dataclass
class SamplerState:
    """Mutable sampler state: loadings, SV parameters (mu, phi, sigma) per series, latents."""

    loadings: np.ndarray
    sv: np.ndarray
    h: np.ndarray
    f: np.ndarray

    @classmethod
    def from_model(cls, params: FsvParams, latent: LatentState) -> "SamplerState":
        return cls(np.array(params.loadings, dtype=float), params.sv_array(),
                   np.array(latent.h, dtype=float), np.array(latent.f, dtype=float))

    def copy(self) -> "SamplerState":
        return SamplerState(self.loadings.copy(), self.sv.copy(), self.h.copy(), self.f.copy())

    def to_params(self, pattern: RestrictionPattern) -> FsvParams:
        return FsvParams.from_arrays(self.loadings, pattern, self.sv)

    def to_latent(self) -> LatentState:
        return LatentState(self.h.copy(), self.f.copy())


class SamplerStreams:
    """Independent generators spawned from one seed, addressable by role."""

    def __init__(self, seed, m: int, r: int):
        self.seed = seed
        self.m, self.r = m, r
        children = np.random.SeedSequence(seed).spawn(m + r + 2 + r)
        self.generators = tuple(np.random.Generator(np.random.PCG64(c)) for c in children)

    def sv(self, i: int) -> np.random.Generator:
        return self.generators[i]

    @property
    def loadings(self) -> np.random.Generator:
        return self.generators[self.m + self.r]

    @property
    def factors(self) -> np.random.Generator:
        return self.generators[self.m + self.r + 1]

    def column(self, j: int) -> np.random.Generator:
        return self.generators[self.m + self.r + 2 + j]


@dataclass
class ChainOutput:
    loadings: np.ndarray
    sv: np.ndarray
    h: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None
    h_times: Optional[np.ndarray] = None
    f_times: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.loadings.shape[0]


class SamplerError(RuntimeError):
    pass


# --------------------------------------------------------------------------- conjugate cores

@njit(cache=True)
def _chol_solve_draw(P, rhs, noise, out, L, w):
    """out = P^{-1} rhs + L'^{-1} noise with P = L L'; returns False if P is not PD.

    ``L`` (k, k) and ``w`` (k,) are scratch space.
    """
    k = P.shape[0]
    for a in range(k):
        s = P[a, a]
        for c in range(a):
            s -= L[a, c] * L[a, c]
        if not s > 0.0:
            return False
        L[a, a] = math.sqrt(s)
        for b in range(a + 1, k):
            s = P[b, a]
            for c in range(a):
                s -= L[b, c] * L[a, c]
            L[b, a] = s / L[a, a]
    for a in range(k):
        s = rhs[a]
        for c in range(a):
            s -= L[a, c] * w[c]
        w[a] = s / L[a, a]
    # L' x = w + noise
    for a in range(k - 1, -1, -1):
        s = w[a] + noise[a]
        for c in range(a + 1, k):
            s -= L[c, a] * out[c]
        out[a] = s / L[a, a]
    return True


@njit(cache=True)
def _split_work(work, k):
    P = work[:k, :k]
    L = work[k:2 * k, :k]
    P[:, :] = 0.0
    L[:, :] = 0.0
    rhs = work[2 * k, :k]
    rhs[:] = 0.0
    return P, L, rhs, work[2 * k + 1, :k]


@njit(cache=True)
def loadings_row_core(y_i, f, w_i, cols, B_lambda, noise, out, work):
    """Free loadings of one row; ``w_i[t] = exp(-h_it)``, ``cols`` the free column indices.

    ``work`` is scratch space of shape at least (2k + 2, k).
    """
    k = cols.shape[0]
    T = y_i.shape[0]
    P, L, rhs, w = _split_work(work, k)
    for t in range(T):
        wt = w_i[t]
        for a in range(k):
            fa = f[cols[a], t] * wt
            rhs[a] += fa * y_i[t]
            for b in range(a + 1):
                P[a, b] += fa * f[cols[b], t]
    for a in range(k):
        P[a, a] += 1.0 / B_lambda
        for b in range(a):
            P[b, a] = P[a, b]
    return _chol_solve_draw(P, rhs, noise, out, L, w)


@njit(cache=True)
def factors_t_core(y, t, lam, w, m, noise, out, work):
    """Factor vector at column ``t`` of ``y``; ``w[i, t] = exp(-h_{i,t+1})`` for all m + r rows."""
    r = lam.shape[1]
    P, L, rhs, wv = _split_work(work, r)
    for i in range(m):
        wi = w[i, t]
        yi = y[i, t]
        for a in range(r):
            la = lam[i, a] * wi
            rhs[a] += la * yi
            for b in range(a + 1):
                P[a, b] += la * lam[i, b]
    for a in range(r):
        P[a, a] += w[m + a, t]
        for b in range(a):
            P[b, a] = P[a, b]
    return _chol_solve_draw(P, rhs, noise, out, L, wv)


# --------------------------------------------------------------------------- the kernel

@njit(cache=True)
def _step_a_series(i, y, lam, f, h, sv, m, fix_mu, b_mu, B_mu, a0, b0, B_sigma,
                   mix_logw, mix_mean, mix_var, gen):
    T = y.shape[1]
    r = lam.shape[1]
    ystar = np.empty(T)
    for t in range(T):
        if i < m:
            x = y[i, t]
            for j in range(r):
                x -= lam[i, j] * f[j, t]
        else:
            x = f[i - m, t]
        ystar[t] = log_square(x)
    mu, phi, sigma, bad = sv_sweep(ystar, h[i], sv[i, 0], sv[i, 1], sv[i, 2], fix_mu,
                                   b_mu, B_mu, a0, b0, B_sigma, mix_logw, mix_mean, mix_var, gen)
    sv[i, 0] = mu
    sv[i, 1] = phi
    sv[i, 2] = sigma
    return bad


@njit(parallel=True, cache=True)
def _step_a_parallel(y, lam, f, h, sv, m, b_mu, B_mu, a0, b0, B_sigma,
                     mix_logw, mix_mean, mix_var, gens, status):
    n = h.shape[0]
    for i in prange(n):
        fix = i >= m
        status[i] = _step_a_series(i, y, lam, f, h, sv, m, fix, 0.0 if fix else b_mu,
                                   1.0 if fix else B_mu, a0, b0, B_sigma,
                                   mix_logw, mix_mean, mix_var, gens[i])


@njit(cache=True)
def _max_abs_diff_product(lam_a, f_a, lam_b, f_b):
    m, r = lam_a.shape
    T = f_a.shape[1]
    worst = 0.0
    for i in range(m):
        for t in range(T):
            sa = 0.0
            sb = 0.0
            for j in range(r):
                sa += lam_a[i, j] * f_a[j, t]
                sb += lam_b[i, j] * f_b[j, t]
            worst = max(worst, abs(sa - sb))
    return worst


@njit(cache=True)
def _run_chunk(y, lam, free, h, f, sv, priors, mix_logw, mix_mean, mix_var,
               mode, anchor_mode, n_iter, iter0, burn_in, thin,
               out_lam, out_sv, out_h, out_f, h_cols, f_cols, store_pos,
               gens, deep_counts, drift, track, parallel_a):
    """Run ``n_iter`` iterations; returns (status, iteration of failure, new store_pos)."""
    m, r = lam.shape
    T = y.shape[1]
    n = m + r
    b_mu, B_mu, a0, b0, B_sigma, B_lambda, B0 = (priors[0], priors[1], priors[2], priors[3],
                                                priors[4], priors[5], priors[6])
    g_load = n
    g_fac = n + 1
    w = np.empty((n, T))
    ibuf = np.empty(T, dtype=np.int64)
    row_noise = np.empty((m, r))
    fac_noise = np.empty((T, r))
    cols_buf = np.empty(r, dtype=np.int64)
    draw = np.empty(r)
    work = np.empty((2 * r + 2, max(r, 1)))
    status_a = np.zeros(n, dtype=np.int64)
    lam_before = np.empty((m, r))
    f_before = np.empty((r, T))
    do_shallow = mode == 1 or mode == 3
    do_deep = mode == 2 or mode == 3
    for it in range(n_iter):
        # (a) volatilities
        if parallel_a:
            _step_a_parallel(y, lam, f, h, sv, m, b_mu, B_mu, a0, b0, B_sigma,
                             mix_logw, mix_mean, mix_var, gens, status_a)
            for i in range(n):
                if status_a[i] >= 0:
                    return _ERR_PATH * STEP_BASE + i, it, store_pos
        else:
            for i in range(n):
                fix = i >= m
                bad = _step_a_series(i, y, lam, f, h, sv, m, fix, 0.0 if fix else b_mu,
                                     1.0 if fix else B_mu, a0, b0, B_sigma,
                                     mix_logw, mix_mean, mix_var, gens[i])
                if bad >= 0:
                    return _ERR_PATH * STEP_BASE + i, it, store_pos
        for i in range(n):
            for t in range(T):
                w[i, t] = -h[i, t + 1]
            exp_inplace(w[i], ibuf)

        # (b) loadings rows
        if r > 0:
            for i in range(m):
                for j in range(r):
                    row_noise[i, j] = gens[g_load].standard_normal()
            for i in range(m):
                k = 0
                for j in range(r):
                    if free[i, j]:
                        cols_buf[k] = j
                        k += 1
                if k == 0:
                    continue
                ok = loadings_row_core(y[i], f, w[i], cols_buf[:k], B_lambda,
                                       row_noise[i, :k], draw[:k], work)
                if not ok:
                    return _ERR_LOADINGS * STEP_BASE + i, it, store_pos
                for a in range(k):
                    lam[i, cols_buf[a]] = draw[a]

        # (b*) interweaving
        if mode != 0:
            for j in range(r):
                gen = gens[n + 2 + j]
                for variant in range(2):
                    if variant == 0 and not do_shallow:
                        continue
                    if variant == 1 and not do_deep:
                        continue
                    anchor = find_anchor(lam, free, j, anchor_mode)
                    if anchor < 0:
                        continue
                    lam_old = lam[anchor, j]
                    k, ss = _column_stats(lam, free, j, anchor)
                    if variant == 0:
                        lam_new = shallow_core(lam_old, k, ss, f[j], h[m + j], B_lambda, gen)
                        if math.isnan(lam_new):
                            return _ERR_SHALLOW * STEP_BASE + j, it, store_pos
                    else:
                        lam_new, accepted = deep_core(lam_old, k, ss, h[m + j], sv[m + j, 1],
                                                      sv[m + j, 2], B_lambda, B0, gen)
                        deep_counts[j, 0] += 1
                        if accepted:
                            deep_counts[j, 1] += 1
                    if track:
                        lam_before[:, :] = lam
                        f_before[:, :] = f
                    if lam_new != lam_old:
                        rescale_core(lam, f, h, m, j, lam_old, lam_new, variant == 1)
                    if track:
                        drift[0] = max(drift[0], _max_abs_diff_product(lam, f, lam_before,
                                                                       f_before))
                        if variant == 1:
                            for t in range(T):
                                new = f[j, t] ** 2 / math.exp(h[m + j, t + 1])
                                old = f_before[j, t] ** 2 / math.exp(
                                    h[m + j, t + 1] - 2.0 * math.log(abs(lam_old / lam_new)))
                                drift[1] = max(drift[1], abs(new - old))
            for j in range(r):
                for t in range(T):
                    w[m + j, t] = -h[m + j, t + 1]
                exp_inplace(w[m + j], ibuf)

        # (c) factors
        if r > 0:
            for t in range(T):
                for j in range(r):
                    fac_noise[t, j] = gens[g_fac].standard_normal()
            for t in range(T):
                ok = factors_t_core(y, t, lam, w, m, fac_noise[t], draw, work)
                if not ok:
                    return _ERR_FACTORS * STEP_BASE + t, it, store_pos
                for j in range(r):
                    f[j, t] = draw[j]

        for i in range(n):
            if not (math.isfinite(sv[i, 0]) and math.isfinite(sv[i, 2])):
                return _ERR_NONFINITE * STEP_BASE + i, it, store_pos

        # storage
        g = iter0 + it
        if g >= burn_in and (g - burn_in + 1) % thin == 0 and store_pos < out_lam.shape[0]:
            out_lam[store_pos] = lam
            out_sv[store_pos] = sv
            for c in range(h_cols.shape[0]):
                for i in range(n):
                    out_h[store_pos, i, c] = h[i, h_cols[c]]
            for c in range(f_cols.shape[0]):
                for j in range(r):
                    out_f[store_pos, j, c] = f[j, f_cols[c]]
            store_pos += 1
    return 0, -1, store_pos


# --------------------------------------------------------------------------- Python API

def sample_loadings_row(i: int, y_i, f, h_i, pattern: RestrictionPattern, B_lambda: float,
                        rng: np.random.Generator | None, noise=None) -> np.ndarray:
    """Draw the free loadings of row ``i``; ``h_i`` holds h_{i,1..T}.

    ``noise`` optionally supplies the standard normals (one per free cell,
    or a full row of r values of which the leading ones are used) instead
    of drawing them from ``rng``.
    """
    cols = np.flatnonzero(pattern.free[i]).astype(np.int64)
    if cols.size == 0:
        return np.empty(0)
    if noise is None:
        noise = rng.standard_normal(cols.size)
    noise = np.ascontiguousarray(noise, dtype=float)[: cols.size]
    return _loadings_draw(y_i, f, h_i, cols, B_lambda, noise)


def _precision_weights(h):
    """exp(-h) computed exactly as inside the chunk kernel."""
    w = -np.array(h, dtype=float).ravel()
    exp_inplace(w, np.empty(w.size, np.int64))
    return w


def _loadings_draw(y_i, f, h_i, cols, B_lambda, noise):
    y_i, f, h_i = (np.ascontiguousarray(a, dtype=float) for a in (y_i, f, h_i))
    design = np.concatenate([y_i, f.ravel(), h_i])
    if not np.all(np.isfinite(design)):
        raise ValueError("non-finite entries in the loadings regression design")
    out = np.empty(cols.size)
    work = np.empty((2 * cols.size + 2, cols.size))
    if not loadings_row_core(y_i, f, _precision_weights(h_i), cols, float(B_lambda), noise, out, work):
        raise np.linalg.LinAlgError("loadings posterior precision is not positive definite")
    return out


def loadings_row_posterior(y_i, f, h_i, free_row, B_lambda: float):
    """Mean and covariance of the free loadings of one row."""
    cols = np.flatnonzero(np.asarray(free_row, dtype=bool)).astype(np.int64)
    mean = _loadings_draw(y_i, f, h_i, cols, B_lambda, np.zeros(cols.size))
    X = (np.asarray(f, dtype=float)[cols] * np.exp(-0.5 * np.asarray(h_i, dtype=float))).T
    cov = np.linalg.inv(X.T @ X + np.eye(cols.size) / B_lambda)
    return mean, cov


def sample_factors_at_t(t: int, y_t, loadings, h_t, rng: np.random.Generator | None,
                        noise=None) -> np.ndarray:
    """Draw f_t given y_t, the loadings and the (m + r)-vector h_t.

    ``noise`` optionally supplies the r standard normals instead of ``rng``.
    """
    r = np.asarray(loadings).shape[1]
    if noise is None:
        noise = rng.standard_normal(r)
    return _factors_draw(y_t, loadings, h_t, np.ascontiguousarray(noise, dtype=float))


def _factors_draw(y_t, loadings, h_t, noise):
    lam = np.ascontiguousarray(loadings, dtype=float)
    m, r = lam.shape
    h_t = np.asarray(h_t, dtype=float)
    out = np.empty(r)
    work = np.empty((2 * r + 2, r))
    ok = factors_t_core(np.asarray(y_t, dtype=float).reshape(m, 1), 0, lam,
                        _precision_weights(h_t).reshape(m + r, 1), m, noise, out, work)
    if not ok:
        raise np.linalg.LinAlgError("factor posterior precision is not positive definite")
    return out


def factors_posterior(y_t, loadings, h_t):
    """Mean and covariance of f_t given y_t, the loadings and h_t."""
    lam = np.asarray(loadings, dtype=float)
    m, r = lam.shape
    h_t = np.asarray(h_t, dtype=float)
    mean = _factors_draw(y_t, lam, h_t, np.zeros(r))
    X = lam * np.exp(-0.5 * h_t[:m])[:, None]
    cov = np.linalg.inv(X.T @ X + np.diag(np.exp(-h_t[m:])))
    return mean, cov


def _thread_count() -> int:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return 1
    n = int(value)
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer")
    return n


def _prior_vector(priors: PriorConfig) -> np.ndarray:
    return np.array([priors.b_mu, priors.B_mu, priors.a0, priors.b0, priors.B_sigma,
                     priors.B_lambda, priors.B0], dtype=float)


def _raise_status(status: int, iteration: int):
    code, index = divmod(int(status), STEP_BASE)
    raise SamplerError(f"{_STEP_NAMES.get(code, 'unknown step')} {index} failed "
                       f"at iteration {iteration}")


class _Kernel:
    """Bundles the arrays the compiled loop needs for one chain."""

    def __init__(self, y, state: SamplerState, pattern: RestrictionPattern,
                 priors: PriorConfig, mode: str, streams: SamplerStreams):
        self.y = np.ascontiguousarray(y, dtype=float)
        self.state = state
        self.free = np.ascontiguousarray(pattern.free)
        self.priors = _prior_vector(priors)
        self.mode = INTERWEAVING_MODES[mode]
        self.anchor_mode = anchor_mode_for(pattern)
        self.streams = streams
        r = state.loadings.shape[1]
        self.deep_counts = np.zeros((r, 2), dtype=np.int64)
        self.drift = np.zeros(2)

    def run(self, n_iter, iter0, burn_in, thin, out, h_cols, f_cols, store_pos, track):
        threads = _thread_count()
        if threads > 1:
            numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        with warnings.catch_warnings():
            # numba reports an outdated system TBB once per compile; another layer is used
            warnings.filterwarnings("ignore", message=".*TBB.*", category=numba.NumbaWarning)
            status, bad_it, store_pos = self._call(n_iter, iter0, burn_in, thin, out, h_cols,
                                                   f_cols, store_pos, track, threads)
        if status != 0:
            _raise_status(status, iter0 + bad_it)
        return store_pos

    def _call(self, n_iter, iter0, burn_in, thin, out, h_cols, f_cols, store_pos, track,
              threads):
        s = self.state
        return _run_chunk(
            self.y, s.loadings, self.free, s.h, s.f, s.sv, self.priors,
            OMORI10.log_weight, OMORI10.mean, OMORI10.var, self.mode, self.anchor_mode,
            n_iter, iter0, burn_in, thin, out[0], out[1], out[2], out[3], h_cols, f_cols,
            store_pos, self.streams.generators, self.deep_counts, self.drift, track,
            threads > 1)


def _empty_out(m, r, n_h=0, n_f=0, n_store=0):
    return (np.empty((n_store, m, r)), np.empty((n_store, m + r, 3)),
            np.empty((n_store, m + r, n_h)), np.empty((n_store, r, n_f)))


def gibbs_iteration(state: SamplerState, y, config: SamplerConfig, priors: PriorConfig,
                    streams: SamplerStreams) -> SamplerState:
    """Run one iteration of the sampler in place and return the updated state."""
    pattern = config.restriction or RestrictionPattern.lower_triangular(*state.loadings.shape)
    kern = _Kernel(y, state, pattern, priors, config.interweaving, streams)
    m, r = state.loadings.shape
    kern.run(1, 0, 1, 1, _empty_out(m, r), np.empty(0, np.int64), np.empty(0, np.int64), 0,
             config.track_invariants)
    return state


def default_initial_state(y, pattern: RestrictionPattern) -> SamplerState:
    """Scale-aware starting values built from the leading principal components.

    Idiosyncratic levels and paths start at ``log var(y_i)``, factor paths at
    0, persistence at 0.9 and sigma at 0.2.
    """
    y = np.asarray(y, dtype=float)
    m, T = y.shape
    r = pattern.shape[1]
    var = np.var(y, axis=1)
    var = np.where(var > 0, var, 1.0)
    log_var = np.log(var)
    lam = np.zeros((m, r))
    f = np.zeros((r, T))
    if r > 0:
        cov = np.cov(y) if m > 1 else np.atleast_2d(np.var(y))
        vals, vecs = np.linalg.eigh(np.atleast_2d(cov))
        order = np.argsort(vals)[::-1][:r]
        lam = vecs[:, order] * np.sqrt(np.maximum(vals[order], 1e-12))
        lam = pattern.apply(lam)
        for j in range(r):
            if lam[:, j].any() and lam[np.argmax(np.abs(lam[:, j])), j] < 0:
                lam[:, j] = -lam[:, j]
        gram = lam.T @ lam + 1e-8 * np.eye(r)
        f = np.linalg.solve(gram, lam.T @ y)
    sv = np.empty((m + r, 3))
    sv[:, 1] = 0.9
    sv[:, 2] = 0.2
    sv[:m, 0] = log_var
    sv[m:, 0] = 0.0
    h = np.zeros((m + r, T + 1))
    h[:m] = log_var[:, None]
    return SamplerState(lam, sv, h, f)


def _latent_columns(config: SamplerConfig, T: int):
    if not config.store_latents:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if config.latent_times is None:
        return np.arange(T + 1, dtype=np.int64), np.arange(T, dtype=np.int64)
    times = np.array(config.latent_times, dtype=np.int64)
    if times.size and (times.min() < 1 or times.max() > T):
        raise ValueError(f"latent_times must lie in 1..{T}")
    return times, times - 1


def run_sampler(y, config: SamplerConfig, priors: PriorConfig | None = None,
                init: tuple[FsvParams, LatentState] | None = None,
                r: int | None = None, chunk: int = 500) -> ChainOutput:
    """Run burn-in plus ``config.draws`` iterations and collect every ``thin``-th draw.

    The factor count is taken from ``config.restriction``, ``init`` or ``r``.
    """
    priors = priors or PriorConfig()
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or not np.all(np.isfinite(y)):
        raise ValueError("data must be a finite (m, T) matrix")
    m, T = y.shape
    pattern = config.restriction
    if pattern is None:
        if init is not None:
            pattern = init[0].pattern
        elif r is not None:
            pattern = RestrictionPattern.lower_triangular(m, r)
        else:
            raise ValueError("factor count unknown: give a restriction pattern, init or r")
    if pattern.shape[0] != m:
        raise ValueError("restriction pattern does not match the data")
    r = pattern.shape[1]
    if init is None:
        state = default_initial_state(y, pattern)
    else:
        if init[0].pattern != pattern:
            raise ValueError("initial parameters use a different restriction pattern")
        state = SamplerState.from_model(*init)
        if state.h.shape != (m + r, T + 1) or state.f.shape != (r, T):
            raise ValueError("initial latent state does not match the data")
    streams = SamplerStreams(config.rng_seed, m, r)
    kern = _Kernel(y, state, pattern, priors, config.interweaving, streams)
    h_cols, f_cols = _latent_columns(config, T)
    n_store = config.n_stored
    out = _empty_out(m, r, h_cols.size, f_cols.size, n_store)
    total = config.burn_in + config.draws
    started = time.perf_counter()
    done = 0
    pos = 0
    while done < total:
        step = min(chunk, total - done)
        pos = kern.run(step, done, config.burn_in, config.thin, out, h_cols, f_cols, pos,
                       config.track_invariants)
        done += step
        log.debug("%d/%d iterations", done, total)
    elapsed = time.perf_counter() - started
    counts = kern.deep_counts
    meta = {
        "version": __version__,
        "seed": config.rng_seed,
        "config": _config_echo(config, pattern),
        "priors": asdict(priors),
        "m": m, "r": r, "T": T,
        "iterations": total,
        "seconds": elapsed,
        "deep_proposed": counts[:, 0].tolist(),
        "deep_accepted": counts[:, 1].tolist(),
    }
    if config.track_invariants:
        meta["max_mean_drift"] = float(kern.drift[0])
        meta["max_ratio_drift"] = float(kern.drift[1])
    store = config.store_latents
    return ChainOutput(out[0], out[1], out[2] if store else None, out[3] if store else None,
                       h_cols if store else None, (f_cols + 1) if store else None, meta)


def _config_echo(config: SamplerConfig, pattern: RestrictionPattern) -> dict:
    return {
        "draws": config.draws,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "interweaving": config.interweaving,
        "restriction": pattern.kind,
        "restriction_mask": pattern.free.astype(int).tolist(),
        "rng_seed": config.rng_seed,
        "store_latents": config.store_latents,
        "latent_times": list(config.latent_times) if config.latent_times is not None else None,
        "track_invariants": config.track_invariants,
    }
