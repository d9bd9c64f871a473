"""Generalized Inverse Gaussian variates and log-density.

GIG(p, a, b) has density proportional to ``x**(p - 1) * exp(-(a * x + b / x) / 2)``.
Sampling follows the Hoermann-Leydold (2014) scheme: ratio-of-uniforms with
mode shift for large order or concentration, ratio-of-uniforms without shift
in the intermediate region, and the three-piece rejection envelope for small
order and concentration. Boundary cases with a or b below ``BOUNDARY_TOL``
are drawn exactly as Gamma or Inverse-Gamma variates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate, special

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-14
MAX_TRIALS = 1_000_000


@dataclass(frozen=True)
class GigParams:
    p: float
    a: float
    b: float

    def __post_init__(self):
        check_gig_params(self.p, self.a, self.b)


def check_gig_params(p: float, a: float, b: float) -> None:
    if not (math.isfinite(p) and math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"GIG parameters must be finite, got p={p}, a={a}, b={b}")
    if a < 0 or b < 0:
        raise ValueError(f"GIG requires a >= 0 and b >= 0, got a={a}, b={b}")
    if a > BOUNDARY_TOL and b > BOUNDARY_TOL:
        return
    if a > BOUNDARY_TOL and p > 0:
        return
    if b > BOUNDARY_TOL and p < 0:
        return
    raise ValueError(f"GIG parameters outside the valid region: p={p}, a={a}, b={b}")


@njit(cache=True)
def _gig_mode(lam, omega):
    if lam >= 1.0:
        return (math.sqrt((lam - 1.0) ** 2 + omega * omega) + (lam - 1.0)) / omega
    return omega / (math.sqrt((1.0 - lam) ** 2 + omega * omega) + (1.0 - lam))


@njit(cache=True)
def _rou_shift(lam, omega, gen):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)
    # extremes of (x - xm) * sqrt(f(x)) solve a depressed cubic
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    pp = b - a * a / 3.0
    qq = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c
    fi = math.acos(-qq / (2.0 * math.sqrt(-(pp * pp * pp) / 27.0)))
    fak = 2.0 * math.sqrt(-pp / 3.0)
    y1 = fak * math.cos(fi / 3.0) - a / 3.0
    y2 = fak * math.cos(fi / 3.0 + 4.0 / 3.0 * math.pi) - a / 3.0
    uplus = (y1 - xm) * math.exp(t * math.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * math.exp(t * math.log(y2) - s * (y2 + 1.0 / y2) - nc)
    for trial in range(1, MAX_TRIALS + 1):
        u = uminus + gen.random() * (uplus - uminus)
        v = gen.random()
        x = u / v + xm
        if x > 0.0 and math.log(v) <= t * math.log(x) - s * (x + 1.0 / x) - nc:
            return x, trial
    return -1.0, MAX_TRIALS


@njit(cache=True)
def _rou_noshift(lam, omega, gen):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + math.sqrt((lam + 1.0) ** 2 + omega * omega)) / omega
    um = math.exp(0.5 * (lam + 1.0) * math.log(ym) - s * (ym + 1.0 / ym) - nc)
    for trial in range(1, MAX_TRIALS + 1):
        u = um * gen.random()
        v = gen.random()
        x = u / v
        if math.log(v) <= t * math.log(x) - s * (x + 1.0 / x) - nc:
            return x, trial
    return -1.0, MAX_TRIALS


@njit(cache=True)
def _three_piece(lam, omega, gen):
    # 0 <= lam < 1, small omega
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = math.exp((lam - 1.0) * math.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    a0 = k0 * x0
    if x0 >= 2.0 / omega:
        k1 = 0.0
        a1 = 0.0
        k2 = x0 ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-omega * x0 / 2.0) / omega
    else:
        k1 = math.exp(-omega)
        if lam == 0.0:
            a1 = k1 * math.log(2.0 / (omega * omega))
        else:
            a1 = k1 / lam * ((2.0 / omega) ** lam - x0**lam)
        k2 = (2.0 / omega) ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-1.0) / omega
    total = a0 + a1 + a2
    for trial in range(1, MAX_TRIALS + 1):
        v = total * gen.random()
        if v <= a0:
            x = x0 * v / a0
            hx = k0
        elif v - a0 <= a1:
            v -= a0
            if lam == 0.0:
                x = omega * math.exp(math.exp(omega) * v)
                hx = k1 / x
            else:
                x = (x0**lam + lam / k1 * v) ** (1.0 / lam)
                hx = k1 * x ** (lam - 1.0)
        else:
            v -= a0 + a1
            lo = max(x0, 2.0 / omega)
            x = -2.0 / omega * math.log(math.exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v)
            hx = k2 * math.exp(-omega / 2.0 * x)
        u = gen.random() * hx
        if math.log(u) <= (lam - 1.0) * math.log(x) - omega / 2.0 * (x + 1.0 / x):
            return x, trial
    return -1.0, MAX_TRIALS


@njit(cache=True)
def gig_draw_counted(p, a, b, gen):
    """One GIG(p, a, b) draw plus the number of rejection trials used.

    Parameters are assumed valid. A non-positive return value signals that
    the trial cap was hit.
    """
    if b < BOUNDARY_TOL:
        return gen.gamma(p, 2.0 / a), 1
    if a < BOUNDARY_TOL:
        return 0.5 * b / gen.gamma(-p, 1.0), 1
    lam = abs(p)
    omega = math.sqrt(a * b)
    scale = math.sqrt(b / a)
    if lam > 2.0 or omega > 3.0:
        y, trials = _rou_shift(lam, omega, gen)
    elif lam >= 1.0 - 2.25 * omega * omega or omega > 0.2:
        y, trials = _rou_noshift(lam, omega, gen)
    else:
        y, trials = _three_piece(lam, omega, gen)
    if y <= 0.0:
        return -1.0, trials
    if p < 0.0:
        return scale / y, trials
    return scale * y, trials


@njit(cache=True)
def gig_draw(p, a, b, gen):
    x, _ = gig_draw_counted(p, a, b, gen)
    if x <= 0.0:
        raise RuntimeError("GIG rejection sampler exceeded its trial cap")
    return x


@njit(cache=True)
def _gig_fill(p, a, b, gen, out):
    total = 0
    for i in range(out.shape[0]):
        x, trials = gig_draw_counted(p, a, b, gen)
        total += trials
        if x <= 0.0:
            return -1
        out[i] = x
    return total


def sample_gig(params: GigParams, rng: np.random.Generator, size: int | None = None):
    """Draw from GIG(p, a, b) using ``rng``; returns a float or an array of ``size`` draws."""
    p, a, b = float(params.p), float(params.a), float(params.b)
    check_gig_params(p, a, b)
    n = 1 if size is None else int(size)
    out = np.empty(n)
    total = _gig_fill(p, a, b, rng, out)
    if total < 0:
        raise RuntimeError(f"GIG sampler hit the trial cap of {MAX_TRIALS} for {params}")
    log.debug("GIG%s: acceptance rate %.4f", (p, a, b), n / total)
    return float(out[0]) if size is None else out


def log_bessel_k(nu: float, x: float) -> float:
    """log K_nu(x) for x > 0, robust to large orders."""
    nu = abs(float(nu))
    val = special.kve(nu, x)
    if np.isfinite(val) and val > 0:
        return float(np.log(val) - x)
    # K_nu(x) = int_0^inf exp(-x cosh u) cosh(nu u) du, integrated around its peak
    def log_integrand(u):
        return -x * np.cosh(u) + nu * u + np.log1p(np.exp(-2.0 * nu * u)) - np.log(2.0)

    u_peak = np.arcsinh(nu / x)
    ref = log_integrand(u_peak)
    width = 1.0 / np.sqrt(x * np.cosh(u_peak))
    lo, hi = max(0.0, u_peak - 40 * width), u_peak + 40 * width
    val, _ = integrate.quad(lambda u: np.exp(log_integrand(u) - ref), lo, hi,
                            points=[u_peak], limit=200, epsabs=0, epsrel=1e-13)
    return float(ref + np.log(val))


def gig_log_density(x: float, params: GigParams) -> float:
    """Normalized GIG log-density at ``x > 0``."""
    if not x > 0:
        raise ValueError(f"GIG density is defined for x > 0, got {x}")
    p, a, b = params.p, params.a, params.b
    kernel = (p - 1.0) * math.log(x) - 0.5 * (a * x + b / x)
    if b < BOUNDARY_TOL:
        log_norm = p * math.log(0.5 * a) - special.gammaln(p)
    elif a < BOUNDARY_TOL:
        log_norm = -p * math.log(0.5 * b) - special.gammaln(-p)
    else:
        log_norm = 0.5 * p * math.log(a / b) - math.log(2.0) - log_bessel_k(p, math.sqrt(a * b))
    return float(kernel + log_norm)
