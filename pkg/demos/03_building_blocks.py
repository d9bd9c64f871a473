"""The pieces the sampler is built from, used on their own.

1. The generalized inverse Gaussian sampler that drives the shallow redraw.
2. A univariate stochastic volatility fit with the same update the factor
   model uses for every series.
3. The conjugate loadings and factor draws.
"""

# %% GIG draws against exact moments
import numpy as np

from factorsv.gibbs import SamplerConfig, factors_posterior, run_sampler, sample_factors_at_t
from factorsv.gig import GigParams, gig_log_density, log_bessel_k, sample_gig
from factorsv.model import PriorConfig, SvParams
from factorsv.sv import SvSeriesView, sv_update


def gig_mean(p, a, b):
    # log-scale Bessel functions; plain K underflows at orders like -499.5
    w = np.sqrt(a * b)
    return np.sqrt(b / a) * np.exp(log_bessel_k(p + 1, w) - log_bessel_k(p, w))


rng = np.random.default_rng(0)
for p, a, b in [(1.5, 2.0, 3.0), (-499.5, 2.0, 50.0), (0.3, 0.01, 0.01)]:
    x = sample_gig(GigParams(p, a, b), rng, size=200_000)
    print(f"GIG({p}, {a}, {b}): sample mean {x.mean():.5g}, exact {gig_mean(p, a, b):.5g}")
print("log density at 1 for GIG(0.5, 1, 1):", gig_log_density(1.0, GigParams(0.5, 1.0, 1.0)))

# %% Simulate a single volatility series
T = 1500
true = SvParams(mu=-1.0, phi=0.95, sigma=0.25)
h = np.empty(T + 1)
h[0] = true.mu + true.sigma / np.sqrt(1 - true.phi**2) * rng.standard_normal()
for t in range(1, T + 1):
    h[t] = true.mu + true.phi * (h[t - 1] - true.mu) + true.sigma * rng.standard_normal()
obs = np.exp(h[1:] / 2) * rng.standard_normal(T)

# %% One update at a time
# sv_update draws the whole log-variance path and then the three parameters.
view = SvSeriesView(obs, np.full(T + 1, np.log(obs.var())), SvParams(np.log(obs.var()), 0.9, 0.2))
keep = []
for it in range(3000):
    path, p = sv_update(view, PriorConfig(), rng)
    view = SvSeriesView(obs, path, p)
    if it >= 500:
        keep.append((p.mu, p.phi, p.sigma))
keep = np.array(keep)
print("\nposterior means (mu, phi, sigma):", np.round(keep.mean(axis=0), 3),
      "truth", (true.mu, true.phi, true.sigma))

# %% The same model through the compiled sampler
# With zero factors the factor model reduces to independent SV series.
chain = run_sampler(obs[None, :], SamplerConfig(draws=20_000, burn_in=1000, rng_seed=2), r=0)
print("compiled sampler, 20k draws:", np.round(chain.sv[:, 0].mean(axis=0), 3))

# %% Conjugate factor draw
# Given loadings and log-variances the factors are Gaussian at each time point.
lam = np.array([[1.0, 0.0], [0.6, 0.8], [0.3, 0.4]])
h_t = np.array([-1.0, -1.2, -0.8, 0.0, 0.0])
y_t = np.array([0.5, 0.2, -0.1])
mean, cov = factors_posterior(y_t, lam, h_t)
draws = np.array([sample_factors_at_t(0, y_t, lam, h_t, rng) for _ in range(50_000)])
print("\nfactor posterior mean", np.round(mean, 4), "vs draws", np.round(draws.mean(axis=0), 4))
print("factor posterior sd  ", np.round(np.sqrt(np.diag(cov)), 4), "vs draws",
      np.round(draws.std(axis=0), 4))
