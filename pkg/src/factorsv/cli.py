"""Command-line entry point: ``simulate``, ``fit``, ``diag`` and ``summarize``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, io
from .gibbs import INTERWEAVING_MODES, THREADS_ENV, run_sampler
from .model import ModelDims, simulate_fsv, table_ai_params

log = logging.getLogger("factorsv")


def _cmd_simulate(args) -> int:
    if args.table_ai == bool(args.params):
        raise ValueError("give exactly one of --table-ai or --params")
    params = table_ai_params() if args.table_ai else io.params_from_flat(io.read_flat(args.params))
    y, latent = simulate_fsv(ModelDims(params.m, params.r, args.T), params, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_returns_csv(out / "returns.csv", y)
    io.write_truth(out / "truth", params, latent)
    print(f"wrote {out / 'returns.csv'} and {out / 'truth'}")
    return 0


def _fit_overrides(args) -> dict:
    latent_times = None
    if args.latent_times:
        latent_times = tuple(int(v) for v in args.latent_times.split(","))
    return dict(data=args.data, out=args.out, factors=args.factors, draws=args.draws,
                burn_in=args.burn_in, thin=args.thin, interweaving=args.interweaving,
                restriction=args.restriction, seed=args.seed, demean=args.demean,
                store_latents=args.store_latents, latent_times=latent_times,
                track_invariants=args.track_invariants, init=args.init)


def _cmd_fit(args) -> int:
    items = {}
    if args.manifest:
        items.update(io.read_flat(args.manifest))
    if args.config:
        items.update(io.read_flat(args.config))
    run = io.RunConfig.from_flat(items, **_fit_overrides(args))
    run.check_paths()
    y, labels = io.load_returns_csv(run.data, demean=run.demean)
    init = io.read_truth(run.init) if run.init else None
    config = run.sampler(y.shape[0])
    chain = run_sampler(y, config, run.priors(), init=init)
    manifest = io.write_draws(chain, run.out, run)
    log.info("%d iterations in %.1f s", chain.meta["iterations"], chain.meta["seconds"])
    print(f"wrote {chain.n_draws} draws to {run.out} (manifest {manifest})")
    return 0


def _fmt(value, width=10, digits=2) -> str:
    if value is None:
        return " " * width
    return f"{value:{width}.{digits}f}"


def _cmd_diag(args) -> int:
    chain = io.read_draws(args.draws_dir)
    K, m, r = chain.loadings.shape
    mask = chain.meta["config"]["restriction_mask"]
    free = np.ones((m, r), bool) if mask is None else np.asarray(mask, bool)
    lines = [f"Inefficiency factors of the loadings ({K} draws; blank = restricted)"]
    lines.append("row " + "".join(f"{'col ' + str(j + 1):>10}" for j in range(r)))
    for i in range(m):
        cells = []
        for j in range(r):
            x = chain.loadings[:, i, j]
            cells.append(_fmt(diagnostics.inefficiency_factor(x, args.method)
                              if free[i, j] and np.ptp(x) > 0 else None))
        lines.append(f"{i + 1:<4}" + "".join(cells))
    lines.append("")
    lines.append("Inefficiency factors of the SV parameters")
    lines.append(f"{'series':<7}{'mu':>10}{'phi':>10}{'sigma':>10}")
    for i in range(m + r):
        vals = [chain.sv[:, i, c] for c in range(3)]
        cells = [_fmt(diagnostics.inefficiency_factor(v, args.method) if np.ptp(v) > 0 else None)
                 for v in vals]
        lines.append(f"{i + 1:<7}" + "".join(cells))
    latent = [("h", chain.h, chain.h_times), ("f", chain.f, chain.f_times)]
    if any(arr is not None for _, arr, _ in latent):
        lines.append("")
        lines.append("Inefficiency factors of stored latent states")
        for name, arr, times in latent:
            if arr is None:
                continue
            for i in range(arr.shape[1]):
                for c, t in enumerate(times):
                    x = arr[:, i, c]
                    val = diagnostics.inefficiency_factor(x, args.method) if np.ptp(x) > 0 else None
                    lines.append(f"{name}_{i + 1}_t{t:<8}{_fmt(val)}")
    if args.acf_lags:
        lags = [int(v) for v in args.acf_lags.split(",")]
        lines.append("")
        lines.append("Autocorrelations of the loadings")
        lines.append(f"{'cell':<14}" + "".join(f"{'lag ' + str(l):>10}" for l in lags))
        for i in range(m):
            for j in range(r):
                x = chain.loadings[:, i, j]
                if not free[i, j] or np.ptp(x) == 0:
                    continue
                rho = diagnostics.acf(x, max(lags))
                lines.append(f"{f'lambda_{i + 1}_{j + 1}':<14}"
                             + "".join(_fmt(rho[l], digits=3) for l in lags))
    _emit("\n".join(lines), args.output)
    return 0


def _cmd_summarize(args) -> int:
    chain = io.read_draws(args.draws_dir)
    if args.sign == "maximin":
        chain.loadings, _ = diagnostics.sign_identify_maximin(chain.loadings)
    elif args.sign == "diagonal":
        chain.loadings = diagnostics.sign_identify_diagonal(chain.loadings)
    if args.reorder:
        m = chain.loadings.shape[1]
        h_fac = chain.h[:, m:] if chain.h is not None else None
        res = diagnostics.reorder_columns_by_median(chain.loadings, chain.f, h_fac)
        chain.loadings = res.loadings
        perm = res.permutation
        sv = chain.sv.copy()
        sv[:, m:] = chain.sv[:, m + perm]
        chain.sv = sv
        mask = chain.meta["config"]["restriction_mask"]
        if mask is not None:
            chain.meta["config"]["restriction_mask"] = np.asarray(mask)[:, perm].tolist()
        print(f"factor order after reordering: {' '.join(str(p + 1) for p in perm)}")
    rows = diagnostics.posterior_summary(chain, args.method)
    lines = [f"{'parameter':<16}{'mean':>11}{'sd':>11}{'5%':>11}{'50%':>11}{'95%':>11}{'IF':>11}"]
    for s in rows:
        lines.append(f"{s.name:<16}" + "".join(_fmt(v, 11, 4) for v in
                                               (s.mean, s.sd, s.q05, s.q50, s.q95))
                     + (_fmt(s.inefficiency, 11, 2) if s.inefficiency is not None
                        else f"{'n/a':>11}"))
    _emit("\n".join(lines), args.output)
    return 0


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="factorsv", description="Factor stochastic volatility models via MCMC.",
        epilog=f"Set {THREADS_ENV} to run the volatility updates on several threads.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate returns and latent states")
    s.add_argument("--table-ai", action="store_true",
                   help="use the 10-series, 2-factor benchmark parameters")
    s.add_argument("--params", help="key = value parameter file")
    s.add_argument("--T", type=int, default=1000, help="number of time points")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="sim", help="output directory")
    s.set_defaults(func=_cmd_simulate)

    f = sub.add_parser("fit", help="run the Gibbs sampler")
    f.add_argument("--data", help="returns CSV (header row, one row per time point)")
    f.add_argument("--out", help="draws directory")
    f.add_argument("--config", help="key = value run configuration")
    f.add_argument("--manifest", help="re-run the configuration recorded in a manifest")
    f.add_argument("--factors", type=int)
    f.add_argument("--draws", type=int)
    f.add_argument("--burn-in", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--interweaving", choices=sorted(INTERWEAVING_MODES))
    f.add_argument("--restriction", choices=["lower_triangular", "unrestricted"])
    f.add_argument("--seed", type=int)
    f.add_argument("--demean", action=argparse.BooleanOptionalAction, default=None)
    f.add_argument("--store-latents", action=argparse.BooleanOptionalAction, default=None)
    f.add_argument("--latent-times", help="comma-separated time points to store (1-based)")
    f.add_argument("--track-invariants", action=argparse.BooleanOptionalAction, default=None)
    f.add_argument("--init", help="directory with params.txt, h.csv, f.csv starting values")
    f.set_defaults(func=_cmd_fit)

    for name, func, helptext in (("diag", _cmd_diag, "inefficiency factors and ACF tables"),
                                 ("summarize", _cmd_summarize, "posterior summary table")):
        d = sub.add_parser(name, help=helptext)
        d.add_argument("draws_dir")
        d.add_argument("--method", choices=["ar", "geyer"], default="ar",
                       help="inefficiency factor estimator")
        d.add_argument("--output", help="write the table to this file")
        d.set_defaults(func=func)
        if name == "diag":
            d.add_argument("--acf-lags", default="1,10,100",
                           help="comma-separated lags for the ACF table ('' to skip)")
        else:
            d.add_argument("--sign", choices=["none", "maximin", "diagonal"], default="none",
                           help="sign identification applied to the loadings draws")
            d.add_argument("--reorder", action="store_true",
                           help="order factors by their largest posterior-median loading")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # runtime failures map to exit code 1
        print(f"factorsv {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
