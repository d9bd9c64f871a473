"""Returns ingestion, flat key=value configuration files and draw persistence."""

from __future__ import annotations

import csv
import json
import math
import subprocess
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .gibbs import ChainOutput, SamplerConfig
from .model import FsvParams, LatentState, PriorConfig, RestrictionPattern, SvParams

FLOAT_FMT = "%.17g"


class ParseError(ValueError):
    pass


# --------------------------------------------------------------------------- returns

def load_returns_csv(path, demean: bool = True) -> tuple[np.ndarray, list[str]]:
    """Read a header + one-row-per-time-point CSV into an (m, T) matrix and labels."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(n, r) for n, r in enumerate(rows, start=1) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ParseError(f"{path}: need a header row and at least one data row")
    labels = [c.strip() for c in rows[0][1]]
    width = len(labels)
    data = np.empty((len(rows) - 1, width))
    for k, (line, row) in enumerate(rows[1:]):
        if len(row) != width:
            raise ParseError(f"{path}:{line}: expected {width} fields, found {len(row)}")
        for c, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"{path}:{line}: non-numeric cell {cell!r} "
                                 f"in column {labels[c]!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"{path}:{line}: non-finite cell {cell!r}")
            data[k, c] = value
    y = data.T.copy()
    if demean:
        y -= y.mean(axis=1, keepdims=True)
    return y, labels


def write_matrix(path, matrix, header: list[str]) -> None:
    """Write rows of ``matrix`` under ``header`` with round-trip precision."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[1] != len(header):
        raise ValueError("header length does not match the number of columns")
    np.savetxt(path, matrix, fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")


def read_matrix(path) -> tuple[np.ndarray, list[str]]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(header))
    return data, header


def write_returns_csv(path, y, labels: Optional[list[str]] = None) -> None:
    y = np.asarray(y, dtype=float)
    labels = labels or [f"y{i + 1}" for i in range(y.shape[0])]
    write_matrix(path, y.T, labels)


# --------------------------------------------------------------------------- flat configs

def parse_flat(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{source}:{n}: empty key")
        out[key] = value
    return out


def read_flat(path) -> dict[str, str]:
    path = Path(path)
    return parse_flat(path.read_text(), str(path))


def format_flat(items: dict) -> str:
    lines = []
    for key, value in items.items():
        if isinstance(value, float):
            value = repr(value)
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = ""
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _to_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class RunConfig:
    data: str
    out: str
    factors: int
    demean: bool = True
    draws: int = 1000
    burn_in: int = 0
    thin: int = 1
    interweaving: str = "deep"
    restriction: str = "lower_triangular"
    seed: int = 0
    store_latents: bool = False
    latent_times: Optional[tuple[int, ...]] = None
    track_invariants: bool = False
    init: Optional[str] = None
    B_lambda: float = 1.0
    b_mu: float = 0.0
    B_mu: float = 100.0
    a0: float = 20.0
    b0: float = 1.5
    B_sigma: float = 1.0
    B0: float = 1e8

    def __post_init__(self):
        if self.factors < 0:
            raise ValueError("factors must be non-negative")
        if self.restriction not in ("lower_triangular", "unrestricted"):
            raise ValueError("restriction must be lower_triangular or unrestricted")
        self.priors()  # validates hyperparameters

    def priors(self) -> PriorConfig:
        return PriorConfig(B_lambda=self.B_lambda, b_mu=self.b_mu, B_mu=self.B_mu, a0=self.a0,
                           b0=self.b0, B_sigma=self.B_sigma, B0=self.B0)

    def pattern(self, m: int) -> RestrictionPattern:
        if self.restriction == "unrestricted":
            return RestrictionPattern.unrestricted(m, self.factors)
        return RestrictionPattern.lower_triangular(m, self.factors)

    def sampler(self, m: int) -> SamplerConfig:
        return SamplerConfig(draws=self.draws, burn_in=self.burn_in, thin=self.thin,
                             interweaving=self.interweaving, restriction=self.pattern(m),
                             rng_seed=self.seed, store_latents=self.store_latents,
                             latent_times=self.latent_times,
                             track_invariants=self.track_invariants)

    def check_paths(self) -> None:
        if not Path(self.data).is_file():
            raise FileNotFoundError(f"data file not found: {self.data}")
        if self.init is not None and not Path(self.init).is_dir():
            raise FileNotFoundError(f"initial-value directory not found: {self.init}")

    def as_flat(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_flat(cls, items: dict[str, str], **overrides) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in items.items():
            if key not in known:
                continue  # manifests carry extra run information
            kwargs[key] = _convert(key, value)
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        missing = [k for k in ("data", "out", "factors") if k not in kwargs]
        if missing:
            raise ParseError(f"missing required setting(s): {', '.join(missing)}")
        return cls(**kwargs)


_INT_KEYS = {"factors", "draws", "burn_in", "thin", "seed"}
_BOOL_KEYS = {"demean", "store_latents", "track_invariants"}
_FLOAT_KEYS = {"B_lambda", "b_mu", "B_mu", "a0", "b0", "B_sigma", "B0"}


def _convert(key: str, value: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _BOOL_KEYS:
            return _to_bool(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "latent_times":
            return tuple(int(v) for v in value.split(",")) if value else None
        if key == "init":
            return value or None
    except ValueError:
        raise ParseError(f"invalid value for {key}: {value!r}") from None
    return value


# --------------------------------------------------------------------------- parameters

def params_to_flat(params: FsvParams) -> dict:
    out = {"m": params.m, "r": params.r, "restriction": params.pattern.kind}
    for i in range(params.m):
        for j in range(params.r):
            out[f"lambda_{i + 1}_{j + 1}"] = float(params.loadings[i, j])
    for i, sv in enumerate(params.sv):
        out[f"mu_{i + 1}"] = float(sv.mu)
        out[f"phi_{i + 1}"] = float(sv.phi)
        out[f"sigma_{i + 1}"] = float(sv.sigma)
    return out


def params_from_flat(items: dict[str, str]) -> FsvParams:
    try:
        m, r = int(items["m"]), int(items["r"])
        kind = items.get("restriction", "lower_triangular")
        pattern = (RestrictionPattern.unrestricted(m, r) if kind == "unrestricted"
                   else RestrictionPattern.lower_triangular(m, r))
        lam = np.zeros((m, r))
        for i in range(m):
            for j in range(r):
                lam[i, j] = float(items.get(f"lambda_{i + 1}_{j + 1}", 0.0))
        sv = tuple(SvParams(float(items.get(f"mu_{i + 1}", 0.0)), float(items[f"phi_{i + 1}"]),
                            float(items[f"sigma_{i + 1}"])) for i in range(m + r))
    except KeyError as exc:
        raise ParseError(f"parameter file is missing {exc.args[0]}") from None
    return FsvParams(lam, pattern, sv)


def write_truth(directory, params: FsvParams, state: LatentState) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "params.txt").write_text(format_flat(params_to_flat(params)))
    n, T1 = state.h.shape
    write_matrix(d / "h.csv", state.h.T, [f"h_{i + 1}" for i in range(n)])
    write_matrix(d / "f.csv", state.f.T, [f"f_{j + 1}" for j in range(state.f.shape[0])])


def read_truth(directory) -> tuple[FsvParams, LatentState]:
    d = Path(directory)
    params = params_from_flat(read_flat(d / "params.txt"))
    h, _ = read_matrix(d / "h.csv")
    f, _ = read_matrix(d / "f.csv")
    f = f.T if f.size else np.zeros((params.r, h.shape[0] - 1))
    return params, LatentState(h.T.copy(), np.ascontiguousarray(f))


# --------------------------------------------------------------------------- draws

def version_string() -> str:
    """Package version, with ``git describe`` appended when run from a checkout."""
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                              cwd=Path(__file__).resolve().parent, capture_output=True,
                              text=True, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def loadings_header(m: int, r: int) -> list[str]:
    return [f"lambda_{i + 1}_{j + 1}" for i in range(m) for j in range(r)]


def sv_header(n: int) -> list[str]:
    return [f"{name}_{i + 1}" for i in range(n) for name in ("mu", "phi", "sigma")]


def write_draws(chain: ChainOutput, directory, run: Optional[RunConfig] = None) -> Path:
    """Write one CSV per block plus ``manifest.txt``; returns the manifest path."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {d}: {exc}") from exc
    K, m, r = chain.loadings.shape
    n = chain.sv.shape[1]
    write_matrix(d / "loadings.csv", chain.loadings.reshape(K, m * r), loadings_header(m, r))
    write_matrix(d / "sv.csv", chain.sv.reshape(K, n * 3), sv_header(n))
    if chain.h is not None:
        times = chain.h_times
        write_matrix(d / "h.csv", chain.h.reshape(K, -1),
                     [f"h_{i + 1}_t{t}" for i in range(n) for t in times])
    if chain.f is not None:
        times = chain.f_times
        write_matrix(d / "f.csv", chain.f.reshape(K, -1),
                     [f"f_{j + 1}_t{t}" for j in range(r) for t in times])
    meta = chain.meta
    manifest = {}
    if run is not None:
        manifest.update(run.as_flat())
    cfg = meta.get("config", {})
    manifest.setdefault("seed", meta.get("seed"))
    manifest.update({
        "version": version_string(),
        "m": m, "r": r, "T": meta.get("T"),
        "stored_draws": K,
        "restriction_mask": json.dumps(cfg.get("restriction_mask")),
        "deep_proposed": meta.get("deep_proposed", []),
        "deep_accepted": meta.get("deep_accepted", []),
    })
    for key in ("max_mean_drift", "max_ratio_drift"):
        if key in meta:
            manifest[key] = meta[key]
    if run is None:
        for key in ("draws", "burn_in", "thin", "interweaving", "store_latents",
                    "track_invariants"):
            manifest[key] = cfg.get(key)
        manifest["restriction"] = cfg.get("restriction")
        manifest.update(meta.get("priors", {}))
    path = d / "manifest.txt"
    path.write_text(format_flat(manifest))
    return path


def read_draws(directory) -> ChainOutput:
    """Rebuild a ChainOutput from a directory written by :func:`write_draws`."""
    d = Path(directory)
    manifest = read_flat(d / "manifest.txt")
    m, r = int(manifest["m"]), int(manifest["r"])
    lam, _ = read_matrix(d / "loadings.csv")
    sv, _ = read_matrix(d / "sv.csv")
    K = lam.shape[0]
    chain = ChainOutput(lam.reshape(K, m, r), sv.reshape(K, m + r, 3))
    if (d / "h.csv").exists():
        h, header = read_matrix(d / "h.csv")
        times = np.array([int(c.rsplit("_t", 1)[1]) for c in header[: len(header) // (m + r)]])
        chain.h, chain.h_times = h.reshape(K, m + r, -1), times
    if (d / "f.csv").exists() and r > 0:
        f, header = read_matrix(d / "f.csv")
        times = np.array([int(c.rsplit("_t", 1)[1]) for c in header[: len(header) // r]])
        chain.f, chain.f_times = f.reshape(K, r, -1), times
    mask = manifest.get("restriction_mask")
    chain.meta = {"manifest": manifest,
                  "config": {"restriction_mask": json.loads(mask) if mask else None}}
    return chain


def run_config_from_manifest(path, **overrides) -> RunConfig:
    return RunConfig.from_flat(read_flat(path), **overrides)


def with_overrides(run: RunConfig, **overrides) -> RunConfig:
    return replace(run, **{k: v for k, v in overrides.items() if v is not None})
