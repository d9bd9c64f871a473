import os
import subprocess
import sys

import numpy as np
import pytest

from factorsv import io
from factorsv.cli import main
from factorsv.gibbs import THREADS_ENV, SamplerConfig, run_sampler
from factorsv.model import ModelDims, simulate_fsv, table_ai_params


# --------------------------------------------------------------------------- returns CSV

def _write(path, text):
    path.write_text(text)
    return path


def test_zero_csv_is_transposed(tmp_path):
    y, labels = io.load_returns_csv(_write(tmp_path / "z.csv", "a,b\n0,0\n0,0\n0,0\n"),
                                    demean=False)
    assert y.shape == (2, 3) and np.all(y == 0) and labels == ["a", "b"]


def test_demean(tmp_path):
    y, _ = io.load_returns_csv(_write(tmp_path / "d.csv", "x\n1\n2\n3\n"), demean=True)
    np.testing.assert_array_equal(y, [[-1.0, 0.0, 1.0]])


@pytest.mark.parametrize("text,line", [("a,b\n1,2\n3\n", ":3:"), ("a,b\n1,2\n3,x\n", ":3:"),
                                       ("a,b\n1,nan\n", ":2:")])
def test_parse_errors_carry_line_numbers(tmp_path, text, line):
    with pytest.raises(io.ParseError, match=line):
        io.load_returns_csv(_write(tmp_path / "bad.csv", text))


def test_too_few_rows(tmp_path):
    with pytest.raises(io.ParseError):
        io.load_returns_csv(_write(tmp_path / "short.csv", "a,b\n"))


def test_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 4)) * 10.0 ** rng.integers(-300, 300, size=(50, 4))
    x[0, 0] = 5e-324
    x[1, 1] = -0.0
    io.write_matrix(tmp_path / "m.csv", x, ["a", "b", "c", "d"])
    back, header = io.read_matrix(tmp_path / "m.csv")
    assert header == ["a", "b", "c", "d"]
    assert np.array_equal(back.view(np.int64), x.view(np.int64))
    io.write_returns_csv(tmp_path / "r.csv", x.T)
    y, _ = io.load_returns_csv(tmp_path / "r.csv", demean=False)
    assert np.array_equal(y, x.T)


def test_flat_config_errors():
    assert io.parse_flat("# comment\n a = 1 \n\nb=x y\n") == {"a": "1", "b": "x y"}
    with pytest.raises(io.ParseError, match=":2"):
        io.parse_flat("a = 1\nnot a pair\n")


def test_params_round_trip():
    p = table_ai_params()
    q = io.params_from_flat(io.parse_flat(io.format_flat(io.params_to_flat(p))))
    assert np.array_equal(q.loadings, p.loadings)
    assert np.array_equal(q.pattern.free, p.pattern.free)
    assert q.sv == p.sv


# --------------------------------------------------------------------------- draws

@pytest.fixture(scope="module")
def small_chain():
    p = table_ai_params()
    y, truth = simulate_fsv(ModelDims(p.m, p.r, 120), p, 3)
    cfg = SamplerConfig(draws=200, burn_in=20, interweaving="deep", rng_seed=11,
                        store_latents=True, latent_times=(1, 120))
    return run_sampler(y, cfg, init=(p, truth))


def test_write_draws_layout(tmp_path, small_chain):
    io.write_draws(small_chain, tmp_path)
    lam, header = io.read_matrix(tmp_path / "loadings.csv")
    assert lam.shape == (200, 20) and header[2] == "lambda_2_1" and header[1] == "lambda_1_2"
    assert np.all(lam[:, 1] == 0.0)
    _, sv_header = io.read_matrix(tmp_path / "sv.csv")
    assert "phi_11" in sv_header and len(sv_header) == 36
    _, h_header = io.read_matrix(tmp_path / "h.csv")
    assert "h_12_t120" in h_header
    manifest = io.read_flat(tmp_path / "manifest.txt")
    assert int(manifest["seed"]) == 11 and manifest["interweaving"] == "deep"
    back = io.read_draws(tmp_path)
    assert np.array_equal(back.loadings, small_chain.loadings)
    assert np.array_equal(back.sv, small_chain.sv)
    assert np.array_equal(back.h, small_chain.h) and np.array_equal(back.f, small_chain.f)


def test_unwritable_directory(tmp_path, small_chain):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        io.write_draws(small_chain, blocker / "sub")


# --------------------------------------------------------------------------- command line

def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.suffix == ".csv"}


def test_simulate_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--table-ai", "--seed", "1", "--T", "100",
                     "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "returns.csv").read_bytes() == \
        (tmp_path / "b" / "returns.csv").read_bytes()
    for f in ("params.txt", "h.csv", "f.csv"):
        assert (tmp_path / "a" / "truth" / f).read_bytes() == \
            (tmp_path / "b" / "truth" / f).read_bytes()


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--table-ai", "--seed", "2", "--T", "150", "--out", str(d / "sim")]) == 0
    assert main(["fit", "--data", str(d / "sim" / "returns.csv"), "--out", str(d / "run"),
                 "--factors", "2", "--draws", "300", "--burn-in", "50", "--seed", "5",
                 "--interweaving", "deep", "--store-latents", "--latent-times", "150",
                 "--init", str(d / "sim" / "truth")]) == 0
    return d


def test_fit_manifest_records_settings(fitted):
    manifest = io.read_flat(fitted / "run" / "manifest.txt")
    assert manifest["interweaving"] == "deep"
    assert int(manifest["seed"]) == 5 and int(manifest["draws"]) == 300
    assert "version" in manifest


def test_refit_from_manifest_bitwise(fitted):
    assert main(["fit", "--manifest", str(fitted / "run" / "manifest.txt"),
                 "--out", str(fitted / "again")]) == 0
    assert _files(fitted / "run") == _files(fitted / "again")


def test_refit_bitwise_across_thread_counts(fitted):
    outs = {}
    for threads in ("1", "3"):
        out = fitted / f"threads{threads}"
        # the numba pool size defaults to the core count; raise it so that three
        # threads really run even on a single-core machine
        env = dict(os.environ, **{THREADS_ENV: threads, "NUMBA_NUM_THREADS": threads})
        res = subprocess.run([sys.executable, "-m", "factorsv", "fit", "--manifest",
                              str(fitted / "run" / "manifest.txt"), "--out", str(out)],
                             env=env, capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs[threads] = _files(out)
    assert outs["1"] == outs["3"] == _files(fitted / "run")


def test_diag_blanks_restricted_cells(fitted, capsys):
    assert main(["diag", str(fitted / "run"), "--acf-lags", "1,5"]) == 0
    text = capsys.readouterr().out
    rows = [ln for ln in text.splitlines()[2:12]]
    assert rows[0].startswith("1") and rows[0][14:].strip() == ""  # lambda_1_2 is restricted
    assert all(len(r[4:].split()) == 2 for r in rows[1:])
    assert "h_11_t150" in text and "f_1_t150" in text


def test_summarize_with_sign_and_reorder(fitted, tmp_path):
    out = tmp_path / "summary.txt"
    assert main(["summarize", str(fitted / "run"), "--sign", "maximin", "--reorder",
                 "--output", str(out)]) == 0
    text = out.read_text()
    assert "lambda_1_1" in text and "sigma_12" in text and "mu_12" not in text


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--no-such-flag"])
    assert exc.value.code == 2
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o"),
                 "--factors", "1"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["simulate", "--out", str(tmp_path / "s")]) == 1


def test_module_entry_point_usage_error():
    res = subprocess.run([sys.executable, "-m", "factorsv", "bogus"], capture_output=True,
                         text=True)
    assert res.returncode == 2 and "usage" in res.stderr
