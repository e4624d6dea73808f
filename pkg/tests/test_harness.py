import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowave import wavetank as wt
from bowave.harness import experiments as ex
from bowave.harness.cli import main
from bowave.harness.config import ConfigError, RunConfig, config_hash, load_config
from bowave.harness.dumps import DumpError, load_state, save_state, sidecar_path
from bowave.harness.fit import fit_power_law
from bowave.harness.store import ENV_OUTPUT_ROOT, RecordStore, output_dir
from bowave.params import PhysParams
from bowave.spectral import make_grid, norm

from conftest import random_state

TINY = """\
name: tiny
epsilons: [0.2, 0.14, 0.1]
T: 0.05
checkpoints: [0.025]
grid: {bo_points: 2048, bo_cycles: 16}
data: {widths: [2.0, 3.0]}
output_dir: out
"""


@pytest.fixture
def tiny(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_ROOT, str(tmp_path / "root"))
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return path


# ---------------------------------------------------------------------------
# config

def test_config_defaults_and_times():
    cfg = RunConfig(checkpoints=[0.3, 0.1])
    assert cfg.times == [0.0, 0.1, 0.3, 0.5]
    assert cfg.phys(0.1).eps == 0.1 and cfg.phys(0.1).dispersion == 1.0


@pytest.mark.parametrize("text, field", [
    ("epsilons: [0.1, 0.2]\n", "epsilons"),
    ("epsilons: [1.5]\n", "epsilons"),
    ("T: -1\n", "T"),
    ("m: 2\n", "m"),
    ("checkpoints: [0.7]\n", "checkpoints"),
    ("grid: {bo_points: 1000}\n", "grid.bo_points"),
    ("bogus: 1\n", "bogus"),
    ("params: {c: 0}\n", "params.c"),
])
def test_config_errors_name_the_field(tmp_path, text, field):
    p = tmp_path / "bad.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert field in str(info.value)


def test_config_file_problems(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    p = tmp_path / "list.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"name": "j", "epsilons": [0.2, 0.1]}))
    assert load_config(j).epsilons == [0.2, 0.1]


def test_config_hash():
    a = RunConfig()
    assert config_hash(a) == config_hash(RunConfig(output_dir="elsewhere"))
    assert config_hash(a) != config_hash(RunConfig(T=0.4))
    assert len(config_hash(a)) == 16


# ---------------------------------------------------------------------------
# fits

def test_fit_exact_power():
    f = fit_power_law([(e, e ** 3) for e in (0.2, 0.1, 0.05)])
    assert f.exponent == pytest.approx(3.0, abs=1e-12)
    assert f.intercept == pytest.approx(0.0, abs=1e-12)
    assert f.r2 == pytest.approx(1.0)
    assert f(0.5) == pytest.approx(0.125)


def test_fit_noisy_and_invalid():
    rng = np.random.default_rng(0)
    eps = [0.2, 0.14, 0.1, 0.07, 0.05]
    f = fit_power_law([(e, 2 * e ** 1.5 * (1 + 0.01 * rng.normal())) for e in eps])
    assert f.exponent == pytest.approx(1.5, abs=0.05) and f.r2 > 0.99 and f.stderr < 0.05
    with pytest.raises(ValueError):
        fit_power_law([(0.2, 1.0), (0.1, 0.5)])
    with pytest.raises(ValueError):
        fit_power_law([(0.2, 1.0), (0.1, 0.0), (0.05, 1.0)])
    with pytest.raises(ValueError):
        fit_power_law([(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)])


@settings(max_examples=50, deadline=None)
@given(st.floats(-4, 4), st.floats(1e-3, 1e3))
def test_fit_recovers_any_power(p, C):
    eps = np.array([0.3, 0.2, 0.1, 0.05])
    f = fit_power_law(zip(eps, C * eps ** p))
    assert f.exponent == pytest.approx(p, abs=1e-9)
    assert np.exp(f.intercept) == pytest.approx(C, rel=1e-9)


# ---------------------------------------------------------------------------
# dumps

def test_dump_round_trip(tmp_path, rng):
    g = make_grid(64, 2 * np.pi)
    r = random_state(g, rng, 0.1, mean=True)
    s = wt.WWState(r.W, r.Q, 1.25)
    p = PhysParams(g=1.2, eps=0.1)
    path = save_state(tmp_path / "d" / "s.bin", s, p, extra={"note": 1})
    back, p2, meta = load_state(path)
    assert np.array_equal(back.W.spectrum, s.W.spectrum) and np.array_equal(back.Q.spectrum, s.Q.spectrum)
    assert back.t == 1.25 and p2 == p and meta["extra"] == {"note": 1}
    assert meta["version"] == 1 and meta["kind"] == "ww"


def test_dump_checks(tmp_path, rng):
    g = make_grid(64, 2 * np.pi)
    path = save_state(tmp_path / "s.bin", random_state(g, rng, 0.1))
    data = bytearray(path.read_bytes())
    data[3] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(DumpError):
        load_state(path)
    path2 = save_state(tmp_path / "v.bin", random_state(g, rng, 0.1))
    meta = json.loads(sidecar_path(path2).read_text())
    meta["version"] = 99
    sidecar_path(path2).write_text(json.dumps(meta))
    with pytest.raises(DumpError):
        load_state(path2)
    with pytest.raises(DumpError):
        load_state(tmp_path / "none.bin")


# ---------------------------------------------------------------------------
# store

def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_ROOT, str(tmp_path))
    assert output_dir(RunConfig(output_dir="a/b")) == tmp_path / "a" / "b"
    assert output_dir(RunConfig(output_dir="/abs/run")) == tmp_path / "run"
    monkeypatch.delenv(ENV_OUTPUT_ROOT)
    monkeypatch.chdir(tmp_path)
    assert output_dir(RunConfig(output_dir="c")).resolve() == (tmp_path / "c").resolve()


def test_store_rows_hash_and_drop(tmp_path):
    cfg = RunConfig()
    st_ = RecordStore(tmp_path, "x", cfg, ["eps", "status"])
    st_.append([{"eps": "0.2", "status": "ok"}, {"eps": "0.1", "status": "failed"}])
    assert st_.completed() == {"0.2"}
    other = RecordStore(tmp_path, "x", RunConfig(T=0.3), ["eps", "status"])
    assert other.rows() == []
    st_.drop("eps", "0.2")
    assert [r["eps"] for r in st_.rows()] == ["0.1"]
    with pytest.raises(KeyError):
        st_.append([{"eps": 1}])
    # a new column layout discards the old file
    RecordStore(tmp_path, "x", cfg, ["eps", "status", "extra"])
    assert not (tmp_path / "x.csv").exists()
    man = json.loads(st_.write_manifest({"v": np.float64(1.5)}, ["b", "a"]).read_text())
    assert man["config_hash"] == config_hash(cfg) and man["files"] == ["a", "b"] and man["summary"]["v"] == 1.5


# ---------------------------------------------------------------------------
# experiments

def test_perturbation_size_and_delta_range():
    cfg = RunConfig(grid={"bo_points": 2048, "bo_cycles": 16}, data={"widths": [2.0, 3.0]})
    s = ex.perturbation_state(cfg, 0.1, 0.5)
    assert norm((s.W, s.Q), "energy") == pytest.approx(0.1 ** 1.5, rel=1e-12)
    with pytest.raises(ValueError):
        ex.check_delta(0.2, 3)
    with pytest.raises(ValueError):
        ex.check_delta(0.6, 3)
    ex.check_delta(0.3, 3)


def test_sweep_resume_skips_done(tiny, monkeypatch):
    cfg = load_config(tiny)
    store = RecordStore(output_dir(cfg), "converge", cfg, ex.record_columns(cfg.m))
    first = ex.run_main_experiment(cfg, store)
    assert all(r.ok for r in first)
    calls = []
    monkeypatch.setattr(ex, "_one_eps", lambda *a, **k: calls.append(a) or pytest.fail("recomputed"))
    again = ex.run_main_experiment(cfg, store)
    assert not calls
    for a, b in zip(first, again):
        assert a.err_main == b.err_main and a.err_hn == b.err_hn
    # a failing eps is recorded and retried next time
    store.drop("eps", ex.eps_key(0.1))
    monkeypatch.setattr(ex, "_one_eps", lambda *a, **k: (_ for _ in ()).throw(RuntimeError("boom")))
    recs = ex.run_main_experiment(cfg, store)
    assert recs[-1].status == "failed" and "boom" in recs[-1].message
    assert ex.summarize(recs, cfg.m)["flagged"] == {ex.eps_key(0.1): "failed"}


def test_records_round_trip_through_csv(tiny):
    cfg = load_config(tiny)
    store = RecordStore(output_dir(cfg), "converge", cfg, ex.record_columns(cfg.m))
    recs = ex.run_main_experiment(cfg, store, resume=False)
    back = ex.records_from_rows(store.rows(), cfg.m)
    assert [r.eps for r in back] == [r.eps for r in recs]
    for a, b in zip(recs, back):
        assert np.allclose(a.err_main, b.err_main, rtol=1e-15)


def test_record_validation():
    with pytest.raises(ValueError):
        ex.ConvergenceRecord(eps=0.1, times=[0.0], err_main=[float("nan")], err_hn=[[0.0]])


# ---------------------------------------------------------------------------
# command line

def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["converge", "--config", str(tmp_path / "nope.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("T: 0\n")
    assert main(["converge", "--config", str(bad)]) == 2
    assert "T" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["bo-run"])


def test_cli_bo_run_and_diagnose(tiny, tmp_path, capsys):
    assert main(["bo-run", "--config", str(tiny), "--assert"]) == 0
    out = tmp_path / "root" / "out"
    rows = _csv(out / "bo-run.csv")
    assert len(rows) == 3 and rows[0]["config_hash"] == config_hash(load_config(tiny))
    man = json.loads((out / "bo-run.manifest.json").read_text())
    assert len(man["files"]) == 3
    capsys.readouterr()
    assert main(["diagnose", "--state", str(out / "dumps" / man["files"][0])]) == 0
    assert "H3" in capsys.readouterr().out


def test_cli_approx_and_ww(tiny, tmp_path, capsys):
    assert main(["approx-build", "--config", str(tiny), "--assert"]) == 0
    out = tmp_path / "root" / "out"
    assert all(r["well_prepared"] == "True" for r in _csv(out / "approx-build.csv"))
    dump = sorted((out / "dumps").glob("approx_eps0.1_*.bin"))[0]
    capsys.readouterr()
    assert main(["diagnose", "--state", str(dump), "--assert"]) == 0
    text = capsys.readouterr().out
    assert "EnergyReport" in text and "well-prepared" in text and "frequency support" in text
    assert main(["ww-run", "--config", str(tiny), "--assert"]) == 0
    n = len(_csv(out / "ww-run.csv"))
    capsys.readouterr()
    assert main(["ww-run", "--config", str(tiny)]) == 0
    assert "skipped" in capsys.readouterr().out and len(_csv(out / "ww-run.csv")) == n


def test_cli_converge_assert_and_plot(tiny, tmp_path, capsys):
    # three large eps on a short horizon are still preasymptotic: the slope check fails
    code = main(["converge", "--config", str(tiny), "--assert"])
    report = capsys.readouterr().out
    assert code == 1 and "[FAIL] main slope" in report and "[PASS] h0 slope" in report
    assert main(["converge", "--config", str(tiny)]) == 0
    out = tmp_path / "root" / "out"
    man = json.loads((out / "converge.manifest.json").read_text())
    assert man["summary"]["n_ok"] == 3
    script = tmp_path / "plot.gp"
    assert main(["plot-script", "--from", str(out), "--column", "err_main", "--column", "err_h1",
                 "--out", str(script)]) == 0
    text = script.read_text()
    assert "set logscale xy" in text and "$D0 << EOD" in text and "$D1 << EOD" in text and "slope" in text
    assert main(["plot-script", "--from", str(tmp_path / "empty")]) == 2


def test_cli_perturb_bad_delta(tiny):
    assert main(["perturb", "--config", str(tiny), "--delta", "0.1"]) == 2
