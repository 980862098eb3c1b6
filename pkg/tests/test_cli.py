import io
import json
import math
import shutil
import subprocess
import time

import numpy as np
import pytest

from mirrorqed.cli import main
from mirrorqed.params import dark_state_energy_ratio
from mirrorqed.scenarios import FIGURES, ConfigError, parse_config, run_config
from mirrorqed.trajectory import is_uniform, read_csv

LOW_Z = 1 / math.sqrt(2)


def node_doc(gamma0_t, model="full_mirror", horizon_in_t=6.0, imp_ratio=LOW_Z, **integrator):
    return {
        "model": model,
        "spec": {"imp_ratio": imp_ratio, "roundtrips": 5, "gamma0_t": gamma0_t},
        "integrator": {"horizon_in_T": horizon_in_t, **integrator},
    }


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def read(path):
    return read_csv(path)


def test_simulate_dark_state(tmp_path, capsys):
    cfg = write(tmp_path, "purple.json", node_doc(2 * math.pi, horizon_in_t=30.0))
    out = tmp_path / "purple.csv"
    code, _, _ = run_cli(["simulate", "--config", cfg, "--out", str(out)], capsys)
    assert code == 0
    tr = read(out)
    assert tr["e_norm"][-1] == pytest.approx(1 / (1 + math.pi) ** 2, rel=0.01)
    assert tr.names[:7] == ["t", "p_j", "q_j", "p_0", "phi_j", "e", "e_norm"]
    assert tr.metadata["model"] == "full_mirror"
    assert {"config_hash", "step"} <= set(tr.metadata)


def test_simulate_open_exponential(tmp_path, capsys):
    g = 0.001
    doc = {"model": "open_approx", "spec": {"cap_ratio": 0.5, "imp_ratio": LOW_Z},
           "integrator": {"horizon": 2000.0}, "options": {"gamma": g}}
    code, out, _ = run_cli(["simulate", "--config", write(tmp_path, "open.json", doc)], capsys)
    assert code == 0
    tr = read_csv(io.StringIO(out))
    assert np.max(np.abs(tr["e_norm"] - np.exp(-g * tr.times))) < 2e-3


def test_simulate_is_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", node_doc(0.2 * math.pi, horizon_in_t=2.0))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run_cli(["simulate", "--config", cfg, "--out", str(path)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_output_path_from_config(tmp_path, capsys):
    doc = node_doc(0.2 * math.pi, horizon_in_t=1.0)
    doc["output"] = {"path": str(tmp_path / "cfg.csv"), "columns": ["e_norm"], "sample_stride": 4}
    assert run_cli(["simulate", "--config", write(tmp_path, "c.json", doc)], capsys)[0] == 0
    tr = read(tmp_path / "cfg.csv")
    assert tr.names == ["t", "e_norm"]
    assert is_uniform(tr.times)


def test_system_reservoir_schema(tmp_path, capsys):
    doc = node_doc(0.2 * math.pi, model="system_reservoir", horizon_in_t=1.0)
    code, out, _ = run_cli(["simulate", "--config", write(tmp_path, "s.json", doc)], capsys)
    assert code == 0
    header = [line for line in out.splitlines() if not line.startswith("#")][0]
    assert header == "t,re_c,im_c,occupation"


def test_schema_is_stable(tmp_path, capsys):
    runs = []
    for g in (0.02 * math.pi, 0.2 * math.pi):
        code, out, _ = run_cli(["simulate", "--config", write(tmp_path, f"{g}.json", node_doc(g, horizon_in_t=1.0))],
                               capsys)
        assert code == 0
        tr = read_csv(io.StringIO(out))
        runs.append((tr.names, sorted(tr.metadata)))
    assert runs[0] == runs[1]


@pytest.mark.parametrize("doc, fragment", [
    ({"model": "full_mirror"}, "spec"),
    ({"model": "warp", "spec": {"imp_ratio": 1.0}}, "warp"),
    ({"model": "full_mirror", "spec": {"imp_ratio": 1.0, "cap_ratio": 0.5}}, "mirror"),
    ({"model": "open_full", "spec": {"imp_ratio": 1.0, "cap_ratio": 0.5}, "extra": 1}, "unknown"),
    ({"model": "open_full", "spec": {"imp_ratio": 1.0, "cap_ratio": 1.5}}, "cap_ratio"),
    ({"model": "full_mirror", "spec": {"imp_ratio": 1.0, "gamma0_t": 0.1, "roundtrips": 1},
      "integrator": {"horizon_in_T": -1}}, "horizon_in_T"),
    ({"model": "full_mirror", "spec": {"imp_ratio": 1.0}, "params": {"c_j": 1, "c_c": 1, "l_j": 1, "z_0": 1}},
     "exactly one"),
])
def test_config_errors_exit_2(tmp_path, capsys, doc, fragment):
    code, _, err = run_cli(["simulate", "--config", write(tmp_path, "bad.json", doc)], capsys)
    assert code == 2
    report = json.loads(err)
    assert report["error"] == "config"
    assert fragment in report["message"]


def test_unreadable_config_exit_2(tmp_path, capsys):
    assert run_cli(["simulate", "--config", str(tmp_path / "missing.json")], capsys)[0] == 2
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert run_cli(["simulate", "--config", str(bad)], capsys)[0] == 2


def test_bad_arguments_exit_2(capsys):
    assert run_cli(["simulate"], capsys)[0] == 2
    assert run_cli(["compare", "--a", "x", "--b", "y", "--metric", "l1"], capsys)[0] == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    doc = {"model": "residue_series", "spec": {"imp_ratio": LOW_Z, "roundtrips": 1, "gamma0_t": 0.2},
           "integrator": {"horizon_in_T": 500}}
    code, _, err = run_cli(["simulate", "--config", write(tmp_path, "r.json", doc)], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "numeric"


def test_unwritable_output_exit_4(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", node_doc(0.2 * math.pi, horizon_in_t=1.0))
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run_cli(["simulate", "--config", cfg, "--out", str(blocker / "x.csv")], capsys)
    assert code == 4
    assert json.loads(err)["error"] == "io"
    code, _, _ = run_cli(["figure", "fig6", "--outdir", str(blocker / "sub")], capsys)
    assert code == 4


def test_figure_names(tmp_path, capsys):
    code, out, _ = run_cli(["figure", "fig6", "--outdir", str(tmp_path)], capsys)
    assert code == 0
    assert out.split() == [str(tmp_path / "fig6_spectrum.csv")]
    tr = read(tmp_path / "fig6_spectrum.csv")
    assert tr.index_name == "omega"
    k = int(np.argmin(np.abs(tr.times - 1.0)))
    assert tr.times[k] == pytest.approx(1.0)
    assert tr["v_mirror_sq"][k] < 1e-30


def test_unknown_figure_lists_names(tmp_path, capsys):
    code, _, err = run_cli(["figure", "fig9", "--outdir", str(tmp_path)], capsys)
    assert code == 2
    message = json.loads(err)["message"]
    assert all(name in message for name in FIGURES)


def test_all_figures_are_quick(tmp_path, capsys):
    start = time.perf_counter()
    written = []
    for name in FIGURES:
        code, out, _ = run_cli(["figure", name, "--outdir", str(tmp_path)], capsys)
        assert code == 0
        written += out.split()
    assert time.perf_counter() - start < 60
    names = sorted(p.rsplit("/", 1)[-1] for p in written)
    assert names == sorted([
        "fig3a_node.csv", "fig3a_antinode.csv", "fig3a_open.csv",
        "fig3b_green.csv", "fig3b_blue.csv", "fig3b_purple.csv",
        "fig4a_full.csv", "fig4a_approx.csv",
        "fig4b_full.csv", "fig4b_approx.csv", "fig4b_approx_gamma_full.csv",
        "fig5_g0.1_charge.csv", "fig5_g0.1_flux.csv", "fig5_g0.001_charge.csv", "fig5_g0.001_flux.csv",
        "fig6_spectrum.csv",
    ])
    full, approx = read(tmp_path / "fig4b_full.csv"), read(tmp_path / "fig4b_approx.csv")
    assert np.max(np.abs(full["e_norm"] - approx["e_norm"])) > 0.1


def sweep(tmp_path, capsys, doc, axis, values, out="sweep.csv"):
    cfg = write(tmp_path, "base.json", doc)
    code, _, err = run_cli(["sweep", "--config", cfg, "--axis", axis, "--values", values,
                            "--out", str(tmp_path / out)], capsys)
    assert code == 0, err
    return read(tmp_path / out)


def test_sweep_dark_states(tmp_path, capsys):
    values = [0.02 * math.pi, 0.2 * math.pi, 2 * math.pi]
    doc = node_doc(0.2 * math.pi, horizon_in_t=30.0, per_period=256)
    tr = sweep(tmp_path, capsys, doc, "gamma0_t", ",".join(repr(v) for v in values))
    assert tr.index_name == "gamma0_t"
    assert np.array_equal(tr.times, values)
    for v, final in zip(values, tr["final_e_norm"]):
        assert final == pytest.approx(dark_state_energy_ratio(v, 1.0), rel=0.01)
    assert np.all(tr["rel_error"] < 0.01)


def test_sweep_empty_values_gives_header(tmp_path, capsys):
    tr = sweep(tmp_path, capsys, node_doc(0.2 * math.pi), "gamma0_t", "")
    assert len(tr) == 0
    text = (tmp_path / "sweep.csv").read_text().splitlines()
    assert text[1] == "gamma0_t,fitted_rate,final_e_norm,dark_state,rel_error"
    assert len(text) == 2


def test_sweep_impedance_axis(tmp_path, capsys):
    doc = node_doc(0.2 * math.pi, horizon_in_t=10.0)
    tr = sweep(tmp_path, capsys, doc, "imp_ratio", "0.1,1,10")
    assert np.ptp(tr["dark_state"]) <= 0.02 * np.min(tr["dark_state"])
    assert np.ptp(tr["final_e_norm"]) <= 0.02 * np.min(tr["final_e_norm"])


def test_sweep_rejects_non_numeric_axis(tmp_path, capsys):
    cfg = write(tmp_path, "base.json", node_doc(0.2 * math.pi))
    assert run_cli(["sweep", "--config", cfg, "--axis", "model", "--values", "1"], capsys)[0] == 2
    assert run_cli(["sweep", "--config", cfg, "--axis", "gamma0_t", "--values", "a,b"], capsys)[0] == 2


def test_sweep_order_independent_of_threads(tmp_path, capsys, monkeypatch):
    doc = node_doc(0.2 * math.pi, horizon_in_t=2.0)
    values = "1.2,0.3,0.7"
    monkeypatch.setenv("MIRRORQED_THREADS", "1")
    serial = sweep(tmp_path, capsys, doc, "gamma0_t", values, out="serial.csv")
    monkeypatch.setenv("MIRRORQED_THREADS", "3")
    parallel = sweep(tmp_path, capsys, doc, "gamma0_t", values, out="parallel.csv")
    body = [(tmp_path / f).read_text().splitlines()[1:] for f in ("serial.csv", "parallel.csv")]
    assert body[0] == body[1]
    assert list(serial.times) == [1.2, 0.3, 0.7]
    assert np.array_equal(serial["final_e_norm"], parallel["final_e_norm"])


def compare(tmp_path, capsys, a, b, metric="linf"):
    code, out, err = run_cli(["compare", "--a", write(tmp_path, "a.json", a), "--b", write(tmp_path, "b.json", b),
                              "--metric", metric], capsys)
    return code, (json.loads(out)["value"] if code == 0 else json.loads(err))


def test_compare_self_is_zero(tmp_path, capsys):
    doc = node_doc(0.2 * math.pi, horizon_in_t=2.0)
    for metric in ("linf", "l2"):
        assert compare(tmp_path, capsys, doc, doc, metric) == (0, 0.0)


def test_compare_series_with_approx(tmp_path, capsys):
    a = node_doc(0.2 * math.pi, model="approx_mirror", horizon_in_t=5.0, per_period=256)
    b = dict(a, model="residue_series")
    code, value = compare(tmp_path, capsys, a, b)
    assert code == 0 and value <= 1e-6


def test_compare_high_impedance_models(tmp_path, capsys):
    spec = {"cap_ratio": 0.05, "imp_ratio": 100.0, "roundtrips": 2}
    a = {"model": "full_mirror", "spec": spec, "integrator": {"substeps_per_delay": 8192}}
    b = dict(a, model="approx_mirror")
    code, value = compare(tmp_path, capsys, a, b)
    assert code == 0 and value > 0.1


def test_compare_rejects_mismatched_grids(tmp_path, capsys):
    a = node_doc(0.2 * math.pi, horizon_in_t=2.0)
    b = node_doc(0.2 * math.pi, horizon_in_t=3.0)
    code, err = compare(tmp_path, capsys, a, b)
    assert code == 2 and "grid" in err["message"]


def test_si_units_need_frequency():
    with pytest.raises(ConfigError, match="omega_0"):
        parse_config({"model": "open_full", "units": "si", "spec": {"cap_ratio": 0.5, "imp_ratio": 1.0}})


def test_raw_params_with_placement():
    cfg = parse_config({"model": "full_mirror", "params": {"c_j": 0.5, "c_c": 0.5, "l_j": 1.0, "z_0": 1.0},
                        "placement": {"kind": "node", "order": 2}, "integrator": {"horizon_in_T": 1.0}})
    assert cfg.circuit().delay_t == pytest.approx(4 * math.pi)
    assert len(run_config(cfg)) > 1


@pytest.mark.skipif(shutil.which("mirrorqed") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = write(tmp_path, "c.json", node_doc(0.2 * math.pi, horizon_in_t=1.0))
    done = subprocess.run(["mirrorqed", "simulate", "--config", cfg], capture_output=True, text=True, check=False)
    assert done.returncode == 0
    assert done.stdout.startswith("#")
