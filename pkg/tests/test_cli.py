"""Run configs, canonical reports, and the command-line entry point."""

import json

import numpy as np
import pytest

import flowspec as fs
from flowspec.cli import main


def base_config(**extra):
    cfg = {
        "model": {"name": "constant_drive_circle",
                  "params": {"a": 1.0, "epsilon": 0.2, "n": 32}},
        "tasks": ["spectrum", "classify", "witten"],
    }
    cfg.update(extra)
    return cfg


# ----------------------------------------------------------------------
# canonical serialization
# ----------------------------------------------------------------------

def test_format_float():
    assert fs.format_float(1.0) == "1.00000000000e+00"
    assert fs.format_float(-0.0) == "0.00000000000e+00"
    assert fs.format_float(0.2) == "2.00000000000e-01"
    with pytest.raises(fs.NumericalError):
        fs.format_float(float("nan"))
    with pytest.raises(fs.NumericalError):
        fs.format_float(float("inf"))


def test_canonical_json_layout():
    text = fs.canonical_json({"b": 1, "a": [True, 2, 0.5], "z": complex(1, -2)})
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"') < text.index('"z"')
    obj = json.loads(text)
    assert obj["z"] == {"im": -2.0, "re": 1.0}
    assert obj["a"][0] is True and obj["a"][1] == 2
    # floats in fixed scientific notation, ints bare
    assert "5.00000000000e-01" in text
    assert "\n  \"b\": 1,\n" in text


def test_canonical_json_is_deterministic():
    payload = {"x": np.float64(0.1), "arr": np.arange(3), "c": 1 + 1j}
    assert fs.canonical_json(payload) == fs.canonical_json(payload)


def test_canonical_json_rejects_bad_values():
    with pytest.raises(fs.NumericalError):
        fs.canonical_json({"x": float("nan")})
    with pytest.raises(fs.ValidationError):
        fs.canonical_json({1: "non-string key"})


# ----------------------------------------------------------------------
# config validation
# ----------------------------------------------------------------------

def test_config_requires_tasks_and_model():
    with pytest.raises(fs.ValidationError, match="tasks"):
        fs.RunConfig.from_dict({"model": {"name": "x"}})
    with pytest.raises(fs.ValidationError, match="exactly one"):
        fs.RunConfig.from_dict({"tasks": ["spectrum"]})
    with pytest.raises(fs.ValidationError, match="unknown config keys"):
        fs.RunConfig.from_dict(base_config(extra_key=1))
    with pytest.raises(fs.ValidationError, match="unknown tasks"):
        fs.RunConfig.from_dict(base_config(tasks=["spectra"]))


def test_config_tolerances_and_sweep_validation():
    with pytest.raises(fs.ValidationError, match="tau_gamma"):
        fs.RunConfig.from_dict(base_config(tolerances={"tau_gamma": -1}))
    with pytest.raises(fs.ValidationError, match="epsilons"):
        fs.RunConfig.from_dict(base_config(tasks=["sweep"]))
    with pytest.raises(fs.ValidationError, match="decreasing"):
        fs.RunConfig.from_dict(
            base_config(tasks=["sweep"], sweep={"epsilons": [0.1, 0.2]})
        )
    cfg = fs.RunConfig.from_dict(
        base_config(tasks=["sweep"], sweep={"epsilons": [0.2, 0.1]})
    )
    assert cfg.sweep_epsilons == (0.2, 0.1)


def test_inline_config_excludes_resampling_tasks():
    inline = {"mesh": {"kind": "circle", "n": 16, "length": 6.283185307179586},
              "flow": {"constant": 1.0}}
    with pytest.raises(fs.ValidationError, match="registered model"):
        fs.RunConfig.from_dict({"tasks": ["simulate"], "inline": inline})
    cfg = fs.RunConfig.from_dict({"tasks": ["spectrum"], "inline": inline})
    assert cfg.inline is not None


def test_config_file_errors(tmp_path):
    with pytest.raises(fs.ValidationError, match="not found"):
        fs.RunConfig.from_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(fs.ValidationError, match="not valid JSON"):
        fs.RunConfig.from_file(bad)


# ----------------------------------------------------------------------
# run driver
# ----------------------------------------------------------------------

def test_run_writes_report_and_sidecars(tmp_path):
    cfg = fs.RunConfig.from_dict(base_config(
        tasks=["spectrum", "classify", "witten", "stationary", "sweep"],
        sweep={"epsilons": [0.8, 0.4, 0.2]},
        backend="fourier",
    ))
    doc = fs.run(cfg, out_dir=tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["report.json", "spectrum.csv", "stationary.csv",
                     "timings.json"]
    data = json.loads(doc.path.read_text())
    assert set(data) == {"config", "model", "results", "warnings", "versions"}
    res = data["results"]
    assert res["spectrum"]["oracle_satisfied"] is True
    assert res["spectrum"]["entries_per_degree"] == {"0": 32, "1": 32}
    assert res["classify"]["verdict"] == "unbroken-Markovian"
    assert res["witten"]["witten_index"] == 0
    assert res["witten"]["matches_euler_characteristic"] is True
    # stationary state of the drive is uniform; the oracle comparison is tight
    assert res["stationary"]["oracle_max_rel_deviation"] < 1e-9
    # |Gamma|/|E| of the slowest oscillating pair is eps/(2a) per level
    ratios = [row["ratio_gamma_over_e"] for row in res["sweep"]["rows"]]
    np.testing.assert_allclose(ratios, [0.4, 0.2, 0.1], rtol=1e-8)
    assert res["sweep"]["condensation"] is False
    # timings stay out of the report, in the sidecar
    timings = json.loads((tmp_path / "timings.json").read_text())
    assert "total" in timings
    assert "timings" not in data and "total" not in data["results"]


def test_report_bytes_are_stable_across_runs(tmp_path):
    cfg = fs.RunConfig.from_dict(base_config())
    a = fs.run(cfg, out_dir=tmp_path / "a").path.read_bytes()
    b = fs.run(cfg, out_dir=tmp_path / "b").path.read_bytes()
    assert a == b


def test_run_inline_system(tmp_path):
    phis = 2 * np.pi * np.arange(24) / 24
    inline = {
        "mesh": {"kind": "circle", "n": 24, "length": 6.283185307179586},
        "flow": {"potential": list(np.cos(2 * phis))},
        "epsilon": 0.2,
    }
    cfg = fs.RunConfig.from_dict({"tasks": ["spectrum", "witten"],
                                  "inline": inline})
    doc = fs.run(cfg, out_dir=tmp_path)
    res = json.loads(doc.path.read_text())["results"]
    assert res["witten"]["witten_index"] == 0
    assert res["witten"]["zero_modes_per_degree"] == [1, 1]


def test_run_morse_with_splitting_scan(tmp_path):
    cfg = fs.RunConfig.from_dict({
        "model": {"name": "langevin_double_well_circle",
                  "params": {"depth": 1.0, "epsilon": 0.4, "n": 64}},
        "tasks": ["spectrum", "morse"],
        "morse": {"splitting_epsilons": [0.4, 0.2, 0.1]},
    })
    doc = fs.run(cfg, out_dir=tmp_path)
    res = json.loads(doc.path.read_text())["results"]["morse"]
    assert res["poincare_hopf_sum"] == 0
    assert res["matches_witten_index"] is True
    assert res["n_critical_points"] == 4
    scan = res["splitting_scan"]
    assert scan["strictly_decreasing"] is True
    assert scan["convex_log_trend"] is True
    assert scan["n_minima"] == 2


def test_run_simulate_task(tmp_path):
    cfg = fs.RunConfig.from_dict({
        "model": {"name": "langevin_double_well_circle",
                  "params": {"depth": 1.0, "epsilon": 0.4, "n": 64}},
        "tasks": ["simulate"],
        "simulate": {"dt": 0.005, "steps": 2000, "n_paths": 300, "seed": 7,
                     "bins": 48},
    })
    doc = fs.run(cfg, out_dir=tmp_path)
    res = json.loads(doc.path.read_text())["results"]["simulate"]
    assert res["histogram"]["tv_distance_to_oracle"] < 0.05
    assert (tmp_path / "histogram.csv").exists()


def test_sweep_needs_rebuildable_model():
    inline = {"mesh": {"kind": "circle", "n": 16, "length": 6.283185307179586},
              "flow": {"constant": 1.0}, "epsilon": 0.2}
    cfg = fs.RunConfig.from_dict({"tasks": ["spectrum"], "inline": inline})
    from flowspec.reporting import _resolve_model

    model = _resolve_model(cfg)
    with pytest.raises(fs.ValidationError, match="rebuildable"):
        fs.sweep_epsilon(model, [0.2, 0.1])


# ----------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------

def test_cli_models_listing(capsys):
    assert main(["models"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out == list(fs.list_models())


def test_cli_run_and_overrides(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config()))
    code = main(["run", str(cfg_path), "--out", str(tmp_path / "out"),
                 "--backend", "fourier"])
    assert code == 0
    printed = capsys.readouterr().out.strip()
    assert printed.endswith("report.json")
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["results"]["spectrum"]["oracle_satisfied"] is True


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(base_config(tasks=["nonsense"])))
    assert main(["run", str(bad)]) == 2

    # numerical failure: a double zero has no signed count
    phis = 2 * np.pi * np.arange(32) / 32
    degen = tmp_path / "degen.json"
    degen.write_text(json.dumps({
        "inline": {
            "mesh": {"kind": "circle", "n": 32, "length": 2 * np.pi},
            "flow": {"vertex_samples": list(np.sin(phis) ** 2)},
            "epsilon": 0.2,
        },
        "tasks": ["morse"],
    }))
    assert main(["run", str(degen), "--out", str(tmp_path / "o2")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_report_schema_covers_emitted_document(tmp_path):
    # docs/report_schema.json names every top-level and per-task field we emit
    import pathlib

    schema = json.loads(
        (pathlib.Path(__file__).parent.parent / "docs" / "report_schema.json")
        .read_text()
    )
    assert schema["type"] == "object"
    cfg = fs.RunConfig.from_dict(base_config(
        tasks=["spectrum", "classify", "witten", "stationary", "morse"],
    ))
    doc = fs.run(cfg, out_dir=tmp_path)
    data = json.loads(doc.path.read_text())
    assert set(data) == set(schema["properties"])
    task_props = schema["properties"]["results"]["properties"]
    for task, result in data["results"].items():
        assert set(result) <= set(task_props[task]["properties"]), task
