"""Configuration, artifact, and command-line pipeline tests."""

import json
import os

import numpy as np
import pytest

from flowstab import artifacts as art
from flowstab.cli import main
from flowstab.config import RunConfig
from flowstab.errors import ArtifactError, ConfigError

BASE_CFG = """\
# one unstable mode on a 12x12 box
grid.nx = 12
grid.ny = 12
physics.nu = 0.5
physics.forcing = vortex
physics.amplitude = 1.0
physics.sigma_margin = 2.5
control.gamma = 1.5
control.seed = 3
sim.dt = 1e-3
sim.t_final = 1.0
sim.record_every = 5
sim.ic = random
sim.amplitude = 1e-3
sim.seed = 4
"""

STABLE_CFG = """\
grid.nx = 8
grid.ny = 8
physics.nu = 0.5
physics.forcing = vortex
sim.dt = 1e-3
sim.t_final = 0.2
sim.record_every = 2
"""


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Full five-stage run plus a stable (no unstable modes) companion."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "run.cfg"
    cfg_path.write_text(BASE_CFG)
    out = root / "run"
    for cmd in ("steady", "spectrum", "synthesize", "simulate"):
        code = main([cmd, "--config", str(cfg_path), "--out", str(out)])
        assert code == 0, cmd
    assert main(["report", "--out", str(out)]) == 0

    stable_cfg = root / "stable.cfg"
    stable_cfg.write_text(STABLE_CFG)
    stable_out = root / "stable"
    assert main(["steady", "--config", str(stable_cfg), "--out",
                 str(stable_out)]) == 0
    assert main(["spectrum", "--config", str(stable_cfg), "--out",
                 str(stable_out)]) == 0
    return {"root": root, "cfg": cfg_path, "out": out,
            "stable_cfg": stable_cfg, "stable_out": stable_out}


# ---------------------------------------------------------------- config


def test_config_defaults_and_parsing():
    cfg = RunConfig.from_text(BASE_CFG)
    assert cfg["grid.nx"] == 12
    assert cfg["physics.nu"] == 0.5
    assert cfg["control.gamma"] == 1.5
    assert cfg["norms.q"] == 3.0
    assert cfg["sim.mode"] == "linear"
    assert cfg["output.dir"] is None


def test_config_rejects_unknown_and_duplicate_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.from_text("grid.nx = 8\ngrid.ny = 8\nphysics.nu = 1\n"
                            "grid.nz = 8\n")
    with pytest.raises(ConfigError, match="duplicate"):
        RunConfig.from_text("grid.nx = 8\ngrid.nx = 9\ngrid.ny = 8\n"
                            "physics.nu = 1\n")


def test_config_requires_core_keys():
    with pytest.raises(ConfigError, match="missing required"):
        RunConfig.from_text("grid.nx = 8\ngrid.ny = 8\n")


def test_config_value_errors():
    base = "grid.nx = 8\ngrid.ny = 8\nphysics.nu = 0.5\n"
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.from_text(base + "sim.dt = fast\n")
    with pytest.raises(ConfigError, match="out of range"):
        RunConfig.from_text("grid.nx = 8\ngrid.ny = 8\nphysics.nu = -1\n")
    with pytest.raises(ConfigError, match="not both"):
        RunConfig.from_text(base + "physics.sigma = 1\n"
                                   "physics.sigma_margin = 1\n")
    with pytest.raises(ConfigError, match="positive extent"):
        RunConfig.from_text(base + "omega.x0 = 0.8\nomega.x1 = 0.2\n")
    with pytest.raises(ConfigError, match="gamma"):
        RunConfig.from_text(base + "control.gamma = sometimes\n")


def test_config_sigma_resolution():
    base = "grid.nx = 8\ngrid.ny = 8\nphysics.nu = 0.5\n"
    cfg = RunConfig.from_text(base + "physics.sigma_margin = 2.0\n")
    assert cfg.resolve_sigma(-3.0) == 5.0
    cfg = RunConfig.from_text(base + "physics.sigma = 4.0\n")
    assert cfg.resolve_sigma(-3.0) == 4.0
    cfg = RunConfig.from_text(base)
    assert cfg.resolve_sigma(-3.0) == 0.0


def test_config_comments_and_blank_lines():
    text = "# comment\n; also comment\n\ngrid.nx = 8\ngrid.ny = 8\n" \
           "physics.nu = 0.5\n"
    cfg = RunConfig.from_text(text)
    assert cfg["grid.nx"] == 8


# ------------------------------------------------------------- artifacts


def test_jsonable_handles_numpy_and_complex():
    out = art.jsonable({
        "a": np.float64(1.5),
        "b": np.int32(3),
        "c": 1 + 2j,
        "d": np.array([1.0, 2.0]),
        "e": float("nan"),
        "f": float("inf"),
        "g": np.bool_(True),
    })
    assert out == {"a": 1.5, "b": 3, "c": [1.0, 2.0], "d": [1.0, 2.0],
                   "e": "nan", "f": "inf", "g": True}


def test_json_artifacts_are_byte_deterministic(tmp_path):
    payload = {"z": 1, "a": [3.0, {"k": 2}], "c": 0.1}
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    art.save_json(p1, payload)
    art.save_json(p2, dict(reversed(list(payload.items()))))
    assert p1.read_bytes() == p2.read_bytes()


def test_array_roundtrip_and_tamper_detection(tmp_path):
    arr = np.arange(12.0).reshape(3, 4)
    files = art.save_arrays(str(tmp_path), {"block": arr})
    manifest = {"files": files}
    back = art.load_array(str(tmp_path), manifest, "block")
    assert np.array_equal(back, arr)
    np.save(tmp_path / "block.npy", arr + 1)
    with pytest.raises(ArtifactError, match="modified"):
        art.load_array(str(tmp_path), manifest, "block")
    with pytest.raises(ArtifactError, match="no block"):
        art.load_array(str(tmp_path), manifest, "other")


def test_upstream_hash_check(tmp_path):
    up = tmp_path / "up.json"
    art.save_json(up, {"x": 1})
    manifest = {"upstream_sha256": art.file_hash(up)}
    art.check_upstream(manifest, up, "stage")
    art.save_json(up, {"x": 2})
    with pytest.raises(ArtifactError, match="different upstream"):
        art.check_upstream(manifest, up, "stage")


def test_complex_pair_roundtrip():
    z = np.array([1 + 2j, -0.5j])
    pairs = art.complex_pairs(z)
    assert pairs == [[1.0, 2.0], [-0.0, -0.5]] or pairs[1][1] == -0.5
    assert np.array_equal(art.pairs_to_complex(pairs), z)


# ------------------------------------------------------------- pipeline


def test_stage_manifests_exist(pipeline):
    out = pipeline["out"]
    for name in ("steady.json", "spectrum.json", "synthesis.json",
                 "simulate.json", "trace.csv", "report.md"):
        assert (out / name).exists(), name


def test_spectrum_manifest_content(pipeline):
    doc = json.loads((pipeline["out"] / "spectrum.json").read_text())
    assert doc["n_unstable"] == 1
    assert doc["n_clusters"] == 1
    assert doc["cluster_sizes"] == [1]
    reals = [re for re, _ in doc["eigenvalues"]]
    assert reals == sorted(reals, reverse=True)
    assert reals[0] == pytest.approx(2.5, abs=1e-8)
    assert doc["gamma0"] > 0


def test_synthesis_certificate(pipeline):
    doc = json.loads((pipeline["out"] / "synthesis.json").read_text())
    assert doc["closed_loop_max_real"] <= doc["certificate_bound"]
    assert doc["gamma"] == 1.5
    assert all(m > 0 for m in doc["rank_margins"])
    assert doc["targets"][0][0] == pytest.approx(-1.5)


def test_simulate_manifest_and_trace(pipeline):
    out = pipeline["out"]
    doc = json.loads((out / "simulate.json").read_text())
    assert doc["blown_up"] is False
    assert doc["fitted_rate"] > 1.0
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "t,lq,w1q,w2q,besov,control,chi"
    assert len(lines) - 1 == doc["n_samples"]
    assert doc["files"]["trace"]["sha256"] == art.file_hash(
        str(out / "trace.csv")
    )


def test_report_tabulates_runs(pipeline):
    text = (pipeline["out"] / "report.md").read_text()
    assert "| run | mode |" in text
    assert "linear" in text


def test_rerun_is_bitwise_identical(pipeline):
    """Same config, fresh directory: every artifact byte matches."""
    root, cfg, out = pipeline["root"], pipeline["cfg"], pipeline["out"]
    out2 = root / "run_again"
    for cmd in ("steady", "spectrum", "synthesize", "simulate"):
        assert main([cmd, "--config", str(cfg), "--out", str(out2)]) == 0
    for name in sorted(os.listdir(out2)):
        a = (out / name).read_bytes()
        b = (out2 / name).read_bytes()
        assert a == b, f"{name} differs between reruns"


def test_open_mode_needs_only_spectrum(pipeline):
    code = main(["simulate", "--config", str(pipeline["stable_cfg"]),
                 "--out", str(pipeline["stable_out"]), "--mode", "open"])
    assert code == 0
    doc = json.loads((pipeline["stable_out"] / "simulate.json").read_text())
    assert doc["mode"] == "open"
    assert doc["gamma_target"] is None


def test_closed_mode_without_synthesis_fails(pipeline):
    code = main(["simulate", "--config", str(pipeline["stable_cfg"]),
                 "--out", str(pipeline["stable_out"]), "--mode", "linear"])
    assert code == 2


def test_synthesize_with_no_unstable_modes_exits_5(pipeline):
    code = main(["synthesize", "--config", str(pipeline["stable_cfg"]),
                 "--out", str(pipeline["stable_out"])])
    assert code == 5


def test_unknown_config_key_exits_2(pipeline, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text(BASE_CFG + "physics.bogus = 1\n")
    assert main(["steady", "--config", str(bad), "--out",
                 str(tmp_path / "o")]) == 2


def test_missing_upstream_exits_2(pipeline, tmp_path):
    assert main(["spectrum", "--config", str(pipeline["cfg"]),
                 "--out", str(tmp_path / "nothing")]) == 2


def test_tampered_block_exits_2(pipeline, tmp_path):
    import shutil

    copy = tmp_path / "tampered"
    shutil.copytree(pipeline["out"], copy)
    y = np.load(copy / "y.npy")
    y[0] += 1e-3
    np.save(copy / "y.npy", y)
    assert main(["spectrum", "--config", str(pipeline["cfg"]),
                 "--out", str(copy)]) == 2


def test_stale_chain_exits_2(pipeline, tmp_path):
    import shutil

    copy = tmp_path / "stale"
    shutil.copytree(pipeline["out"], copy)
    doc = json.loads((copy / "steady.json").read_text())
    doc["residual"] = 1.0
    art.save_json(copy / "steady.json", doc)
    assert main(["synthesize", "--config", str(pipeline["cfg"]),
                 "--out", str(copy)]) == 2


def test_axis_eigenvalue_exits_3(pipeline, tmp_path, capsys):
    import shutil

    cfg = tmp_path / "axis.cfg"
    cfg.write_text(BASE_CFG.replace("physics.sigma_margin = 2.5",
                                    "physics.sigma_margin = 0.0"))
    copy = tmp_path / "axis"
    shutil.copytree(pipeline["out"], copy)
    code = main(["spectrum", "--config", str(cfg), "--out", str(copy)])
    assert code == 3
    err = capsys.readouterr().err
    assert "tau_eig" in err


def test_unreachable_rank_margin_exits_4(pipeline, tmp_path):
    import shutil

    cfg = tmp_path / "norank.cfg"
    cfg.write_text(BASE_CFG + "control.tau_rank = 1e6\n")
    copy = tmp_path / "norank"
    shutil.copytree(pipeline["out"], copy)
    assert main(["synthesize", "--config", str(cfg), "--out",
                 str(copy)]) == 4


def test_sweep_writes_summary(pipeline):
    code = main(["simulate", "--config", str(pipeline["cfg"]),
                 "--out", str(pipeline["out"]), "--mode", "nonlinear",
                 "--sweep", "2"])
    assert code == 0
    doc = json.loads((pipeline["out"] / "sweep.json").read_text())
    assert len(doc["entries"]) == 2
    assert doc["amplitudes"][0] == pytest.approx(1e-4)
    assert doc["amplitudes"][1] == pytest.approx(1e-3)
    ratios = [e["ratio_chi"] for e in doc["entries"]]
    assert all(r > 0 for r in ratios)
    for i in range(2):
        assert (pipeline["out"] / f"trace_sweep_{i}.csv").exists()


def test_report_skips_corrupt_rows(pipeline, tmp_path, capsys):
    import shutil

    copy = tmp_path / "corrupt"
    shutil.copytree(pipeline["out"], copy)
    trace = copy / "trace.csv"
    lines = trace.read_text().splitlines()
    lines.insert(3, "garbage,row")
    trace.write_text("\n".join(lines) + "\n")
    doc = json.loads((copy / "simulate.json").read_text())
    doc["files"]["trace"]["sha256"] = art.file_hash(str(trace))
    art.save_json(copy / "simulate.json", doc)
    assert main(["report", "--out", str(copy)]) == 0
    assert "skipping corrupt row" in capsys.readouterr().err


def test_report_on_empty_dir_exits_2(tmp_path):
    empty = tmp_path / "void"
    empty.mkdir()
    assert main(["report", "--out", str(empty)]) == 2
