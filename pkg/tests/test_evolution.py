import json
import shutil

import numpy as np
import pytest

from core.constants import ConfigError, RunOutcome, SliceDirection
from core.diagnostics import extract_slice, profile_deviation
from core.dynamics import Field3
from core.evolution import Evolution, current_run, run_evolution
from core.series import read_series
from core.snapshot import read_header, read_snapshot

OUTPUT = "[output]\ncheckpoint_interval = 8\n[diagnostics]\nslice_times = 0.125\n"
SERIES = ("origin.csv", "energy.csv", "constraint.csv", "minima.csv")


@pytest.fixture
def small_config(make_config):
    return make_config(n=17, A=0.5, extra=OUTPUT)


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_zero_amplitude_is_trivially_dispersed(make_config, tmp_path):
    summary = run_evolution(make_config(n=17, A=0.0), tmp_path)
    assert summary["outcome"] == RunOutcome.DISPERSED_TRIVIAL.value
    _, _, energy = read_series(tmp_path / "energy.csv")
    assert np.all(energy["E_tot"] == 0.0)
    _, _, origin = read_series(tmp_path / "origin.csv")
    assert np.all(origin["w_origin"] == 1.0)
    assert np.all(np.isnan(origin["s_gauss"]))


def test_artifacts_and_provenance(small_config, tmp_path):
    summary = Evolution(small_config, tmp_path).run()
    hex_hash = small_config.hash_hex()
    for name in SERIES:
        assert (tmp_path / name).read_text().splitlines()[0] == f"# config_hash={hex_hash}"
    _, names, origin = read_series(tmp_path / "origin.csv")
    assert names == ["t", "w_origin", "trace_H", "det_H", "s_gauss", "s_mean"]
    np.testing.assert_allclose(origin["t"], [0.0, 0.125, 0.25])

    assert (tmp_path / "config.ini").exists()
    assert (tmp_path / "slices" / "t=0.125000_x_axis.csv").exists()
    assert (tmp_path / "slices" / "t=0.125000_diagonal.csv").exists()
    for step in (8, 16):
        assert read_header(tmp_path / "snapshots" / f"step_{step:08d}.wmap").step == step
    final = read_header(tmp_path / "snapshots" / "final.wmap")
    assert final.step == 16
    assert final.config_hash.hex() == hex_hash

    on_disk = json.loads((tmp_path / "summary.json").read_text())
    assert on_disk == json.loads(json.dumps(summary))
    assert summary["config_hash"] == hex_hash
    assert summary["steps"] == 16
    assert summary["outcome"] in {o.value for o in RunOutcome}
    assert summary["integrator"]["worst_constraint_residual"] <= 1e-12
    assert summary["energy"]["max_relative_deviation"] < 0.05
    assert set(summary["minima"]) == {"x_axis", "diagonal"}
    assert current_run.get() == "-"


def test_identical_configs_give_identical_bytes(small_config, tmp_path):
    Evolution(small_config, tmp_path / "a").run()
    Evolution(small_config, tmp_path / "b").run()
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_restart_reproduces_uninterrupted_run(small_config, tmp_path):
    full = tmp_path / "full"
    Evolution(small_config, full).run()
    resumed = tmp_path / "resumed"
    shutil.copytree(full, resumed)
    (resumed / "snapshots" / "final.wmap").unlink()
    (resumed / "summary.json").unlink()

    summary = Evolution(small_config, resumed).run(resume=resumed / "snapshots" / "step_00000008.wmap")
    assert summary["steps"] == 16
    assert summary["integrator"]["steps_taken"] == 16
    assert json.loads((resumed / "summary.json").read_text()) == json.loads((full / "summary.json").read_text())
    assert tree_bytes(resumed) == tree_bytes(full)


def test_checkpoint_counter_file(small_config, tmp_path):
    Evolution(small_config, tmp_path).run()
    saved = json.loads((tmp_path / "snapshots" / "step_00000008.json").read_text())
    _, state = read_snapshot(tmp_path / "snapshots" / "step_00000008.wmap")
    assert saved["config_hash"] == small_config.hash_hex()
    assert saved["step"] == 8
    assert saved["integrator"]["steps_taken"] == 8
    assert saved["integrator"]["worst_constraint_residual"] <= 1e-12
    assert set(saved["flip_detector"]) == {"armed", "previous"}
    assert saved["flip_detector"]["previous"] == float(state.q.w[0, 0])


def test_resume_without_counter_file_keeps_step_count(small_config, tmp_path):
    Evolution(small_config, tmp_path).run()
    (tmp_path / "snapshots" / "step_00000008.json").unlink()
    summary = Evolution(small_config, tmp_path).run(resume=tmp_path / "snapshots" / "step_00000008.wmap")
    assert summary["integrator"]["steps_taken"] == 16


def test_resume_rejects_mismatched_counter_file(small_config, tmp_path):
    Evolution(small_config, tmp_path).run()
    snapshots = tmp_path / "snapshots"
    (snapshots / "step_00000008.json").write_text((snapshots / "step_00000016.json").read_text())
    with pytest.raises(ConfigError, match="counter file"):
        Evolution(small_config, tmp_path).run(resume=snapshots / "step_00000008.wmap")


def test_resume_rejects_foreign_snapshot(small_config, make_config, tmp_path):
    Evolution(small_config, tmp_path / "a").run()
    other = make_config(n=17, A=0.6, extra=OUTPUT)
    with pytest.raises(ConfigError):
        Evolution(other, tmp_path / "b").run(resume=tmp_path / "a" / "snapshots" / "step_00000008.wmap")


def test_projection_failure_is_an_outcome(make_config, tmp_path):
    config = make_config(n=17, A=0.5)

    def violent_force(q):
        return Field3(np.zeros_like(q.u), np.full_like(q.v, 1e8), np.zeros_like(q.w))

    evo = Evolution(config, tmp_path, force_fn=violent_force)
    summary = evo.run()
    assert summary["outcome"] == RunOutcome.PROJECTION_FAILURE.value
    assert summary["projection_failure"]["step"] == 1
    assert summary["projection_failure"]["failed_points"] > 0
    assert summary["projection_failure"]["after_hover"] is False
    assert read_header(tmp_path / "snapshots" / "final.wmap").step == 0
    assert evo.get_status()["outcome"] == RunOutcome.PROJECTION_FAILURE.value


def test_equivariant_evolution_keeps_slices_in_agreement(make_config, tmp_path):
    evo = Evolution(make_config(n=65, t_end=0.5, A=0.6, B=1.0), tmp_path)
    summary = evo.run()
    assert summary["steps"] == 128
    x = extract_slice(evo.state.q.w, evo.grid, SliceDirection.X_AXIS)
    d = extract_slice(evo.state.q.w, evo.grid, SliceDirection.DIAGONAL)
    assert profile_deviation(x, d) < 2e-3
