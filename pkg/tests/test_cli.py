import json
import subprocess
import sys
from pathlib import Path

import pytest

CLI = [sys.executable, "-m", "kcm.cli"]
SYNTH = ["synth", "--seed", "5", "--layers", "2", "--dim", "16",
         "--filters", "64", "--heads", "2", "--vocab", "64",
         "--redundancy", "0.3", "--max-seq-len", "12",
         "--num-sequences", "24"]


def run_cli(*args, **kwargs):
    return subprocess.run(CLI + list(args), capture_output=True, text=True,
                          **kwargs)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    result = run_cli(*SYNTH, "--out", str(root / "fix"))
    assert result.returncode == 0, result.stderr
    return root


def model_path(workspace) -> str:
    return str(workspace / "fix" / "model")


def samples_path(workspace) -> str:
    return str(workspace / "fix" / "samples.tokens")


def test_synth_outputs_exist(workspace):
    assert (workspace / "fix" / "model" / "manifest.json").is_file()
    assert (workspace / "fix" / "model" / "weights.bin").is_file()
    assert (workspace / "fix" / "samples.tokens").is_file()


def test_synth_is_hash_stable(workspace, tmp_path):
    result = run_cli(*SYNTH, "--out", str(tmp_path / "again"))
    assert result.returncode == 0, result.stderr
    for rel in ("model/manifest.json", "model/weights.bin", "samples.tokens"):
        a = (workspace / "fix" / rel).read_bytes()
        b = (tmp_path / "again" / rel).read_bytes()
        assert a == b, rel


def test_prune_writes_container_and_report(workspace, tmp_path):
    out = tmp_path / "pruned"
    result = run_cli("prune", model_path(workspace), samples_path(workspace),
                     "--flops", "0.7", "--out", str(out))
    assert result.returncode == 0, result.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["strategy"] == "r2d2"
    assert report["kernel_width"] == 1.0
    assert report["alpha"] == 0.01
    assert sum(report["per_layer_retained"]) == report["k"]
    assert report["achieved_flops_fraction"] <= 0.7
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["per_layer_filters"] == report["per_layer_retained"]


def test_prune_infeasible_budget_exits_3(workspace, tmp_path):
    result = run_cli("prune", model_path(workspace), samples_path(workspace),
                     "--flops", "0.05", "--out", str(tmp_path / "nope"))
    assert result.returncode == 3
    assert "floor" in result.stderr


def test_prune_missing_model_exits_2(workspace, tmp_path):
    result = run_cli("prune", str(tmp_path / "missing"),
                     samples_path(workspace), "--out", str(tmp_path / "x"))
    assert result.returncode == 2


def test_eval_identity_and_pruned(workspace, tmp_path):
    out = tmp_path / "pruned"
    assert run_cli("prune", model_path(workspace), samples_path(workspace),
                   "--flops", "0.8", "--out", str(out)).returncode == 0
    identity = run_cli("eval", model_path(workspace), model_path(workspace),
                       samples_path(workspace))
    assert identity.returncode == 0, identity.stderr
    payload = json.loads(identity.stdout)
    assert payload["total_loss"] == 0.0
    assert payload["total_loss"] == sum(payload["per_layer_loss"])

    compared = run_cli("eval", model_path(workspace), str(out),
                       samples_path(workspace))
    assert compared.returncode == 0, compared.stderr
    payload = json.loads(compared.stdout)
    assert payload["achieved_flops_fraction"] <= 0.8
    assert payload["total_loss"] >= 0.0


def test_eval_mismatched_models_exits_2(workspace, tmp_path):
    result = run_cli(*["synth", "--seed", "9", "--layers", "1", "--dim", "8",
                       "--filters", "16", "--heads", "2", "--vocab", "64",
                       "--out", str(tmp_path / "other")])
    assert result.returncode == 0
    mismatch = run_cli("eval", model_path(workspace),
                       str(tmp_path / "other" / "model"),
                       samples_path(workspace))
    assert mismatch.returncode == 2
    assert "disagree" in mismatch.stderr


def test_ablate_csv_shape_and_strategies(workspace, tmp_path):
    out = tmp_path / "sweep.csv"
    result = run_cli("ablate", model_path(workspace), samples_path(workspace),
                     "--flops-grid", "0.7,0.9",
                     "--strategies", "r2_only,d2_only,r2d2",
                     "--num-samples", "16", "--out", str(out))
    assert result.returncode == 0, result.stderr
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "strategy,flops,k,total_loss,per_layer_retained"
    assert len(lines) == 1 + 3 * 2
    strategies = {line.split(",")[0] for line in lines[1:]}
    assert strategies == {"r2_only", "d2_only", "r2d2"}


def test_ablate_empty_strategies_is_usage_error(workspace):
    result = run_cli("ablate", model_path(workspace), samples_path(workspace),
                     "--strategies", " , ")
    assert result.returncode == 2


def test_ablate_unknown_strategy_is_usage_error(workspace):
    result = run_cli("ablate", model_path(workspace), samples_path(workspace),
                     "--strategies", "voodoo")
    assert result.returncode == 2
    assert "voodoo" in result.stderr
