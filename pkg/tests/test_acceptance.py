"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``. The export round-trip
criterion belongs to the exporter package and runs in its test suite.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from kcm import (FilterMask, KernelParams, ModelConfig, apply_prune,
                 baseline_scores, budget_to_k, feature_map_loss,
                 fit_all_scales, flops_of, forward, gaussian_kernel,
                 kcha_iterate, select_topk, seminmf_update, synth_batch,
                 synth_model, total_feature_map_loss)
from kcm.ranking import FlopsModel
from oracles import best_k_under_budget, hull_indices_2d

TOY = ModelConfig(num_layers=2, hidden_dim=16, num_filters=64, num_heads=2,
                  vocab_size=64, max_seq_len=16)


def announce(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"[PASS] {name}{suffix}")


def test_acceptance_hull_recovery():
    """Top-h scores recover >=80% of true 2-d hull vertices per seed, <5s."""
    started = time.perf_counter()
    recoveries = []
    for seed in range(1, 11):
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, 2.0 * np.pi, 50)
        radius = 1.25 * np.sqrt(rng.uniform(0.0, 1.0, 50))
        points = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
        hull = hull_indices_2d(points)
        result = kcha_iterate(gaussian_kernel(points, 1.0),
                              KernelParams(width=1.0, alpha=0.01))
        top = set(np.argsort(-result.scores, kind="stable")[: len(hull)])
        recovery = len(top & hull) / len(hull)
        assert recovery >= 0.8, f"seed {seed}: recovery {recovery:.3f}"
        recoveries.append(recovery)
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    announce("hull recovery", f"min {min(recoveries):.2f}, "
                              f"mean {np.mean(recoveries):.2f}, {elapsed:.2f}s")


def test_acceptance_update_rule_specialization():
    """General split update equals the positive-kernel form within 1e-7."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 33))
        gram = rng.uniform(1e-3, 1.0, size=(n, n))
        gram = (gram + gram.T) / 2.0
        np.fill_diagonal(gram, 1.0)
        coeff = rng.uniform(1e-3, 1.0, size=(n, n))
        general = seminmf_update(gram, coeff)
        positive_form = coeff * np.sqrt(gram / (gram @ coeff))
        worst = max(worst, float(np.max(np.abs(general - positive_form))))
    assert worst < 1e-7
    announce("update-rule specialization", f"max deviation {worst:.2e}")


def test_acceptance_convergence_anchor():
    """>=90% of 20 seeded layers (N<=512) converge within 50 iterations."""
    cases = [(64, 16), (128, 32), (256, 32), (512, 64)]
    converged = 0
    iteration_counts = []
    for filters, dim in cases:
        config = ModelConfig(num_layers=1, hidden_dim=dim, num_filters=filters,
                             num_heads=2, vocab_size=16, max_seq_len=8)
        for seed in range(5):
            bundle = synth_model(seed, config, 0.0)
            kernel = gaussian_kernel(bundle.layers[0].w2.astype(np.float64), 1.0)
            result = kcha_iterate(kernel, KernelParams(max_iters=50))
            converged += int(result.converged)
            iteration_counts.append(result.iterations)
    assert converged >= 18, f"only {converged}/20 layers converged"
    announce("convergence anchor",
             f"{converged}/20 converged, median iterations "
             f"{int(np.median(iteration_counts))}")


def test_acceptance_mask_identity():
    """Identity mask reproduces the dense forward; empty mask hits ||Y||."""
    worst_dev = 0.0
    worst_rel = 0.0
    for seed in range(10):
        config = ModelConfig(num_layers=2, hidden_dim=8, num_filters=16,
                             num_heads=2, vocab_size=32, max_seq_len=12)
        bundle = synth_model(seed, config, 0.0)
        batch = synth_batch(seed + 100, config, 6)
        dense = forward(bundle, batch, capture=True)
        ones = forward(bundle, batch, mask=FilterMask.all_ones(2, 16))
        deviation = float(np.max(np.abs(dense.hidden - ones.hidden)))
        worst_dev = max(worst_dev, deviation)
        assert deviation <= 1e-5
        for i, layer in enumerate(bundle.layers):
            loss = feature_map_loss(layer, dense.capture.h1[i], np.zeros(16))
            want = float(np.linalg.norm(dense.capture.y[i]))
            rel = abs(loss - want) / want
            worst_rel = max(worst_rel, rel)
            assert rel <= 1e-4
    announce("mask identity", f"max forward deviation {worst_dev:.1e}, "
                              f"max ||Y|| mismatch {worst_rel:.1e}")


def test_acceptance_scaling_optimality():
    """Fitted scales never lose to unit scales, over a 30-case grid."""
    checked = 0
    for seed in range(10):
        bundle = synth_model(seed, TOY, 0.2)
        batch = synth_batch(seed + 50, TOY, 12)
        capture = forward(bundle, batch, capture=True).capture
        mask_rng = np.random.default_rng(seed)
        for density in (0.3, 0.6, 0.9):
            mask_matrix = (mask_rng.uniform(size=(2, 64)) < density).astype(float)
            mask_matrix[:, 0] = 1.0  # at least one active filter per layer
            mask = FilterMask(mask_matrix, np.ones_like(mask_matrix))
            fitted, _ = fit_all_scales(bundle, capture, mask, ridge=0.0)
            for i, layer in enumerate(bundle.layers):
                before = feature_map_loss(layer, capture.h1[i], mask.mask[i])
                after = feature_map_loss(layer, capture.h1[i],
                                         fitted.mask[i], fitted.scales[i])
                assert after <= before + 1e-6, (seed, density, i)
            checked += 1
    assert checked == 30
    announce("scaling optimality", "30/30 cases")


def test_acceptance_zero_loss_redundancy_certificate():
    """Dropping one member of each duplicate pair is repaired by scale 2."""
    config = ModelConfig(num_layers=2, hidden_dim=16, num_filters=32,
                         num_heads=2, vocab_size=64, max_seq_len=16)
    bundle = synth_model(3, config, 0.5)
    batch = synth_batch(4, config, 16)
    capture = forward(bundle, batch, capture=True).capture
    mask_matrix = np.zeros((2, 32))
    mask_matrix[:, :16] = 1.0  # sources stay, copies go
    mask = FilterMask(mask_matrix, np.ones_like(mask_matrix))
    fitted, fits = fit_all_scales(bundle, capture, mask, ridge=0.0)
    worst_loss = 0.0
    worst_scale_err = 0.0
    for i, layer in enumerate(bundle.layers):
        loss = feature_map_loss(layer, capture.h1[i], fitted.mask[i],
                                fitted.scales[i])
        worst_loss = max(worst_loss, loss)
        assert loss < 1e-3, f"layer {i} loss {loss:.2e}"
        scale_err = float(np.max(np.abs(fits[i].scales - 2.0)))
        worst_scale_err = max(worst_scale_err, scale_err)
        assert scale_err < 1e-3, f"layer {i} scales off by {scale_err:.2e}"
    announce("zero-loss redundancy certificate",
             f"max loss {worst_loss:.1e}, max |scale-2| {worst_scale_err:.1e}")


def test_acceptance_budget_correctness():
    """Budget conversion matches brute force; masks sit exactly on the edge."""
    configs = [
        TOY,
        ModelConfig(num_layers=3, hidden_dim=8, num_filters=32, num_heads=2,
                    vocab_size=16, max_seq_len=8),
        ModelConfig(num_layers=1, hidden_dim=4, num_filters=48, num_heads=2,
                    vocab_size=16, max_seq_len=8),
    ]
    rng = np.random.default_rng(0)
    cases = 0
    for config in configs:
        model = FlopsModel.for_config(config, 8)
        limit = config.num_layers * config.num_filters
        for fraction in (0.55, 0.6, 0.75, 0.9, 1.0):
            budget = fraction * model.dense_total
            want = best_k_under_budget(config.num_layers,
                                       model.per_layer_attention,
                                       model.per_filter, limit, budget)
            if want < 0:
                continue
            k = budget_to_k(config, 8, fraction)
            assert k == want
            scores = rng.uniform(size=(config.num_layers, config.num_filters))
            from kcm import ScoreTable
            mask = select_topk(ScoreTable(scores, "r2d2"), k)
            counts = [int(n) for n in mask.active_counts()]
            assert sum(counts) == k
            used = flops_of(config, counts, 8)
            assert used <= budget
            if k < limit:
                assert used + model.per_filter > budget
            cases += 1
    assert cases >= 10
    announce("budget correctness", f"{cases} (config, fraction) cases")


def test_acceptance_ablation_ordering():
    """Merged ranking beats weight magnitude at C=0.6 in >=8/10 seeds."""
    wins = 0
    margins = []
    for seed in range(10):
        bundle = synth_model(seed, TOY, 0.3)
        batch = synth_batch(seed + 1000, TOY, 48)
        capture = forward(bundle, batch, capture=True).capture
        k = budget_to_k(TOY, batch.max_len, 0.6)

        def scaled_loss(strategy):
            table = baseline_scores(strategy, bundle, capture,
                                    params=KernelParams())
            mask = select_topk(table, k)
            fitted, _ = fit_all_scales(bundle, capture, mask, ridge=0.0)
            _, total = total_feature_map_loss(bundle, capture, fitted)
            return total

        merged = scaled_loss("r2d2")
        magnitude = scaled_loss("weight_magnitude")
        wins += int(merged <= magnitude)
        margins.append(magnitude - merged)
    assert wins >= 8, f"merged ranking won only {wins}/10 seeds"
    announce("ablation ordering", f"{wins}/10 wins, "
                                  f"median margin {np.median(margins):.3f}")


def test_acceptance_end_to_end_determinism(tmp_path):
    """Two identical prune invocations emit byte-identical artifacts."""
    cli = [sys.executable, "-m", "kcm.cli"]
    fixture = tmp_path / "fix"
    synth = cli + ["synth", "--seed", "7", "--layers", "2", "--dim", "16",
                   "--filters", "64", "--heads", "2", "--vocab", "64",
                   "--redundancy", "0.3", "--max-seq-len", "12",
                   "--num-sequences", "32", "--out", str(fixture)]
    assert subprocess.run(synth, capture_output=True).returncode == 0
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        prune = cli + ["prune", str(fixture / "model"),
                       str(fixture / "samples.tokens"),
                       "--flops", "0.7", "--strategy", "r2d2",
                       "--num-samples", "24", "--seed", "7",
                       "--out", str(out)]
        result = subprocess.run(prune, capture_output=True, text=True)
        assert result.returncode == 0, result.stderr
        report = json.loads((out / "report.json").read_text())
        report.pop("timings_s")
        outputs.append((
            (out / "manifest.json").read_bytes(),
            (out / "weights.bin").read_bytes(),
            json.dumps(report, sort_keys=True),
        ))
    assert outputs[0][0] == outputs[1][0], "manifest bytes differ"
    assert outputs[0][1] == outputs[1][1], "weight bytes differ"
    assert outputs[0][2] == outputs[1][2], "reports differ beyond timings"
    announce("end-to-end determinism")
