"""Command-line surface: synth, prune, eval, ablate.

Exit codes: 0 success, 2 validation/usage error, 3 infeasible FLOPs budget,
4 I/O failure. KCM_THREADS caps layer-level parallelism.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click

from .container import (ModelConfig, read_container, read_token_batch,
                        synth_batch, synth_model, write_container,
                        write_token_batch)
from .errors import InfeasibleBudgetError, ValidationError
from .pruner import evaluate_pair, run_ablation, run_prune
from .ranking import STRATEGIES


@click.group()
def cli():
    """Structured pruning of transformer feed-forward filters."""


@cli.command("synth")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--layers", type=int, default=2, show_default=True)
@click.option("--dim", type=int, default=8, show_default=True)
@click.option("--filters", type=int, default=16, show_default=True)
@click.option("--heads", type=int, default=2, show_default=True)
@click.option("--vocab", type=int, default=64, show_default=True)
@click.option("--redundancy", type=float, default=0.0, show_default=True)
@click.option("--max-seq-len", type=int, default=16, show_default=True)
@click.option("--num-sequences", type=int, default=64, show_default=True)
@click.option("--out", type=click.Path(), required=True,
              help="Directory receiving model/ and samples.tokens.")
def cmd_synth(seed, layers, dim, filters, heads, vocab, redundancy,
              max_seq_len, num_sequences, out):
    """Generate a deterministic synthetic model plus a token batch."""
    config = ModelConfig(num_layers=layers, hidden_dim=dim, num_filters=filters,
                         num_heads=heads, vocab_size=vocab, max_seq_len=max_seq_len)
    bundle = synth_model(seed, config, redundancy)
    batch = synth_batch(seed + 1, config, num_sequences)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_container(bundle, out_dir / "model")
    write_token_batch(out_dir / "samples.tokens", batch,
                      vocab_size=vocab, seq_len=max_seq_len)
    click.echo(f"model: {out_dir / 'model'}")
    click.echo(f"samples: {out_dir / 'samples.tokens'} "
               f"({batch.num_sequences} sequences, {batch.total_tokens} tokens)")


@cli.command("prune")
@click.argument("model", type=click.Path(exists=True))
@click.argument("samples", type=click.Path(exists=True))
@click.option("--flops", type=float, default=0.6, show_default=True,
              help="Target fraction of the dense model's FLOPs.")
@click.option("--strategy", type=click.Choice(STRATEGIES), default="r2d2",
              show_default=True)
@click.option("--kernel-width", type=float, default=1.0, show_default=True)
@click.option("--alpha", type=float, default=0.01, show_default=True)
@click.option("--max-iters", type=int, default=200, show_default=True)
@click.option("--num-samples", type=int, default=2000, show_default=True,
              help="Sequences taken from the front of the sample file.")
@click.option("--ridge", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--normalize-r2", is_flag=True, default=False,
              help="Also max-normalize hull scores per layer before merging.")
@click.option("--out", type=click.Path(), required=True,
              help="Output directory for the pruned container.")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Report JSON path (default: <out>/report.json).")
def cmd_prune(model, samples, flops, strategy, kernel_width, alpha, max_iters,
              num_samples, ridge, seed, normalize_r2, out, report_path):
    """Rank, mask, rescale, and compact a model under a FLOPs budget."""
    bundle = read_container(model)
    batch, _ = read_token_batch(samples)
    pruned, _, report = run_prune(
        bundle, batch, flops=flops, strategy=strategy,
        kernel_width=kernel_width, alpha=alpha, max_iters=max_iters,
        num_samples=num_samples, ridge=ridge, seed=seed,
        normalize_r2=normalize_r2,
    )
    write_container(pruned, out)
    report_file = Path(report_path) if report_path else Path(out) / "report.json"
    report_file.parent.mkdir(parents=True, exist_ok=True)
    report_file.write_text(report.to_json())
    click.echo(f"pruned container: {out}")
    click.echo(f"report: {report_file}")
    click.echo(f"kept {report.k} filters "
               f"({report.achieved_flops_fraction:.4f} of dense FLOPs); "
               f"feature-map loss {report.total_loss_before:.6g} -> "
               f"{report.total_loss_after:.6g}")


@cli.command("eval")
@click.argument("original", type=click.Path(exists=True))
@click.argument("pruned", type=click.Path(exists=True))
@click.argument("samples", type=click.Path(exists=True))
@click.option("--num-samples", type=int, default=2000, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write the evaluation JSON here instead of stdout.")
def cmd_eval(original, pruned, samples, num_samples, out):
    """Feature-map losses and output deviation of a pruned model."""
    original_bundle = read_container(original)
    pruned_bundle = read_container(pruned)
    batch, _ = read_token_batch(samples)
    result = evaluate_pair(original_bundle, pruned_bundle, batch,
                           num_samples=num_samples)
    text = json.dumps(result, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
        click.echo(f"evaluation: {out}")
    else:
        click.echo(text, nl=False)


def _parse_floats(raw: str, what: str) -> list[float]:
    items = [piece.strip() for piece in raw.split(",") if piece.strip()]
    if not items:
        raise click.UsageError(f"{what} must list at least one value")
    try:
        return [float(piece) for piece in items]
    except ValueError as exc:
        raise click.UsageError(f"bad {what}: {exc}") from exc


@cli.command("ablate")
@click.argument("model", type=click.Path(exists=True))
@click.argument("samples", type=click.Path(exists=True))
@click.option("--flops-grid", default="0.6,0.7,0.8,0.9", show_default=True,
              help="Comma-separated FLOPs budgets.")
@click.option("--strategies", default="r2d2,r2_only,d2_only,weight_magnitude",
              show_default=True, help="Comma-separated strategy names.")
@click.option("--kernel-width", type=float, default=1.0, show_default=True)
@click.option("--alpha", type=float, default=0.01, show_default=True)
@click.option("--num-samples", type=int, default=2000, show_default=True)
@click.option("--ridge", type=float, default=0.0, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="CSV output path (default: stdout).")
def cmd_ablate(model, samples, flops_grid, strategies, kernel_width, alpha,
               num_samples, ridge, out):
    """Sweep strategies across FLOPs budgets and tabulate losses."""
    budgets = _parse_floats(flops_grid, "--flops-grid")
    names = [piece.strip() for piece in strategies.split(",") if piece.strip()]
    if not names:
        raise click.UsageError("--strategies must list at least one strategy")
    for name in names:
        if name not in STRATEGIES:
            raise click.UsageError(
                f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}"
            )
    bundle = read_container(model)
    batch, _ = read_token_batch(samples)
    rows = run_ablation(bundle, batch, budgets=budgets, strategies=names,
                        kernel_width=kernel_width, alpha=alpha,
                        num_samples=num_samples, ridge=ridge)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["strategy", "flops", "k", "total_loss", "per_layer_retained"])
    for row in rows:
        writer.writerow([
            row["strategy"], f"{row['flops']:g}", row["k"],
            f"{row['total_loss']:.10g}",
            ";".join(str(n) for n in row["per_layer_retained"]),
        ])
    if out:
        Path(out).write_text(buffer.getvalue())
        click.echo(f"ablation table: {out}")
    else:
        click.echo(buffer.getvalue(), nl=False)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except InfeasibleBudgetError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(4)


if __name__ == "__main__":
    main()
