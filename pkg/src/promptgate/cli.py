"""Command-line interface for corpus management, training, and experiments."""

from __future__ import annotations

import json
from pathlib import Path

import click
import httpx

from promptgate.calibration import calibrate_threshold
from promptgate.cluster import prune_features, spearman_matrix, ward_cluster
from promptgate.corpus import (
    CorpusFormatError,
    generate_synthetic_corpus,
    ingest_dataset,
    partition_dataset,
    write_corpus,
)
from promptgate.evaluation import emit_report, evaluate_on
from promptgate.experiments import run_adaptability_experiment, run_selection_experiment
from promptgate.features import FEATURE_NAMES, features_matrix
from promptgate.forest import ForestConfig, accuracy, save_forest, train_forest_arrays
from promptgate.gateway import GatewayService, load_config
from promptgate.seeding import stable_u64


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Gateway config file.")
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Output file path.")
@click.pass_context
def main(ctx, config_path, seed, out_path):
    """Prompt-safety gateway toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed
    ctx.obj["out"] = out_path


def _seed(ctx, default=0):
    return ctx.obj["seed"] if ctx.obj["seed"] is not None else default


def _out(ctx, default):
    return Path(ctx.obj["out"]) if ctx.obj["out"] else Path(default)


@main.command()
@click.argument("dataset_path", type=click.Path(exists=True))
@click.option("--tag", required=True, help="Dataset tag to stamp on every record.")
@click.pass_context
def ingest(ctx, dataset_path, tag):
    """Validate a corpus file and report label counts."""
    try:
        prompts = ingest_dataset(dataset_path, tag)
    except CorpusFormatError as exc:
        raise click.ClickException(str(exc))
    malicious = sum(1 for p in prompts if p.label == "malicious")
    click.echo(f"{len(prompts)} prompts ({malicious} malicious, {len(prompts) - malicious} benign)")
    if ctx.obj["out"]:
        write_corpus(prompts, ctx.obj["out"])
        click.echo(f"normalized copy written to {ctx.obj['out']}")


@main.command()
@click.argument("dataset_path", type=click.Path(exists=True))
@click.option("--tag", required=True)
@click.option("--out-dir", type=click.Path(), default=".", help="Directory for the four split files.")
@click.pass_context
def partition(ctx, dataset_path, tag, out_dir):
    """Split a dataset 56/14/10/20 into fit/val/calibration/test files."""
    prompts = ingest_dataset(dataset_path, tag)
    split = partition_dataset(prompts, seed=stable_u64(_seed(ctx), tag))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in ("train_fit", "train_val", "calibration", "test"):
        part = getattr(split, name)
        path = out_dir / f"{tag}.{name}.jsonl"
        write_corpus(part, path)
        click.echo(f"{path}: {len(part)} prompts")


@main.command("gen-synth")
@click.argument("spec_path", type=click.Path(exists=True))
@click.pass_context
def gen_synth(ctx, spec_path):
    """Generate a synthetic corpus from a {tag: dataset spec} JSON file."""
    spec = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    prompts = generate_synthetic_corpus(spec, seed=_seed(ctx))
    out = _out(ctx, "synthetic.jsonl")
    write_corpus(prompts, out)
    click.echo(f"{len(prompts)} prompts written to {out}")


@main.command("train-router")
@click.argument("corpus_paths", type=click.Path(exists=True), nargs=-1, required=True)
@click.option("--features", default=None, help="Comma-separated feature subset (default: all nine).")
@click.option("--forest-json", default=None, help="Forest hyperparameters as inline JSON.")
@click.pass_context
def train_router(ctx, corpus_paths, features, forest_json):
    """Train the routing forest on corpus files labeled by dataset tag."""
    from promptgate.backends import load_corpus_records

    prompts = [p for path in corpus_paths for p in load_corpus_records(path)]
    names = tuple(features.split(",")) if features else FEATURE_NAMES
    config_kwargs = json.loads(forest_json) if forest_json else {}
    config_kwargs.setdefault("seed", _seed(ctx))
    config = ForestConfig(**config_kwargs)
    X = features_matrix([p.prompt for p in prompts], names=names)
    labels = [p.dataset_tag for p in prompts]
    forest = train_forest_arrays(X, labels, names, config)
    out = _out(ctx, "router.json")
    save_forest(forest, out)
    click.echo(f"router trained on {len(prompts)} prompts, accuracy {accuracy(forest, X, labels):.3f}, saved to {out}")


@main.command("prune-features")
@click.argument("corpus_paths", type=click.Path(exists=True), nargs=-1, required=True)
@click.option("--cut", type=float, default=0.7, show_default=True, help="Dendrogram distance cut.")
@click.pass_context
def prune_features_cmd(ctx, corpus_paths, cut):
    """Drop redundant features via Spearman correlation + Ward clustering."""
    from promptgate.backends import load_corpus_records

    prompts = [p for path in corpus_paths for p in load_corpus_records(path)]
    X = features_matrix([p.prompt for p in prompts])
    corr = spearman_matrix(X.T)
    dendro = ward_cluster(corr)
    kept = prune_features(X, FEATURE_NAMES, cut_distance=cut)
    report = {
        "cut_distance": cut,
        "kept": kept,
        "dropped": [n for n in FEATURE_NAMES if n not in kept],
        "merges": [
            {"a": s.cluster_a, "b": s.cluster_b, "distance": s.distance, "size": s.size}
            for s in dendro.steps
        ],
    }
    out = _out(ctx, "feature_pruning.json")
    out.write_text(json.dumps(report, indent=2), encoding="utf-8")
    click.echo(f"kept {len(kept)}/{len(FEATURE_NAMES)} features -> {out}")


@main.command()
@click.argument("scores_path", type=click.Path(exists=True))
@click.pass_context
def calibrate(ctx, scores_path):
    """Two-stage threshold search over a scored set (JSONL: score, label)."""
    pairs = []
    with open(scores_path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                pairs.append((float(record["score"]), record["label"]))
    report = calibrate_threshold(pairs)
    out = _out(ctx, "calibration.json")
    out.write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    click.echo(f"threshold {report.best_threshold:.2f} (F1 {report.best_f1:.4f}, {report.evaluation_count} evaluations) -> {out}")


@main.command()
@click.argument("test_corpus", type=click.Path(exists=True))
@click.option("--strategy", default="router", show_default=True)
@click.option("--n", type=int, default=None, help="Selection size (default: configured).")
@click.pass_context
def evaluate(ctx, test_corpus, strategy, n):
    """Evaluate the configured ensemble on a labeled test corpus."""
    from promptgate.backends import load_corpus_records

    service = _service(ctx)
    prompts = load_corpus_records(test_corpus)
    _, record = evaluate_on(service.current_state, prompts, strategy=strategy, n=n, base_seed=_seed(ctx))
    out = _out(ctx, "evaluation.csv")
    emit_report([record], out)
    click.echo(
        f"k={record.k} n={record.n} {record.strategy}: F1 {record.f1:.4f} ASR {record.asr:.4f} FPR {record.fpr:.4f} -> {out}"
    )


@main.command("sweep-n")
@click.argument("experiment_path", type=click.Path(exists=True))
@click.pass_context
def sweep_n(ctx, experiment_path):
    """Fixed-k selection-size sweep on a synthetic stub system."""
    spec = json.loads(Path(experiment_path).read_text(encoding="utf-8"))
    if ctx.obj["seed"] is not None:
        spec["seed"] = ctx.obj["seed"]
    records = run_selection_experiment(spec)
    out = _out(ctx, "sweep_n.csv")
    emit_report(records, out)
    click.echo(f"{len(records)} records -> {out}")


@main.command("sweep-k")
@click.argument("experiment_path", type=click.Path(exists=True))
@click.pass_context
def sweep_k(ctx, experiment_path):
    """Growing-k adaptability sweep with per-step recalibration."""
    spec = json.loads(Path(experiment_path).read_text(encoding="utf-8"))
    if ctx.obj["seed"] is not None:
        spec["seed"] = ctx.obj["seed"]
    records = run_adaptability_experiment(spec)
    out = _out(ctx, "sweep_k.csv")
    emit_report(records, out)
    click.echo(f"{len(records)} records -> {out}")


@main.command()
@click.pass_context
def serve(ctx):
    """Run the HTTP gateway."""
    from promptgate.gateway import serve as serve_gateway

    config_path = ctx.obj["config_path"]
    if not config_path:
        raise click.ClickException("serve requires --config")
    overrides = {"seed": ctx.obj["seed"]} if ctx.obj["seed"] is not None else None
    config = load_config(config_path, overrides)
    serve_gateway(config, base_dir=Path(config_path).parent)


@main.command()
@click.option("--url", required=True, help="Base URL of a running gateway.")
@click.option("--dataset-path", required=True, type=str)
@click.option("--tag", required=True)
@click.option("--backend-json", required=True, help="Backend descriptor as inline JSON.")
def update(url, dataset_path, tag, backend_json):
    """Add a dataset + promptcop to a running gateway via /v1/update."""
    body = {
        "dataset_path": dataset_path,
        "dataset_tag": tag,
        "backend": json.loads(backend_json),
    }
    response = httpx.post(f"{url.rstrip('/')}/v1/update", json=body, timeout=300.0)
    if response.status_code != 200:
        raise click.ClickException(f"update failed ({response.status_code}): {response.text}")
    result = response.json()
    click.echo(
        f"k={result['k']} threshold={result['threshold']:.2f} "
        f"router_accuracy={result['router_accuracy']:.3f} evaluations={result['evaluations']}"
    )


def _service(ctx) -> GatewayService:
    config_path = ctx.obj["config_path"]
    if not config_path:
        raise click.ClickException("this command requires --config")
    overrides = {"seed": ctx.obj["seed"]} if ctx.obj["seed"] is not None else None
    config = load_config(config_path, overrides)
    return GatewayService(config, base_dir=Path(config_path).parent)


if __name__ == "__main__":
    main(obj={})
