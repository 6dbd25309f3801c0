"""facematch command line: ingest corpora, run matches, generate, serve, bench.

Exit codes are stable for scripting: 0 success, 1 runtime failure, 2 usage
error. Every subcommand honors --backend stub, which needs no network and
no model files.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import params as params_mod
from .errors import FaceMatchError
from .facepipe import build_pipeline
from .genclient import ENV_URL, GeneratorConfig, generate_image
from .ingest import ImageFetcher, ingest_all, parse_manifest
from .vecstore import IndexConfig, VectorStore, META_FILE

_BACKENDS = click.Choice(["stub", "neural"])
_FORMATS = click.Choice(["human", "json"])


def _fail(exc: Exception) -> click.ClickException:
    return click.ClickException(str(exc))


def _load_params_file(path: str) -> params_mod.FaceParameters:
    try:
        raw = params_mod.parse_params_file(Path(path).read_text(encoding="utf-8"))
        return params_mod.validate_parameters(raw)
    except OSError as exc:
        raise click.ClickException(f"cannot read params file {path}: {exc}")
    except params_mod.ParameterError as exc:
        raise click.ClickException(
            "invalid parameters:\n  " + "\n  ".join(i.message for i in exc.issues)
        )


def _make_pipeline(backend: str, detector_model: str | None, embedder_model: str | None):
    try:
        return build_pipeline(backend, detector_model, embedder_model)
    except FaceMatchError as exc:
        raise _fail(exc)


def _make_generator(backend: str) -> GeneratorConfig:
    if backend == "stub":
        return GeneratorConfig(backend="stub")
    import os

    if not os.environ.get(ENV_URL):
        raise click.ClickException(
            f"remote generation needs {ENV_URL} set when --backend neural"
        )
    return GeneratorConfig.from_env(backend="remote")


def _load_store(directory: str) -> VectorStore:
    try:
        return VectorStore.load(directory)
    except FaceMatchError as exc:
        raise _fail(exc)


@click.group()
@click.version_option(package_name="facematch")
def main():
    """Find matching faces from user-selected face parameters."""


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON-lines corpus manifest (id?, name, image_url).")
@click.option("--store", "store_dir", required=True, type=click.Path(),
              help="Store directory (created or updated).")
@click.option("--backend", type=_BACKENDS, default="stub", show_default=True)
@click.option("--kind", type=click.Choice(["flat", "hnsw"]), default="flat",
              show_default=True, help="Index kind when creating a new store.")
@click.option("--detector-model", type=click.Path(), default=None)
@click.option("--embedder-model", type=click.Path(), default=None)
@click.option("--parallelism", type=int, default=4, show_default=True)
@click.option("--format", "fmt", type=_FORMATS, default="human", show_default=True)
def ingest(manifest, store_dir, backend, kind, detector_model, embedder_model,
           parallelism, fmt):
    """Build or extend a store from a corpus manifest."""
    pipeline = _make_pipeline(backend, detector_model, embedder_model)
    manifest_path = Path(manifest)
    try:
        records = parse_manifest(manifest_path)
        if (Path(store_dir) / META_FILE).exists():
            store = VectorStore.load(store_dir)
        else:
            store = VectorStore(IndexConfig(kind=kind))
        fetcher = ImageFetcher(base_dir=manifest_path.parent)
        report = ingest_all(records, store, pipeline, fetcher, parallelism=parallelism)
        store.save(store_dir)
    except FaceMatchError as exc:
        raise _fail(exc)
    if fmt == "json":
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(report.summary())
        click.echo(f"store saved to {store_dir} ({len(store)} vectors)")


@main.command()
@click.option("--params", "params_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Flat key-value face parameter file.")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("-k", type=int, default=5, show_default=True)
@click.option("--backend", type=_BACKENDS, default="stub", show_default=True)
@click.option("--detector-model", type=click.Path(), default=None)
@click.option("--embedder-model", type=click.Path(), default=None)
@click.option("--out-image", type=click.Path(dir_okay=False), default=None,
              help="Write the generated face image here.")
@click.option("--report-dir", type=click.Path(), default=None,
              help="Write matches.tsv plus rendered figures here.")
@click.option("--format", "fmt", type=_FORMATS, default="human", show_default=True)
def match(params_file, store_dir, k, backend, detector_model, embedder_model,
          out_image, report_dir, fmt):
    """Compile the prompt, generate a face, and print the top-k matches."""
    if k < 1:
        raise click.UsageError("-k must be >= 1")
    parameters = _load_params_file(params_file)
    prompt = params_mod.build_prompt(parameters)
    pipeline = _make_pipeline(backend, detector_model, embedder_model)
    generator = _make_generator(backend)
    store = _load_store(store_dir)
    try:
        image = generate_image(prompt, generator)
        _, embedding = pipeline.embed_image(image.data)
        results = store.search(embedding, k)
    except FaceMatchError as exc:
        raise _fail(exc)
    if out_image:
        Path(out_image).write_bytes(image.data)
    matches = []
    for result in results:
        stored = store.get(result.id)
        meta = stored.metadata if stored else {}
        matches.append(
            {
                "rank": result.rank,
                "profile_id": result.id,
                "name": meta.get("name", ""),
                "score": result.score,
                "image_url": meta.get("image_url", ""),
            }
        )
    if fmt == "json":
        click.echo(json.dumps({"prompt": prompt, "matches": matches}, indent=2))
    else:
        click.echo(f"prompt: {prompt}")
        click.echo(f"{'rank':>4}  {'score':>9}  {'id':<12} name")
        for m in matches:
            click.echo(
                f"{m['rank']:>4}  {m['score']:>9.6f}  {m['profile_id']:<12} {m['name']}"
            )
    if report_dir:
        from .reporting import write_match_report

        written = write_match_report(report_dir, prompt, matches, image.data)
        click.echo("report: " + ", ".join(str(p) for p in written), err=(fmt == "json"))


@main.command()
@click.option("--params", "params_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--backend", type=_BACKENDS, default="stub", show_default=True)
def generate(params_file, out_path, backend):
    """Generate a face image for a parameter file and print the prompt."""
    parameters = _load_params_file(params_file)
    prompt = params_mod.build_prompt(parameters)
    generator = _make_generator(backend)
    try:
        image = generate_image(prompt, generator)
    except FaceMatchError as exc:
        raise _fail(exc)
    Path(out_path).write_bytes(image.data)
    click.echo(prompt)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--addr", default="127.0.0.1:8080", show_default=True,
              help="Bind address host:port.")
@click.option("--backend", type=_BACKENDS, default="stub", show_default=True)
@click.option("--detector-model", type=click.Path(), default=None)
@click.option("--embedder-model", type=click.Path(), default=None)
@click.option("--assets", type=click.Path(), default=None,
              help="Static web UI bundle to mount at / (e.g. frontend/dist).")
def serve(store_dir, addr, backend, detector_model, embedder_model, assets):
    """Serve the HTTP API (and the web UI when --assets is given)."""
    import uvicorn

    from .service import create_app

    host, _, port_text = addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--addr must be host:port, got {addr!r}")
    store = _load_store(store_dir)
    pipeline = _make_pipeline(backend, detector_model, embedder_model)
    generator = _make_generator(backend)
    app = create_app(store, pipeline, generator, assets_dir=assets)
    click.echo(f"serving {len(store)} profiles on http://{addr}")
    uvicorn.run(app, host=host, port=int(port_text), log_level="warning")


@main.command()
@click.option("--n", required=True, type=int, help="Synthetic store size.")
@click.option("--dim", type=int, default=512, show_default=True)
@click.option("--kind", type=click.Choice(["flat", "hnsw"]), default="hnsw",
              show_default=True)
@click.option("--queries", type=int, default=100, show_default=True)
@click.option("-k", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report-dir", type=click.Path(), default=None,
              help="Write bench.tsv plus rendered figures here.")
@click.option("--format", "fmt", type=_FORMATS, default="human", show_default=True)
def bench(n, dim, kind, queries, k, seed, report_dir, fmt):
    """Benchmark a synthetic store: build time, latency, and hnsw recall."""
    from .bench import run_bench

    if n < 1:
        raise click.UsageError("--n must be >= 1")
    sweep = None
    if report_dir and kind == "hnsw":
        sweep = [ef for ef in (16, 32, 64, 128, 256, 512, 1024) if ef <= max(16, 2 * n)]
    try:
        result = run_bench(
            n=n, dim=dim, kind=kind, queries=queries, k=k, seed=seed, ef_sweep=sweep
        )
    except (FaceMatchError, ValueError) as exc:
        raise _fail(exc)
    if fmt == "json":
        click.echo(json.dumps(result.to_dict(), indent=2))
    else:
        click.echo(f"kind:            {result.kind}")
        click.echo(f"vectors:         {result.n} x {result.dim}")
        click.echo(f"build time:      {result.build_seconds:.2f} s")
        click.echo(f"mean query time: {result.mean_query_ms:.3f} ms ({result.queries} queries)")
        if result.recall_at_k is not None:
            click.echo(f"recall@{result.k}:        {result.recall_at_k:.4f} (vs flat)")
    if report_dir:
        from .reporting import write_bench_report

        written = write_bench_report(report_dir, result)
        click.echo("report: " + ", ".join(str(p) for p in written))


if __name__ == "__main__":
    main()
