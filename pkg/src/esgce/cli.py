"""Command-line interface: ``esgce discover | simulate | bench``.

Every option can also be set through an environment variable
``ESGCE_<COMMAND>_<OPTION>`` or a ``key=value`` file passed with
``--config``; explicit flags win over both.
"""

from __future__ import annotations

import os
import sys
import time
from pathlib import Path

import click

from esgce.dataset import TimeSeriesDataset
from esgce.errors import (
    DataFormatError,
    ESGError,
    InsufficientDataError,
    InvariantViolationError,
    UnknownStructureError,
)
from esgce.estimator import DEFAULT_ALPHA, EstimatorConfig
from esgce.graph import ExtendedSummaryGraph
from esgce.simulate import MIN_LENGTH, StructureId

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(ctx: click.Context, _param, path):
    if not path:
        return path
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise click.BadParameter(str(exc)) from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    ctx.default_map = {**(ctx.default_map or {}), **values}
    return path


config_option = click.option(
    "--config", type=click.Path(dir_okay=False), callback=_load_config, is_eager=True,
    expose_value=False, help="key=value file with option defaults.")


def estimator_options(f):
    for opt in reversed([
        click.option("--gamma", type=click.IntRange(min=1), default=5, show_default=True, help="Maximum lag."),
        click.option("--k", type=click.IntRange(min=1), default=10, show_default=True, help="kNN neighbours."),
        click.option("--k-perm", type=click.IntRange(min=1), default=5, show_default=True,
                     help="Local permutation neighbourhood."),
        click.option("--n-perm", type=click.IntRange(min=1), default=100, show_default=True,
                     help="Permutations per test."),
        click.option("--alpha", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None,
                     help="Significance level [default: 0.05 pcgce, 0.1 fcigce]."),
        click.option("--max-level", type=click.IntRange(min=0), default=None,
                     help="Largest conditioning-set size."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--threads", type=click.IntRange(min=1), default=None,
                     help="Worker threads [default: available cores]."),
    ]):
        f = opt(f)
    return f


def _cfg(algorithm, gamma, k, k_perm, n_perm, alpha, seed) -> EstimatorConfig:
    return EstimatorConfig(gamma=gamma, k=k, k_perm=k_perm, n_perm=n_perm,
                           alpha=DEFAULT_ALPHA[algorithm] if alpha is None else alpha, seed=seed)


@click.group(context_settings={"auto_envvar_prefix": "ESGCE", "help_option_names": ["-h", "--help"]})
@click.version_option(package_name="esgce")
def main():
    """Extended summary causal graph discovery for multivariate time series."""


@main.command()
@config_option
@click.argument("input_csv", type=click.Path(dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None,
              help="Graph file [default: INPUT stem + .graph.json/.dot].")
@click.option("--algorithm", type=click.Choice(["pcgce", "fcigce"]), default="pcgce", show_default=True)
@estimator_options
@click.option("--format", "fmt", type=click.Choice(["json", "dot"]), default="json", show_default=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None,
              help="Write the independence-test log as CSV.")
@click.option("--truth", type=click.Path(dir_okay=False), default=None,
              help="Score the result against a graph JSON file.")
@click.option("--scoring", type=click.Choice(["compatible", "strict"]), default="compatible", show_default=True)
def discover(input_csv, output, algorithm, gamma, k, k_perm, n_perm, alpha, max_level, seed, threads,
             fmt, log_path, truth, scoring):
    """Learn a graph from INPUT_CSV (header row, one column per series)."""
    from esgce.evaluate import f1_scores
    from esgce.orient_fci import run_fcigce
    from esgce.orient_pc import run_pcgce

    try:
        data = TimeSeriesDataset.from_csv(input_csv)
    except FileNotFoundError:
        _fail(f"no such file: {input_csv}", EXIT_USAGE)
    except DataFormatError as exc:
        _fail(f"{input_csv}: {exc}", EXIT_USAGE)
    if data.d < 2:
        _fail(f"need at least 2 series, got {data.d}", EXIT_USAGE)
    if data.T < gamma + MIN_LENGTH:
        _fail(f"need at least gamma + {MIN_LENGTH} = {gamma + MIN_LENGTH} rows, got {data.T}", EXIT_DATA)

    cfg = _cfg(algorithm, gamma, k, k_perm, n_perm, alpha, seed)
    runner = run_fcigce if algorithm == "fcigce" else run_pcgce
    try:
        result = runner(data, cfg, max_level=max_level, threads=threads or os.cpu_count())
    except InsufficientDataError as exc:
        _fail(str(exc), EXIT_DATA)
    except InvariantViolationError as exc:
        _fail(str(exc), EXIT_INVARIANT)

    graph = result.graph
    out = Path(output) if output else Path(input_csv).with_suffix(f".graph.{fmt}")
    out.write_text(graph.to_dot() if fmt == "dot" else graph.to_json(indent=2) + "\n")
    if log_path:
        Path(log_path).write_text(result.log.to_csv(data.names))

    click.echo(f"{algorithm}: {graph.n_edges} edges, {result.total_tests} tests, {result.elapsed:.1f} s")
    for e in graph.edges():
        click.echo(f"  {e.a.label(graph.names)} {_symbol(e)} {e.b.label(graph.names)}")
    for c in result.conflicts:
        click.echo(f"  conflict: {c}")
    if truth:
        ref = ExtendedSummaryGraph.from_json(Path(truth).read_text())
        score = f1_scores(graph, ref, mode=scoring)
        self_part = "" if score.f1_self is None else f", F(p=q) = {score.f1_self:.3f}"
        click.echo(f"F(p!=q) = {score.f1_cross:.3f}{self_part}")
    click.echo(f"wrote {out}")


def _symbol(e) -> str:
    from esgce.graph import edge_symbol
    return edge_symbol(e.mark_a, e.mark_b)


@main.command()
@config_option
@click.argument("structure")
@click.argument("length", metavar="T", type=int, default=1000)
@click.argument("seed", type=int, default=0)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--max-lag", type=click.IntRange(min=1), default=2, show_default=True)
def simulate(structure, length, seed, out_dir, max_lag):
    """Simulate STRUCTURE and write data.csv, truth.json and meta.json."""
    from esgce.simulate import generate

    try:
        data, truth = generate(StructureId.parse(structure), length, seed, max_lag=max_lag)
    except UnknownStructureError as exc:
        _fail(str(exc.args[0]), EXIT_USAGE)
    except InsufficientDataError as exc:
        _fail(str(exc), EXIT_USAGE)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data.to_csv(out / "data.csv")
    (out / "truth.json").write_text(truth.graph.to_json(indent=2) + "\n")
    (out / "meta.json").write_text(truth.meta_json() + "\n")
    click.echo(f"wrote {out / 'data.csv'} ({data.T} x {data.d}), truth.json, meta.json")


@main.command()
@config_option
@click.option("--structures", default="all", show_default=True,
              help="Comma-separated structure ids or 'all'.")
@click.option("--n", "n_datasets", type=int, default=10, show_default=True, help="Datasets per structure.")
@click.option("--T", "length", type=int, default=1000, show_default=True, help="Timepoints per dataset.")
@click.option("--out", type=click.Path(dir_okay=False), default="report", show_default=True,
              help="Report path prefix; writes PREFIX.md and PREFIX.csv.")
@click.option("--algorithm", type=click.Choice(["pcgce", "fcigce"]), default=None,
              help="Force one algorithm [default: by structure].")
@estimator_options
@click.option("--scoring", type=click.Choice(["compatible", "strict"]), default="compatible", show_default=True)
def bench(structures, n_datasets, length, out, algorithm, gamma, k, k_perm, n_perm, alpha, max_level,
          seed, threads, scoring):
    """Benchmark discovery on simulated structures."""
    if n_datasets < 1:
        _fail("--n must be at least 1", EXIT_USAGE)
    if length < MIN_LENGTH:
        _fail(f"--T must be at least {MIN_LENGTH}", EXIT_USAGE)
    ids = [s.value for s in StructureId] if structures == "all" else structures.split(",")
    try:
        ids = [StructureId.parse(s.strip()) for s in ids]
    except UnknownStructureError as exc:
        _fail(str(exc.args[0]), EXIT_USAGE)

    start = time.perf_counter()

    def progress(r):
        click.echo(f"  {r.structure} #{r.dataset}: F(p!=q)={r.f1_cross:.2f} tests={r.total_tests} "
                   f"{r.seconds:.1f}s", err=True)

    report = _run_bench(ids, n_datasets, length, algorithm, gamma, k, k_perm, n_perm, alpha, seed,
                        max_level, threads, scoring, progress)
    Path(f"{out}.md").write_text(report.to_markdown())
    Path(f"{out}.csv").write_text(report.to_csv())
    click.echo(report.to_markdown())
    click.echo(f"wrote {out}.md and {out}.csv in {time.perf_counter() - start:.1f} s")


def _run_bench(ids, n_datasets, length, algorithm, gamma, k, k_perm, n_perm, alpha, seed, max_level,
               threads, scoring, progress):
    from esgce.evaluate import BenchmarkReport, benchmark, default_algorithm

    report = BenchmarkReport()
    for sid in ids:
        alg = algorithm or default_algorithm(sid)
        cfg = _cfg(alg, gamma, k, k_perm, n_perm, alpha, seed)
        part = benchmark([sid], n_datasets, length, cfg, seed=seed, algorithm=alg, max_level=max_level,
                         threads=threads or os.cpu_count(), mode=scoring, progress=progress)
        report.runs.extend(part.runs)
    return report


def run() -> None:
    """Console entry point mapping library errors to exit codes."""
    try:
        main(standalone_mode=True)
    except InvariantViolationError as exc:
        _fail(str(exc), EXIT_INVARIANT)
    except InsufficientDataError as exc:
        _fail(str(exc), EXIT_DATA)
    except ESGError as exc:
        _fail(str(exc), EXIT_USAGE)


if __name__ == "__main__":  # pragma: no cover
    run()
