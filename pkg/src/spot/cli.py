"""Headless command line: ingest, describe, aggregate, sessions, serve.

Spec grammars used by the flags:

    partition   facet                 defaults derived from the facet's stats
                facet:lo:hi:bins      explicit continuous bins, e.g. x:0:10:5
                facet:INTERVAL        datetime interval (year|month|day|hour|minute)
    selection   facet:[lo,hi)         half-open range; endpoints are numbers
                                      or ISO-8601 timestamps
                facet:{a,b}           category labels (no commas/braces inside)
    aggregate   count  |  op:facet    op in sum|avg|min|max|stddev

Exit codes: 0 success, 2 usage error (bad flags/grammar), 1 data error
(unreadable file, unknown facet, kind mismatch, invalid session).
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from functools import wraps

import click

from . import engine
from .dataview import DataView, Filter
from .engine import (
    AggregateSpec,
    BinKey,
    CategoryList,
    CategorySelection,
    ContinuousBins,
    PartitionSpec,
    RangeSelection,
    TIME_INTERVALS,
    TimeInterval,
    default_partition,
)
from .errors import SpotError
from .ingest import detect_facet_kinds, load_file, parse_timestamp
from .model import Dataset, fmt_num, fmt_timestamp, from_epoch_ms, to_epoch_ms


def _data_errors(fn):
    """Map data-level failures to exit code 1 (usage errors stay exit 2)."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SpotError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _parse_kind_overrides(pairs) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        name, sep, kind = pair.partition("=")
        if not sep or not name or not kind:
            raise click.BadParameter(f"--kind takes name=kind, got {pair!r}")
        overrides[name] = kind
    return overrides


def _load(path: str, kind_pairs) -> Dataset:
    return load_file(path, overrides=_parse_kind_overrides(kind_pairs) or None)


def _parse_partition(dataset: Dataset, text: str) -> PartitionSpec:
    name, sep, rest = text.partition(":")
    facet = dataset.facet(name)  # NotFound -> data error
    if not sep:
        from .model import facet_stats

        return default_partition(facet, facet_stats(dataset, name))
    if rest in TIME_INTERVALS:
        return PartitionSpec(name, TimeInterval(rest))
    pieces = rest.split(":")
    if len(pieces) != 3:
        raise click.BadParameter(
            f"partition {text!r} must be facet, facet:lo:hi:bins, or facet:interval"
        )
    try:
        lo, hi, bins = float(pieces[0]), float(pieces[1]), int(pieces[2])
    except ValueError:
        raise click.BadParameter(f"partition {text!r}: lo/hi must be numbers, bins an integer")
    return PartitionSpec(name, ContinuousBins(lo, hi, bins))


def _parse_endpoint(text: str):
    try:
        return float(text)
    except ValueError:
        ms = parse_timestamp(text)
        if ms is None:
            raise click.BadParameter(f"range endpoint {text!r} is neither number nor timestamp")
        return from_epoch_ms(ms)


def _parse_selection(text: str) -> tuple[str, object]:
    name, sep, rest = text.partition(":")
    if not sep or not rest:
        raise click.BadParameter(f"selection {text!r} must be facet:[lo,hi) or facet:{{a,b}}")
    if rest.startswith("[") and rest.endswith(")"):
        body = rest[1:-1]
        lo_text, comma, hi_text = body.partition(",")
        if not comma:
            raise click.BadParameter(f"selection {text!r} range needs two endpoints")
        return name, RangeSelection(_parse_endpoint(lo_text), _parse_endpoint(hi_text))
    if rest.startswith("{") and rest.endswith("}"):
        labels = [lab for lab in rest[1:-1].split(",") if lab]
        if not labels:
            raise click.BadParameter(f"selection {text!r} names no labels")
        return name, CategorySelection(frozenset(labels))
    raise click.BadParameter(f"selection {text!r} must be facet:[lo,hi) or facet:{{a,b}}")


def _predicate_spec(dataset: Dataset, facet_name: str, selection, partitions) -> PartitionSpec:
    """The partition a selection binds to: the matching --partition spec when
    present, otherwise a synthesized spec of the facet's kind."""
    for spec in partitions:
        if spec.facet == facet_name:
            return spec
    facet = dataset.facet(facet_name)
    if facet.kind == "continuous":
        if not isinstance(selection, RangeSelection):
            return PartitionSpec(facet_name, ContinuousBins(0.0, 1.0, 1))
        return PartitionSpec(
            facet_name, ContinuousBins(float(selection.lo), float(selection.hi), 1)
        )
    if facet.kind == "datetime":
        return PartitionSpec(facet_name, TimeInterval("day"))
    return PartitionSpec(facet_name, CategoryList(None))


def _key_text(key) -> str:
    if isinstance(key, BinKey):
        return key.label
    if hasattr(key, "isoformat"):
        return fmt_timestamp(to_epoch_ms(key))
    return str(key)


def _agg_label(spec: AggregateSpec) -> str:
    return spec.op if spec.facet is None else f"{spec.op}_{spec.facet}"


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Faceted data exploration without the dashboard."""


@main.command()
@click.argument("file")
@click.option("--kind", "kinds", multiple=True, help="Override detection: name=kind.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@_data_errors
def ingest(file, kinds, fmt) -> None:
    """Detect facet kinds in FILE and print them."""
    from pathlib import Path

    from .ingest import load_dataset, parse_csv, parse_json_records

    overrides = _parse_kind_overrides(kinds)
    with open(file, "rb") as fh:
        data = fh.read()
    table = parse_json_records(data) if file.lower().endswith(".json") else parse_csv(data)
    guesses = {g.column: g for g in detect_facet_kinds(table)}
    stem = Path(file).stem
    dataset = load_dataset(table, overrides=overrides or None, id=stem, name=stem)
    if fmt == "json":
        out = []
        for facet in dataset.info.facets:
            guess = guesses.get(facet.name)
            out.append(
                {
                    "name": facet.name,
                    "kind": facet.kind,
                    "confidence": guess.confidence if guess else 1.0,
                    "overridden": facet.name in overrides,
                }
            )
        click.echo(json.dumps(out, indent=2, sort_keys=True))
        return
    for facet in dataset.info.facets:
        guess = guesses.get(facet.name)
        conf = f"{guess.confidence:.3f}" if guess else "1.000"
        flag = " (override)" if facet.name in overrides else ""
        click.echo(f"{facet.name}\t{facet.kind}\tconfidence={conf}{flag}")


@main.command()
@click.argument("file")
@click.argument("facet_name")
@click.option("--kind", "kinds", multiple=True, help="Override detection: name=kind.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@_data_errors
def describe(file, facet_name, kinds, fmt) -> None:
    """Print summary statistics for one facet of FILE."""
    dataset = _load(file, kinds)
    facet = dataset.facet(facet_name)
    stats = engine.scan_stats(dataset, facet_name)

    def endpoint(v):
        if v is None:
            return None
        if facet.kind == "datetime":
            return fmt_timestamp(to_epoch_ms(v))
        if facet.kind == "continuous":
            return float(v)
        return str(v)

    if fmt == "json":
        click.echo(
            json.dumps(
                {
                    "name": facet.name,
                    "kind": facet.kind,
                    "min": endpoint(stats.min),
                    "max": endpoint(stats.max),
                    "distinctCount": stats.distinct_count,
                    "missingCount": stats.missing_count,
                    "sampleCategories": [list(kv) for kv in stats.sample_categories],
                },
                indent=2,
                sort_keys=True,
            )
        )
        return
    click.echo(f"facet={facet.name} kind={facet.kind}")
    mn = endpoint(stats.min)
    mx = endpoint(stats.max)
    mn = fmt_num(mn) if isinstance(mn, float) else mn
    mx = fmt_num(mx) if isinstance(mx, float) else mx
    click.echo(f"min={mn} max={mx} distinct={stats.distinct_count} missing={stats.missing_count}")
    for label, count in stats.sample_categories[:10]:
        click.echo(f"  {label}: {count}")


def _run_aggregate(dataset: Dataset, partition_args, agg_args, select_args):
    partitions = [_parse_partition(dataset, p) for p in partition_args]
    aggregates = []
    for text in agg_args:
        op, sep, facet = text.partition(":")
        try:
            aggregates.append(AggregateSpec(op=op, facet=facet if sep else None))
        except SpotError as exc:
            raise click.BadParameter(f"aggregate {text!r}: {exc}")
    predicate = []
    for text in select_args:
        facet_name, selection = _parse_selection(text)
        spec = _predicate_spec(dataset, facet_name, selection, partitions)
        predicate.append((spec, selection))
    rows = engine.aggregate(dataset, partitions, aggregates, predicate)
    return partitions, aggregates, rows


@main.command()
@click.argument("file")
@click.option("--partition", "partition_args", multiple=True, required=True, help="facet | facet:lo:hi:bins | facet:interval")
@click.option("--agg", "agg_args", multiple=True, help="count | op:facet")
@click.option("--select", "select_args", multiple=True, help="facet:[lo,hi) | facet:{a,b}")
@click.option("--kind", "kinds", multiple=True, help="Override detection: name=kind.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@_data_errors
def aggregate(file, partition_args, agg_args, select_args, kinds, fmt) -> None:
    """Group FILE by partitions and print one row per group."""
    dataset = _load(file, kinds)
    partitions, aggregates, rows = _run_aggregate(dataset, partition_args, agg_args, select_args)
    if fmt == "json":
        from .session import group_row_to_json

        click.echo(
            json.dumps(
                {
                    "partitions": [p.facet for p in partitions],
                    "aggregates": [_agg_label(a) for a in aggregates],
                    "rows": [group_row_to_json(r) for r in rows],
                },
                sort_keys=True,
            )
        )
        return
    import csv as _csv

    writer = _csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([p.facet for p in partitions] + ["count"] + [_agg_label(a) for a in aggregates])
    for row in rows:
        cells = [_key_text(k) for k in row.keys]
        cells.append(str(row.count))
        cells.extend("" if v is None else fmt_num(v) for v in row.values)
        writer.writerow(cells)


@main.group()
def session() -> None:
    """Build, validate, and inspect session documents."""


@session.command("export")
@click.argument("file")
@click.option("--partition", "partition_args", multiple=True, required=True,
              help="One chart per flag: facet | facet:lo:hi:bins | facet:interval")
@click.option("--agg", "agg_args", multiple=True, help="Applied to every chart: count | op:facet")
@click.option("--select", "select_args", multiple=True,
              help="Attached to the chart partitioning that facet: facet:[lo,hi) | facet:{a,b}")
@click.option("--chart-kind", default="", help="Opaque chart kind stored on every chart.")
@click.option("--kind", "kinds", multiple=True, help="Override detection: name=kind.")
@click.option("-o", "--out", "out_path", default="-", help="Output path (default stdout).")
@_data_errors
def session_export(file, partition_args, agg_args, select_args, chart_kind, kinds, out_path) -> None:
    """Build a session document from FILE: one linked chart per --partition."""
    from .engine import InMemoryBackend
    from .session import save_session

    dataset = _load(file, kinds)
    partitions = [_parse_partition(dataset, p) for p in partition_args]
    aggregates = []
    for text in agg_args:
        op, sep, facet = text.partition(":")
        try:
            aggregates.append(AggregateSpec(op=op, facet=facet if sep else None))
        except SpotError as exc:
            raise click.BadParameter(f"aggregate {text!r}: {exc}")
    selections: dict[str, object] = {}
    for text in select_args:
        facet_name, selection = _parse_selection(text)
        selections[facet_name] = selection
    by_facet = {p.facet for p in partitions}
    for facet_name in selections:
        if facet_name not in by_facet:
            raise click.BadParameter(
                f"--select {facet_name!r} has no matching --partition chart"
            )
    view = DataView(InMemoryBackend(dataset))
    try:
        layout = {}
        for i, spec in enumerate(partitions):
            fid = f"chart{i}"
            own = {spec.facet: selections[spec.facet]} if spec.facet in selections else {}
            view.add_filter(
                Filter(
                    id=fid,
                    partitions=(spec,),
                    aggregates=tuple(aggregates),
                    selections=own,
                    chart_kind=chart_kind,
                )
            )
            layout[fid] = {"x": (i % 3) * 4, "y": (i // 3) * 4, "w": 4, "h": 4}
        for _ in view.update_all():
            pass
        data = save_session(view, layout)
    finally:
        view.close()
    if out_path == "-":
        sys.stdout.buffer.write(data)
    else:
        with open(out_path, "wb") as fh:
            fh.write(data)
        click.echo(f"wrote {out_path} ({len(data)} bytes)", err=True)


@session.command("validate")
@click.argument("file")
@_data_errors
def session_validate(file) -> None:
    """Check that FILE is a well-formed session document."""
    from .session import load_session

    with open(file, "rb") as fh:
        data = fh.read()
    loaded = load_session(data)
    click.echo(
        f"valid: formatVersion={loaded.format_version} "
        f"datasets={len(loaded.datasets)} charts={len(loaded.charts)} "
        f"cachedCharts={len(loaded.results)} stale={str(loaded.stale).lower()}"
    )


@main.command()
@click.option("--config", "config_path", default="./spot-config.json", show_default=True,
              help="Server configuration file (JSON).")
@click.option("--listen", default=None, help="Override host:port from the config.")
@click.option("--pool-size", type=int, default=None, help="Override SQL connection pool size.")
@_data_errors
def serve(config_path, listen, pool_size) -> None:
    """Run the HTTP/WebSocket server."""
    from .server import load_config, serve as run_server

    config = load_config(config_path)
    if listen is not None:
        config = replace(config, listen=listen)
    if pool_size is not None:
        config = replace(config, pool_size=pool_size)
    run_server(config)


if __name__ == "__main__":
    main()
