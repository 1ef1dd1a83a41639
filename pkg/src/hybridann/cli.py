"""Command-line client for the hybrid search service.

Every subcommand is a thin wrapper over one service endpoint. By
default the FastAPI app runs in-process (no server needed); pass
--server to talk to a running instance instead. Machine-readable
output (manifests, search results, CSV) goes to stdout, diagnostics to
stderr. Exit codes: 0 success, 1 runtime failure, 2 invalid usage.
"""

from __future__ import annotations

import asyncio
import sys

import click
import httpx

from .bench import default_threads
from .core import DEFAULT_BIAS, DEFAULT_W


def _call(server: str | None, path: str, payload: dict) -> httpx.Response:
    async def go() -> httpx.Response:
        if server:
            async with httpx.AsyncClient(base_url=server, timeout=None) as client:
                return await client.post(path, json=payload)
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _submit(server: str | None, path: str, payload: dict) -> dict:
    try:
        resp = _call(server, path, payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach service: {exc}", err=True)
        sys.exit(1)
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    click.echo(f"error: {detail}", err=True)
    # 409 = refused overwrite, 422 = invalid parameters: both usage errors.
    sys.exit(2 if resp.status_code in (409, 422) else 1)


def _int_list(_ctx, _param, value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def _float_list(_ctx, _param, value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def _str_list(_ctx, _param, value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _emit_bench(result: dict) -> None:
    if result.get("out"):
        click.echo(f"wrote {result['out']} ({len(result['records'])} rows)")
    else:
        click.echo(result["csv"], nl=False)


@click.group()
@click.option("--server", default=None, envvar="HYBRIDANN_SERVER",
              help="Base URL of a running service (default: run in-process).")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Hybrid vector + attribute search: generate, build, query, measure."""
    ctx.obj = server


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--count", default=10000, type=click.IntRange(min=1), show_default=True)
@click.option("--dim", default=32, type=click.IntRange(min=1), show_default=True)
@click.option("--categories", default=100, type=click.IntRange(min=1), show_default=True)
@click.option("--attr-dim", default=1, type=click.IntRange(min=1), show_default=True)
@click.option("--queries", default=100, type=click.IntRange(min=1), show_default=True)
@click.option("--seed", default=42, type=int, show_default=True)
@click.option("--normalized/--no-normalized", default=True, show_default=True)
@click.option("--force", is_flag=True, help="Overwrite existing files.")
@click.pass_obj
def gen(server, out_dir, count, dim, categories, attr_dim, queries, seed, normalized, force):
    """Generate synthetic base/query features and attributes."""
    result = _submit(server, "/datasets/generate", {
        "out_dir": out_dir, "count": count, "dim": dim, "categories": categories,
        "attr_dim": attr_dim, "queries": queries, "seed": seed,
        "normalized": normalized, "force": force,
    })
    for f in result["files"]:
        click.echo(f"wrote {f['path']} ({f['rows']} x {f['dim']} {f['kind']})")


@main.command()
@click.option("--base", required=True, type=click.Path(), help="Base feature fvecs.")
@click.option("--attrs", required=True, type=click.Path(), help="Attribute ivecs.")
@click.option("--out", required=True, type=click.Path(), help="Index file to write.")
@click.option("--metric", default="ip", type=click.Choice(["ip", "l2"]), show_default=True)
@click.option("--attr-metric", default="manhattan-log",
              type=click.Choice(["manhattan-log", "hamming"]), show_default=True)
@click.option("--feature-only", is_flag=True,
              help="Ignore attributes: plain feature-metric graph for post-filtering.")
@click.option("--w", default=DEFAULT_W, type=float, show_default=True)
@click.option("--bias", default=DEFAULT_BIAS, type=float, show_default=True)
@click.option("--g-max", default=1.0, type=float, show_default=True)
@click.option("-m", "--max-neighbors", "m_", default=32, type=click.IntRange(min=2),
              show_default=True, help="Max neighbors per node per level (2x at level 0).")
@click.option("--ef-construction", default=512, type=click.IntRange(min=2), show_default=True)
@click.option("--seed", default=42, type=int, show_default=True)
@click.option("--force", is_flag=True)
@click.pass_obj
def build(server, base, attrs, out, metric, attr_metric, feature_only, w, bias, g_max,
          m_, ef_construction, seed, force):
    """Build a composite (or feature-only) index and write it to disk."""
    result = _submit(server, "/index/build", {
        "base": base, "attrs": attrs, "out": out, "metric": metric,
        "attr_metric": attr_metric, "feature_only": feature_only,
        "w": w, "bias": bias, "g_max": g_max, "M": m_,
        "ef_construction": ef_construction, "seed": seed, "force": force,
    })
    click.echo(
        f"wrote {result['index']} ({result['count']} nodes, max level "
        f"{result['max_level']}, {result['build_seconds']:.1f}s)"
    )


@main.command()
@click.option("--base", required=True, type=click.Path())
@click.option("--attrs", required=True, type=click.Path())
@click.option("--queries", required=True, type=click.Path())
@click.option("--query-attrs", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Ground-truth ivecs to write.")
@click.option("--k", default=10, type=click.IntRange(min=1), show_default=True)
@click.option("--metric", default="ip", type=click.Choice(["ip", "l2"]), show_default=True)
@click.option("--force", is_flag=True)
@click.pass_obj
def gt(server, base, attrs, queries, query_attrs, out, k, metric, force):
    """Compute exact filtered ground truth for a query set."""
    result = _submit(server, "/ground-truth", {
        "base": base, "attrs": attrs, "queries": queries, "query_attrs": query_attrs,
        "out": out, "k": k, "metric": metric, "force": force,
    })
    click.echo(f"wrote {result['ground_truth']} ({result['queries']} queries, k={result['k']})")


@main.command()
@click.option("--index", required=True, type=click.Path())
@click.option("--base", required=True, type=click.Path())
@click.option("--attrs", required=True, type=click.Path())
@click.option("--queries", required=True, type=click.Path())
@click.option("--query-attrs", required=True, type=click.Path())
@click.option("--k", default=10, type=click.IntRange(min=1), show_default=True)
@click.option("--ef", "ef_search", default=80, type=click.IntRange(min=1), show_default=True)
@click.option("--metric", default="ip", type=click.Choice(["ip", "l2"]), show_default=True)
@click.pass_obj
def search(server, index, base, attrs, queries, query_attrs, k, ef_search, metric):
    """Query an index; one line per query: id<TAB>fused_dist pairs."""
    if ef_search < k:
        raise click.UsageError(f"--ef must be >= --k ({ef_search} < {k})")
    result = _submit(server, "/search", {
        "index": index, "base": base, "attrs": attrs, "queries": queries,
        "query_attrs": query_attrs, "k": k, "ef_search": ef_search, "metric": metric,
    })
    for hits in result["results"]:
        fields = []
        for h in hits:
            fields.append(str(h["id"]))
            fields.append(f"{h['fused_dist']:.6f}")
        click.echo("\t".join(fields))


@main.command()
@click.option("--base", required=True, type=click.Path())
@click.option("--attrs", required=True, type=click.Path())
@click.option("--queries", required=True, type=click.Path())
@click.option("--query-attrs", required=True, type=click.Path())
@click.option("--gt", "ground_truth", required=True, type=click.Path())
@click.option("--index", default=None, type=click.Path(),
              help="Index file (fusion / post-filter strategies).")
@click.option("--strategy", default="fusion",
              type=click.Choice(["fusion", "post-filter", "pre-filter",
                                 "search-then-filter", "filter-then-search"]))
@click.option("--budgets", default="80", callback=_int_list, show_default=True,
              help="Comma-separated ef values (fusion) or F factors (post-filter).")
@click.option("--k", default=10, type=click.IntRange(min=1), show_default=True)
@click.option("--threads", default=None, type=click.IntRange(min=1),
              help="Worker threads (default: all cores).")
@click.option("--categories", default=-1, type=int,
              help="Attribute cardinality recorded in the CSV.")
@click.option("--metric", default="ip", type=click.Choice(["ip", "l2"]), show_default=True)
@click.option("--out", default=None, type=click.Path(), help="CSV path (default: stdout).")
@click.option("--force", is_flag=True)
@click.pass_obj
def bench(server, base, attrs, queries, query_attrs, ground_truth, index, strategy,
          budgets, k, threads, categories, metric, out, force):
    """Measure recall/QPS/latency for one strategy over a budget list."""
    if not budgets:
        raise click.UsageError("--budgets must contain at least one integer")
    result = _submit(server, "/bench/sweep", {
        "base": base, "attrs": attrs, "queries": queries, "query_attrs": query_attrs,
        "ground_truth": ground_truth, "index": index, "strategy": strategy,
        "budgets": budgets, "k": k, "threads": threads or default_threads(),
        "categories": categories, "metric": metric, "out": out, "force": force,
    })
    _emit_bench(result)


@main.command()
@click.option("--base", required=True, type=click.Path(), help="Base feature fvecs.")
@click.option("--c-values", default="10,100,500,1000", callback=_int_list, show_default=True)
@click.option("--attr-dim", default=1, type=click.IntRange(min=1), show_default=True)
@click.option("--k", default=10, type=click.IntRange(min=1), show_default=True)
@click.option("--ef", "ef_search", default=80, type=click.IntRange(min=1), show_default=True)
@click.option("--expansion", default=100, type=click.IntRange(min=1), show_default=True,
              help="Candidate expansion factor F for post-filter.")
@click.option("--queries", default=200, type=click.IntRange(min=1), show_default=True)
@click.option("--w", default=DEFAULT_W, type=float, show_default=True)
@click.option("--bias", default=DEFAULT_BIAS, type=float, show_default=True)
@click.option("--g-max", default=1.0, type=float, show_default=True)
@click.option("-m", "--max-neighbors", "m_", default=32, type=click.IntRange(min=2), show_default=True)
@click.option("--ef-construction", default=512, type=click.IntRange(min=2), show_default=True)
@click.option("--seed", default=42, type=int, show_default=True)
@click.option("--threads", default=None, type=click.IntRange(min=1))
@click.option("--strategies", default="fusion,post-filter,pre-filter",
              callback=_str_list, show_default=True)
@click.option("--metric", default="ip", type=click.Choice(["ip", "l2"]), show_default=True)
@click.option("--out", default=None, type=click.Path())
@click.option("--force", is_flag=True)
@click.pass_obj
def robustness(server, base, c_values, attr_dim, k, ef_search, expansion, queries, w, bias,
               g_max, m_, ef_construction, seed, threads, strategies, metric, out, force):
    """Re-measure all strategies while attribute cardinality grows."""
    result = _submit(server, "/bench/robustness", {
        "base": base, "c_values": c_values, "attr_dim": attr_dim, "k": k,
        "ef_search": ef_search, "expansion": expansion, "queries": queries,
        "w": w, "bias": bias, "g_max": g_max, "M": m_,
        "ef_construction": ef_construction, "seed": seed,
        "threads": threads or default_threads(), "strategies": strategies,
        "metric": metric, "out": out, "force": force,
    })
    _emit_bench(result)


@main.command()
@click.option("--base", required=True, type=click.Path())
@click.option("--categories", required=True, type=click.IntRange(min=1))
@click.option("--w-values", default="1.0,0.5,0.25,0.1", callback=_float_list, show_default=True)
@click.option("--attr-dim", default=1, type=click.IntRange(min=1), show_default=True)
@click.option("--k", default=10, type=click.IntRange(min=1), show_default=True)
@click.option("--ef", "ef_search", default=80, type=click.IntRange(min=1), show_default=True)
@click.option("--queries", default=200, type=click.IntRange(min=1), show_default=True)
@click.option("--bias", default=DEFAULT_BIAS, type=float, show_default=True)
@click.option("--g-max", default=1.0, type=float, show_default=True)
@click.option("-m", "--max-neighbors", "m_", default=32, type=click.IntRange(min=2), show_default=True)
@click.option("--ef-construction", default=512, type=click.IntRange(min=2), show_default=True)
@click.option("--seed", default=42, type=int, show_default=True)
@click.option("--threads", default=None, type=click.IntRange(min=1))
@click.option("--metric", default="ip", type=click.Choice(["ip", "l2"]), show_default=True)
@click.option("--out", default=None, type=click.Path())
@click.option("--force", is_flag=True)
@click.pass_obj
def sensitivity(server, base, categories, w_values, attr_dim, k, ef_search, queries, bias,
                g_max, m_, ef_construction, seed, threads, metric, out, force):
    """Rebuild the fused index per feature weight w; one recall row each."""
    result = _submit(server, "/bench/sensitivity", {
        "base": base, "categories": categories, "w_values": w_values,
        "attr_dim": attr_dim, "k": k, "ef_search": ef_search, "queries": queries,
        "bias": bias, "g_max": g_max, "M": m_, "ef_construction": ef_construction,
        "seed": seed, "threads": threads or default_threads(),
        "metric": metric, "out": out, "force": force,
    })
    _emit_bench(result)


if __name__ == "__main__":
    main()
