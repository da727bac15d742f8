"""Command line entry point.

Runs operations in-process by default; with ``--server URL`` it becomes a thin
HTTP client of a running ``actshape serve`` instance.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""
from __future__ import annotations

import json
import logging
import sys
import time
from pathlib import Path

import click

from . import api
from .harness.config import ConfigError, seeds_from_env
from .harness.curves import atomic_write
from .harness.presets import PRESETS

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
POLL_SECONDS = 1.0

log = logging.getLogger("actshape")


class RuntimeFailure(Exception):
    """Something went wrong after inputs were accepted."""


def _seed_list(text):
    if text is None:
        return None
    try:
        return [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise click.BadParameter(f"{text!r} is not a list of integers") from None


def _print_summaries(summaries):
    for s in summaries:
        for c in s["curves"]:
            click.echo(f"{s['name']} seed {c['seed']}: auc {c['auc']:.4f} final {c['final_return']:.4f}")
        for seed, err in s["failures"].items():
            click.echo(f"{s['name']} seed {seed}: FAILED {err}", err=True)
    if any(s["failures"] for s in summaries):
        raise RuntimeFailure("one or more seeds failed")


# HTTP client -------------------------------------------------------------


class Client:
    def __init__(self, url: str):
        import httpx

        self._httpx = httpx
        self.http = httpx.Client(base_url=url.rstrip("/"), timeout=60.0)

    def call(self, method: str, path: str, **kwargs):
        try:
            resp = self.http.request(method, path, **kwargs)
        except self._httpx.HTTPError as exc:
            raise RuntimeFailure(f"cannot reach server: {exc}") from exc
        if resp.status_code == 422:
            detail = resp.json().get("detail")
            raise ConfigError(detail if isinstance(detail, str) else json.dumps(detail))
        if resp.status_code >= 400:
            raise RuntimeFailure(f"server error {resp.status_code}: {resp.text}")
        return resp

    def wait(self, job: dict) -> list:
        while job["status"] in ("queued", "running"):
            time.sleep(POLL_SECONDS)
            job = self.call("GET", f"/jobs/{job['id']}").json()
        if job["status"] == "failed" and not job["results"]:
            raise RuntimeFailure(job.get("error") or "job failed")
        return job["results"]


def _config_json(path) -> dict:
    """Read a config file for sending to the server, applying ACTSHAPE_SEED locally."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    obj["seeds"] = seeds_from_env(obj.get("seeds", [0]))
    return obj


# commands -----------------------------------------------------------------


@click.group()
@click.option("--server", envvar="ACTSHAPE_SERVER", default=None, help="Base URL of an actshape service.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx, server, verbose):
    """Action-space shaping experiments."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    ctx.obj = Client(server) if server else None


@cli.command("enumerate")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def enumerate_cmd(client, config):
    """Show original and shaped spaces, cardinalities and the combination table."""
    if client:
        info = client.call("POST", "/enumerate", json={"config": _config_json(config)}).json()
    else:
        info = api.enumerate_config(api.resolve_config(config))
    click.echo(f"name: {info['name']}")
    click.echo(f"original: {json.dumps(info['original'])}  ({info['original_cardinality']} actions)")
    click.echo(f"shaped:   {json.dumps(info['shaped'])}  ({info['shaped_cardinality']} actions)")
    if info["combinations"] is not None:
        click.echo("index  action")
        for i, action in info["combinations"]:
            click.echo(f"{i:5d}  {json.dumps(action)}")
        if info["truncated"]:
            click.echo("... (truncated)")


@cli.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Train this seed only.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for curves and checkpoints.")
@click.pass_obj
def train(client, config, seed, out):
    """Train one config over its seeds (or a single --seed)."""
    if client:
        body = {"config": _config_json(config), "seed": seed, "out": out}
        summaries = client.wait(client.call("POST", "/train", json=body).json())
    else:
        summaries = [api.result_summary(api.train_config(api.resolve_config(config), seed, out))]
    _print_summaries(summaries)


@cli.command()
@click.argument("target")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=1, help="Seeds trained in parallel.")
@click.option("--seeds", default=None, help="Comma separated seed list (ACTSHAPE_SEED also works).")
@click.option("--budget", type=click.IntRange(min=1), default=None, help="Env steps per run (presets only).")
@click.pass_obj
def sweep(client, target, out, workers, seeds, budget):
    """Run a preset (variants, tank-buttons, extra-actions, bogus-actions) or a config file."""
    seeds = _seed_list(seeds)
    if target not in PRESETS:
        if budget is not None:
            raise click.UsageError("--budget only applies to presets")
        if not Path(target).is_file():
            raise ConfigError(f"{target!r} is neither a preset ({', '.join(PRESETS)}) nor a config file")
    if client:
        body = {"out": out, "seeds": seeds or seeds_from_env([]) or None}
        if target in PRESETS:
            body.update(preset=target, budget=budget)
        else:
            body["config"] = _config_json(target)
        summaries = client.wait(client.call("POST", "/sweep", json=body).json())
    else:
        configs = api.sweep_configs(target, seeds=seeds, budget=budget)
        results = api.sweep(configs, out, workers=workers, plot_name=target if target in PRESETS else None)
        summaries = [api.result_summary(r) for r in results]
    _print_summaries(summaries)


@cli.command()
@click.argument("csvs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--title", default="")
@click.pass_obj
def plot(client, csvs, out, title):
    """Render learning-curve CSVs (per-seed or aggregate) to an SVG file."""
    if client:
        body = {"curves": {Path(p).stem: Path(p).read_text() for p in csvs}, "title": title}
        atomic_write(out, client.call("POST", "/plot", json=body).text)
    else:
        api.plot_files(csvs, out, title=title)
    click.echo(out)


@cli.command()
@click.argument("a_glob")
@click.argument("b_glob")
@click.option("--metric", type=click.Choice(["auc", "final_return"]), default="auc")
@click.pass_obj
def compare(client, a_glob, b_glob, metric):
    """Compare two sets of per-seed curve files on AUC or final return."""
    if client:
        import glob

        texts = [[Path(p).read_text() for p in sorted(glob.glob(g))] for g in (a_glob, b_glob)]
        c = client.call("POST", "/compare", json={"a": texts[0], "b": texts[1], "metric": metric}).json()
        diff = c["difference"]
        click.echo(
            f"{metric}: A {c['a_mean']:.4f} ± {c['a_std']:.4f}, B {c['b_mean']:.4f} ± {c['b_std']:.4f} "
            f"(diff {diff:+.4f}, ordering kept in {c['preserved_fraction']:.0%} of seed pairs)"
        )
    else:
        click.echo(api.compare_files(a_glob, b_glob, metric).summary())


@cli.command()
@click.pass_obj
def selftest(client):
    """Gradient checks, enumeration laws and bandit convergence."""
    from .selftest import run_all

    checks = run_all()
    for c in checks:
        click.echo(f"{'PASS' if c.ok else 'FAIL'}  {c.name}: {c.detail}")
    if not all(c.ok for c in checks):
        raise RuntimeFailure("selftest failed")


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="actshape", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_RUNTIME
    except click.UsageError as exc:
        exc.show()
        return EXIT_INVALID
    except (ValueError, KeyError) as exc:
        # config, space, transform and curve-file validation errors are all ValueErrors
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except RuntimeFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
