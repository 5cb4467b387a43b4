"""Operator CLI.

Batch commands (simulate, metrics, project, import) are thin wrappers over
the package; admin commands (who, balance, journal) are thin HTTP clients
against a running ``serve`` instance. Exit status: 2 for usage errors,
1 for runtime failures.
"""

from __future__ import annotations

import csv as csv_mod
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import click

from . import analytics as an
from . import datasets
from . import events as ev
from . import store as store_mod
from .errors import LingobankError
from .store import EventStore

DEFAULT_LISTEN = "127.0.0.1:8443"


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _parse_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise click.UsageError(f"--listen must be host:port, got {listen!r}")
    return host, int(port)


def _date(value: str | None) -> float | None:
    if value is None:
        return None
    try:
        return datasets.parse_date(value)
    except ValueError as exc:
        raise click.UsageError(f"bad date {value!r}: {exc}") from None


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d")


def _load_log(data: str) -> list[ev.GrowthEvent]:
    path = Path(data)
    if path.is_dir():
        store = EventStore(path)
    else:
        store = EventStore()
        store.import_dataset(path)
    return [ev.GrowthEvent.from_record(r.ts, r.body)
            for r in store.stream(store_mod.GROWTH)]


@click.group()
def main() -> None:
    """Peer-to-peer language exchange: server, simulator and analytics."""


@main.command()
@click.option("--listen", default=DEFAULT_LISTEN, show_default=True,
              help="Address to bind as host:port.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Event-log directory (kept in memory when omitted).")
def serve(listen: str, data_dir: str | None) -> None:
    """Run the signaling server and HTTP API."""
    import uvicorn

    from .service import create_app

    host, port = _parse_listen(listen)
    uvicorn.run(create_app(data_dir=data_dir), host=host, port=port,
                log_level="info")


@main.command()
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--bots", type=int, default=50, show_default=True)
@click.option("--days", type=int, default=30, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="SimConfig JSON file; flags override nothing when given.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Write the event log here instead of memory.")
@click.option("--payers/--no-payers", default=False, show_default=True,
              help="Allow bots to purchase minutes after running dry.")
def simulate(seed: int, bots: int, days: int, config_path: str | None,
             data_dir: str | None, payers: bool) -> None:
    """Run the deterministic bot simulation and print its summary."""
    from .sim import SimConfig, run_simulation

    try:
        if config_path is not None:
            config = SimConfig.from_file(config_path)
        else:
            config = SimConfig(seed=seed, bot_count=bots, days=days,
                               payers_enabled=payers)
            config.validate()
        report = run_simulation(config, data_dir)
    except LingobankError as exc:
        _fail(f"{exc.code}: {exc.detail}")
    click.echo("\n".join(report.lines()))


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True),
              help="CSV dataset or an event-log directory.")
@click.option("--report", "report_kind", required=True,
              type=click.Choice(["connections", "involvement", "k", "shares"]))
@click.option("--start", default=None, help="Window start, YYYY-MM-DD.")
@click.option("--end", default=None, help="Window end (exclusive), YYYY-MM-DD.")
@click.option("--cutover", default=datasets.MONETIZATION_CUTOVER,
              show_default=True, help="Phase split for the k report.")
@click.option("--csv", "csv_out", type=click.Path(), default=None,
              help="Also write the k report rows as CSV.")
def metrics(data: str, report_kind: str, start: str | None, end: str | None,
            cutover: str, csv_out: str | None) -> None:
    """Compute growth reports over a dataset or event log."""
    try:
        log = _load_log(data)
    except LingobankError as exc:
        _fail(f"{exc.code}: {exc.detail}")
    if not log:
        _fail("no growth events in input")
    times = [e.data.get("start", e.ts) for e in log]
    ends = [e.data.get("end", e.ts) for e in log]
    window = an.Window(_date(start) if start else min(times),
                       _date(end) if end else max(ends) + 1)
    try:
        if report_kind == "connections":
            stats = an.connection_stats(log, window)
            total = stats.total_minutes
            click.echo(f"connects: {stats.connects}")
            click.echo("total minutes: " + (
                str(total.numerator) if total.denominator == 1
                else an.format_minutes(total, 7)))
            click.echo(f"mean minutes: {an.format_minutes(stats.mean_minutes)}")
        elif report_kind == "involvement":
            result = an.involvement(log, window)
            click.echo(f"new users calling: {result.callers}")
            click.echo(f"registrations: {result.registrations}")
            click.echo(f"involvement: {an.format_percent(result.ratio)}")
        elif report_kind == "shares":
            for metric, label in ((an.TEACHING_SHARE, "teaching share"),
                                  (an.ADOPTION, "purchase adoption"),
                                  ("FUNNEL:A", "funnel A conversion"),
                                  ("FUNNEL:B", "funnel B conversion")):
                try:
                    value = an.share_and_funnel(log, window, metric)
                    click.echo(f"{label}: {an.format_percent(value)}")
                except LingobankError:
                    click.echo(f"{label}: n/a")
        else:
            _report_k(log, window, cutover, csv_out)
    except LingobankError as exc:
        _fail(f"{exc.code}: {exc.detail}")


def _report_k(log, window: an.Window, cutover: str, csv_out: str | None) -> None:
    rows = an.weekly_k_report(log, window.start, window.end)
    if not rows:
        _fail("no populated windows")
    click.echo("week        U      i     IU   k_factor  k_retention  k_growth")
    for row in rows:
        retention = (f"{float(row.k_retention):11.4f}"
                     if row.k_retention is not None else "        n/a")
        growth = (f"{float(row.k_growth):9.4f}"
                  if row.k_growth is not None else "      n/a")
        click.echo(f"{_iso(row.start)}  {row.U:5d}  {row.i:5d}  {row.IU:5d}"
                   f"   {float(row.k_factor):8.4f} {retention} {growth}")
    if csv_out:
        with open(csv_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv_mod.writer(fh)
            writer.writerow(["start", "end", "U", "i", "IU",
                             "k_factor", "k_retention", "k_growth"])
            for row in rows:
                writer.writerow([
                    _iso(row.start), _iso(row.end), row.U, row.i, row.IU,
                    float(row.k_factor),
                    float(row.k_retention) if row.k_retention is not None else "",
                    float(row.k_growth) if row.k_growth is not None else ""])
        click.echo(f"wrote {csv_out}")
    try:
        before, after, p = an.split_significance(rows, _date(cutover))
        click.echo(f"mean K before {cutover}: {an.format_percent(before)}")
        click.echo(f"mean K after  {cutover}: {an.format_percent(after)}")
        click.echo(f"two-proportion p-value: {p:.3g}")
    except LingobankError:
        click.echo("significance: n/a (need windows on both sides of the cutover)")


@main.command()
@click.option("--u0", type=int, required=True, help="Starting audience.")
@click.option("--k", required=True, help="K-factor per step, e.g. 0.2.")
@click.option("--r", required=True, help="K-retention per step, e.g. 0.85.")
@click.option("--steps", type=int, required=True)
@click.option("--csv", "csv_out", type=click.Path(), default=None)
def project(u0: int, k: str, r: str, steps: int, csv_out: str | None) -> None:
    """Print an audience projection for a given K-factor and retention."""
    try:
        k_ratio, r_ratio = Fraction(k), Fraction(r)
    except (ValueError, ZeroDivisionError):
        raise click.UsageError("--k and --r must be decimal ratios")
    try:
        series = an.project_growth(u0, k_ratio, r_ratio, steps)
    except LingobankError as exc:
        _fail(f"{exc.code}: {exc.detail}")
    click.echo(f"k-growth per step: {float(k_ratio + r_ratio):.4f}")
    for step, audience in series.points:
        click.echo(f"step {step:3d}: {float(audience):12.1f}")
    click.echo(f"final audience: {round(series.final())}")
    if csv_out:
        with open(csv_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv_mod.writer(fh)
            writer.writerow(["step", "audience"])
            for step, audience in series.points:
                writer.writerow([step, float(audience)])
        click.echo(f"wrote {csv_out}")


@main.command(name="import")
@click.option("--file", "file_path", required=True, type=click.Path(exists=True))
@click.option("--data-dir", required=True, type=click.Path())
def import_cmd(file_path: str, data_dir: str) -> None:
    """Import a CSV dataset into an event-log directory."""
    try:
        count = EventStore(data_dir).import_dataset(file_path)
    except LingobankError as exc:
        _fail(f"{exc.code}: {exc.detail}")
    click.echo(f"imported {count} records")


def _get(server: str, path: str):
    import httpx

    try:
        response = httpx.get(f"http://{server}{path}", timeout=10.0)
    except httpx.HTTPError as exc:
        _fail(f"cannot reach {server}: {exc}")
    if response.status_code >= 400:
        _fail(f"{response.status_code}: {response.text}")
    return response.json()


@main.command()
@click.option("--server", default=DEFAULT_LISTEN, show_default=True)
def who(server: str) -> None:
    """List users currently known to the presence roster."""
    body = _get(server, "/api/presence")
    if not body["users"]:
        click.echo("nobody online")
    for user in body["users"]:
        roles = ",".join(user["roles"]) or "-"
        click.echo(f"{user['user_id']:20s} {user['status']:10s} {roles}")


@main.command()
@click.argument("user_id")
@click.option("--server", default=DEFAULT_LISTEN, show_default=True)
def balance(user_id: str, server: str) -> None:
    """Show a user's minute balance."""
    body = _get(server, f"/api/users/{user_id}/balance")
    click.echo(f"{body['user_id']}: {body['balance_min']} min "
               f"({body['balance_s']} s)")


@main.command()
@click.argument("user_id")
@click.option("--server", default=DEFAULT_LISTEN, show_default=True)
def journal(user_id: str, server: str) -> None:
    """Show a user's ledger entries."""
    body = _get(server, f"/api/users/{user_id}/journal")
    for entry in body["entries"]:
        ref = entry["ref_id"] or "-"
        click.echo(f"#{entry['entry_id']:6d} {entry['reason']:13s} "
                   f"{entry['delta_s']:+7d}s ref={ref}")


if __name__ == "__main__":
    main()
