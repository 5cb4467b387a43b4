"""Bundled datasets and their CSV schemas.

Three import schemas, dispatched on the header row:

* ``month_start,month_end,connects,minutes`` — monthly successful
  connections and their total duration (CONNECTS_MONTH records).
* ``month_start,month_end,registered,callers,percent`` — monthly new
  registrations and how many of them made a call (INVOLVEMENT_MONTH).
  ``registered`` is calibrated so callers/registered reproduces the
  recorded percent column; ``percent`` itself is carried for reference.
* ``week_start,week_end,users,invites,invited_registered,phase`` — weekly
  active users and viral counts (WINDOW_COUNTS). ``phase`` is reference
  metadata (pre/post the minute-purchase launch).

Dates are ISO ``YYYY-MM-DD`` interpreted as UTC midnights; the end column
is exclusive. ``weekly_k_fixture_rows`` is the generator for the bundled
``weekly_k.csv``: per-week K values alternate around the target so each
phase's window-mean K-factor is exact (0.022 pre, 0.038 post), with user
counts sized to a 1,000-1,500 daily-active service.
"""

from __future__ import annotations

import csv
import io
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import events as ev
from .errors import ParseError

MONETIZATION_CUTOVER = "2014-07-28"

_CONNECTS_HEADER = ["month_start", "month_end", "connects", "minutes"]
_INVOLVEMENT_HEADER = ["month_start", "month_end", "registered", "callers", "percent"]
_WEEKLY_HEADER = ["week_start", "week_end", "users", "invites",
                  "invited_registered", "phase"]


def parse_date(text: str) -> float:
    return datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc).timestamp()


def _row_ints(row: list[str], names: list[str], line: int) -> list[int]:
    out = []
    for name, raw in zip(names, row):
        try:
            out.append(int(raw))
        except ValueError:
            raise ParseError(f"column {name!r}: {raw!r} is not an integer", line)
    return out


def parse_dataset(text: str) -> list[dict[str, Any]]:
    """Parse CSV text into growth-record bodies; raises ParseError with a line."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    header = [h.strip() for h in header]
    bodies = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", line)
        try:
            start = parse_date(row[0])
            end = parse_date(row[1])
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        if end <= start:
            raise ParseError("end must be after start", line)
        if header == _CONNECTS_HEADER:
            connects, minutes = _row_ints(row[2:], header[2:], line)
            body = ev.GrowthEvent(ts=start, kind=ev.CONNECTS_MONTH, data={
                "start": start, "end": end,
                "connects": connects, "minutes": minutes,
            }).to_body()
        elif header == _INVOLVEMENT_HEADER:
            registered, callers, percent = _row_ints(row[2:], header[2:], line)
            if callers > registered:
                raise ParseError("callers exceed registrations", line)
            body = ev.GrowthEvent(ts=start, kind=ev.INVOLVEMENT_MONTH, data={
                "start": start, "end": end,
                "registered": registered, "callers": callers, "percent": percent,
            }).to_body()
        elif header == _WEEKLY_HEADER:
            users, invites, invited = _row_ints(row[2:5], header[2:5], line)
            if invited > invites:
                raise ParseError("invited registrations exceed invitations", line)
            body = ev.GrowthEvent(ts=start, kind=ev.WINDOW_COUNTS, data={
                "start": start, "end": end,
                "users": users, "invites": invites, "invited_registered": invited,
                "phase": row[5].strip(),
            }).to_body()
        else:
            raise ParseError(f"unrecognized header {header}", 1)
        bodies.append(body)
    if not bodies:
        raise ParseError("no data rows", 2)
    return bodies


def bundled_text(name: str) -> str:
    from importlib import resources

    return (resources.files("lingobank") / "data" / name).read_text(encoding="utf-8")


def bundled_dir() -> Path:
    from importlib import resources

    return Path(str(resources.files("lingobank"))) / "data"


# ----------------------------------------------------------------------
# weekly K fixture generator (documented source of weekly_k.csv)
# ----------------------------------------------------------------------

# (week_start, users, per-week K in per-mille*10 to stay integral)
_PRE_WEEKS = [
    ("2014-05-05", 5000, 100), ("2014-05-12", 5250, 126),
    ("2014-05-19", 4750, 95), ("2014-05-26", 5500, 132),
    ("2014-06-02", 5250, 105), ("2014-06-09", 5000, 120),
    ("2014-06-16", 4750, 95), ("2014-06-23", 5500, 132),
    ("2014-06-30", 5000, 100), ("2014-07-07", 5250, 126),
    ("2014-07-14", 5500, 110), ("2014-07-21", 4750, 114),
]
_POST_WEEKS = [
    ("2014-07-28", 5000, 190), ("2014-08-04", 5250, 189),
    ("2014-08-11", 5500, 220), ("2014-08-18", 5500, 209),
    ("2014-08-25", 5000, 190),
]
_INVITES_PER_REGISTRATION = 4  # fixed invite volume: 25% of invites convert


def weekly_k_fixture_rows() -> list[dict[str, Any]]:
    rows = []
    for phase, weeks in (("pre", _PRE_WEEKS), ("post", _POST_WEEKS)):
        for start, users, invited in weeks:
            start_dt = datetime.strptime(start, "%Y-%m-%d")
            end_dt = datetime.fromtimestamp(
                start_dt.replace(tzinfo=timezone.utc).timestamp() + 7 * 86400,
                tz=timezone.utc)
            rows.append({
                "week_start": start,
                "week_end": end_dt.strftime("%Y-%m-%d"),
                "users": users,
                "invites": invited * _INVITES_PER_REGISTRATION,
                "invited_registered": invited,
                "phase": phase,
            })
    return rows


def render_weekly_k_csv() -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=_WEEKLY_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(weekly_k_fixture_rows())
    return out.getvalue()
