"""Virality and involvement metrics over the growth-event log.

Ratios are computed and carried as exact rationals and only rendered to 4
significant digits at the edge, so golden values never drift with float
formatting. The K-factor of a window is the product of invites-per-user
and registrations-per-invite; the invitation count cancels algebraically,
leaving invited registrations per existing user.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence

from . import events as ev
from .errors import (
    DegenerateInput,
    EmptyPopulation,
    EmptyPreviousDay,
    EmptyWindow,
)

DAY_S = 86400.0
WEEK_S = 7 * DAY_S

TEACHING_SHARE = "TEACHING_SHARE"
ADOPTION = "ADOPTION"

SESSION_KINDS = frozenset({ev.CALL_MADE, ev.SESSION_DONE, ev.TAUGHT})


@dataclass(frozen=True)
class Window:
    """Half-open time interval [start, end)."""
    start: float
    end: float

    def __contains__(self, ts: float) -> bool:
        return self.start <= ts < self.end


@dataclass(frozen=True)
class MetricsWindow:
    start: float
    end: float
    U: int = 0        # active users in the window
    i: int = 0        # invitations sent
    IU: int = 0       # invited users who registered
    dU: int = 0       # audience of the window's last day
    dNU: int = 0      # new registrations on that day
    dU_prev: int = 0  # audience of the day before


@dataclass(frozen=True)
class ProjectionSeries:
    u0: int
    k: Fraction
    r: Fraction
    points: tuple[tuple[int, Fraction], ...]

    def audiences(self) -> list[float]:
        return [float(a) for _, a in self.points]

    def final(self) -> float:
        return float(self.points[-1][1])


@dataclass(frozen=True)
class ConnectionStats:
    connects: int
    total_minutes: Fraction
    mean_minutes: Fraction | None


@dataclass(frozen=True)
class Involvement:
    callers: int
    registrations: int
    ratio: Fraction | None  # callers / registrations, absent without registrations


# ----------------------------------------------------------------------
# K-metrics
# ----------------------------------------------------------------------

def k_factor(window: MetricsWindow) -> Fraction:
    """Invited registrations per existing user over the window."""
    if window.U <= 0:
        raise EmptyWindow("no users in window")
    if window.i == 0:
        if window.IU != 0:
            raise DegenerateInput("invited registrations without invitations")
        return Fraction(0)
    invites_per_user = Fraction(window.i, window.U)
    registrations_per_invite = Fraction(window.IU, window.i)
    return invites_per_user * registrations_per_invite


def k_retention(dU: int, dNU: int, dU_prev: int) -> Fraction:
    """Share of yesterday's audience that returned, net of new signups."""
    if dU_prev <= 0:
        raise EmptyPreviousDay("no audience on the previous day")
    if dNU > dU:
        raise DegenerateInput("more new registrations than audience")
    return Fraction(dU - dNU, dU_prev)


def k_growth(k, r):
    """K-factor plus K-retention; > 1 means the audience compounds."""
    return k + r


def project_growth(u0: int, k, r, steps: int) -> ProjectionSeries:
    if u0 <= 0:
        raise DegenerateInput("starting audience must be positive")
    if steps < 0:
        raise DegenerateInput("steps must be >= 0")
    k = Fraction(k) if not isinstance(k, Fraction) else k
    r = Fraction(r) if not isinstance(r, Fraction) else r
    ratio = k + r
    points = []
    audience = Fraction(u0)
    for step in range(steps + 1):
        points.append((step, audience))
        audience *= ratio
    return ProjectionSeries(u0=u0, k=k, r=r, points=tuple(points))


def significance(before: tuple[int, int], after: tuple[int, int]) -> float:
    """Two-sided pooled two-proportion z-test of equal rates.

    Arguments are (successes, trials). Returns the p-value; identical
    proportions give exactly 1.0.
    """
    x1, n1 = before
    x2, n2 = after
    if n1 <= 0 or n2 <= 0:
        raise DegenerateInput("both groups need trials")
    if not (0 <= x1 <= n1 and 0 <= x2 <= n2):
        raise DegenerateInput("successes outside [0, trials]")
    p1 = Fraction(x1, n1)
    p2 = Fraction(x2, n2)
    if p1 == p2:
        return 1.0
    pooled = Fraction(x1 + x2, n1 + n2)
    variance = float(pooled * (1 - pooled) * (Fraction(1, n1) + Fraction(1, n2)))
    if variance == 0.0:
        return 1.0
    z = float(p1 - p2) / math.sqrt(variance)
    return math.erfc(abs(z) / math.sqrt(2.0))


# ----------------------------------------------------------------------
# event-log aggregation
# ----------------------------------------------------------------------

def _in_window(event: ev.GrowthEvent, window: Window) -> bool:
    return event.ts in window


def _aggregate_in_window(event: ev.GrowthEvent, window: Window) -> bool:
    """Pre-aggregated rows count when their whole span fits the window."""
    span_start = event.data.get("start", event.ts)
    span_end = event.data.get("end", event.ts)
    return span_start >= window.start and span_end <= window.end


def active_users(log: Iterable[ev.GrowthEvent], window: Window) -> set[str]:
    """A user is active in a window with an ACTIVE_DAY or session event."""
    active: set[str] = set()
    for event in log:
        if not _in_window(event, window):
            continue
        if event.kind == ev.ACTIVE_DAY or event.kind in SESSION_KINDS:
            if event.user is not None:
                active.add(event.user)
            if event.kind == ev.SESSION_DONE and "teacher" in event.data:
                active.add(event.data["teacher"])
    return active


def window_counts(log: Sequence[ev.GrowthEvent], window: Window) -> MetricsWindow:
    """Compute U, i, IU and the day-boundary audience for a window."""
    counts = [e for e in log
              if e.kind == ev.WINDOW_COUNTS and _aggregate_in_window(e, window)]
    if counts:
        return MetricsWindow(
            start=window.start, end=window.end,
            U=sum(e.data["users"] for e in counts),
            i=sum(e.data["invites"] for e in counts),
            IU=sum(e.data["invited_registered"] for e in counts),
        )
    last_day = Window(window.end - DAY_S, window.end)
    prev_day = Window(window.end - 2 * DAY_S, window.end - DAY_S)
    return MetricsWindow(
        start=window.start, end=window.end,
        U=len(active_users(log, window)),
        i=sum(1 for e in log if e.kind == ev.INVITE_SENT and _in_window(e, window)),
        IU=sum(1 for e in log if e.kind == ev.INVITED_REGISTER and _in_window(e, window)),
        dU=len(active_users(log, last_day)),
        dNU=sum(1 for e in log if e.kind == ev.REGISTER and _in_window(e, last_day)),
        dU_prev=len(active_users(log, prev_day)),
    )


def connection_stats(log: Iterable[ev.GrowthEvent], window: Window) -> ConnectionStats:
    connects = 0
    total_minutes = Fraction(0)
    for event in log:
        if event.kind == ev.SESSION_DONE and _in_window(event, window):
            connects += 1
            total_minutes += Fraction(int(event.data["duration_s"]), 60)
        elif event.kind == ev.CONNECTS_MONTH and _aggregate_in_window(event, window):
            connects += event.data["connects"]
            total_minutes += Fraction(event.data["minutes"])
    mean = total_minutes / connects if connects else None
    return ConnectionStats(connects=connects, total_minutes=total_minutes,
                           mean_minutes=mean)


def involvement(log: Sequence[ev.GrowthEvent], window: Window) -> Involvement:
    callers = 0
    registrations = 0
    aggregated = False
    for event in log:
        if event.kind == ev.INVOLVEMENT_MONTH and _aggregate_in_window(event, window):
            callers += event.data["callers"]
            registrations += event.data["registered"]
            aggregated = True
    if not aggregated:
        new_users = {e.user for e in log
                     if e.kind == ev.REGISTER and _in_window(e, window)}
        calling = {e.user for e in log
                   if e.kind == ev.CALL_MADE and _in_window(e, window)}
        registrations = len(new_users)
        callers = len(new_users & calling)
    ratio = Fraction(callers, registrations) if registrations else None
    return Involvement(callers=callers, registrations=registrations, ratio=ratio)


def share_and_funnel(log: Sequence[ev.GrowthEvent], window: Window,
                     metric: str) -> Fraction:
    if metric == TEACHING_SHARE:
        active = active_users(log, window)
        if not active:
            raise EmptyPopulation("no active users")
        taught = {e.user for e in log if e.kind == ev.TAUGHT and _in_window(e, window)}
        return Fraction(len(taught & active), len(active))
    if metric == ADOPTION:
        total = {e.user for e in log
                 if e.kind == ev.REGISTER and e.ts < window.end}
        if not total:
            raise EmptyPopulation("no registered users")
        payers = {e.user for e in log
                  if e.kind == ev.PURCHASED and _in_window(e, window)}
        return Fraction(len(payers & total), len(total))
    if metric.startswith("FUNNEL:"):
        variant = metric.split(":", 1)[1]
        shown: set[str] = set()
        invited: set[str] = set()
        for event in log:
            if event.kind != ev.FUNNEL or not _in_window(event, window):
                continue
            if event.data.get("variant") != variant:
                continue
            shown.add(event.user)
            if event.data.get("action") == ev.FUNNEL_INVITED:
                invited.add(event.user)
        if not shown:
            raise EmptyPopulation(f"nobody was shown variant {variant}")
        return Fraction(len(invited), len(shown))
    raise DegenerateInput(f"unknown metric {metric!r}")


# ----------------------------------------------------------------------
# windowed reports
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class KWindowRow:
    start: float
    end: float
    U: int
    i: int
    IU: int
    k_factor: Fraction
    k_retention: Fraction | None
    k_growth: Fraction | None


def weekly_k_report(log: Sequence[ev.GrowthEvent], start: float, end: float,
                    window_s: float = WEEK_S) -> list[KWindowRow]:
    """Calendar-aligned fixed windows; one row per window with any users."""
    rows = []
    cursor = start
    while cursor < end:
        window = Window(cursor, min(cursor + window_s, end))
        counts = window_counts(log, window)
        if counts.U > 0:
            k = k_factor(counts)
            retention = None
            if counts.dU_prev > 0 and counts.dNU <= counts.dU:
                retention = k_retention(counts.dU, counts.dNU, counts.dU_prev)
            rows.append(KWindowRow(
                start=window.start, end=window.end,
                U=counts.U, i=counts.i, IU=counts.IU,
                k_factor=k, k_retention=retention,
                k_growth=k_growth(k, retention) if retention is not None else None,
            ))
        cursor += window_s
    return rows


def split_significance(rows: Sequence[KWindowRow],
                       cutover_ts: float) -> tuple[Fraction, Fraction, float]:
    """Mean weekly K before/after a cutover plus the p-value of the shift.

    The test pools invited registrations and users across the windows of
    each phase, matching a two-proportion comparison of the two rates.
    """
    before = [r for r in rows if r.end <= cutover_ts]
    after = [r for r in rows if r.start >= cutover_ts]
    if not before or not after:
        raise DegenerateInput("need windows on both sides of the cutover")
    mean_before = sum(r.k_factor for r in before) / len(before)
    mean_after = sum(r.k_factor for r in after) / len(after)
    p = significance(
        (sum(r.IU for r in before), sum(r.U for r in before)),
        (sum(r.IU for r in after), sum(r.U for r in after)),
    )
    return mean_before, mean_after, p


# ----------------------------------------------------------------------
# rendering
# ----------------------------------------------------------------------

def round_sig(value: Fraction | float | int, sig: int = 4) -> Decimal:
    """Round to ``sig`` significant digits; exact for rational inputs."""
    from decimal import localcontext

    with localcontext() as ctx:
        ctx.prec = 50
        if isinstance(value, Fraction):
            d = Decimal(value.numerator) / Decimal(value.denominator)
        else:
            d = Decimal(value)
        if d == 0:
            return Decimal(0)
        quantum = Decimal(1).scaleb(d.adjusted() - sig + 1)
        return d.quantize(quantum)


def format_percent(ratio: Fraction | None, sig: int = 4) -> str:
    """Render a 0..1 ratio as a percentage at ``sig`` significant digits."""
    if ratio is None:
        return "n/a"
    return f"{round_sig(Fraction(ratio) * 100, sig)}%"


def format_minutes(minutes: Fraction | None, sig: int = 4) -> str:
    if minutes is None:
        return "n/a"
    return str(round_sig(minutes, sig))
