"""FastAPI service wrapping the hub.

``/ws`` speaks the signaling wire protocol (one envelope per text frame);
the REST surface under ``/api`` covers registration, the minute economy,
funnel instrumentation and the analytics reports. Frames addressed to
other connections are routed through per-connection outbound queues so a
socket is only ever written by its own writer task.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from fractions import Fraction
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .. import analytics as an
from .. import events as ev
from .. import store as store_mod
from ..errors import (
    AlreadyGranted,
    AlreadyRated,
    DuplicateAccount,
    DuplicateUser,
    LingobankError,
    UnknownAccount,
    UnknownSession,
    UnknownUser,
)
from ..hub import SignalingHub
from ..store import EventStore
from . import schemas

SWEEP_PERIOD_S = 5.0

_STATUS = {
    UnknownUser: 404, UnknownAccount: 404, UnknownSession: 404,
    DuplicateUser: 409, DuplicateAccount: 409,
    AlreadyGranted: 409, AlreadyRated: 409,
}


def _status_for(exc: LingobankError) -> int:
    for kind, status in _STATUS.items():
        if isinstance(exc, kind):
            return status
    return 400


def create_app(data_dir: str | Path | None = None,
               hub: SignalingHub | None = None) -> FastAPI:
    if hub is None:
        hub = SignalingHub(store=EventStore(data_dir))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        sweeper = asyncio.create_task(_sweep_loop(app))
        yield
        sweeper.cancel()

    app = FastAPI(title="lingobank", lifespan=lifespan)
    app.state.hub = hub
    app.state.outboxes = {}

    async def _sweep_loop(app: FastAPI) -> None:
        while True:
            await asyncio.sleep(SWEEP_PERIOD_S)
            _route_frames(app, app.state.hub.sweep())

    def _route_frames(app: FastAPI, frames: list[tuple[str, str]]) -> None:
        for conn_id, frame in frames:
            outbox = app.state.outboxes.get(conn_id)
            if outbox is not None:
                outbox.put_nowait(frame)

    @app.exception_handler(LingobankError)
    async def domain_error(request, exc: LingobankError):
        return JSONResponse(
            status_code=_status_for(exc),
            content=schemas.ErrorResponse(code=exc.code, detail=exc.detail).model_dump())

    # -- signaling channel ---------------------------------------------------

    @app.websocket("/ws")
    async def signaling(websocket: WebSocket):
        await websocket.accept()
        conn_id = hub.connect()
        outbox: asyncio.Queue[str] = asyncio.Queue()
        app.state.outboxes[conn_id] = outbox

        async def writer():
            while True:
                await websocket.send_text(await outbox.get())

        writer_task = asyncio.create_task(writer())
        try:
            while True:
                text = await websocket.receive_text()
                _route_frames(app, hub.handle_frame(conn_id, text))
        except WebSocketDisconnect:
            pass
        finally:
            app.state.outboxes.pop(conn_id, None)
            _route_frames(app, hub.disconnect(conn_id))
            writer_task.cancel()

    # -- registration and the minute economy -------------------------------

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "records": hub.store.next_offset}

    @app.post("/api/users", response_model=schemas.RegisterResponse, status_code=201)
    async def register(request: schemas.RegisterRequest):
        profile, token, account = hub.register_user(
            request.user_id, request.native_language, request.learning_language,
            invited_by=request.invited_by)
        return schemas.RegisterResponse(user_id=profile.user_id, token=token,
                                        balance_s=account.balance_s,
                                        funnel_variant=hub.funnel_variant(profile.user_id))

    @app.get("/api/users/{user_id}/profile", response_model=schemas.ProfileResponse)
    async def profile(user_id: str):
        record = hub.registry.get(user_id)
        return schemas.ProfileResponse(
            user_id=record.user_id,
            native_language=record.native_language,
            learning_language=record.learning_language,
            rating_avg=record.rating_avg,
            balance_s=hub.bank.account_for(user_id).balance_s,
            funnel_variant=hub.funnel_variant(user_id))

    @app.get("/api/users/{user_id}/balance", response_model=schemas.BalanceResponse)
    async def balance(user_id: str):
        account = hub.bank.account_for(user_id)
        return schemas.BalanceResponse(user_id=user_id,
                                       balance_s=account.balance_s,
                                       balance_min=account.balance_s // 60)

    @app.get("/api/users/{user_id}/journal", response_model=schemas.JournalResponse)
    async def journal(user_id: str):
        account = hub.bank.account_for(user_id)
        entries = [schemas.JournalEntryModel(**e.to_body())
                   for e in hub.bank.journal(account.account_id)]
        return schemas.JournalResponse(user_id=user_id, entries=entries)

    @app.get("/api/presence", response_model=schemas.PresenceResponse)
    async def presence():
        return schemas.PresenceResponse(
            users=[schemas.PresenceEntry(**row) for row in hub.who()])

    @app.post("/api/purchases", response_model=schemas.JournalEntryModel,
              status_code=201)
    async def purchase(request: schemas.PurchaseRequest):
        entry = hub.purchase(request.user_id, request.amount_s, request.payment_ref)
        return schemas.JournalEntryModel(**entry.to_body())

    @app.post("/api/funnel", status_code=204)
    async def funnel(request: schemas.FunnelEventRequest):
        hub.record_funnel(request.user_id, request.variant, request.action)

    @app.post("/api/friend-invites", status_code=204)
    async def friend_invites(request: schemas.FriendInvitesRequest):
        hub.record_friend_invites(request.user_id, request.count)

    # -- analytics ----------------------------------------------------------

    def _growth_log():
        return [ev.GrowthEvent.from_record(r.ts, r.body)
                for r in hub.store.stream(store_mod.GROWTH)]

    def _window(start: float | None, end: float | None) -> an.Window:
        return an.Window(start if start is not None else 0.0,
                         end if end is not None else 2**53)

    @app.get("/api/metrics/connections",
             response_model=schemas.ConnectionStatsResponse)
    async def metrics_connections(start: float | None = None,
                                  end: float | None = None):
        stats = an.connection_stats(_growth_log(), _window(start, end))
        return schemas.ConnectionStatsResponse(
            connects=stats.connects,
            total_minutes=float(stats.total_minutes),
            mean_minutes=(float(stats.mean_minutes)
                          if stats.mean_minutes is not None else None),
            mean_minutes_display=an.format_minutes(stats.mean_minutes))

    @app.get("/api/metrics/involvement",
             response_model=schemas.InvolvementResponse)
    async def metrics_involvement(start: float | None = None,
                                  end: float | None = None):
        result = an.involvement(_growth_log(), _window(start, end))
        return schemas.InvolvementResponse(
            callers=result.callers, registrations=result.registrations,
            percent_display=an.format_percent(result.ratio))

    @app.get("/api/metrics/k", response_model=schemas.KReportResponse)
    async def metrics_k(start: float, end: float, window_days: int = 7):
        rows = an.weekly_k_report(_growth_log(), start, end,
                                  window_s=window_days * 86400.0)
        return schemas.KReportResponse(rows=[
            schemas.KWindowModel(
                start=r.start, end=r.end, U=r.U, i=r.i, IU=r.IU,
                k_factor=float(r.k_factor),
                k_retention=(float(r.k_retention)
                             if r.k_retention is not None else None),
                k_growth=float(r.k_growth) if r.k_growth is not None else None)
            for r in rows])

    @app.post("/api/project", response_model=schemas.ProjectResponse)
    async def project(request: schemas.ProjectRequest):
        k = Fraction(str(request.k))
        r = Fraction(str(request.r))
        series = an.project_growth(request.u0, k, r, request.steps)
        return schemas.ProjectResponse(
            u0=series.u0, k=float(series.k), r=float(series.r),
            points=[schemas.ProjectPoint(step=s, audience=float(a))
                    for s, a in series.points],
            final_audience=series.final())

    @app.post("/api/datasets/import", response_model=schemas.ImportResponse)
    async def import_dataset(request: schemas.ImportRequest):
        count = hub.store.import_dataset(request.path)
        return schemas.ImportResponse(records=count)

    return app
