"""Signaling hub: connection registry, message routing and fan-out.

The hub owns the composition: user registry, time bank, matchmaker,
session engine and the event store, all driven by an injectable clock so
the same code serves real WebSocket traffic and the virtual-clock bot
simulator. ``handle_frame`` is the single entry point: it decodes one
inbound text frame, dispatches it, and returns every outbound frame the
message caused, addressed by connection id. Any domain error becomes an
ERROR envelope; the connection is never dropped for a bad message.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass

from . import events as ev
from . import protocol as proto
from . import store as store_mod
from .errors import (
    BadToken,
    InvalidState,
    LingobankError,
    NoLiveSession,
    NotAuthenticated,
    NotParticipant,
    RecipientUnavailable,
    SchemaViolation,
    SeqRegression,
    UnknownConnection,
)
from .ledger import DEFAULT_SIGNUP_GRANT_S, INVITE_BONUS_S, TimeBank
from .lessons import LessonLibrary
from .matchmaking import (
    INVITE_TTL_S,
    Invitation,
    InviteState,
    Matchmaker,
    Presence,
    Role,
    UserRegistry,
)
from .sessions import (
    HEARTBEAT_TIMEOUT_S,
    TICK_INTERVAL_S,
    Cause,
    SessionEngine,
    SessionState,
    SessionSummary,
)

Outbound = tuple[str, proto.Envelope]  # (connection_id, envelope)


@dataclass
class HubConfig:
    signup_grant_s: int = DEFAULT_SIGNUP_GRANT_S
    invite_bonus_s: int = INVITE_BONUS_S
    invite_ttl_s: float = INVITE_TTL_S
    heartbeat_timeout_s: float = HEARTBEAT_TIMEOUT_S
    tick_interval_s: float = TICK_INTERVAL_S
    funnel_b_share_pct: int = 50  # of users assigned the decline-only dialog


@dataclass
class ConnectionState:
    connection_id: str
    authenticated_user: str | None = None
    last_seq: int = 0
    last_heartbeat: float = 0.0
    out_seq: int = 0

    def next_out_seq(self) -> int:
        self.out_seq += 1
        return self.out_seq


class SignalingHub:
    def __init__(self, store: store_mod.EventStore | None = None,
                 config: HubConfig | None = None,
                 lessons: LessonLibrary | None = None,
                 clock=None, token_factory=None):
        self.config = config or HubConfig()
        self.store = store if store is not None else store_mod.EventStore()
        self.clock = clock or time.time
        self.registry = UserRegistry(token_factory=token_factory)
        self.bank = TimeBank(
            signup_grant_s=self.config.signup_grant_s,
            invite_bonus_s=self.config.invite_bonus_s,
            sink=lambda body, ts: self.store.append(store_mod.LEDGER, body, ts),
        )
        self.lessons = lessons or LessonLibrary.bundled()
        self.matchmaker = Matchmaker(
            self.registry,
            invite_ttl_s=self.config.invite_ttl_s,
            session_starter=self._start_session,
        )
        self.engine = SessionEngine(self.bank, store=self.store)
        self._lock = threading.RLock()
        self._conns: dict[str, ConnectionState] = {}
        self._conn_of_user: dict[str, str] = {}
        self._conn_seq = 0
        self._last_active_day: dict[str, int] = {}

    # ------------------------------------------------------------------
    # registration, growth events and admin (REST / CLI / simulator side)
    # ------------------------------------------------------------------

    def _growth(self, kind: str, user: str | None, data: dict | None = None,
                ts: float | None = None) -> None:
        event = ev.GrowthEvent(ts=self.clock() if ts is None else ts,
                               kind=kind, user=user, data=data or {})
        self.store.append(store_mod.GROWTH, event.to_body(), event.ts)

    def register_user(self, user_id: str, native_language: str,
                      learning_language: str, invited_by: str | None = None):
        with self._lock:
            now = self.clock()
            profile, token = self.registry.register(
                user_id, native_language, learning_language, invited_by)
            account = self.bank.open_account(user_id, now)
            self._growth(ev.REGISTER, user_id, {
                "native_language": native_language,
                "learning_language": learning_language,
                "invited_by": invited_by,
            }, now)
            if invited_by is not None:
                self._growth(ev.INVITED_REGISTER, user_id, {"inviter": invited_by}, now)
                inviter_acct = self.bank.account_for(invited_by)
                self.bank.grant_invite_bonus(inviter_acct.account_id, user_id, now)
            return profile, token, account

    def funnel_variant(self, user_id: str) -> str:
        """Sticky per-user dialog assignment, derived server-side."""
        import zlib

        self.registry.get(user_id)
        bucket = zlib.crc32(user_id.encode("utf-8")) % 100
        return ev.VARIANT_B if bucket < self.config.funnel_b_share_pct else ev.VARIANT_A

    def record_funnel(self, user_id: str, variant: str, action: str) -> None:
        if variant not in (ev.VARIANT_A, ev.VARIANT_B):
            raise InvalidState(f"unknown funnel variant {variant}")
        if action not in ev.FUNNEL_ACTIONS:
            raise InvalidState(f"unknown funnel action {action}")
        self.registry.get(user_id)
        with self._lock:
            self._growth(ev.FUNNEL, user_id, {"variant": variant, "action": action})

    def record_friend_invites(self, user_id: str, count: int) -> None:
        self.registry.get(user_id)
        with self._lock:
            for _ in range(count):
                self._growth(ev.INVITE_SENT, user_id)

    def purchase(self, user_id: str, amount_s: int, payment_ref: str):
        with self._lock:
            account = self.bank.account_for(user_id)
            entry = self.bank.purchase_minutes(account.account_id, amount_s,
                                               payment_ref, self.clock())
            self._growth(ev.PURCHASED, user_id, {"amount_s": amount_s})
            return entry

    def who(self) -> list[dict]:
        with self._lock:
            return [
                {
                    "user_id": r.user_id,
                    "status": r.status.value,
                    "roles": sorted(role.value for role in r.advertised_roles),
                    "since": r.since,
                }
                for r in self.matchmaker.online_users()
            ]

    # ------------------------------------------------------------------
    # connection lifecycle
    # ------------------------------------------------------------------

    def connect(self) -> str:
        with self._lock:
            self._conn_seq += 1
            conn_id = f"c-{self._conn_seq}"
            self._conns[conn_id] = ConnectionState(
                connection_id=conn_id, last_heartbeat=self.clock())
            return conn_id

    def connection(self, conn_id: str) -> ConnectionState:
        conn = self._conns.get(conn_id)
        if conn is None:
            raise UnknownConnection(conn_id)
        return conn

    def is_connected(self, conn_id: str) -> bool:
        return conn_id in self._conns

    def disconnect(self, conn_id: str) -> list[tuple[str, str]]:
        """Transport loss: DISCONNECT any live session, drop presence."""
        with self._lock:
            conn = self._conns.pop(conn_id, None)
            if conn is None:
                return []
            user = conn.authenticated_user
            effects: list[Outbound] = []
            if user is not None and self._conn_of_user.get(user) == conn_id:
                del self._conn_of_user[user]
                now = self.clock()
                session = self.engine.live_session_of(user)
                if session is not None:
                    summary = self.engine.end_session(
                        session.session_id, Cause.DISCONNECT, now)
                    effects.extend(self._session_ended(summary))
                if user in self.registry:
                    record = self.matchmaker.presence_of(user)
                    self.matchmaker.set_presence(
                        user, Presence.OFFLINE, record.advertised_roles, now)
            return [(cid, proto.encode(env)) for cid, env in effects]

    # ------------------------------------------------------------------
    # frame handling
    # ------------------------------------------------------------------

    def handle_frame(self, conn_id: str, text: str) -> list[tuple[str, str]]:
        """Decode, route, encode: returns (connection_id, frame) fan-out."""
        with self._lock:
            conn = self.connection(conn_id)
            conn.last_heartbeat = self.clock()
            try:
                envelope = proto.decode(text)
            except LingobankError as exc:
                self._audit(conn, None, self._best_effort_seq(text), f"ERROR:{exc.code}")
                error = self._error_envelope(conn, exc, self._best_effort_seq(text))
                return [(conn_id, proto.encode(error))]
            effects = self.route(envelope, conn)
            return [(cid, proto.encode(env)) for cid, env in effects]

    def route(self, envelope: proto.Envelope, conn: ConnectionState) -> list[Outbound]:
        """Dispatch one decoded envelope; every outcome is accounted for."""
        with self._lock:
            if envelope.seq <= conn.last_seq:
                exc = SeqRegression(
                    f"seq {envelope.seq} after {conn.last_seq}")
                self._audit(conn, envelope, envelope.seq, f"ERROR:{exc.code}")
                return [(conn.connection_id, self._error_envelope(conn, exc, envelope.seq))]
            conn.last_seq = envelope.seq
            try:
                if envelope.type == proto.AUTH:
                    effects = self._on_auth(conn, envelope)
                elif conn.authenticated_user is None:
                    raise NotAuthenticated("authenticate first")
                elif envelope.type == proto.PRESENCE:
                    effects = self._on_presence(conn, envelope)
                elif envelope.type == proto.ROSTER_REQ:
                    effects = self._on_roster_req(conn, envelope)
                elif envelope.type == proto.INVITE:
                    effects = self._on_invite(conn, envelope)
                elif envelope.type == proto.INVITE_RESULT:
                    effects = self._on_invite_result(conn, envelope)
                elif envelope.type in proto.RTC_TYPES:
                    effects = self._on_rtc(conn, envelope)
                elif envelope.type == proto.CARD_ADVANCE:
                    effects = self._on_card_advance(conn, envelope)
                elif envelope.type == proto.SESSION_END:
                    effects = self._on_session_end(conn, envelope)
                elif envelope.type == proto.RATE:
                    effects = self._on_rate(conn, envelope)
                else:
                    # server-to-client types arriving inbound
                    raise SchemaViolation(f"{envelope.type} is not a client message")
            except LingobankError as exc:
                self._audit(conn, envelope, envelope.seq, f"ERROR:{exc.code}")
                return [(conn.connection_id,
                         self._error_envelope(conn, exc, envelope.seq))]
            self._audit(conn, envelope, envelope.seq, "OK")
            return effects

    # -- dispatch handlers ------------------------------------------------

    def _on_auth(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        if conn.authenticated_user is not None:
            raise InvalidState("connection already authenticated")
        (token,) = proto.require(envelope, "token")
        user_id = self.registry.user_for_token(token)
        if user_id is None:
            raise BadToken("unknown token")
        stale = self._conn_of_user.get(user_id)
        if stale is not None and stale in self._conns:
            # newest connection wins; the stale one reverts to unauthenticated
            self._conns[stale].authenticated_user = None
        conn.authenticated_user = user_id
        self._conn_of_user[user_id] = conn.connection_id
        now = self.clock()
        day = int(now // 86400)
        if self._last_active_day.get(user_id) != day:
            self._last_active_day[user_id] = day
            self._growth(ev.ACTIVE_DAY, user_id, ts=now)
        balance = self.bank.account_for(user_id).balance_s
        return [(conn.connection_id,
                 self._out(conn, proto.AUTH_OK,
                           {"user_id": user_id, "balance_s": balance}))]

    def _on_presence(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        user = conn.authenticated_user
        status, roles = proto.require(envelope, "status", "roles")
        try:
            role_set = {Role(r) for r in roles}
        except ValueError as exc:
            raise SchemaViolation(f"bad role: {exc}") from None
        if self.engine.live_session_of(user) is not None:
            # IN_SESSION is server-managed: an ONLINE refresh is a pure
            # keepalive/roles update, going OFFLINE mid-session is not allowed
            if status == Presence.OFFLINE.value:
                raise InvalidState("cannot go offline during a live session")
            record = self.matchmaker.presence_of(user)
            record.advertised_roles = role_set
            return []
        self.matchmaker.set_presence(user, Presence(status), role_set, self.clock())
        return []

    def _on_roster_req(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        language, role_sought = proto.require(envelope, "language", "role_sought")
        records = self.matchmaker.roster(language, Role(role_sought))
        users = []
        for record in records:
            if record.user_id == conn.authenticated_user:
                continue
            profile = self.registry.get(record.user_id)
            users.append({
                "user_id": record.user_id,
                "native_language": profile.native_language,
                "learning_language": profile.learning_language,
                "rating_avg": profile.rating_avg,
                "since": record.since,
            })
        payload = {"language": language, "role_sought": role_sought, "users": users}
        return [(conn.connection_id, self._out(conn, proto.ROSTER, payload))]

    def _on_invite(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        to, recipient_role, language, level = proto.require(
            envelope, "to", "recipient_role", "language", "level")
        if self._conn_of(to) is None:
            raise RecipientUnavailable(to)
        invitation = self.matchmaker.send_invite(
            conn.authenticated_user, to, Role(recipient_role), language, level,
            self.clock())
        delivery = {
            "invitation_id": invitation.invitation_id,
            "from": invitation.from_user,
            "to": invitation.to_user,
            "recipient_role": recipient_role,
            "language": language,
            "level": level,
        }
        effects: list[Outbound] = []
        peer_conn = self._conn_of(invitation.to_user)
        if peer_conn is None:
            raise RecipientUnavailable(to)
        effects.append((peer_conn.connection_id,
                        self._out(peer_conn, proto.INVITE, delivery)))
        # echo to the sender so it can correlate the eventual INVITE_RESULT
        effects.append((conn.connection_id,
                        self._out(conn, proto.INVITE, dict(delivery))))
        return effects

    def _on_invite_result(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        invitation_id, decision = proto.require(envelope, "invitation_id", "decision")
        accept = decision == "ACCEPT"
        invitation = self.matchmaker.get_invitation(invitation_id)
        # the reverse of a cross-invite pair: sent by this responder, still
        # pending with the other party; acceptance will auto-cancel it
        reverse = [i for i in self.matchmaker.pending_for(invitation.from_user)
                   if i.from_user == invitation.to_user] if accept else []
        invitation = self.matchmaker.respond_invite(
            invitation_id, conn.authenticated_user, accept, self.clock())
        if not accept:
            return self._notify_invite_state(invitation, to_sender_only=True)
        effects = self._accepted_effects(invitation)
        for other in reverse:
            if other.state is InviteState.CANCELED:
                effects.extend(self._notify_invite_state(other))
        return effects

    def _accepted_effects(self, invitation: Invitation) -> list[Outbound]:
        session = self.engine.get(invitation.session_id)
        effects: list[Outbound] = []
        for user in (invitation.from_user, invitation.to_user):
            peer_conn = self._conn_of(user)
            if peer_conn is None:
                continue
            effects.append((peer_conn.connection_id, self._out(
                peer_conn, proto.INVITE_RESULT, {
                    "invitation_id": invitation.invitation_id,
                    "state": InviteState.ACCEPTED.value,
                    "session_id": session.session_id,
                    "role": session.role_of(user).value,
                    "peer": session.peer_of(user),
                    "lesson_id": session.lesson.lesson_id,
                })))
        effects.extend(self._card_state_fanout(session))
        return effects

    def _start_session(self, invitation: Invitation) -> str:
        """session_starter hook for the matchmaker (runs inside accept)."""
        now = self.clock()
        lesson = self.lessons.get(invitation.language, invitation.lesson_level)
        session = self.engine.start_session(invitation, lesson, now)
        self.matchmaker.mark_in_session(session.teacher, now)
        self.matchmaker.mark_in_session(session.student, now)
        self._growth(ev.CALL_MADE, session.teacher,
                     {"session_id": session.session_id, "role": "TEACHER"}, now)
        self._growth(ev.CALL_MADE, session.student,
                     {"session_id": session.session_id, "role": "STUDENT"}, now)
        return session.session_id

    def _on_rtc(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        peer, out = self.relay_rtc(conn.authenticated_user, envelope)
        peer_conn = self._conn_of(peer)
        if peer_conn is None:
            raise RecipientUnavailable(peer)
        return [(peer_conn.connection_id,
                 self._out_with(peer_conn, out.type, out.payload))]

    def relay_rtc(self, from_user: str, envelope: proto.Envelope) -> tuple[str, proto.Envelope]:
        """Identity relay: the peer gets the payload object untouched."""
        (session_id,) = proto.require(envelope, "session_id")
        session = self.engine.live_session_of(from_user)
        if session is None or session.session_id != session_id:
            candidate = self.engine.find(session_id)
            if candidate is None or candidate.state is not SessionState.LIVE:
                raise NoLiveSession(session_id)
            raise NotParticipant(from_user)
        return session.peer_of(from_user), envelope

    def _on_card_advance(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        session_id, to_index = proto.require(envelope, "session_id", "to_index")
        session = self.engine.advance_card(session_id, conn.authenticated_user, to_index)
        return self._card_state_fanout(session)

    def _card_state_fanout(self, session) -> list[Outbound]:
        payload = {
            "session_id": session.session_id,
            "card_index": session.card_index,
            "card": session.current_card().to_payload(),
        }
        effects = []
        for user in (session.teacher, session.student):
            peer_conn = self._conn_of(user)
            if peer_conn is not None:
                effects.append((peer_conn.connection_id,
                                self._out(peer_conn, proto.CARD_STATE, dict(payload))))
        return effects

    def _on_session_end(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        (session_id,) = proto.require(envelope, "session_id")
        session = self.engine.get(session_id)
        if not session.is_participant(conn.authenticated_user):
            raise NotParticipant(conn.authenticated_user)
        cause = self.engine.resolve_user_cause(session_id)
        summary = self.engine.end_session(session_id, cause, self.clock())
        return self._session_ended(summary)

    def _session_ended(self, summary: SessionSummary) -> list[Outbound]:
        now = summary.ended_at
        self._growth(ev.SESSION_DONE, summary.student, {
            "session_id": summary.session_id,
            "duration_s": summary.billed_s,
            "cause": summary.cause.value,
            "teacher": summary.teacher,
        }, now)
        self._growth(ev.TAUGHT, summary.teacher,
                     {"session_id": summary.session_id}, now)
        effects: list[Outbound] = []
        payload = {
            "session_id": summary.session_id,
            "cause": summary.cause.value,
            "billed_s": summary.billed_s,
            "duration_s": summary.duration_s,
        }
        for user in (summary.teacher, summary.student):
            peer_conn = self._conn_of(user)
            if peer_conn is not None:
                self.matchmaker.mark_online(user, now)
                effects.append((peer_conn.connection_id,
                                self._out(peer_conn, proto.SESSION_END, dict(payload))))
            else:
                record = self.matchmaker.presence_of(user)
                self.matchmaker.set_presence(
                    user, Presence.OFFLINE, record.advertised_roles, now)
        return effects

    def _on_rate(self, conn: ConnectionState, envelope: proto.Envelope) -> list[Outbound]:
        session_id, stars = proto.require(envelope, "session_id", "stars")
        rating = self.engine.rate(session_id, conn.authenticated_user, stars, self.clock())
        self.registry.get(rating.ratee).add_rating(rating.stars)
        return []

    # ------------------------------------------------------------------
    # periodic sweeps (driven by the service loop or the simulator clock)
    # ------------------------------------------------------------------

    def sweep(self, now: float | None = None) -> list[tuple[str, str]]:
        with self._lock:
            now = self.clock() if now is None else now
            effects: list[Outbound] = []
            for invitation in self.matchmaker.expire_invites(now):
                effects.extend(self._notify_invite_state(invitation))
            for session in self.engine.live_sessions():
                summary = self.engine.tick(session.session_id, now)
                if summary is not None:
                    effects.extend(self._session_ended(summary))
            encoded = [(cid, proto.encode(env)) for cid, env in effects]
            for conn_id in [cid for cid, conn in self._conns.items()
                            if now - conn.last_heartbeat > self.config.heartbeat_timeout_s]:
                encoded.extend(self.disconnect(conn_id))
            return encoded

    def _notify_invite_state(self, invitation: Invitation,
                             to_sender_only: bool = False) -> list[Outbound]:
        targets = (invitation.from_user,) if to_sender_only else (
            invitation.from_user, invitation.to_user)
        effects = []
        for user in targets:
            peer_conn = self._conn_of(user)
            if peer_conn is not None:
                effects.append((peer_conn.connection_id, self._out(
                    peer_conn, proto.INVITE_RESULT, {
                        "invitation_id": invitation.invitation_id,
                        "state": invitation.state.value,
                    })))
        return effects

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def _conn_of(self, user_id: str) -> ConnectionState | None:
        conn_id = self._conn_of_user.get(user_id)
        return self._conns.get(conn_id) if conn_id is not None else None

    def _out(self, conn: ConnectionState, msg_type: str, payload: dict) -> proto.Envelope:
        return proto.Envelope(type=msg_type, seq=conn.next_out_seq(), payload=payload)

    def _out_with(self, conn: ConnectionState, msg_type: str, payload: dict) -> proto.Envelope:
        # relay path: payload object is forwarded untouched
        return proto.Envelope(type=msg_type, seq=conn.next_out_seq(), payload=payload)

    def _error_envelope(self, conn: ConnectionState, exc: LingobankError,
                        ref_seq: int) -> proto.Envelope:
        return self._out(conn, proto.ERROR, {
            "code": exc.code, "detail": exc.detail, "ref_seq": ref_seq})

    @staticmethod
    def _best_effort_seq(text: str) -> int:
        try:
            obj = json.loads(text)
            seq = obj.get("seq")
            return seq if isinstance(seq, int) and not isinstance(seq, bool) else 0
        except (json.JSONDecodeError, AttributeError, TypeError):
            return 0

    def _audit(self, conn: ConnectionState, envelope: proto.Envelope | None,
               seq: int, result: str) -> None:
        self.store.append(store_mod.PROTOCOL_AUDIT, {
            "conn": conn.connection_id,
            "user": conn.authenticated_user,
            "type": envelope.type if envelope is not None else None,
            "seq": seq,
            "result": result,
        }, self.clock())

    def state_hash(self) -> str:
        """Canonical digest of ledger + session outcomes, for replay checks."""
        import hashlib

        with self._lock:
            payload = json.dumps({
                "ledger": [e.to_body() for e in self.bank.journal()],
                "sessions": [s.to_body() for s in self.engine.summaries()],
                "ratings": self.engine.rating_log(),
            }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()
