"""Deterministic bot-population simulator.

Bots drive the real signaling protocol end to end: every action is an
encoded frame through ``SignalingHub.handle_frame`` and every reaction is
triggered by the frames that come back. Time is a virtual discrete-event
clock, all randomness flows from one seeded generator, and identifiers
are counters, so a SimConfig maps to a byte-identical event log.

Behavior knobs are calibrated against the observed production aggregates (mean
lesson length around 12 minutes, funnel conversion 26% for the closable
dialog vs 73% for the decline-only one); per-user distributions are not
available, so the log-normal dispersion is a free parameter.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from . import analytics as an
from . import events as ev
from . import protocol as proto
from . import store as store_mod
from .errors import ConfigInvalid
from .hub import HubConfig, SignalingHub
from .lessons import LessonLibrary

SIM_EPOCH = 1_399_248_000.0  # 2014-05-05 00:00:00 UTC, a Monday
DAY_S = 86_400.0
SWEEP_INTERVAL_S = 10.0

# funnel click-through per dialog variant (observed conversion rates)
FUNNEL_INVITE_RATE = {"A": 0.26, "B": 0.73}
# registrations per sent friend invite, sized so weekly K lands in the
# low single-digit percent range a 1,000-1,500 DAU service reported
INVITE_CONVERSION = 0.01
PAYER_PURCHASE_RATE = 0.01  # payer-bot chance to buy after running dry

LANGUAGE_PAIRS = [("en", "es"), ("es", "en")]
LESSON_LEVEL = "A1"


@dataclass
class BotBehavior:
    accept_probability: float = 0.7
    invite_propensity: float = 1.2       # friend invites per inviting day
    duration_median_min: float = 12.0    # log-normal median, minutes
    duration_sigma: float = 0.4          # log-normal dispersion
    daily_return_probability: float = 0.6
    teach_willingness: float = 0.5

    def validate(self) -> None:
        for name in ("accept_probability", "daily_return_probability",
                     "teach_willingness"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigInvalid(f"{name} must be in [0, 1], got {value}")
        if self.duration_median_min <= 0:
            raise ConfigInvalid("duration_median_min must be positive")
        if self.duration_sigma < 0:
            raise ConfigInvalid("duration_sigma must be >= 0")
        if self.invite_propensity < 0:
            raise ConfigInvalid("invite_propensity must be >= 0")


@dataclass
class SimConfig:
    seed: int = 42
    bot_count: int = 50
    days: int = 30
    behavior: BotBehavior = field(default_factory=BotBehavior)
    variant_split: float = 0.5   # share of funnel dialogs shown as variant B
    payers_enabled: bool = False
    signup_grant_s: int = 1800
    # virtual-time keepalive cadence; coarser than the 15 s production
    # default because simulated transports cannot actually be lost
    heartbeat_interval_s: float = 600.0

    def validate(self) -> None:
        if self.seed < 0:
            raise ConfigInvalid("seed must be unsigned")
        if self.bot_count <= 0:
            raise ConfigInvalid("bot_count must be positive")
        if self.days <= 0:
            raise ConfigInvalid("days must be positive")
        if not 0.0 <= self.variant_split <= 1.0:
            raise ConfigInvalid("variant_split must be in [0, 1]")
        if self.signup_grant_s < 0:
            raise ConfigInvalid("signup_grant_s must be >= 0")
        if self.heartbeat_interval_s <= 0:
            raise ConfigInvalid("heartbeat_interval_s must be positive")
        self.behavior.validate()

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"{path}: {exc}") from exc
        behavior = BotBehavior(**raw.pop("behavior", {}))
        try:
            config = cls(behavior=behavior, **raw)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None
        config.validate()
        return config


@dataclass
class SimReport:
    seed: int
    bot_count: int
    days: int
    registered: int
    invites_sent: int
    invited_registered: int
    connects: int
    total_minutes: float
    mean_minutes: float | None
    k_global: float
    weekly_k: list[tuple[str, float]]
    digest: str
    state_hash: str

    def lines(self) -> list[str]:
        out = [
            f"bots: {self.bot_count} seed: {self.seed} days: {self.days}",
            f"registered users: {self.registered}",
            f"friend invites sent: {self.invites_sent}, "
            f"registered via invite: {self.invited_registered}",
            f"successful connects: {self.connects}",
            f"total lesson minutes: {self.total_minutes:.2f}",
            "mean lesson minutes: " + (
                f"{self.mean_minutes:.2f}" if self.mean_minutes is not None else "n/a"),
            f"global K-factor: {self.k_global:.4f}",
        ]
        for week, k in self.weekly_k:
            out.append(f"  week {week}: K={k:.4f}")
        out.append(f"event log digest: {self.digest}")
        out.append(f"state hash: {self.state_hash}")
        return out


@dataclass
class _Bot:
    user_id: str
    native: str
    learning: str
    invited_by: str | None = None
    token: str = ""
    conn_id: str | None = None
    seq: int = 0
    session_id: str | None = None
    role: str | None = None
    sent_pending: str | None = None  # invitation id we are waiting on
    lesson_len: int = 0
    funnel_done_today: bool = False


class Simulation:
    def __init__(self, config: SimConfig, data_dir: str | Path | None = None):
        config.validate()
        self.config = config
        self.rng = random.Random(config.seed)
        self.now = SIM_EPOCH
        self.end = SIM_EPOCH + config.days * DAY_S
        store = store_mod.EventStore(data_dir, fsync=False)
        self.hub = SignalingHub(
            store=store,
            config=HubConfig(
                signup_grant_s=config.signup_grant_s,
                heartbeat_timeout_s=2.5 * config.heartbeat_interval_s,
            ),
            lessons=LessonLibrary.bundled(),
            clock=lambda: self.now,
            token_factory=lambda user_id: f"tok-{user_id}",
        )
        self._heap: list[tuple[float, int, object, tuple]] = []
        self._heap_seq = 0
        self.bots: dict[str, _Bot] = {}
        self._bot_seq = 0
        self._conn_to_bot: dict[str, str] = {}

    # -- scheduling ---------------------------------------------------------

    def at(self, ts: float, action, *args) -> None:
        if ts >= self.end:
            return
        self._heap_seq += 1
        heapq.heappush(self._heap, (ts, self._heap_seq, action, args))

    def after(self, delay: float, action, *args) -> None:
        self.at(self.now + delay, action, *args)

    def run(self) -> SimReport:
        for n in range(self.config.bot_count):
            self.at(SIM_EPOCH + 8 * 3600 + n * 10.0, self._register_bot, None)
        for day in range(1, self.config.days):
            self.at(SIM_EPOCH + day * DAY_S, self._plan_day)
        sweeps = int((self.end - SIM_EPOCH) / SWEEP_INTERVAL_S)
        for n in range(1, sweeps + 1):
            self.at(SIM_EPOCH + n * SWEEP_INTERVAL_S, self._sweep)
        while self._heap:
            ts, _, action, args = heapq.heappop(self._heap)
            self.now = ts
            action(*args)
        self.now = self.end
        for bot in self.bots.values():
            if bot.conn_id is not None:
                self._deliver(self.hub.disconnect(bot.conn_id))
                bot.conn_id = None
        return self._report()

    # -- wire helpers ---------------------------------------------------------

    def _send(self, bot: _Bot, msg_type: str, payload: dict) -> None:
        if bot.conn_id is None:
            return
        if not self.hub.is_connected(bot.conn_id):
            # the hub dropped us (heartbeat timeout); reconcile local state
            self._conn_to_bot.pop(bot.conn_id, None)
            bot.conn_id = None
            bot.session_id = None
            bot.role = None
            bot.sent_pending = None
            return
        bot.seq += 1
        frame = proto.encode(proto.Envelope(type=msg_type, seq=bot.seq,
                                            payload=payload))
        self._deliver(self.hub.handle_frame(bot.conn_id, frame))

    def _deliver(self, outbound: list[tuple[str, str]]) -> None:
        for conn_id, frame in outbound:
            bot_id = self._conn_to_bot.get(conn_id)
            if bot_id is not None:
                self._receive(self.bots[bot_id], proto.decode(frame))

    def _sweep(self) -> None:
        self._deliver(self.hub.sweep())

    # -- lifecycle ---------------------------------------------------------

    def _register_bot(self, invited_by: str | None) -> None:
        self._bot_seq += 1
        native, learning = LANGUAGE_PAIRS[self._bot_seq % len(LANGUAGE_PAIRS)]
        bot = _Bot(user_id=f"bot-{self._bot_seq:04d}", native=native,
                   learning=learning, invited_by=invited_by)
        _, token, _ = self.hub.register_user(
            bot.user_id, native, learning, invited_by=invited_by)
        bot.token = token
        self.bots[bot.user_id] = bot
        self.after(self.rng.uniform(30.0, 300.0), self._login, bot.user_id)

    def _plan_day(self) -> None:
        for bot in list(self.bots.values()):
            bot.funnel_done_today = False
            if bot.conn_id is not None:
                continue
            if self.rng.random() < self.config.behavior.daily_return_probability:
                offset = self.rng.uniform(8 * 3600, 14 * 3600)
                self.after(offset, self._login, bot.user_id)

    def _login(self, bot_id: str) -> None:
        bot = self.bots[bot_id]
        if bot.conn_id is not None:
            return
        bot.conn_id = self.hub.connect()
        bot.seq = 0
        self._conn_to_bot[bot.conn_id] = bot.user_id
        self._send(bot, proto.AUTH, {"token": bot.token})
        roles = ["STUDENT"]
        if self.rng.random() < self.config.behavior.teach_willingness:
            roles.append("TEACHER")
        self._send(bot, proto.PRESENCE, {"status": "ONLINE", "roles": roles})
        self.after(self.rng.uniform(20.0, 120.0), self._seek_partner, bot.user_id)
        self.after(self.rng.uniform(2 * 3600, 5 * 3600), self._logout, bot.user_id)
        # presence refresh keeps the heartbeat alive while logged in
        self.after(self.config.heartbeat_interval_s, self._heartbeat,
                   bot.user_id, roles)

    def _heartbeat(self, bot_id: str, roles: list[str]) -> None:
        bot = self.bots[bot_id]
        if bot.conn_id is None:
            return
        self._send(bot, proto.PRESENCE, {"status": "ONLINE", "roles": roles})
        self.after(self.config.heartbeat_interval_s, self._heartbeat, bot_id, roles)

    def _logout(self, bot_id: str) -> None:
        bot = self.bots[bot_id]
        if bot.conn_id is None:
            return
        if bot.session_id is not None:
            self.after(300.0, self._logout, bot_id)
            return
        conn_id = bot.conn_id
        bot.conn_id = None
        self._conn_to_bot.pop(conn_id, None)
        self._deliver(self.hub.disconnect(conn_id))

    # -- lesson seeking -------------------------------------------------------

    def _seek_partner(self, bot_id: str) -> None:
        bot = self.bots[bot_id]
        if bot.conn_id is None or bot.session_id or bot.sent_pending:
            return
        self._send(bot, proto.ROSTER_REQ,
                   {"language": bot.learning, "role_sought": "TEACHER"})

    def _receive(self, bot: _Bot, envelope: proto.Envelope) -> None:
        payload = envelope.payload
        if envelope.type == proto.ROSTER:
            users = payload["users"]
            if users and bot.session_id is None and bot.sent_pending is None:
                choice = self.rng.choice([u["user_id"] for u in users])
                self._send(bot, proto.INVITE, {
                    "to": choice, "recipient_role": "TEACHER",
                    "language": bot.learning, "level": LESSON_LEVEL,
                })
            elif bot.session_id is None:
                self.after(self.rng.uniform(900.0, 2400.0),
                           self._seek_partner, bot.user_id)
        elif envelope.type == proto.INVITE:
            if payload.get("from") == bot.user_id:
                bot.sent_pending = payload["invitation_id"]
                return
            accept = (bot.session_id is None
                      and self.rng.random() < self.config.behavior.accept_probability)
            decision = "ACCEPT" if accept else "REJECT"
            self.after(self.rng.uniform(3.0, 8.0), self._respond, bot.user_id,
                       payload["invitation_id"], decision)
        elif envelope.type == proto.INVITE_RESULT:
            state = payload.get("state")
            if payload.get("invitation_id") == bot.sent_pending and \
                    state in ("REJECTED", "EXPIRED", "CANCELED"):
                bot.sent_pending = None
                self.after(self.rng.uniform(600.0, 1800.0),
                           self._seek_partner, bot.user_id)
            if state == "ACCEPTED":
                bot.sent_pending = None
                bot.session_id = payload["session_id"]
                bot.role = payload["role"]
                if bot.role == "STUDENT":
                    duration = self._sample_duration()
                    self.after(duration, self._end_session, bot.user_id,
                               bot.session_id)
        elif envelope.type == proto.CARD_STATE:
            bot.lesson_len = max(bot.lesson_len, payload["card_index"] + 1)
            if bot.role == "TEACHER" and bot.session_id == payload["session_id"]:
                self.after(45.0, self._advance, bot.user_id, bot.session_id,
                           payload["card_index"] + 1)
        elif envelope.type == proto.SESSION_END:
            if payload["session_id"] == bot.session_id:
                session_id = bot.session_id
                bot.session_id = None
                bot.role = None
                self.after(self.rng.uniform(2.0, 10.0), self._rate,
                           bot.user_id, session_id)
                self.after(self.rng.uniform(15.0, 60.0), self._funnel,
                           bot.user_id)
                if payload["cause"] == "BALANCE_EXHAUSTED":
                    self.after(self.rng.uniform(30.0, 90.0), self._maybe_purchase,
                               bot.user_id)
        # ERROR and other types need no bot reaction

    def _respond(self, bot_id: str, invitation_id: str, decision: str) -> None:
        bot = self.bots[bot_id]
        if bot.conn_id is None:
            return
        if decision == "ACCEPT" and bot.session_id is not None:
            decision = "REJECT"
        self._send(bot, proto.INVITE_RESULT,
                   {"invitation_id": invitation_id, "decision": decision})

    def _advance(self, bot_id: str, session_id: str, to_index: int) -> None:
        bot = self.bots[bot_id]
        if bot.session_id != session_id or bot.conn_id is None:
            return
        if to_index >= bot.lesson_len:
            return  # stay on the last card until someone hangs up
        self._send(bot, proto.CARD_ADVANCE,
                   {"session_id": session_id, "to_index": to_index})

    def _end_session(self, bot_id: str, session_id: str) -> None:
        bot = self.bots[bot_id]
        if bot.session_id != session_id or bot.conn_id is None:
            return
        self._send(bot, proto.SESSION_END, {"session_id": session_id})

    def _rate(self, bot_id: str, session_id: str) -> None:
        bot = self.bots[bot_id]
        if bot.conn_id is None:
            return
        self._send(bot, proto.RATE,
                   {"session_id": session_id, "stars": self.rng.randint(1, 5)})

    def _sample_duration(self) -> float:
        behavior = self.config.behavior
        mu = math.log(behavior.duration_median_min * 60.0)
        return self.rng.lognormvariate(mu, behavior.duration_sigma)

    # -- virality ---------------------------------------------------------------

    def _funnel(self, bot_id: str) -> None:
        bot = self.bots[bot_id]
        if bot.funnel_done_today or bot.user_id not in self.hub.registry:
            return
        bot.funnel_done_today = True
        variant = "B" if self.rng.random() < self.config.variant_split else "A"
        self.hub.record_funnel(bot.user_id, variant, ev.FUNNEL_SHOWN)
        if self.rng.random() < FUNNEL_INVITE_RATE[variant]:
            self.hub.record_funnel(bot.user_id, variant, ev.FUNNEL_INVITED)
            invites = max(1, self._poisson(self.config.behavior.invite_propensity))
            self.hub.record_friend_invites(bot.user_id, invites)
            for _ in range(invites):
                if self.rng.random() < INVITE_CONVERSION:
                    next_morning = (math.floor((self.now - SIM_EPOCH) / DAY_S) + 1)
                    ts = SIM_EPOCH + next_morning * DAY_S + \
                        self.rng.uniform(9 * 3600, 12 * 3600)
                    self.at(ts, self._register_bot, bot.user_id)
        elif variant == "A":
            self.hub.record_funnel(bot.user_id, variant, ev.FUNNEL_DISMISSED)
        else:
            self.hub.record_funnel(bot.user_id, variant, ev.FUNNEL_DECLINED)

    def _maybe_purchase(self, bot_id: str) -> None:
        if not self.config.payers_enabled:
            return
        bot = self.bots[bot_id]
        if self.rng.random() < PAYER_PURCHASE_RATE:
            self.hub.purchase(bot.user_id, 1800, f"sim-pay-{bot.user_id}")

    def _poisson(self, rate: float) -> int:
        if rate <= 0:
            return 0
        threshold = math.exp(-rate)
        count, product = 0, self.rng.random()
        while product > threshold:
            count += 1
            product *= self.rng.random()
        return count

    # -- reporting ---------------------------------------------------------------

    def _report(self) -> SimReport:
        log = [ev.GrowthEvent.from_record(r.ts, r.body)
               for r in self.hub.store.stream(store_mod.GROWTH)]
        whole = an.Window(SIM_EPOCH, self.end + 1)
        stats = an.connection_stats(log, whole)
        registered = sum(1 for e in log if e.kind == ev.REGISTER)
        invites = sum(1 for e in log if e.kind == ev.INVITE_SENT)
        invited = sum(1 for e in log if e.kind == ev.INVITED_REGISTER)
        weekly = []
        for row in an.weekly_k_report(log, SIM_EPOCH, self.end):
            from datetime import datetime, timezone

            label = datetime.fromtimestamp(row.start, tz=timezone.utc
                                           ).strftime("%Y-%m-%d")
            weekly.append((label, float(row.k_factor)))
        self.hub.bank.check_conservation()
        return SimReport(
            seed=self.config.seed,
            bot_count=self.config.bot_count,
            days=self.config.days,
            registered=registered,
            invites_sent=invites,
            invited_registered=invited,
            connects=stats.connects,
            total_minutes=float(stats.total_minutes),
            mean_minutes=(float(stats.mean_minutes)
                          if stats.mean_minutes is not None else None),
            k_global=(invited / registered) if registered else 0.0,
            weekly_k=weekly,
            digest=self.hub.store.digest(),
            state_hash=self.hub.state_hash(),
        )


def run_simulation(config: SimConfig,
                   data_dir: str | Path | None = None) -> SimReport:
    return Simulation(config, data_dir).run()
