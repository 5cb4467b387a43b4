"""Lesson session state machine.

A session is billed wall-clock from start to end, capped by the student's
balance at start; the cap is enforced by the periodic tick so a student is
never billed beyond what they had. Card advancement is teacher-driven and
fans out the same index to both peers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import store as store_mod
from .errors import (
    AlreadyRated,
    InsufficientBalance,
    InvalidInvitationState,
    InvalidState,
    InvalidStars,
    NotParticipant,
    NotTeacher,
    OutOfRange,
    SessionEnded,
    SessionNotEnded,
    UnknownSession,
)
from .ledger import TimeBank
from .lessons import Lesson, LessonCard
from .matchmaking import Invitation, InviteState, Role

TICK_INTERVAL_S = 10.0
HEARTBEAT_TIMEOUT_S = 30.0


class SessionState(str, Enum):
    LIVE = "LIVE"
    ENDED = "ENDED"


class Cause(str, Enum):
    FINISHED = "FINISHED"
    HANGUP = "HANGUP"
    DISCONNECT = "DISCONNECT"
    BALANCE_EXHAUSTED = "BALANCE_EXHAUSTED"


@dataclass(frozen=True)
class Rating:
    session_id: str
    rater: str
    ratee: str
    stars: int
    ts: float


@dataclass
class Session:
    session_id: str
    teacher: str
    student: str
    lesson: Lesson
    balance_cap_s: int  # student balance at start
    started_at: float
    card_index: int = 0
    state: SessionState = SessionState.LIVE
    ended_at: float | None = None
    termination_cause: Cause | None = None
    billed_s: int = 0
    ratings: dict[str, Rating] = field(default_factory=dict)

    def role_of(self, user_id: str) -> Role:
        if user_id == self.teacher:
            return Role.TEACHER
        if user_id == self.student:
            return Role.STUDENT
        raise NotParticipant(user_id)

    def peer_of(self, user_id: str) -> str:
        return self.student if user_id == self.teacher else self.teacher

    def is_participant(self, user_id: str) -> bool:
        return user_id in (self.teacher, self.student)

    def current_card(self) -> LessonCard:
        return self.lesson.cards[self.card_index]


@dataclass(frozen=True)
class SessionSummary:
    session_id: str
    teacher: str
    student: str
    lesson_id: str
    cause: Cause
    started_at: float
    ended_at: float
    duration_s: float
    billed_s: int
    last_card_index: int

    def to_body(self) -> dict:
        return {
            "type": "summary",
            "session_id": self.session_id,
            "teacher": self.teacher,
            "student": self.student,
            "lesson_id": self.lesson_id,
            "cause": self.cause.value,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "duration_s": self.duration_s,
            "billed_s": self.billed_s,
            "last_card_index": self.last_card_index,
        }


class SessionEngine:
    def __init__(self, bank: TimeBank, store: "store_mod.EventStore | None" = None):
        self._bank = bank
        self._store = store
        self._sessions: dict[str, Session] = {}
        self._live: dict[str, Session] = {}
        self._live_by_user: dict[str, str] = {}
        self._summaries: list[SessionSummary] = []
        self._rating_log: list[dict] = []
        self._seq = 0

    # -- lookups -------------------------------------------------------------

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def find(self, session_id: str) -> Session | None:
        return self._sessions.get(session_id)

    def summaries(self) -> list[SessionSummary]:
        return list(self._summaries)

    def live_sessions(self) -> list[Session]:
        return list(self._live.values())

    def live_session_of(self, user_id: str) -> Session | None:
        session_id = self._live_by_user.get(user_id)
        return self._live.get(session_id) if session_id is not None else None

    def all_sessions(self) -> list[Session]:
        return list(self._sessions.values())

    # -- lifecycle -------------------------------------------------------------

    def start_session(self, invitation: Invitation, lesson: Lesson, now: float) -> Session:
        if invitation.state is not InviteState.PENDING and \
                invitation.state is not InviteState.ACCEPTED:
            raise InvalidInvitationState(invitation.state.value)
        if invitation.requested_role_of_recipient is Role.TEACHER:
            teacher, student = invitation.to_user, invitation.from_user
        else:
            teacher, student = invitation.from_user, invitation.to_user
        for user in (teacher, student):
            if self.live_session_of(user) is not None:
                raise InvalidState(f"{user} is already in a live session")
        balance = self._bank.account_for(student).balance_s
        if balance <= 0:
            raise InsufficientBalance(f"student {student} has no minutes")
        self._seq += 1
        session = Session(
            session_id=f"s-{self._seq}",
            teacher=teacher,
            student=student,
            lesson=lesson,
            balance_cap_s=balance,
            started_at=now,
        )
        self._sessions[session.session_id] = session
        self._live[session.session_id] = session
        self._live_by_user[teacher] = session.session_id
        self._live_by_user[student] = session.session_id
        return session

    def advance_card(self, session_id: str, actor: str, to_index: int) -> Session:
        session = self.get(session_id)
        if session.state is not SessionState.LIVE:
            raise SessionEnded(session_id)
        if actor != session.teacher:
            raise NotTeacher(actor)
        if not 0 <= to_index < len(session.lesson):
            raise OutOfRange(f"card {to_index} outside [0, {len(session.lesson)})")
        session.card_index = to_index
        return session

    def tick(self, session_id: str, now: float) -> SessionSummary | None:
        session = self.get(session_id)
        if session.state is not SessionState.LIVE:
            raise SessionEnded(session_id)
        if now - session.started_at >= session.balance_cap_s:
            return self.end_session(session_id, Cause.BALANCE_EXHAUSTED, now)
        return None

    def end_session(self, session_id: str, cause: Cause, now: float) -> SessionSummary:
        session = self.get(session_id)
        if session.state is not SessionState.LIVE:
            raise SessionEnded(f"{session_id} already ended "
                               f"({session.termination_cause.value})")
        elapsed = now - session.started_at
        billed = min(int(elapsed), session.balance_cap_s)
        self._bank.settle_session(
            self._bank.account_for(session.student).account_id,
            self._bank.account_for(session.teacher).account_id,
            billed, session.session_id, now)
        session.state = SessionState.ENDED
        session.ended_at = now
        session.termination_cause = cause
        session.billed_s = billed
        self._live.pop(session.session_id, None)
        for user in (session.teacher, session.student):
            if self._live_by_user.get(user) == session.session_id:
                del self._live_by_user[user]
        summary = SessionSummary(
            session_id=session.session_id,
            teacher=session.teacher,
            student=session.student,
            lesson_id=session.lesson.lesson_id,
            cause=cause,
            started_at=session.started_at,
            ended_at=now,
            duration_s=elapsed,
            billed_s=billed,
            last_card_index=session.card_index,
        )
        self._summaries.append(summary)
        if self._store is not None:
            self._store.append(store_mod.SESSION, summary.to_body(), now)
        return summary

    def resolve_user_cause(self, session_id: str) -> Cause:
        """User-initiated end: FINISHED on the last card, HANGUP otherwise."""
        session = self.get(session_id)
        if session.card_index == len(session.lesson) - 1:
            return Cause.FINISHED
        return Cause.HANGUP

    # -- ratings ---------------------------------------------------------------

    def rate(self, session_id: str, rater: str, stars: int, now: float) -> Rating:
        session = self.get(session_id)
        if not session.is_participant(rater):
            raise NotParticipant(rater)
        if session.state is not SessionState.ENDED:
            raise SessionNotEnded(session_id)
        if not isinstance(stars, int) or isinstance(stars, bool) or not 1 <= stars <= 5:
            raise InvalidStars(str(stars))
        if rater in session.ratings:
            raise AlreadyRated(rater)
        rating = Rating(session_id=session_id, rater=rater,
                        ratee=session.peer_of(rater), stars=stars, ts=now)
        session.ratings[rater] = rating
        body = {"type": "rating", "session_id": session_id, "rater": rater,
                "ratee": rating.ratee, "stars": stars}
        self._rating_log.append(body)
        if self._store is not None:
            self._store.append(store_mod.SESSION, body, now)
        return rating

    def rating_log(self) -> list[dict]:
        return list(self._rating_log)
