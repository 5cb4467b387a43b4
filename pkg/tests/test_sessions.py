import pytest

from lingobank.errors import (
    AlreadyRated,
    BadLesson,
    InsufficientBalance,
    InvalidInvitationState,
    InvalidStars,
    NotParticipant,
    NotTeacher,
    OutOfRange,
    SessionEnded,
    SessionNotEnded,
)
from lingobank.ledger import TimeBank
from lingobank.lessons import LessonLibrary, fallback_lesson, parse_lesson
from lingobank.matchmaking import Invitation, InviteState, Role
from lingobank.sessions import Cause, SessionEngine, SessionState


@pytest.fixture
def bank():
    bank = TimeBank()
    bank.open_account("teach", now=0.0)
    bank.open_account("learn", now=0.0)
    return bank


@pytest.fixture
def engine(bank):
    return SessionEngine(bank)


def invitation(recipient_role=Role.TEACHER):
    # learn asks teach to be the TEACHER
    return Invitation("inv-1", "learn", "teach", recipient_role, "es", "A1",
                      created_at=0.0)


@pytest.fixture
def lesson():
    return fallback_lesson("es", "A1")


def start(engine, lesson, now=100.0):
    return engine.start_session(invitation(), lesson, now=now)


def test_start_session_roles_follow_requested_role(engine, lesson):
    session = start(engine, lesson)
    assert session.teacher == "teach"
    assert session.student == "learn"
    assert session.card_index == 0
    assert session.state is SessionState.LIVE
    assert session.balance_cap_s == 1800


def test_start_session_reversed_roles(engine, lesson):
    session = engine.start_session(invitation(Role.STUDENT), lesson, now=0.0)
    assert session.teacher == "learn"
    assert session.student == "teach"


def test_start_session_requires_student_balance(lesson):
    bank = TimeBank(signup_grant_s=0)
    bank.open_account("teach", now=0.0)
    bank.open_account("learn", now=0.0)
    engine = SessionEngine(bank)
    with pytest.raises(InsufficientBalance):
        engine.start_session(invitation(), lesson, now=0.0)


def test_no_user_holds_two_live_sessions(bank, engine, lesson):
    from lingobank.errors import InvalidState
    from lingobank.matchmaking import Invitation

    bank.open_account("third", now=0.0)
    engine.start_session(invitation(), lesson, now=0.0)
    overlapping = Invitation("inv-2", "third", "teach", Role.TEACHER, "es", "A1")
    with pytest.raises(InvalidState):
        engine.start_session(overlapping, lesson, now=1.0)


def test_start_session_rejects_terminal_invitation(engine, lesson):
    inv = invitation()
    inv.transition(InviteState.REJECTED)
    with pytest.raises(InvalidInvitationState):
        engine.start_session(inv, lesson, now=0.0)


def test_teacher_advances_card_both_directions(engine, lesson):
    session = start(engine, lesson)
    engine.advance_card(session.session_id, "teach", 1)
    assert session.card_index == 1
    engine.advance_card(session.session_id, "teach", 0)  # repetition is allowed
    assert session.card_index == 0


def test_student_cannot_advance(engine, lesson):
    session = start(engine, lesson)
    with pytest.raises(NotTeacher):
        engine.advance_card(session.session_id, "learn", 1)


def test_advance_out_of_range(engine, lesson):
    session = start(engine, lesson)
    with pytest.raises(OutOfRange):
        engine.advance_card(session.session_id, "teach", len(lesson))
    with pytest.raises(OutOfRange):
        engine.advance_card(session.session_id, "teach", -1)


def test_end_session_bills_wall_clock(engine, bank, lesson):
    session = start(engine, lesson, now=100.0)
    summary = engine.end_session(session.session_id, Cause.HANGUP, now=820.0)
    assert summary.billed_s == 720
    assert summary.cause is Cause.HANGUP
    assert bank.balance(bank.account_for("learn").account_id) == 1800 - 720
    assert bank.balance(bank.account_for("teach").account_id) == 1800 + 720
    transfers = [e for e in bank.journal() if e.ref_id == session.session_id]
    assert sorted(e.delta_s for e in transfers) == [-720, 720]


def test_end_immediately_bills_zero(engine, bank, lesson):
    session = start(engine, lesson, now=100.0)
    summary = engine.end_session(session.session_id, Cause.HANGUP, now=100.0)
    assert summary.billed_s == 0
    assert bank.balance(bank.account_for("learn").account_id) == 1800


def test_disconnect_cause_recorded(engine, lesson):
    session = start(engine, lesson, now=0.0)
    summary = engine.end_session(session.session_id, Cause.DISCONNECT, now=300.0)
    assert summary.cause is Cause.DISCONNECT
    assert summary.billed_s == 300


def test_double_end_rejected_first_cause_wins(engine, lesson):
    session = start(engine, lesson, now=0.0)
    engine.end_session(session.session_id, Cause.HANGUP, now=10.0)
    with pytest.raises(SessionEnded):
        engine.end_session(session.session_id, Cause.DISCONNECT, now=20.0)
    assert session.termination_cause is Cause.HANGUP


def test_tick_before_exhaustion_is_noop(lesson):
    bank = TimeBank(signup_grant_s=600)
    bank.open_account("teach", now=0.0)
    bank.open_account("learn", now=0.0)
    engine = SessionEngine(bank)
    session = engine.start_session(invitation(), lesson, now=0.0)
    assert engine.tick(session.session_id, now=300.0) is None
    assert session.state is SessionState.LIVE


def test_tick_at_exhaustion_settles_capped(lesson):
    bank = TimeBank(signup_grant_s=600)
    bank.open_account("teach", now=0.0)
    bank.open_account("learn", now=0.0)
    engine = SessionEngine(bank)
    session = engine.start_session(invitation(), lesson, now=0.0)
    summary = engine.tick(session.session_id, now=600.0)
    assert summary is not None
    assert summary.cause is Cause.BALANCE_EXHAUSTED
    assert summary.billed_s == 600
    assert bank.balance(bank.account_for("learn").account_id) == 0


def test_tick_on_ended_session_raises(engine, lesson):
    session = start(engine, lesson, now=0.0)
    engine.end_session(session.session_id, Cause.HANGUP, now=1.0)
    with pytest.raises(SessionEnded):
        engine.tick(session.session_id, now=2.0)


def test_billing_never_exceeds_start_balance(lesson):
    bank = TimeBank(signup_grant_s=240)
    bank.open_account("teach", now=0.0)
    bank.open_account("learn", now=0.0)
    engine = SessionEngine(bank)
    session = engine.start_session(invitation(), lesson, now=0.0)
    # tick arrives late; billing is still capped at the start balance
    summary = engine.tick(session.session_id, now=249.0)
    assert summary.billed_s == 240
    assert bank.balance(bank.account_for("learn").account_id) == 0


def test_user_cause_resolution(engine, lesson):
    session = start(engine, lesson)
    assert engine.resolve_user_cause(session.session_id) is Cause.HANGUP
    engine.advance_card(session.session_id, "teach", len(lesson) - 1)
    assert engine.resolve_user_cause(session.session_id) is Cause.FINISHED


def test_rate_after_end(engine, lesson):
    session = start(engine, lesson, now=0.0)
    with pytest.raises(SessionNotEnded):
        engine.rate(session.session_id, "learn", 5, now=1.0)
    engine.end_session(session.session_id, Cause.HANGUP, now=10.0)
    rating = engine.rate(session.session_id, "learn", 5, now=11.0)
    assert rating.ratee == "teach"
    with pytest.raises(AlreadyRated):
        engine.rate(session.session_id, "learn", 4, now=12.0)
    engine.rate(session.session_id, "teach", 3, now=13.0)  # counterpart still may


def test_rate_validation(engine, lesson):
    session = start(engine, lesson, now=0.0)
    engine.end_session(session.session_id, Cause.HANGUP, now=1.0)
    with pytest.raises(NotParticipant):
        engine.rate(session.session_id, "ghost", 5, now=2.0)
    for stars in (0, 6, "5"):
        with pytest.raises(InvalidStars):
            engine.rate(session.session_id, "learn", stars, now=2.0)


def test_every_end_path_sets_exactly_one_cause(bank, lesson):
    causes = {}
    for cause in (Cause.FINISHED, Cause.HANGUP, Cause.DISCONNECT):
        engine = SessionEngine(bank)
        session = engine.start_session(invitation(), lesson, now=0.0)
        summary = engine.end_session(session.session_id, cause, now=5.0)
        causes[cause] = summary.cause
        assert session.termination_cause is cause
    # exhaustion path
    engine = SessionEngine(bank)
    session = engine.start_session(invitation(), lesson, now=0.0)
    summary = engine.tick(session.session_id, now=10_000.0)
    causes[Cause.BALANCE_EXHAUSTED] = summary.cause
    assert set(causes) == set(Cause)


def test_lesson_loader_validation():
    good = {
        "lesson_id": "x", "language": "es", "level": "A1",
        "cards": [{"index": 0, "content": "hola",
                   "student_prompt": {"en": "hello"},
                   "teacher_prompt": {"en": "greet"}}],
    }
    lesson = parse_lesson(good)
    assert len(lesson) == 1
    sparse = dict(good, cards=[dict(good["cards"][0], index=1)])
    with pytest.raises(BadLesson):
        parse_lesson(sparse)
    empty_prompt = dict(good, cards=[dict(good["cards"][0], student_prompt={})])
    with pytest.raises(BadLesson):
        parse_lesson(empty_prompt)
    with pytest.raises(BadLesson):
        parse_lesson(dict(good, cards=[]))


def test_bundled_lessons_load_and_fallback_synthesizes():
    library = LessonLibrary.bundled()
    es = library.get("es", "A1")
    assert es.lesson_id == "es-a1-greetings"
    assert [c.index for c in es.cards] == list(range(len(es)))
    made_up = library.get("fi", "B2")
    assert len(made_up) > 0
    assert all(c.student_prompt and c.teacher_prompt for c in made_up.cards)
