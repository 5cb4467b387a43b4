"""Wire codec for the signaling channel.

One UTF-8 text frame carries exactly one envelope:
``{"v": 1, "type": "...", "seq": n, "payload": {...}}``. The payload
schema is validated per type on decode, except for the RTC_* types whose
payloads are opaque to the server beyond the ``session_id`` routing field
(the relay never inspects or rewrites SDP/ICE content).

The docs/protocol.md table is generated from ``SCHEMAS`` below.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Any

from .errors import MalformedFrame, SchemaViolation, UnknownType

PROTOCOL_VERSION = 1

AUTH = "AUTH"
AUTH_OK = "AUTH_OK"
PRESENCE = "PRESENCE"
ROSTER_REQ = "ROSTER_REQ"
ROSTER = "ROSTER"
INVITE = "INVITE"
INVITE_RESULT = "INVITE_RESULT"
RTC_OFFER = "RTC_OFFER"
RTC_ANSWER = "RTC_ANSWER"
RTC_ICE = "RTC_ICE"
CARD_ADVANCE = "CARD_ADVANCE"
CARD_STATE = "CARD_STATE"
SESSION_END = "SESSION_END"
RATE = "RATE"
ERROR = "ERROR"

RTC_TYPES = frozenset({RTC_OFFER, RTC_ANSWER, RTC_ICE})


@dataclass(frozen=True)
class Field:
    kind: str  # str | int | num | bool | list | dict
    required: bool = True
    values: tuple[str, ...] | None = None  # enum constraint for str fields
    doc: str = ""


# Required fields must be present in every direction this type travels;
# direction-specific requirements (e.g. INVITE_RESULT.decision on the way
# in) are enforced by the router via require().
SCHEMAS: dict[str, dict[str, Field]] = {
    AUTH: {
        "token": Field("str", doc="opaque token issued at registration"),
    },
    AUTH_OK: {
        "user_id": Field("str", doc="authenticated identity"),
        "balance_s": Field("int", doc="current time-bank balance, seconds"),
    },
    PRESENCE: {
        "status": Field("str", values=("ONLINE", "OFFLINE"),
                        doc="IN_SESSION is server-managed and rejected on the wire"),
        "roles": Field("list", doc="advertised roles: TEACHER and/or STUDENT"),
    },
    ROSTER_REQ: {
        "language": Field("str", doc="language the requester wants to deal in"),
        "role_sought": Field("str", values=("TEACHER", "STUDENT")),
    },
    ROSTER: {
        "language": Field("str"),
        "role_sought": Field("str", values=("TEACHER", "STUDENT")),
        "users": Field("list", doc="online candidates, most recent first"),
    },
    INVITE: {
        "to": Field("str", doc="recipient user id"),
        "recipient_role": Field("str", values=("TEACHER", "STUDENT"),
                                doc="role the recipient is asked to take"),
        "language": Field("str"),
        "level": Field("str", doc="lesson level identifier"),
        "invitation_id": Field("str", required=False,
                               doc="set on server->recipient delivery"),
        "from": Field("str", required=False, doc="set on server->recipient delivery"),
    },
    INVITE_RESULT: {
        "invitation_id": Field("str"),
        "decision": Field("str", required=False, values=("ACCEPT", "REJECT"),
                          doc="client->server response"),
        "state": Field("str", required=False,
                       values=("ACCEPTED", "REJECTED", "EXPIRED", "CANCELED"),
                       doc="server->client outcome broadcast"),
        "session_id": Field("str", required=False, doc="present when ACCEPTED"),
        "role": Field("str", required=False, values=("TEACHER", "STUDENT"),
                      doc="the receiving user's role in the new session"),
        "peer": Field("str", required=False),
        "lesson_id": Field("str", required=False),
    },
    RTC_OFFER: {"session_id": Field("str")},
    RTC_ANSWER: {"session_id": Field("str")},
    RTC_ICE: {"session_id": Field("str")},
    CARD_ADVANCE: {
        "session_id": Field("str"),
        "to_index": Field("int"),
    },
    CARD_STATE: {
        "session_id": Field("str"),
        "card_index": Field("int"),
        "card": Field("dict", doc="full card: content plus both prompt maps"),
    },
    SESSION_END: {
        "session_id": Field("str"),
        "cause": Field("str", required=False,
                       values=("FINISHED", "HANGUP", "DISCONNECT", "BALANCE_EXHAUSTED"),
                       doc="set on server->client termination broadcast"),
        "billed_s": Field("int", required=False),
        "duration_s": Field("num", required=False),
    },
    RATE: {
        "session_id": Field("str"),
        "stars": Field("int", doc="1..5"),
    },
    ERROR: {
        "code": Field("str", doc="stable machine-readable code"),
        "detail": Field("str"),
        "ref_seq": Field("int", doc="seq of the message that caused the error"),
    },
}

MESSAGE_TYPES = frozenset(SCHEMAS)


@dataclass(frozen=True)
class Envelope:
    type: str
    seq: int
    payload: dict[str, Any] = dc_field(default_factory=dict)
    v: int = PROTOCOL_VERSION


def _check_kind(value: Any, kind: str) -> bool:
    if kind == "str":
        return isinstance(value, str)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "num":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "list":
        return isinstance(value, list)
    if kind == "dict":
        return isinstance(value, dict)
    raise AssertionError(kind)


def validate_payload(msg_type: str, payload: dict[str, Any]) -> None:
    schema = SCHEMAS[msg_type]
    for name, spec in schema.items():
        if name not in payload:
            if spec.required:
                raise SchemaViolation(f"{msg_type}: missing payload field {name!r}")
            continue
        value = payload[name]
        if not _check_kind(value, spec.kind):
            raise SchemaViolation(f"{msg_type}: field {name!r} must be {spec.kind}")
        if spec.values is not None and value not in spec.values:
            raise SchemaViolation(f"{msg_type}: field {name!r} not in {spec.values}")
    if msg_type not in RTC_TYPES:  # RTC payloads are opaque beyond session_id
        for name in payload:
            if name not in schema:
                raise SchemaViolation(f"{msg_type}: unexpected payload field {name!r}")


def decode(text: str | bytes) -> Envelope:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame(str(exc)) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(str(exc)) from exc
    if not isinstance(obj, dict):
        raise MalformedFrame("frame is not an object")
    for name in ("v", "type", "seq", "payload"):
        if name not in obj:
            raise MalformedFrame(f"missing envelope field {name!r}")
    if not isinstance(obj["v"], int) or isinstance(obj["v"], bool):
        raise MalformedFrame("v must be an integer")
    if not isinstance(obj["type"], str):
        raise MalformedFrame("type must be a string")
    if not isinstance(obj["seq"], int) or isinstance(obj["seq"], bool) or obj["seq"] < 0:
        raise MalformedFrame("seq must be an unsigned integer")
    if not isinstance(obj["payload"], dict):
        raise MalformedFrame("payload must be an object")
    if obj["v"] != PROTOCOL_VERSION:
        raise SchemaViolation(f"unsupported protocol version {obj['v']}")
    if obj["type"] not in MESSAGE_TYPES:
        raise UnknownType(obj["type"])
    validate_payload(obj["type"], obj["payload"])
    return Envelope(type=obj["type"], seq=obj["seq"], payload=obj["payload"], v=obj["v"])


def encode(envelope: Envelope) -> str:
    return json.dumps(
        {"v": envelope.v, "type": envelope.type, "seq": envelope.seq,
         "payload": envelope.payload},
        separators=(",", ":"),
        ensure_ascii=False,
    )


def encode_payload(payload: dict[str, Any]) -> str:
    """Canonical payload bytes; used to assert relay transparency."""
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)


def require(envelope: Envelope, *names: str) -> list[Any]:
    """Direction-specific required fields, checked at dispatch time."""
    out = []
    for name in names:
        if name not in envelope.payload:
            raise SchemaViolation(f"{envelope.type}: missing payload field {name!r}")
        out.append(envelope.payload[name])
    return out


def schema_table_markdown() -> str:
    """The protocol reference shipped in docs/protocol.md."""
    lines = [
        "# Signaling protocol reference",
        "",
        "Transport: persistent bidirectional UTF-8 text frames (WebSocket). One",
        "frame carries exactly one envelope; there is no batching.",
        "",
        "Envelope: `{\"v\": 1, \"type\": <type>, \"seq\": <n>, \"payload\": {...}}`.",
        "`seq` strictly increases per connection and direction; a duplicate or",
        "regression elicits `ERROR(SEQ_REGRESSION)` and the connection stays open.",
        "All non-AUTH messages on an unauthenticated connection elicit",
        "`ERROR(NOT_AUTHENTICATED)`.",
        "",
        "RTC_* payloads are relayed to the live-session peer byte-identical and",
        "FIFO-ordered; the server only reads `session_id`.",
        "",
    ]
    for msg_type in sorted(SCHEMAS):
        lines.append(f"## {msg_type}")
        lines.append("")
        lines.append("| field | type | required | notes |")
        lines.append("|-------|------|----------|-------|")
        for name, spec in SCHEMAS[msg_type].items():
            notes = spec.doc
            if spec.values:
                allowed = ", ".join(spec.values)
                notes = f"{notes} (one of: {allowed})" if notes else f"one of: {allowed}"
            lines.append(f"| {name} | {spec.kind} | {'yes' if spec.required else 'no'} "
                         f"| {notes} |")
        if msg_type in RTC_TYPES:
            lines.append("| *...* | any | no | opaque SDP/ICE content, never rewritten |")
        lines.append("")
    return "\n".join(lines)
