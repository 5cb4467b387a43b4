"""Growth-event vocabulary: the append-only analytics input.

Granular kinds are emitted live by the platform; the ``*_MONTH`` and
``WINDOW_COUNTS`` kinds are pre-aggregated rows produced by dataset import
(the bundled monthly tables only exist in aggregated form).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

# granular, emitted by the running platform
REGISTER = "REGISTER"
INVITE_SENT = "INVITE_SENT"
INVITED_REGISTER = "INVITED_REGISTER"
ACTIVE_DAY = "ACTIVE_DAY"
CALL_MADE = "CALL_MADE"
SESSION_DONE = "SESSION_DONE"
TAUGHT = "TAUGHT"
PURCHASED = "PURCHASED"
FUNNEL = "FUNNEL"

# aggregated, produced by dataset import
CONNECTS_MONTH = "CONNECTS_MONTH"
INVOLVEMENT_MONTH = "INVOLVEMENT_MONTH"
WINDOW_COUNTS = "WINDOW_COUNTS"

KINDS = frozenset({
    REGISTER, INVITE_SENT, INVITED_REGISTER, ACTIVE_DAY, CALL_MADE,
    SESSION_DONE, TAUGHT, PURCHASED, FUNNEL,
    CONNECTS_MONTH, INVOLVEMENT_MONTH, WINDOW_COUNTS,
})

# funnel dialog variants and outcomes
VARIANT_A = "A"
VARIANT_B = "B"
FUNNEL_SHOWN = "SHOWN"
FUNNEL_INVITED = "INVITED"
FUNNEL_DISMISSED = "DISMISSED"
FUNNEL_DECLINED = "DECLINED"
FUNNEL_ACTIONS = frozenset({FUNNEL_SHOWN, FUNNEL_INVITED, FUNNEL_DISMISSED, FUNNEL_DECLINED})


@dataclass(frozen=True)
class GrowthEvent:
    ts: float
    kind: str
    user: str | None = None
    data: dict[str, Any] = field(default_factory=dict)

    def to_body(self) -> dict[str, Any]:
        return {"kind": self.kind, "user": self.user, "data": self.data}

    @classmethod
    def from_record(cls, ts: float, body: dict[str, Any]) -> "GrowthEvent":
        return cls(ts=ts, kind=body["kind"], user=body.get("user"),
                   data=body.get("data", {}))
