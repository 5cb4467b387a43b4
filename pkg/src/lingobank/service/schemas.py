"""Request/response models for the HTTP side of the service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class RegisterRequest(BaseModel):
    user_id: str = Field(min_length=1)
    native_language: str = Field(min_length=2)
    learning_language: str = Field(min_length=2)
    invited_by: str | None = None


class RegisterResponse(BaseModel):
    user_id: str
    token: str
    balance_s: int
    funnel_variant: str


class ProfileResponse(BaseModel):
    user_id: str
    native_language: str
    learning_language: str
    rating_avg: float | None
    balance_s: int
    funnel_variant: str


class BalanceResponse(BaseModel):
    user_id: str
    balance_s: int
    balance_min: int


class JournalEntryModel(BaseModel):
    entry_id: int
    account_id: str
    user_id: str
    delta_s: int
    reason: str
    ref_id: str | None
    ts: float


class JournalResponse(BaseModel):
    user_id: str
    entries: list[JournalEntryModel]


class PresenceEntry(BaseModel):
    user_id: str
    status: str
    roles: list[str]
    since: float


class PresenceResponse(BaseModel):
    users: list[PresenceEntry]


class PurchaseRequest(BaseModel):
    user_id: str
    amount_s: int
    payment_ref: str


class FunnelEventRequest(BaseModel):
    user_id: str
    variant: str
    action: str


class FriendInvitesRequest(BaseModel):
    user_id: str
    count: int = Field(ge=1)


class ProjectRequest(BaseModel):
    u0: int = Field(gt=0)
    k: str | float
    r: str | float
    steps: int = Field(ge=0)


class ProjectPoint(BaseModel):
    step: int
    audience: float


class ProjectResponse(BaseModel):
    u0: int
    k: float
    r: float
    points: list[ProjectPoint]
    final_audience: float


class ConnectionStatsResponse(BaseModel):
    connects: int
    total_minutes: float
    mean_minutes: float | None
    mean_minutes_display: str


class InvolvementResponse(BaseModel):
    callers: int
    registrations: int
    percent_display: str


class KWindowModel(BaseModel):
    start: float
    end: float
    U: int
    i: int
    IU: int
    k_factor: float
    k_retention: float | None
    k_growth: float | None


class KReportResponse(BaseModel):
    rows: list[KWindowModel]


class ImportRequest(BaseModel):
    path: str


class ImportResponse(BaseModel):
    records: int


class ErrorResponse(BaseModel):
    code: str
    detail: str
