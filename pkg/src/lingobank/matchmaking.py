"""Online-user registry and the teach/learn invitation exchange."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .errors import (
    DuplicateUser,
    InvalidState,
    LanguageMismatch,
    NotRecipient,
    RecipientUnavailable,
    SelfInvite,
    UnknownUser,
)

INVITE_TTL_S = 60.0


class Role(str, Enum):
    TEACHER = "TEACHER"
    STUDENT = "STUDENT"


class Presence(str, Enum):
    ONLINE = "ONLINE"
    IN_SESSION = "IN_SESSION"
    OFFLINE = "OFFLINE"


class InviteState(str, Enum):
    PENDING = "PENDING"
    ACCEPTED = "ACCEPTED"
    REJECTED = "REJECTED"
    EXPIRED = "EXPIRED"
    CANCELED = "CANCELED"


TERMINAL_INVITE_STATES = frozenset(
    {InviteState.ACCEPTED, InviteState.REJECTED, InviteState.EXPIRED, InviteState.CANCELED})


@dataclass
class UserProfile:
    user_id: str
    native_language: str
    learning_language: str
    invited_by: str | None = None
    rating_sum: int = 0
    rating_count: int = 0

    @property
    def rating_avg(self) -> float | None:
        if self.rating_count == 0:
            return None
        return self.rating_sum / self.rating_count

    def add_rating(self, stars: int) -> None:
        self.rating_sum += stars
        self.rating_count += 1


@dataclass
class PresenceRecord:
    user_id: str
    status: Presence
    advertised_roles: set[Role] = field(default_factory=set)
    since: float = 0.0


@dataclass
class Invitation:
    invitation_id: str
    from_user: str
    to_user: str
    requested_role_of_recipient: Role
    language: str
    lesson_level: str
    state: InviteState = InviteState.PENDING
    created_at: float = 0.0
    session_id: str | None = None

    def transition(self, new_state: InviteState) -> None:
        if self.state is not InviteState.PENDING:
            raise InvalidState(
                f"invitation {self.invitation_id} already {self.state.value}")
        self.state = new_state


class UserRegistry:
    """Profiles and the opaque auth tokens the signaling layer validates.

    The default factory mints unguessable tokens; the simulator injects a
    deterministic one so whole runs replay bit-for-bit.
    """

    def __init__(self, token_factory: Callable[[str], str] | None = None):
        import secrets

        self._profiles: dict[str, UserProfile] = {}
        self._tokens: dict[str, str] = {}  # token -> user_id
        self._token_factory = token_factory or (lambda _user: secrets.token_hex(16))

    def register(self, user_id: str, native_language: str, learning_language: str,
                 invited_by: str | None = None) -> tuple[UserProfile, str]:
        if user_id in self._profiles:
            raise DuplicateUser(user_id)
        if native_language == learning_language:
            raise LanguageMismatch("native and learning language must differ")
        if invited_by is not None and invited_by not in self._profiles:
            raise UnknownUser(f"inviter {invited_by}")
        profile = UserProfile(user_id, native_language, learning_language, invited_by)
        token = self._token_factory(user_id)
        self._profiles[user_id] = profile
        self._tokens[token] = user_id
        return profile, token

    def get(self, user_id: str) -> UserProfile:
        try:
            return self._profiles[user_id]
        except KeyError:
            raise UnknownUser(user_id) from None

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._profiles

    def user_for_token(self, token: str) -> str | None:
        return self._tokens.get(token)

    def all_profiles(self) -> list[UserProfile]:
        return list(self._profiles.values())


class Matchmaker:
    """Presence roster plus the invitation state machine.

    Accepting an invitation starts a session through ``session_starter``
    (wired by the hub); the invitation only transitions to ACCEPTED once
    the session actually started, so a failed start leaves it PENDING.
    """

    def __init__(self, registry: UserRegistry,
                 invite_ttl_s: float = INVITE_TTL_S,
                 session_starter: Callable[["Invitation"], str] | None = None):
        self.registry = registry
        self.invite_ttl_s = invite_ttl_s
        self.session_starter = session_starter
        self._presence: dict[str, PresenceRecord] = {}
        self._invitations: dict[str, Invitation] = {}
        self._pending: dict[str, Invitation] = {}
        self._invite_seq = 0

    # -- presence ---------------------------------------------------------

    def set_presence(self, user_id: str, status: Presence,
                     roles: set[Role], now: float) -> PresenceRecord:
        self.registry.get(user_id)
        record = PresenceRecord(user_id=user_id, status=status,
                                advertised_roles=set(roles), since=now)
        self._presence[user_id] = record
        return record

    def presence_of(self, user_id: str) -> PresenceRecord:
        record = self._presence.get(user_id)
        if record is None:
            return PresenceRecord(user_id=user_id, status=Presence.OFFLINE)
        return record

    def mark_in_session(self, user_id: str, now: float) -> None:
        record = self.presence_of(user_id)
        self.set_presence(user_id, Presence.IN_SESSION, record.advertised_roles, now)

    def mark_online(self, user_id: str, now: float) -> None:
        record = self.presence_of(user_id)
        self.set_presence(user_id, Presence.ONLINE, record.advertised_roles, now)

    def roster(self, language: str, role_sought: Role) -> list[PresenceRecord]:
        out = []
        for record in self._presence.values():
            if record.status is not Presence.ONLINE:
                continue
            if role_sought not in record.advertised_roles:
                continue
            profile = self.registry.get(record.user_id)
            offered = (profile.native_language if role_sought is Role.TEACHER
                       else profile.learning_language)
            if offered == language:
                out.append(record)
        # recency first; user_id breaks ties so ordering is reproducible
        out.sort(key=lambda r: (-r.since, r.user_id))
        return out

    def online_users(self) -> list[PresenceRecord]:
        return [r for r in self._presence.values() if r.status is not Presence.OFFLINE]

    # -- invitations ----------------------------------------------------------

    def send_invite(self, from_user: str, to_user: str, recipient_role: Role,
                    language: str, level: str, now: float) -> Invitation:
        if from_user == to_user:
            raise SelfInvite(from_user)
        self.registry.get(from_user)
        recipient = self.registry.get(to_user)
        if self.presence_of(from_user).status is not Presence.ONLINE:
            raise InvalidState(f"sender {from_user} is not ONLINE")
        if self.presence_of(to_user).status is not Presence.ONLINE:
            raise RecipientUnavailable(to_user)
        offered = (recipient.native_language if recipient_role is Role.TEACHER
                   else recipient.learning_language)
        if offered != language:
            raise LanguageMismatch(
                f"{to_user} does not offer {language} as {recipient_role.value}")
        self._invite_seq += 1
        invitation = Invitation(
            invitation_id=f"inv-{self._invite_seq}",
            from_user=from_user,
            to_user=to_user,
            requested_role_of_recipient=recipient_role,
            language=language,
            lesson_level=level,
            created_at=now,
        )
        self._invitations[invitation.invitation_id] = invitation
        self._pending[invitation.invitation_id] = invitation
        return invitation

    def get_invitation(self, invitation_id: str) -> Invitation:
        invitation = self._invitations.get(invitation_id)
        if invitation is None:
            raise InvalidState(f"unknown invitation {invitation_id}")
        return invitation

    def respond_invite(self, invitation_id: str, responder: str, accept: bool,
                       now: float) -> Invitation:
        invitation = self.get_invitation(invitation_id)
        if responder != invitation.to_user:
            raise NotRecipient(responder)
        if invitation.state is not InviteState.PENDING:
            raise InvalidState(
                f"invitation {invitation_id} already {invitation.state.value}")
        if not accept:
            self._settle(invitation, InviteState.REJECTED)
            return invitation
        for user in (invitation.from_user, invitation.to_user):
            if self.presence_of(user).status is not Presence.ONLINE:
                raise RecipientUnavailable(f"{user} is no longer available")
        if self.session_starter is not None:
            # may raise (e.g. empty student balance): invitation stays PENDING
            invitation.session_id = self.session_starter(invitation)
        self._settle(invitation, InviteState.ACCEPTED)
        self._cancel_reverse(invitation)
        return invitation

    def _settle(self, invitation: Invitation, state: InviteState) -> None:
        invitation.transition(state)
        self._pending.pop(invitation.invitation_id, None)

    def _cancel_reverse(self, accepted: Invitation) -> list[Invitation]:
        """First acceptance wins a cross-invite pair; the reverse is canceled."""
        canceled = []
        for other in list(self._pending.values()):
            if (other.from_user == accepted.to_user
                    and other.to_user == accepted.from_user):
                self._settle(other, InviteState.CANCELED)
                canceled.append(other)
        return canceled

    def expire_invites(self, now: float) -> list[Invitation]:
        expired = []
        for invitation in list(self._pending.values()):
            if now - invitation.created_at > self.invite_ttl_s:
                self._settle(invitation, InviteState.EXPIRED)
                expired.append(invitation)
        return expired

    def pending_for(self, user_id: str) -> list[Invitation]:
        return [i for i in self._pending.values() if i.to_user == user_id]
