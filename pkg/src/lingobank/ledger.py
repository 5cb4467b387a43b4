"""Double-entry time bank.

Accounts are denominated in whole seconds (displayed as minutes); every
balance change is a journal entry. Session settlement is a zero-sum
transfer between student and teacher; the only minting paths are the
signup grant, the invite bonus and (stubbed) purchases.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from . import store as store_mod
from .errors import (
    AlreadyGranted,
    DuplicateAccount,
    InsufficientBalance,
    InvalidAmount,
    UnknownAccount,
)

DEFAULT_SIGNUP_GRANT_S = 1800
INVITE_BONUS_S = 1800  # 30 minutes per invited friend


class Reason(str, Enum):
    SIGNUP_GRANT = "SIGNUP_GRANT"
    TEACH_EARN = "TEACH_EARN"
    LEARN_SPEND = "LEARN_SPEND"
    INVITE_BONUS = "INVITE_BONUS"
    PURCHASE = "PURCHASE"


MINTING_REASONS = frozenset({Reason.SIGNUP_GRANT, Reason.INVITE_BONUS, Reason.PURCHASE})


@dataclass(frozen=True)
class LedgerEntry:
    entry_id: int
    account_id: str
    user_id: str
    delta_s: int
    reason: Reason
    ref_id: str | None
    ts: float

    def to_body(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "account_id": self.account_id,
            "user_id": self.user_id,
            "delta_s": self.delta_s,
            "reason": self.reason.value,
            "ref_id": self.ref_id,
            "ts": self.ts,
        }

    @classmethod
    def from_body(cls, body: dict) -> "LedgerEntry":
        return cls(
            entry_id=body["entry_id"],
            account_id=body["account_id"],
            user_id=body["user_id"],
            delta_s=body["delta_s"],
            reason=Reason(body["reason"]),
            ref_id=body.get("ref_id"),
            ts=body["ts"],
        )


@dataclass
class Account:
    account_id: str
    owner_user_id: str
    balance_s: int
    created_at: float


class TimeBank:
    """Linearizable ledger; settle_session touches two accounts atomically."""

    def __init__(self, signup_grant_s: int = DEFAULT_SIGNUP_GRANT_S,
                 invite_bonus_s: int = INVITE_BONUS_S,
                 sink: Callable[[dict, float], None] | None = None):
        if signup_grant_s < 0 or invite_bonus_s < 0:
            raise InvalidAmount("grant amounts must be >= 0")
        self.signup_grant_s = signup_grant_s
        self.invite_bonus_s = invite_bonus_s
        self._sink = sink
        self._lock = threading.RLock()
        self._accounts: dict[str, Account] = {}
        self._by_user: dict[str, str] = {}
        self._journal: list[LedgerEntry] = []
        self._bonus_granted: set[str] = set()  # invited users already rewarded

    # -- internals ---------------------------------------------------------

    def _account(self, account_id: str) -> Account:
        try:
            return self._accounts[account_id]
        except KeyError:
            raise UnknownAccount(account_id) from None

    def _write(self, account: Account, delta_s: int, reason: Reason,
               ref_id: str | None, ts: float) -> LedgerEntry:
        if account.balance_s + delta_s < 0:
            raise InsufficientBalance(
                f"{account.account_id}: balance {account.balance_s}, delta {delta_s}")
        entry = LedgerEntry(
            entry_id=len(self._journal),
            account_id=account.account_id,
            user_id=account.owner_user_id,
            delta_s=delta_s,
            reason=reason,
            ref_id=ref_id,
            ts=ts,
        )
        self._journal.append(entry)
        account.balance_s += delta_s
        if self._sink is not None:
            self._sink(entry.to_body(), ts)
        return entry

    # -- operations ---------------------------------------------------------

    def open_account(self, user_id: str, now: float) -> Account:
        with self._lock:
            if user_id in self._by_user:
                raise DuplicateAccount(user_id)
            account = Account(
                account_id=f"acct-{user_id}",
                owner_user_id=user_id,
                balance_s=0,
                created_at=now,
            )
            self._accounts[account.account_id] = account
            self._by_user[user_id] = account.account_id
            self._write(account, self.signup_grant_s, Reason.SIGNUP_GRANT, None, now)
            return account

    def settle_session(self, student_acct: str, teacher_acct: str,
                       duration_s: int, session_id: str,
                       now: float) -> tuple[LedgerEntry, LedgerEntry]:
        if duration_s < 0:
            raise InvalidAmount(f"duration {duration_s} < 0")
        with self._lock:
            student = self._account(student_acct)
            teacher = self._account(teacher_acct)
            if student.balance_s < duration_s:
                raise InsufficientBalance(
                    f"student balance {student.balance_s} < {duration_s}")
            spend = self._write(student, -duration_s, Reason.LEARN_SPEND, session_id, now)
            earn = self._write(teacher, duration_s, Reason.TEACH_EARN, session_id, now)
            return spend, earn

    def grant_invite_bonus(self, inviter_acct: str, invited_user: str,
                           now: float) -> LedgerEntry:
        with self._lock:
            inviter = self._account(inviter_acct)
            if invited_user in self._bonus_granted:
                raise AlreadyGranted(f"bonus for {invited_user} already granted")
            entry = self._write(inviter, self.invite_bonus_s, Reason.INVITE_BONUS,
                                invited_user, now)
            self._bonus_granted.add(invited_user)
            return entry

    def purchase_minutes(self, acct: str, amount_s: int, payment_ref: str,
                         now: float) -> LedgerEntry:
        if amount_s <= 0 or amount_s % 60 != 0:
            raise InvalidAmount(f"{amount_s} s is not a positive whole number of minutes")
        with self._lock:
            account = self._account(acct)
            return self._write(account, amount_s, Reason.PURCHASE, payment_ref, now)

    def balance(self, acct: str) -> int:
        with self._lock:
            return self._account(acct).balance_s

    # -- queries -------------------------------------------------------------

    def account_for(self, user_id: str) -> Account:
        with self._lock:
            try:
                return self._accounts[self._by_user[user_id]]
            except KeyError:
                raise UnknownAccount(user_id) from None

    def journal(self, acct: str | None = None) -> list[LedgerEntry]:
        with self._lock:
            if acct is None:
                return list(self._journal)
            self._account(acct)
            return [e for e in self._journal if e.account_id == acct]

    def balances(self) -> dict[str, int]:
        with self._lock:
            return {a.account_id: a.balance_s for a in self._accounts.values()}

    def minted_total(self) -> int:
        with self._lock:
            return sum(e.delta_s for e in self._journal if e.reason in MINTING_REASONS)

    def check_conservation(self) -> None:
        """Sum of balances must equal the sum of minted deltas, exactly."""
        with self._lock:
            total = sum(a.balance_s for a in self._accounts.values())
            minted = self.minted_total()
            if total != minted:
                raise AssertionError(f"conservation broken: balances {total}, minted {minted}")
            for account in self._accounts.values():
                if account.balance_s < 0:
                    raise AssertionError(f"negative balance on {account.account_id}")

    def state_hash(self) -> str:
        import hashlib
        import json

        with self._lock:
            payload = json.dumps(
                {
                    "accounts": sorted(
                        (a.account_id, a.owner_user_id, a.balance_s)
                        for a in self._accounts.values()
                    ),
                    "entries": [e.to_body() for e in self._journal],
                },
                sort_keys=True,
            )
        return hashlib.sha256(payload.encode()).hexdigest()


def replay_journal(entries: Iterable[LedgerEntry]) -> TimeBank:
    """Rebuild a bank purely from journal entries (replay consistency)."""
    bank = TimeBank(signup_grant_s=0)
    for entry in entries:
        account = bank._accounts.get(entry.account_id)
        if account is None:
            account = Account(entry.account_id, entry.user_id, 0, entry.ts)
            bank._accounts[entry.account_id] = account
            bank._by_user[entry.user_id] = entry.account_id
        if entry.entry_id != len(bank._journal):
            raise AssertionError(f"journal gap at entry {entry.entry_id}")
        bank._journal.append(entry)
        account.balance_s += entry.delta_s
        if account.balance_s < 0:
            raise AssertionError(f"replay drove {entry.account_id} negative")
        if entry.reason is Reason.INVITE_BONUS and entry.ref_id:
            bank._bonus_granted.add(entry.ref_id)
    return bank


def replay_from_store(event_store: "store_mod.EventStore") -> TimeBank:
    entries = (LedgerEntry.from_body(r.body)
               for r in event_store.stream(store_mod.LEDGER))
    return replay_journal(entries)
