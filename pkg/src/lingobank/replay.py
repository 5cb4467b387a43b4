"""Rebuild state from the event log and hash it for equivalence checks.

The hash here must match ``SignalingHub.state_hash()`` computed on the
live system that produced the log: same canonical structure, same order.
"""

from __future__ import annotations

import hashlib
import json

from . import store as store_mod
from .ledger import LedgerEntry, TimeBank, replay_journal


def rebuild_bank(store: store_mod.EventStore) -> TimeBank:
    entries = (LedgerEntry.from_body(r.body) for r in store.stream(store_mod.LEDGER))
    return replay_journal(entries)


def replay_state_hash(store: store_mod.EventStore) -> str:
    ledger_bodies = []
    session_bodies = []
    rating_bodies = []
    for record in store.replay():
        if record.stream == store_mod.LEDGER:
            ledger_bodies.append(record.body)
        elif record.stream == store_mod.SESSION:
            if record.body.get("type") == "rating":
                rating_bodies.append(record.body)
            else:
                session_bodies.append(record.body)
    payload = json.dumps({
        "ledger": ledger_bodies,
        "sessions": session_bodies,
        "ratings": rating_bodies,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()
