"""lingobank: a peer-to-peer language exchange platform.

Native speakers teach their mother tongue and earn minutes; learners
spend them. The package bundles the signaling server, the time-bank
ledger, growth analytics and a deterministic bot simulator.
"""

__version__ = "0.1.0"
