"""
Oracle LinUCB
LinUCB with one model per ground-truth global model, shared by every user the
environment currently assigns to it. Only usable in simulation.
"""

from typing import Dict, Hashable, Optional

from codband.errors import ProtocolError, UnsupportedOperationError
from codband.policies.linucb import LinUCBPolicy


class OracleLinUCBPolicy(LinUCBPolicy):
    name = "oracle_linucb"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._routing: Dict[Hashable, int] = {}

    def _route(self, user: Hashable, truth: Optional[int]) -> int:
        if truth is None:
            raise UnsupportedOperationError(
                "oracle_linucb needs the ground-truth model id and cannot run on logged data")
        self._routing[user] = truth
        return truth

    def _feedback_key(self, user: Hashable) -> int:
        try:
            return self._routing.pop(user)
        except KeyError:
            raise ProtocolError(f"feedback for user {user!r} without a preceding choose") from None
