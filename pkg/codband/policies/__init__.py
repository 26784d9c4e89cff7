from typing import Dict, Type

import numpy as np

from codband.errors import ConfigError
from codband.policies.base import Decision, Policy, PolicySettings, UserState
from codband.policies.codband import CoDBandPolicy
from codband.policies.linucb import LinUCBPolicy
from codband.policies.oracle import OracleLinUCBPolicy
from codband.policies.random_policy import RandomPolicy
from codband.policies.thompson import RestartThompsonPolicy, ThompsonPolicy

POLICY_REGISTRY: Dict[str, Type[Policy]] = {
    cls.name: cls
    for cls in (CoDBandPolicy, LinUCBPolicy, ThompsonPolicy, RestartThompsonPolicy,
                OracleLinUCBPolicy, RandomPolicy)
}

# policies that carry a change detector and report detections
DETECTING_POLICIES = ("codband", "restart_ts")


def build_policy(name: str, dim: int, settings: PolicySettings, rng: np.random.Generator) -> Policy:
    """Instantiate a registered policy by name"""
    try:
        cls = POLICY_REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown policy {name!r}; choose from {', '.join(sorted(POLICY_REGISTRY))}") from None
    return cls(dim, settings, rng)


__all__ = [
    "CoDBandPolicy",
    "DETECTING_POLICIES",
    "Decision",
    "LinUCBPolicy",
    "OracleLinUCBPolicy",
    "POLICY_REGISTRY",
    "Policy",
    "PolicySettings",
    "RandomPolicy",
    "RestartThompsonPolicy",
    "ThompsonPolicy",
    "UserState",
    "build_policy",
]
