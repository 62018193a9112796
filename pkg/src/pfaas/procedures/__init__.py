"""Procedure handlers, one per deployed function."""

from .catalog import (
    CATALOG,
    BY_NAME,
    CoreHarness,
    deploy_all,
    function_specs,
    generate_subscribers,
    load_subscribers,
    make_supi,
    provision,
)
from .model import RegState, Snssai, SubscriberRecord

__all__ = [
    "CATALOG",
    "BY_NAME",
    "CoreHarness",
    "RegState",
    "Snssai",
    "SubscriberRecord",
    "deploy_all",
    "function_specs",
    "generate_subscribers",
    "load_subscribers",
    "make_supi",
    "provision",
]
