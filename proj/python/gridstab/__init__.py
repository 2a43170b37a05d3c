"""Python front end for the gridstab core.

Every call goes through the same request documents as the CLI and the HTTP
service, so results match byte for byte.
"""

import json
import os

from ._core import DomainError, InputError
from ._core import execute as _execute

__all__ = [
    "DomainError",
    "InputError",
    "execute",
    "acrit",
    "sweep",
    "metrics",
    "heatmap",
    "simulate",
]


def execute(op, request, base_dir="."):
    """Run `op` on a request dict and return the response dict."""
    return json.loads(_execute(op, json.dumps(request), os.fspath(base_dir)))


def acrit(family, **params):
    return execute("acrit", {"family": family, "params": params})


def sweep(family, a, **params):
    return execute("sweep", {"family": family, "params": params, "a": list(a)})


def metrics(feeder, base_dir="."):
    return execute("metrics", {"feeder": feeder}, base_dir)


def heatmap(feeder, kind, config=(), sampling=None, base_dir="."):
    req = {"feeder": feeder, "kind": kind, "config": list(config)}
    if sampling:
        req["sampling"] = sampling
    return execute("heatmap", req, base_dir)


def simulate(scenario, base_dir="."):
    return execute("simulate", scenario, base_dir)
