"""Optimal vaults and grid-shells over planar domains.

Thin wrapper around the C++ core. The main entry point is :func:`run`,
which accepts the same configuration schema as the command-line tool
(as a Python dict) and returns the run report as a dict.
"""

from __future__ import annotations

import json as _json
from typing import Any, Callable, Optional

from ._vaultopt import (  # noqa: F401
    analytic_disk_uniform,
    analytic_point_load,
    run_json,
    validate_config,
)

__all__ = [
    "run",
    "run_json",
    "validate_config",
    "analytic_disk_uniform",
    "analytic_point_load",
]


def run(config: dict[str, Any], log: Optional[Callable[[str], None]] = None) -> dict[str, Any]:
    """Run the full pipeline (grid, member adding, recovery, verification).

    ``config`` follows the JSON schema documented in the README. Returns
    the run report as a dict; ``report["verified"]`` tells whether all
    optimality and recovery checks passed.
    """
    return run_json(_json.dumps(config), log)
