"""Python bindings for the lockstep agreement simulator."""

import os
import sys

_module_dir = os.environ.get("LOCKSTEP_MODULE_DIR")
if _module_dir and _module_dir not in sys.path:
    sys.path.insert(0, _module_dir)

try:
    from _core import (  # type: ignore  # built next to this package or pointed at by env
        ConfigInvalid,
        PreconditionViolated,
        PropertyViolationError,
        adjust,
        chain_length,
        default_eps,
        run_experiment,
        validate_config,
        verify_chain,
    )
except ImportError:
    from lockstep._core import (  # type: ignore
        ConfigInvalid,
        PreconditionViolated,
        PropertyViolationError,
        adjust,
        chain_length,
        default_eps,
        run_experiment,
        validate_config,
        verify_chain,
    )

__all__ = [
    "ConfigInvalid",
    "PreconditionViolated",
    "PropertyViolationError",
    "adjust",
    "chain_length",
    "default_eps",
    "run_experiment",
    "validate_config",
    "verify_chain",
]
