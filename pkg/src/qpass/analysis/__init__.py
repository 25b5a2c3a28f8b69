"""Closed forms, matrix oracles, optimisation and Monte Carlo statistics.

Names are resolved lazily so that :mod:`qpass.adversary` can depend on
:mod:`qpass.analysis.stats` while the rest of this package depends on the
adversary.
"""

import importlib

_EXPORTS = {
    "DetectionStats": "stats",
    "BoundCheckReport": "bounds",
    "delta_e_closed_form": "bounds",
    "delta_e_direct": "bounds",
    "detection_operator": "bounds",
    "lock_residuals": "bounds",
    "pn_closed_form": "bounds",
    "pn_minimize_direct": "bounds",
    "ps_closed_form": "bounds",
    "ps_direct": "bounds",
    "ps_operator": "bounds",
    "ps_supremum": "bounds",
    "ps_supremum_closed_form": "bounds",
    "total_detection": "bounds",
    "SCENARIOS": "montecarlo",
    "Scenario": "montecarlo",
    "get_scenario": "montecarlo",
    "monte_carlo": "montecarlo",
    "OptimizeResult": "optimize",
    "ps_maximize": "optimize",
    "check_point": "report",
    "headline": "report",
    "verify_bounds": "report",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}") from None
    value = getattr(importlib.import_module(f"{__name__}.{module}"), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(list(globals()) + __all__)
