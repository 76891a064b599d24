"""Fundamental solutions of variable-coefficient parabolic operators.

Constructs the kernel E(x, t; xi, tau) of
    sum_ij a_ij(x,t) d2/dx_i dx_j + sum_i b_i(x,t) d/dx_i + q(x,t) - d/dt
by the frozen-coefficient iteration and certifies it against explicit
two-sided Gaussian envelopes.

Quick start::

    import levi
    cfg = levi.load_config_text('''
        n = 1
        kappa = 1
        M = 1
        a[1][1] = 1
    ''')
    ev = levi.Evaluator(cfg)
    value = ev.evaluate([0.5], 1.0, [0.0], 0.0)
    consts = levi.constants_for(cfg)
"""

from ._core import (
    Config,
    ConfigError,
    EvalResult,
    Evaluator,
    SeriesDiagnostics,
    __version__,
    constants_for,
    constants_json,
    gauss_kernel,
    load_config,
    load_config_text,
    log_lower_envelope,
    log_upper_envelope,
)

__all__ = [
    "Config",
    "ConfigError",
    "EvalResult",
    "Evaluator",
    "SeriesDiagnostics",
    "__version__",
    "constants_for",
    "constants_json",
    "gauss_kernel",
    "load_config",
    "load_config_text",
    "log_lower_envelope",
    "log_upper_envelope",
]
