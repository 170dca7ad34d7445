"""Ulam and tower approximations of transfer operators for intermittent maps."""
__version__ = "0.1.0"

from .maps import PMMap, lsv, pm_map, evaluate, derivative, branch_inverse, preimage_sequence, gamma_sequence  # noqa: F401
