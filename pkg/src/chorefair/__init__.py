"""Fair division of chores: earning-restricted equilibria, rounding and EFX."""

from .bivalued import bivalued_3efx_po, bivalued_efx_po_small
from .efx import efx_small, four_efx, matching_payments
from .enumeration import enumerate_consumption_graphs, find_er_equilibrium_enum
from .errors import BudgetExceeded, ChoreFairError, InvariantViolation, PreconditionViolated
from .instances import Allocation, ErInstance, Instance, normalize_bivalued, random_instance
from .lcp import solve_er
from .market import ErEquilibrium
from .rounding import balanced_po, rebalance_ef1, round_er_half, round_er_one
from .verify import check_fairness, efx_factor, is_efk, is_efx, verify_er

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BudgetExceeded",
    "ChoreFairError",
    "ErEquilibrium",
    "ErInstance",
    "Instance",
    "InvariantViolation",
    "PreconditionViolated",
    "balanced_po",
    "bivalued_3efx_po",
    "bivalued_efx_po_small",
    "check_fairness",
    "efx_factor",
    "efx_small",
    "enumerate_consumption_graphs",
    "find_er_equilibrium_enum",
    "four_efx",
    "is_efk",
    "is_efx",
    "matching_payments",
    "normalize_bivalued",
    "random_instance",
    "rebalance_ef1",
    "round_er_half",
    "round_er_one",
    "solve_er",
    "verify_er",
]
