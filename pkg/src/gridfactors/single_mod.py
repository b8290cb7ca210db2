"""Single-branch susceptance changes, line outages and line closings.

All of these are rank-one updates of the grounded matrix, handled by the
Sherman-Morrison formula. The derived quantities are the updated inverse
and PTDF, the line outage distribution factor (LODF) column, the angle
difference left across an outaged branch, and the line closing distribution
factor (LCDF) column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridStructureError, IslandingError
from .factors_base import FactorMatrix, PTDF
from .grid_model import GroundedSystem

#: relative tolerance of the scale-aware zero test on the update denominator
DENOM_RTOL = 1e-8


@dataclass(frozen=True)
class BranchDelta:
    """One susceptance change: outage is ``delta_b = -b_e``, closing starts
    from ``b_e = 0`` with ``delta_b > 0``."""

    branch: int
    delta_b: float


def _check_delta(sys: GroundedSystem, d: BranchDelta) -> int:
    e = sys.grid.branch_index.get(d.branch)
    if e is None:
        raise GridStructureError(f"unknown branch {d.branch}")
    if sys.b[e] + d.delta_b < -1e-12:
        raise GridStructureError(
            f"branch {d.branch}: susceptance would become negative "
            f"({sys.b[e]} + {d.delta_b})"
        )
    return e


def _sm_denominator(sys: GroundedSystem, e: int, delta_b: float) -> tuple[np.ndarray, float, float]:
    """Sherman-Morrison pieces: ``w = B^-1 nu_e`` and ``1 + db nu^T w``."""
    nu = sys.E_r[:, e]
    w = sys.B_inv @ nu
    transfer = float(nu @ w)
    denom = 1.0 + delta_b * transfer
    return w, transfer, denom


def _require_safe(denom: float, scale: float, what: str) -> None:
    if abs(denom) <= DENOM_RTOL * max(1.0, abs(scale)):
        raise IslandingError(
            f"{what} would island the grid (denominator {denom:.3g})",
            criterion=denom,
        )


def updated_inverse(sys: GroundedSystem, d: BranchDelta) -> np.ndarray:
    """Inverse of the grounded matrix after one susceptance change."""
    e = _check_delta(sys, d)
    if d.delta_b == 0.0:
        return sys.B_inv
    w, transfer, denom = _sm_denominator(sys, e, d.delta_b)
    _require_safe(denom, d.delta_b * transfer, f"modifying branch {d.branch}")
    return sys.B_inv - np.outer(w, w) * (d.delta_b / denom)


def ptdf_after_mod(sys: GroundedSystem, d: BranchDelta) -> FactorMatrix:
    """PTDF of the modified grid; for an outage the modified row vanishes.

    Every row, including the modified one, is taken directly from the
    updated inverse: ``PTDF_m = diag(b_m) E^T B_m^-1``.
    """
    B_m_inv = updated_inverse(sys, d)
    e = sys.grid.branch_index[d.branch]
    b_m = sys.b.copy()
    b_m[e] += d.delta_b
    values = (b_m[:, None] * sys.E_r.T) @ B_m_inv
    return FactorMatrix(
        values=values,
        row_labels=sys.grid.branch_ids,
        col_labels=sys.bus_ids,
        kind=PTDF,
    )


def lodf_column(sys: GroundedSystem, branch: int) -> np.ndarray:
    """LODF column for outaging ``branch``: ``f_m = f_r + col * f_r[e]``.

    The self-entry is exactly -1: the outaged branch carries no flow
    afterwards.
    """
    e = sys.grid.branch_index.get(branch)
    if e is None:
        raise GridStructureError(f"unknown branch {branch}")
    b_e = sys.b[e]
    if b_e <= 0.0:
        raise GridStructureError(f"branch {branch} is not in service")
    nu = sys.E_r[:, e]
    w = sys.B_inv @ nu
    transfer = float(nu @ w)
    denom = 1.0 - b_e * transfer
    _require_safe(denom, b_e * transfer, f"outage of branch {branch}")
    b_m = sys.b.copy()
    b_m[e] = 0.0
    col = (b_m * (sys.E_r.T @ w)) / denom
    col[e] = -1.0
    return col


def post_outage_angle_diff(sys: GroundedSystem, branch: int, f_r: np.ndarray) -> float:
    """Angle difference across ``branch`` after its own outage.

    Evaluates ``[b_e + db (PTDF_ei - PTDF_ej)]^-1 u_e^T f_r`` with
    ``db = -b_e``; zero pre-outage flow gives zero angle difference.
    """
    e = sys.grid.branch_index.get(branch)
    if e is None:
        raise GridStructureError(f"unknown branch {branch}")
    b_e = sys.b[e]
    if b_e <= 0.0:
        raise GridStructureError(f"branch {branch} is not in service")
    nu = sys.E_r[:, e]
    transfer = float(nu @ (sys.B_inv @ nu))
    # PTDF_{e,i} - PTDF_{e,j} = b_e nu^T B^-1 nu
    denom = b_e - b_e * (b_e * transfer)
    _require_safe(denom / b_e, b_e * transfer, f"outage of branch {branch}")
    return float(np.asarray(f_r)[e]) / denom


def lcdf_column(sys: GroundedSystem, branch: int, new_b: float) -> np.ndarray:
    """LCDF column for closing ``branch`` at susceptance ``new_b``.

    The branch must already be present in the incidence matrix with zero
    susceptance. Flows update as ``f_m = f_r + col * (nu_e^T theta_r)``,
    the angle difference across the still-open branch.
    """
    e = sys.grid.branch_index.get(branch)
    if e is None:
        raise GridStructureError(f"unknown branch {branch}")
    if sys.b[e] != 0.0:
        raise GridStructureError(
            f"branch {branch} is already in service (b={sys.b[e]}); "
            "closing requires a zero-susceptance branch"
        )
    if new_b <= 0.0:
        raise GridStructureError(f"closing susceptance must be > 0, got {new_b}")
    nu = sys.E_r[:, e]
    w = sys.B_inv @ nu
    denom = 1.0 + new_b * float(nu @ w)
    b_m = sys.b.copy()
    b_m[e] = new_b
    col = new_b * (-(b_m * (sys.E_r.T @ w)) / denom)
    col[e] += new_b
    return col
