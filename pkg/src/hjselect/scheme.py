"""Staggered finite-difference steps for the periodic conservation law
and its Hamilton-Jacobi antiderivative.

Conservation-law form, advancing a slope field u on the even sublattice:

    u[k+1, m+1] = (u[k, m] + u[k, m+2]) / 2
                  - (lam/2) (H(x_{m+2}, t_k, c + u[k, m+2]) - H(x_m, t_k, c + u[k, m]))

Value form, advancing v on the odd sublattice with a trial constant h:

    v[k+1, m] = (v[k, m-1] + v[k, m+1]) / 2
                - dt (H(x_m, t_k, c + Dx v[k, m+1]) - h)

where Dx v[k, m+1] = (v[k, m+1] - v[k, m-1]) / (2 dx).  The two forms are
conjugate: Dx after a value step equals a slope step after Dx, exactly in
floating point, and the slope step conserves the row sum by telescoping.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import GridField, MeshSpec, m_offset, row_positions


class CflViolation(RuntimeError):
    """Numerical domain of dependence too narrow for the data."""


class CflWarning(UserWarning):
    pass


def t_of_level(mesh: MeshSpec, k: int) -> float:
    """Time of level k, reduced mod the period so trig stays exact."""
    return (k % mesh.steps_per_period) * mesh.dt


def _neighbor_values(row: np.ndarray, old_offset: int) -> tuple[np.ndarray, np.ndarray]:
    """Values at the left and right parents of each next-level site.

    With old sites at offset 0 the next site offset+2j has parents at
    columns (j, j+1); with old offset 1 the parents sit at (j-1, j).
    """
    if old_offset == 0:
        return row, np.roll(row, -1)
    return np.roll(row, 1), row


def _cfl_check(mesh: MeshSpec, speeds: np.ndarray, mode: str, where: str) -> float:
    margin = 1.0 / mesh.lam - float(np.max(np.abs(speeds)))
    if margin <= 0.0 and mode != "off":
        msg = f"CFL margin {margin:.3e} at {where} (ratio {mesh.lam:.4g})"
        if mode == "abort":
            raise CflViolation(msg)
        warnings.warn(msg, CflWarning, stacklevel=3)
    return margin


def lf_step_u(model, mesh: MeshSpec, c: float, u_row: np.ndarray, k: int,
              cfl: str = "warn") -> np.ndarray:
    """One conservation-law step: slope row at level k -> level k+1.

    H is evaluated once on the old row and the flux difference is formed
    by rolls, so the row sum telescopes to machine accuracy.
    """
    old_off = m_offset("even", k)
    t_k = t_of_level(mesh, k)
    x_old = row_positions(mesh, "even", k)
    h_old = model.H(x_old, t_k, c + u_row)
    if cfl != "off":
        speeds = model.H_p(x_old, t_k, c + u_row)
        _cfl_check(mesh, speeds, cfl, f"level {k} (slope step)")
    left, right = _neighbor_values(u_row, old_off)
    h_l, h_r = _neighbor_values(h_old, old_off)
    return 0.5 * (left + right) - 0.5 * mesh.lam * (h_r - h_l)


def hj_step_v(model, mesh: MeshSpec, c: float, v_row: np.ndarray, k: int,
              h_trial: float = 0.0, cfl: str = "warn") -> np.ndarray:
    """One value step: v row at level k -> level k+1, with source h_trial."""
    old_off = m_offset("odd", k)
    t_k = t_of_level(mesh, k)
    x_new = row_positions(mesh, "odd", k + 1)
    left, right = _neighbor_values(v_row, old_off)
    slope = (right - left) / (2.0 * mesh.dx)
    if cfl != "off":
        speeds = model.H_p(x_new, t_k, c + slope)
        _cfl_check(mesh, speeds, cfl, f"level {k} (value step)")
    return 0.5 * (left + right) - mesh.dt * (model.H(x_new, t_k, c + slope) - h_trial)


def slope_of_v(mesh: MeshSpec, v_row: np.ndarray, k: int) -> np.ndarray:
    """Centered slope Dx v at level k: an even-sublattice row."""
    off_u = m_offset("even", k)
    left, right = _neighbor_values(v_row, 1 - off_u)
    # with u sites at offset 0 the flanking v sites are columns (j-1, j),
    # with offset 1 they are (j, j+1); that is _neighbor_values with the
    # roles read off the v offset, which is 1 - off_u
    return (right - left) / (2.0 * mesh.dx)


def cfl_margin(model, mesh: MeshSpec, c: float, u_row: np.ndarray, k: int) -> float:
    """1/lam minus the largest characteristic speed seen by the slope row."""
    x = row_positions(mesh, "even", k)
    speeds = model.H_p(x, t_of_level(mesh, k), c + u_row)
    return 1.0 / mesh.lam - float(np.max(np.abs(speeds)))


# ---------------------------------------------------------------------
# truncation probe against a manufactured smooth field


@dataclass
class SmoothField:
    """A smooth space-time periodic field with its needed derivatives."""

    value: Callable[[np.ndarray, float], np.ndarray]
    d_x: Callable[[np.ndarray, float], np.ndarray]
    d_t: Callable[[np.ndarray, float], np.ndarray]
    d_xx: Callable[[np.ndarray, float], np.ndarray]
    d_tt: Callable[[np.ndarray, float], np.ndarray]


def default_probe_field(ax: float = 0.15, bx: float = 0.07) -> SmoothField:
    """A concrete two-mode field used by the consistency studies."""
    w = 2.0 * np.pi

    def value(x, t):
        return ax * np.sin(w * x) * np.cos(w * t) + bx * np.cos(2 * w * x) * np.sin(w * t)

    def d_x(x, t):
        return ax * w * np.cos(w * x) * np.cos(w * t) - bx * 2 * w * np.sin(2 * w * x) * np.sin(w * t)

    def d_t(x, t):
        return -ax * w * np.sin(w * x) * np.sin(w * t) + bx * w * np.cos(2 * w * x) * np.cos(w * t)

    def d_xx(x, t):
        return -ax * w * w * np.sin(w * x) * np.cos(w * t) - bx * 4 * w * w * np.cos(2 * w * x) * np.sin(w * t)

    def d_tt(x, t):
        return -ax * w * w * np.sin(w * x) * np.cos(w * t) - bx * w * w * np.cos(2 * w * x) * np.sin(w * t)

    return SmoothField(value, d_x, d_t, d_xx, d_tt)


def truncation_probe(model, mesh: MeshSpec, c: float, exact: SmoothField, k: int) -> dict:
    """Residual of one value step applied to samples of a smooth field.

    Returns the raw residual, the residual after adding back the leading
    consistency defect (dx / (2 lam)) (v_xx - lam^2 v_tt), and that
    defect factor itself, all on the level k+1 sites.
    """
    t_k = t_of_level(mesh, k)
    x_new = row_positions(mesh, "odd", k + 1)
    xl = x_new - mesh.dx
    xr = x_new + mesh.dx
    v_l = exact.value(xl, t_k)
    v_r = exact.value(xr, t_k)
    v_up = exact.value(x_new, t_k + mesh.dt)

    d_t_num = (v_up - 0.5 * (v_l + v_r)) / mesh.dt
    slope_num = (v_r - v_l) / (2.0 * mesh.dx)

    vt = exact.d_t(x_new, t_k)
    vx = exact.d_x(x_new, t_k)
    a_factor = exact.d_xx(x_new, t_k) - mesh.lam**2 * exact.d_tt(x_new, t_k)

    raw = d_t_num + model.H(x_new, t_k, c + slope_num) - (vt + model.H(x_new, t_k, c + vx))
    corrected = raw + (mesh.dx / (2.0 * mesh.lam)) * a_factor
    return {"x": x_new, "raw": raw, "corrected": corrected, "defect_factor": a_factor}


def diffusive_lf_run(model, N: int, nu: float, c: float, **solve_kw):
    """Solve the cell problem on a mesh whose ratio scales like dx.

    Keeps dx^2 / (2 dt) = nu fixed, so the scheme's built-in dissipation
    acts like a genuine viscosity nu as N grows.  Returns the periodic
    solution object from the cell-problem solver.
    """
    from .effective import solve_periodic  # deferred, avoids an import cycle

    K = max(N, int(round(4.0 * nu * N * N)))
    mesh = MeshSpec(N, K)
    return solve_periodic(model, mesh, c, **solve_kw)
