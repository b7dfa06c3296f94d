"""Bellman form of the value step and the deep expectation identity.

The one-step operator minimizes, over controls |xi| <= 1/lam,

    (v_l + v_r)/2 + dt (L(x, t_k, xi) - c xi - xi Dx v) + h dt

which by Legendre duality equals the value step whenever the minimizer
is interior.  A clamped minimizer means the CFL window is too narrow for
the data, and the closed form and the constrained minimum part ways;
``mode="check"`` turns that into a DualityMismatch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import MeshSpec, m_offset, row_positions
from .scheme import _neighbor_values, hj_step_v, slope_of_v, t_of_level
from .walk import Cone, ControlField


class DualityMismatch(RuntimeError):
    pass


class BoundViolation(RuntimeError):
    pass


def _parts(mesh: MeshSpec, v_row: np.ndarray, k: int):
    old_off = m_offset("odd", k)
    left, right = _neighbor_values(v_row, old_off)
    avg = 0.5 * (left + right)
    slope = (right - left) / (2.0 * mesh.dx)
    x_new = row_positions(mesh, "odd", k + 1)
    return x_new, avg, slope


def objective(model, mesh: MeshSpec, c: float, v_row: np.ndarray, k: int,
              h: float, xi: np.ndarray) -> np.ndarray:
    """Bellman objective on every next-level site, for controls xi.

    xi has shape (G,); the result has shape (G, N).
    """
    x_new, avg, slope = _parts(mesh, v_row, k)
    t_k = t_of_level(mesh, k)
    xi = np.asarray(xi, dtype=float)[:, None]
    lval = model.L(x_new[None, :], t_k, xi)
    return avg[None, :] + mesh.dt * (lval - c * xi - xi * slope[None, :] + h)


def bellman_one_step(model, mesh: MeshSpec, c: float, v_row: np.ndarray, k: int,
                     h: float = 0.0, mode: str = "closed", n_grid: int = 257,
                     polish: bool = True, tol_duality: float | None = None):
    """One Bellman step; returns (new_row, xi_star_row).

    mode "closed" uses the Legendre form (identical to the value step);
    "grid" minimizes over a velocity grid with an optional Newton polish
    of the first-order condition L_xi = c + Dx v; "check" runs both and
    raises DualityMismatch when they disagree beyond tol_duality.
    """
    x_new, avg, slope = _parts(mesh, v_row, k)
    t_k = t_of_level(mesh, k)

    def closed():
        new = hj_step_v(model, mesh, c, v_row, k, h_trial=h, cfl="off")
        xi_star = np.asarray(model.H_p(x_new, t_k, c + slope), dtype=float)
        return new, xi_star

    def grid():
        xi_max = 1.0 / mesh.lam
        xis = np.linspace(-xi_max, xi_max, n_grid)
        obj = objective(model, mesh, c, v_row, k, h, xis)
        best = np.argmin(obj, axis=0)
        xi_best = xis[best]
        val_best = obj[best, np.arange(mesh.N)]
        if polish:
            xi_p = xi_best.copy()
            target = c + slope
            for _ in range(8):
                g = np.asarray(model.L_xi(x_new, t_k, xi_p), dtype=float) - target
                fd = 1e-6
                curv = (np.asarray(model.L_xi(x_new, t_k, xi_p + fd), dtype=float)
                        - np.asarray(model.L_xi(x_new, t_k, xi_p - fd), dtype=float)) / (2 * fd)
                curv = np.where(curv > 1e-12, curv, 1.0)
                step = g / curv
                xi_p = np.clip(xi_p - step, -xi_max, xi_max)
                if np.max(np.abs(step)) < 1e-14:
                    break
            lp = np.asarray(model.L(x_new, t_k, xi_p), dtype=float)
            val_p = avg + mesh.dt * (lp - c * xi_p - xi_p * slope + h)
            use = val_p < val_best
            xi_best = np.where(use, xi_p, xi_best)
            val_best = np.minimum(val_p, val_best)
        return val_best, xi_best

    if mode == "closed":
        return closed()
    if mode == "grid":
        return grid()
    if mode == "check":
        new_c, xi_c = closed()
        new_g, xi_g = grid()
        if tol_duality is None:
            tol_duality = 1e-7 * (1.0 + float(np.max(np.abs(v_row))))
        gap = float(np.max(np.abs(new_c - new_g)))
        if gap > tol_duality:
            j = int(np.argmax(np.abs(new_c - new_g)))
            raise DualityMismatch(
                f"closed and grid values differ by {gap:.3e} (tol {tol_duality:.3e}) "
                f"at site {j}; unconstrained control {xi_c[j]:.4g} vs window "
                f"{1.0 / mesh.lam:.4g}")
        return new_c, xi_c
    raise ValueError(f"unknown mode {mode!r}")


def value_multistep(model, mesh: MeshSpec, c: float, terminal_row: np.ndarray,
                    k_terminal: int, depth: int, h: float = 0.0,
                    mode: str = "closed", **kw):
    """Iterate the one-step operator depth times up from terminal data.

    Returns (rows, control_rows): rows[r] is the value row at level
    k_terminal + r (rows[0] is the terminal data); control_rows[r] holds
    the minimizing controls used to produce rows[r+1].
    """
    v = np.asarray(terminal_row, dtype=float).copy()
    rows = [v]
    controls = []
    for r in range(depth):
        v, xi = bellman_one_step(model, mesh, c, v, k_terminal + r, h=h, mode=mode, **kw)
        rows.append(v)
        controls.append(xi)
    return rows, controls


# ---------------------------------------------------------------------
# controls of a converged periodic solution


def minimizing_control(sol, model) -> np.ndarray:
    """Controls xi* at the odd sites of every level of the stored period.

    Row k of the result holds the controls at level-k sites: the control
    at (x_m, t_{k+1}) is H_p(x_m, t_k, c + Dx v[k]), i.e. level-k data
    pushed to the site above it.  Raises BoundViolation if any control
    leaves the CFL window.
    """
    mesh = sol.mesh
    nsteps = mesh.steps_per_period
    out = np.empty((nsteps, mesh.N))
    for k in range(nsteps):
        x_new = row_positions(mesh, "odd", k + 1)
        slope = slope_of_v(mesh, sol.v_field.row(k), k)
        out[(k + 1) % nsteps] = model.H_p(x_new, t_of_level(mesh, k), sol.c + slope)
    worst = float(np.max(np.abs(out)))
    if worst > (1.0 / mesh.lam) * (1.0 + 1e-12):
        raise BoundViolation(
            f"control magnitude {worst:.6g} exceeds the window 1/lam = {1.0 / mesh.lam:.6g}")
    return out


def control_field_on_cone(sol, control_rows: np.ndarray, cone: Cone) -> ControlField:
    """Wrap periodic control rows onto a backward cone for the walk DPs."""
    mesh = sol.mesh
    nsteps = mesh.steps_per_period
    rows = []
    for r in range(cone.depth):
        k = cone.level(r)
        off = m_offset("odd", k)
        sites = cone.sites(r)
        cols = ((sites - off) // 2) % mesh.N
        rows.append(control_rows[k % nsteps][cols])
    return ControlField(cone, rows)


@dataclass
class ExpectationCheck:
    origin_m: int
    horizon_periods: list
    residuals: list
    max_residual: float


def verify_lax_oleinik(sol, model, depth: int = 3, origins=None) -> ExpectationCheck:
    """Deep value identity: v at the origin equals expected cost-to-go.

    Runs the controlled walk of the converged minimizing controls down
    ``depth`` whole periods from each origin, accumulating the expected
    running cost level by level from the marginal laws, plus the source
    term and the expected terminal value.  Exact in exact arithmetic; in
    floats the residual collects one scheme tolerance per level.
    """
    mesh = sol.mesh
    nsteps = mesh.steps_per_period
    controls = minimizing_control(sol, model)
    if origins is None:
        origins = list(range(1, 2 * mesh.N, max(2, (2 * mesh.N) // 6)))
    k_top = nsteps  # top of a period: row 0 again by periodicity
    worst = 0.0
    horizons = list(range(1, depth + 1))
    residuals = []
    origin_res = []
    for origin in origins:
        origin = origin + (1 - (origin + k_top) % 2)  # force odd sublattice
        per_h = []
        for hor in horizons:
            d = hor * nsteps
            cone = Cone(mesh, origin, k_top, d)
            xi = control_field_on_cone(sol, controls, cone)
            # expected running cost via the marginals, level by level
            prob = np.array([1.0])
            cost = 0.0
            for r in range(d):
                k_here = cone.level(r)            # level carrying the control
                t_below = t_of_level(mesh, k_here - 1)
                x = cone.positions(r) % 1.0
                xi_row = xi.rows[r]
                lrun = np.asarray(model.L(x, t_below, xi_row), dtype=float) - sol.c * xi_row
                cost += float(prob @ lrun) * mesh.dt
                up = xi.prob_up(r)
                child = np.zeros(r + 2)
                child[: r + 1] += prob * (1.0 - up)
                child[1:] += prob * up
                prob = child
            # expected terminal value on the wrapped bottom row
            k_bot = k_top - d
            off = m_offset("odd", k_bot)
            cols = ((cone.sites(d) - off) // 2) % mesh.N
            terminal = float(prob @ sol.v_field.row(k_bot)[cols])
            total = cost + sol.h_delta * hor + terminal
            j0 = ((origin - m_offset("odd", k_top)) // 2) % mesh.N
            res = abs(float(sol.v_field.row(k_top)[j0]) - total)
            per_h.append(res)
            worst = max(worst, res)
        origin_res.append(per_h)
    residuals = [max(rs[i] for rs in origin_res) for i in range(len(horizons))]
    return ExpectationCheck(origins, horizons, residuals, worst)
