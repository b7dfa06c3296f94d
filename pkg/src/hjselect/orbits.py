"""Hyperbolic periodic characteristics and the refinement-limit criterion.

The characteristic flow x' = H_p, p' = -H_x on the space-time torus has,
for the models here, finitely many integer-period orbits that are
hyperbolic fixed points of the period map.  Each carries a periodic
solution of the unstable Riccati equation, the curvature of the value
branch calibrated on it, and a pair of integrals of that curvature
decides which orbit the staggered scheme locks onto as the grid refines:
the orbit minimizing

    gamma(lam) = integral of (zeta_xx - lam^2 zeta_tt) over one period

wins, where zeta is the branch and lam the time-to-space mesh ratio.
zeta_xx is the Riccati solution w; the time derivatives follow from
differentiating the evolution equation along the orbit, so no value
field is ever constructed here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

_RTOL = 1e-11
_ATOL = 1e-13


class NewtonDiverged(RuntimeError):
    pass


class NotHyperbolic(RuntimeError):
    pass


class RiccatiBlowup(RuntimeError):
    pass


class NotPeriodic(RuntimeError):
    pass


def _flow_with_stm(model, z0: np.ndarray, q: int, rtol: float = _RTOL,
                   dense: bool = False):
    """Integrate (x, p) and the state-transition matrix over [0, q]."""

    def rhs(t, y):
        x, p = y[0], y[1]
        a11 = model.H_px(x, t, p)
        a12 = model.H_pp(x, t, p)
        a21 = -model.H_xx(x, t, p)
        m = y[2:].reshape(2, 2)
        dm = np.array([[a11, a12], [a21, -a11]]) @ m
        return np.array([model.H_p(x, t, p), -model.H_x(x, t, p),
                         dm[0, 0], dm[0, 1], dm[1, 0], dm[1, 1]])

    y0 = np.concatenate([z0, [1.0, 0.0, 0.0, 1.0]])
    sol = solve_ivp(rhs, (0.0, float(q)), y0, method="DOP853", rtol=rtol,
                    atol=_ATOL, dense_output=dense)
    if not sol.success:
        raise NewtonDiverged(f"flow integration failed: {sol.message}")
    zq = sol.y[:2, -1]
    monodromy = sol.y[2:, -1].reshape(2, 2)
    return zq, monodromy, sol


@dataclass(eq=False)
class OrbitData:
    model_name: str
    q: int
    x0: float
    p0: float
    winding: int
    multipliers: tuple
    trace: float
    hyperbolic: bool
    shoot_residual: float
    t: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    _dense: object = field(repr=False, default=None, compare=False)

    def state(self, t):
        """(x, p) on the orbit at time t, t in [0, q]."""
        y = self._dense.sol(t)
        return y[0], y[1]

    def as_dict(self):
        # hyperbolic multipliers are real; keep pairs only when a
        # non-hyperbolic orbit sneaks through, so json stays happy
        mults = [complex(m).real if complex(m).imag == 0.0
                 else [complex(m).real, complex(m).imag]
                 for m in self.multipliers]
        return {
            "model": self.model_name, "q": self.q, "x0": self.x0,
            "p0": self.p0, "winding": self.winding,
            "multipliers": mults, "trace": self.trace,
            "hyperbolic": self.hyperbolic,
            "shoot_residual": self.shoot_residual,
        }


def _newton_orbit(model, x0: float, p0: float, q: int, max_iter: int = 30,
                  tol: float = 1e-12, tol_hyp: float = 1e-6) -> OrbitData | None:
    z = np.array([x0, p0], dtype=float)
    best = np.inf
    for _ in range(max_iter):
        zq, mono, _ = _flow_with_stm(model, z, q)
        res = zq - z
        res[0] -= np.round(res[0])
        nrm = float(np.max(np.abs(res)))
        if nrm < tol:
            break
        if nrm > 10.0 * best + 1.0 or not np.isfinite(nrm):
            return None
        best = min(best, nrm)
        jac = mono - np.eye(2)
        if abs(np.linalg.det(jac)) < 1e-12:
            return None
        z = z - np.linalg.solve(jac, res)
        z[0] = z[0] % 1.0
    else:
        return None
    # converged; one clean pass with dense output for downstream use
    zq, mono, sol = _flow_with_stm(model, z, q, dense=True)
    winding = int(np.round(zq[0] - z[0]))
    mu = np.linalg.eigvals(mono)
    order = np.argsort(-np.abs(mu))
    mu = mu[order]
    tr = float(np.trace(mono))
    ts = np.linspace(0.0, float(q), 257)
    ys = sol.sol(ts)
    return OrbitData(
        model_name=model.name, q=q, x0=float(z[0] % 1.0), p0=float(z[1]),
        winding=winding,
        multipliers=(complex(mu[0]), complex(mu[1])), trace=tr,
        hyperbolic=abs(tr) > 2.0 + tol_hyp, shoot_residual=nrm,
        t=ts, x=ys[0], p=ys[1], _dense=sol)


def refine_orbit(model, x0: float, p0: float, q: int = 1, **kw) -> OrbitData:
    """Newton-polish a single starting guess; raises NewtonDiverged."""
    orb = _newton_orbit(model, x0, p0, q, **kw)
    if orb is None:
        raise NewtonDiverged(
            f"shooting from (x0={x0:.6g}, p0={p0:.6g}) did not converge")
    return orb


def find_orbits(model, q: int = 1, starts=None, dedup_tol: float = 1e-5,
                hyperbolic_only: bool = True, tol_hyp: float = 1e-6) -> list:
    """Locate the integer-period orbits of the characteristic flow.

    Newton shooting on the period-q map from a spread of starts; seeds
    default to the potential wells (where the model exposes them) plus a
    uniform sweep at p = 0.  Duplicates are merged on (x0, p0, winding);
    the list comes back sorted by x0.  Shooting happily converges onto
    members of degenerate families too (rotating tori of an autonomous
    flow, elliptic centers), so by default only orbits whose monodromy
    trace clears 2 + tol_hyp are kept; pass hyperbolic_only=False to see
    everything the search hit.
    """
    if starts is None:
        xs = list(np.linspace(0.0, 1.0, 9)[:-1])
        wells = getattr(model, "well_positions", None)
        if wells is not None:
            xs.extend(float(w) for w in wells())
        starts = [(x, 0.0) for x in xs]
    found = []
    for x0, p0 in starts:
        orb = _newton_orbit(model, x0, p0, q, tol_hyp=tol_hyp)
        if orb is None:
            continue
        if hyperbolic_only and not orb.hyperbolic:
            continue
        dup = False
        for other in found:
            dx = abs(orb.x0 - other.x0)
            dx = min(dx, 1.0 - dx)
            if (dx < dedup_tol and abs(orb.p0 - other.p0) < dedup_tol
                    and orb.winding == other.winding):
                dup = True
                break
        if not dup:
            found.append(orb)
    found.sort(key=lambda o: o.x0)
    return found


# ---------------------------------------------------------------------
# Riccati curvature along an orbit


@dataclass
class RiccatiData:
    t: np.ndarray
    w: np.ndarray
    w0: float
    periodic_defect: float


def _unstable_direction(orbit: OrbitData) -> np.ndarray:
    if not orbit.hyperbolic:
        raise NotHyperbolic(
            f"orbit at x0={orbit.x0:.6g} has |trace| = {abs(orbit.trace):.6g} <= 2")
    mono = orbit._dense.y[2:, -1].reshape(2, 2)
    mu = orbit.multipliers[0].real
    # eigenvector for the expanding multiplier, from the adjugate
    v = np.array([mono[0, 1], mu - mono[0, 0]])
    if np.max(np.abs(v)) < 1e-14:
        v = np.array([mu - mono[1, 1], mono[1, 0]])
    return v / np.linalg.norm(v)


def riccati_unstable(orbit: OrbitData, model, n_samples: int = 257,
                     tol_periodic: float = 1e-8) -> RiccatiData:
    """Periodic curvature w = zeta_xx along the orbit.

    Transports the expanding direction (a, b) of the monodromy with the
    linearized flow and reads off w = b / a; the unstable branch keeps a
    bounded away from zero, so a sign change means the curvature left
    through infinity and the branch is not calibrated here.
    """
    v = _unstable_direction(orbit)
    if abs(v[0]) < 1e-10:
        raise RiccatiBlowup(
            f"expanding direction at x0={orbit.x0:.6g} is vertical")
    ts = np.linspace(0.0, float(orbit.q), n_samples)
    ys = orbit._dense.sol(ts)
    mts = ys[2:].reshape(2, 2, -1)
    a = mts[0, 0] * v[0] + mts[0, 1] * v[1]
    b = mts[1, 0] * v[0] + mts[1, 1] * v[1]
    if np.min(np.abs(a)) < 1e-10 * np.max(np.abs(a)) or np.any(a * a[0] <= 0):
        raise RiccatiBlowup(
            f"curvature along orbit at x0={orbit.x0:.6g} blows up")
    w = b / a
    defect = abs(w[-1] - w[0])
    if defect > tol_periodic * (1.0 + abs(w[0])):
        raise NotPeriodic(
            f"riccati defect {defect:.3e} over one period at x0={orbit.x0:.6g}")
    return RiccatiData(t=ts, w=w, w0=float(w[0]), periodic_defect=defect)


# ---------------------------------------------------------------------
# the selection integrals


@dataclass
class SelectionIntegrals:
    orbit: OrbitData
    gamma_tilde: float
    t_integral: float
    quad_error: float

    def gamma(self, lam):
        return self.gamma_tilde - np.asarray(lam) ** 2 * self.t_integral

    def as_dict(self, lam_grid=None):
        d = self.orbit.as_dict()
        d.update(gamma_tilde=self.gamma_tilde, t_integral=self.t_integral,
                 quad_error=self.quad_error)
        if lam_grid is not None:
            d["lam_grid"] = list(np.asarray(lam_grid, dtype=float))
            d["gamma"] = [float(g) for g in self.gamma(np.asarray(lam_grid))]
        return d


def selection_integrals(orbit: OrbitData, model, rtol: float = _RTOL) -> SelectionIntegrals:
    """Integrals of the branch curvatures over one period.

    gamma_tilde accumulates zeta_xx = w; the time part accumulates
    zeta_tt, obtained by differentiating the evolution equation along
    the orbit twice in t:

        zeta_xt = -H_x - H_p zeta_xx
        zeta_tt = -H_t - H_p zeta_xt

    (the flat level drops out over a period).  Everything rides along a
    single augmented integration, so the error is the ODE tolerance; the
    returned quad_error compares against a coarser pass.
    """
    v = _unstable_direction(orbit)
    if abs(v[0]) < 1e-10:
        raise RiccatiBlowup(
            f"expanding direction at x0={orbit.x0:.6g} is vertical")

    def run(rt):
        def rhs(t, y):
            x, p, a, b = y[0], y[1], y[2], y[3]
            if abs(a) < 1e-13:
                raise RiccatiBlowup(
                    f"curvature blows up during quadrature at x0={orbit.x0:.6g}")
            hp = model.H_p(x, t, p)
            hx = model.H_x(x, t, p)
            a11 = model.H_px(x, t, p)
            a12 = model.H_pp(x, t, p)
            a21 = -model.H_xx(x, t, p)
            w = b / a
            zxt = -hx - hp * w
            ztt = -model.H_t(x, t, p) - hp * zxt
            return np.array([hp, -hx,
                             a11 * a + a12 * b, a21 * a - a11 * b,
                             w, ztt])
        y0 = np.array([orbit.x0, orbit.p0, v[0], v[1], 0.0, 0.0])
        sol = solve_ivp(rhs, (0.0, float(orbit.q)), y0, method="DOP853",
                        rtol=rt, atol=_ATOL)
        if not sol.success:
            raise RiccatiBlowup(f"quadrature failed: {sol.message}")
        return float(sol.y[4, -1]), float(sol.y[5, -1])

    gt, ti = run(rtol)
    gt_c, ti_c = run(rtol * 1e3)
    err = max(abs(gt - gt_c), abs(ti - ti_c))
    return SelectionIntegrals(orbit=orbit, gamma_tilde=gt, t_integral=ti,
                              quad_error=err)


@dataclass
class SelectionPrediction:
    lam: float
    winner: int
    margin: float
    gammas: list
    tie: bool


def predict_selection(integrals: list, lam: float,
                      tie_tol: float | None = None) -> SelectionPrediction:
    """Which orbit the scheme should lock onto at mesh ratio lam.

    The winner minimizes gamma(lam); margin is the gap to the runner-up
    (infinite when there is only one orbit).  A margin below tie_tol is
    flagged as a tie rather than resolved.
    """
    gammas = [float(s.gamma(lam)) for s in integrals]
    order = np.argsort(gammas)
    winner = int(order[0])
    if len(gammas) == 1:
        return SelectionPrediction(lam=lam, winner=0, margin=np.inf,
                                   gammas=gammas, tie=False)
    margin = gammas[int(order[1])] - gammas[winner]
    if tie_tol is None:
        tie_tol = 1e-6 * (1.0 + abs(gammas[winner]))
    return SelectionPrediction(lam=lam, winner=winner, margin=margin,
                               gammas=gammas, tie=margin < tie_tol)


def lambda_crossing(a: SelectionIntegrals, b: SelectionIntegrals) -> float | None:
    """Mesh ratio where two orbits swap rank, if one lies in (0, 1]."""
    dt = a.t_integral - b.t_integral
    if abs(dt) < 1e-14:
        return None
    lam_sq = (a.gamma_tilde - b.gamma_tilde) / dt
    if lam_sq <= 0.0 or lam_sq > 1.0:
        return None
    return float(np.sqrt(lam_sq))


def orbit_report(integrals: list, lam_grid) -> str:
    """JSON report of every orbit with its integrals on a lam grid."""
    return json.dumps([s.as_dict(lam_grid) for s in integrals], indent=2)
