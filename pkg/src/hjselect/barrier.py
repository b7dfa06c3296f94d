"""Separatrices, prescribed-shock references, and numerical action barriers.

Between consecutive hyperbolic orbits the critical stationary momentum
has two branches; stitching them with downward jumps manufactures exact
stationary entropy solutions at computable c.  The minimal long-run
action from a base orbit (the barrier) is computed by min-plus value
iteration on the odd grid; which orbits a converged field treats as
smooth transition points is decided by fitting the unstable branch on
both sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .grid import MeshSpec, m_offset, row_positions
from .model import DriftGaugeModel, ForcedMechModel, MechModel
from .orbits import find_orbits
from .scheme import t_of_level

SENTINEL = 1e18


class NoSeparatrix(ValueError):
    pass


class ManifoldEscape(RuntimeError):
    pass


class InvalidChoice(ValueError):
    pass


class NotStabilized(RuntimeError):
    def __init__(self, msg, defect=None):
        super().__init__(msg)
        self.defect = defect


class AmbiguousFit(RuntimeError):
    pass


# ---------------------------------------------------------------------
# separatrix branches


@dataclass
class SeparatrixData:
    model_name: str
    wells: list
    segments: list                  # (a_i, a_{i+1} in the cover), cyclic
    c0: float
    c1: float
    level: float                    # energy of the critical branches
    upper: object = field(repr=False)   # callable y -> +branch momentum
    lower: object = field(repr=False)
    branch: object = field(repr=False)  # callable (i, x, t) -> unstable-branch momentum
    drift: object = field(repr=False, default=None)   # callable t -> frame shift
    gauge: object = field(repr=False, default=None)   # callable (y, t) -> gauge slope

    def frame(self, x, t):
        """Coordinate in which the branches are stationary."""
        if self.drift is None:
            return np.asarray(x, dtype=float)
        return np.asarray(x, dtype=float) - self.drift(t)

    def gauge_slope(self, y, t):
        if self.gauge is None:
            return np.zeros_like(np.asarray(y, dtype=float))
        return self.gauge(y, t)


def _mech_parts(model):
    if isinstance(model, DriftGaugeModel):
        potential = model.potential
    elif isinstance(model, MechModel):
        potential = model.potential
    else:
        raise NoSeparatrix(
            f"model {model.name!r} exposes no potential wells, so there is "
            "no critical separatrix to compute")
    wells = model.well_positions()
    if not wells:
        raise NoSeparatrix(f"model {model.name!r} has no potential wells")
    return potential, sorted(float(w) for w in wells)


def compute_separatrix(model, level: float | None = None) -> SeparatrixData:
    """Critical-energy momentum branches between consecutive orbits.

    For autonomous wells the branches are the energy-conservation closed
    form at the level of the hyperbolic points; the drift-gauge family
    reuses them in the co-moving frame with the gauge slope added, which
    keeps the result exact for time-periodic data.  The returned
    branches are callables, so interpolation density is a non-issue.
    Genuinely forced wells must grow their invariant manifolds instead;
    see attempt_forced_separatrix.
    """
    if isinstance(model, ForcedMechModel) and getattr(model, "eps", 0.0) != 0.0:
        return attempt_forced_separatrix(model)
    potential, wells = _mech_parts(model)
    f_min = model.f_min()
    if level is None:
        level = -f_min

    def upper(y):
        y = np.asarray(y, dtype=float)
        return np.sqrt(np.maximum(2.0 * (potential(y, 0) - f_min + (level + f_min)), 0.0))

    def lower(y):
        return -upper(y)

    is_drift = isinstance(model, DriftGaugeModel)
    if is_drift:
        def drift_fn(t):
            return float(model.drift(np.asarray(t, dtype=float), 0))

        def gauge_slope(y, t):
            return model.gauge_x(y, 1) * float(model.gauge_t(np.asarray(t, dtype=float), 0))
    else:
        drift_fn = None

        def gauge_slope(y, t):
            return np.zeros_like(np.asarray(y, dtype=float))

    wells_arr = np.asarray(wells)

    def branch(i, x, t):
        # unstable-branch momentum around well i: lower to its left,
        # upper to its right, folded onto the nearest periodic image
        y = np.asarray(x, dtype=float) - (drift_fn(t) if drift_fn else 0.0)
        z = ((y - wells_arr[i] + 0.5) % 1.0) - 0.5
        return np.sign(z) * upper(y) + gauge_slope(y, t)

    c1, c1_err = quad(lambda y: upper(y), 0.0, 1.0, points=wells, limit=200)
    segs = [(wells[i], wells[(i + 1) % len(wells)] + (1.0 if i == len(wells) - 1 else 0.0))
            for i in range(len(wells))]
    return SeparatrixData(
        model_name=model.name, wells=wells, segments=segs,
        c0=-c1, c1=c1, level=level, upper=upper, lower=lower, branch=branch,
        drift=drift_fn, gauge=gauge_slope if is_drift else None)


def attempt_forced_separatrix(model, n_seed: int = 40, n_iter: int = 12,
                              tol_connect: float = 1e-6) -> SeparatrixData:
    """Grow unstable manifolds of a forced model and test for reconnection.

    The unstable segment of each orbit is pushed through the period map
    until its sweep reaches the next orbit; it must then land on that
    orbit's stable segment for a continuous separatrix to exist.  Forced
    wells generically split, so the expected outcome is ManifoldEscape
    carrying the measured gap.
    """
    from .orbits import _flow_with_stm, _unstable_direction

    orbits = find_orbits(model)
    if not orbits:
        raise NoSeparatrix(f"model {model.name!r} has no hyperbolic orbits")
    o = orbits[0]
    nxt = orbits[1] if len(orbits) > 1 else o
    target_x = nxt.x0 + (1.0 if nxt.x0 <= o.x0 else 0.0)
    vu = _unstable_direction(o)
    mu = abs(o.multipliers[0].real)
    eps0 = 1e-6
    s = eps0 * np.geomspace(1.0, mu, n_seed, endpoint=False)
    pts = np.array([o.x0, o.p0])[None, :] + s[:, None] * vu[None, :]
    # stable direction of the target orbit, from its monodromy
    mono_n = nxt._dense.y[2:, -1].reshape(2, 2)
    mu_s = nxt.multipliers[1].real
    vs = np.array([mono_n[0, 1], mu_s - mono_n[0, 0]])
    if np.max(np.abs(vs)) < 1e-14:
        vs = np.array([mu_s - mono_n[1, 1], mono_n[1, 0]])
    vs = vs / np.linalg.norm(vs)
    p_cap = model.momentum_bound
    swept = []
    for it in range(n_iter):
        nxt_pts = []
        for z in pts:
            zq, _, _ = _flow_with_stm(model, z, o.q, rtol=1e-10)
            nxt_pts.append(zq)
        pts = np.asarray(nxt_pts)
        swept.append(pts.copy())
        if np.any(np.abs(pts[:, 1]) > p_cap):
            raise ManifoldEscape(
                f"unstable manifold of orbit at x0={o.x0:.4g} left the momentum "
                f"window before connecting")
        crossed = pts[:, 0] >= target_x - 0.05
        if np.any(crossed):
            # distance from the crossing points to the stable line at the target
            d = pts[crossed] - np.array([target_x, nxt.p0])
            gap = np.min(np.abs(d[:, 0] * vs[1] - d[:, 1] * vs[0]))
            if gap > tol_connect:
                raise ManifoldEscape(
                    f"unstable manifold misses the stable one at the next orbit "
                    f"by {gap:.3e} (tol {tol_connect:.1e}); no continuous separatrix")
            break
    else:
        raise ManifoldEscape(
            f"unstable manifold of orbit at x0={o.x0:.4g} never reached the "
            f"next orbit within {n_iter} period-map iterates")
    raise NotImplementedError(
        "connected forced separatrix found; sampling it is not implemented")


# ---------------------------------------------------------------------
# prescribed-shock references


@dataclass
class ReferenceProfile:
    c: float
    choices: list
    selected: tuple                 # orbit indices showing the unstable branch
    momentum: object = field(repr=False)    # callable (x, t=0.0) -> c + u
    slope0: object = field(repr=False)      # callable x -> u0(x) at t = 0
    shock_paths: list = field(default_factory=list, repr=False)  # callables t -> x


def construct_reference(separatrix: SeparatrixData, choices) -> ReferenceProfile:
    """Stationary-in-shape entropy solution with prescribed shocks.

    choices gives one switch position per segment between consecutive
    wells: upper branch from the left well to the switch, lower branch
    from the switch onward.  A switch at either end of its segment
    degenerates to a single-branch segment.  Only downward jumps are
    entropic, which the upper-then-lower pattern guarantees; a switch
    outside its segment would need an upward jump and is rejected.
    """
    wells = separatrix.wells
    n = len(wells)
    choices = [float(y) for y in choices]
    if len(choices) != n:
        raise InvalidChoice(
            f"{len(choices)} switch positions for {n} segments")
    for i, y in enumerate(choices):
        lo, hi = separatrix.segments[i]
        if not (lo <= y <= hi):
            raise InvalidChoice(
                f"switch {y:.6g} outside segment [{lo:.6g}, {hi:.6g}]; the "
                "jump there would go upward")

    def mech_momentum(y):
        y = np.asarray(y, dtype=float)
        yy = y % 1.0
        out = np.empty_like(yy)
        flat = out.reshape(-1)
        yflat = yy.reshape(-1)
        for j, yj in enumerate(yflat):
            yj_c = yj + (1.0 if yj < wells[0] else 0.0)
            i = max(ix for ix in range(n) if wells[ix] <= yj_c + 1e-15)
            up = yj_c <= choices[i]
            flat[j] = separatrix.upper(yj) if up else separatrix.lower(yj)
        return out.reshape(yy.shape)

    c_val, _ = quad(mech_momentum, 0.0, 1.0,
                    points=sorted(set(wells) | set(c % 1.0 for c in choices)),
                    limit=200)

    drift_fn = separatrix.drift

    def momentum(x, t=0.0):
        y = np.asarray(x, dtype=float) - (drift_fn(t) if drift_fn else 0.0)
        return mech_momentum(y) + separatrix.gauge_slope(y, t)

    def slope0(x):
        return momentum(x, 0.0) - c_val

    selected = tuple(
        i for i in range(n)
        if choices[i] > separatrix.segments[i][0] + 1e-12
        and choices[(i - 1) % n] < separatrix.segments[(i - 1) % n][1] - 1e-12)
    shocks = []
    for i, y in enumerate(choices):
        lo, hi = separatrix.segments[i]
        if lo + 1e-12 < y < hi - 1e-12:
            shocks.append(_transported_path(y, drift_fn))
    return ReferenceProfile(c=c_val, choices=choices, selected=selected,
                            momentum=momentum, slope0=slope0, shock_paths=shocks)


def _transported_path(y0, drift_fn):
    def path(t):
        return y0 + (drift_fn(t) if drift_fn else 0.0)
    return path


def reference_for_c(separatrix: SeparatrixData, c_target: float,
                    tol: float = 1e-12, order=None) -> ReferenceProfile:
    """Reference profile hitting a prescribed c, built by area filling.

    Starting from the all-lower profile (c = c0), whole segments are
    flipped to the upper branch in order, each adding twice its branch
    area, until the remainder fits inside one segment; that segment's
    switch is then placed by bisection.  Any c in [c0, c1] is reachable;
    anything outside is InvalidChoice.

    order, if given, is the sequence of segment indices to flip.  The
    first fully flipped segment leaves its left well showing the
    unstable branch on both sides, so order=[i, ...] is how callers ask
    for a profile calibrated at well i.
    """
    if not (separatrix.c0 - tol <= c_target <= separatrix.c1 + tol):
        raise InvalidChoice(
            f"c={c_target:.6g} outside the plateau "
            f"[{separatrix.c0:.6g}, {separatrix.c1:.6g}]")
    n = len(separatrix.wells)
    if order is None:
        order = list(range(n))
    elif sorted(order) != list(range(n)):
        raise InvalidChoice(f"order {order!r} is not a permutation of 0..{n - 1}")
    areas = []
    for lo, hi in separatrix.segments:
        a, _ = quad(lambda y: separatrix.upper(y), lo, hi, limit=200)
        areas.append(a)
    choices = [separatrix.segments[i][0] for i in range(n)]
    running = separatrix.c0
    for i in order:
        lo, hi = separatrix.segments[i]
        if running + 2.0 * areas[i] <= c_target + tol:
            choices[i] = hi
            running += 2.0 * areas[i]
            continue
        # partial switch in this segment by bisection on the area integral
        need = 0.5 * (c_target - running)
        a_lo, a_hi = lo, hi
        for _ in range(100):
            mid = 0.5 * (a_lo + a_hi)
            got, _ = quad(lambda y: separatrix.upper(y), lo, mid, limit=200)
            if got < need:
                a_lo = mid
            else:
                a_hi = mid
        choices[i] = 0.5 * (a_lo + a_hi)
        break
    return construct_reference(separatrix, choices)


# ---------------------------------------------------------------------
# numerical action barrier by min-plus value iteration


@dataclass
class BarrierField:
    mesh: MeshSpec
    c: float
    h_used: float
    x0: float
    base_index: int
    rows: np.ndarray = field(repr=False)   # (steps_per_period, N), odd sites
    periods_used: int
    defect: float
    stabilized: bool

    def row(self, k: int) -> np.ndarray:
        return self.rows[k % self.mesh.steps_per_period]

    def positions(self, k: int) -> np.ndarray:
        return row_positions(self.mesh, "odd", k)


def chebyshev_velocities(n_vel: int, xi_max: float) -> np.ndarray:
    """Endpoint-including Chebyshev nodes on [-xi_max, xi_max]."""
    return xi_max * np.cos(np.pi * np.arange(n_vel) / (n_vel - 1))


class _MinPlusEngine:
    """One period of min-plus sweeps, with per-parity index tables.

    Feet x_j - xi dt land at a uniform shift of the previous level's
    grid (the staggering offsets differ by one dx), so each velocity
    needs only a roll index and an interpolation weight, fixed per level
    parity.
    """

    def __init__(self, model, mesh: MeshSpec, c: float, h: float, n_vel: int):
        self.model, self.mesh, self.c, self.h = model, mesh, c, h
        self.xi = chebyshev_velocities(n_vel, 1.0 / mesh.lam)
        N, dx, dt = mesh.N, mesh.dx, mesh.dt
        self.idx = {}
        self.wgt = {}
        for par in (0, 1):
            off_from = m_offset("odd", par)
            off_to = m_offset("odd", par + 1)
            delta = (off_to - off_from) * dx - self.xi * dt
            s = delta / (2.0 * dx)
            q = np.floor(s).astype(int)
            self.wgt[par] = (s - q)[:, None]
            base = np.arange(N)[None, :]
            self.idx[par] = (base + q[:, None]) % N
        self.time_invariant = self._probe_time_invariant()
        self._cost_cache = {}

    def _probe_time_invariant(self) -> bool:
        xs = np.linspace(0.0, 1.0, 7)
        ref = self.model.L(xs, 0.0, 0.3 * np.ones_like(xs))
        for t in (0.29, 0.71):
            if np.max(np.abs(self.model.L(xs, t, 0.3 * np.ones_like(xs)) - ref)) > 1e-13:
                return False
        return True

    def cost(self, level: int) -> np.ndarray:
        nsteps = self.mesh.steps_per_period
        key = level % 2 if self.time_invariant else level % nsteps
        cached = self._cost_cache.get(key)
        if cached is not None:
            return cached
        x_new = row_positions(self.mesh, "odd", level + 1)
        t = t_of_level(self.mesh, level)
        xi = self.xi[:, None]
        lval = self.model.L(x_new[None, :], t, xi) - self.c * xi + self.h
        out = lval * self.mesh.dt
        # cache everything for autonomous models, else only if modest
        if self.time_invariant or nsteps * self.xi.size * self.mesh.N <= 8_000_000:
            self._cost_cache[key] = out
        return out

    def step(self, w: np.ndarray, level: int) -> np.ndarray:
        par = level % 2
        idx = self.idx[par]
        wl = w[idx]
        wr = w[(idx + 1) % self.mesh.N]
        wg = self.wgt[par]
        interp = (1.0 - wg) * wl + wg * wr
        return np.minimum((interp + self.cost(level)).min(axis=0), SENTINEL)


def peierls_one_step(model, mesh: MeshSpec, c: float, h: float,
                     w: np.ndarray, level: int, n_vel: int = 129) -> np.ndarray:
    """Single min-plus update, exposed for the fixed-point invariant."""
    return _MinPlusEngine(model, mesh, c, h, n_vel).step(np.asarray(w, dtype=float), level)


def peierls_numeric(model, mesh: MeshSpec, c: float, x0: float, h: float,
                    T_max: int = 200, tol_stab: float = 1e-5,
                    n_vel: int = 129) -> BarrierField:
    """Minimal long-run compensated action from (x0, 0) on the odd grid.

    Min-plus value iteration from a point source: zero in the cell
    containing x0, sentinel elsewhere; the running minimum over whole
    periods realizes the large-time infimum, and iteration stops when
    that minimum moves less than tol_stab in one period.
    """
    nsteps = mesh.steps_per_period
    engine = _MinPlusEngine(model, mesh, c, h, n_vel)
    off = m_offset("odd", 0)
    base_index = int(np.round((x0 / mesh.dx - off) / 2.0)) % mesh.N
    w = np.full(mesh.N, SENTINEL)
    w[base_index] = 0.0
    runmin = w.copy()
    defect = np.inf
    stabilized = False
    period = 0
    for period in range(1, int(T_max) + 1):
        for k in range(nsteps):
            w = engine.step(w, (period - 1) * nsteps + k)
        new_runmin = np.minimum(runmin, w)
        defect = float(np.max(np.abs(new_runmin - runmin)))
        runmin = new_runmin
        if defect < tol_stab:
            stabilized = True
            break
    if not stabilized:
        raise NotStabilized(
            f"running minimum still moved {defect:.3e} per period after "
            f"{T_max} periods (tol {tol_stab:.1e})", defect=defect)
    rows = np.empty((nsteps, mesh.N))
    rows[0] = runmin
    w = runmin.copy()
    for k in range(nsteps - 1):
        w = engine.step(w, k)
        rows[k + 1] = w
    return BarrierField(mesh=mesh, c=c, h_used=h, x0=x0, base_index=base_index,
                        rows=rows, periods_used=period, defect=defect,
                        stabilized=stabilized)


# ---------------------------------------------------------------------
# transition detection


@dataclass
class DetectionReport:
    selected: tuple
    ambiguous: tuple
    errors: list                    # per-orbit sup discrepancy, worse side
    side_errors: list               # per-orbit (left, right)
    tol_fit: list
    delta: float
    theta_hat: float

    def __contains__(self, i):
        return i in self.selected


def detect_transitions(sol, separatrix: SeparatrixData, orbits, delta: float,
                       tol_fit: float | None = None,
                       strict: bool = False) -> DetectionReport:
    """Which orbits the converged field passes through on the unstable branch.

    For every orbit the momentum c + u of the solution is compared with
    the orbit's unstable-branch momentum on both sides, at every time
    slice, inside a window of radius delta around the orbit position.
    An orbit whose worse-side discrepancy stays below tol_fit counts as
    a transition point; between tol_fit and twice that it is reported
    as ambiguous (raised only when strict).  Also measures the largest
    one-sided slope of u over the windows, the equi-Lipschitz diagnostic
    the selection argument assumes but cannot prove.
    """
    mesh = sol.mesh
    nsteps = mesh.steps_per_period
    gaps = [abs(separatrix.segments[i][1] - separatrix.segments[i][0])
            for i in range(len(separatrix.wells))]
    if delta >= 0.5 * min(gaps):
        raise ValueError(
            f"delta={delta:.4g} reaches past half the smallest orbit gap "
            f"{min(gaps):.4g}")
    n_orb = len(orbits)
    sup_side = np.zeros((n_orb, 2))
    branch_sup = np.zeros(n_orb)
    theta_hat = -np.inf
    for k in range(nsteps):
        t_k = t_of_level(mesh, k)
        x = row_positions(mesh, "even", k)
        p_num = sol.c + sol.u_field.row(k)
        du = (np.roll(p_num, -1) - p_num) / (2.0 * mesh.dx)
        for i, orb in enumerate(orbits):
            gamma = orb.state(t_k % orb.q)[0] % 1.0
            rel = ((x - gamma + 0.5) % 1.0) - 0.5
            left = (rel >= -delta) & (rel < 0.0)
            right = (rel > 0.0) & (rel <= delta)
            if not (np.any(left) and np.any(right)):
                raise ValueError(
                    f"delta={delta:.4g} captures no site on one side of the "
                    f"orbit at x0={orb.x0:.4g}; refine the mesh or widen delta")
            p_br = separatrix.branch(i, x, t_k)
            diff = np.abs(p_num - p_br)
            sup_side[i, 0] = max(sup_side[i, 0], float(np.max(diff[left])))
            sup_side[i, 1] = max(sup_side[i, 1], float(np.max(diff[right])))
            branch_sup[i] = max(branch_sup[i], float(np.max(np.abs(p_br[left | right] - sol.c))))
            window = left | right
            win_du = du[window & np.roll(window, -1)]
            if win_du.size:
                theta_hat = max(theta_hat, float(np.max(win_du)))
    errors = sup_side.max(axis=1)
    if tol_fit is None:
        tols = 5.0 * np.sqrt(mesh.dx) * (1.0 + branch_sup)
    else:
        tols = np.full(n_orb, float(tol_fit))
    selected = tuple(int(i) for i in range(n_orb) if errors[i] < tols[i])
    ambiguous = tuple(int(i) for i in range(n_orb)
                      if tols[i] <= errors[i] < 2.0 * tols[i])
    if strict and ambiguous:
        raise AmbiguousFit(
            f"orbits {ambiguous} land between tol_fit and 2 tol_fit: "
            + ", ".join(f"{errors[i]:.3e} vs {tols[i]:.3e}" for i in ambiguous))
    return DetectionReport(selected=selected, ambiguous=ambiguous,
                           errors=[float(e) for e in errors],
                           side_errors=[(float(a), float(b)) for a, b in sup_side],
                           tol_fit=[float(t) for t in tols], delta=delta,
                           theta_hat=float(theta_hat))
