"""Controlled random walks on the backward light cone of a grid site.

A walk starts at an odd-sublattice site (x_n, t_{l+1}) and steps back one
level at a time, moving +dx with probability 1/2 - lam xi / 2 and -dx
with probability 1/2 + lam xi / 2, where xi is the control at the site
being left.  Everything here works in unwrapped coordinates; controls
fed from periodic fields are wrapped on evaluation.

The compensated walk subtracts the accumulated control drift:

    eta^k = gamma^{l+1} - sum_{k < k' <= l+1} xi(gamma^{k'}, t_{k'}) dt

Its gap z = gamma - eta has conditionally centered increments, so its
second moment is a sum of per-level quantities available from the plain
marginals; only the first absolute moment needs the joint distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import MeshSpec
from .scheme import t_of_level


class InvalidPath(ValueError):
    pass


class LipschitzViolated(RuntimeError):
    pass


class JointStateOverflow(RuntimeError):
    """Exact joint DP exceeded its state budget; use mc_samples instead."""


@dataclass(frozen=True)
class Cone:
    """Backward cone of depth levels below an odd-sublattice origin."""

    mesh: MeshSpec
    origin_m: int
    k_top: int
    depth: int

    def __post_init__(self):
        if (self.origin_m + self.k_top) % 2 != 1:
            raise ValueError("cone origin must sit on the odd sublattice")
        if self.depth < 1:
            raise ValueError("cone depth must be at least one level")

    def sites(self, r: int) -> np.ndarray:
        """Site indices m at r levels below the origin (r = 0..depth)."""
        if not 0 <= r <= self.depth:
            raise ValueError(f"level offset r={r} outside 0..{self.depth}")
        return self.origin_m - r + 2 * np.arange(r + 1)

    def positions(self, r: int) -> np.ndarray:
        return self.sites(r) * self.mesh.dx

    def level(self, r: int) -> int:
        return self.k_top - r

    def duration(self, r: int) -> float:
        """Elapsed time t_{l+1} - t_k down to level offset r."""
        return r * self.mesh.dt


@dataclass
class ControlField:
    """Controls on the cone levels that still have a step below them.

    rows[r] holds xi at the r+1 sites of level k_top - r, r = 0..depth-1.
    The step-probability bound |lam xi| <= 1 is enforced on construction.
    """

    cone: Cone
    rows: list

    def __post_init__(self):
        lam = self.cone.mesh.lam
        if len(self.rows) != self.cone.depth:
            raise ValueError(f"need {self.cone.depth} control rows, got {len(self.rows)}")
        clean = []
        for r, row in enumerate(self.rows):
            row = np.asarray(row, dtype=float)
            if row.shape != (r + 1,):
                raise ValueError(f"control row {r} must have shape ({r + 1},)")
            if np.max(np.abs(row)) * lam > 1.0 + 1e-12:
                raise ValueError(
                    f"control row {r} violates |xi| <= 1/lam = {1.0 / lam:.6g}")
            clean.append(row)
        self.rows = clean

    @classmethod
    def from_callable(cls, cone: Cone, f) -> "ControlField":
        """Sample xi = f(x, t) on the cone, wrapping into the periodic cell."""
        mesh = cone.mesh
        rows = []
        for r in range(cone.depth):
            x = cone.positions(r) % 1.0
            t = t_of_level(mesh, cone.level(r))
            rows.append(np.asarray(f(x, t), dtype=float) + np.zeros(r + 1))
        return cls(cone, rows)

    @classmethod
    def constant(cls, cone: Cone, xi0: float) -> "ControlField":
        return cls(cone, [np.full(r + 1, float(xi0)) for r in range(cone.depth)])

    def prob_up(self, r: int) -> np.ndarray:
        """Probability of stepping +dx from each site of level k_top - r."""
        return 0.5 - 0.5 * self.cone.mesh.lam * self.rows[r]


@dataclass
class ConeDistribution:
    """Marginal laws of the walk per level, with derived statistics.

    All positions are unwrapped.  sigma is the variance about the mean;
    sigma_tilde and d_tilde describe the gap to the drift-compensated
    companion walk and may be None if not requested.
    """

    cone: Cone
    marginals: list
    gamma_bar: np.ndarray
    sigma: np.ndarray
    sigma_tilde: np.ndarray | None = None
    d_tilde: np.ndarray | None = None
    empirical: bool = False
    meta: dict = field(default_factory=dict)

    def sigma_tilde_bound(self) -> np.ndarray:
        """(t_{l+1} - t_k) dx / lam per level, the universal gap bound."""
        cone = self.cone
        return np.array([cone.duration(r) * cone.mesh.dx / cone.mesh.lam
                         for r in range(cone.depth + 1)])


def path_density(cone: Cone, xi: ControlField, path) -> float:
    """Probability of one root-to-leaf site path [m^{l+1}, ..., m^{l+1-d}]."""
    path = np.asarray(path, dtype=int)
    if path.shape != (cone.depth + 1,):
        raise InvalidPath(f"path must list {cone.depth + 1} sites")
    if path[0] != cone.origin_m:
        raise InvalidPath(f"path must start at the origin site {cone.origin_m}")
    steps = np.diff(path)
    if np.any(np.abs(steps) != 1):
        raise InvalidPath("consecutive sites must differ by one space index")
    lam = cone.mesh.lam
    prob = 1.0
    for r, s in enumerate(steps):
        j = (path[r] - (cone.origin_m - r)) // 2
        xi_here = xi.rows[r][j]
        prob *= 0.5 - 0.5 * lam * xi_here if s == 1 else 0.5 + 0.5 * lam * xi_here
    return float(prob)


def marginals_dp(cone: Cone, xi: ControlField) -> ConeDistribution:
    """Exact per-level laws by forward (in depth) probability pushing."""
    mesh = cone.mesh
    marg = [np.array([1.0])]
    for r in range(cone.depth):
        p = marg[-1]
        up = xi.prob_up(r)
        child = np.zeros(r + 2)
        child[: r + 1] += p * (1.0 - up)   # -dx keeps the lower index
        child[1:] += p * up                # +dx moves one slot up
        marg.append(child)
    gbar = np.empty(cone.depth + 1)
    sig = np.empty(cone.depth + 1)
    for r, p in enumerate(marg):
        x = cone.positions(r)
        m1 = float(p @ x)
        gbar[r] = m1
        sig[r] = float(p @ (x - m1) ** 2)
    dist = ConeDistribution(cone, marg, gbar, sig)
    # second moment of the compensated gap: sum of dx^2 - xi^2 dt^2 under
    # the marginal at each control-carrying level
    st = np.zeros(cone.depth + 1)
    for r in range(cone.depth):
        inc = float(marg[r] @ (mesh.dx**2 - (xi.rows[r] * mesh.dt) ** 2))
        st[r + 1] = st[r] + inc
    dist.sigma_tilde = st
    return dist


def compensated_statistics(cone: Cone, xi: ControlField, *, depth_joint: int = 24,
                           state_budget: int = 4_000_000, mc_samples: int = 0,
                           seed: int = 0) -> ConeDistribution:
    """Marginals plus the compensated-gap statistics sigma_tilde, d_tilde.

    The first absolute moment d_tilde needs the joint law of (site, gap).
    Depths up to depth_joint run an exact dictionary DP (states are
    merged per distinct gap value); beyond that, or past state_budget,
    set mc_samples to estimate instead.
    """
    dist = marginals_dp(cone, xi)
    mesh = cone.mesh
    if cone.depth <= depth_joint:
        # state: (site slot, gap value) -> prob; gap z steps by +-dx + xi dt
        states: dict[tuple[int, float], float] = {(0, 0.0): 1.0}
        d_tilde = np.zeros(cone.depth + 1)
        count_max = 1
        for r in range(cone.depth):
            up = xi.prob_up(r)
            xi_row = xi.rows[r]
            nxt: dict[tuple[int, float], float] = {}
            for (j, z), prob in states.items():
                drift = xi_row[j] * mesh.dt
                key_up = (j + 1, z + mesh.dx + drift)
                key_dn = (j, z - mesh.dx + drift)
                pu = prob * up[j]
                nxt[key_up] = nxt.get(key_up, 0.0) + pu
                nxt[key_dn] = nxt.get(key_dn, 0.0) + (prob - pu)
            states = nxt
            count_max = max(count_max, len(states))
            if count_max > state_budget:
                raise JointStateOverflow(
                    f"joint DP grew past {state_budget} states at depth {r + 1}; "
                    "re-run with mc_samples set")
            d_tilde[r + 1] = sum(p * abs(k[1]) for k, p in states.items())
        dist.d_tilde = d_tilde
        dist.meta["joint_states_max"] = count_max
        return dist
    if mc_samples <= 0:
        raise JointStateOverflow(
            f"depth {cone.depth} exceeds depth_joint={depth_joint}; set mc_samples")
    emp = sample_paths(cone, xi, mc_samples, seed)
    dist.d_tilde = emp.d_tilde
    dist.meta["d_tilde_method"] = "monte-carlo"
    dist.meta["mc_samples"] = mc_samples
    return dist


@dataclass
class LipschitzReport:
    theta_used: float
    theta_required: float
    premise_ok: bool
    sigma: np.ndarray
    bound: np.ndarray
    holds: bool
    worst_level: int


def variance_under_lipschitz(cone: Cone, xi: ControlField,
                             theta: float | None = None) -> LipschitzReport:
    """Check the variance bound e^{4 theta T} / (4 theta lam) dx.

    The premise compares each control value against the two-point
    interpolation of its own row at the mean position of that level.  If
    theta is given and some site breaks the premise, LipschitzViolated
    is raised; with theta=None the smallest workable theta is used.
    """
    mesh = cone.mesh
    dist = marginals_dp(cone, xi)
    theta_req = 0.0
    worst = (-1, -1)
    for r in range(cone.depth):
        x = cone.positions(r)
        g = dist.gamma_bar[r]
        row = xi.rows[r]
        # interpolate the row at the mean position (clamped to the hull)
        gc = min(max(g, x[0]), x[-1])
        if len(x) == 1:
            xi_star = row[0]
        else:
            j = min(int((gc - x[0]) // (2 * mesh.dx)), len(x) - 2)
            w = (gc - x[j]) / (2 * mesh.dx)
            xi_star = (1.0 - w) * row[j] + w * row[j + 1]
        dists = np.abs(x - g)
        devs = np.abs(row - xi_star)
        mask = dists > 1e-14
        if np.any(mask):
            ratios = devs[mask] / dists[mask]
            rmax = float(ratios.max())
            if rmax > theta_req:
                theta_req = rmax
                worst = (r, int(np.argmax(ratios)))
    if theta is not None and theta_req > theta * (1.0 + 1e-12):
        raise LipschitzViolated(
            f"premise fails: needs theta >= {theta_req:.6g} (given {theta}); "
            f"worst at level offset {worst[0]}")
    theta_used = theta if theta is not None else max(theta_req, 1e-12)
    T = np.array([cone.duration(r) for r in range(cone.depth + 1)])
    bound = np.exp(4.0 * theta_used * T) / (4.0 * theta_used * mesh.lam) * mesh.dx
    ok = bool(np.all(dist.sigma <= bound * (1.0 + 1e-12)))
    worst_level = int(np.argmax(dist.sigma - bound))
    return LipschitzReport(theta_used, theta_req, True, dist.sigma, bound, ok, worst_level)


SAMPLE_BLOCK = 4096  # fixed internal block; do not tie to caller chunking


def sample_paths(cone: Cone, xi: ControlField, n_samples: int, seed: int) -> ConeDistribution:
    """Monte-Carlo companion of the exact DPs.

    Sample block b always draws from Philox(seed) jumped b times, so the
    estimate is a pure function of (seed, n_samples) no matter how the
    blocks are scheduled across threads or processes.
    """
    mesh = cone.mesh
    depth = cone.depth
    sum_slot = np.zeros((depth + 1, depth + 1))        # running marginal counts
    sum_z = np.zeros(depth + 1)
    sum_z2 = np.zeros(depth + 1)
    sum_absz = np.zeros(depth + 1)
    for block, start in enumerate(range(0, n_samples, SAMPLE_BLOCK)):
        n = min(SAMPLE_BLOCK, n_samples - start)
        unif = np.random.Generator(np.random.Philox(key=seed).jumped(block)).random((n, depth))
        slot = np.zeros(n, dtype=int)                   # site index within level
        z = np.zeros(n)
        sum_slot[0, 0] += n
        for r in range(depth):
            up = xi.prob_up(r)[slot]
            drift = xi.rows[r][slot] * mesh.dt
            go_up = unif[:, r] < up
            z = z + np.where(go_up, mesh.dx, -mesh.dx) + drift
            slot = slot + go_up.astype(int)
            sum_slot[r + 1, : r + 2] += np.bincount(slot, minlength=r + 2)
            sum_z[r + 1] += z.sum()
            sum_z2[r + 1] += (z * z).sum()
            sum_absz[r + 1] += np.abs(z).sum()
    marg = [sum_slot[r, : r + 1] / n_samples for r in range(depth + 1)]
    gbar = np.array([float(m @ cone.positions(r)) for r, m in enumerate(marg)])
    sig = np.array([float(m @ (cone.positions(r) - gbar[r]) ** 2) for r, m in enumerate(marg)])
    return ConeDistribution(
        cone, marg, gbar, sig,
        sigma_tilde=sum_z2 / n_samples, d_tilde=sum_absz / n_samples,
        empirical=True, meta={"n_samples": n_samples, "seed": seed},
    )
