"""Reference computations the tests compare the package against.

Everything here takes a different route than the library: quadrature
instead of grid solves, explicit path enumeration instead of
probability pushing, dense search instead of closed forms.  Slow is
fine; being independent is the point.
"""
import itertools
import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


# ---------------------------------------------------------------------
# potentials written out directly, not through the package's trig class

def two_well_potential(x, depth=0.10, split=-0.03):
    x = np.asarray(x, dtype=float)
    return (1.0 - np.cos(4 * np.pi * x)) * (depth + split * np.cos(2 * np.pi * x))


def one_well_potential(x):
    return 0.25 * (1.0 - np.cos(2 * np.pi * np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------
# effective value of p^2/2 - F(x) shifted by a mean slope c

def plateau_edge(F) -> float:
    """Half-width of the flat piece: the full area under sqrt(2F)."""
    val, err = quad(lambda s: math.sqrt(max(2.0 * F(s), 0.0)), 0.0, 1.0,
                    limit=400)
    if err > 1e-9:
        raise RuntimeError(f"plateau quadrature did not converge: err={err}")
    return val


def mech_effective(F, c: float) -> float:
    """Area rule: level E whose momentum graph has mean slope |c|.

    Inside the plateau the level sticks at the well energy 0; outside,
    E solves the strictly increasing equation  integral sqrt(2(E+F)) = |c|.
    """
    c0 = plateau_edge(F)
    if abs(c) <= c0:
        return 0.0

    def mean_speed(E):
        val, _ = quad(lambda s: math.sqrt(2.0 * (E + F(s))), 0.0, 1.0,
                      limit=400)
        return val - abs(c)

    hi = 0.5 * c * c + 1.0
    return brentq(mean_speed, 0.0, hi, xtol=1e-14, rtol=1e-15)


def mane_barrier(F, x: float) -> float:
    """Least action from the well at 0 to x for a nonnegative potential.

    At the critical level the action along a path is the arc integral of
    sqrt(2F), so the barrier is the cheaper of the two ways around.
    """
    right, _ = quad(lambda s: math.sqrt(max(2.0 * F(s), 0.0)), 0.0, x,
                    limit=200)
    left, _ = quad(lambda s: math.sqrt(max(2.0 * F(s), 0.0)), x, 1.0,
                   limit=200)
    return min(right, left)


# ---------------------------------------------------------------------
# controlled walk by brute-force path enumeration

def enumerate_walk(cone, xi):
    """All 2^r paths of every length r: marginals and gap moments.

    Returns (marginals, z2, absz) where marginals[r] maps unwrapped site
    index -> probability at r levels below the origin, z2[r] is the
    second moment of the drift-compensated gap and absz[r] its first
    absolute moment.  Mirrors the walk conventions: step +dx with
    probability 1/2 - lam xi / 2, gap increment +-dx + xi dt.
    """
    mesh = cone.mesh
    marginals = [{cone.origin_m: 1.0}]
    z2 = [0.0]
    absz = [0.0]
    for length in range(1, cone.depth + 1):
        marg: dict[int, float] = {}
        m2 = 0.0
        m1 = 0.0
        for steps in itertools.product((1, -1), repeat=length):
            m = cone.origin_m
            prob = 1.0
            z = 0.0
            for r, s in enumerate(steps):
                j = (m - (cone.origin_m - r)) // 2
                xi_here = float(xi.rows[r][j])
                p_up = 0.5 - 0.5 * mesh.lam * xi_here
                prob *= p_up if s == 1 else 1.0 - p_up
                z += (mesh.dx if s == 1 else -mesh.dx) + xi_here * mesh.dt
                m += s
            marg[m] = marg.get(m, 0.0) + prob
            m2 += prob * z * z
            m1 += prob * abs(z)
        marginals.append(marg)
        z2.append(m2)
        absz.append(m1)
    return marginals, np.array(z2), np.array(absz)


def marginal_arrays(cone, marginals):
    """Align the enumeration dicts with the cone's site arrays."""
    out = []
    for r, marg in enumerate(marginals):
        sites = cone.sites(r)
        out.append(np.array([marg.get(int(m), 0.0) for m in sites]))
    return out


# ---------------------------------------------------------------------
# misc

def fit_order(dxs, errors) -> float:
    """Least-squares slope of log error against log dx."""
    dxs = np.asarray(dxs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    return float(np.polyfit(np.log(dxs[keep]), np.log(errors[keep]), 1)[0])
