"""Staggered space-time meshes on the periodic strip.

The mesh has space step dx = 1/(2N) and time step dt = 1/(2K) with
N <= K, so the ratio lam = dt/dx = N/K is at most one.  Fields live on
one of the two staggered sublattices:

* ``parity="even"``  sites (m, k) with m + k even (slope-like fields)
* ``parity="odd"``   sites (m, k) with m + k odd  (value-like fields)

Rows are stored as length-N arrays.  At level k a field of space-time
parity P occupies sites m = offset + 2j, j = 0..N-1, where the offset is
k % 2 for "even" and (k + 1) % 2 for "odd".  Site indices m are kept
unwrapped in the utilities below; storage wraps them mod 2N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Parity = str  # "even" | "odd"


def _check_parity(parity: str) -> None:
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


@dataclass(frozen=True)
class MeshSpec:
    """Space-time mesh: N cells per period in x, K in t, ratio N/K.

    The admissible ratio window [lam_min, lam_max] is validated at
    construction.  The default window (0, 1] admits every N <= K; a
    scheme run that needs a strict CFL bound passes its own lam_max.
    """

    N: int
    K: int
    lam_min: float = 0.0
    lam_max: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and isinstance(self.K, (int, np.integer))):
            raise ValueError("N and K must be integers")
        if self.N < 1 or self.K < 1:
            raise ValueError(f"N and K must be positive, got N={self.N}, K={self.K}")
        if self.N > self.K:
            raise ValueError(f"need N <= K so the ratio is at most one, got N={self.N} > K={self.K}")
        lam = self.N / self.K
        if lam < self.lam_min:
            raise ValueError(f"mesh ratio {lam} below lam_min={self.lam_min}")
        # the upper bound is strict when it encodes a CFL ceiling below 1
        if self.lam_max < 1.0:
            if lam >= self.lam_max:
                raise ValueError(f"mesh ratio {lam} not below lam_max={self.lam_max}")
        elif lam > self.lam_max:
            raise ValueError(f"mesh ratio {lam} above lam_max={self.lam_max}")

    @property
    def dx(self) -> float:
        return 1.0 / (2 * self.N)

    @property
    def dt(self) -> float:
        return 1.0 / (2 * self.K)

    @property
    def lam(self) -> float:
        return self.N / self.K

    @property
    def steps_per_period(self) -> int:
        return 2 * self.K

    def with_ratio(self, lam: float) -> "MeshSpec":
        """Closest mesh with this N and ratio near lam (K = round(N/lam))."""
        K = max(self.N, int(round(self.N / lam)))
        return MeshSpec(self.N, K, self.lam_min, self.lam_max)


def m_offset(parity: Parity, k: int) -> int:
    """Site offset at level k: sites are m = offset + 2j."""
    _check_parity(parity)
    return k % 2 if parity == "even" else (k + 1) % 2


def row_positions(mesh: MeshSpec, parity: Parity, k: int) -> np.ndarray:
    """x-coordinates of the N sites of this parity at level k, in [0, 1)."""
    off = m_offset(parity, k)
    return (off + 2 * np.arange(mesh.N)) * mesh.dx


def site_index(mesh: MeshSpec, parity: Parity, k: int, m: int) -> int:
    """Storage column j for (possibly unwrapped) site index m at level k."""
    off = m_offset(parity, k)
    if (m - off) % 2 != 0:
        raise ValueError(f"site m={m} has the wrong parity for level k={k}")
    return ((m - off) // 2) % mesh.N


def locate(mesh: MeshSpec, m_parity: Parity, x: float, t: float) -> tuple[int, int]:
    """Cell indices (m, k) with x in [x_m, x_m + 2 dx), t in [t_k, t_k + dt).

    ``m_parity`` is the parity of the site index m itself.  m comes back
    unwrapped (negative x gives negative m); k is floor(t / dt).
    """
    _check_parity(m_parity)
    off = 0 if m_parity == "even" else 1
    m = off + 2 * math.floor((x - off * mesh.dx) / (2 * mesh.dx))
    k = math.floor(t / mesh.dt)
    return m, k


@dataclass
class GridField:
    """Rows of one staggered field.  values[i] is the row at level k0 + i.

    For ``time_periodic`` fields the stored rows cover one full period
    (2K levels) and ``row`` wraps the level index.
    """

    mesh: MeshSpec
    parity: Parity
    values: np.ndarray
    k0: int = 0
    c: float = 0.0
    time_periodic: bool = False

    def __post_init__(self):
        _check_parity(self.parity)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.mesh.N:
            raise ValueError(f"values must have shape (levels, N={self.mesh.N})")
        if self.time_periodic and self.values.shape[0] != self.mesh.steps_per_period:
            raise ValueError("a time-periodic field must store exactly 2K rows")

    @classmethod
    def zeros(cls, mesh: MeshSpec, parity: Parity, levels: int, **kw) -> "GridField":
        return cls(mesh, parity, np.zeros((levels, mesh.N)), **kw)

    @property
    def levels(self) -> int:
        return self.values.shape[0]

    def row(self, k: int) -> np.ndarray:
        i = k - self.k0
        if self.time_periodic:
            i %= self.levels
        elif not (0 <= i < self.levels):
            raise IndexError(f"level k={k} outside stored range [{self.k0}, {self.k0 + self.levels})")
        return self.values[i]

    def m_parity_at(self, k: int) -> Parity:
        """Parity of the site indices m this field occupies at level k."""
        return "even" if m_offset(self.parity, k) == 0 else "odd"

    def positions(self, k: int) -> np.ndarray:
        return row_positions(self.mesh, self.parity, k)


def step_interpolant(u: GridField, x: float, t: float) -> float:
    """Piecewise-constant extension of a slope-like field.

    Equal to the row value on each space cell [x_m, x_m + 2 dx) and to
    the row at level k on the time cell [t_k, t_k + dt).
    """
    mesh = u.mesh
    m, k = locate(mesh, u.m_parity_at(math.floor(t / mesh.dt)), x, t)
    j = site_index(mesh, u.parity, k, m)
    return float(u.row(k)[j])


def linear_interpolant(v: GridField, x: float, t: float) -> float:
    """Piecewise-linear extension of a value-like field along each row."""
    mesh = v.mesh
    m, k = locate(mesh, v.m_parity_at(math.floor(t / mesh.dt)), x, t)
    j = site_index(mesh, v.parity, k, m)
    row = v.row(k)
    left = row[j]
    right = row[(j + 1) % mesh.N]
    x_m = m * mesh.dx  # unwrapped left endpoint, so frac is in [0, 1)
    frac = (x - x_m) / (2 * mesh.dx)
    return float((1.0 - frac) * left + frac * right)


def dump_csv(field_: GridField, path: str) -> None:
    """Write one row per (k, m, value) with a header naming parity, N, K, c."""
    mesh = field_.mesh
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# parity={field_.parity} N={mesh.N} K={mesh.K} c={field_.c:.17g}\n")
        fh.write("k,m,value\n")
        for i in range(field_.levels):
            k = field_.k0 + i
            off = m_offset(field_.parity, k)
            for j in range(mesh.N):
                m = off + 2 * j
                fh.write(f"{k},{m},{field_.values[i, j]:.17g}\n")


def load_csv(path: str, mesh: MeshSpec) -> GridField:
    """Inverse of dump_csv for fields stored level-contiguously."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = dict(tok.split("=") for tok in header.lstrip("# ").split())
        parity = parts["parity"]
        c = float(parts["c"])
        fh.readline()  # column names
        rows: dict[int, dict[int, float]] = {}
        for line in fh:
            if not line.strip():
                continue
            k_s, m_s, v_s = line.split(",")
            rows.setdefault(int(k_s), {})[int(m_s)] = float(v_s)
    ks = sorted(rows)
    values = np.zeros((len(ks), mesh.N))
    for i, k in enumerate(ks):
        off = m_offset(parity, k)
        for m, v in rows[k].items():
            values[i, ((m - off) // 2) % mesh.N] = v
    return GridField(mesh, parity, values, k0=ks[0], c=c)
