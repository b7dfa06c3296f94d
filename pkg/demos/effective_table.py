"""Effective values on refining meshes, and the plateau of the double well.

Run from the repo root:

    python demos/effective_table.py

Prints the exactness check for the quadratic Hamiltonian, then scans the
tilt across the double-well plateau where the effective value is pinned
at zero, and finishes with the refinement rate at one interior tilt.
Saves plateau.png next to this script when matplotlib is importable.
"""
import numpy as np

from hjselect import MeshSpec, make_model, rate_study, solve_periodic
from hjselect.barrier import compute_separatrix

# quadratic Hamiltonian first: the scheme reproduces c^2/2 to rounding,
# whatever the mesh, because the min-plus recursion telescopes exactly
free = make_model("free")
print("quadratic Hamiltonian, h(c) vs c^2/2")
for N, K in [(8, 8), (16, 32), (32, 128)]:
    mesh = MeshSpec(N, K)
    for c in (0.0, 0.25, -0.7):
        sol = solve_periodic(free, mesh, c)
        print(f"  N={N:3d} K={K:4d} c={c:+.2f}  h={sol.h_delta:+.15f}"
              f"  err={abs(sol.h_delta - 0.5 * c * c):.2e}")

# the double well: between the separatrix slopes the effective value is
# flat, outside it grows; the flat part is where selection happens
model = make_model("two_well")
sep = compute_separatrix(model)
print(f"\ndouble well: plateau edges c0={sep.c0:+.6f} c1={sep.c1:+.6f}")
mesh = MeshSpec(64, 128)
cs = np.linspace(-0.7, 0.7, 29)
hs = []
for c in cs:
    sol = solve_periodic(model, mesh, float(c), max_periods=2000)
    hs.append(sol.h_delta)
    marker = " <- plateau" if sep.c0 <= c <= sep.c1 else ""
    print(f"  c={c:+.3f}  h={sol.h_delta:+.6f}{marker}")

print("\nrefinement at c=0.12 (inside the plateau), ratio 0.5")
study = rate_study(model, 0.12, 0.5, [32, 64, 128, 256], h_exact=0.0,
                   max_periods=4000)
for N, h, e in zip(study.Ns, study.h_values, study.errors):
    print(f"  N={N:4d}  h={h:+.10f}  |h|={e:.3e}")
print(f"  fitted order in dx: {study.alpha:.3f} (the bound is one half)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import pathlib

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(cs, hs, "o-", ms=3, label="N=64")
    ax.axvspan(sep.c0, sep.c1, alpha=0.15, label="plateau")
    ax.set_xlabel("tilt c")
    ax.set_ylabel("effective value")
    ax.legend()
    out = pathlib.Path(__file__).with_name("plateau.png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    print(f"\nwrote {out}")
except ImportError:
    pass
