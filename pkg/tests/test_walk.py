"""Controlled-walk laws against brute-force path enumeration."""
import numpy as np
import pytest

from hjselect import (
    Cone,
    ControlField,
    InvalidPath,
    JointStateOverflow,
    LipschitzViolated,
    MeshSpec,
    compensated_statistics,
    marginals_dp,
    path_density,
    sample_paths,
    variance_under_lipschitz,
)
from oracles import enumerate_walk, marginal_arrays

MESH_POOL = [MeshSpec(8, 8), MeshSpec(8, 16), MeshSpec(16, 64), MeshSpec(12, 20)]


def _random_cone(rng, depth=None):
    mesh = MESH_POOL[int(rng.integers(len(MESH_POOL)))]
    if depth is None:
        depth = int(rng.integers(1, 13))
    k_top = int(rng.integers(0, mesh.steps_per_period))
    m = int(rng.integers(0, 50))
    if (m + k_top) % 2 != 1:
        m += 1
    return Cone(mesh, m, k_top, depth)


def _random_control(rng, cone):
    lim = 0.999 / cone.mesh.lam
    rows = [rng.uniform(-lim, lim, size=r + 1) for r in range(cone.depth)]
    return ControlField(cone, rows)


def test_cone_geometry():
    mesh = MeshSpec(8, 16)
    cone = Cone(mesh, 3, 0, 4)
    assert list(cone.sites(0)) == [3]
    assert list(cone.sites(2)) == [1, 3, 5]
    assert np.allclose(cone.positions(2), np.array([1, 3, 5]) * mesh.dx)
    assert cone.level(3) == -3
    assert cone.duration(4) == pytest.approx(4 * mesh.dt)
    with pytest.raises(ValueError):
        Cone(mesh, 2, 0, 4)      # even origin parity
    with pytest.raises(ValueError):
        Cone(mesh, 3, 0, 0)      # no levels below
    with pytest.raises(ValueError):
        cone.sites(5)


def test_control_field_validation():
    cone = Cone(MeshSpec(8, 16), 3, 0, 3)
    with pytest.raises(ValueError, match="control rows"):
        ControlField(cone, [np.zeros(1)])
    with pytest.raises(ValueError, match="shape"):
        ControlField(cone, [np.zeros(2), np.zeros(2), np.zeros(3)])
    lim = 1.0 / cone.mesh.lam
    with pytest.raises(ValueError, match="violates"):
        ControlField(cone, [np.full(1, 1.01 * lim), np.zeros(2), np.zeros(3)])
    # the wrap into the unit cell is visible for a non-periodic sampler
    field = ControlField.from_callable(cone, lambda x, t: x)
    for r in range(cone.depth):
        assert np.allclose(field.rows[r], cone.positions(r) % 1.0)


def test_path_density_sums_to_one_and_rejects_bad_paths():
    rng = np.random.default_rng(7)
    cone = _random_cone(rng, depth=6)
    xi = _random_control(rng, cone)
    total = 0.0
    for bits in range(2 ** cone.depth):
        path = [cone.origin_m]
        for r in range(cone.depth):
            path.append(path[-1] + (1 if (bits >> r) & 1 else -1))
        prob = path_density(cone, xi, path)
        assert 0.0 <= prob <= 1.0
        total += prob
    assert total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidPath):
        path_density(cone, xi, [cone.origin_m] * cone.depth)        # short
    with pytest.raises(InvalidPath):
        path_density(cone, xi, [cone.origin_m + 2] + [0] * cone.depth)
    bad = [cone.origin_m, cone.origin_m + 2] + [cone.origin_m + 2] * (cone.depth - 1)
    with pytest.raises(InvalidPath):
        path_density(cone, xi, bad)


def test_walk_laws_match_enumeration_on_100_random_controls():
    rng = np.random.default_rng(20260822)
    worst = 0.0
    for _ in range(100):
        cone = _random_cone(rng)
        xi = _random_control(rng, cone)
        dist = compensated_statistics(cone, xi)
        marg_ref, z2_ref, absz_ref = enumerate_walk(cone, xi)
        arrays_ref = marginal_arrays(cone, marg_ref)
        for r in range(cone.depth + 1):
            worst = max(worst, float(np.max(np.abs(dist.marginals[r] - arrays_ref[r]))))
            mean_ref = float(arrays_ref[r] @ cone.positions(r))
            var_ref = float(arrays_ref[r] @ (cone.positions(r) - mean_ref) ** 2)
            worst = max(worst, abs(dist.gamma_bar[r] - mean_ref))
            worst = max(worst, abs(dist.sigma[r] - var_ref))
        worst = max(worst, float(np.max(np.abs(dist.sigma_tilde - z2_ref))))
        worst = max(worst, float(np.max(np.abs(dist.d_tilde - absz_ref))))
        # universal gap bound, any control
        bound = dist.sigma_tilde_bound()
        assert np.all(dist.sigma_tilde <= bound * (1.0 + 1e-12))
    assert worst <= 1e-12


def test_zero_control_attains_the_gap_bound():
    for mesh in MESH_POOL:
        cone = Cone(mesh, 1, 0, 10)
        dist = marginals_dp(cone, ControlField.constant(cone, 0.0))
        gap = np.max(np.abs(dist.sigma_tilde - dist.sigma_tilde_bound()))
        assert gap <= 1e-12


def test_variance_bound_for_lipschitz_controls():
    mesh = MeshSpec(8, 16)
    cone = Cone(mesh, 3, 2, 8)
    fields = [
        ControlField.constant(cone, 0.3),
        ControlField.from_callable(cone, lambda x, t: 0.4 * np.sin(2 * np.pi * x)),
        ControlField.from_callable(cone, lambda x, t: 0.2 * np.cos(2 * np.pi * x) + 0.1),
    ]
    for xi in fields:
        rep = variance_under_lipschitz(cone, xi)
        assert rep.premise_ok
        assert rep.holds
        assert rep.theta_used >= rep.theta_required or rep.theta_required == 0.0


def test_lipschitz_premise_failure_raises():
    mesh = MeshSpec(8, 16)
    cone = Cone(mesh, 3, 2, 6)
    xi = ControlField.from_callable(cone, lambda x, t: 0.4 * np.sin(2 * np.pi * x))
    with pytest.raises(LipschitzViolated, match="theta"):
        variance_under_lipschitz(cone, xi, theta=0.05)


def test_sampler_is_deterministic_and_close_to_the_exact_law():
    rng = np.random.default_rng(11)
    cone = _random_cone(rng, depth=6)
    xi = _random_control(rng, cone)
    a = sample_paths(cone, xi, 6000, seed=42)   # crosses one block boundary
    b = sample_paths(cone, xi, 6000, seed=42)
    assert all(np.array_equal(x, y) for x, y in zip(a.marginals, b.marginals))
    assert np.array_equal(a.d_tilde, b.d_tilde)
    other = sample_paths(cone, xi, 6000, seed=43)
    assert not np.array_equal(a.d_tilde, other.d_tilde)
    exact = compensated_statistics(cone, xi)
    big = sample_paths(cone, xi, 20000, seed=1)
    for r in range(cone.depth + 1):
        assert np.max(np.abs(big.marginals[r] - exact.marginals[r])) <= 0.03
    assert np.max(np.abs(big.d_tilde - exact.d_tilde)) <= 0.05 * cone.mesh.dx * cone.depth


def test_joint_law_overflow_and_monte_carlo_fallback():
    rng = np.random.default_rng(3)
    mesh = MeshSpec(8, 16)
    deep = Cone(mesh, 1, 0, 26)
    lim = 0.999 / mesh.lam
    xi_deep = ControlField(deep, [rng.uniform(-lim, lim, r + 1) for r in range(26)])
    with pytest.raises(JointStateOverflow, match="mc_samples"):
        compensated_statistics(deep, xi_deep)
    est = compensated_statistics(deep, xi_deep, mc_samples=5000, seed=9)
    assert est.d_tilde is not None and est.d_tilde.shape == (27,)
    assert est.meta["d_tilde_method"] == "monte-carlo"
    # exact joint DP refuses to blow past an explicit state budget
    small = Cone(mesh, 1, 0, 8)
    xi_small = ControlField(small, [rng.uniform(-lim, lim, r + 1) for r in range(8)])
    with pytest.raises(JointStateOverflow, match="state"):
        compensated_statistics(small, xi_small, state_budget=10)
