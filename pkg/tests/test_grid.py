"""Staggered mesh bookkeeping: offsets, positions, storage, interpolants."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjselect.grid import (GridField, MeshSpec, dump_csv, linear_interpolant,
                           load_csv, locate, m_offset, row_positions,
                           site_index, step_interpolant)


def test_meshspec_validates_its_inputs():
    with pytest.raises(ValueError):
        MeshSpec(8, 4)                       # ratio above one
    with pytest.raises(ValueError):
        MeshSpec(0, 4)
    with pytest.raises(ValueError):
        MeshSpec(8.0, 16)                    # non-integer
    with pytest.raises(ValueError):
        MeshSpec(8, 16, lam_max=0.5)         # 0.5 not strictly below 0.5
    MeshSpec(8, 17, lam_max=0.5)             # just inside the strict window


def test_meshspec_steps_and_ratio():
    mesh = MeshSpec(8, 32)
    assert mesh.dx == 1.0 / 16
    assert mesh.dt == 1.0 / 64
    assert mesh.lam == 0.25
    assert mesh.steps_per_period == 64
    assert mesh.with_ratio(0.5) == MeshSpec(8, 16)


@given(st.integers(-3, 3))
def test_offsets_alternate_and_complement(k):
    assert m_offset("even", k) in (0, 1)
    assert m_offset("even", k) + m_offset("odd", k) == 1
    assert m_offset("even", k) == m_offset("even", k + 2)


@given(st.integers(0, 7), st.integers(0, 5), st.sampled_from(["even", "odd"]))
def test_site_index_inverts_the_site_formula(j, k, parity):
    mesh = MeshSpec(8, 16)
    m = m_offset(parity, k) + 2 * j
    assert site_index(mesh, parity, k, m) == j % mesh.N
    assert site_index(mesh, parity, k, m + 2 * mesh.N) == j % mesh.N
    with pytest.raises(ValueError):
        site_index(mesh, parity, k, m + 1)


def test_row_positions_spacing_and_offset():
    mesh = MeshSpec(8, 16)
    for parity in ("even", "odd"):
        for k in (0, 1, 5):
            x = row_positions(mesh, parity, k)
            assert x[0] == m_offset(parity, k) * mesh.dx
            assert np.allclose(np.diff(x), 2 * mesh.dx)
            assert x[-1] < 1.0


@given(st.floats(-2.0, 2.0, allow_nan=False), st.floats(0.0, 1.0, exclude_max=True),
       st.sampled_from(["even", "odd"]))
def test_locate_returns_the_enclosing_cell(x, t, parity):
    mesh = MeshSpec(8, 16)
    m, k = locate(mesh, parity, x, t)
    assert m % 2 == (0 if parity == "even" else 1)
    assert m * mesh.dx <= x < (m + 2) * mesh.dx
    assert k == math.floor(t / mesh.dt)


def test_gridfield_row_wrapping_and_bounds():
    mesh = MeshSpec(4, 8)
    periodic = GridField(mesh, "odd", np.arange(16.0 * 4).reshape(16, 4),
                         time_periodic=True)
    assert np.array_equal(periodic.row(0), periodic.row(16))
    finite = GridField.zeros(mesh, "even", levels=3, k0=2)
    finite.row(4)
    with pytest.raises(IndexError):
        finite.row(5)
    with pytest.raises(ValueError):
        GridField(mesh, "odd", np.zeros((3, 5)))
    with pytest.raises(ValueError):
        GridField(mesh, "odd", np.zeros((3, 4)), time_periodic=True)


def test_interpolants_reproduce_site_values_and_cell_structure():
    mesh = MeshSpec(4, 8)
    rng = np.random.default_rng(3)
    u = GridField(mesh, "even", rng.standard_normal((16, 4)),
                  time_periodic=True)
    v = GridField(mesh, "odd", rng.standard_normal((16, 4)),
                  time_periodic=True)
    k = 3
    xu = u.positions(k)
    xv = v.positions(k)
    t = (k + 0.25) * mesh.dt
    for j in range(mesh.N):
        assert step_interpolant(u, xu[j] + 0.3 * mesh.dx, t) == u.row(k)[j]
        assert linear_interpolant(v, xv[j], t) == pytest.approx(v.row(k)[j])
    mid = linear_interpolant(v, xv[0] + mesh.dx, t)
    assert mid == pytest.approx(0.5 * (v.row(k)[0] + v.row(k)[1]))


def test_csv_round_trip_is_exact(tmp_path):
    mesh = MeshSpec(6, 12)
    rng = np.random.default_rng(11)
    field = GridField(mesh, "odd", rng.standard_normal((5, 6)), k0=3, c=0.125)
    path = tmp_path / "field.csv"
    dump_csv(field, str(path))
    back = load_csv(str(path), mesh)
    assert back.parity == "odd"
    assert back.k0 == 3
    assert back.c == 0.125
    assert np.array_equal(back.values, field.values)
