import math

import numpy as np
import pytest

from aggmin.errors import SupportOverflow
from aggmin.radial import Profile, RadialGrid, ball_volume
from aggmin.utils.sampling import random_profiles


@pytest.mark.parametrize('d', [2, 3])
@pytest.mark.parametrize('N', [2, 17, 512])
def test_volumes_fill_the_ball(d, N):
    grid = RadialGrid(d=d, R=3.7, N=N)
    assert np.all(np.diff(grid.edges) > 0)
    assert np.all(grid.volumes > 0)
    assert grid.volumes.sum() == pytest.approx(ball_volume(d, 3.7), rel=1e-12)


def test_grid_rejects_bad_dimension():
    with pytest.raises(ValueError):
        RadialGrid(d=4, R=1.0, N=8)


def test_mass_values():
    grid = RadialGrid(d=2, R=2.0, N=64)
    assert Profile.zeros(grid).mass() == 0
    assert Profile(grid, np.ones(64)).mass() == pytest.approx(4 * math.pi, abs=1e-10)


def test_gaussian_mass():
    grid = RadialGrid(d=2, R=10.0, N=1024)
    u = Profile.cell_averages(grid, lambda r: np.exp(-(r**2)))
    assert u.mass() == pytest.approx(math.pi, abs=1e-6)


def test_profile_rejects_negative_values():
    grid = RadialGrid(d=2, R=1.0, N=4)
    with pytest.raises(ValueError):
        Profile(grid, np.array([1.0, -1e-3, 0.0, 0.0]))


def test_lp_norm_constant():
    grid = RadialGrid(d=2, R=3.0, N=50)
    u = Profile(grid, np.full(50, 0.7))
    assert u.lp_norm(2) == pytest.approx(0.7 * math.sqrt(math.pi * 9), rel=1e-12)
    assert Profile.zeros(grid).lp_norm(3) == 0
    with pytest.raises(ValueError):
        u.lp_norm(0.5)


@pytest.mark.parametrize('p', [1.5, 2.0, 4.0])
def test_lp_interpolation(p):
    grid = RadialGrid(d=2, R=5.0, N=200)
    mstar = (p + 1) / p
    for u in random_profiles(grid, 100, seed=7):
        lhs = u.lp_norm(2 * p / (2 * p - 1))
        rhs = u.lp_norm(1) ** (1 - mstar / 2) * u.lp_norm(mstar) ** (mstar / 2)
        assert lhs <= rhs * (1 + 1e-12)


def test_lp_norm_approaches_sup():
    grid = RadialGrid(d=2, R=10.0, N=512)
    u = Profile.from_function(grid, lambda r: np.maximum(1 - r**2 / 25, 0))
    assert u.lp_norm(64) == pytest.approx(u.lp_norm(math.inf), rel=0.05)


def test_rescale_identity():
    grid = RadialGrid(d=2, R=10.0, N=128)
    u = Profile.gaussian(grid)
    assert u.rescale_mass_invariant(1.0) is u


def test_rescale_l2_scaling():
    grid = RadialGrid(d=2, R=10.0, N=2048)
    u = Profile.cell_averages(grid, lambda r: np.exp(-(r**2)))
    lam = 0.5
    v = u.rescale_mass_invariant(lam)
    assert v.mass() == pytest.approx(u.mass(), rel=1e-6)
    assert v.lp_norm(2) ** 2 == pytest.approx(lam**2 * u.lp_norm(2) ** 2, rel=1e-4)


def test_rescale_compresses_compact_bump():
    grid = RadialGrid(d=2, R=10.0, N=400)
    u = Profile.from_function(grid, lambda r: np.maximum(1 - (r / 2) ** 2, 0) ** 2)
    v = u.rescale_mass_invariant(2.0)
    assert v.mass() == pytest.approx(u.mass(), rel=1e-8)
    assert v.concentration(1.0) == pytest.approx(v.mass(), rel=1e-8)


def test_rescale_round_trip():
    grid = RadialGrid(d=2, R=10.0, N=1024)
    u = Profile.gaussian(grid)
    back = u.rescale_mass_invariant(0.5).rescale_mass_invariant(2.0)
    l1 = np.dot(np.abs(back.values - u.values), grid.volumes)
    assert l1 <= 1e-4 * u.mass()


def test_rescale_overflow():
    grid = RadialGrid(d=2, R=4.0, N=64)
    u = Profile.gaussian(grid)
    with pytest.raises(SupportOverflow) as info:
        u.rescale_mass_invariant(1 / 16)
    assert info.value.lost > 0


def test_concentration():
    grid = RadialGrid(d=2, R=2.0, N=100)
    u = Profile(grid, np.ones(100))
    assert u.concentration(1.0) == pytest.approx(math.pi, abs=1e-10)
    assert u.concentration(0.0) == 0
    assert u.concentration(2.0) == u.mass()

    w = random_profiles(grid, 1, seed=3)[0]
    q = [w.concentration(rho) for rho in np.linspace(0, 2, 301)]
    assert np.all(np.diff(q) >= -1e-15)
    assert q[-1] == w.mass()


def test_csv_round_trip(tmp_path):
    grid = RadialGrid(d=3, R=2.5, N=40)
    u = random_profiles(grid, 1, seed=11)[0]
    path = tmp_path / 'u.csv'
    u.to_csv(path, ['note'])
    back = Profile.read_csv(path)
    assert back.grid == grid
    np.testing.assert_allclose(back.values, u.values, rtol=1e-15)
