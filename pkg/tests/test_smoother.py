import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from pmgdg import linalg
from pmgdg.assembly import PenaltyConfig, assemble_level, assemble_stiffness
from pmgdg.dg_space import DgSpace
from pmgdg.mesh import build_mesh
from pmgdg.smoother import (SmootherConfig, apply_pm, chebyshev4_sweep, gershgorin_bound, jacobi_sweep,
                            poly_pm_eval, select_omega, smoothing_ratio, spectral_radius_jacobi)


@pytest.fixture(scope="module")
def small():
    level = assemble_level(DgSpace(build_mesh(2, (0, 1), 4), 2))  # 144 DOFs
    A = level.A.toarray()
    return level, A


def _exact(level, rng):
    f = rng.standard_normal(level.A.n_rows)
    return f, linalg.direct_solve(level.A, f)


@pytest.mark.parametrize("sweep", [jacobi_sweep, chebyshev4_sweep])
def test_fixed_point(small, sweep, rng):
    level, _ = small
    f, z = _exact(level, rng)
    out = sweep(level.A, level.D_diag, 0.2, f, z, 5)
    np.testing.assert_allclose(out, z, atol=1e-14 * np.max(np.abs(z)) * 100)
    assert np.max(np.abs(out - z)) <= 1e-12


def test_jacobi_diagonal_exact():
    A = linalg.diags([2.0, 5.0])
    f = np.array([4.0, 10.0])
    np.testing.assert_allclose(jacobi_sweep(A, A.diagonal(), 1.0, f, np.zeros(2), 1), [2.0, 2.0])


def test_jacobi_error_propagation(small, rng):
    level, A = small
    f, z = _exact(level, rng)
    z0 = rng.standard_normal(A.shape[0])
    w = 0.2
    E = np.eye(A.shape[0]) - w * A / level.D_diag[:, None]
    out = jacobi_sweep(level.A, level.D_diag, w, f, z0, 6)
    np.testing.assert_allclose(out - z, np.linalg.matrix_power(E, 6) @ (z0 - z), atol=1e-10)


def _dense_pm(B, m):
    n = B.shape[0]
    prev, cur = np.eye(n), np.eye(n) - 4.0 / 3.0 * B
    if m == 0:
        return prev
    for i in range(2, m + 1):
        prev, cur = cur, (4 * i - 2) / (2 * i + 1) * (np.eye(n) - 2 * B) @ cur - (2 * i - 3) / (2 * i + 1) * prev
    return cur


@pytest.mark.parametrize("m", range(1, 9))
def test_chebyshev_error_identity(small, rng, m):
    level, A = small
    f, z = _exact(level, rng)
    z0 = rng.standard_normal(A.shape[0])
    w = select_omega(level.A, level.D_diag)
    out = chebyshev4_sweep(level.A, level.D_diag, w, f, z0, m)
    Pm = _dense_pm(w * A / level.D_diag[:, None], m)
    np.testing.assert_allclose(out - z, Pm @ (z0 - z), atol=1e-10)
    np.testing.assert_allclose(apply_pm(level.A, level.D_diag, w, m, z0 - z), Pm @ (z0 - z), atol=1e-10)


def test_chebyshev_m1(small, rng):
    level, A = small
    f, z = _exact(level, rng)
    z0 = rng.standard_normal(A.shape[0])
    w = 0.1
    out = chebyshev4_sweep(level.A, level.D_diag, w, f, z0, 1)
    np.testing.assert_allclose(out - z, (z0 - z) - 4 / 3 * w * (A @ (z0 - z)) / level.D_diag, atol=1e-12)


def test_chebyshev_linearity(small, rng):
    level, _ = small
    f = rng.standard_normal(level.A.n_rows)
    a, b = rng.standard_normal((2, level.A.n_rows))
    w = 0.1
    lhs = chebyshev4_sweep(level.A, level.D_diag, w, f, a, 4) - chebyshev4_sweep(level.A, level.D_diag, w, f, b, 4)
    rhs = chebyshev4_sweep(level.A, level.D_diag, w, np.zeros_like(f), a - b, 4)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_poly_examples():
    for m in range(8):
        assert poly_pm_eval(m, 0.0) == 1.0
    assert poly_pm_eval(1, 0.75) == pytest.approx(0.0, abs=1e-15)
    assert poly_pm_eval(2, 1.0) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        poly_pm_eval(-1, 0.5)


@pytest.mark.parametrize("m", range(1, 21))
def test_poly_suprema(m):
    x = np.linspace(0, 1, 100_001)
    p = poly_pm_eval(m, x)
    assert abs(np.max(np.sqrt(x) * np.abs(p)) - 1 / (2 * m + 1)) <= 1e-3
    assert abs(np.max(np.abs(p)) - 1.0) <= 1e-12


@given(st.integers(1, 12), st.floats(0, 1))
def test_poly_bounded(m, x):
    assert abs(poly_pm_eval(m, x)) <= 1 + 1e-12


def test_non_expansive_in_energy(small, rng):
    level, _ = small
    w = select_omega(level.A, level.D_diag)
    for m in (1, 3, 8):
        e = rng.standard_normal(level.A.n_rows)
        out = apply_pm(level.A, level.D_diag, w, m, e)
        assert linalg.a_norm(level.A, 1, out) <= linalg.a_norm(level.A, 1, e) * (1 + 1e-12)


def test_select_omega_examples():
    D = linalg.diags([1.0, 3.0, 7.0])
    assert select_omega(D, D.diagonal()) == pytest.approx(1 / 1.05, rel=1e-6)
    A2 = linalg.diags([2.0, 6.0, 14.0])
    assert select_omega(A2, A2.diagonal() / 2) == pytest.approx(1 / 2.1, rel=1e-6)
    assert select_omega(D, D.diagonal(), method="gershgorin") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        select_omega(D, D.diagonal(), method="guess")


@pytest.mark.parametrize("method", ["power", "gershgorin"])
def test_omega_rho_band_1d_k4(method):
    level = assemble_level(DgSpace(build_mesh(1, (0, 1), 32), 4))
    A = level.A.toarray()
    rho = np.max(sla.eigvalsh(A, np.diag(level.D_diag)))
    w = select_omega(level.A, level.D_diag, method=method)
    assert w * rho <= 1.0
    if method == "power":
        assert w * rho > 0.9


def test_gershgorin_bounds_spectral_radius():
    for d, k in ((1, 3), (2, 2)):
        level = assemble_level(DgSpace(build_mesh(d, (0, 1), 4), k))
        rho = spectral_radius_jacobi(level.A, level.D_diag)
        assert gershgorin_bound(level.A, level.D_diag) >= rho


def test_smoothing_ratio_decreases_with_m():
    level = assemble_level(DgSpace(build_mesh(2, (0, 1), 8), 3))
    w = select_omega(level.A, level.D_diag, method="gershgorin")
    s = [smoothing_ratio(level, w, m) for m in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(s, s[1:]))


def test_smoother_config_validation():
    with pytest.raises(ValueError):
        SmootherConfig(kind="sor")
    with pytest.raises(ValueError):
        SmootherConfig(steps=-1)
    with pytest.raises(ValueError):
        SmootherConfig(method="eig")
