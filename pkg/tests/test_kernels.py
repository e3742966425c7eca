"""Both kernel implementations must agree to rounding."""

import numpy as np
import pytest

from nmode import build_hopping_matrix, hypercube
from nmode._backend import BACKEND


@pytest.fixture
def lattice3():
    spec = hypercube(3)
    indptr, cols = spec.neighbor_csr
    T = build_hopping_matrix(spec)
    return spec, indptr, cols, T.csr()


def test_backend_selected():
    assert BACKEND in ("python", "compiled")


@pytest.mark.parametrize("sigma", [1, 2])
def test_residual_and_jacobian_agree(kern, lattice3, rng, sigma):
    from nmode import _kernels_py as ref
    _, indptr, cols, _ = lattice3
    q = rng.dirichlet(np.ones(8))
    f = kern.residual_positive(q, indptr, cols, -3.3, -1.2, sigma)
    np.testing.assert_allclose(f, ref.residual_positive(q, indptr, cols, -3.3, -1.2, sigma), rtol=1e-14, atol=1e-14)
    J = kern.jacobian_positive(q, indptr, cols, -3.3, sigma)
    np.testing.assert_allclose(J, ref.jacobian_positive(q, indptr, cols, -3.3, sigma), rtol=1e-13, atol=1e-13)


def test_rhs_agrees(kern, lattice3, rng):
    from nmode import _kernels_py as ref
    _, _, _, (indptr, idx, data) = lattice3
    y = rng.normal(size=16)
    np.testing.assert_allclose(kern.nmode_rhs(y, indptr, idx, data, 1.3, 1, 1.0),
                               ref.nmode_rhs(y, indptr, idx, data, 1.3, 1, 1.0), rtol=1e-14, atol=1e-14)


def test_dopri5_agrees(kern, lattice3, rng):
    from nmode import _kernels_py as ref
    _, _, _, (indptr, idx, data) = lattice3
    z = rng.normal(size=8) + 1j * rng.normal(size=8)
    z /= np.linalg.norm(z)
    y0 = np.concatenate([z.real, z.imag])
    t = np.linspace(0.0, 3.0, 7)
    args = (indptr, idx, data, -1.5, 1, 1.0, t, 1e-3, 1e-10, 1e-12, 100000, 1e-14)
    Y1, na1, nr1, s1 = kern.dopri5(y0, *args)
    Y2, na2, nr2, s2 = ref.dopri5(y0, *args)
    assert s1 == s2 == 0
    assert (na1, nr1) == (na2, nr2)
    np.testing.assert_allclose(Y1, Y2, atol=1e-11)
    np.testing.assert_array_equal(Y1[0], y0)


def test_dopri5_step_limit(kern, lattice3):
    _, _, _, (indptr, idx, data) = lattice3
    y0 = np.zeros(16)
    y0[0] = 1.0
    Y, na, nr, status = kern.dopri5(y0, indptr, idx, data, 0.0, 1, 1.0, np.array([0.0, 100.0]),
                                    1e-3, 1e-10, 1e-12, 5, 1e-14)
    assert status == 1


def test_dopri5_agrees_with_rejections(kern):
    """A run with many rejected steps; the retry must restart from the accepted state."""
    from nmode import _kernels_py as ref
    from nmode import family_state
    q, _ = family_state(3, 1, "F27", -7.0, "b")
    indptr, idx, data = build_hopping_matrix(hypercube(3)).csr()
    y0 = np.concatenate([np.sqrt(q), np.zeros(8)])
    t = np.linspace(0.0, 20.0, 201)
    args = (indptr, idx, data, -7.0, 1, 1.0, t, 1e-3, 1e-10, 1e-12, 10 ** 7, 1e-14)
    Y1, na1, nr1, _ = kern.dopri5(y0, *args)
    Y2, na2, nr2, _ = ref.dopri5(y0, *args)
    assert nr1 > 0
    assert (na1, nr1) == (na2, nr2)
    np.testing.assert_allclose(Y1, Y2, atol=1e-10)
    qq = Y1[:, :8] ** 2 + Y1[:, 8:] ** 2
    assert np.max(np.abs(qq - q)) < 1e-8
