import numpy as np
import pytest

from spectral_vgp.spectral_kernel import PolynomialSpectrum, SpectralKernel
from spectral_vgp.synthetic_data import f0_paper, sample_dataset


@pytest.fixture(scope="session")
def poly_kernel():
    return SpectralKernel.from_spectrum(PolynomialSpectrum(0.5))


@pytest.fixture(scope="session")
def small_kernel():
    """Short truncation for tests that form dense prior covariances."""
    return SpectralKernel(PolynomialSpectrum(0.5), 400)


@pytest.fixture(scope="session")
def truth():
    return f0_paper(0.5)


@pytest.fixture(scope="session")
def data200(truth):
    return sample_dataset(truth, 200, 0.1, 11)


def naive_variational(kernel, data, blocks, x):
    """Dense-inverse transcription of the variational mean and variance formulas."""
    s2 = data.sigma**2
    Kuu, Kfu = blocks.K_uu, blocks.K_fu
    Kxu = blocks.k_xu(x)
    S = np.linalg.inv(Kuu + Kfu.T @ Kfu / s2)
    mean = Kxu @ S @ Kfu.T @ data.y / s2
    var = kernel.diag(x) - np.einsum("ij,jk,ik->i", Kxu, np.linalg.inv(Kuu) - S, Kxu)
    return mean, var


def naive_exact(kernel, data, x):
    K = kernel.matrix(data.x)
    Kx = kernel.matrix(x, data.x)
    Ginv = np.linalg.inv(K + data.sigma**2 * np.eye(data.n))
    return Kx @ Ginv @ data.y, kernel.diag(x) - np.einsum("ij,jk,ik->i", Kx, Ginv, Kx)
