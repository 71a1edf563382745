"""Shared factories and independent oracles for the test suite.

The oracles here deliberately avoid the library's own computational paths:
mutual informations come from empirical sample covariances, conditional
variances from explicit Schur complements or regression residuals, and
log-determinants from eigenvalue products.
"""

import numpy as np

from cransim.channel import ChannelRealization


def cn_samples(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian samples with given variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        * np.sqrt(np.asarray(var, dtype=float) / 2.0)


def rand_channel(rng, n_bs, n_ms, sigma_lo=0.5, sigma_hi=2.0):
    """Synthetic unit-scale channel realization for solver tests."""
    h_ul = cn_samples(rng, (n_bs, n_ms))
    h_dl = cn_samples(rng, (n_ms, n_bs))
    return ChannelRealization(
        h_ul=h_ul, h_dl=h_dl,
        sigma2_z_ul=rng.uniform(sigma_lo, sigma_hi, n_bs),
        sigma2_z_dl=rng.uniform(sigma_lo, sigma_hi, n_ms),
        slot_index=0)


def rand_psd(rng, n, scale=1.0):
    """Random Hermitian positive definite matrix."""
    g = cn_samples(rng, (n, n))
    return scale * (g @ g.conj().T + 0.1 * np.eye(n))


def logdet2_oracle(m):
    """log2 det via eigenvalues (independent of the Cholesky path)."""
    w = np.linalg.eigvalsh(m)
    return float(np.sum(np.log2(w)))


def logdet2_slogdet(m):
    sign, ld = np.linalg.slogdet(m)
    return float(ld / np.log(2.0))


def mi_from_samples(x, y):
    """Gaussian mutual information (bits) from empirical covariances."""
    z = np.concatenate([x, y], axis=1)
    z = z - z.mean(axis=0, keepdims=True)
    cov = z.conj().T @ z / z.shape[0]
    dx = x.shape[1]
    return (logdet2_slogdet(cov[:dx, :dx]) + logdet2_slogdet(cov[dx:, dx:])
            - logdet2_slogdet(cov))


def colored_noise(rng, n_samples, omega):
    """Rows are CN(0, omega) samples (omega Hermitian PSD)."""
    w, v = np.linalg.eigh(omega)
    factor = v * np.sqrt(np.maximum(w, 0.0))
    white = cn_samples(rng, (n_samples, omega.shape[0]))
    return white @ factor.T
