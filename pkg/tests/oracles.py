"""Independent oracles used only by the tests."""

import numpy as np

from floquet4.coeffs import fourier_p_n, fourier_q_n


def galerkin_matrix(c, antiperiodic=False, modes=30):
    ks = np.arange(-modes, modes + (0 if antiperiodic else 1))
    omega = np.pi * (2 * ks + 1) if antiperiodic else 2 * np.pi * ks
    d = ks[:, None] - ks[None, :]
    phat = np.vectorize(lambda n: fourier_p_n(c, int(n)))(d)
    qhat = np.vectorize(lambda n: fourier_q_n(c, int(n)))(d)
    H = -omega[:, None] * omega[None, :] * phat + qhat
    H[np.diag_indices_from(H)] += omega ** 4
    return H


def galerkin_eigenvalues(c, antiperiodic=False, modes=30, count=12):
    """Lowest eigenvalues of u'''' + (pu')' + qu with (anti)periodic conditions.

    Fourier-Galerkin on e^{iωt}; the lowest ``count`` eigenvalues are polished by
    Rayleigh-Ritz on their eigenvectors, which keeps the error near eps·|λ| rather
    than eps·‖H‖.
    """
    H = galerkin_matrix(c, antiperiodic, modes)
    _, V = np.linalg.eigh(H)
    V = V[:, :count + 4]
    K = V.conj().T @ H @ V
    return np.sort(np.linalg.eigvalsh((K + K.conj().T) / 2))[:count]
