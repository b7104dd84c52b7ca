"""Brute-force reference computations, independent of the FFT/Woodbury paths."""

import numpy as np


def dft_matrix(n):
    l, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * k * l / n) / np.sqrt(n)


def direct_signature(tau, nu, H, fc, df, t_sym):
    """O((NM)^2)-style direct sum of the stacked echo for a unit target."""
    n_sc, n_sym = H.shape
    out = np.zeros(n_sc * n_sym, dtype=complex)
    for m in range(n_sym):
        dop = np.exp(2j * np.pi * fc * m * t_sym * nu)  # conj(c)_m
        for l in range(n_sc):
            acc = 0j
            for n in range(n_sc):
                acc += H[n, m] * np.exp(2j * np.pi * n * l / n_sc) * np.exp(-2j * np.pi * n * df * tau)
            out[m * n_sc + l] = acc / np.sqrt(n_sc) * dop
    return out


def direct_correlation(y, taus, nus, H, fc, df, t_sym):
    """s(x)^H y for every (tau, nu), with s built by direct summation."""
    out = np.zeros((len(taus), len(nus)), dtype=complex)
    for i, tau in enumerate(taus):
        for j, nu in enumerate(nus):
            out[i, j] = np.vdot(direct_signature(tau, nu, H, fc, df, t_sym), y)
    return out


def dense_covariance(sigma2, sigs, variances):
    dim = len(sigs[0]) if sigs else None
    C = sigma2 * np.eye(dim, dtype=complex)
    for s, v in zip(sigs, variances):
        C += v * np.outer(s, s.conj())
    return C


def inv_sqrt_hermitian(C):
    w, V = np.linalg.eigh(C)
    return (V / np.sqrt(w)) @ V.conj().T


def dense_gic(y, s, C):
    """Statistic via the explicit whitened projector and ML amplitude, densely."""
    Ci = np.linalg.inv(C)
    Cmh = inv_sqrt_hermitian(C)
    denom = (s.conj() @ Ci @ s).real
    T = Cmh @ np.outer(s, s.conj()) @ Cmh / denom
    J = np.linalg.norm(T @ Cmh @ y) ** 2
    alpha = (s.conj() @ Ci @ y) / denom
    return J, alpha


def qam_fourth_moment_enumerated(order):
    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2)
    pts = np.array([complex(i, q) for i in levels for q in levels])
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return np.mean(np.abs(pts) ** 4)
