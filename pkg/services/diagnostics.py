"""
Chain Diagnostics
Split R-hat and effective sample size for arrays shaped (n_chains, n_draws, ...)
"""

import numpy as np


def _check(chains: np.ndarray) -> np.ndarray:
    chains = np.asarray(chains, dtype=float)
    if chains.ndim < 2:
        raise ValueError("Chains array must have at least 2 dimensions (n_chains, n_draws)")
    return chains


def rhat(chains: np.ndarray) -> np.ndarray:
    """
    Potential scale reduction factor per variable.
    Variables that are constant across every chain get 1.0.
    """
    chains = _check(chains)
    _, n = chains.shape[:2]
    if n < 2:
        return np.full(chains.shape[2:], np.nan)
    chain_means = chains.mean(axis=1)
    within = chains.var(axis=1, ddof=1).mean(axis=0)
    if chains.shape[0] > 1:
        between = chain_means.var(axis=0, ddof=1) * n
    else:
        between = np.zeros_like(within)
    var_hat = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(var_hat / within)
    out = np.where((within == 0) & (var_hat == 0), 1.0, out)
    return np.where((within == 0) & (var_hat > 0), np.inf, out)


def split_rhat(chains: np.ndarray) -> np.ndarray:
    """R-hat after splitting every chain into two halves"""
    chains = _check(chains)
    half = chains.shape[1] // 2
    if half < 2:
        return np.full(chains.shape[2:], np.nan)
    split = np.concatenate([chains[:, :half], chains[:, half : 2 * half]], axis=0)
    return rhat(split)


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    """Autocorrelation along axis 1 via FFT, normalized at lag 0"""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, n=size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), n=size, axis=1)[:, :n]
    with np.errstate(divide="ignore", invalid="ignore"):
        return acov / acov[:, :1]


def effective_sample_size(chains: np.ndarray) -> np.ndarray:
    """
    ESS per variable from the chain-averaged autocorrelation, summed over
    consecutive lag pairs while their sum stays positive. Capped at the draw count.
    """
    chains = _check(chains)
    m, n = chains.shape[:2]
    flat = chains.reshape(m, n, -1)
    total = m * n
    out = np.empty(flat.shape[2])
    for k in range(flat.shape[2]):
        x = flat[:, :, k]
        if n < 4 or np.all(x.var(axis=1) == 0):
            out[k] = total
            continue
        rho = np.nanmean(_autocorrelation(x), axis=0)
        tau = -1.0
        for t in range(0, n - 1, 2):
            pair = rho[t] + rho[t + 1]
            if not pair > 0:
                break
            tau += 2 * pair
        out[k] = min(total, total / max(tau, 1e-12))
    return out.reshape(chains.shape[2:])


def integrated_time(chains: np.ndarray) -> float:
    """Largest integrated autocorrelation time across variables (in draws)"""
    chains = _check(chains)
    ess = np.atleast_1d(effective_sample_size(chains))
    return float(chains.shape[0] * chains.shape[1] / max(float(ess.min()), 1.0))
