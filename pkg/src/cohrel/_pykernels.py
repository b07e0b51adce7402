"""Pure numpy implementations of the likelihood and latent-draw kernels."""
from __future__ import annotations

import numpy as np

EXACT, RIGHT, LEFT, INTERVAL = 0, 1, 2, 3
# exact observations this close to the location are treated as impossible
LOCATION_GAP = 1e-12


def interval_loglik(beta, eta, mu, l, u, code):
    """Sum of Weibull log-likelihood contributions for coded intervals."""
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    code = np.asarray(code)
    zl = np.maximum(l - mu, 0.0) / eta
    zu = np.maximum(u - mu, 0.0) / eta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hl = zl**beta
        hu = np.where(np.isinf(u), np.inf, zu**beta)
        ex = code == EXACT
        total = 0.0
        if np.any(ex):
            z = zl[ex]
            if np.any(l[ex] - mu <= LOCATION_GAP):
                return -np.inf
            total += np.sum(np.log(beta / eta) + (beta - 1.0) * np.log(z) - hl[ex])
        rt = code == RIGHT
        total -= np.sum(hl[rt])
        cens = (code == LEFT) | (code == INTERVAL)
        if np.any(cens):
            a = np.where(code[cens] == LEFT, 0.0, hl[cens])
            b = hu[cens]
            diff = b - a
            if np.any(diff <= 0):
                return -np.inf
            total += np.sum(-a + np.where(diff > np.log(2.0), np.log1p(-np.exp(-diff)), np.log(-np.expm1(-diff))))
    return float(total)


def branch_likelihoods(beta, eta, mu, t):
    """Density, reliability and distribution function of each time, as an (n, 3) array."""
    t = np.asarray(t, dtype=float)
    z = np.maximum(t - mu, 0.0) / eta
    with np.errstate(divide="ignore", invalid="ignore"):
        h = z**beta
        rel = np.exp(-h)
        dens = np.where(t - mu > LOCATION_GAP, beta / eta * z ** (beta - 1.0) * rel, 0.0)
    return np.column_stack([dens, rel, -np.expm1(-h)])


def latent_draw(beta, eta, mu, t, lam1, lam2, lam3, uniforms):
    """Censor-type codes (1 exact, 2 right, 3 left) for masked rows.

    Returns ``(codes, bad)`` where ``bad`` is the first row whose weights are
    all zero, or -1.
    """
    w = branch_likelihoods(beta, eta, mu, t) * np.array([lam1, lam2, lam3])
    total = w.sum(axis=1)
    zero = np.flatnonzero(~(total > 0))
    if zero.size:
        return np.zeros(len(t), dtype=np.int8), int(zero[0])
    c1 = w[:, 0] / total
    c2 = (w[:, 0] + w[:, 1]) / total
    u = np.asarray(uniforms)
    codes = np.where(u < c1, 1, np.where(u < c2, 2, 3)).astype(np.int8)
    # guard against rounding picking a zero-weight branch at the top end
    codes = np.where((codes == 3) & (w[:, 2] == 0), np.where(w[:, 1] > 0, 2, 1), codes).astype(np.int8)
    return codes, -1


def reliability_matrix(beta, eta, mu, t):
    """``R(t_k | theta_i)`` for draws ``i`` (rows) and times ``k`` (columns)."""
    beta, eta, mu = (np.asarray(a, dtype=float)[:, None] for a in (beta, eta, mu))
    z = np.maximum(np.asarray(t, dtype=float)[None, :] - mu, 0.0) / eta
    return np.exp(-(z**beta))
