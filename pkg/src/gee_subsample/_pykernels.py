"""Pure-numpy kernels. Reference implementation and fallback for the
compiled module; both expose the same functions with the same semantics."""

import numpy as np

GAUSSIAN, POISSON, BINOMIAL = 0, 1, 2
LOGIT_EPS = 2.0**-52
LOG_MAX = float(np.log(np.finfo(np.float64).max))


def standardize(X, y, beta, family):
    """Row scales ``g'(eta)/sd``, Pearson residuals and ``sd = sqrt(nu(mu))``.

    Returns ``(scale, resid, sd, status, bad)``; ``status`` is 0 on success,
    1 if a log-link mean overflows, 2 if a variance is not positive, and
    ``bad`` is the flat ``i * n + j`` index of the first offending cell.
    """
    eta = X @ beta
    if family == GAUSSIAN:
        ones = np.ones_like(eta)
        return ones, y - eta, ones.copy(), 0, -1
    if family == POISSON:
        over = np.flatnonzero(eta > LOG_MAX)
        if over.size:
            return None, None, None, 1, int(over[0])
        mu = np.exp(eta)
        dmu = nu = mu
    else:
        with np.errstate(over="ignore"):
            mu = 1.0 / (1.0 + np.exp(-eta))
        mu = np.clip(mu, LOGIT_EPS, 1.0 - LOGIT_EPS)
        dmu = nu = mu * (1.0 - mu)
    bad = np.flatnonzero(~(nu > 0))
    if bad.size:
        return None, None, None, 2, int(bad[0])
    sd = np.sqrt(nu)
    return dmu / sd, (y - mu) / sd, sd, 0, -1


def accumulate(X, scale, resid, Rinv, weights, want_vectors=False, want_info=True):
    """Weighted GEE score and information in one pass over subjects.

    With ``T_i = diag(scale_i) X_i`` (i.e. ``A_i^{-1/2} D_i``) and ``r_i``
    the Pearson residuals, returns

    * ``score = sum_i w_i T_i' R^{-1} r_i``
    * ``info  = sum_i w_i T_i' R^{-1} T_i``
    * ``vectors[i] = T_i' R^{-1} r_i`` (only when ``want_vectors``)

    ``info`` is ``None`` when ``want_info`` is false.
    """
    m, n, p = X.shape
    T = X * scale[:, :, None]
    G = np.matmul(Rinv, T)
    vectors = np.einsum("ijk,ij->ik", G, resid)
    score = weights @ vectors
    info = None
    if want_info:
        info = (T * weights[:, None, None]).reshape(m * n, p).T @ G.reshape(m * n, p)
        info = 0.5 * (info + info.T)
    return score, info, (vectors if want_vectors else None)


def alias_table(pi):
    """Vose alias table. Small/large worklists are filled in index order and
    used as stacks, so the table depends only on ``pi``."""
    m = len(pi)
    ps = [float(x) * m for x in pi]
    prob = [1.0] * m
    alias = list(range(m))
    small = [i for i in range(m) if ps[i] < 1.0]
    large = [i for i in range(m) if ps[i] >= 1.0]
    while small and large:
        lo = small.pop()
        hi = large.pop()
        prob[lo] = ps[lo]
        alias[lo] = hi
        ps[hi] = (ps[hi] + ps[lo]) - 1.0
        if ps[hi] < 1.0:
            small.append(hi)
        else:
            large.append(hi)
    return np.array(prob, dtype=np.float64), np.array(alias, dtype=np.intp)
