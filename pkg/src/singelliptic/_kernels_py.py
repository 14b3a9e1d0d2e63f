"""Pure numpy kernels, used when the compiled extension is unavailable.

Both backends share one contract; see ``kernels.py``.
"""
import numpy as np


def assemble_elements(grads, vols, uel, lam, w, p, alpha, expo, n, delta):
    """Element residuals, Jacobians and frozen (Picard) coefficients.

    grads (E, k, d), vols (E,), uel (E, k), lam (Q, k), w (Q,) summing to 1.
    Returns res (E, k), jac (E, k, k), kcoef (E,).
    """
    g = np.einsum("ekd,ek->ed", grads, uel)
    uq = uel @ lam.T
    t = np.minimum(np.abs(uq), n)
    base = 1.0 + t
    bq = alpha * base ** (-expo)
    # one-sided derivative from the untruncated branch at |u| = n
    dbq = -expo * alpha * base ** (-expo - 1.0) * np.where(uq < 0, -1.0, 1.0)
    dbq = np.where(np.abs(uq) <= n, dbq, 0.0)
    bbar = bq @ w
    dbbar = (dbq * w) @ lam  # (E, k)

    s = np.einsum("ed,ed->e", g, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(s > 0, s ** (0.5 * (p - 2.0)), 0.0)
        sd = s + delta * delta
        coef_d = np.where(sd > 0, sd ** (0.5 * (p - 2.0)), 1.0 if p == 2.0 else 0.0)
        ratio = np.where(sd[:, None, None] > 0, g[:, :, None] * g[:, None, :] / sd[:, None, None], 0.0)
    d = g.shape[1]
    D = coef_d[:, None, None] * (np.eye(d)[None] + (p - 2.0) * ratio)

    gphi_g = np.einsum("ekd,ed->ek", grads, g)
    res = (vols * bbar * coef)[:, None] * gphi_g
    stiff = np.einsum("eid,edc,ejc->eij", grads, D, grads)
    jac = (vols * bbar)[:, None, None] * stiff
    jac += (vols * coef)[:, None, None] * gphi_g[:, :, None] * dbbar[:, None, :]
    kcoef = bbar * coef_d
    return res, jac, kcoef


def _fraction_above(vals, t):
    """Fraction of each linear value-simplex where the function exceeds ``t``.

    ``vals`` (P, k) sorted ascending along axis 1.
    """
    k = vals.shape[1]
    if k == 2:
        a, b = vals[:, 0], vals[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            mid = (b - t) / (b - a)
        return np.where(t < a, 1.0, np.where(t < b, mid, 0.0))
    a, b, c = vals[:, 0], vals[:, 1], vals[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        low = 1.0 - (t - a) ** 2 / ((c - a) * (b - a))
        high = (c - t) ** 2 / ((c - a) * (c - b))
    return np.where(t < a, 1.0, np.where(t < b, low, np.where(t < c, high, 0.0)))


def superlevel_measure(vals, vols, ts):
    """Measure of ``{v > t}`` summed over value-simplices, for every ``t`` in ``ts``."""
    vals = np.sort(vals, axis=1)
    out = np.empty(len(ts))
    for i, t in enumerate(ts):
        out[i] = np.dot(vols, _fraction_above(vals, t))
    return out
