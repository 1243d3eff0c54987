"""Pure numpy implementations of the hot kernels.

Mirrors the API of the compiled ``_kernels`` extension.  Degenerate weight
vectors are signalled by a NaN return value; callers turn that into an
exception.
"""
import numpy as np

NAME = "python"

_BLOCK = 256
LOG_2PI = 1.8378770664093453


def _shifted(logw):
    m = logw.max()
    if not np.isfinite(m):
        return None, m
    if np.isnan(logw).any():
        return None, np.nan
    return np.exp(logw - m), m


def inverse_cdf(cumw, u, total=None):
    """Indices ``i`` with ``cumw[i-1] <= u*total < cumw[i]``.

    Zero-width cells are never selected; ``u`` must lie in [0, 1).
    """
    if total is None:
        total = cumw[-1]
    v = np.minimum(u * total, np.nextafter(total, 0.0))
    return np.searchsorted(cumw, v, side="right").astype(np.int64)


def multinomial_logw(logw, u, idx):
    """Fill ``idx`` with multinomial draws from log-weights; return the log mean weight."""
    w, m = _shifted(logw)
    if w is None:
        return np.nan
    c = np.cumsum(w)
    total = c[-1]
    idx[:] = inverse_cdf(c, u, total)
    return m + np.log(total / logw.shape[0])


def systematic_logw(logw, u0, idx):
    """Fill ``idx`` with stratified-by-one-uniform draws; return the log mean weight."""
    w, m = _shifted(logw)
    if w is None:
        return np.nan
    c = np.cumsum(w)
    total = c[-1]
    n = idx.shape[0]
    u = (np.arange(n) + u0) / n
    idx[:] = inverse_cdf(c, u, total)
    return m + np.log(total / logw.shape[0])


def log_mean_exp(logw):
    w, m = _shifted(logw)
    if w is None:
        return np.nan
    return m + np.log(w.sum() / logw.shape[0])


def backward_indices(hx, x_next, beta, tau2, u, idx, threads=1):
    """Backward-sampling indices for a batch of paths.

    For path ``i`` selects ``j`` with probability proportional to
    ``exp(-(x_next[i] - beta[i] * hx[j])**2 / (2 * tau2[i]))``.  A
    non-positive ``tau2[i]`` selects the nearest particle.
    """
    m = x_next.shape[0]
    for s in range(0, m, _BLOCK):
        e = min(s + _BLOCK, m)
        d = (x_next[s:e, None] - beta[s:e, None] * hx[None, :]) ** 2
        dmin = d.min(axis=1)
        t2 = tau2[s:e]
        pos = t2 > 0
        scale = np.where(pos, 0.5 / np.where(pos, t2, 1.0), 0.0)
        c = np.cumsum(np.exp(-(d - dmin[:, None]) * scale[:, None]), axis=1)
        total = c[:, -1]
        v = np.minimum(u[s:e] * total, np.nextafter(total, 0.0))
        out = (c <= v[:, None]).sum(axis=1)
        if not pos.all():
            out = np.where(pos, out, d.argmin(axis=1))
        idx[s:e] = out
    return idx


def pl_scalar_step(x, y, beta, s2k, t2, nonlinear, u, z, idx, x_prev, x_next):
    """Fused resample-propagate step for the scalar models (numpy twin)."""
    gx = x / (1.0 + x * x) if nonlinear else x
    v = s2k + t2
    d = y - beta * gx
    logw = -0.5 * (LOG_2PI + np.log(v) + d * d / v)
    lm = multinomial_logw(logw, u, idx)
    if np.isnan(lm):
        return lm
    x_prev[:] = x[idx]
    g = gx[idx]
    pick = lambda p: p[idx] if p.shape[0] > 1 else p[0]
    R, V = pick(t2), pick(s2k)
    a = pick(beta) * g
    A = R / (R + V)
    x_next[:] = a + A * (y - a) + np.sqrt(A * V) * z
    return lm
