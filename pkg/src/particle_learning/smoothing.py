"""Backward-sampling smoother over a stored filter history.

Each path starts from a particle of the final cloud, draws its parameter
vector once from ``p(theta | s_T)`` and keeps it for the whole backward
pass.  Going from ``t+1`` to ``t`` the path picks one of the time-``t``
filtered particles with probability proportional to the transition density
``p(x_{t+1} | x_t, theta)`` (times the regime transition probability for
models with discrete regimes).  Cost is O(T N M).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .core import take_values
from .errors import MissingHistory
from .filters import summarize
from .rng import SMOOTH, StreamFactory

_BLOCK = 128


@dataclass
class SmoothedDraws:
    """Joint draws from the smoothing distribution.

    Attributes
    ----------
    paths : ndarray, shape (M, T)
        State trajectories ``x_1 .. x_T``.
    thetas : dict of str -> ndarray, shape (M,)
        Parameter draw attached to each path (learned parameters only).
    aux : ndarray, shape (M, T) or None
        Regime trajectories for models with discrete regimes.
    """

    paths: np.ndarray
    thetas: dict
    aux: np.ndarray = None

    @property
    def n_paths(self):
        return self.paths.shape[0]

    @property
    def T(self):
        return self.paths.shape[1]

    def mean(self):
        return self.paths.mean(axis=0)

    def var(self):
        return self.paths.var(axis=0)

    def summaries(self):
        """Per-t ``mean, sd, q01 ... q99`` of the smoothed state, shape (T, 9)."""
        return summarize(self.paths.T)


def _regime_logp(model, thetas, lam_next, lam):
    # log P(l_{t+1} | l_t) for a (B,) path block against (N,) candidates
    stay = np.where(lam[None, :] == 1, thetas["p"][:, None], thetas["q"][:, None])
    p = np.where(lam[None, :] == lam_next[:, None], stay, 1.0 - stay)
    with np.errstate(divide="ignore"):
        return np.log(p)


def backward_logweights(model, x_next, candidates, thetas, aux_next=None, aux=None):
    """Unnormalized backward log-weights, shape (B, N).

    Parameters
    ----------
    model : StateSpaceModel
    x_next : ndarray, shape (B,)
        States at ``t+1`` of a block of paths.
    candidates : ndarray, shape (N,)
        Filtered particles at ``t``.
    thetas : dict of str -> ndarray, shape (B,) or scalar
        Parameters attached to the paths.
    aux_next, aux : ndarray, optional
        Regimes of the paths at ``t+1`` and of the candidates at ``t``.
    """
    coef, var = model.evolution_coefficients(thetas)
    coef = np.broadcast_to(np.asarray(coef, dtype=np.float64), x_next.shape)
    var = np.broadcast_to(np.asarray(var, dtype=np.float64), x_next.shape)
    d = x_next[:, None] - coef[:, None] * model.transition_basis(candidates)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = -0.5 * d * d / var[:, None]
    if model.aux_kind == "discrete":
        th = {k: np.broadcast_to(np.asarray(v, dtype=np.float64), x_next.shape)
              for k, v in thetas.items()}
        lw = lw + _regime_logp(model, th, aux_next, aux)
    return lw


def backward_weights(model, x_next, candidates, thetas, aux_next=None, aux=None):
    """Normalized backward weights for a single path, shape (N,).

    A zero transition variance puts all mass on the nearest candidate.
    """
    x_next = np.atleast_1d(np.asarray(x_next, dtype=np.float64))
    candidates = np.asarray(candidates, dtype=np.float64)
    _, var = model.evolution_coefficients(thetas)
    if np.all(np.asarray(var) <= 0):
        coef, _ = model.evolution_coefficients(thetas)
        d = np.abs(x_next[0] - np.asarray(coef).ravel()[0] * model.transition_basis(candidates))
        w = np.zeros(candidates.shape[0])
        w[np.argmin(d)] = 1.0
        return w
    an = None if aux_next is None else np.atleast_1d(aux_next)
    lw = backward_logweights(model, x_next, candidates, thetas, an, aux)[0]
    w = np.exp(lw - lw.max())
    return w / w.sum()


def _draw_block(lw, u):
    # inverse-CDF draw per row of a (B, N) log-weight block
    c = np.cumsum(np.exp(lw - lw.max(axis=1, keepdims=True)), axis=1)
    total = c[:, -1]
    v = np.minimum(u * total, np.nextafter(total, 0.0))
    return (c <= v[:, None]).sum(axis=1)


def backward_smooth(model, history, m_paths=None, seed=0, replication=0, threads=1):
    """Draw ``m_paths`` joint trajectories from the smoothing distribution.

    Parameters
    ----------
    model : StateSpaceModel
        The model used for filtering.
    history : History or RunReport
        Stored filter output (``run_filter(..., store_history=True)``).
    m_paths : int, optional
        Number of paths; defaults to the number of particles.
    seed, replication : int
        Key of the smoothing random stream.
    threads : int
        Worker threads of the compiled backward kernel.  Results do not
        depend on it.

    Returns
    -------
    SmoothedDraws

    Raises
    ------
    MissingHistory
        When the filter run did not store its particles.
    """
    history = getattr(history, "history", history)
    if history is None or not hasattr(history, "states"):
        raise MissingHistory("filter history not stored; run the filter with store_history=True")
    states = history.states
    T, N = states.shape
    if T == 0 or history.final is None:
        raise MissingHistory("filter history is empty")
    M = N if m_paths is None else int(m_paths)
    if M < 1:
        raise ValueError(f"m_paths must be positive, got {M}")

    streams = StreamFactory(seed, replication, SMOOTH)
    rng = streams.at(0)
    final = history.final
    k = rng.integers(0, N, size=M)
    thetas = take_values(final.thetas, k)
    if model.learn:
        stats = take_values(final.param_stats, k)
        thetas.update(model.sample_theta(stats, rng, M))
    thetas = {n: np.broadcast_to(np.asarray(v, dtype=np.float64), (M,)).copy()
              for n, v in thetas.items()}

    discrete = model.aux_kind == "discrete" and history.aux is not None
    paths = np.empty((M, T))
    paths[:, T - 1] = states[T - 1][k]
    aux_paths = None
    if discrete:
        aux_paths = np.empty((M, T), dtype=np.int64)
        aux_paths[:, T - 1] = history.aux[T - 1][k]

    coef, var = model.evolution_coefficients(thetas)
    coef = np.ascontiguousarray(np.broadcast_to(coef, (M,)), dtype=np.float64)
    var = np.ascontiguousarray(np.broadcast_to(var, (M,)), dtype=np.float64)
    kern = kernels()
    idx = np.empty(M, dtype=np.int64)
    for t in range(T - 2, -1, -1):
        u = streams.at(T - 1 - t).random(M)
        cand = states[t]
        x_next = paths[:, t + 1]
        if discrete:
            for s in range(0, M, _BLOCK):
                e = min(s + _BLOCK, M)
                block = {n: v[s:e] for n, v in thetas.items()}
                lw = backward_logweights(model, x_next[s:e], cand, block,
                                         aux_paths[s:e, t + 1], history.aux[t])
                idx[s:e] = _draw_block(lw, u[s:e])
            aux_paths[:, t] = history.aux[t][idx]
        else:
            hx = np.ascontiguousarray(model.transition_basis(cand), dtype=np.float64)
            kern.backward_indices(hx, np.ascontiguousarray(x_next), coef, var, u, idx,
                                  int(threads))
        paths[:, t] = cand[idx]
    learned = {n: thetas[n] for n in model.learn}
    return SmoothedDraws(paths, learned, aux_paths)


__all__ = ["SmoothedDraws", "backward_smooth", "backward_weights", "backward_logweights"]
