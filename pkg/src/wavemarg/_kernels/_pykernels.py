"""Pure numpy implementations of the hot loops.

Used whenever the compiled extension is unavailable, and as the reference
the compiled kernels are tested against.
"""
import numpy as np


def realloc_sweep(phi, t, n_particles):
    """One multiplicative shrink of a configuration field plus its marginal.

    ``phi`` is the flat, C-ordered field on ``block ** n_particles`` nodes and
    ``t`` the per-particle shrink ratio on ``block`` nodes. Returns the shrunk
    field (same shape as ``phi``) and the unscaled marginal
    ``sum_{rest} phi_new**2`` over every particle block but the first.
    """
    block = t.shape[0]
    shape = (block,) * n_particles
    s = np.zeros(shape)
    for j in range(n_particles):
        index = [None] * n_particles
        index[j] = slice(None)
        s = s + t[tuple(index)]
    s /= n_particles
    new = phi.reshape(shape) * np.sqrt(np.maximum(1.0 - s, 0.0))
    sigma = np.sum((new * new).reshape(block, -1), axis=1)
    return new.reshape(phi.shape), sigma


def grad_sq_sum(f):
    """Sum over axes and nodes of squared forward differences, zero-extended."""
    total = 0.0
    for axis in range(f.ndim):
        diff = np.diff(f, axis=axis, append=0)
        total += float(np.sum(diff.real ** 2))
        if np.iscomplexobj(diff):
            total += float(np.sum(diff.imag ** 2))
    return total
