"""Compiled per-neuron loops for the locally connected layers.

Each neuron gathers its patch straight from the zero-padded presynaptic
array, so the ``n_neurons x fan_in`` patch matrix is never materialised.
Patch element order is ``(row, col, channel)``, matching
:func:`visnet.network.extract_patches`.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def patch_dot(padded, patch, W, raw, norms, wsq):
    """Dot products of normalised patches with weight rows.

    Fills ``raw[n] = w_n . x_n / |x_n|`` (0 for an all-zero patch),
    ``norms[n] = |x_n|`` and ``wsq[n] = |w_n|^2``.
    """
    G = raw.shape[0]
    side = int(np.sqrt(G))
    C = padded.shape[2]
    for i in range(side):
        for j in range(side):
            n = i * side + j
            s = 0.0
            ss = 0.0
            ww = 0.0
            k = 0
            for a in range(patch):
                for b in range(patch):
                    for c in range(C):
                        v = padded[i + a, j + b, c]
                        w = W[n, k]
                        s += w * v
                        ss += v * v
                        ww += w * w
                        k += 1
            nrm = np.sqrt(ss)
            norms[n] = nrm
            wsq[n] = ww
            raw[n] = s / nrm if nrm > 0.0 else 0.0


@njit(cache=True, fastmath=True)
def hebbian_update(padded, patch, W, norms, raw, wsq, coef, degenerate):
    """``w_n <- (w_n + coef[n] * x_n/|x_n|) / |...|`` for rows with ``coef[n] != 0``.

    ``raw`` and ``wsq`` must come from :func:`patch_dot` on the same ``W``;
    they give the updated norm without a second pass over the row.
    Rows whose update would collapse to zero norm are left untouched and
    flagged in ``degenerate``.
    """
    G = W.shape[0]
    side = int(np.sqrt(G))
    C = padded.shape[2]
    for i in range(side):
        for j in range(side):
            n = i * side + j
            cf = coef[n]
            if cf == 0.0 or norms[n] == 0.0:
                continue
            new_sq = wsq[n] + 2.0 * cf * raw[n] + cf * cf
            if not new_sq > 0.0:
                degenerate[n] = True
                continue
            scale = 1.0 / np.sqrt(new_sq)
            c_n = cf / norms[n]
            k = 0
            for a in range(patch):
                for b in range(patch):
                    for c in range(C):
                        W[n, k] = (W[n, k] + c_n * padded[i + a, j + b, c]) * scale
                        k += 1


@njit(cache=True, fastmath=True)
def md_update(padded, patch, W, norms, mean, var, alpha, delta, degenerate):
    """Mahalanobis-gradient step for every row.

    ``w_n <- normalise(w_n + alpha * (grad_n - w_n))`` where ``grad_n`` is the
    gradient of the diagonal-covariance Mahalanobis distance at the normalised
    patch ``x_n``.  Rows that end with zero norm are flagged in ``degenerate``.
    """
    G = W.shape[0]
    side = int(np.sqrt(G))
    C = padded.shape[2]
    F = W.shape[1]
    diff = np.empty(F)
    for i in range(side):
        for j in range(side):
            n = i * side + j
            inv = 1.0 / norms[n] if norms[n] > 0.0 else 0.0
            k = 0
            d2 = 0.0
            for a in range(patch):
                for b in range(patch):
                    for c in range(C):
                        d = padded[i + a, j + b, c] * inv - mean[k]
                        diff[k] = d
                        d2 += d * d / var[k]
                        k += 1
            dm = np.sqrt(d2)
            ss = 0.0
            for k in range(F):
                g = diff[k] / var[k] / dm if dm > delta else 0.0
                w = W[n, k] + alpha * (g - W[n, k])
                W[n, k] = w
                ss += w * w
            nrm = np.sqrt(ss)
            if nrm > 0.0:
                for k in range(F):
                    W[n, k] /= nrm
                degenerate[n] = False
            else:
                degenerate[n] = True


@njit(cache=True, fastmath=True)
def patch_moments(padded, patch, norms, mean, m2):
    """Two-pass mean and sum of squared deviations of the normalised patches."""
    G = norms.shape[0]
    side = int(np.sqrt(G))
    C = padded.shape[2]
    F = mean.shape[0]
    mean[:] = 0.0
    m2[:] = 0.0
    for i in range(side):
        for j in range(side):
            n = i * side + j
            inv = 1.0 / norms[n] if norms[n] > 0.0 else 0.0
            k = 0
            for a in range(patch):
                for b in range(patch):
                    for c in range(C):
                        mean[k] += padded[i + a, j + b, c] * inv
                        k += 1
    for k in range(F):
        mean[k] /= G
    for i in range(side):
        for j in range(side):
            n = i * side + j
            inv = 1.0 / norms[n] if norms[n] > 0.0 else 0.0
            k = 0
            for a in range(patch):
                for b in range(patch):
                    for c in range(C):
                        d = padded[i + a, j + b, c] * inv - mean[k]
                        m2[k] += d * d
                        k += 1


@njit(cache=True, fastmath=True)
def pegasos_epochs(X, Y, order, lam, W, t0):
    """Run one-vs-rest Pegasos over the rows listed in ``order``.

    ``X`` is ``n x d`` (bias column included), ``Y`` is ``n x C`` in
    {-1, +1} and ``W`` is ``C x d``, updated in place.  Step ``t`` uses
    rate ``1 / (lam * t)``; every class sees the same sample sequence.
    Returns the last step index.
    """
    C, d = W.shape
    t = t0
    radius = 1.0 / np.sqrt(lam)
    for r in range(order.shape[0]):
        i = order[r]
        t += 1
        eta = 1.0 / (lam * t)
        shrink = 1.0 - eta * lam
        for c in range(C):
            s = 0.0
            for k in range(d):
                s += W[c, k] * X[i, k]
            y = Y[i, c]
            nrm = 0.0
            if y * s < 1.0:
                for k in range(d):
                    w = shrink * W[c, k] + eta * y * X[i, k]
                    W[c, k] = w
                    nrm += w * w
            else:
                for k in range(d):
                    w = shrink * W[c, k]
                    W[c, k] = w
                    nrm += w * w
            nrm = np.sqrt(nrm)
            if nrm > radius:
                f = radius / nrm
                for k in range(d):
                    W[c, k] *= f
    return t
