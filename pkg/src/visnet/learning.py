"""
Unsupervised training of the hierarchy.

Two weight rules are available:

* the Hebbian trace rule, ``dw = alpha * trace * x`` with an exponentially
  decaying postsynaptic trace (``simplified``, ``rbf``, ``li``, ``li-dog-rgb``);
* a Mahalanobis-gradient rule, ``dw = alpha * (grad D_M(x, mu) - w)`` using a
  per-layer diagonal covariance estimated online (``md``).

Both are followed by unit-L2 renormalisation of the updated weight rows.
Training presents each object as a short sequence of views; traces are reset
to zero at the start of every sequence.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from .errors import DegenerateWeightError, ParameterError
from .network import MD, layer_response, normalize_weights

log = logging.getLogger(__name__)

JITTER = "jitter"
EXEMPLAR = "exemplar"


@dataclass
class LearningParams:
    alpha: float = 0.01
    eta: float = 0.8
    epochs: int = 5
    sequence_length: int = 5
    seed: int = 0
    variant: Optional[str] = None  # None -> the network's own variant
    views: str = "auto"  # "jitter", "exemplar" or "auto" (from the dataset)
    rotation_range: Tuple[float, float] = (-180.0, 180.0)
    translation_range: Tuple[float, float] = (-0.2, 0.2)
    md_epsilon: float = 1e-6
    md_delta: float = 1e-9

    def validate(self):
        if not self.alpha >= 0:
            raise ParameterError("alpha must be >= 0", "alpha")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError("eta must lie in [0, 1]", "eta")
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0", "epochs")
        if self.sequence_length < 1:
            raise ParameterError("sequence_length must be >= 1", "sequence_length")
        if self.views not in ("auto", JITTER, EXEMPLAR):
            raise ParameterError(f"unknown view mode {self.views!r}", "views")
        lo, hi = self.rotation_range
        if not -180.0 <= lo <= hi <= 180.0:
            raise ParameterError("rotation_range must lie within [-180, 180]", "rotation_range")
        lo, hi = self.translation_range
        if not -0.2 <= lo <= hi <= 0.2:
            raise ParameterError("translation_range must lie within [-0.2, 0.2]", "translation_range")
        if not self.md_epsilon > 0:
            raise ParameterError("md_epsilon must be > 0", "md_epsilon")


class MahalanobisStats:
    """Online mean and diagonal covariance of a layer's (normalised) patches.

    Variances are population variances floored at ``epsilon``; before any
    sample is seen the covariance is the identity.
    """

    def __init__(self, dim, epsilon=1e-6):
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)
        self.count = 0
        self.epsilon = epsilon

    @property
    def var(self):
        if self.count == 0:
            return np.ones_like(self.mean)
        return np.maximum(self.m2 / self.count, self.epsilon)

    @classmethod
    def from_moments(cls, mean, var, count, epsilon=1e-6):
        stats = cls(len(mean), epsilon)
        stats.mean = np.asarray(mean, dtype=np.float64).copy()
        stats.count = int(count)
        stats.m2 = np.asarray(var, dtype=np.float64) * max(stats.count, 1)
        return stats

    def merge(self, batch_mean, batch_m2, n):
        """Chan et al. pairwise combination with a batch summary."""
        if n == 0:
            return self
        total = self.count + n
        delta = batch_mean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + batch_m2 + delta**2 * (self.count * n / total)
        self.count = total
        return self


def update_running_stats(stats, x):
    """Fold one sample (1-D) or a batch of samples (2-D, one per row) into ``stats``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != stats.mean.shape[0]:
        raise ParameterError("sample dimension does not match the statistics", "x")
    if x.ndim == 1:
        stats.count += 1
        delta = x - stats.mean
        stats.mean = stats.mean + delta / stats.count
        stats.m2 = stats.m2 + delta * (x - stats.mean)
        return stats
    mean = x.mean(axis=0)
    return stats.merge(mean, ((x - mean) ** 2).sum(axis=0), x.shape[0])


def trace_update(prev_trace, y, eta):
    return (1.0 - eta) * y + eta * prev_trace


def _reinit_row(n, rng):
    rng = rng if rng is not None else np.random.default_rng()
    log.warning("weight row collapsed to zero norm; reinitialising")
    return normalize_weights(rng.random(n))


def hebbian_trace_step(weights_row, x, trace, alpha, rng=None):
    """One trace-rule update of a single weight row followed by renormalisation."""
    w = np.asarray(weights_row, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape:
        raise ParameterError("weight and input dimensions differ", "x")
    try:
        return normalize_weights(w + alpha * trace * x)
    except DegenerateWeightError:
        return _reinit_row(w.shape[0], rng)


def mahalanobis_distance(x, stats):
    d = np.asarray(x, dtype=np.float64) - stats.mean
    return float(np.sqrt(np.sum(d * d / stats.var)))


def mahalanobis_gradient(x, stats, delta=1e-9):
    """Gradient of the distance with respect to ``x``; zero where the distance is ~0."""
    x = np.asarray(x, dtype=np.float64)
    dist = mahalanobis_distance(x, stats)
    if dist <= delta:
        return np.zeros_like(x)
    return (x - stats.mean) / stats.var / dist


def md_weight_step(weights_row, x, stats, alpha, rng=None, delta=1e-9):
    w = np.asarray(weights_row, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape:
        raise ParameterError("weight and input dimensions differ", "x")
    grad = mahalanobis_gradient(x, stats, delta)
    try:
        return normalize_weights(w + alpha * (grad - w))
    except DegenerateWeightError:
        return _reinit_row(w.shape[0], rng)


def _ensure_md_stats(layer, epsilon):
    if layer.md_stats is None:
        layer.md_stats = MahalanobisStats(layer.geometry.fan_in, epsilon)
    return layer.md_stats


def present(net, stack, params, rng, variant=None):
    """Forward one view through the network and apply the weight rule layer by layer.

    Returns the list of per-layer activation maps (computed with the weights
    as they were before this view's update).
    """
    variant = variant or net.variant
    data = getattr(stack, "data", stack)
    inp = data
    outputs = []
    for layer in net.layers:
        act = layer_response(layer, inp, variant, net.inhibition)
        g = layer.geometry
        layer.traces = trace_update(layer.traces, act.y, params.eta)
        if params.alpha > 0:
            if variant == MD:
                _md_layer_step(layer, act, params, rng)
            else:
                _hebbian_layer_step(layer, act, params, rng)
        y = act.y.reshape(g.grid, g.grid)
        outputs.append(y)
        inp = y
    return outputs


def _hebbian_layer_step(layer, act, params, rng):
    coef = params.alpha * layer.traces
    degenerate = np.zeros(layer.geometry.n_neurons, dtype=np.bool_)
    _kernels.hebbian_update(
        act.padded,
        layer.geometry.patch,
        layer.weights,
        act.norms,
        act.raw,
        act.wsq,
        coef,
        degenerate,
    )
    for n in np.flatnonzero(degenerate):
        layer.weights[n] = _reinit_row(layer.geometry.fan_in, rng)


def _md_layer_step(layer, act, params, rng):
    g = layer.geometry
    stats = _ensure_md_stats(layer, params.md_epsilon)
    mean = np.empty(g.fan_in)
    m2 = np.empty(g.fan_in)
    _kernels.patch_moments(act.padded, g.patch, act.norms, mean, m2)
    stats.merge(mean, m2, g.n_neurons)
    degenerate = np.zeros(g.n_neurons, dtype=np.bool_)
    _kernels.md_update(
        act.padded,
        g.patch,
        layer.weights,
        act.norms,
        stats.mean,
        stats.var,
        params.alpha,
        params.md_delta,
        degenerate,
    )
    for n in np.flatnonzero(degenerate):
        layer.weights[n] = _reinit_row(g.fan_in, rng)


def _view_mode(params, dataset):
    if params.views != "auto":
        return params.views
    return EXEMPLAR if getattr(dataset, "kind", "symmetry") == "natural" else JITTER


def iter_sequences(dataset, params, rng, indices=None):
    """Yield one list of view images per object, for one epoch.

    Objects are shuffled.  In jitter mode every view is a random rotation and
    translation of the object; in exemplar mode the object is followed by
    other training images of the same class.
    """
    from .symmetry_data import apply_transform

    if indices is None:
        indices = dataset.indices("train")
    indices = np.asarray(indices)
    mode = _view_mode(params, dataset)
    by_class = {}
    if mode == EXEMPLAR:
        labels = np.asarray(dataset.labels)[indices]
        for c in np.unique(labels):
            by_class[c] = indices[labels == c]
    for idx in rng.permutation(indices):
        image = dataset.images[idx]
        if mode == JITTER:
            views = []
            for _ in range(params.sequence_length):
                rot = rng.uniform(*params.rotation_range)
                tx, ty = rng.uniform(*params.translation_range, size=2)
                views.append(apply_transform(image, rot, (tx, ty)))
        else:
            pool = by_class[dataset.labels[idx]]
            others = rng.choice(pool, size=params.sequence_length - 1, replace=True)
            views = [image] + [dataset.images[j] for j in others]
        yield views


def train_network(net, dataset, params, callback=None):
    """Train ``net`` in place on the training split of ``dataset`` and return it."""
    params.validate()
    train_idx = dataset.indices("train")
    if len(train_idx) == 0:
        raise ParameterError("dataset has no training images", "dataset")
    variant = params.variant or net.variant
    rng = np.random.default_rng(params.seed)
    for epoch in range(params.epochs):
        for views in iter_sequences(dataset, params, rng, train_idx):
            for layer in net.layers:
                layer.reset_traces()
            for view in views:
                present(net, net.frontend.encode(view), params, rng, variant)
        if callback is not None:
            callback(epoch, net)
    return net
