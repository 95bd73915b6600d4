"""
The four-layer hierarchical network.

Every neuron owns its weights (no weight sharing).  Neuron ``(i, j)`` of a
layer reads the ``patch x patch`` window of the presynaptic maps centred on
``(i, j)``; windows hanging over the border are zero-padded so every layer
keeps the same grid.  A flattened patch is ordered ``(row, col, channel)``.
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import correlate

from . import _kernels
from .errors import DegenerateWeightError, ParameterError, StructuralError
from .frontend import DOG_RGB_GABOR, FeatureStack, FrontendConfig

log = logging.getLogger(__name__)

SIMPLIFIED = "simplified"
RBF = "rbf"
MD = "md"
LI = "li"
LI_DOG_RGB = "li-dog-rgb"
VARIANTS = (SIMPLIFIED, RBF, MD, LI, LI_DOG_RGB)
INHIBITED = (LI, LI_DOG_RGB)

DEFAULT_PATCHES = (6, 8, 10, 12)


@dataclass
class LayerGeometry:
    grid: int = 80
    patch: int = 6
    in_channels: int = 32

    def __post_init__(self):
        if self.patch < 2:
            raise ParameterError("patch must be >= 2", "patch")
        if self.patch > self.grid:
            raise ParameterError("patch larger than the presynaptic grid", "patch")
        if self.in_channels < 1:
            raise ParameterError("in_channels must be >= 1", "in_channels")

    @property
    def n_neurons(self):
        return self.grid * self.grid

    @property
    def fan_in(self):
        return self.patch * self.patch * self.in_channels


@dataclass
class InhibitionParams:
    radius: int = 1
    strength: float = 0.5

    def __post_init__(self):
        if self.radius < 1:
            raise ParameterError("inhibition radius must be >= 1", "radius")
        if not 0.0 <= self.strength <= 1.0:
            raise ParameterError("inhibition strength must lie in [0, 1]", "strength")


@dataclass
class LayerState:
    geometry: LayerGeometry
    weights: np.ndarray  # n_neurons x fan_in
    traces: np.ndarray  # n_neurons
    rbf_sigma: Optional[float] = None
    md_stats: Optional[object] = None  # learning.MahalanobisStats

    def reset_traces(self):
        self.traces[:] = 0.0


@dataclass
class NetworkState:
    layers: List[LayerState]
    variant: str = SIMPLIFIED
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    inhibition: InhibitionParams = field(default_factory=InhibitionParams)

    @property
    def provenance(self):
        return self.frontend.kind

    @property
    def grid(self):
        return self.layers[-1].geometry.grid

    def copy(self):
        from copy import deepcopy

        return deepcopy(self)


def minmax_normalize(values):
    """Rescale to [0, 1]; a constant input maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ParameterError("cannot normalise an empty vector", "values")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def normalize_weights(w):
    w = np.asarray(w, dtype=np.float64)
    norm = np.linalg.norm(w)
    if not norm > 0.0:
        raise DegenerateWeightError("weight vector has zero norm")
    return w / norm


def normalize_rows(W, out=None):
    """Unit-L2-normalise every row; raises on any zero row."""
    norms = np.sqrt(np.einsum("ij,ij->i", W, W))
    if np.any(~(norms > 0.0)):
        raise DegenerateWeightError("weight row with zero norm")
    return np.divide(W, norms[:, None], out=out)


def rbf_activation(x, c, sigma):
    """Gaussian radial basis response of one neuron centred on ``c``."""
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != c.shape:
        raise ParameterError("input and centre dimensions differ", "x")
    if not sigma > 0:
        raise ParameterError("sigma must be > 0", "sigma")
    d2 = np.sum((x - c) ** 2)
    return float(np.exp(-d2 / (2.0 * sigma**2)))


def extract_patches(inp, patch):
    """All centred patches of a ``G x G x C`` input as a ``G*G x patch*patch*C`` matrix."""
    inp = np.asarray(inp, dtype=np.float64)
    if inp.ndim == 2:
        inp = inp[:, :, None]
    before = patch // 2
    after = patch - 1 - before
    padded = np.pad(inp, ((before, after), (before, after), (0, 0)))
    win = sliding_window_view(padded, (patch, patch), axis=(0, 1))  # G, G, C, p, p
    G0, G1 = inp.shape[:2]
    return win.transpose(0, 1, 3, 4, 2).reshape(G0 * G1, -1)


def normalize_patches(X):
    """L2-normalise rows in place; all-zero rows stay zero."""
    norms = np.sqrt(np.einsum("ij,ij->i", X, X))
    nz = norms > 0.0
    X[nz] /= norms[nz, None]
    return X


def lateral_inhibition(activations, params):
    """Subtract ``strength`` times the mean of each neuron's neighbours.

    The neighbourhood is the ``(2r+1)^2`` window minus the centre, restricted
    to positions inside the grid.  The result is clamped at zero.
    """
    a = np.asarray(activations, dtype=np.float64)
    r = params.radius
    if r >= min(a.shape):
        raise ParameterError("inhibition radius must be smaller than the grid", "radius")
    if params.strength == 0.0:
        return a.copy()
    box = np.ones((2 * r + 1, 2 * r + 1))
    nb_sum = correlate(a, box, mode="constant", cval=0.0) - a
    nb_count = correlate(np.ones_like(a), box, mode="constant", cval=0.0) - 1.0
    return np.maximum(0.0, a - params.strength * nb_sum / nb_count)


def _check_input(layer, inp):
    inp = np.asarray(inp, dtype=np.float64)
    if inp.ndim == 2:
        inp = inp[:, :, None]
    g = layer.geometry
    if inp.shape != (g.grid, g.grid, g.in_channels):
        raise StructuralError(
            f"layer expects input {(g.grid, g.grid, g.in_channels)}, got {inp.shape}"
        )
    return inp


class LayerActivity(NamedTuple):
    """One layer's response to one input.

    ``padded`` is the zero-padded presynaptic array the patches are read from,
    ``norms`` the per-neuron patch norms, ``raw`` the cosine of each patch with
    its weight row, ``wsq`` the squared row norms and ``y`` the flat activations.
    """

    padded: np.ndarray
    norms: np.ndarray
    raw: np.ndarray
    wsq: np.ndarray
    y: np.ndarray


def pad_input(inp, patch):
    before = patch // 2
    after = patch - 1 - before
    return np.ascontiguousarray(np.pad(inp, ((before, after), (before, after), (0, 0))))


def layer_response(layer, inp, variant, inhibition=None) -> LayerActivity:
    """Forward one layer, keeping what the learning rules need."""
    inp = _check_input(layer, inp)
    p = layer.geometry.patch
    padded = pad_input(inp, p)
    n = layer.geometry.n_neurons
    raw = np.empty(n)
    norms = np.empty(n)
    wsq = np.empty(n)
    _kernels.patch_dot(padded, p, layer.weights, raw, norms, wsq)
    if variant == RBF:
        sigma = layer.rbf_sigma
        if sigma is None or not sigma > 0:
            raise ParameterError("RBF layer needs a positive sigma", "rbf.sigma")
        # |x - w|^2 with |x| = 1 for any non-zero normalised patch
        d2 = (norms > 0.0) - 2.0 * raw + wsq
        response = np.exp(-np.maximum(d2, 0.0) / (2.0 * sigma**2))
    else:
        response = raw
    y = minmax_normalize(response)
    if variant in INHIBITED:
        g = layer.geometry.grid
        y = lateral_inhibition(y.reshape(g, g), inhibition or InhibitionParams()).ravel()
    return LayerActivity(padded, norms, raw, wsq, y)


def forward_layer(layer, inp, variant=SIMPLIFIED, inhibition=None):
    g = layer.geometry.grid
    return layer_response(layer, inp, variant, inhibition).y.reshape(g, g)


def forward_network(net, stack):
    """Activations of every layer, bottom to top, each ``grid x grid``."""
    data = stack.data if isinstance(stack, FeatureStack) else np.asarray(stack)
    outputs = []
    inp = data
    for layer in net.layers:
        act = forward_layer(layer, inp, net.variant, net.inhibition)
        outputs.append(act)
        inp = act
    return outputs


def init_layer(geometry, rng, rbf_sigma=None):
    W = rng.random((geometry.n_neurons, geometry.fan_in))
    normalize_rows(W, out=W)
    return LayerState(
        geometry=geometry,
        weights=W,
        traces=np.zeros(geometry.n_neurons),
        rbf_sigma=rbf_sigma,
    )


def init_network(
    variant=SIMPLIFIED,
    frontend=None,
    grid=80,
    patches=DEFAULT_PATCHES,
    seed=0,
    rbf_sigma=0.5,
    inhibition=None,
):
    """Build a seeded, untrained network.

    Weights are drawn uniformly from [0, 1) and each row is normalised.
    """
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}", "variant")
    if frontend is None:
        from .frontend import GRAY_GABOR

        kind = DOG_RGB_GABOR if variant == LI_DOG_RGB else GRAY_GABOR
        frontend = FrontendConfig(kind=kind, out_size=grid)
    if variant == LI_DOG_RGB and frontend.kind != DOG_RGB_GABOR:
        raise ParameterError("variant li-dog-rgb requires the dog-rgb-gabor frontend", "variant")
    if frontend.out_size != grid:
        raise StructuralError("frontend out_size must equal the layer grid")
    if len(patches) < 1:
        raise ParameterError("need at least one layer", "patches")
    rng = np.random.default_rng(seed)
    layers = []
    in_channels = frontend.n_channels
    for p in patches:
        geom = LayerGeometry(grid=grid, patch=int(p), in_channels=in_channels)
        layers.append(init_layer(geom, rng, rbf_sigma if variant == RBF else None))
        in_channels = 1
    return NetworkState(
        layers=layers,
        variant=variant,
        frontend=frontend,
        inhibition=inhibition or InhibitionParams(),
    )
