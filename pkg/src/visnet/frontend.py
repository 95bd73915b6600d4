"""
Early-vision frontend: Gabor filter banks and the DoG opponent-colour path.

Two pipelines turn an image into the network's input ``FeatureStack``:

* ``gray-gabor``: a bank of oriented Gabor kernels is convolved with a
  grayscale image, rectified with ``abs`` and bilinearly resampled onto the
  layer-1 grid.
* ``dog-rgb-gabor``: an RGB image is split into luminance / red-green /
  blue-green opponent channels, each channel is centre-surround filtered with a
  difference of Gaussians and then passed through the same Gabor stage.  The
  three sub-stacks are concatenated in ``[L, RG, BG]`` order.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.signal import fftconvolve

from .errors import ParameterError

GRAY_GABOR = "gray-gabor"
DOG_RGB_GABOR = "dog-rgb-gabor"

DEFAULT_FREQUENCIES = (0.2, 0.4, 0.6, 0.8)
DEFAULT_ORIENTATIONS = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)
DEFAULT_PHASES = (0.0, np.pi)


@dataclass
class GaborParams:
    """Gabor bank parameters.

    ``sigma=None`` links the envelope width to each frequency as
    ``0.56 / f`` (roughly one octave of bandwidth).
    """

    frequencies: Sequence[float] = DEFAULT_FREQUENCIES
    orientations: Sequence[float] = DEFAULT_ORIENTATIONS
    phases: Sequence[float] = DEFAULT_PHASES
    sigma: Optional[float] = None
    gamma: float = 0.5
    kernel_size: int = 15

    def validate(self):
        if len(self.frequencies) == 0 or any(f <= 0 for f in self.frequencies):
            raise ParameterError("frequencies must be non-empty and > 0", "frequencies")
        if len(self.orientations) == 0:
            raise ParameterError("orientations must be non-empty", "orientations")
        if len(self.phases) == 0:
            raise ParameterError("phases must be non-empty", "phases")
        if self.sigma is not None and self.sigma <= 0:
            raise ParameterError("sigma must be > 0", "sigma")
        if self.gamma <= 0:
            raise ParameterError("gamma must be > 0", "gamma")
        k = self.kernel_size
        if int(k) != k or k < 3 or k % 2 == 0:
            raise ParameterError("kernel_size must be an odd integer >= 3", "kernel_size")

    @property
    def n_channels(self):
        return len(self.frequencies) * len(self.orientations) * len(self.phases)


@dataclass
class DogParams:
    """Difference-of-Gaussians parameters (centre ``sigma1``, surround ``sigma2``)."""

    sigma1: float = 1.0
    sigma2: float = 1.2
    k: float = 0.6
    kernel_size: int = 3
    allow_equal: bool = False

    def validate(self):
        if self.sigma1 <= 0:
            raise ParameterError("sigma1 must be > 0", "sigma1")
        if self.sigma2 < self.sigma1 or (self.sigma2 == self.sigma1 and not self.allow_equal):
            raise ParameterError("sigma2 must exceed sigma1", "sigma2")
        if not 0.0 <= self.k <= 1.0:
            raise ParameterError("k must lie in [0, 1]", "k")
        ks = self.kernel_size
        if int(ks) != ks or ks < 1 or ks % 2 == 0:
            raise ParameterError("kernel_size must be a positive odd integer", "kernel_size")


@dataclass
class OpponentChannels:
    L: np.ndarray
    RG: np.ndarray
    BG: np.ndarray

    def as_array(self):
        return np.stack([self.L, self.RG, self.BG])

    def to_rgb(self):
        """Invert the opponent transform back to an ``H x W x 3`` image."""
        G = self.L - (self.RG + self.BG) / 3.0
        return np.stack([G + self.RG, G, G + self.BG], axis=-1)


@dataclass
class FeatureStack:
    data: np.ndarray  # H x W x C, non-negative
    provenance: str = GRAY_GABOR

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_channels(self):
        return self.data.shape[2]


def _kernel_grid(size):
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    # x runs along columns, y along rows, origin at the kernel centre
    return np.meshgrid(ax, ax, indexing="xy")


def gabor_kernel(frequency, theta, phase, sigma, gamma, size):
    """One raw (unnormalised) Gabor kernel."""
    x, y = _kernel_grid(size)
    xr = x * np.cos(theta) + y * np.sin(theta)
    yr = -x * np.sin(theta) + y * np.cos(theta)
    envelope = np.exp(-(xr**2 + gamma**2 * yr**2) / (2.0 * sigma**2))
    return envelope * np.cos(2.0 * np.pi * frequency * xr + phase)


def make_gabor_bank(params=None) -> List[np.ndarray]:
    """Build one kernel per (frequency, orientation, phase) triple.

    Kernels are ordered frequency-major, then orientation, then phase.  Each is
    mean-subtracted and scaled to unit L2 norm so the frontend responds to
    contrast rather than mean luminance.
    """
    params = params or GaborParams()
    params.validate()
    bank = []
    for f in params.frequencies:
        sigma = params.sigma if params.sigma is not None else 0.56 / f
        for theta in params.orientations:
            for phase in params.phases:
                g = gabor_kernel(f, theta, phase, sigma, params.gamma, params.kernel_size)
                g = g - g.mean()
                norm = np.linalg.norm(g)
                if norm > 0:
                    g = g / norm
                bank.append(g)
    return bank


def _bilinear_matrix(n_in, n_out):
    """Row-stochastic interpolation matrix using pixel-centre alignment.

    The mapping is symmetric under reversal of both axes, so resampling
    commutes with mirroring.
    """
    R = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w1 = src - i0
    rows = np.arange(n_out)
    np.add.at(R, (rows, i0), 1.0 - w1)
    np.add.at(R, (rows, i1), w1)
    return R


def resize_bilinear(maps, out_size):
    """Resample ``H x W`` or ``H x W x C`` maps to ``out_size x out_size``."""
    maps = np.asarray(maps, dtype=np.float64)
    Ry = _bilinear_matrix(maps.shape[0], out_size)
    Rx = _bilinear_matrix(maps.shape[1], out_size)
    if maps.ndim == 2:
        return Ry @ maps @ Rx.T
    out = Ry @ np.moveaxis(maps, -1, 0) @ Rx.T
    return np.ascontiguousarray(np.moveaxis(out, 0, -1))


_SPECTRA = {}


def _bank_spectra(kernels, fft_shape):
    key = (hash(kernels.tobytes()), kernels.shape, fft_shape)
    spec = _SPECTRA.get(key)
    if spec is None:
        if len(_SPECTRA) > 64:
            _SPECTRA.clear()
        spec = sfft.rfft2(kernels, fft_shape)
        _SPECTRA[key] = spec
    return spec


def _gabor_responses(channel, bank):
    """Same-size zero-padded convolution with every kernel, rectified."""
    kernels = np.ascontiguousarray(bank, dtype=np.float64)
    H, W = channel.shape
    kh, kw = kernels.shape[1:]
    fft_shape = (sfft.next_fast_len(H + kh - 1, True), sfft.next_fast_len(W + kw - 1, True))
    full = sfft.irfft2(
        sfft.rfft2(channel, fft_shape)[None] * _bank_spectra(kernels, fft_shape), fft_shape
    )
    r0 = (kh - 1) // 2
    c0 = (kw - 1) // 2
    return np.abs(full[:, r0 : r0 + H, c0 : c0 + W])


def gabor_frontend(image, bank, out_size=80, check_range=True) -> FeatureStack:
    """Convolve a grayscale image with a Gabor bank and resample to the grid.

    Parameters
    ----------
    image : 2-D array
        Grayscale image, values in [0, 1].
    bank : list of 2-D arrays
        Output of :func:`make_gabor_bank`.
    out_size : int
        Side of the layer-1 grid; must be at least the image side.
    check_range : bool
        Reject values outside [0, 1].  The DoG path feeds signed maps and
        turns this off.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ParameterError("image must be a non-empty 2-D array", "image")
    if out_size < max(image.shape):
        raise ParameterError("out_size must be >= the image side", "out_size")
    if check_range and (image.min() < 0.0 or image.max() > 1.0):
        raise ParameterError("image values must lie in [0, 1]", "image")
    resp = _gabor_responses(image, bank)  # C x H x W
    Ry = _bilinear_matrix(image.shape[0], out_size)
    Rx = _bilinear_matrix(image.shape[1], out_size)
    stack = np.ascontiguousarray(np.moveaxis(Ry @ resp @ Rx.T, 0, -1))
    # interpolation weights are non-negative; clip rounding noise only
    np.maximum(stack, 0.0, out=stack)
    return FeatureStack(stack, GRAY_GABOR)


def opponent_channels(rgb) -> OpponentChannels:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ParameterError("expected an H x W x 3 image", "rgb")
    R, G, B = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    return OpponentChannels(L=(R + G + B) / 3.0, RG=R - G, BG=B - G)


def gaussian_kernel(sigma, size):
    """Truncated isotropic Gaussian normalised to unit sum."""
    x, y = _kernel_grid(size)
    g = np.exp(-(x**2 + y**2) / (2.0 * sigma**2)) / (2.0 * np.pi * sigma**2)
    return g / g.sum()


def dog_kernel(params):
    params.validate()
    return gaussian_kernel(params.sigma1, params.kernel_size) - params.k * gaussian_kernel(
        params.sigma2, params.kernel_size
    )


def dog_filter(channel, params=None):
    """Centre-surround filtering with zero-padded borders."""
    params = params or DogParams()
    channel = np.asarray(channel, dtype=np.float64)
    if params.kernel_size > min(channel.shape):
        raise ParameterError("DoG kernel larger than the image", "kernel_size")
    kernel = dog_kernel(params)
    return fftconvolve(channel, kernel, mode="same")


def dog_stage(rgb, dog_params=None):
    """Opponent decomposition followed by DoG on each channel -> 3 x H x W."""
    opp = opponent_channels(rgb)
    return np.stack([dog_filter(c, dog_params) for c in (opp.L, opp.RG, opp.BG)])


def dog_rgb_frontend(rgb, dog_params=None, gabor_bank=None, out_size=80) -> FeatureStack:
    if gabor_bank is None:
        gabor_bank = make_gabor_bank()
    rgb = np.asarray(rgb, dtype=np.float64)
    if out_size < max(rgb.shape[:2]):
        raise ParameterError("out_size must be >= the image side", "out_size")
    channels = dog_stage(rgb, dog_params)
    parts = [gabor_frontend(c, gabor_bank, out_size, check_range=False).data for c in channels]
    return FeatureStack(np.concatenate(parts, axis=2), DOG_RGB_GABOR)


@dataclass
class FrontendConfig:
    """Everything needed to turn one image into a FeatureStack."""

    kind: str = GRAY_GABOR
    gabor: GaborParams = field(default_factory=GaborParams)
    dog: DogParams = field(default_factory=DogParams)
    out_size: int = 80

    def __post_init__(self):
        if self.kind not in (GRAY_GABOR, DOG_RGB_GABOR):
            raise ParameterError(f"unknown frontend kind {self.kind!r}", "kind")
        self._bank = None

    @property
    def n_channels(self):
        n = self.gabor.n_channels
        return 3 * n if self.kind == DOG_RGB_GABOR else n

    @property
    def bank(self):
        if self._bank is None:
            self._bank = make_gabor_bank(self.gabor)
        return self._bank

    def encode(self, image) -> FeatureStack:
        image = np.asarray(image, dtype=np.float64)
        if self.kind == DOG_RGB_GABOR:
            if image.ndim != 3 or image.shape[2] != 3:
                raise ParameterError("the DoG-RGB frontend needs 3-plane images", "image")
            return dog_rgb_frontend(image, self.dog, self.bank, self.out_size)
        if image.ndim == 3:
            image = image.mean(axis=2)
        return gabor_frontend(image, self.bank, self.out_size)
