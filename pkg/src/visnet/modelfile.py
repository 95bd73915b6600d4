"""
Binary model files (little-endian).

::

    magic        4 bytes  b"VNSN"
    version      u32      1
    variant      u8       index into network.VARIANTS
    n_layers     u8
    per layer:
      grid         u32
      patch        u32
      in_channels  u32
      weights      f32[grid*grid * patch*patch*in_channels], row-major
      sigma        f32                         (rbf only)
      count        u64                         (md only)
      mean         f32[fan_in]                 (md only)
      var          f32[fan_in]                 (md only)
    settings_len u32
    settings     UTF-8 ``key = value`` lines (frontend and inhibition settings)

Weights are stored in single precision, so rows are renormalised to unit
length when a file is read.
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .frontend import DogParams, FrontendConfig, GaborParams
from .network import MD, RBF, VARIANTS, InhibitionParams, LayerGeometry, LayerState, NetworkState, normalize_rows

MAGIC = b"VNSN"
VERSION = 1


def _settings_text(net):
    g, d, inh = net.frontend.gabor, net.frontend.dog, net.inhibition
    pairs = [
        ("frontend", net.frontend.kind),
        ("gabor.frequencies", ", ".join(repr(float(v)) for v in g.frequencies)),
        ("gabor.orientations", ", ".join(repr(float(v)) for v in g.orientations)),
        ("gabor.phases", ", ".join(repr(float(v)) for v in g.phases)),
        ("gabor.sigma", "" if g.sigma is None else repr(float(g.sigma))),
        ("gabor.gamma", repr(float(g.gamma))),
        ("gabor.kernel_size", str(g.kernel_size)),
        ("dog.sigma1", repr(float(d.sigma1))),
        ("dog.sigma2", repr(float(d.sigma2))),
        ("dog.k", repr(float(d.k))),
        ("dog.kernel_size", str(d.kernel_size)),
        ("inhibition.radius", str(inh.radius)),
        ("inhibition.strength", repr(float(inh.strength))),
    ]
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def _parse_settings(text):
    kv = {}
    for line in text.splitlines():
        if "=" in line:
            k, _, v = (s.strip() for s in line.partition("="))
            kv[k] = v
    floats = lambda s: tuple(float(x) for x in s.split(",") if x.strip())  # noqa: E731
    gabor = GaborParams(
        frequencies=floats(kv["gabor.frequencies"]),
        orientations=floats(kv["gabor.orientations"]),
        phases=floats(kv["gabor.phases"]),
        sigma=float(kv["gabor.sigma"]) if kv["gabor.sigma"] else None,
        gamma=float(kv["gabor.gamma"]),
        kernel_size=int(kv["gabor.kernel_size"]),
    )
    dog = DogParams(
        sigma1=float(kv["dog.sigma1"]),
        sigma2=float(kv["dog.sigma2"]),
        k=float(kv["dog.k"]),
        kernel_size=int(kv["dog.kernel_size"]),
    )
    inh = InhibitionParams(int(kv["inhibition.radius"]), float(kv["inhibition.strength"]))
    return kv["frontend"], gabor, dog, inh


def encode_model(net) -> bytes:
    parts = [MAGIC, struct.pack("<IBB", VERSION, VARIANTS.index(net.variant), len(net.layers))]
    for layer in net.layers:
        g = layer.geometry
        parts.append(struct.pack("<III", g.grid, g.patch, g.in_channels))
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
        if net.variant == RBF:
            parts.append(struct.pack("<f", layer.rbf_sigma))
        elif net.variant == MD:
            stats = layer.md_stats
            if stats is None:
                count, mean, var = 0, np.zeros(g.fan_in), np.ones(g.fan_in)
            else:
                count, mean, var = stats.count, stats.mean, stats.var
            parts.append(struct.pack("<Q", count))
            parts.append(np.asarray(mean, dtype="<f4").tobytes())
            parts.append(np.asarray(var, dtype="<f4").tobytes())
    settings = _settings_text(net).encode("utf-8")
    parts.append(struct.pack("<I", len(settings)))
    parts.append(settings)
    return b"".join(parts)


class _Reader:
    def __init__(self, data, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated model file while reading {what}", offset=self.pos, path=self.path)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def floats(self, n, what):
        return np.frombuffer(self.take(4 * n, what), dtype="<f4").astype(np.float64)


def decode_model(data, path=None) -> NetworkState:
    from .learning import MahalanobisStats

    r = _Reader(data, path)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("not a model file (bad magic)", offset=0, path=path)
    version, tag, n_layers = r.unpack("<IBB", "header")
    if version != VERSION:
        raise FormatError(f"unsupported model version {version}", offset=4, path=path)
    if tag >= len(VARIANTS):
        raise FormatError(f"unknown variant tag {tag}", offset=8, path=path)
    if n_layers < 1:
        raise FormatError("model has no layers", offset=9, path=path)
    variant = VARIANTS[tag]
    layers = []
    for i in range(n_layers):
        start = r.pos
        grid, patch, in_ch = r.unpack("<III", f"layer {i + 1} geometry")
        try:
            geom = LayerGeometry(grid=grid, patch=patch, in_channels=in_ch)
        except ValueError as exc:
            raise FormatError(f"layer {i + 1}: {exc}", offset=start, path=path) from None
        W = r.floats(geom.n_neurons * geom.fan_in, f"layer {i + 1} weights")
        W = W.reshape(geom.n_neurons, geom.fan_in)
        if not np.all(np.isfinite(W)):
            raise FormatError(f"layer {i + 1} has non-finite weights", offset=start, path=path)
        try:
            normalize_rows(W, out=W)
        except ArithmeticError:
            raise FormatError(f"layer {i + 1} has an all-zero weight row", offset=start, path=path) from None
        layer = LayerState(geometry=geom, weights=W, traces=np.zeros(geom.n_neurons))
        if variant == RBF:
            (layer.rbf_sigma,) = r.unpack("<f", f"layer {i + 1} sigma")
            layer.rbf_sigma = float(layer.rbf_sigma)
        elif variant == MD:
            (count,) = r.unpack("<Q", f"layer {i + 1} sample count")
            mean = r.floats(geom.fan_in, f"layer {i + 1} mean")
            var = r.floats(geom.fan_in, f"layer {i + 1} variance")
            if count:
                layer.md_stats = MahalanobisStats.from_moments(mean, var, count)
        layers.append(layer)
    (n,) = r.unpack("<I", "settings length")
    try:
        kind, gabor, dog, inh = _parse_settings(r.take(n, "settings").decode("utf-8"))
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"bad settings block ({exc})", offset=r.pos - n, path=path) from None
    if r.pos != len(data):
        raise FormatError("trailing bytes after the model", offset=r.pos, path=path)
    frontend = FrontendConfig(kind=kind, gabor=gabor, dog=dog, out_size=layers[0].geometry.grid)
    if frontend.n_channels != layers[0].geometry.in_channels:
        raise FormatError("frontend channel count does not match layer 1", offset=10, path=path)
    return NetworkState(layers=layers, variant=variant, frontend=frontend, inhibition=inh)


def save_model(net, path):
    """Write atomically: a temporary file in the same directory is renamed into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_model(net)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> NetworkState:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file {str(path)!r} not found")
    return decode_model(path.read_bytes(), str(path))
