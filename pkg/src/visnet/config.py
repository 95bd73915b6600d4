"""
Run configuration as flat ``key = value`` text.

Keys use dotted namespaces (``gabor.gamma``, ``readout.lambda``).  Blank
lines and ``#`` comments are ignored; unknown keys are rejected and missing
keys take the defaults in :data:`DEFAULTS`.  Lists are comma separated.
"""

import math
import os
from pathlib import Path

from .errors import ParameterError

# key: (default, help)
DEFAULTS = {
    "dataset": ("TWOCLASSES-SQUARE", "named symmetry set, MNIST, CIFAR-10, or a directory"),
    "data.dir": ("", "directory to load instead of generating (manifest, IDX or CIFAR batches)"),
    "data.count": (1000, "images to generate for a named symmetry set"),
    "data.image_size": (32, "side of generated images"),
    "data.seed": (0, "seed of the generated dataset"),
    "data.per_class_train": (0, "stratified train subset per class (0 = all)"),
    "data.per_class_test": (0, "stratified test subset per class (0 = all)"),
    "variant": ("simplified", "simplified, rbf, md, li or li-dog-rgb"),
    "grid": (80, "neurons per side in every layer"),
    "patches": ((6, 8, 10, 12), "receptive-field side of each layer"),
    "seed": (0, "first seed; run uses seed, seed+1, ..."),
    "n_seeds": (10, "independent repetitions for run"),
    "alpha": (0.01, "learning rate"),
    "eta": (0.8, "trace persistence"),
    "epochs": (5, "unsupervised training epochs"),
    "sequence_length": (5, "views per object sequence"),
    "views": ("auto", "jitter, exemplar or auto"),
    "jitter.rotation": (180.0, "max |rotation| of training views, degrees"),
    "jitter.translation": (0.2, "max |translation| of training views, fraction of side"),
    "gabor.frequencies": ((0.2, 0.4, 0.6, 0.8), "cycles per pixel"),
    "gabor.orientations": ((0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4), "radians"),
    "gabor.phases": ((0.0, math.pi), "radians"),
    "gabor.sigma": (0.0, "envelope width in pixels (0 = 0.56 / f)"),
    "gabor.gamma": (0.5, "envelope aspect ratio"),
    "gabor.kernel_size": (15, "odd kernel side"),
    "dog.sigma1": (1.0, "centre width"),
    "dog.sigma2": (1.2, "surround width"),
    "dog.k": (0.6, "surround strength"),
    "dog.kernel_size": (3, "odd kernel side"),
    "rbf.sigma": (0.5, "RBF width"),
    "inhibition.radius": (1, "neighbourhood half-width"),
    "inhibition.strength": (0.5, "subtractive strength"),
    "md.epsilon": (1e-6, "variance floor"),
    "md.delta": (1e-9, "distance guard for the gradient"),
    "readout.lambda": (1e-4, "L2 regularisation"),
    "readout.epochs": (50, "passes over the training features"),
    "readout.train_per_class": (0, "readout training samples per class (0 = all)"),
    "readout.test_per_class": (0, "evaluation samples per class (0 = all)"),
    "out": ("results", "output directory"),
}


def _parse(key, text):
    default = DEFAULTS[key][0]
    text = str(text).strip()
    try:
        if isinstance(default, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            cast = int if all(isinstance(v, int) for v in default) else float
            return tuple(cast(s) for s in items)
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ParameterError(f"bad value {text!r} for {key}", key) from None
    return text


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


class RunConfig:
    """Every tunable of a run, with documented defaults."""

    def __init__(self, values=None):
        self.values = {k: v for k, (v, _) in DEFAULTS.items()}
        for k, v in (values or {}).items():
            self[k] = v

    def __getitem__(self, key):
        return self.values[key]

    def __setitem__(self, key, value):
        if key not in DEFAULTS:
            raise ParameterError(f"unknown config key {key!r}", key)
        self.values[key] = _parse(key, value) if isinstance(value, str) else value

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    def update(self, pairs):
        for k, v in pairs.items():
            self[k] = v
        return self

    def copy(self):
        return RunConfig(dict(self.values))

    @classmethod
    def parse(cls, text):
        cfg = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"line {lineno}: expected 'key = value'", "config")
            key, _, value = (s.strip() for s in line.partition("="))
            cfg[key] = value
        return cfg

    @classmethod
    def load(cls, path):
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self):
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.values.items())

    def write(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    # builders

    def frontend(self):
        from .frontend import DOG_RGB_GABOR, GRAY_GABOR, DogParams, FrontendConfig, GaborParams

        gabor = GaborParams(
            frequencies=self["gabor.frequencies"],
            orientations=self["gabor.orientations"],
            phases=self["gabor.phases"],
            sigma=self["gabor.sigma"] or None,
            gamma=self["gabor.gamma"],
            kernel_size=self["gabor.kernel_size"],
        )
        dog = DogParams(
            sigma1=self["dog.sigma1"],
            sigma2=self["dog.sigma2"],
            k=self["dog.k"],
            kernel_size=self["dog.kernel_size"],
        )
        kind = DOG_RGB_GABOR if self["variant"] == "li-dog-rgb" else GRAY_GABOR
        return FrontendConfig(kind=kind, gabor=gabor, dog=dog, out_size=self["grid"])

    def network(self, seed=None):
        from .network import InhibitionParams, init_network

        return init_network(
            variant=self["variant"],
            frontend=self.frontend(),
            grid=self["grid"],
            patches=self["patches"],
            seed=self["seed"] if seed is None else seed,
            rbf_sigma=self["rbf.sigma"],
            inhibition=InhibitionParams(self["inhibition.radius"], self["inhibition.strength"]),
        )

    def learning(self, seed=None):
        from .learning import LearningParams

        rot, tr = self["jitter.rotation"], self["jitter.translation"]
        params = LearningParams(
            alpha=self["alpha"],
            eta=self["eta"],
            epochs=self["epochs"],
            sequence_length=self["sequence_length"],
            seed=self["seed"] if seed is None else seed,
            views=self["views"],
            rotation_range=(-rot, rot),
            translation_range=(-tr, tr),
            md_epsilon=self["md.epsilon"],
            md_delta=self["md.delta"],
        )
        params.validate()
        return params

    def readout(self, seed=None):
        from .readout import ReadoutParams

        return ReadoutParams(
            lam=self["readout.lambda"],
            epochs=self["readout.epochs"],
            seed=self["seed"] if seed is None else seed,
            train_per_class=self["readout.train_per_class"],
            test_per_class=self["readout.test_per_class"],
        )

    def validate(self):
        from .network import VARIANTS

        if self["variant"] not in VARIANTS:
            raise ParameterError(f"unknown variant {self['variant']!r}", "variant")
        if self["n_seeds"] < 1:
            raise ParameterError("n_seeds must be >= 1", "n_seeds")
        if len(self["patches"]) < 1:
            raise ParameterError("need at least one layer", "patches")
        self.frontend().gabor.validate()
        self.frontend().dog.validate()
        self.learning()
        return self


def thread_cap():
    """Worker count allowed by ``VISNET_THREADS`` (default: all cores)."""
    raw = os.environ.get("VISNET_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ParameterError("VISNET_THREADS must be an integer", "VISNET_THREADS") from None
        return max(1, n)
    return os.cpu_count() or 1
