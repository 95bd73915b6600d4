"""
Linear readout over frozen top-layer features, and the repeated-seed harness.

The classifier is a one-vs-rest linear SVM (hinge loss, L2 penalty) trained
with Pegasos-style stochastic subgradient steps.  Features are standardised
with the training mean and standard deviation before fitting (top-layer
activations vary over a tiny range, which stalls the unscaled solver); the
scaling is folded back into the returned weights and biases.  The bias is
learned as the weight of a constant feature during the stochastic passes
and then replaced by the exact minimiser of the hinge loss over the
(unpenalised) intercept.  Training rows are put into a canonical order
before the seeded sampling, so the model does not depend on the order the
rows were given in.
"""

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from . import _kernels
from .errors import ParameterError
from .network import forward_network

log = logging.getLogger(__name__)

RESULTS_HEADER = ("dataset", "variant", "seed", "accuracy", "train_size", "test_size")
SUMMARY_HEADER = ("dataset", "variant", "mean", "sd")
FAILED = "failed"


@dataclass
class ReadoutParams:
    lam: float = 1e-4
    epochs: int = 50
    seed: int = 0
    train_per_class: int = 0  # 0 = every training item
    test_per_class: int = 0


@dataclass
class LinearModel:
    weights: np.ndarray  # classes x features
    biases: np.ndarray
    params: ReadoutParams = field(default_factory=ReadoutParams)

    def scores(self, features):
        return np.asarray(features, dtype=np.float64) @ self.weights.T + self.biases

    def predict(self, features):
        # np.argmax returns the first maximum: ties go to the lowest class index
        return np.argmax(self.scores(features), axis=1)


def extract_features(net, images, batch_callback=None):
    """Flattened top-layer activations, one row per image.

    The network is only read; its weights and traces are left untouched.
    """
    images = getattr(images, "images", images)
    n = len(images)
    feats = None
    for i, image in enumerate(images):
        top = forward_network(net, net.frontend.encode(image))[-1].ravel()
        if feats is None:
            feats = np.empty((n, top.size))
        feats[i] = top
        if batch_callback is not None:
            batch_callback(i)
    if feats is None:
        return np.empty((0, net.grid * net.grid))
    return feats


def _canonical_order(X, y):
    keys = np.column_stack([X, y]).T[::-1]
    return np.lexsort(keys)


def best_intercept(margins, y):
    """Exact minimiser over ``b`` of ``sum_i max(0, 1 - margins_i - y_i * b)``.

    The objective is convex and piecewise linear with breakpoints at
    ``y_i * (1 - margins_i)``; where it is flat the midpoint is returned.
    """
    y = np.asarray(y, dtype=np.float64)
    bp = y * (1.0 - np.asarray(margins, dtype=np.float64))
    order = np.argsort(bp, kind="stable")
    bp, pos = bp[order], y[order] > 0
    # slope just right of each breakpoint: -(positives still active) + (negatives active)
    pos_right = pos.sum() - np.cumsum(pos)
    neg_left = np.cumsum(~pos)
    slope = neg_left - pos_right
    k = int(np.argmax(slope >= 0))
    if slope[k] == 0 and k + 1 < len(bp):
        return 0.5 * (bp[k] + bp[k + 1])
    return float(bp[k])


def train_linear(features, labels, params=None, n_classes=None) -> LinearModel:
    """Fit the one-vs-rest hinge-loss model.

    Every epoch visits each row once in an order drawn from ``params.seed``.
    The step at update ``t`` is ``1 / (lam * t)``, followed by projection
    onto the ball of radius ``1 / sqrt(lam)``.
    """
    params = params or ReadoutParams()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ParameterError("features must be n x d with one label per row", "features")
    classes = np.unique(y)
    if len(classes) < 2:
        raise ParameterError("need at least two classes to train a readout", "labels")
    if not params.lam > 0:
        raise ParameterError("lambda must be > 0", "readout.lambda")
    n_classes = int(n_classes or y.max() + 1)
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    # statistics over the reordered rows, so summation order is fixed too
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[~(sd > 1e-12)] = 1.0  # constant features carry nothing once centred
    Xa = np.ascontiguousarray(np.column_stack([(X - mu) / sd, np.ones(len(X))]))
    Y = -np.ones((len(X), n_classes))
    Y[np.arange(len(X)), y] = 1.0
    W = np.zeros((n_classes, Xa.shape[1]))
    rng = np.random.default_rng(params.seed)
    t = 0
    for _ in range(params.epochs):
        t = _kernels.pegasos_epochs(Xa, Y, rng.permutation(len(X)), float(params.lam), W, t)
    Zs = Xa[:, :-1]
    for c in range(n_classes):
        W[c, -1] = best_intercept(Y[:, c] * (Zs @ W[c, :-1]), Y[:, c])
    weights = W[:, :-1] / sd
    return LinearModel(weights, W[:, -1] - weights @ mu, params)


def evaluate(model, features, labels):
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ParameterError("cannot evaluate on an empty set", "labels")
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != model.weights.shape[1]:
        raise ParameterError("feature dimension does not match the model", "features")
    return float(np.mean(model.predict(features) == labels))


@dataclass
class ExperimentResult:
    dataset: str
    variant: str
    seeds: List[int] = field(default_factory=list)
    accuracies: List[float] = field(default_factory=list)
    train_size: int = 0
    test_size: int = 0
    failed: List[int] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def mean(self):
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def sd(self):
        """Population standard deviation over seeds."""
        return float(np.std(self.accuracies)) if self.accuracies else float("nan")


def _per_class_pick(labels, idx, per_class, rng):
    if not per_class:
        return idx
    keep = []
    for c in np.unique(labels[idx]):
        pool = idx[labels[idx] == c]
        keep.append(np.sort(rng.choice(pool, size=min(per_class, len(pool)), replace=False)))
    return np.sort(np.concatenate(keep))


def readout_accuracy(net, dataset, params):
    """Train the readout on the train split features and score the test split."""
    rng = np.random.default_rng([params.seed, 1])
    train = _per_class_pick(dataset.labels, dataset.indices("train"), params.train_per_class, rng)
    test = _per_class_pick(dataset.labels, dataset.indices("test"), params.test_per_class, rng)
    if len(train) == 0 or len(test) == 0:
        raise ParameterError("dataset needs both train and test items", "dataset")
    ftrain = extract_features(net, dataset.images[train])
    ftest = extract_features(net, dataset.images[test])
    model = train_linear(ftrain, dataset.labels[train], params, n_classes=dataset.n_classes)
    return evaluate(model, ftest, dataset.labels[test]), len(train), len(test)


def run_seed(config, dataset, seed):
    """Train a fresh network with ``seed`` and return (accuracy, train size, test size)."""
    from .learning import train_network

    net = config.network(seed)
    train_network(net, dataset, config.learning(seed))
    return readout_accuracy(net, dataset, config.readout(seed))


def _run_seed_job(args):
    config, dataset, seed = args
    try:
        return seed, run_seed(config, dataset, seed), None
    except Exception as exc:  # reported per seed, the run carries on
        return seed, None, f"{type(exc).__name__}: {exc}"


def write_results(result, out_dir, config=None):
    """Per-seed CSV, one-row summary CSV and the config snapshot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    acc = dict(zip(result.seeds, result.accuracies))
    with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for seed in sorted(set(result.seeds) | set(result.failed)):
            a = f"{acc[seed]:.6f}" if seed in acc else FAILED
            w.writerow((result.dataset, result.variant, seed, a, result.train_size, result.test_size))
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerow((result.dataset, result.variant, f"{result.mean:.6f}", f"{result.sd:.6f}"))
    if config is not None:
        config.write(out / "config.cfg")


def run_experiment(config, dataset=None, out_dir=None, workers=None) -> ExperimentResult:
    """Repeat train-then-readout for ``n_seeds`` consecutive seeds.

    The dataset is loaded or generated once (it depends on ``data.seed``
    only); each seed draws its own network initialisation, training order
    and readout sampling.  A seed that raises is recorded as failed.
    """
    from .config import thread_cap
    from .datasets import load_dataset

    config.validate()
    start = time.perf_counter()
    if dataset is None:
        dataset = load_dataset(config)
    seeds = [config["seed"] + i for i in range(config["n_seeds"])]
    workers = min(workers or thread_cap(), len(seeds))
    jobs = [(config, dataset, s) for s in seeds]
    result = ExperimentResult(dataset=dataset.name, variant=config["variant"])
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    outcomes = pool.map(_run_seed_job, jobs) if pool else map(_run_seed_job, jobs)
    try:
        for seed, value, err in outcomes:
            if err is not None:
                log.error("seed %d failed: %s", seed, err)
                result.failed.append(seed)
            else:
                acc, n_train, n_test = value
                result.seeds.append(seed)
                result.accuracies.append(acc)
                result.train_size, result.test_size = n_train, n_test
            if out_dir is not None:
                # flushed after every seed so an interrupted run keeps its rows
                write_results(result, out_dir, config)
    finally:
        if pool:
            pool.shutdown()
    result.seconds = time.perf_counter() - start
    return result
