"""Shared fixtures: deterministic image-like binary datasets and the acceptance report.

Real MNIST/CIFAR files are used when DAEDYN_MNIST_IMAGES / DAEDYN_CIFAR_BATCH
point at them; otherwise the suite generates image-like binary fixtures with a
controlled covariance spectrum and exercises the identical ingestion pipeline.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from daedyn import data, spectrum


def imagelike_pixels(n_img, d, seed, n_strong=24, strong=2.0, weak=0.025):
    """Image-shaped samples: smooth mean plus planted spectral directions.

    The strong block keeps the learnable modes comfortably inside a hidden
    width of 32 while the weak tail stays dormant on desk-scale runs.
    """
    rng = np.random.default_rng(seed)
    side = int(round(np.sqrt(d)))
    if side * side == d:
        yy, xx = np.mgrid[0:side, 0:side]
        mean = 0.3 * np.exp(-(((xx - side / 2) ** 2 + (yy - side / 2) ** 2)
                              / (2 * (side / 3) ** 2))).ravel()
    else:
        mean = np.full(d, 0.3)
    n_dir = min(64, d)
    q = spectrum.random_orthogonal(d, rng)[:, :n_dir]
    sig2 = np.concatenate([
        strong * np.arange(1, n_strong + 1) ** -0.3,
        weak * np.arange(1, n_dir - n_strong + 1) ** -0.3,
    ])
    z = rng.standard_normal((n_img, n_dir))
    x = mean[None, :] + (z * np.sqrt(sig2)) @ q.T
    return np.rint(np.clip(x, 0.0, 1.0) * 255).astype(np.uint8)


@pytest.fixture(scope="session")
def mnist_like_paths(tmp_path_factory):
    """(images, labels) IDX paths: real MNIST when configured, else the fixture."""
    env = os.environ.get("DAEDYN_MNIST_IMAGES")
    if env and Path(env).is_file():
        labels = os.environ.get("DAEDYN_MNIST_LABELS")
        return Path(env), Path(labels) if labels and Path(labels).is_file() else None
    root = tmp_path_factory.mktemp("mnist_like")
    pixels = imagelike_pixels(1200, 784, seed=20)
    rng = np.random.default_rng(99)
    batch = data.RawImageBatch(pixels=pixels / 255.0,
                               labels=rng.integers(0, 10, size=1200),
                               source="mnist", image_shape=(28, 28))
    images = root / "train-images-idx3-ubyte"
    labels = root / "train-labels-idx1-ubyte"
    data.write_idx(batch, images, labels)
    return images, labels


@pytest.fixture(scope="session")
def cifar_like_path(tmp_path_factory):
    """CIFAR-10 binary batch path: real file when configured, else the fixture."""
    env = os.environ.get("DAEDYN_CIFAR_BATCH")
    if env and Path(env).is_file():
        return Path(env)
    root = tmp_path_factory.mktemp("cifar_like")
    pixels = imagelike_pixels(700, 3072, seed=33)
    rng = np.random.default_rng(44)
    batch = data.RawImageBatch(pixels=pixels / 255.0,
                               labels=rng.integers(0, 10, size=700),
                               source="cifar10")
    path = root / "data_batch_1.bin"
    data.write_cifar10(batch, path)
    return path


@pytest.fixture(scope="session")
def mnist_like_dataset(mnist_like_paths):
    """Parsed 1000-sample dataset plus its spectrum (the criterion-7 setup)."""
    images, _ = mnist_like_paths
    batch = data.load_idx(images, count_limit=1000)
    dataset = data.preprocess(batch)
    spec = spectrum.eigendecompose(spectrum.covariance(dataset))
    return dataset, spec


_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::test_criterion_", 1)[1]
    if report.when == "call":
        _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.skipped:
        _ACCEPTANCE_RESULTS[name] = "SKIP"
    elif report.when == "setup" and report.failed:
        _ACCEPTANCE_RESULTS[name] = "ERROR"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        verdict = _ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"criterion {name}: {verdict}")
