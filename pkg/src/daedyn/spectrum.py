"""Input covariance spectra: construction, symmetric eigendecomposition, rotations.

Everything downstream works in the eigenbasis of the unnormalised input
covariance sum(x_i x_i^T); the 1/N factor is deliberately absorbed by the
time constant tau = N / alpha rather than the covariance itself.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotSymmetricError

log = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-10
SYMMETRY_TOL = 1e-8
CLAMP_TOL = 1e-10      # eigenvalues in (-CLAMP_TOL, 0) are round-off and clamp to 0
JACOBI_MAX_DIM = 128   # above this "auto" switches to the LAPACK backend


@dataclass(frozen=True)
class Dataset:
    """N samples of dimension D; rows are samples. Immutable after construction."""

    samples: np.ndarray
    source: str = "synthetic"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError(f"samples must be a non-empty N x D matrix, got shape {samples.shape}")
        finite_rows = np.isfinite(samples).all(axis=1)
        if not finite_rows.all():
            bad = int(np.flatnonzero(~finite_rows)[0])
            raise ValueError(f"non-finite entry in sample {bad}")
        if self.source not in ("synthetic", "mnist", "cifar10"):
            raise ValueError(f"unknown source tag {self.source!r}")
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class Spectrum:
    """Orthogonal eigenbasis (columns) and non-increasing eigenvalues of a covariance."""

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.eigenvectors, dtype=np.float64)
        lams = np.asarray(self.eigenvalues, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"eigenvectors must be square, got shape {v.shape}")
        if lams.shape != (v.shape[0],):
            raise ValueError("eigenvalue count must match basis dimension")
        gram = v.T @ v
        ortho_err = float(np.max(np.abs(gram - np.eye(v.shape[0]))))
        if ortho_err > ORTHOGONALITY_TOL:
            raise ValueError(f"eigenbasis not orthogonal: max |V^T V - I| = {ortho_err:.3e}")
        if np.any(np.diff(lams) > 0):
            raise ValueError("eigenvalues must be non-increasing")
        object.__setattr__(self, "eigenvectors", v)
        object.__setattr__(self, "eigenvalues", lams)

    @property
    def d(self) -> int:
        return self.eigenvalues.shape[0]


def covariance(dataset, *, normalized=False, center=False):
    """Sum of outer products of the samples, symmetrized as (S + S^T) / 2.

    `normalized` divides by N (never used by the analytic path); `center`
    removes per-feature means first. Accepts a Dataset or a plain N x D array.
    """
    x = dataset.samples if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected an N x D matrix, got shape {x.shape}")
    finite_rows = np.isfinite(x).all(axis=1)
    if not finite_rows.all():
        bad = int(np.flatnonzero(~finite_rows)[0])
        raise ValueError(f"non-finite entry in sample {bad}")
    if center:
        x = x - x.mean(axis=0)
    s = x.T @ x
    if normalized:
        s = s / x.shape[0]
    return 0.5 * (s + s.T)


def _jacobi(a, max_sweeps=60):
    """Cyclic Jacobi rotations; returns (eigenvalues, eigenvectors as columns).

    Sweeps run in a fixed (p, q) order for determinism. Convergence when the
    largest off-diagonal magnitude drops below 1e-12 * ||S||_F.
    """
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), v
    tol = 1e-12 * np.linalg.norm(a, "fro")
    skip = 0.01 * tol
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max()
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise RuntimeError(f"jacobi did not converge within {max_sweeps} sweeps")
    return np.diag(a).copy(), v


def eigendecompose(s, method="auto") -> Spectrum:
    """Symmetric eigendecomposition with deterministic ordering and signs.

    method: "jacobi" (cyclic rotations, reference path), "lapack"
    (numpy.linalg.eigh, used for large inputs), or "auto".

    Output conventions: eigenvalues sorted non-increasing with a stable sort,
    each eigenvector's largest-magnitude component made positive, round-off
    negative eigenvalues clamped to zero (and logged). Eigenvectors inside a
    degenerate eigenvalue block are basis-dependent; compare subspace
    projectors, not individual vectors.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    asym = float(np.max(np.abs(s - s.T))) if s.size else 0.0
    if asym > SYMMETRY_TOL:
        raise NotSymmetricError(f"input not symmetric: max |S - S^T| = {asym:.3e}")
    s = 0.5 * (s + s.T)
    if method == "auto":
        method = "jacobi" if s.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        lams, v = _jacobi(s)
    elif method == "lapack":
        lams, v = np.linalg.eigh(s)
    else:
        raise ValueError(f"unknown eigendecomposition method {method!r}")
    order = np.argsort(-lams, kind="stable")
    lams = lams[order]
    v = v[:, order]
    peak = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[peak, np.arange(v.shape[1])] < 0.0, -1.0, 1.0)
    v = v * signs
    roundoff = (lams > -CLAMP_TOL) & (lams < 0.0)
    if roundoff.any():
        log.warning("clamped %d round-off negative eigenvalues to 0", int(roundoff.sum()))
        lams = np.where(roundoff, 0.0, lams)
    return Spectrum(eigenvectors=v, eigenvalues=lams)


def rotate_weights(w1, w2, spectrum):
    """Align weights with the covariance eigenbasis: returns (W1 V, V^T W2)."""
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    d = spectrum.d
    if w1.ndim != 2 or w1.shape[1] != d:
        raise ValueError(f"w1 must be H x {d}, got shape {w1.shape}")
    if w2.ndim != 2 or w2.shape != (d, w1.shape[0]):
        raise ValueError(f"w2 must be {d} x {w1.shape[0]}, got shape {w2.shape}")
    v = spectrum.eigenvectors
    return w1 @ v, v.T @ w2


def projected_diagonal(w1, w2, spectrum):
    """Per-mode mapping values: diag of V^T W2 W1 V, plus the max off-diagonal.

    The off-diagonal report is the decoupling check; it is exactly zero for
    rotation-aligned initialisation.
    """
    w1r, w2r = rotate_weights(w1, w2, spectrum)
    m = w2r @ w1r
    diag = np.diag(m).copy()
    if m.shape[0] > 1:
        off = float(np.max(np.abs(m - np.diag(diag))))
    else:
        off = 0.0
    return diag, off


def random_orthogonal(dim, rng):
    """Orthogonal matrix from QR of a standard normal draw, sign-fixed via diag(R) >= 0."""
    m = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    return q * np.where(np.diag(r) >= 0.0, 1.0, -1.0)


def write_spectrum_csv(spectrum, path, eigenvectors_path=None):
    """CSV rows (index, eigenvalue) with a header; index is the 1-based rank.

    Eigenvectors go to a separate D x D CSV when a path is given (column j of
    the file is eigenvector j).
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(spectrum.eigenvalues, start=1):
            writer.writerow([i, repr(float(lam))])
    if eigenvectors_path is not None:
        with open(eigenvectors_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in spectrum.eigenvectors:
                writer.writerow([repr(float(x)) for x in row])


def read_spectrum_csv(path):
    """Inverse of write_spectrum_csv for the eigenvalue file; returns the value array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["index", "eigenvalue"]:
            raise ValueError(f"unexpected spectrum CSV header {header!r}")
        return np.array([float(row[1]) for row in reader])
