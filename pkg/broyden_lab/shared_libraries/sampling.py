"""Seeded generators for random SPD operators, brackets and directions."""

import numpy as np

from ..operator_core import PrimalVector, SpdOperator


def make_rng(seed: int | np.random.SeedSequence | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from a QR factorization with sign correction."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def log_spaced_spectrum(n: int, lo: float, hi: float) -> np.ndarray:
    if n == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, n)


def spd_with_spectrum(spectrum, rng: np.random.Generator, base: SpdOperator | None = None) -> SpdOperator:
    """Operator with the given eigenvalues relative to base (identity if omitted)."""
    d = np.asarray(spectrum, dtype=float)
    q = random_orthogonal(d.shape[0], rng)
    core = (q * d) @ q.T
    if base is not None:
        c = np.linalg.cholesky(base.entries)
        core = c @ core @ c.T
    return SpdOperator.from_matrix(core)


def random_spd(n: int, rng: np.random.Generator, max_cond: float = 1e3) -> SpdOperator:
    spectrum = np.exp(rng.uniform(0.0, np.log(max_cond), size=n))
    return spd_with_spectrum(spectrum, rng)


def random_bracketed(
    a: SpdOperator, rng: np.random.Generator, lo: float, hi: float
) -> SpdOperator:
    """G with every eigenvalue relative to A drawn log-uniformly from [lo, hi]."""
    spectrum = np.exp(rng.uniform(np.log(lo), np.log(hi), size=a.dim))
    return spd_with_spectrum(spectrum, rng, base=a)


def random_direction(n: int, rng: np.random.Generator) -> PrimalVector:
    return PrimalVector(rng.standard_normal(n))


def random_invertible(n: int, rng: np.random.Generator, max_cond: float = 1e2) -> np.ndarray:
    """Well-conditioned change of basis U diag(s) V^T."""
    s = np.exp(rng.uniform(0.0, np.log(max_cond), size=n))
    return (random_orthogonal(n, rng) * s) @ random_orthogonal(n, rng).T

