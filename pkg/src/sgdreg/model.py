"""Linear inverse problems: construction, spectral decomposition, noise.

All containers are frozen dataclasses whose arrays are made read-only on
construction, so a problem can be shared freely between ensemble workers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

# singular values below this fraction of sigma_1 count as zero
RANK_RTOL = 1e-12


class InconsistentSystemError(ValueError):
    """Raised when data do not lie in the range of the forward matrix."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def psd_power(eigvals: np.ndarray, p: float) -> np.ndarray:
    """Elementwise lambda**p for a PSD spectrum with the convention 0**0 = 1.

    Tiny negative eigenvalues from roundoff are clipped to zero. For p < 0 the
    zero eigenvalues map to zero (pseudo-inverse power on the range).
    """
    lam = np.clip(np.asarray(eigvals, dtype=float), 0.0, None)
    if p == 0:
        return np.ones_like(lam)
    if p > 0:
        return lam**p
    out = np.zeros_like(lam)
    pos = lam > 0
    out[pos] = lam[pos] ** p
    return out


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full SVD of the scaled operator ``n**-0.5 * A = U diag(sigma) V^T``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    rank: int

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u))
        object.__setattr__(self, "sigma", _frozen(self.sigma))
        object.__setattr__(self, "v", _frozen(self.v))
        s = self.sigma
        if s.size and np.any(np.diff(s) > 1e-14 * max(s[0], 1.0)):
            raise ValueError("singular values must be nonincreasing")

    @classmethod
    def from_matrix(cls, a_matrix: np.ndarray) -> "SpectralDecomposition":
        a = np.asarray(a_matrix, dtype=float)
        n = a.shape[0]
        u, s, vt = np.linalg.svd(a / np.sqrt(n), full_matrices=True)
        return cls(u=u, sigma=s, v=vt.T, rank=numerical_rank(s))

    @property
    def sigma_full(self) -> np.ndarray:
        """Singular values padded with zeros to length m (one per column of V)."""
        m = self.v.shape[0]
        out = np.zeros(m)
        out[: self.sigma.size] = self.sigma
        return out

    @property
    def gram_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of B = n^{-1} A^T A in the V basis."""
        return self.sigma_full**2

    def gram_power(self, p: float) -> np.ndarray:
        """Matrix B**p computed spectrally."""
        return (self.v * psd_power(self.gram_eigenvalues, p)) @ self.v.T

    def reconstruct(self) -> np.ndarray:
        n, m = self.u.shape[0], self.v.shape[0]
        sig = np.zeros((n, m))
        k = self.sigma.size
        sig[:k, :k] = np.diag(self.sigma)
        return self.u @ sig @ self.v.T


def numerical_rank(sigma: np.ndarray, rtol: float = RANK_RTOL) -> int:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0 or sigma[0] == 0:
        return 0
    return int(np.sum(sigma > rtol * sigma[0]))


@dataclass(frozen=True)
class SourceConfig:
    """Source condition ``x_true - x_init = B**p w``."""

    p: float
    w: np.ndarray

    def __post_init__(self):
        if self.p < 0:
            raise ValueError(f"smoothness exponent p must be >= 0, got {self.p}")
        object.__setattr__(self, "w", _frozen(np.ravel(self.w)))
        if self.w_norm <= 0:
            raise ValueError("source representer w must be nonzero")

    @property
    def w_norm(self) -> float:
        return float(np.linalg.norm(self.w))


@dataclass(frozen=True)
class LinearProblem:
    a_matrix: np.ndarray
    x_true: np.ndarray
    y_exact: np.ndarray
    x_init: np.ndarray
    name: str = "problem"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = _frozen(self.a_matrix)
        if a.ndim != 2:
            raise ValueError("a_matrix must be two-dimensional")
        object.__setattr__(self, "a_matrix", a)
        for name, size in (("x_true", a.shape[1]), ("y_exact", a.shape[0]), ("x_init", a.shape[1])):
            vec = _frozen(np.ravel(getattr(self, name)))
            if vec.size != size:
                raise ValueError(f"{name} has length {vec.size}, expected {size}")
            object.__setattr__(self, name, vec)

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.a_matrix.shape[1]

    @cached_property
    def decomposition(self) -> SpectralDecomposition:
        return SpectralDecomposition.from_matrix(self.a_matrix)

    @cached_property
    def gram(self) -> np.ndarray:
        return _frozen(gram_operator(self.a_matrix))

    @cached_property
    def row_norms_sq(self) -> np.ndarray:
        return _frozen(np.einsum("ij,ij->i", self.a_matrix, self.a_matrix))

    @property
    def max_row_norm_sq(self) -> float:
        return float(self.row_norms_sq.max())

    @property
    def operator_norm(self) -> float:
        """Spectral norm of A."""
        return float(np.sqrt(self.n) * self.decomposition.sigma[0])

    def check_invariants(self, range_tol: float = 1e-8) -> None:
        fit = np.linalg.norm(self.a_matrix @ self.x_true - self.y_exact)
        if fit > 1e-10 * max(1.0, np.linalg.norm(self.y_exact)):
            raise ValueError(f"y_exact != A x_true (residual {fit:.3e})")
        off = range_complement_norm(self.decomposition, self.x_true - self.x_init)
        if off > range_tol * max(1.0, np.linalg.norm(self.x_true - self.x_init)):
            raise ValueError(f"x_true - x_init leaves range(A^T) by {off:.3e}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "a_matrix": self.a_matrix.tolist(),
            "x_true": self.x_true.tolist(),
            "y_exact": self.y_exact.tolist(),
            "x_init": self.x_init.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearProblem":
        a = np.array(d["a_matrix"], dtype=float).reshape(d["n"], d["m"])
        return cls(a, d["x_true"], d["y_exact"], d["x_init"], d.get("name", "problem"), d.get("metadata", {}))


def range_complement_norm(decomp: SpectralDecomposition, vec: np.ndarray) -> float:
    """Norm of the part of ``vec`` orthogonal to range(A^T) = span(v_1..v_r)."""
    vr = decomp.v[:, : decomp.rank]
    return float(np.linalg.norm(vec - vr @ (vr.T @ vec)))


@dataclass(frozen=True)
class NoisyObservation:
    y_noisy: np.ndarray
    delta_abs: float
    delta_rel: float
    delta_bar: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "y_noisy", _frozen(np.ravel(self.y_noisy)))

    def noise(self, problem: LinearProblem) -> np.ndarray:
        return self.y_noisy - problem.y_exact

    @classmethod
    def exact(cls, problem: LinearProblem) -> "NoisyObservation":
        return cls(problem.y_exact, 0.0, 0.0, 0.0, 0)

    def to_dict(self) -> dict:
        return {
            "y_noisy": self.y_noisy.tolist(),
            "delta_abs": self.delta_abs,
            "delta_rel": self.delta_rel,
            "delta_bar": self.delta_bar,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FrequencyProjectors:
    """Orthonormal bases of the low- and high-frequency solution subspaces."""

    low_basis: np.ndarray
    high_basis: np.ndarray
    level: int

    def __post_init__(self):
        object.__setattr__(self, "low_basis", _frozen(self.low_basis))
        object.__setattr__(self, "high_basis", _frozen(self.high_basis))

    @property
    def dim(self) -> int:
        return self.low_basis.shape[0]

    @property
    def p_low(self) -> np.ndarray:
        return self.low_basis @ self.low_basis.T

    @property
    def p_high(self) -> np.ndarray:
        return self.high_basis @ self.high_basis.T

    def low(self, e: np.ndarray) -> np.ndarray:
        return (e @ self.low_basis) @ self.low_basis.T

    def high(self, e: np.ndarray) -> np.ndarray:
        return (e @ self.high_basis) @ self.high_basis.T

    def split_sq(self, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Squared norms of the low/high parts; works row-wise on 2-D input."""
        e = np.asarray(e, dtype=float)
        if e.shape[-1] != self.dim:
            raise ValueError(f"vector length {e.shape[-1]} does not match projector dimension {self.dim}")
        lo = e @ self.low_basis
        hi = e @ self.high_basis
        return np.sum(lo * lo, axis=-1), np.sum(hi * hi, axis=-1)


def gram_operator(a_matrix: np.ndarray) -> np.ndarray:
    """B = n^{-1} A^T A, the expected outer product of a uniformly drawn row."""
    a = np.asarray(a_matrix, dtype=float)
    b = a.T @ a / a.shape[0]
    return 0.5 * (b + b.T)


def spectral_split(decomp: SpectralDecomposition, truncation_level: int) -> FrequencyProjectors:
    r = decomp.rank
    if not 1 <= truncation_level <= r:
        raise ValueError(f"truncation level must lie in [1, {r}], got {truncation_level}")
    top = min(decomp.u.shape[0], decomp.v.shape[0])
    v = decomp.v
    return FrequencyProjectors(v[:, :truncation_level], v[:, truncation_level:top], truncation_level)


def minimum_norm_solution(a_matrix, y_exact, x_init) -> np.ndarray:
    """Solution of A x = y closest to ``x_init`` (truncated-SVD pseudoinverse)."""
    a = np.asarray(a_matrix, dtype=float)
    y = np.ravel(np.asarray(y_exact, dtype=float))
    x1 = np.ravel(np.asarray(x_init, dtype=float))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > RANK_RTOL * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    rhs = u[:, keep].T @ (y - a @ x1)
    x = x1 + vt[keep].T @ (rhs / s[keep])
    resid = np.linalg.norm(a @ x - y)
    if resid > 1e-8 * max(np.linalg.norm(y), np.finfo(float).tiny):
        raise InconsistentSystemError(f"data not in range(A): residual {resid:.3e}")
    return x


def random_orthonormal(size: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthonormal matrix via sign-fixed QR of a Gaussian draw."""
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def polynomial_spectrum(length: int, beta: float, c: float = 1.0) -> np.ndarray:
    """sigma_i = c * i**-beta, i = 1..length."""
    return c * np.arange(1, length + 1, dtype=float) ** (-float(beta))


def _resolve_spectrum(sigma_spec, length: int) -> np.ndarray:
    if isinstance(sigma_spec, dict):
        kind = sigma_spec.get("kind", "polynomial")
        if kind != "polynomial":
            raise ValueError(f"unknown spectrum kind {kind!r}")
        return polynomial_spectrum(sigma_spec.get("length", length), sigma_spec["beta"], sigma_spec.get("c", 1.0))
    return np.ravel(np.asarray(sigma_spec, dtype=float))


def build_synthetic_problem(
    m: int,
    n: int,
    sigma_spec,
    source: SourceConfig,
    seed: int = 0,
    x_init=None,
    identity_factors: bool = False,
    name: str = "synthetic",
) -> LinearProblem:
    """Problem with prescribed singular values of n^{-1/2} A and a source condition.

    ``sigma_spec`` is either an explicit nonincreasing list or a dict
    ``{"kind": "polynomial", "beta": b, "c": c}`` giving sigma_i = c i^-b.
    U and V come from seeded Gaussian QR unless ``identity_factors``.
    """
    top = min(n, m)
    sigma = _resolve_spectrum(sigma_spec, top)
    if sigma.size > top:
        raise ValueError(f"spectrum has {sigma.size} entries, at most {top} allowed")
    if np.any(sigma < 0):
        raise ValueError("singular values must be nonnegative")
    if np.any(np.diff(sigma) > 0):
        raise ValueError("singular values must be nonincreasing")
    w = np.ravel(source.w)
    if w.size != m:
        raise ValueError(f"source representer has length {w.size}, expected {m}")
    if identity_factors:
        u, v = np.eye(n), np.eye(m)
    else:
        rng = np.random.default_rng(seed)
        u = random_orthonormal(n, rng)
        v = random_orthonormal(m, rng)
    sig_full = np.zeros(m)
    sig_full[: sigma.size] = sigma
    if source.p == 0 and np.any(sig_full == 0):
        raise ValueError("p = 0 needs full column rank, otherwise x_true is not the minimum-norm solution")
    smat = np.zeros((n, m))
    smat[: sigma.size, : sigma.size] = np.diag(sigma)
    a = np.sqrt(n) * (u @ smat @ v.T)
    x1 = np.zeros(m) if x_init is None else np.ravel(np.asarray(x_init, dtype=float))
    x_true = x1 + v @ (psd_power(sig_full**2, source.p) * (v.T @ w))
    meta = {
        "kind": "synthetic",
        "seed": int(seed),
        "p": float(source.p),
        "identity_factors": bool(identity_factors),
        "sigma": sigma.tolist(),
    }
    prob = LinearProblem(a, x_true, a @ x_true, x1, name, meta)
    # the exact factors are known; skip the SVD round trip
    object.__setattr__(
        prob, "decomposition", SpectralDecomposition(u, np.concatenate([sigma, np.zeros(top - sigma.size)]), v, numerical_rank(sigma))
    )
    return prob


def build_toy_problem(n: int, m: int, seed: int = 0, name: str = "toy") -> LinearProblem:
    """Small random system with unit-norm rows, so c0 = 1 is admissible.

    x_true is a seeded Gaussian vector projected onto range(A^T) (minimum norm
    for x_init = 0) and y = A x_true.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, m))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    x_true = minimum_norm_solution(a, a @ rng.standard_normal(m), np.zeros(m))
    return LinearProblem(a, x_true, a @ x_true, np.zeros(m), name, {"kind": "toy", "seed": int(seed)})


def add_noise(problem: LinearProblem, delta_rel: float, seed: int) -> NoisyObservation:
    """y_i = y_i^+ + delta_rel * max_j |y_j^+| * xi_i with xi standard Gaussian."""
    if delta_rel < 0:
        raise ValueError("delta_rel must be nonnegative")
    xi = np.random.default_rng(seed).standard_normal(problem.n)
    scale = delta_rel * float(np.max(np.abs(problem.y_exact)))
    y = problem.y_exact + scale * xi
    delta_abs = float(np.linalg.norm(y - problem.y_exact))
    return NoisyObservation(y, delta_abs, float(delta_rel), delta_abs / np.sqrt(problem.n), int(seed))


def add_scaled_noise(problem: LinearProblem, delta_abs: float, seed: int) -> NoisyObservation:
    """Gaussian noise direction rescaled so that ||y_noisy - y_exact|| = delta_abs.

    ``delta_rel`` is reported on the same scale as :func:`add_noise`, i.e.
    delta_abs / (sqrt(n) max_j |y_j|).
    """
    if delta_abs < 0:
        raise ValueError("delta_abs must be nonnegative")
    g = np.random.default_rng(seed).standard_normal(problem.n)
    xi = g * (delta_abs / np.linalg.norm(g)) if delta_abs > 0 else np.zeros(problem.n)
    y = problem.y_exact + xi
    realized = float(np.linalg.norm(y - problem.y_exact))
    ymax = float(np.max(np.abs(problem.y_exact)))
    rel = realized / (np.sqrt(problem.n) * ymax) if ymax > 0 else float("nan")
    return NoisyObservation(y, realized, rel, realized / np.sqrt(problem.n), int(seed))


def discretize_fredholm(kind: str, size: int) -> LinearProblem:
    from .fredholm import TEST_PROBLEMS

    try:
        builder = TEST_PROBLEMS[kind]
    except KeyError:
        raise ValueError(f"unknown test problem {kind!r}; choose from {sorted(TEST_PROBLEMS)}") from None
    a, x_raw, meta = builder(size)
    # drop components along numerically-null singular vectors so x_true is minimum-norm
    x_true = minimum_norm_solution(a, a @ x_raw, np.zeros(size))
    meta = dict(meta, kind=kind, size=int(size), projection_change=float(np.linalg.norm(x_true - x_raw)))
    return LinearProblem(a, x_true, a @ x_true, np.zeros(size), kind, meta)


# --- serialization ---------------------------------------------------------

def save_problem_json(problem: LinearProblem, path) -> None:
    Path(path).write_text(json.dumps(problem.to_dict(), sort_keys=True, indent=1))


def load_problem_json(path) -> LinearProblem:
    return LinearProblem.from_dict(json.loads(Path(path).read_text()))


def write_matrix_csv(matrix: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.atleast_2d(matrix):
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])

