"""Sampling of the deformed Ginibre ensemble and spectral primitives.

Everything downstream compares against the finite-n quantities built here:
the deformation A0, the shifted Gram matrix Y0(z) = (A0-z)(A0-z)*, its
spectrum, resolvent traces, and per-sample observables of
Y(z) = (A0+H0-z)(A0+H0-z)*.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, InputError, UsageError

POLE_GUARD = 1e-14
DEFORMATION_KINDS = ("zero", "diagonal", "hermitian_wigner", "ginibre", "user_matrix")


def stream_rng(master_seed: int, *branch: int) -> np.random.Generator:
    """Counter-based per-sample stream: identical serially and under any worker split."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(branch)))


def sample_ginibre(n: int, seed) -> np.ndarray:
    """n x n matrix of iid centered complex Gaussians with E|h|^2 = 1/n, Eh^2 = 0.

    Real and imaginary parts are independent N(0, 1/(2n)); ``seed`` may be an
    integer or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise UsageError("dimension must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(2.0 * n)
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


@dataclass(frozen=True)
class DeformationSpec:
    """Recipe for the deformation A0.

    kind one of 'zero', 'diagonal', 'hermitian_wigner', 'ginibre',
    'user_matrix'; ``values`` holds the diagonal for 'diagonal', ``path`` the
    file for 'user_matrix', ``seed`` feeds the random kinds.
    """

    kind: str
    n: int
    values: Optional[tuple] = None
    path: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in DEFORMATION_KINDS:
            raise UsageError(f"unknown deformation kind {self.kind!r}")
        if self.n < 1:
            raise UsageError("dimension must be >= 1")
        if self.kind == "diagonal":
            if self.values is None or len(self.values) != self.n:
                raise UsageError("diagonal deformation needs exactly n values")
            object.__setattr__(self, "values", tuple(complex(v) for v in self.values))
        if self.kind == "user_matrix" and not self.path:
            raise UsageError("user_matrix deformation needs a file path")

    @property
    def is_random(self) -> bool:
        return self.kind in ("hermitian_wigner", "ginibre")

    def digest_fields(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "values": None if self.values is None else [[v.real, v.imag] for v in self.values],
            "path": self.path,
            "seed": self.seed,
        }


def read_matrix_file(path: str, n_expected: Optional[int] = None) -> np.ndarray:
    """Parse the user matrix format: first line n, then n rows of n ``re,im`` pairs."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise InputError(f"cannot read matrix file {path}: {exc}") from exc
    if not lines:
        raise InputError(f"matrix file {path} is empty")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise InputError(f"first line of {path} must be the dimension") from exc
    if n < 1 or len(lines) != n + 1:
        raise InputError(f"matrix file {path} must have {max(n, 1)} rows after the header")
    if n_expected is not None and n != n_expected:
        raise InputError(f"matrix file {path} has n={n}, expected {n_expected}")
    out = np.empty((n, n), dtype=complex)
    for i, line in enumerate(lines[1:]):
        tokens = line.split()
        if len(tokens) != n:
            raise InputError(f"row {i + 1} of {path} has {len(tokens)} entries, expected {n}")
        for j, tok in enumerate(tokens):
            try:
                re_s, im_s = tok.split(",")
                out[i, j] = complex(float(re_s), float(im_s))
            except ValueError as exc:
                raise InputError(f"bad entry {tok!r} at row {i + 1} of {path}") from exc
    return out


def write_matrix_file(path: str, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=complex)
    n = matrix.shape[0]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{n}\n")
        for row in matrix:
            fh.write(" ".join(f"{v.real!r},{v.imag!r}" for v in row) + "\n")


def realize_deformation(spec: DeformationSpec, rng=None) -> np.ndarray:
    """Produce a concrete A0; random kinds are reproducible from spec.seed or ``rng``."""
    n = spec.n
    if spec.kind == "zero":
        return np.zeros((n, n), dtype=complex)
    if spec.kind == "diagonal":
        return np.diag(np.asarray(spec.values, dtype=complex))
    if spec.kind == "user_matrix":
        return read_matrix_file(spec.path, n_expected=n)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.kind == "ginibre":
        return sample_ginibre(n, rng)
    # hermitian_wigner: GUE normalization with E|a_ij|^2 = 1/n off-diagonal
    g = sample_ginibre(n, rng)
    return (g + g.conj().T) / np.sqrt(2.0)


@dataclass(frozen=True)
class SpectrumCache:
    """Spectrum of Y0(z) at a fixed shift z; the finite-n stand-in for nu_{n,z}."""

    z: complex
    eigenvalues: np.ndarray
    diagonalizer: Optional[np.ndarray] = None

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1:
            raise UsageError("eigenvalues must be a vector")
        if np.any(lam < -1e-10):
            raise UsageError("Y0 spectrum must be positive semi-definite")
        object.__setattr__(self, "eigenvalues", np.sort(np.maximum(lam, 0.0)))

    @property
    def n(self) -> int:
        return self.eigenvalues.size


def build_Y0_spectrum(A0: np.ndarray, z: complex, keep_diagonalizer: bool = False) -> SpectrumCache:
    """Eigenvalues (ascending) of the Hermitian PSD matrix (A0-z)(A0-z)*."""
    A0 = np.asarray(A0, dtype=complex)
    if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
        raise UsageError("A0 must be square")
    shifted = A0 - z * np.eye(A0.shape[0])
    Y0 = shifted @ shifted.conj().T
    if keep_diagonalizer:
        lam, vec = np.linalg.eigh(Y0)
        return SpectrumCache(z=complex(z), eigenvalues=lam, diagonalizer=vec)
    return SpectrumCache(z=complex(z), eigenvalues=np.linalg.eigvalsh(Y0))


def smallest_eigenvalue_Y(A0: np.ndarray, H0: np.ndarray, z: complex) -> float:
    """lambda_1(Y(z)) as the squared least singular value of A0 + H0 - z."""
    A0 = np.asarray(A0, dtype=complex)
    H0 = np.asarray(H0, dtype=complex)
    if A0.shape != H0.shape:
        raise UsageError("A0 and H0 shapes disagree")
    M = A0 + H0 - z * np.eye(A0.shape[0])
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[-1] ** 2)


def _check_pole(lam: np.ndarray, x: complex) -> None:
    if np.min(np.abs(lam + x)) < POLE_GUARD:
        raise DomainError(f"shift {x} hits the spectrum of -Y0")


def resolvent_trace(cache: SpectrumCache, x, k: int = 1):
    """n^-1 sum (lambda_i + x)^-k for k in 1..3."""
    if k not in (1, 2, 3):
        raise UsageError("power k must be 1, 2 or 3")
    lam = cache.eigenvalues
    xc = complex(x)
    _check_pole(lam, xc)
    vals = 1.0 / (lam + xc) ** k
    out = vals.mean()
    if xc.imag == 0 and np.isreal(out):
        return float(out.real)
    return complex(out)


def mixed_resolvent_trace(cache: SpectrumCache, x, y, j: int, k: int) -> complex:
    """n^-1 sum (lambda_i + x)^-j (lambda_i + y)^-k; valid since all G's share Y0."""
    if j < 1 or k < 1:
        raise UsageError("powers must be >= 1")
    lam = cache.eigenvalues
    xc, yc = complex(x), complex(y)
    _check_pole(lam, xc)
    _check_pole(lam, yc)
    return complex(np.mean(1.0 / ((lam + xc) ** j * (lam + yc) ** k)))


def log_det_L(cache: SpectrumCache, x):
    """n^-1 sum log(lambda_i + x), principal branch per term; real for real x."""
    lam = cache.eigenvalues
    xc = complex(x)
    _check_pole(lam, xc)
    if xc.imag == 0 and xc.real > -lam[0]:
        return float(np.mean(np.log(lam + xc.real)))
    return complex(np.mean(np.log(lam + xc)))


@dataclass(frozen=True)
class SampleObservables:
    """Observables of one H0 draw: least eigenvalue of Y(z) and the regularized trace."""

    lambda1: float
    trace_resolvent: float
    seed: int

    def __post_init__(self):
        if self.lambda1 < 0:
            raise UsageError("lambda1 must be nonnegative")


def sample_observables(A0: np.ndarray, H0: np.ndarray, z: complex, eps: float,
                       stream_id: int = 0) -> SampleObservables:
    """Both per-sample observables from one SVD of A0 + H0 - z."""
    if eps <= 0:
        raise UsageError("eps must be positive")
    A0 = np.asarray(A0, dtype=complex)
    M = A0 + np.asarray(H0, dtype=complex) - z * np.eye(A0.shape[0])
    s = np.linalg.svd(M, compute_uv=False)
    lam1 = float(s[-1] ** 2)
    trace = float(np.mean(1.0 / (s ** 2 + eps ** 2)))
    return SampleObservables(lambda1=lam1, trace_resolvent=trace, seed=stream_id)
