"""Floating-point verification of the supersymmetric block identities.

The 2n x 2n matrices A(u) and B(t1,t2) built from A0 - z admit closed-form
Schur inverses, and the scalar extracted from the Grassmann integral over
their blocks must coincide with the reduced trace expression phi.  This
module evaluates both routes numerically; the symbolic pedigree of the same
reduction lives in :mod:`ginlab.grassmann`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import SpectrumCache, build_Y0_spectrum, log_det_L, mixed_resolvent_trace, \
    resolvent_trace
from .errors import DomainError, NumericError, UsageError


@dataclass(frozen=True)
class BlockPair:
    """A(u) and B(t1,t2) assembled from A0 - z.

    Layouts: A = [[u I, i(A0-z)], [i(A0-z)*, conj(u) I]] and B likewise with
    it1, it2 on the diagonal.
    """

    u: complex
    t1: complex
    t2: complex
    A_matrix: np.ndarray
    B_matrix: np.ndarray
    shifted: np.ndarray          # A0 - z
    z: complex

    @property
    def n(self) -> int:
        return self.shifted.shape[0]


@dataclass(frozen=True)
class IntegrandPoint:
    """One point of the integral representation's domain."""

    u1: float
    u2: float
    t1: complex
    t2: complex
    r1: float
    r2: float
    eps: float

    def __post_init__(self):
        if self.r1 <= 0 or self.r2 <= 0:
            raise UsageError("r1, r2 must be positive")
        if self.eps <= 0:
            raise UsageError("eps must be positive")

    @property
    def u(self) -> complex:
        return complex(self.u1, self.u2)


def build_block_pair(A0: np.ndarray, z: complex, u: complex, t1: complex, t2: complex) -> BlockPair:
    A0 = np.asarray(A0, dtype=complex)
    n = A0.shape[0]
    if A0.shape != (n, n):
        raise UsageError("A0 must be square")
    shifted = A0 - z * np.eye(n)
    eye = np.eye(n)
    A = np.block([[u * eye, 1j * shifted], [1j * shifted.conj().T, np.conj(u) * eye]])
    B = np.block([[1j * t1 * eye, 1j * shifted], [1j * shifted.conj().T, 1j * t2 * eye]])
    return BlockPair(u=complex(u), t1=complex(t1), t2=complex(t2),
                     A_matrix=A, B_matrix=B, shifted=shifted, z=complex(z))


def phi(cache: SpectrumCache, u: complex, t1: complex, t2: complex) -> complex:
    """The reduced integrand factor, a polynomial in resolvent traces.

    All traces are spectral sums over the cached Y0 eigenvalues; poles of
    G(|u|^2) or G(-t1 t2) raise a domain error.
    """
    uu = (u * np.conj(u)).real
    tt = t1 * t2
    n = cache.n
    g_t = resolvent_trace(cache, -tt, 1)
    g_ut = mixed_resolvent_trace(cache, uu, -tt, 1, 1)
    g_ut2 = mixed_resolvent_trace(cache, uu, -tt, 1, 2)
    g_u2t2 = mixed_resolvent_trace(cache, uu, -tt, 2, 2)
    line1 = (1.0 - g_t + uu * g_ut) ** 2
    line2 = tt * uu * g_ut ** 2
    line3 = -(uu + tt) / n * (g_ut2 - uu * g_u2t2)
    return complex(line1 + line2 + line3)


def _blocks(M: np.ndarray, n: int):
    return M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:]


def I_from_blocks(pair: BlockPair) -> complex:
    """The Grassmann-integral scalar, assembled from dense block inverses.

    Equality with :func:`phi` at the same point is the content of the
    reduction from the block representation to the trace polynomial.
    """
    n = pair.n
    try:
        Ai = np.linalg.inv(pair.A_matrix)
        Bi = np.linalg.inv(pair.B_matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular block matrix") from exc
    a11, a12, a21, a22 = _blocks(Ai, n)
    b11, b12, b21, b22 = _blocks(Bi, n)
    tr = np.trace
    return complex(
        (1.0 + tr(a12 @ b21) / n) * (1.0 + tr(a21 @ b12) / n)
        - tr(a11 @ b11) * tr(a22 @ b22) / n ** 2
        - (tr(a12 @ b22 @ a21 @ b11) - tr(a11 @ b12 @ a22 @ b21)) / n ** 2
    )


def schur_closed_form_inverses(pair: BlockPair):
    """Closed-form block inverses of A(u) and B(t1,t2).

    A^-1 = [[conj(u) G(u ubar), -i G (A0-z)], [-i (A0-z)* G, u Gt]] with
    G(x) = (Y0+x)^-1 and Gt(x) = ((A0-z)*(A0-z)+x)^-1; B^-1 analogously with
    it2 / it1 on the diagonal at argument -t1 t2.
    """
    M = pair.shifted
    n = pair.n
    eye = np.eye(n)
    uu = (pair.u * np.conj(pair.u)).real
    tt = pair.t1 * pair.t2
    G_u = np.linalg.inv(M @ M.conj().T + uu * eye)
    Gt_u = np.linalg.inv(M.conj().T @ M + uu * eye)
    G_t = np.linalg.inv(M @ M.conj().T - tt * eye)
    Gt_t = np.linalg.inv(M.conj().T @ M - tt * eye)
    A_inv = np.block([[np.conj(pair.u) * G_u, -1j * G_u @ M],
                      [-1j * M.conj().T @ G_u, pair.u * Gt_u]])
    B_inv = np.block([[1j * pair.t2 * G_t, -1j * G_t @ M],
                      [-1j * M.conj().T @ G_t, 1j * pair.t1 * Gt_t]])
    return A_inv, B_inv


def trace_identity_deviations(pair: BlockPair, cache: SpectrumCache) -> dict:
    """Absolute deviations of the four block-trace identities from their trace forms."""
    n = pair.n
    uu = (pair.u * np.conj(pair.u)).real
    tt = pair.t1 * pair.t2
    Ai = np.linalg.inv(pair.A_matrix)
    Bi = np.linalg.inv(pair.B_matrix)
    a11, a12, a21, a22 = _blocks(Ai, n)
    b11, b12, b21, b22 = _blocks(Bi, n)
    tr = np.trace
    g_t = resolvent_trace(cache, -tt, 1)
    g_ut = mixed_resolvent_trace(cache, uu, -tt, 1, 1)
    g_ut2 = mixed_resolvent_trace(cache, uu, -tt, 1, 2)
    g_u2t2 = mixed_resolvent_trace(cache, uu, -tt, 2, 2)
    rhs_mixed = -g_t + uu * g_ut
    return {
        "cross_2112": abs(tr(a21 @ b12) / n - rhs_mixed),
        "cross_1221": abs(tr(a12 @ b21) / n - rhs_mixed),
        "diag_product": abs(tr(a11 @ b11) * tr(a22 @ b22) / n ** 2
                            - (-tt * uu * g_ut ** 2)),
        "chain_1221": abs(tr(a12 @ b22 @ a21 @ b11) / n ** 2
                          - (tt * g_ut2 - tt * uu * g_u2t2) / n),
        "chain_1122": abs(tr(a11 @ b12 @ a22 @ b21) / n ** 2
                          - (-uu * g_ut2 + uu ** 2 * g_u2t2) / n),
    }


def F1(cache: SpectrumCache, u1: float, u2: float, eps: float) -> complex:
    """L_n(u1^2+u2^2) - (u1+eps)^2 - u2^2."""
    return complex(log_det_L(cache, u1 ** 2 + u2 ** 2)) - (u1 + eps) ** 2 - u2 ** 2


def F2(cache: SpectrumCache, t1: complex, t2: complex, r1: float, r2: float,
       eps: float) -> complex:
    """-L_n(-t1 t2) - (r1 r2)^2 - i r1 r2 (t1 + t2) - eps (r1^2 + r2^2)."""
    return (-complex(log_det_L(cache, -t1 * t2)) - (r1 * r2) ** 2
            - 1j * r1 * r2 * (t1 + t2) - eps * (r1 ** 2 + r2 ** 2))


@dataclass
class DetIdentityReport:
    dev_A: float
    dev_B: float

    @property
    def max_deviation(self) -> float:
        return max(self.dev_A, self.dev_B)


def verify_det_identities(pair: BlockPair) -> DetIdentityReport:
    """Relative deviation of det A(u), det B(t1,t2) from det(Y0+|u|^2), det(Y0-t1t2).

    Compared through log-determinants so large n cannot overflow.
    """
    M = pair.shifted
    n = pair.n
    eye = np.eye(n)
    uu = (pair.u * np.conj(pair.u)).real
    tt = pair.t1 * pair.t2
    Y0 = M @ M.conj().T

    def logdet(X):
        sign, ld = np.linalg.slogdet(X)
        if sign == 0:
            raise DomainError("singular matrix in determinant identity")
        return np.log(sign) + ld

    dev_A = abs(np.expm1(logdet(pair.A_matrix) - logdet(Y0 + uu * eye)))
    dev_B = abs(np.expm1(logdet(pair.B_matrix) - logdet(Y0 - tt * eye)))
    return DetIdentityReport(dev_A=float(dev_A), dev_B=float(dev_B))


def random_instance(n: int, seed: int, deformation: str = "ginibre"):
    """Seeded (A0, z, u, t1, t2) draw with Im t1, Im t2 > 0, for identity sweeps."""
    rng = np.random.default_rng(seed)
    if deformation == "ginibre":
        A0 = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n)
    elif deformation == "zero":
        A0 = np.zeros((n, n), dtype=complex)
    else:
        raise UsageError(f"unsupported deformation {deformation!r} for instance draws")
    z = complex(*rng.uniform(-0.8, 0.8, size=2))
    u = complex(*rng.uniform(-1.0, 1.0, size=2))
    t1 = complex(rng.uniform(-1.5, 1.5), rng.uniform(0.3, 1.2))
    t2 = complex(rng.uniform(-1.5, 1.5), rng.uniform(0.3, 1.2))
    return A0, z, u, t1, t2


def phi_block_deviation(n: int, seed: int) -> float:
    """Relative |phi - I| on one seeded instance; the phi == I equivalence check."""
    A0, z, u, t1, t2 = random_instance(n, seed)
    cache = build_Y0_spectrum(A0, z)
    pair = build_block_pair(A0, z, u, t1, t2)
    p = phi(cache, u, t1, t2)
    i_val = I_from_blocks(pair)
    return abs(p - i_val) / (1.0 + abs(i_val))
