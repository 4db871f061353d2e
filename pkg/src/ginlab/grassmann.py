"""Exact sparse Grassmann algebra with Berezin integration.

Elements are finite linear combinations of monomials in anticommuting
generators.  A monomial is stored as a bitmask over generator indices with
bits in ascending order, so products and Berezin integrals reduce to
popcount-based sign bookkeeping.  All identities used elsewhere in the
package (Gaussian Berezin integral = det, the Grassmann Hubbard-Stratonovich
transform, the superdeterminant expansion) are checked through this engine.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, UsageError

GENERATOR_CAP = 24
SYMBOLIC_DET_LIMIT = 6


def _sign_merge(left_mask: int, right_mask: int) -> int:
    """Parity sign for sorting the concatenation (left)(right) into ascending order.

    Counts, for every generator in ``right_mask``, the generators of
    ``left_mask`` with a strictly larger index; each such pair is one
    transposition.
    """
    sign = 1
    m = right_mask
    while m:
        j = (m & -m).bit_length() - 1
        if (left_mask >> (j + 1)).bit_count() & 1:
            sign = -sign
        m &= m - 1
    return sign


@dataclass(frozen=True)
class GrassmannElement:
    """Sparse element of the Grassmann algebra on ``num_generators`` generators.

    ``terms`` maps monomial bitmasks to nonzero complex coefficients; the
    empty monomial (mask 0) is the scalar part.  Instances are immutable and
    all operations are pure.
    """

    num_generators: int
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.num_generators <= GENERATOR_CAP:
            raise CapacityError(
                f"generator count {self.num_generators} outside [0, {GENERATOR_CAP}]")
        limit = 1 << self.num_generators
        cleaned = {}
        for mask, coeff in self.terms.items():
            if mask >= limit or mask < 0:
                raise UsageError(f"monomial {mask:#x} does not fit {self.num_generators} generators")
            c = complex(coeff)
            if c != 0:
                cleaned[mask] = c
        object.__setattr__(self, "terms", cleaned)

    # -- constructors -------------------------------------------------

    @staticmethod
    def scalar(value, num_generators: int) -> "GrassmannElement":
        return GrassmannElement(num_generators, {0: complex(value)})

    @staticmethod
    def generator(index: int, num_generators: int) -> "GrassmannElement":
        if not 0 <= index < num_generators:
            raise UsageError(f"generator index {index} out of range")
        return GrassmannElement(num_generators, {1 << index: 1.0 + 0j})

    # -- ring structure -----------------------------------------------

    def _coerce(self, other):
        if isinstance(other, GrassmannElement):
            if other.num_generators != self.num_generators:
                raise UsageError("mismatched generator counts")
            return other
        return GrassmannElement.scalar(other, self.num_generators)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for mask, c in other.terms.items():
            terms[mask] = terms.get(mask, 0j) + c
        return GrassmannElement(self.num_generators, terms)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.num_generators, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, GrassmannElement):
            return GrassmannElement(
                self.num_generators, {m: c * complex(other) for m, c in self.terms.items()})
        return multiply(self, other)

    def __rmul__(self, other):
        # scalars commute with everything; element*element handled by __mul__
        return self.__mul__(other)

    def __eq__(self, other):
        if not isinstance(other, GrassmannElement):
            return NotImplemented
        return self.num_generators == other.num_generators and self.terms == other.terms

    def __hash__(self):
        return hash((self.num_generators, tuple(sorted(self.terms.items(), key=lambda kv: kv[0]))))

    # -- queries --------------------------------------------------------

    @property
    def scalar_part(self) -> complex:
        return self.terms.get(0, 0j)

    def degree(self) -> int:
        """Largest monomial degree present (0 for the zero element)."""
        return max((m.bit_count() for m in self.terms), default=0)

    def parity(self):
        """0 if all monomials have even degree, 1 if all odd, None if mixed or zero."""
        parities = {m.bit_count() & 1 for m in self.terms}
        if len(parities) == 1:
            return parities.pop()
        return None

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs_diff(self, other: "GrassmannElement") -> float:
        other = self._coerce(other)
        masks = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(m, 0j) - other.terms.get(m, 0j)) for m in masks),
                   default=0.0)

    def __repr__(self):
        if not self.terms:
            return "<0>"
        parts = []
        for mask in sorted(self.terms):
            gens = "".join(f"g{j}" for j in range(self.num_generators) if mask >> j & 1)
            parts.append(f"({self.terms[mask]:.6g}){gens or '1'}")
        return "<" + " + ".join(parts) + ">"


def multiply(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Bilinear product; monomials sharing a generator vanish."""
    if a.num_generators != b.num_generators:
        raise UsageError("mismatched generator counts")
    terms: dict = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            if ma & mb:
                continue
            c = ca * cb * _sign_merge(ma, mb)
            mask = ma | mb
            acc = terms.get(mask, 0j) + c
            if acc == 0:
                terms.pop(mask, None)
            else:
                terms[mask] = acc
    return GrassmannElement(a.num_generators, terms)


def berezin_integrate(e: GrassmannElement, generator_index: int) -> GrassmannElement:
    """Integrate out one generator.

    Monomials without the generator are killed; in the others the generator
    is stripped with the sign of anticommuting it past the generators that
    follow it in ascending order (so that the iterated integral matches
    ``int f dpsi_k ... dpsi_1 = p_{1..k}``).
    """
    if not 0 <= generator_index < e.num_generators:
        raise UsageError(f"generator index {generator_index} out of range")
    bit = 1 << generator_index
    terms = {}
    for mask, c in e.terms.items():
        if not mask & bit:
            continue
        sign = -1 if ((mask >> (generator_index + 1)).bit_count() & 1) else 1
        terms[mask ^ bit] = sign * c
    return GrassmannElement(e.num_generators, terms)


def berezin_integrate_many(e: GrassmannElement, indices) -> GrassmannElement:
    """Iterated Berezin integral; ``indices[0]`` is the innermost differential."""
    for j in indices:
        e = berezin_integrate(e, j)
    return e


def exp_element(e: GrassmannElement) -> GrassmannElement:
    """exp of an element: scalar part exponentiated, nilpotent part summed until it dies."""
    a = e.scalar_part
    nil = e - a
    result = GrassmannElement.scalar(1.0, e.num_generators)
    power = result
    for l in range(1, e.num_generators + 1):
        power = multiply(power, nil) * (1.0 / l)
        if power.is_zero():
            break
        result = result + power
    return result * cmath.exp(a)


def invert_even(e: GrassmannElement) -> GrassmannElement:
    """Inverse of an element with nonzero scalar part: s(1+nu) -> s^-1 sum (-nu)^l."""
    s = e.scalar_part
    if s == 0:
        raise UsageError("element with zero scalar part is not invertible")
    nu = e * (1.0 / s) - 1.0
    result = GrassmannElement.scalar(1.0, e.num_generators)
    power = result
    for _ in range(e.num_generators):
        power = multiply(power, nu) * (-1.0)
        if power.is_zero():
            break
        result = result + power
    return result * (1.0 / s)


def gaussian_berezin_det(A) -> complex:
    """Evaluate ``int exp{-sum A_jk psibar_j psi_k} prod dpsibar_j dpsi_j`` in the engine.

    Must equal det A; the determinant law is the engine's primary
    self-check.  Generators are interleaved as (psibar_1, psi_1, psibar_2,
    psi_2, ...) and integrated in measure order, innermost first.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise UsageError("matrix must be square")
    m = A.shape[0]
    if m > SYMBOLIC_DET_LIMIT:
        raise CapacityError(
            f"dimension {m} above symbolic limit {SYMBOLIC_DET_LIMIT}")
    ngen = 2 * m
    terms = {}
    for j in range(m):
        for k in range(m):
            if A[j, k] == 0:
                continue
            bj, pk = 2 * j, 2 * k + 1          # psibar_j, psi_k
            # coefficient of the ascending monomial; psibar_j is written first
            sign = 1 if bj < pk else -1
            mask = (1 << bj) | (1 << pk)
            terms[mask] = terms.get(mask, 0j) - sign * A[j, k]
    integrand = exp_element(GrassmannElement(ngen, terms))
    result = berezin_integrate_many(integrand, range(ngen))
    return result.scalar_part


def verify_hubbard_grassmann(generator_order=(0, 1, 2, 3)) -> bool:
    """Check exp(-rho tau) = int exp(rho chi + tau eta + chi eta) deta dchi exactly.

    ``generator_order`` assigns indices to (rho, tau, chi, eta); the identity
    must hold for any assignment if the engine's sign conventions are
    consistent.
    """
    if sorted(generator_order) != [0, 1, 2, 3]:
        raise UsageError("generator_order must be a permutation of 0..3")
    rho_i, tau_i, chi_i, eta_i = generator_order
    g = lambda j: GrassmannElement.generator(j, 4)
    rho, tau, chi, eta = g(rho_i), g(tau_i), g(chi_i), g(eta_i)
    lhs = exp_element(-(rho * tau))
    rhs = berezin_integrate_many(
        exp_element(rho * chi + tau * eta + chi * eta), [eta_i, chi_i])
    return lhs == rhs


# ---------------------------------------------------------------------------
# supermatrices and the superdeterminant expansion
# ---------------------------------------------------------------------------

def gmat(entries) -> list:
    return [list(row) for row in entries]


def gmat_mul(X, Y):
    k = len(X)
    out = []
    for i in range(k):
        row = []
        for j in range(k):
            acc = X[i][0] * Y[0][j]
            for l in range(1, k):
                acc = acc + X[i][l] * Y[l][j]
            row.append(acc)
        out.append(row)
    return out


def gmat_trace(X) -> GrassmannElement:
    acc = X[0][0]
    for i in range(1, len(X)):
        acc = acc + X[i][i]
    return acc


def gmat_det(X) -> GrassmannElement:
    """Leibniz determinant of a matrix with commuting (even) Grassmann entries."""
    k = len(X)
    ngen = X[0][0].num_generators
    acc = GrassmannElement.scalar(0.0, ngen)
    for perm in itertools.permutations(range(k)):
        sign = 1
        seen = list(perm)
        for i in range(k):          # parity by counting inversions
            for j in range(i + 1, k):
                if seen[i] > seen[j]:
                    sign = -sign
        term = GrassmannElement.scalar(sign, ngen)
        for i in range(k):
            term = term * X[i][perm[i]]
        acc = acc + term
    return acc


@dataclass
class SuperMatrix:
    """Block supermatrix [[A, chi], [eta, B]] with Grassmann-odd off blocks.

    ``fermion_block`` plays the role of A (acts on the anticommuting sector),
    ``boson_block`` the role of B.  Off-block entries must be odd elements.
    """

    fermion_block: np.ndarray
    boson_block: np.ndarray
    upper_off: list
    lower_off: list

    def __post_init__(self):
        self.fermion_block = np.asarray(self.fermion_block, dtype=complex)
        self.boson_block = np.asarray(self.boson_block, dtype=complex)
        k = self.fermion_block.shape[0]
        if self.fermion_block.shape != (k, k) or self.boson_block.shape != (k, k):
            raise UsageError("blocks must be square and of equal size")
        for block in (self.upper_off, self.lower_off):
            if len(block) != k or any(len(row) != k for row in block):
                raise UsageError("off blocks must match the diagonal block size")
            for row in block:
                for entry in row:
                    if not entry.is_zero() and entry.parity() != 1:
                        raise UsageError("off-block entries must be Grassmann-odd")

    @property
    def block_size(self) -> int:
        return self.fermion_block.shape[0]


def sdet_inverse_schur(sm: SuperMatrix) -> GrassmannElement:
    """Sdet^-1 via det A / det(B - eta A^-1 chi), Schur complement in the engine."""
    k = sm.block_size
    ngen = sm.upper_off[0][0].num_generators
    try:
        a_inv = np.linalg.inv(sm.fermion_block)
        det_a = np.linalg.det(sm.fermion_block)
    except np.linalg.LinAlgError as exc:
        raise UsageError("fermion block is singular") from exc
    if det_a == 0 or np.linalg.det(sm.boson_block) == 0:
        raise UsageError("singular diagonal block")
    schur = []
    for i in range(k):
        row = []
        for j in range(k):
            acc = GrassmannElement.scalar(sm.boson_block[i, j], ngen)
            for l in range(k):
                for m in range(k):
                    # eta_{il} (A^-1)_{lm} chi_{mj}
                    acc = acc - sm.lower_off[i][l] * (a_inv[l, m] * sm.upper_off[m][j])
            row.append(acc)
        schur.append(row)
    return invert_even(gmat_det(schur)) * det_a


def sdet_inverse_expansion(sm: SuperMatrix) -> GrassmannElement:
    """Sdet^-1 via (det A / det B) exp{Str Qt^2 / 2 + Str Qt^4 / 4}.

    Qt is the off-diagonal part of diag(A,B)^-1 times the supermatrix; odd
    powers have vanishing supertrace and Qt^p dies once a generator repeats,
    so the exponent series is exact for the block sizes used here.
    """
    k = sm.block_size
    ngen = sm.upper_off[0][0].num_generators
    a_inv = np.linalg.inv(sm.fermion_block)
    b_inv = np.linalg.inv(sm.boson_block)
    upper = []      # A^-1 chi
    lower = []      # B^-1 eta
    for i in range(k):
        upper.append([sum((a_inv[i, l] * sm.upper_off[l][j] for l in range(k)),
                          start=GrassmannElement.scalar(0.0, ngen)) for j in range(k)])
        lower.append([sum((b_inv[i, l] * sm.lower_off[l][j] for l in range(k)),
                          start=GrassmannElement.scalar(0.0, ngen)) for j in range(k)])
    q2_ferm = gmat_mul(upper, lower)       # (A^-1 chi)(B^-1 eta)
    q2_bos = gmat_mul(lower, upper)        # (B^-1 eta)(A^-1 chi)
    str_q2 = gmat_trace(q2_bos) - gmat_trace(q2_ferm)
    str_q4 = gmat_trace(gmat_mul(q2_bos, q2_bos)) - gmat_trace(gmat_mul(q2_ferm, q2_ferm))
    det_ratio = np.linalg.det(sm.fermion_block) / np.linalg.det(sm.boson_block)
    return exp_element(str_q2 * 0.5 + str_q4 * 0.25) * det_ratio


@dataclass
class SdetExpansionReport:
    max_deviation: float
    schur_route: GrassmannElement
    expansion_route: GrassmannElement


def verify_sdet_expansion(A, B, R: float = 1.0, n: float = 1.0) -> SdetExpansionReport:
    """Compare the two Sdet^-1 routes for Q = [[A, chi (R/n)^1/2], [eta (R/n)^1/2, R B]].

    chi-hat and eta-hat are diagonal matrices of 2k distinct generators.  The
    exponent truncation in the expansion route is exact for k <= 2, which is
    the tested range.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise UsageError("A and B must be square matrices of equal size")
    k = A.shape[0]
    if np.linalg.det(A) == 0 or np.linalg.det(B) == 0:
        raise UsageError("A and B must be invertible")
    ngen = 2 * k
    if ngen > GENERATOR_CAP:
        raise CapacityError("block size exceeds generator budget")
    c = (R / n) ** 0.5
    zero = GrassmannElement.scalar(0.0, ngen)
    chi_hat = [[(GrassmannElement.generator(i, ngen) * c) if i == j else zero
                for j in range(k)] for i in range(k)]
    eta_hat = [[(GrassmannElement.generator(k + i, ngen) * c) if i == j else zero
                for j in range(k)] for i in range(k)]
    sm = SuperMatrix(fermion_block=A, boson_block=R * B,
                     upper_off=chi_hat, lower_off=eta_hat)
    lhs = sdet_inverse_schur(sm)
    rhs = sdet_inverse_expansion(sm)
    return SdetExpansionReport(lhs.max_abs_diff(rhs), lhs, rhs)
