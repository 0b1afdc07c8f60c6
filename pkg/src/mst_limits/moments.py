"""Scaled moment tables of the per-type limit variables and the
generalized-series ODE identity.

The dislocation chain turns the Laplace series L_k(z) = sum_p a_{k,p} z^p
(a_{k,p} = E W_k^p / p!) into a formal first-order system: each row follows
its predecessor through a_{k+1,p} = (1 + p*lambda2/k) a_{k,p}, and the last
row closes on the m-th power of the first.  Isolating the unknown a_{1,p}
in the closing relation leaves the divisor chi(p*lambda2)/(m-1)!, nonzero
for p >= 2 once Re(lambda2) > 1/2, so the whole table fills in
triangularly.

After the substitution y(z) = -rho * L_1(z^{-lambda2}) / z with
rho^(m-1) = (m-1)!, the series solves y^(m-1) = y^m on the exponent
lattice {j + p*lambda2}; ``ode_check`` verifies that identity termwise.
"""

import math
from dataclasses import dataclass

import numpy as np

from .spectral import char_poly_eval, eigen_data

#: |chi(p*lambda2)| / m! below which the closing relation is ill posed
RESONANCE_TOL = 1e-8


class MomentError(ValueError):
    """Invalid parameters for a moment computation."""


class ResonantDegeneracyError(MomentError):
    """chi(p*lambda2) is numerically zero; the closing relation degenerates."""

    def __init__(self, p, magnitude):
        self.p = p
        self.magnitude = magnitude
        super().__init__(
            f"closing divisor chi({p}*lambda2)/m! has magnitude {magnitude:.2e}"
        )


class LatticeMismatchError(MomentError):
    """Generalized-series operands live on different exponent lattices."""


def _series_mul(a, b, pmax):
    return np.convolve(a, b)[: pmax + 1]


def _series_pow(coeffs, n, pmax):
    """Truncated n-th power by repeated squaring."""
    result = np.zeros(pmax + 1, dtype=complex)
    result[0] = 1.0
    base = np.asarray(coeffs[: pmax + 1], dtype=complex)
    while n > 0:
        if n & 1:
            result = _series_mul(result, base, pmax)
        n >>= 1
        if n:
            base = _series_mul(base, base, pmax)
    return result


@dataclass
class MomentTable:
    """a[k-1, p] = E W_k^p / p! for k = 1..m-1, p = 0..pmax."""

    m: int
    lambda2: complex
    pmax: int
    a: np.ndarray

    def moment(self, k, p):
        """E W_k^p (unscaled)."""
        return complex(self.a[k - 1, p] * math.factorial(p))


def moment_table(m, pmax, spectral=None):
    """Scaled complex moments of every type from the formal system.

    Row 1 starts from a_{1,0} = a_{1,1} = 1; for p >= 2 the coefficient is
    (m-1)! times the p-th coefficient of the m-th power of the
    already-known truncation, divided by chi(p*lambda2).  Rows 2..m-1
    follow by the per-type ratio (1 + p*lambda2/k).
    """
    if pmax < 1:
        raise MomentError(f"pmax must be >= 1, got {pmax}")
    if spectral is None:
        spectral = eigen_data(m)
    if spectral.m != m:
        raise MomentError("spectral data branching factor mismatch")
    lam2 = spectral.lambda2
    scale = float(math.factorial(m))

    row1 = np.zeros(pmax + 1, dtype=complex)
    row1[0] = 1.0
    row1[1] = 1.0
    for p in range(2, pmax + 1):
        divisor = char_poly_eval(m, p * lam2)
        if abs(divisor) / scale < RESONANCE_TOL:
            raise ResonantDegeneracyError(p, abs(divisor) / scale)
        trunc = row1.copy()
        trunc[p:] = 0.0
        rhs = _series_pow(trunc, m, pmax)[p]
        row1[p] = float(math.factorial(m - 1)) * rhs / divisor

    a = np.zeros((m - 1, pmax + 1), dtype=complex)
    a[0] = row1
    ps = np.arange(pmax + 1)
    for k in range(1, m - 1):
        a[k] = a[k - 1] * (1.0 + ps * lam2 / k)
    return MomentTable(m=m, lambda2=lam2, pmax=pmax, a=a)


@dataclass
class GenSeries:
    """Formal series sum_p coeffs[p] * z^(-(offset + p*lambda2)).

    Differentiation lowers nothing and shifts the whole exponent ladder by
    one; products add offsets and convolve coefficients.  All operations
    stay on the lattice {integer offset + p*lambda2}, and combining series
    from different lattices raises.
    """

    lambda2: complex
    offset: complex
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    @property
    def pmax(self):
        return self.coeffs.size - 1

    def exponents(self):
        return self.offset + np.arange(self.coeffs.size) * self.lambda2

    def derivative(self):
        """d/dz maps the coefficient at exponent e to -e at exponent e+1."""
        return GenSeries(
            lambda2=self.lambda2,
            offset=self.offset + 1,
            coeffs=-self.exponents() * self.coeffs,
        )

    def power(self, n, pmax=None):
        if pmax is None:
            pmax = self.pmax
        return GenSeries(
            lambda2=self.lambda2,
            offset=self.offset * n,
            coeffs=_series_pow(self.coeffs, n, pmax),
        )

    def relative_residual_against(self, other):
        """Termwise |self - other| / max(|self|, |other|) after checking the
        exponent lattices agree."""
        if abs(complex(self.offset) - complex(other.offset)) > 1e-9 or abs(
            self.lambda2 - other.lambda2
        ) > 1e-12:
            raise LatticeMismatchError(
                f"offsets {self.offset} vs {other.offset} "
                f"(lambda2 {self.lambda2} vs {other.lambda2})"
            )
        n = min(self.coeffs.size, other.coeffs.size)
        x, y = self.coeffs[:n], other.coeffs[:n]
        denom = np.maximum(np.abs(x), np.abs(y))
        denom[denom == 0] = 1.0
        return np.abs(x - y) / denom


@dataclass
class OdeReport:
    m: int
    pmax: int
    rho: complex
    residuals: np.ndarray
    max_rel_residual: float
    table: MomentTable


def transform_root(m):
    """rho with rho^(m-1) = (m-1)!, principal branch (real positive).

    This is the normalization under which the transformed series satisfies
    y^(m-1) = y^m identically; any other branch of the same root works, the
    identity being invariant under eta with eta^(m-1) = 1.
    """
    return float(math.factorial(m - 1)) ** (1.0 / (m - 1))


def series_from_table(table, rho=None):
    """G_1: coefficients -rho * a_{1,p} on exponents 1 + p*lambda2."""
    if rho is None:
        rho = transform_root(table.m)
    return GenSeries(
        lambda2=table.lambda2,
        offset=1.0 + 0.0j,
        coeffs=-complex(rho) * table.a[0],
    )


def chain_series(table, rho=None):
    """The full internal ladder G_k, k = 1..m-1, whose derivative steps down
    the index; used as an internal consistency check."""
    if rho is None:
        rho = transform_root(table.m)
    out = []
    for k in range(1, table.m):
        factor = (-1) ** k * complex(rho) * math.factorial(k - 1)
        out.append(
            GenSeries(
                lambda2=table.lambda2,
                offset=complex(k),
                coeffs=factor * table.a[k - 1],
            )
        )
    return out


def ode_check(m, pmax, spectral=None):
    """Termwise residual of y^(m-1) = y^m for the transformed series.

    The (m-1)-th derivative multiplies the coefficient at exponent
    e_p = 1 + p*lambda2 by prod_{j=0..m-2}(-(e_p + j)) and shifts the
    exponent by m-1, landing on the same lattice m + p*lambda2 as the m-th
    power; the identity must hold to rounding.
    """
    table = moment_table(m, pmax, spectral=spectral)
    rho = transform_root(m)
    g1 = series_from_table(table, rho)
    lhs = g1
    for _ in range(m - 1):
        lhs = lhs.derivative()
    rhs = g1.power(m, pmax)
    residuals = lhs.relative_residual_against(rhs)
    return OdeReport(
        m=m,
        pmax=pmax,
        rho=complex(rho),
        residuals=residuals,
        max_rel_residual=float(residuals.max()),
        table=table,
    )
