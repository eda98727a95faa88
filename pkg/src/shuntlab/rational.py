"""Real rational transfer functions with coefficients in ascending powers of s."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import eigvals, matrix_balance

from .errors import DomainError


def _trim(coeffs) -> tuple[float, ...]:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1:
        raise DomainError("coefficients must be one-dimensional")
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return (0.0,)
    return tuple(float(v) for v in c[: nz[-1] + 1])


def poly_roots(coeffs) -> np.ndarray:
    """Roots of a polynomial given in ascending order.

    The companion matrix is balanced before the eigenvalue solve, which keeps
    clustered roots (small coupling, nearly repeated resonances) accurate.
    """
    c = np.asarray(_trim(coeffs), dtype=float)
    deg = c.size - 1
    if deg < 1:
        return np.empty(0, dtype=complex)
    # zero roots are removed first; the companion form needs c[0] != 0 to stay informative
    n_zero = int(np.argmax(c != 0))
    c = c[n_zero:]
    deg = c.size - 1
    roots = np.zeros(n_zero, dtype=complex)
    if deg == 0:
        return roots
    comp = np.zeros((deg, deg), dtype=c.dtype)
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    balanced, _ = matrix_balance(comp, permute=False)
    return np.concatenate([roots, eigvals(balanced).astype(complex)])


def _neg_var(c: np.ndarray) -> np.ndarray:
    """Coefficients of p(-s) given those of p(s)."""
    return c * (-1.0) ** np.arange(c.size)


@dataclass(frozen=True)
class RationalTF:
    """``num(s) / den(s)`` with real coefficients listed in ascending powers.

    ``num=[b0, b1, ...]`` means ``b0 + b1*s + ...``. Trailing zero
    coefficients are dropped on construction.
    """

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __init__(self, num, den):
        num_t = _trim(num)
        den_t = _trim(den)
        if den_t == (0.0,):
            raise DomainError("denominator polynomial is identically zero")
        object.__setattr__(self, "num", num_t)
        object.__setattr__(self, "den", den_t)

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1 if any(self.num) else 0

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    @property
    def relative_degree(self) -> int:
        return self.den_degree - self.num_degree

    def __call__(self, s):
        s = np.asarray(s)
        return npoly.polyval(s, self.num) / npoly.polyval(s, self.den)

    def derivative(self, s):
        """d/ds of the transfer function evaluated at ``s``."""
        s = np.asarray(s)
        n = npoly.polyval(s, self.num)
        d = npoly.polyval(s, self.den)
        dn = npoly.polyval(s, npoly.polyder(self.num)) if len(self.num) > 1 else 0.0
        dd = npoly.polyval(s, npoly.polyder(self.den)) if len(self.den) > 1 else 0.0
        return (dn * d - n * dd) / d**2

    def freqresp(self, omega):
        """Frequency response at ``s = j*omega``."""
        return self(1j * np.asarray(omega, dtype=float))

    def zeros(self) -> np.ndarray:
        return poly_roots(self.num)

    def poles(self) -> np.ndarray:
        return poly_roots(self.den)

    def scaled(self, omega_ref: float) -> "RationalTF":
        """Return ``G(s_bar) = self(omega_ref * s_bar)``."""
        k = np.arange(max(len(self.num), len(self.den)))
        w = float(omega_ref) ** k
        return RationalTF(np.asarray(self.num) * w[: len(self.num)],
                          np.asarray(self.den) * w[: len(self.den)])

    def __mul__(self, other):
        if isinstance(other, RationalTF):
            return RationalTF(npoly.polymul(self.num, other.num), npoly.polymul(self.den, other.den))
        return RationalTF(np.asarray(self.num) * float(other), self.den)

    __rmul__ = __mul__

    def magnitude_squared_numerator(self) -> np.ndarray:
        """Ascending coefficients of ``N(s)N(-s) - D(s)D(-s)``.

        The polynomial is even; on ``s = j*omega`` it vanishes exactly where
        ``|G(j*omega)| = 1``.
        """
        n = np.asarray(self.num)
        d = np.asarray(self.den)
        return npoly.polysub(npoly.polymul(n, _neg_var(n)), npoly.polymul(d, _neg_var(d)))
