"""Admittance modification compensating a known sampling delay.

The emulated admittance ``sum b_m s^m / sum a_n s^n`` has each coefficient
scaled by ``(1 + delta)``. The factors are chosen so that, with the
zero-order hold of period ``tau`` in the loop, the nominal closed-loop poles
``p_k`` remain poles. At each pole this condition is exactly linear in the
factors::

    Z_k * sum_m b_m delta_bm p_k^m / B(p_k) - sum_n a_n delta_an p_k^n / A(p_k) = 1 - Z_k

with ``Z_k = (1 - exp(-tau p_k)) / (tau p_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .delay_stability import _Loop, _newton, nominal_poles
from .errors import DomainError, SingularConfigurationError
from .freq_analysis import DelayModel, zoh_response
from .model import PiezoModel, as_admittance
from .rational import RationalTF


@dataclass(frozen=True)
class ModificationFactors:
    """Relative changes of the admittance coefficients.

    ``delta_b`` and ``delta_a`` follow the ascending coefficient order of the
    numerator and denominator. ``pinned`` indexes the stacked vector
    ``[delta_b, delta_a]`` and is exactly zero.
    """

    delta_b: tuple[float, ...]
    delta_a: tuple[float, ...]
    pinned: int
    residual_norm: float
    rank: int = 0
    degenerate: bool = False

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.delta_b, self.delta_a])

    @property
    def sign_flips(self) -> tuple[int, ...]:
        """Stacked indices whose factor is <= -1 (coefficient vanishes or changes sign)."""
        return tuple(int(i) for i in np.flatnonzero(self.stacked <= -1.0))


def build_modification_system(Y: RationalTF, poles, tau: float, stack: bool = True):
    """Linear system ``P delta = d`` for the modification factors.

    With ``stack=True`` (default) the complex rows are split into real and
    imaginary parts, giving ``2K`` real rows; otherwise the complex ``K``-row
    system is returned.
    """
    if tau < 0:
        raise DomainError(f"tau must be non-negative, got {tau}")
    Y = as_admittance(Y)
    b = np.asarray(Y.num)
    a = np.asarray(Y.den)
    poles = np.asarray(poles, dtype=complex)
    rows, rhs = [], []
    for p in poles:
        sb = npoly.polyval(p, b)
        sa = npoly.polyval(p, a)
        if abs(sb) == 0 or abs(sa) == 0:
            raise SingularConfigurationError(f"admittance numerator or denominator vanishes at pole {p}")
        z = complex(zoh_response(tau, p))
        rows.append(np.concatenate([z * b * p ** np.arange(b.size) / sb,
                                    -a * p ** np.arange(a.size) / sa]))
        rhs.append(1.0 - z)
    P = np.asarray(rows)
    d = np.asarray(rhs)
    if stack:
        return np.vstack([P.real, P.imag]), np.concatenate([d.real, d.imag])
    return P, d


def solve_modification(P, d, n_num: int, pinned_index: int = 0,
                       rcond: float = 1e-12) -> ModificationFactors:
    """Least-squares modification factors with one factor pinned to zero.

    Pinning removes the trivial solution (all factors equal to -1). The
    reduced system is solved in the pseudoinverse sense: columns are scaled
    to unit norm and solved by orthogonal factorization when of full column
    rank, otherwise the minimum-norm solution is returned and flagged.

    Parameters
    ----------
    P, d : array_like
        System from :func:`build_modification_system` (real or complex).
    n_num : int
        Number of numerator coefficients (``M + 1``); the rest of the
        columns belong to the denominator.
    pinned_index : int
        Column of the stacked factor vector fixed to zero.
    """
    P = np.asarray(P)
    d = np.asarray(d)
    n_cols = P.shape[1]
    if not 0 <= pinned_index < n_cols:
        raise DomainError(f"pinned_index {pinned_index} outside [0, {n_cols})")
    keep = np.array([i for i in range(n_cols) if i != pinned_index], dtype=int)
    Pr = P[:, keep]
    scale = np.linalg.norm(Pr, axis=0)
    scale[scale == 0] = 1.0
    Ps = Pr / scale
    sv = np.linalg.svd(Ps, compute_uv=False)
    rank = int(np.sum(sv > rcond * sv[0])) if sv.size and sv[0] > 0 else 0
    degenerate = rank < keep.size
    if degenerate:
        sol = np.linalg.pinv(Pr, rcond=rcond) @ d
    else:
        q, r = np.linalg.qr(Ps)
        sol = np.linalg.solve(r, q.conj().T @ d) / scale
    delta = np.zeros(n_cols, dtype=sol.dtype)
    delta[keep] = sol
    resid = float(np.linalg.norm(P @ delta - d))
    if np.iscomplexobj(delta):
        delta = delta.real if np.allclose(delta.imag, 0.0, atol=1e-12 * max(1.0, np.abs(delta).max())) else delta
    return ModificationFactors(tuple(delta[:n_num].tolist()), tuple(delta[n_num:].tolist()),
                               pinned_index, resid, rank, degenerate)


def apply_modification(Y: RationalTF, factors: ModificationFactors) -> RationalTF:
    """Admittance with coefficients ``b_m (1 + delta_bm)`` and ``a_n (1 + delta_an)``."""
    Y = as_admittance(Y)
    b = np.asarray(Y.num)
    a = np.asarray(Y.den)
    if len(factors.delta_b) != b.size or len(factors.delta_a) != a.size:
        raise DomainError("modification factors do not match the admittance order")
    new_a = a * (1.0 + np.asarray(factors.delta_a))
    if new_a[-1] == 0:
        raise DomainError("modification cancels the leading denominator coefficient")
    return RationalTF(b * (1.0 + np.asarray(factors.delta_b)), new_a)


def factors_between(Y: RationalTF, Y_mod: RationalTF, pinned: int = 0) -> ModificationFactors:
    """Recover the factors relating two admittances of identical order."""
    b, a = np.asarray(Y.num), np.asarray(Y.den)
    bm, am = np.asarray(Y_mod.num), np.asarray(Y_mod.den)
    if bm.size != b.size or am.size != a.size:
        raise DomainError("admittances differ in order")
    with np.errstate(divide="ignore", invalid="ignore"):
        db = np.where(b != 0, bm / b - 1.0, 0.0)
        da = np.where(a != 0, am / a - 1.0, 0.0)
    return ModificationFactors(tuple(db.tolist()), tuple(da.tolist()), pinned, 0.0)


def stabilize(model: PiezoModel, shunt, tau: float, pinned_index: int = 0):
    """Modify the shunt admittance for sampling period ``tau``.

    All nominal closed-loop poles are targeted. Returns
    ``(modified_admittance, factors, target_poles)``.
    """
    Y = as_admittance(shunt)
    poles = nominal_poles(model, Y)
    # work in the normalized variable for conditioning; factors are scale free
    Yn = Y.scaled(model.omega_sc)
    P, d = build_modification_system(Yn, poles / model.omega_sc, tau * model.omega_sc)
    factors = solve_modification(P, d, len(Y.num), pinned_index)
    return apply_modification(Y, factors), factors, poles


@dataclass(frozen=True)
class PlacementCheck:
    residuals: np.ndarray
    resolved_poles: np.ndarray
    displacement: np.ndarray
    converged: np.ndarray

    @property
    def max_real(self) -> float:
        return float(self.resolved_poles.real.max())


def verify_pole_placement(model: PiezoModel, Y_mod, tau: float, target_poles,
                          delay_kind: str = "zoh") -> PlacementCheck:
    """Check how well the delayed loop with ``Y_mod`` reproduces ``target_poles``.

    Reports ``|1 + H_mod(p) Z(p)|`` at every target and the poles actually
    obtained by Newton's method seeded at the targets.
    """
    loop = _Loop(model, as_admittance(Y_mod))
    wsc = model.omega_sc
    targets = np.asarray(target_poles, dtype=complex) / wsc
    delay = DelayModel(delay_kind, tau * wsc)
    residuals = np.abs(1.0 + loop.H(targets) * delay.multiplier(targets))
    resolved, ok = _newton(loop, targets, delay, maxiter=100)
    return PlacementCheck(residuals, resolved * wsc, np.abs(resolved - targets) * wsc, ok)
