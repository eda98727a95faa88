"""Poles of the delayed closed loop and the delays at which they go unstable.

All computations run on the loop normalized by ``omega_sc`` (``s_bar = s /
omega_sc``, ``tau_bar = tau * omega_sc``) and are converted back at the end.
The characteristic function is used in polynomial form,
``D(s) + N(s) * M(s; tau)`` where ``H = N / D`` is the open loop and ``M``
the delay multiplier, which has no poles on the tracked branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import BranchLossError, DomainError, NumericalError
from .freq_analysis import DelayKind, DelayModel, open_loop_tf
from .model import PiezoModel
from .rational import RationalTF, poly_roots

SQRT6 = math.sqrt(6.0)
SQRT3_2 = math.sqrt(1.5)


@dataclass(frozen=True)
class CriticalDelayResult:
    """Imaginary-axis crossing of the delayed loop.

    ``tau_c`` is ``inf`` (and ``omega_c`` NaN) when no crossing exists.
    """

    omega_c: float
    tau_c: float
    branch_k: int
    method: str

    @property
    def finite(self) -> bool:
        return math.isfinite(self.tau_c)


@dataclass(frozen=True)
class RootLocus:
    taus: np.ndarray
    poles: np.ndarray  # shape (len(taus), n_branches)
    crossing: tuple[float, float] | None = None

    @property
    def max_real(self) -> np.ndarray:
        return self.poles.real.max(axis=1)


class _Loop:
    """Normalized loop polynomials and their derivatives."""

    def __init__(self, model: PiezoModel, shunt):
        self.omega_sc = model.omega_sc
        h = open_loop_tf(model, shunt).scaled(model.omega_sc)
        scale = np.max(np.abs(h.den))
        self.num = np.asarray(h.num) / scale
        self.den = np.asarray(h.den) / scale
        self.dnum = npoly.polyder(self.num) if self.num.size > 1 else np.zeros(1)
        self.dden = npoly.polyder(self.den)
        self.H = RationalTF(self.num, self.den)

    def nominal_polynomial(self) -> np.ndarray:
        return npoly.polyadd(self.den, self.num)

    def char(self, s, delay: DelayModel):
        return npoly.polyval(s, self.den) + npoly.polyval(s, self.num) * delay.multiplier(s)

    def char_ds(self, s, delay: DelayModel):
        n = npoly.polyval(s, self.num)
        return (npoly.polyval(s, self.dden) + npoly.polyval(s, self.dnum) * delay.multiplier(s)
                + n * delay.multiplier_ds(s))


def _sort_by_imag(p: np.ndarray) -> np.ndarray:
    return p[np.lexsort((p.real, p.imag))]


def nominal_poles(model: PiezoModel, shunt) -> np.ndarray:
    """Closed-loop poles without delay (roots of ``1 + H(s) = 0``), sorted by imaginary part."""
    loop = _Loop(model, shunt)
    return _sort_by_imag(poly_roots(loop.nominal_polynomial()) * model.omega_sc)


def _newton(loop: _Loop, s0: np.ndarray, delay: DelayModel, tol: float = 1e-12,
            maxiter: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton on every entry of ``s0``; returns (roots, converged mask)."""
    s = np.array(s0, dtype=complex)
    f = loop.char(s, delay)
    done = np.zeros(s.shape, dtype=bool)
    for _ in range(maxiter):
        active = ~done
        if not active.any():
            break
        sa, fa = s[active], f[active]
        step = fa / loop.char_ds(sa, delay)
        lam = np.ones(sa.shape)
        new = sa - step
        fnew = loop.char(new, delay)
        # halve the step while the residual grows
        for _ in range(30):
            bad = np.abs(fnew) > np.abs(fa)
            if not bad.any():
                break
            lam[bad] *= 0.5
            new[bad] = sa[bad] - lam[bad] * step[bad]
            fnew[bad] = loop.char(new[bad], delay)
        s[active], f[active] = new, fnew
        small = np.abs(lam * step) <= tol * np.maximum(np.abs(new), 1.0)
        done[np.flatnonzero(active)[small]] = True
    return s, done


def root_locus(model: PiezoModel, shunt, variant: DelayKind | str = DelayKind.ZOH,
               tau_max: float | None = None, dtau: float | None = None,
               max_halvings: int = 8) -> RootLocus:
    """Follow the closed-loop poles from ``tau = 0`` to ``tau_max``.

    Each branch is continued by damped Newton seeded with its previous
    position; the step is halved (at most ``max_halvings`` times) whenever a
    correction fails or jumps towards another branch. The first change of
    sign of the largest real part is refined by the secant method and
    returned as ``crossing = (tau, omega)``.

    ``tau_max`` defaults to ``pi / omega_sc`` and ``dtau`` to ``tau_max / 2000``.
    """
    kind = DelayKind(variant) if isinstance(variant, str) else variant
    if kind is DelayKind.NONE:
        raise DomainError("root_locus needs a PURE or ZOH delay model")
    wsc = model.omega_sc
    if tau_max is None:
        tau_max = math.pi / wsc
    if dtau is None:
        dtau = tau_max / 2000
    if not dtau > 0:
        raise DomainError("dtau must be positive")
    loop = _Loop(model, shunt)
    tmax, h0 = tau_max * wsc, dtau * wsc

    p = _sort_by_imag(poly_roots(loop.nominal_polynomial()))
    taus, poles = [0.0], [p.copy()]
    t, h = 0.0, h0
    crossing = None
    while t < tmax * (1 - 1e-12):
        h_try = min(h, tmax - t)
        for _ in range(max_halvings + 1):
            new, ok = _newton(loop, p, DelayModel(kind, t + h_try))
            if ok.all() and _no_jump(p, new):
                break
            h_try *= 0.5
        else:
            bad = int(np.flatnonzero(~ok)[0]) if not ok.all() else int(np.argmax(np.abs(new - p)))
            raise BranchLossError(bad, (t + h_try) / wsc)
        t_new = t + h_try
        if crossing is None and p.real.max() < 0 <= new.real.max():
            crossing = _refine_crossing(loop, kind, t, p, t_new, new)
        t, p = t_new, new
        taus.append(t)
        poles.append(p.copy())
        h = min(h0, 2 * h_try)
    if crossing is not None:
        crossing = (float(crossing[0] / wsc), float(crossing[1] * wsc))
    return RootLocus(np.asarray(taus) / wsc, np.asarray(poles) * wsc, crossing)


def _no_jump(old: np.ndarray, new: np.ndarray) -> bool:
    if old.size < 2:
        return True
    d = np.abs(old[:, None] - old[None, :])
    np.fill_diagonal(d, np.inf)
    return bool(np.all(np.abs(new - old) < 0.25 * d.min(axis=1)))


def _refine_crossing(loop, kind, t0, p0, t1, p1, tol=1e-13):
    b = int(np.argmax(p1.real))
    a_t, a_s = t0, p0[b]
    b_t, b_s = t1, p1[b]
    fa, fb = a_s.real, b_s.real
    for _ in range(60):
        # secant step kept inside the bracket (regula falsi with Illinois damping)
        t = b_t - fb * (b_t - a_t) / (fb - fa)
        seed = a_s + (b_s - a_s) * (t - a_t) / (b_t - a_t)
        s, ok = _newton(loop, np.array([seed]), DelayModel(kind, t))
        s = s[0]
        ft = s.real
        if (ft > 0) == (fb > 0):
            b_t, b_s, fb = t, s, ft
            fa *= 0.5
        else:
            a_t, a_s, fa = b_t, b_s, fb
            b_t, b_s, fb = t, s, ft
        if abs(ft) < tol or abs(b_t - a_t) < tol * b_t:
            break
    return t, abs(s.imag)


def _pure_delay_crossings(loop: _Loop) -> list[tuple[float, float, int]]:
    """All (omega, tau, k) on the imaginary axis for the loop with delay tau/2."""
    q = loop.H.magnitude_squared_numerator()
    # q is even in s; with s^2 = -Omega the coefficient of Omega^i is (-1)^i q[2i]
    even = q[0::2] * (-1.0) ** np.arange(q[0::2].size)
    out = []
    for root in poly_roots(even):
        if abs(root.imag) > 1e-9 * max(abs(root), 1.0) or root.real <= 0:
            continue
        w = math.sqrt(root.real)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = complex(loop.H(1j * w))
        # roots shared by numerator and denominator are not unit-gain points
        if not (math.isfinite(abs(h)) and abs(abs(h) - 1.0) < 1e-6):
            continue
        ang = math.atan2((-h).imag, (-h).real)
        for k in range(5):
            tau = 2.0 / w * (ang + 2 * k * math.pi)
            if tau > 0:
                out.append((w, tau, k))
                break
    return out


def _zoh_refine(loop: _Loop, w: float, tau: float, tol: float = 1e-12, maxiter: int = 60):
    """Newton on ``1 + H(jw) Z(jw; tau) = 0`` in the two real unknowns (w, tau)."""
    for _ in range(maxiter):
        s = 1j * w
        d = DelayModel.zoh(tau)
        h = complex(loop.H(s))
        z = complex(d.multiplier(s))
        f = 1.0 + h * z
        # at the round-off floor the step test can stall on clustered crossings
        if abs(f) <= 8 * np.finfo(float).eps * (1.0 + abs(h * z)):
            return w, tau
        dfdw = 1j * (complex(loop.H.derivative(s)) * z + h * complex(d.multiplier_ds(s)))
        # dZ/dtau = (s/tau) dZ/ds by homogeneity of Z in (tau s)
        dfdt = h * complex(d.multiplier_ds(s)) * s / tau
        jac = np.array([[dfdw.real, dfdt.real], [dfdw.imag, dfdt.imag]])
        try:
            dw, dt = np.linalg.solve(jac, [-f.real, -f.imag])
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Jacobian while refining ZOH crossing") from exc
        lam = 1.0
        while lam > 1e-4 and (tau + lam * dt <= 0 or w + lam * dw <= 0):
            lam *= 0.5
        if tau + lam * dt <= 0 or w + lam * dw <= 0:
            raise NumericalError("ZOH crossing refinement left the positive quadrant")
        w, tau = w + lam * dw, tau + lam * dt
        if abs(dw) < tol * w and abs(dt) < tol * tau:
            return w, tau
    raise NumericalError("ZOH crossing refinement did not converge")


def critical_delay_numeric(model: PiezoModel, shunt, variant: str = "zoh") -> CriticalDelayResult:
    """Smallest delay placing closed-loop poles on the imaginary axis.

    ``variant="pure_delay"`` solves the crossing polynomial in ``omega^2``
    exactly and recovers the delay from the phase of ``-H(j omega)``.
    ``variant="zoh"`` refines that solution on the zero-order-hold loop.
    """
    if variant not in ("zoh", "pure_delay"):
        raise DomainError(f"unknown variant {variant!r}")
    method = "zoh_numeric" if variant == "zoh" else "pure_delay_numeric"
    if model.kc == 0:
        # the open loop degenerates to 1/(L s^2): marginally stable for any delay
        return CriticalDelayResult(model.omega_sc, 0.0, 0, method)
    loop = _Loop(model, shunt)
    crossings = _pure_delay_crossings(loop)
    if not crossings:
        return CriticalDelayResult(math.nan, math.inf, 0, method)
    if variant == "pure_delay":
        w, tau, k = min(crossings, key=lambda c: c[1])
        return CriticalDelayResult(float(w * model.omega_sc), float(tau / model.omega_sc), k, method)
    best = None
    for w0, t0, k in crossings:
        try:
            w, tau = _zoh_refine(loop, w0, t0)
        except NumericalError:
            continue
        # a refinement that wandered off belongs to another crossing
        if abs(w - w0) > 0.1 * w0 or abs(tau - t0) > 0.5 * t0:
            continue
        if best is None or tau < best[1]:
            best = (w, tau, k)
    if best is None:
        raise NumericalError("no ZOH crossing could be refined from the pure-delay solutions")
    return CriticalDelayResult(float(best[0] * model.omega_sc), float(best[1] / model.omega_sc), best[2], method)


def critical_frequency_series(kc: float, omega_sc: float = 1.0) -> float:
    """Crossing frequency paired with the minimum critical delay.

    The expansion ``1 + K + 5/8 K^2 + 73/128 K^3`` is that of
    ``(omega_c / omega_sc)^2``; it matches the exact crossing to O(K^4) only
    in that form.
    """
    return omega_sc * math.sqrt(1.0 + kc + 5.0 / 8.0 * kc**2 + 73.0 / 128.0 * kc**3)


def critical_delay_series(kc: float, omega_sc: float = 1.0) -> CriticalDelayResult:
    """Third-order expansion in the coupling factor of the critical delay (optimal tuning)."""
    if kc < 0:
        raise DomainError(f"kc must be non-negative, got {kc}")
    tau = (SQRT6 * (kc - kc**2) + 19.0 / 32.0 * SQRT3_2 * kc**3) / omega_sc
    return CriticalDelayResult(critical_frequency_series(kc, omega_sc), tau, 0, "series")


def max_sampling_period(kc: float, omega_sc: float = 1.0, modified: bool = False) -> float:
    """Recommended upper bound on the sampling period.

    Without admittance modification this is the smaller of the thirty-samples
    per period rule and one tenth of the series critical delay; with it only
    the former applies.
    """
    if kc < 0:
        raise DomainError(f"kc must be non-negative, got {kc}")
    nyquist = 2.0 * math.pi / 30.0
    if modified:
        return nyquist / omega_sc
    tenth = SQRT6 / 10.0 * (kc - kc**2) + 19.0 / 320.0 * SQRT3_2 * kc**3
    return min(nyquist, tenth) / omega_sc
