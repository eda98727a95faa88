"""Open- and closed-loop frequency-domain analysis of the shunted structure.

Delays enter as complex multipliers on the emulated admittance:

* ``DelayModel.none()`` -- ideal analog shunt,
* ``DelayModel.pure(tau)`` -- pure delay of ``tau / 2``,
* ``DelayModel.zoh(tau)`` -- zero-order hold ``(1 - exp(-tau s)) / (tau s)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NoCrossoverError
from .model import PiezoModel, as_admittance
from .rational import RationalTF

_SERIES_SWITCH = 1e-4


def zoh_response(tau: float, s):
    """Equivalent continuous transfer function of a zero-order hold.

    ``(1 - exp(-tau s)) / (tau s)``, with the removable singularity at
    ``s = 0`` evaluated as 1 and ``tau = 0`` returning 1 everywhere.
    """
    if tau < 0:
        raise DomainError(f"tau must be non-negative, got {tau}")
    s = np.asarray(s, dtype=complex)
    x = tau * s
    out = np.ones_like(x)
    big = np.abs(x) >= _SERIES_SWITCH
    out[big] = -np.expm1(-x[big]) / x[big]
    small = ~big & (x != 0)
    xs = x[small]
    out[small] = 1.0 - xs / 2.0 + xs**2 / 6.0 - xs**3 / 24.0
    return out if out.ndim else complex(out)


def zoh_response_ds(tau: float, s):
    """Partial derivative of :func:`zoh_response` with respect to ``s``."""
    s = np.asarray(s, dtype=complex)
    x = tau * s
    out = np.empty_like(x)
    big = np.abs(x) >= _SERIES_SWITCH
    xb = x[big]
    # d/dx [(1 - e^-x)/x] = (x e^-x - (1 - e^-x)) / x^2
    out[big] = (xb * np.exp(-xb) + np.expm1(-xb)) / xb**2
    xs = x[~big]
    out[~big] = -0.5 + xs / 3.0 - xs**2 / 8.0 + xs**3 / 30.0
    out = out * tau
    return out if out.ndim else complex(out)


class DelayKind(enum.Enum):
    NONE = "none"
    PURE = "pure"
    ZOH = "zoh"


@dataclass(frozen=True)
class DelayModel:
    """Delay representation of the sampled control loop.

    ``PURE`` delays the admittance by ``tau / 2`` (the low-frequency
    equivalent of the hold); ``ZOH`` uses the full hold transfer function.
    ``tau = 0`` reduces both to the undelayed loop.
    """

    kind: DelayKind = DelayKind.NONE
    tau: float = 0.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", DelayKind(self.kind))
        if not self.tau >= 0:
            raise DomainError(f"tau must be non-negative, got {self.tau}")

    @classmethod
    def none(cls) -> "DelayModel":
        return cls(DelayKind.NONE, 0.0)

    @classmethod
    def pure(cls, tau: float) -> "DelayModel":
        return cls(DelayKind.PURE, tau)

    @classmethod
    def zoh(cls, tau: float) -> "DelayModel":
        return cls(DelayKind.ZOH, tau)

    def multiplier(self, s):
        """Complex factor applied to the admittance at Laplace variable ``s``."""
        s = np.asarray(s, dtype=complex)
        if self.kind is DelayKind.NONE or self.tau == 0:
            return np.ones_like(s) if s.ndim else 1.0 + 0j
        if self.kind is DelayKind.PURE:
            return np.exp(-0.5 * self.tau * s)
        return zoh_response(self.tau, s)

    def multiplier_ds(self, s):
        s = np.asarray(s, dtype=complex)
        if self.kind is DelayKind.NONE or self.tau == 0:
            return np.zeros_like(s) if s.ndim else 0j
        if self.kind is DelayKind.PURE:
            return -0.5 * self.tau * np.exp(-0.5 * self.tau * s)
        return zoh_response_ds(self.tau, s)

    def scaled(self, omega_ref: float) -> "DelayModel":
        """Delay expressed in the time unit ``1 / omega_ref``."""
        return DelayModel(self.kind, self.tau * omega_ref)


@dataclass(frozen=True)
class FrfCurve:
    """Receptance of the controlled structure, normalized as ``x k_sc / f``.

    ``omega`` is in rad/s; ``omega / omega_sc`` gives the normalized axis.
    """

    omega: np.ndarray
    value: np.ndarray
    k_sc: float
    omega_sc: float
    warnings: tuple[str, ...] = ()

    @property
    def normalized_omega(self) -> np.ndarray:
        return self.omega / self.omega_sc

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.value)

    def peaks(self) -> list[tuple[float, float]]:
        return find_peaks(self.omega, self.magnitude)


@dataclass(frozen=True)
class MarginReport:
    gain_crossovers: tuple[float, ...]
    phase_margin_deg: float
    gain_margin_db: float = math.inf
    phase_crossovers: tuple[float, ...] = field(default=())

    @property
    def gain_margin_infinite(self) -> bool:
        return math.isinf(self.gain_margin_db)


def find_peaks(x, y) -> list[tuple[float, float]]:
    """Interior local maxima of ``y(x)`` refined by a parabola through 3 points.

    Returns ``(x_peak, y_peak)`` pairs in ascending ``x``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    idx = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    peaks = []
    for i in idx:
        x0, x1, x2 = x[i - 1 : i + 2]
        y0, y1, y2 = y[i - 1 : i + 2]
        # Lagrange parabola through the three points, written for uneven spacing
        d01, d12, d02 = x0 - x1, x1 - x2, x0 - x2
        a = (y0 / (d01 * d02)) - (y1 / (d01 * d12)) + (y2 / (d02 * d12))
        b = (-y0 * (x1 + x2) / (d01 * d02) + y1 * (x0 + x2) / (d01 * d12)
             - y2 * (x0 + x1) / (d02 * d12))
        if a >= 0:
            peaks.append((x1, y1))
            continue
        xp = -b / (2 * a)
        if not (x0 <= xp <= x2):
            peaks.append((x1, y1))
            continue
        yp = y0 * (xp - x1) * (xp - x2) / (d01 * d02) \
            - y1 * (xp - x0) * (xp - x2) / (d01 * d12) \
            + y2 * (xp - x0) * (xp - x1) / (d02 * d12)
        peaks.append((float(xp), float(yp)))
    return peaks


def open_loop_tf(model: PiezoModel, shunt) -> RationalTF:
    """Loop transfer function ``H(s) = -V/(s q) * Y(s)``.

    For the series RL shunt this is
    ``(1/cp) (s^2 + omega_sc^2) / ((s^2 + omega_oc^2)(L s^2 + R s))``;
    any admittance :class:`RationalTF` is accepted in place of the shunt.
    """
    y = as_admittance(shunt)
    cp = model.cp_eps
    num = np.polynomial.polynomial.polymul(y.num, [model.omega_sc**2, 0.0, 1.0])
    den = np.polynomial.polynomial.polymul([0.0, cp * model.omega_oc**2, 0.0, cp], y.den)
    return RationalTF(num, den)


def stability_margins(H: RationalTF, band=(0.01, 100.0), n_points: int = 10_000,
                      omega_ref: float = 1.0, rtol: float = 1e-10) -> MarginReport:
    """Gain crossovers, phase margin and gain margin of a loop transfer function.

    ``band`` is expressed in units of ``omega_ref``. Every sign change of
    ``log|H|`` on a log-spaced grid is bracketed and refined by Brent's
    method to ``rtol``.
    The phase margin is taken at the highest crossover. The gain margin is
    infinite when the phase never reaches -180 deg in the band.
    """
    lo, hi = band
    w = omega_ref * np.logspace(math.log10(lo), math.log10(hi), n_points)
    g = H.freqresp(w)
    logmag = np.log(np.abs(g))

    def f_gain(x):
        return math.log(abs(complex(H(1j * x))))

    cross = []
    for i in np.flatnonzero(np.sign(logmag[:-1]) != np.sign(logmag[1:])):
        cross.append(brentq(f_gain, w[i], w[i + 1], rtol=rtol))
    if not cross:
        raise NoCrossoverError(
            f"no unity-gain crossover in [{lo:g}, {hi:g}] x {omega_ref:g} rad/s; widen the band")
    wc = max(cross)
    pm = 180.0 + math.degrees(np.angle(complex(H(1j * wc))))

    # -180 deg crossings: Im(H) changes sign while Re(H) < 0
    im = g.imag
    phase_cross = []
    for i in np.flatnonzero(np.sign(im[:-1]) != np.sign(im[1:])):
        if g.real[i] < 0 and g.real[i + 1] < 0:
            phase_cross.append(brentq(lambda x: complex(H(1j * x)).imag, w[i], w[i + 1], rtol=rtol))
    if phase_cross:
        gm = min(-20.0 * math.log10(abs(complex(H(1j * x)))) for x in phase_cross)
    else:
        gm = math.inf
    return MarginReport(tuple(cross), pm, gm, tuple(phase_cross))


def delayed_admittance(Y: RationalTF, tau: float, omega):
    """Admittance seen through a pure delay of ``tau/2``: ``Y(j w) exp(-j w tau / 2)``."""
    if tau < 0:
        raise DomainError(f"tau must be non-negative, got {tau}")
    omega = np.asarray(omega, dtype=float)
    return Y.freqresp(omega) * np.exp(-0.5j * omega * tau)


def passivity_loss_delay(model: PiezoModel) -> float:
    """Delay at which the linearly tuned shunt admittance stops being passive at ``omega_oc``."""
    return 2.0 / model.omega_oc * math.atan(math.sqrt(1.5) * model.kc)


def resonant_grid(model: PiezoModel, lo: float = 0.9, hi: float = 1.15, n: int = 2000) -> np.ndarray:
    """Linear grid over ``[lo, hi] * omega_sc``."""
    return model.omega_sc * np.linspace(lo, hi, n)


def resonant_band(kc: float) -> tuple[float, float]:
    """Normalized band bracketing both resonance peaks of the tuned system."""
    return max(0.05, 1.0 - 1.0 * kc), 1.0 + 1.5 * kc


def closed_loop_frf(model: PiezoModel, admittance, delay: DelayModel | None = None,
                    omega=None) -> FrfCurve:
    """Normalized receptance ``x k_sc / f`` of the shunted structure.

    Eliminating ``q`` and ``V`` between the structural equation, the
    transducer relation and ``s q = Y_eff V`` gives::

        x / f = 1 / (m s^2 + k_oc - theta_p^2 Y_eff / (s + Y_eff / cp))

    and, after multiplying by ``k_sc = m omega_sc^2``::

        x k_sc / f = omega_sc^2 / (s^2 + omega_oc^2
                                   - (omega_oc^2 - omega_sc^2) Y_eff / (s cp + Y_eff))

    with ``Y_eff = Y(s) * delay.multiplier(s)``.
    """
    y = as_admittance(admittance)
    delay = delay or DelayModel.none()
    if omega is None:
        omega = resonant_grid(model)
    omega = np.asarray(omega, dtype=float)
    if np.any(np.diff(omega) <= 0):
        raise DomainError("frequency grid must be strictly ascending")
    s = 1j * omega
    y_eff = y(s) * delay.multiplier(s)
    wsc2, woc2 = model.omega_sc**2, model.omega_oc**2
    value = wsc2 / (s**2 + woc2 - (woc2 - wsc2) * y_eff / (s * model.cp_eps + y_eff))
    warnings = []
    if delay.kind is DelayKind.ZOH and delay.tau > 0 and omega[-1] >= math.pi / delay.tau:
        warnings.append(
            f"grid extends beyond the Nyquist frequency pi/tau = {math.pi / delay.tau:.6g} rad/s; "
            "the hold model only captures the fundamental harmonic")
    k_sc = model.k_sc if model.k_sc is not None else 1.0
    return FrfCurve(omega, value, k_sc, model.omega_sc, tuple(warnings))
