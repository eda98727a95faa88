"""Electromechanical plant, coupling factor and series-RL shunt tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .rational import RationalTF

# largest coupling for which the closed-form optimal tuning stays real-valued
# (root of 64 - 16 K^2 - 26 K^4 = 0)
KC_TUNING_LIMIT = math.sqrt((-16.0 + math.sqrt(16.0**2 + 4 * 26 * 64)) / 52.0)


def eemcf(omega_sc: float, omega_oc: float) -> float:
    """Effective electromechanical coupling factor from the two resonances.

    Parameters
    ----------
    omega_sc, omega_oc : float
        Short- and open-circuit resonance frequencies (rad/s). Hz works as
        well since only their ratio matters.

    Returns
    -------
    float
        ``sqrt((omega_oc**2 - omega_sc**2) / omega_sc**2)``.
    """
    if not omega_sc > 0:
        raise DomainError(f"omega_sc must be positive, got {omega_sc}")
    if omega_oc < omega_sc:
        raise DomainError(f"omega_oc ({omega_oc}) must not be below omega_sc ({omega_sc})")
    return math.sqrt((omega_oc**2 - omega_sc**2) / omega_sc**2)


@dataclass(frozen=True)
class PiezoModel:
    """Single-mode piezoelectric structure.

    The modal description (``omega_sc``, ``omega_oc``, ``cp_eps``) is
    canonical. ``mass`` and ``theta_p`` are optional physical data; when only
    ``mass`` is given, ``theta_p`` is inferred from the frequency split.

    Attributes
    ----------
    omega_sc, omega_oc : float
        Short- and open-circuit angular resonance frequencies (rad/s).
    cp_eps : float
        Piezoelectric capacitance at constant strain (F).
    mass : float or None
        Modal mass (kg).
    theta_p : float or None
        Piezoelectric coupling coefficient (N/C).
    """

    omega_sc: float
    omega_oc: float
    cp_eps: float
    mass: float | None = None
    theta_p: float | None = None

    def __post_init__(self):
        if not self.omega_sc > 0:
            raise DomainError(f"omega_sc must be positive, got {self.omega_sc}")
        if self.omega_oc < self.omega_sc:
            raise DomainError("omega_oc must be greater than or equal to omega_sc")
        if not self.cp_eps > 0:
            raise DomainError(f"cp_eps must be positive, got {self.cp_eps}")
        if self.theta_p is not None and self.mass is None:
            raise DomainError("theta_p requires mass")
        if self.mass is not None:
            if not self.mass > 0:
                raise DomainError(f"mass must be positive, got {self.mass}")
            theta_sq = (self.omega_oc**2 - self.omega_sc**2) * self.mass / self.cp_eps
            if self.theta_p is None:
                object.__setattr__(self, "theta_p", math.sqrt(theta_sq))
            else:
                k_sc = self.mass * self.omega_oc**2 - self.theta_p**2 * self.cp_eps
                target = self.mass * self.omega_sc**2
                if abs(k_sc - target) > 1e-12 * self.mass * self.omega_oc**2:
                    raise DomainError("theta_p inconsistent with omega_sc, omega_oc, cp_eps and mass")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_physical(cls, mass: float, k_oc: float, theta_p: float, cp_eps: float) -> "PiezoModel":
        """Build from mass, open-circuit stiffness, coupling and capacitance."""
        if not (mass > 0 and k_oc > 0 and cp_eps > 0):
            raise DomainError("mass, k_oc and cp_eps must be positive")
        k_sc = k_oc - theta_p**2 * cp_eps
        if not k_sc > 0:
            raise DomainError("short-circuit stiffness k_oc - theta_p^2 cp_eps must be positive")
        return cls(math.sqrt(k_sc / mass), math.sqrt(k_oc / mass), cp_eps, mass, abs(theta_p))

    @classmethod
    def from_frequencies_hz(cls, f_sc: float, f_oc: float, cp_eps: float, mass=None) -> "PiezoModel":
        return cls(2 * math.pi * f_sc, 2 * math.pi * f_oc, cp_eps, mass)

    @classmethod
    def from_coupling(cls, omega_sc: float, kc: float, cp_eps: float = 1.0, mass=None) -> "PiezoModel":
        if kc < 0:
            raise DomainError(f"kc must be non-negative, got {kc}")
        return cls(omega_sc, omega_sc * math.sqrt(1.0 + kc * kc), cp_eps, mass)

    @classmethod
    def normalized(cls, kc: float) -> "PiezoModel":
        """Model with ``omega_sc = 1``, ``k_sc = 1`` and ``cp_eps = 1``."""
        return cls.from_coupling(1.0, kc, 1.0, mass=1.0)

    # -- derived quantities -----------------------------------------------

    @property
    def kc(self) -> float:
        return eemcf(self.omega_sc, self.omega_oc)

    @property
    def k_sc(self) -> float | None:
        return None if self.mass is None else self.mass * self.omega_sc**2

    @property
    def k_oc(self) -> float | None:
        return None if self.mass is None else self.mass * self.omega_oc**2

    def with_unit_stiffness(self) -> "PiezoModel":
        """Same model with mass chosen so that ``k_sc = 1`` if mass is unknown."""
        if self.mass is not None:
            return self
        return PiezoModel(self.omega_sc, self.omega_oc, self.cp_eps, mass=1.0 / self.omega_sc**2)

    def rescaled(self, alpha: float, beta: float) -> "PiezoModel":
        """Frequencies multiplied by ``alpha``, capacitance by ``beta``."""
        return PiezoModel(alpha * self.omega_sc, alpha * self.omega_oc, beta * self.cp_eps,
                          self.mass)


@dataclass(frozen=True)
class ShuntParams:
    """Series RL shunt.

    ``delta`` and ``zeta`` are the electrical frequency and damping ratios,
    kept alongside ``L`` and ``R`` so downstream formulas need not redo the
    tuning radicals.
    """

    inductance: float
    resistance: float
    delta: float
    zeta: float

    def __post_init__(self):
        if not self.inductance > 0:
            raise DomainError(f"inductance must be positive, got {self.inductance}")
        if self.resistance < 0:
            raise DomainError(f"resistance must be non-negative, got {self.resistance}")

    @classmethod
    def from_values(cls, inductance: float, resistance: float, model: PiezoModel) -> "ShuntParams":
        if not inductance > 0:
            raise DomainError(f"inductance must be positive, got {inductance}")
        delta = 1.0 / (model.omega_oc * math.sqrt(inductance * model.cp_eps))
        zeta = 0.5 * resistance * delta * model.omega_oc * model.cp_eps
        return cls(inductance, resistance, delta, zeta)


def _optimal_ratios(kc: float) -> tuple[float, float]:
    """Electrical frequency ratio and damping ratio of the optimal series shunt."""
    k2 = kc * kc
    radicand = 64.0 - 16.0 * k2 - 26.0 * k2 * k2
    if radicand < 0:
        raise DomainError(
            f"kc={kc:.6g} exceeds the range of the optimal series-RL formulas (kc <= {KC_TUNING_LIMIT:.6f})")
    r = (math.sqrt(radicand) - k2) / 8.0
    c = 3.0 * k2 - 4.0 * r + 8.0
    inner = 27.0 * k2 * k2 + k2 * (80.0 - 48.0 * r) - 64.0 * (r - 1.0)
    if c <= 0 or inner < -1e-14:
        raise DomainError(f"optimal series-RL formulas undefined for kc={kc:.6g}")
    inner = max(inner, 0.0)
    delta = math.sqrt(c / (4.0 * k2 + 4.0))
    # R * omega_oc * cp = 2 zeta / delta
    r_norm = 2.0 * math.sqrt(2.0 * (k2 + 1.0) * inner) / ((5.0 * k2 + 8.0) * math.sqrt(c))
    zeta = 0.5 * r_norm * delta
    return delta, zeta


def tune_series_rl(model: PiezoModel) -> ShuntParams:
    """Inductance and resistance minimizing the peak structural response.

    Yields the classical equal-peak frequency response. The bound on the
    coupling factor is ``KC_TUNING_LIMIT``.
    """
    delta, zeta = _optimal_ratios(model.kc)
    w, cp = model.omega_oc, model.cp_eps
    return ShuntParams(1.0 / (delta**2 * w**2 * cp), 2.0 * zeta / (delta * w * cp), delta, zeta)


def tune_series_rl_linearized(model: PiezoModel) -> ShuntParams:
    """First-order (in the coupling factor) approximation of the optimal tuning."""
    w, cp = model.omega_oc, model.cp_eps
    inductance = 1.0 / (cp * w**2)
    resistance = math.sqrt(1.5) * model.kc / (w * cp)
    return ShuntParams.from_values(inductance, resistance, model)


def shunt_admittance(shunt: ShuntParams) -> RationalTF:
    """``Y(s) = 1 / (L s + R)``."""
    return RationalTF([1.0], [shunt.resistance, shunt.inductance])


def dynamic_capacitance(model: PiezoModel) -> RationalTF:
    """Return ``-q/V = cp (s^2 + omega_oc^2) / (s^2 + omega_sc^2)``.

    Note the sign: the charge-to-voltage ratio of the transducer itself is
    the negative of the returned transfer function.
    """
    cp = model.cp_eps
    return RationalTF([cp * model.omega_oc**2, 0.0, cp], [model.omega_sc**2, 0.0, 1.0])


def as_admittance(shunt_or_tf) -> RationalTF:
    """Accept a :class:`ShuntParams` or an admittance :class:`RationalTF`."""
    if isinstance(shunt_or_tf, RationalTF):
        return shunt_or_tf
    if isinstance(shunt_or_tf, ShuntParams):
        return shunt_admittance(shunt_or_tf)
    raise TypeError(f"expected ShuntParams or RationalTF, got {type(shunt_or_tf).__name__}")
