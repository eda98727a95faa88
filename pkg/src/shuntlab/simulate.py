"""Sampled-data time simulation of the structure controlled by a digital shunt.

Loop per sampling period ``tau``:

1. the piezo voltage ``V = theta_p x - q / cp`` is sampled (no quantization,
   no computation latency),
2. the Tustin-discretized admittance produces the current sample,
3. the current is held constant (zero-order hold) while the structure is
   integrated with fixed-step RK4 over ``substeps`` sub-intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy.signal import find_peaks as _sig_find_peaks

from .errors import DomainError
from .freq_analysis import find_peaks
from .model import PiezoModel, as_admittance
from .rational import RationalTF

DIVERGENCE_FACTOR = 1e3
DEFAULT_SUBSTEPS = 32
SETTLE_FRACTION = 0.05
RINGDOWN_PERIODS = 100.0
FREE_POINTS_PER_PERIOD = 16


class DiscreteTF:
    """Discrete transfer function run as a direct-form recurrence.

    ``num_z`` and ``den_z`` hold coefficients in descending powers of ``z``,
    with ``den_z[0] == 1``. The object keeps the input/output history, so
    successive :meth:`step` calls implement the controller in real time.
    """

    def __init__(self, num_z, den_z, tau: float):
        num_z = np.atleast_1d(np.asarray(num_z, dtype=float))
        den_z = np.atleast_1d(np.asarray(den_z, dtype=float))
        if den_z[0] == 0:
            raise DomainError("leading denominator coefficient is zero")
        if num_z.size > den_z.size:
            raise DomainError("discrete transfer function must be proper")
        num_z = np.concatenate([np.zeros(den_z.size - num_z.size), num_z])
        self.num_z = num_z / den_z[0]
        self.den_z = den_z / den_z[0]
        self.tau = float(tau)
        self.reset()

    @property
    def order(self) -> int:
        return self.den_z.size - 1

    def reset(self):
        self.u_hist = np.zeros(self.order)
        self.y_hist = np.zeros(self.order)

    def step(self, u: float) -> float:
        b, a = self.num_z, self.den_z
        y = b[0] * u + float(b[1:] @ self.u_hist) - float(a[1:] @ self.y_hist)
        if self.order:
            self.u_hist = np.roll(self.u_hist, 1)
            self.u_hist[0] = u
            self.y_hist = np.roll(self.y_hist, 1)
            self.y_hist[0] = y
        return y

    def __call__(self, z):
        z = np.asarray(z)
        return np.polyval(self.num_z, z) / np.polyval(self.den_z, z)

    def frequency_response(self, omega):
        """Value on the unit circle, ``G(exp(j omega tau))``."""
        return self(np.exp(1j * np.asarray(omega, dtype=float) * self.tau))

    def impulse_response(self, n: int) -> np.ndarray:
        saved = (self.u_hist.copy(), self.y_hist.copy())
        self.reset()
        out = np.array([self.step(1.0 if k == 0 else 0.0) for k in range(n)])
        self.u_hist, self.y_hist = saved
        return out


def tustin_discretize(Y: RationalTF, tau: float) -> DiscreteTF:
    """Bilinear substitution ``s = (2 / tau) (z - 1) / (z + 1)``."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    Y = as_admittance(Y)
    if not Y.is_proper:
        raise DomainError("Tustin discretization needs a proper transfer function")
    n = Y.den_degree

    def to_z(coeffs):
        out = np.zeros(n + 1)
        for k, c in enumerate(coeffs):
            if c == 0:
                continue
            term = np.array([c * (2.0 / tau) ** k])
            for _ in range(k):
                term = np.polymul(term, [1.0, -1.0])
            for _ in range(n - k):
                term = np.polymul(term, [1.0, 1.0])
            out += term
        return out

    num_z = to_z(Y.num)
    den_z = to_z(Y.den)
    if den_z[0] == 0:
        raise DomainError("bilinear map produced a zero leading denominator coefficient")
    return DiscreteTF(num_z, den_z, tau)


def controller_step(ctrl: DiscreteTF, v_sample: float) -> float:
    """Advance the controller by one sample; the caller holds the output."""
    return ctrl.step(v_sample)


@dataclass(frozen=True)
class SweepConfig:
    """Swept-sine forcing ``amplitude * sin(phase(t))`` on ``[0, duration]``.

    Frequencies are in Hz; ``law`` is ``"linear"`` or ``"log"``.
    """

    f_start: float
    f_end: float
    duration: float
    amplitude: float = 1.0
    law: str = "linear"

    def __post_init__(self):
        if not 0 < self.f_start < self.f_end:
            raise DomainError("need 0 < f_start < f_end")
        if not self.duration > 0:
            raise DomainError("duration must be positive")
        if self.law not in ("linear", "log"):
            raise DomainError(f"unknown sweep law {self.law!r}")

    @classmethod
    def around(cls, model: PiezoModel, lo: float = 0.9, hi: float = 1.15,
               periods: float = 600.0, amplitude: float = 1.0, law: str = "linear") -> "SweepConfig":
        """Sweep over ``[lo, hi] * omega_sc`` lasting ``periods`` short-circuit periods."""
        f_sc = model.omega_sc / (2 * math.pi)
        return cls(lo * f_sc, hi * f_sc, periods / f_sc, amplitude, law)

    def frequency(self, t):
        """Instantaneous frequency (Hz)."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        if self.law == "linear":
            return self.f_start + (self.f_end - self.f_start) * t / self.duration
        return self.f_start * (self.f_end / self.f_start) ** (t / self.duration)

    def force(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.duration, self.amplitude * np.sin(_phase(t, *self._params())), 0.0)

    def _params(self):
        return (self.f_start, self.f_end, self.duration, 0 if self.law == "linear" else 1)


@numba.njit(cache=True)
def _phase(t, f0, f1, T, law):
    if law == 0:
        return 2.0 * np.pi * (f0 * t + 0.5 * (f1 - f0) / T * t * t)
    k = np.log(f1 / f0) / T
    return 2.0 * np.pi * f0 * np.expm1(k * t) / k


@numba.njit(cache=True)
def _force(t, amp, f0, f1, T, law):
    if t > T:
        return 0.0
    return amp * np.sin(_phase(t, f0, f1, T, law))


@numba.njit(cache=True, nogil=True)
def _integrate(m, k_oc, theta, cp, b, a, tau, substeps, n_samples,
               amp, f0, f1, T, law, y0, rec_stride, block, factor, k_free, free_stride):
    """RK4 plant + sampled controller. Returns recordings and a status code.

    From sample ``k_free`` on (forcing over), ``x`` is also stored at every
    ``free_stride``-th sampling instant for the growth-rate identification.

    status: 0 ran to completion, 1 exceeded the divergence threshold,
    2 produced a non-finite state.
    """
    h = tau / substeps
    n_rec_max = (n_samples * substeps) // rec_stride + 2
    t_rec = np.empty(n_rec_max)
    x_rec = np.empty(n_rec_max)
    v_rec = np.empty(n_rec_max)
    i_rec = np.empty(n_rec_max)
    xd_rec = np.empty(n_rec_max)
    q_rec = np.empty(n_rec_max)
    order = a.size - 1
    u_hist = np.zeros(max(order, 1))
    y_hist = np.zeros(max(order, 1))
    x, xd, q = y0[0], y0[1], y0[2]
    inv_m = 1.0 / m
    n_rec = 0
    status = 0
    stop_k = n_samples
    ref, prev_blk, cur_blk = 0.0, 0.0, 0.0
    n_free_max = max(0, n_samples - k_free) // free_stride + 1
    x_free = np.empty(n_free_max)
    n_free = 0
    g = 0
    for k in range(n_samples):
        t_k = k * tau
        ax = abs(x)
        if not (np.isfinite(x) and np.isfinite(xd) and np.isfinite(q)):
            status = 2
            stop_k = k
            break
        if ref > 0.0 and ax > factor * ref:
            status = 1
            stop_k = k
            break
        if ax > cur_blk:
            cur_blk = ax
        if (k + 1) % block == 0:
            if prev_blk > ref:
                ref = prev_blk
            prev_blk = cur_blk
            cur_blk = 0.0
        if k >= k_free and (k - k_free) % free_stride == 0:
            x_free[n_free] = x
            n_free += 1
        # sample, compute, hold
        v_s = theta * x - q / cp
        cur = b[0] * v_s
        for j in range(order):
            cur += b[j + 1] * u_hist[j] - a[j + 1] * y_hist[j]
        for j in range(order - 1, 0, -1):
            u_hist[j] = u_hist[j - 1]
            y_hist[j] = y_hist[j - 1]
        if order > 0:
            u_hist[0] = v_s
            y_hist[0] = cur
        for j in range(substeps):
            t = t_k + j * h
            if g % rec_stride == 0:
                t_rec[n_rec] = t
                x_rec[n_rec] = x
                v_rec[n_rec] = v_s
                i_rec[n_rec] = cur
                xd_rec[n_rec] = xd
                q_rec[n_rec] = q
                n_rec += 1
            g += 1
            fa = _force(t, amp, f0, f1, T, law)
            fb = _force(t + 0.5 * h, amp, f0, f1, T, law)
            fc = _force(t + h, amp, f0, f1, T, law)
            k1x = xd
            k1v = (fa - k_oc * x + theta * q) * inv_m
            x2 = x + 0.5 * h * k1x
            v2 = xd + 0.5 * h * k1v
            q2 = q + 0.5 * h * cur
            k2x = v2
            k2v = (fb - k_oc * x2 + theta * q2) * inv_m
            x3 = x + 0.5 * h * k2x
            v3 = xd + 0.5 * h * k2v
            q3 = q + 0.5 * h * cur
            k3x = v3
            k3v = (fb - k_oc * x3 + theta * q3) * inv_m
            x4 = x + h * k3x
            v4 = xd + h * k3v
            q4 = q + h * cur
            k4x = v4
            k4v = (fc - k_oc * x4 + theta * q4) * inv_m
            x = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            xd = xd + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            q = q + h * cur
    if status == 0:
        t_rec[n_rec] = n_samples * tau
        x_rec[n_rec] = x
        v_rec[n_rec] = theta * x - q / cp
        i_rec[n_rec] = i_rec[n_rec - 1] if n_rec > 0 else 0.0
        xd_rec[n_rec] = xd
        q_rec[n_rec] = q
        n_rec += 1
    final = np.array([x, xd, q])
    return (t_rec[:n_rec], x_rec[:n_rec], v_rec[:n_rec], i_rec[:n_rec], xd_rec[:n_rec],
            q_rec[:n_rec], status, stop_k, final, x_free[:n_free])


@dataclass(frozen=True)
class Envelope:
    """Peak amplitudes of the swept response against instantaneous frequency.

    ``amplitude`` is normalized as ``|x| k_sc / F``; ``omega`` in rad/s.
    """

    omega: np.ndarray
    amplitude: np.ndarray
    omega_sc: float

    @property
    def normalized_omega(self) -> np.ndarray:
        return self.omega / self.omega_sc

    def peaks(self, min_separation: float = 0.0) -> list[tuple[float, float]]:
        """Local maxima of the envelope (resonance peaks), ``(omega, amplitude)``."""
        if self.omega.size < 3:
            return []
        w = self.omega
        dist = 1
        if min_separation > 0 and w.size > 1:
            dist = max(1, int(min_separation / max(np.median(np.diff(w)), 1e-300)))
        idx, _ = _sig_find_peaks(self.amplitude, distance=dist)
        return [(float(w[i]), float(self.amplitude[i])) for i in idx]


@dataclass(frozen=True)
class SimResult:
    """Recorded swept-sine run.

    Recordings share the time grid ``t``; ``v_piezo`` and ``i_inject`` are
    the most recent sampled voltage and the held current. ``velocity`` and
    ``charge`` complete the plant state. ``diverged_at`` is the time at
    which a run was cut short, ``None`` if it ran to the end.
    """

    t: np.ndarray
    x: np.ndarray
    v_piezo: np.ndarray
    i_inject: np.ndarray
    stable: bool
    tau: float
    substeps: int
    sweep_end: float
    growth_rate: float = math.nan
    diverged_at: float | None = None
    final_state: np.ndarray = field(default_factory=lambda: np.zeros(3))
    k_sc: float = 1.0
    omega_sc: float = 1.0
    envelope: Envelope | None = None
    velocity: np.ndarray | None = None
    charge: np.ndarray | None = None


def _default_ringdown(model: PiezoModel) -> float:
    return RINGDOWN_PERIODS * 2 * math.pi / model.omega_sc


def simulate_swept_sine(model: PiezoModel, ctrl: DiscreteTF, tau: float, sweep: SweepConfig,
                        substeps: int = DEFAULT_SUBSTEPS, ringdown: float | None = None,
                        initial_state=(0.0, 0.0, 0.0), points_per_period: int = 64,
                        divergence_factor: float = DIVERGENCE_FACTOR) -> SimResult:
    """Swept-sine response of the digitally shunted structure.

    The sweep is followed by ``ringdown`` seconds of free response. The run
    stops early, flagged unstable, once ``|x|`` exceeds ``divergence_factor``
    times its running maximum (taken with a lag of ten to twenty periods) or
    the state turns non-finite. Otherwise the verdict comes from the free
    response: sampled at the sampling instants it obeys a linear recurrence
    whose roots are identified by linear prediction, and the run counts as
    unstable when the largest root lies outside the unit circle. This also
    catches growth far too slow to trip the threshold.

    Parameters
    ----------
    model : PiezoModel
        Without a mass the structure is normalized to ``k_sc = 1``.
    ctrl : DiscreteTF
        Discretized admittance, typically from :func:`tustin_discretize`.
    tau : float
        Sampling period (s); must equal ``ctrl.tau``.
    sweep : SweepConfig
    substeps : int
        RK4 steps per sampling period (>= 10).
    ringdown : float, optional
        Free-response duration after the sweep; 100 short-circuit periods
        by default.
    initial_state : (x, dx/dt, q)

    Returns
    -------
    SimResult
        ``growth_rate`` (1/s) is the identified exponential rate of the
        least damped free-response mode; NaN when the free response is
        identically zero or too short.
    """
    if substeps < 10:
        raise DomainError("substeps must be at least 10")
    if not math.isclose(tau, ctrl.tau, rel_tol=1e-12):
        raise DomainError(f"tau={tau} differs from the controller's sampling period {ctrl.tau}")
    model = model.with_unit_stiffness()
    if ringdown is None:
        ringdown = _default_ringdown(model)
    total = sweep.duration + ringdown
    n_samples = int(math.ceil(total / tau))
    period_min = 1.0 / max(sweep.f_end, model.omega_oc / (2 * math.pi))
    h = tau / substeps
    rec_stride = max(1, int(period_min / points_per_period / h))
    if rec_stride >= substeps:
        # keep recordings on sampling instants
        rec_stride -= rec_stride % substeps
    block = max(1, int(10 * 2 * math.pi / model.omega_sc / tau))
    # first sampling instant with the forcing switched off for a whole period
    k_free = 0 if sweep.amplitude == 0 else int(math.floor(sweep.duration / tau)) + 1
    free_stride = max(1, int(period_min / FREE_POINTS_PER_PERIOD / tau))
    t, x, v, i, xd, q, status, stop_k, final, x_free = _integrate(
        model.mass, model.k_oc, model.theta_p, model.cp_eps,
        ctrl.num_z.astype(float), ctrl.den_z.astype(float), float(tau), int(substeps), n_samples,
        float(sweep.amplitude), float(sweep.f_start), float(sweep.f_end), float(sweep.duration),
        0 if sweep.law == "linear" else 1, np.asarray(initial_state, dtype=float),
        rec_stride, block, float(divergence_factor), k_free, free_stride)
    diverged_at = None if status == 0 else stop_k * tau
    growth = math.nan
    stable = status == 0
    if stable:
        growth = free_response_growth_rate(x_free, free_stride * tau, 3 + 2 * ctrl.order)
        stable = not (growth > 0)
    res = SimResult(t, x, v, i, bool(stable), float(tau), int(substeps), sweep.duration,
                    growth, diverged_at, final, model.k_sc, model.omega_sc, None, xd, q)
    try:
        env = extract_envelope(res, sweep)
    except DomainError:
        env = None
    return replace(res, envelope=env)


def free_response_growth_rate(y, dt: float, order: int) -> float:
    """Growth rate of the least damped mode of a uniformly sampled free response.

    Fits the linear recurrence ``y[n] = -sum c_i y[n - i]`` (``i = 1..order``)
    by least squares and returns ``log(max |root|) / dt``. The minimum-norm
    solution keeps the extraneous roots of an over-sized order inside the
    unit circle.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 4 * order:
        return math.nan
    scale = np.max(np.abs(y))
    if not scale > 0:
        return math.nan
    y = y / scale
    A = np.column_stack([y[order - i:y.size - i] for i in range(1, order + 1)])
    c = np.linalg.lstsq(A, -y[order:], rcond=None)[0]
    roots = np.roots(np.r_[1.0, c])
    return float(np.log(np.max(np.abs(roots))) / dt)


def extract_envelope(sim: SimResult, sweep: SweepConfig, settle: float | None = None) -> Envelope:
    """Peaks of ``|x(t)|`` during the sweep, placed at the sweep frequency of their time.

    Amplitudes are normalized by the force amplitude and ``k_sc``. Maxima in
    the first ``settle`` seconds (default: 5% of the sweep) are dropped, since
    there the response still carries the start-up transient from rest.
    """
    if settle is None:
        settle = SETTLE_FRACTION * sweep.duration
    sel = (sim.t >= settle) & (sim.t <= sweep.duration)
    t, ax = sim.t[sel], np.abs(sim.x[sel])
    if t.size and not np.any(ax > 0):
        n = max(3, int(sweep.duration * sweep.f_start))
        tt = np.linspace(settle, sweep.duration, n)
        return Envelope(2 * np.pi * sweep.frequency(tt), np.zeros(n), sim.omega_sc)
    pk = find_peaks(t, ax)
    if len(pk) < 3:
        raise DomainError("fewer than 3 response maxima; sweep too short")
    tp = np.array([p[0] for p in pk])
    ap = np.array([p[1] for p in pk])
    scale = sim.k_sc / sweep.amplitude if sweep.amplitude else 0.0
    return Envelope(2 * np.pi * sweep.frequency(tp), ap * scale, sim.omega_sc)


def simulate_shunt(model: PiezoModel, admittance, tau: float, sweep: SweepConfig | None = None,
                   **kwargs) -> SimResult:
    """Convenience wrapper: Tustin-discretize ``admittance`` and run the sweep."""
    if sweep is None:
        sweep = SweepConfig.around(model)
    ctrl = tustin_discretize(as_admittance(admittance), tau)
    return simulate_swept_sine(model, ctrl, tau, sweep, **kwargs)


def simulated_stability_boundary(model: PiezoModel, admittance, tau_stable: float,
                                 tau_unstable: float, sweep: SweepConfig | None = None,
                                 rtol: float = 2e-3, **kwargs) -> float:
    """Bisect the sampling period between a stable and an unstable simulation."""
    lo, hi = tau_stable, tau_unstable
    if not simulate_shunt(model, admittance, lo, sweep, **kwargs).stable:
        raise DomainError(f"simulation unstable at tau_stable={lo}")
    if simulate_shunt(model, admittance, hi, sweep, **kwargs).stable:
        raise DomainError(f"simulation stable at tau_unstable={hi}")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if simulate_shunt(model, admittance, mid, sweep, **kwargs).stable:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
