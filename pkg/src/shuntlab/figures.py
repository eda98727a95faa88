"""Data generators for the standard plots of the analysis.

Every generator works on the normalized structure (``omega_sc = 1``,
``k_sc = 1``, ``cp_eps = 1``) and returns :class:`Table` objects, so times
are in units of ``1 / omega_sc`` and frequencies in units of ``omega_sc``.
``mapper`` arguments accept any ``map``-like callable (for instance
``ThreadPoolExecutor.map``); results keep the input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .delay_stability import (
    critical_delay_numeric,
    critical_delay_series,
    root_locus,
)
from .freq_analysis import (
    DelayModel,
    closed_loop_frf,
    delayed_admittance,
    open_loop_tf,
    resonant_grid,
    stability_margins,
)
from .model import PiezoModel, dynamic_capacitance, shunt_admittance, tune_series_rl
from .simulate import DiscreteTF, SweepConfig, simulate_shunt
from .stabilization import stabilize

DELAYED_FRF_FACTORS = (0.01, 0.1, 0.5, 0.8, 1.0)
SIMULATED_FACTORS = (0.01, 0.1, 0.5, 0.8, 1.0, 1.01)
MODIFIED_TAUS = (0.01, 0.1, 0.5, 1.0, math.pi)
LOCUS_MARKERS = (0.0, 0.01, 0.1, 1.0, math.pi)


@dataclass
class Table:
    """Column-oriented numeric table with units and free-form metadata."""

    name: str
    columns: list[str]
    units: list[str]
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.size == 0:
            self.data = self.data.reshape(0, len(self.columns))
        if self.data.shape[1] != len(self.columns) or len(self.units) != len(self.columns):
            raise ValueError(f"table {self.name}: column/unit/data widths differ")

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def _fmt(x: float) -> str:
    return f"{x:g}"


def _tuned(kc: float):
    model = PiezoModel.normalized(kc)
    return model, tune_series_rl(model)


def zoh_signals(cycles: float = 2.0, samples_per_period: int = 12, points_per_sample: int = 20) -> Table:
    """Unity-gain controller: sine input, held output and its running average.

    The staircase averaged over one period tracks the input delayed by
    ``tau / 2``.
    """
    tau = 2 * math.pi / samples_per_period
    ctrl = DiscreteTF([1.0], [1.0], tau)
    n = int(round(cycles * samples_per_period))
    u = np.array([ctrl.step(math.sin(k * tau)) for k in range(n + 1)])
    t = np.arange(n * points_per_sample + 1) * tau / points_per_sample
    k = np.minimum(np.floor(t / tau + 1e-9).astype(int), n)
    held = u[k]
    # averaging the staircase over a centered window of one period amounts to
    # linear interpolation between samples, shifted by tau / 2
    lagged = t - tau / 2
    average = np.where(lagged >= 0, np.interp(lagged, np.arange(n + 1) * tau, u), np.nan)
    return Table("zoh_signals", ["t", "input", "output", "output_average", "input_delayed_half_tau"],
                 ["1/omega", "-", "-", "-", "-"],
                 np.column_stack([t, np.sin(t), held, average, np.sin(t - tau / 2)]),
                 {"tau": tau, "samples_per_period": samples_per_period})


def block_responses(kc: float = 0.1, lo: float = 0.5, hi: float = 1.5, n: int = 2000) -> Table:
    """Frequency responses of the loop blocks: dynamic capacitance, admittance, open loop.

    The default even point count keeps ``omega_sc`` (pole of the dynamic
    capacitance, zero of the open loop) off the grid.
    """
    model, shunt = _tuned(kc)
    w = np.linspace(lo, hi, n)
    s = 1j * w
    cdyn = dynamic_capacitance(model)(s)
    y = shunt_admittance(shunt)(s)
    h = open_loop_tf(model, shunt)(s)
    return Table("block_responses",
                 ["omega", "cdyn_mag", "cdyn_phase", "y_mag", "y_phase", "h_mag", "h_phase"],
                 ["omega_sc", "cp_eps", "deg", "1/(cp_eps omega_sc)", "deg", "-", "deg"],
                 np.column_stack([w, np.abs(cdyn), np.degrees(np.angle(cdyn)), np.abs(y),
                                  np.degrees(np.angle(y)), np.abs(h), np.degrees(np.angle(h))]),
                 {"kc": kc})


def open_loop_bode(kcs=(0.01, 0.05, 0.1, 0.2), lo: float = 0.8, hi: float = 1.2, n: int = 2000) -> Table:
    w = np.linspace(lo, hi, n)
    cols, units, data = ["omega"], ["omega_sc"], [w]
    for kc in kcs:
        model, shunt = _tuned(kc)
        h = open_loop_tf(model, shunt)(1j * w)
        cols += [f"mag_db_kc{_fmt(kc)}", f"phase_kc{_fmt(kc)}"]
        units += ["dB", "deg"]
        data += [20 * np.log10(np.abs(h)), np.degrees(np.angle(h))]
    return Table("open_loop_bode", cols, units, np.column_stack(data), {"kc": list(kcs)})


def phase_margin_curve(kc_lo: float = 0.01, kc_hi: float = 0.2, n: int = 40) -> Table:
    kcs = np.linspace(kc_lo, kc_hi, n)
    rows = []
    for kc in kcs:
        model, shunt = _tuned(kc)
        rep = stability_margins(open_loop_tf(model, shunt))
        rows.append([kc, rep.phase_margin_deg, len(rep.gain_crossovers), max(rep.gain_crossovers)])
    return Table("phase_margin", ["Kc", "phase_margin", "n_crossovers", "omega_crossover"],
                 ["-", "deg", "-", "omega_sc"], rows)


def admittance_plane(kc: float = 0.1, taus=(0.0, 0.1, 0.2), lo: float = 0.0, hi: float = 3.0,
                     n: int = 601) -> Table:
    """Delayed admittance ``Y(j w) exp(-j w tau / 2)`` in the complex plane."""
    model, shunt = _tuned(kc)
    y = shunt_admittance(shunt)
    w = np.linspace(lo, hi, n)
    cols, units, data = ["omega"], ["omega_sc"], [w]
    for tau in taus:
        yd = delayed_admittance(y, tau, w)
        cols += [f"re_tau{_fmt(tau)}", f"im_tau{_fmt(tau)}"]
        units += ["1/(cp_eps omega_sc)"] * 2
        data += [yd.real, yd.imag]
    return Table("admittance_plane", cols, units, np.column_stack(data), {"kc": kc, "taus": list(taus)})


def _critical_row(kc: float) -> list[float]:
    model, shunt = _tuned(kc)
    zoh = critical_delay_numeric(model, shunt, "zoh")
    pure = critical_delay_numeric(model, shunt, "pure_delay")
    ser = critical_delay_series(kc)
    return [kc, zoh.tau_c, pure.tau_c, ser.tau_c, zoh.omega_c, pure.omega_c, ser.omega_c]


def critical_delays(kc_lo: float = 1e-3, kc_hi: float = 0.3, n: int = 50, mapper=map) -> Table:
    """Critical delays of the three delay models on a logarithmic coupling grid."""
    kcs = np.geomspace(kc_lo, kc_hi, n)
    rows = list(mapper(_critical_row, kcs))
    return Table("critical_delays",
                 ["Kc", "tau_c_zoh", "tau_c_pure", "tau_c_series", "omega_c_zoh", "omega_c_pure",
                  "omega_c_series"],
                 ["-", "1/omega_sc", "1/omega_sc", "1/omega_sc", "omega_sc", "omega_sc", "omega_sc"],
                 rows)


def delayed_frf(kc: float, factors=DELAYED_FRF_FACTORS, omega=None) -> Table:
    """Closed-loop FRF under the hold delay for sampling periods given in units of ``tau_c``."""
    model, shunt = _tuned(kc)
    tau_c = critical_delay_numeric(model, shunt).tau_c
    w = resonant_grid(model) if omega is None else np.asarray(omega)
    cols, units, data = ["omega", "amp_nominal"], ["omega_sc", "-"], [w]
    y = shunt_admittance(shunt)
    data.append(closed_loop_frf(model, y, omega=w).magnitude)
    for f in factors:
        cols.append(f"amp_tau{_fmt(f)}tc")
        units.append("-")
        data.append(closed_loop_frf(model, y, DelayModel.zoh(f * tau_c), w).magnitude)
    return Table(f"delayed_frf_kc{_fmt(kc)}", cols, units, np.column_stack(data),
                 {"kc": kc, "tau_c": tau_c, "factors": list(factors)})


def root_loci(kc: float, tau_max: float = math.pi, steps: int = 2000, markers=LOCUS_MARKERS,
              stride: int = 10) -> tuple[Table, Table]:
    """Root locus under the hold delay, decimated by ``stride``, and marker poles."""
    model, shunt = _tuned(kc)
    loc = root_locus(model, shunt, "zoh", tau_max=tau_max, dtau=tau_max / steps)
    keep = np.unique(np.r_[np.arange(0, loc.taus.size, stride), loc.taus.size - 1])
    rows = []
    for i in keep:
        for b, p in enumerate(loc.poles[i]):
            rows.append([loc.taus[i], b, p.real, p.imag])
    mrows = []
    for tm in markers:
        i = int(np.argmin(np.abs(loc.taus - tm)))
        for b, p in enumerate(loc.poles[i]):
            mrows.append([loc.taus[i], b, p.real, p.imag])
    meta = {"kc": kc, "crossing_tau": None if loc.crossing is None else loc.crossing[0],
            "crossing_omega": None if loc.crossing is None else loc.crossing[1]}
    cols, units = ["tau", "branch", "re", "im"], ["1/omega_sc", "-", "omega_sc", "omega_sc"]
    return (Table(f"root_locus_kc{_fmt(kc)}", cols, units, rows, meta),
            Table(f"root_locus_markers_kc{_fmt(kc)}", cols, units, mrows, meta))


def _envelope_table(name: str, runs, labels, meta) -> Table:
    rows = []
    for lab, res in zip(labels, runs):
        env = res.envelope
        if env is None:
            continue
        for w, a in zip(env.omega, env.amplitude):
            rows.append([lab, w, a])
    meta = dict(meta)
    meta["stable"] = [bool(r.stable) for r in runs]
    meta["growth_rate"] = [r.growth_rate for r in runs]
    meta["diverged_at"] = [r.diverged_at for r in runs]
    return Table(name, ["tau", "omega", "amplitude"], ["1/omega_sc", "omega_sc", "-"], rows, meta)


def simulated_envelopes(kc: float, factors=SIMULATED_FACTORS, sweep: SweepConfig | None = None,
                        ringdown: float | None = None, substeps: int = 32, mapper=map) -> Table:
    """Swept-sine envelopes with the unmodified admittance, periods in units of ``tau_c``."""
    model, shunt = _tuned(kc)
    tau_c = critical_delay_numeric(model, shunt).tau_c
    sweep = sweep or SweepConfig.around(model)
    y = shunt_admittance(shunt)
    taus = [f * tau_c for f in factors]
    runs = list(mapper(lambda t: simulate_shunt(model, y, t, sweep, substeps=substeps,
                                                ringdown=ringdown), taus))
    return _envelope_table(f"simulated_envelopes_kc{_fmt(kc)}", runs, taus,
                           {"kc": kc, "tau_c": tau_c, "factors": list(factors)})


def modified_frf(kc: float, taus=MODIFIED_TAUS, pinned_index: int = 0, omega=None) -> Table:
    model, shunt = _tuned(kc)
    w = resonant_grid(model) if omega is None else np.asarray(omega)
    y = shunt_admittance(shunt)
    cols, units = ["omega", "amp_nominal"], ["omega_sc", "-"]
    data = [w, closed_loop_frf(model, y, omega=w).magnitude]
    factors = []
    for tau in taus:
        y_mod, fac, _ = stabilize(model, shunt, tau, pinned_index)
        factors.append(fac.stacked.tolist())
        cols.append(f"amp_tau{_fmt(tau)}")
        units.append("-")
        data.append(closed_loop_frf(model, y_mod, DelayModel.zoh(tau), w).magnitude)
    return Table(f"modified_frf_kc{_fmt(kc)}", cols, units, np.column_stack(data),
                 {"kc": kc, "taus": list(taus), "pinned_index": pinned_index, "factors": factors})


def modified_envelopes(kc: float, taus=MODIFIED_TAUS, pinned_index: int = 0,
                       sweep: SweepConfig | None = None, ringdown: float | None = None,
                       substeps: int = 32, mapper=map) -> Table:
    model, shunt = _tuned(kc)
    sweep = sweep or SweepConfig.around(model)

    def run(tau):
        y_mod, _, _ = stabilize(model, shunt, tau, pinned_index)
        return simulate_shunt(model, y_mod, tau, sweep, substeps=substeps, ringdown=ringdown)

    runs = list(mapper(run, list(taus)))
    return _envelope_table(f"modified_envelopes_kc{_fmt(kc)}", runs, list(taus),
                           {"kc": kc, "taus": list(taus), "pinned_index": pinned_index})
