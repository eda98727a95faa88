"""Command-line front end.

Usage::

    shuntlab <command> --config scenario.json [--out DIR] [--figure N]

Every run writes a JSON summary and one or more CSV tables. Exit status is 0
on success, 2 for configuration errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, figures
from .delay_stability import (
    critical_delay_numeric,
    critical_delay_series,
    max_sampling_period,
    root_locus,
)
from .errors import DomainError, NumericalError
from .figures import Table
from .freq_analysis import (
    DelayModel,
    closed_loop_frf,
    open_loop_tf,
    passivity_loss_delay,
    stability_margins,
)
from .model import (
    PiezoModel,
    ShuntParams,
    shunt_admittance,
    tune_series_rl,
    tune_series_rl_linearized,
)
from .simulate import SweepConfig, simulate_shunt
from .stabilization import stabilize, verify_pole_placement

COMMANDS = ("tune", "margins", "rootlocus", "critical", "frf", "simulate", "stabilize", "reproduce")
FIGURES = (3, 4, 5, 6, 7, 8, 9, 11, 13, 14)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(Exception):
    pass


# -- configuration ------------------------------------------------------------

def _schema() -> dict:
    return json.loads(resources.files("shuntlab").joinpath("scenario_schema.json").read_text())


def load_scenario(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  {'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("config does not match the scenario schema:\n" + "\n".join(lines))
    return cfg


def build_model(cfg: dict) -> PiezoModel:
    if "model" not in cfg:
        raise ConfigError("this command needs a 'model' section")
    m = cfg["model"]
    if "f_sc_hz" in m:
        model = PiezoModel.from_frequencies_hz(m["f_sc_hz"], m["f_oc_hz"], m["cp_eps"], m.get("mass"))
    elif "k_oc" in m:
        model = PiezoModel.from_physical(m["mass"], m["k_oc"], m["theta_p"], m["cp_eps"])
    elif "kc" in m:
        omega_sc = m.get("omega_sc", 1.0)
        model = PiezoModel.from_coupling(omega_sc, m["kc"], m.get("cp_eps", 1.0),
                                         m.get("mass", 1.0 / omega_sc**2))
    else:
        model = PiezoModel(m["omega_sc"], m["omega_oc"], m["cp_eps"], m.get("mass"))
    return model.with_unit_stiffness()


def build_shunt(cfg: dict, model: PiezoModel) -> ShuntParams:
    tuning = cfg.get("tuning", "optimal")
    if tuning == "optimal":
        return tune_series_rl(model)
    if tuning == "linearized":
        return tune_series_rl_linearized(model)
    return ShuntParams.from_values(tuning["inductance"], tuning["resistance"], model)


def resolve_taus(cfg: dict, model: PiezoModel, shunt) -> list[float]:
    """Sampling periods in seconds."""
    delay = cfg.get("delay", {})
    taus = delay.get("tau", [])
    taus = [taus] if isinstance(taus, (int, float)) else list(taus)
    unit = delay.get("tau_unit", "s")
    if unit == "1/omega_sc":
        return [t / model.omega_sc for t in taus]
    if unit == "tau_c":
        tau_c = critical_delay_numeric(model, shunt, "zoh").tau_c
        if not math.isfinite(tau_c):
            raise ConfigError("tau_unit 'tau_c' requested but no finite critical delay exists")
        return [t * tau_c for t in taus]
    return [float(t) for t in taus]


def _delay_variant(cfg: dict) -> str:
    return cfg.get("delay", {}).get("variant", "zoh")


def _frf_grid(cfg: dict, model: PiezoModel) -> np.ndarray:
    g = cfg.get("frf_grid", {})
    lo, hi, n = g.get("lo", 0.9), g.get("hi", 1.15), g.get("n", 2000)
    if not lo < hi:
        raise ConfigError("frf_grid: need lo < hi")
    return np.linspace(lo, hi, n) * model.omega_sc


def thread_count() -> int:
    raw = os.environ.get("SHUNTLAB_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SHUNTLAB_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError("SHUNTLAB_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


# -- serialization ------------------------------------------------------------

def to_jsonable(obj):
    """Plain-JSON view: numpy scalars unwrapped, complex as {re, im}, non-finite as strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def write_json(path: Path, summary: dict):
    text = json.dumps(to_jsonable(summary), indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def write_csv(path: Path, table: Table, header: dict | None = None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# table: {table.name}\n")
        for key, val in (header or {}).items():
            fh.write(f"# {key}: {json.dumps(to_jsonable(val), allow_nan=False)}\n")
        for key, val in table.meta.items():
            fh.write(f"# {key}: {json.dumps(to_jsonable(val), allow_nan=False)}\n")
        fh.write("# units: " + ",".join(table.units) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.data:
            writer.writerow(["%.17g" % v for v in row])


def write_gnuplot(path: Path, csv_name: str, table: Table):
    lines = ['set datafile separator ","', f'set xlabel "{table.columns[0]} [{table.units[0]}]"',
             "set key outside"]
    curves = [f'"{csv_name}" using 1:{i + 1} with lines title "{c}"'
              for i, c in enumerate(table.columns[1:], start=1)]
    lines.append("plot " + ", \\\n     ".join(curves))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _model_summary(model: PiezoModel) -> dict:
    return {"omega_sc": model.omega_sc, "omega_oc": model.omega_oc,
            "f_sc_hz": model.omega_sc / (2 * math.pi), "f_oc_hz": model.omega_oc / (2 * math.pi),
            "kc": model.kc, "cp_eps": model.cp_eps, "mass": model.mass, "theta_p": model.theta_p}


def _shunt_summary(shunt: ShuntParams) -> dict:
    return {"inductance": shunt.inductance, "resistance": shunt.resistance,
            "delta": shunt.delta, "zeta": shunt.zeta}


def _peaks(curve) -> list[dict]:
    return [{"omega": w, "amplitude": a} for w, a in curve.peaks()]


# -- commands -----------------------------------------------------------------

def cmd_tune(cfg, ctx):
    model = build_model(cfg)
    shunt = build_shunt(cfg, model)
    lin = tune_series_rl_linearized(model)
    summary = {"model": _model_summary(model), "tuning": cfg.get("tuning", "optimal"),
               "shunt": _shunt_summary(shunt), "linearized": _shunt_summary(lin),
               "passivity_loss_delay": passivity_loss_delay(model)}
    table = Table("tuning", ["kc", "inductance", "resistance", "delta", "zeta"],
                  ["-", "H", "ohm", "-", "-"],
                  [[model.kc, shunt.inductance, shunt.resistance, shunt.delta, shunt.zeta]])
    return summary, [table]


def cmd_margins(cfg, ctx):
    model = build_model(cfg)
    shunt = build_shunt(cfg, model)
    scan = cfg.get("margin_scan", {})
    lo, hi, n = scan.get("lo", 0.01), scan.get("hi", 100.0), scan.get("n", 10_000)
    H = open_loop_tf(model, shunt)
    rep = stability_margins(H, band=(lo, hi), n_points=n, omega_ref=model.omega_sc)
    w = np.geomspace(lo, hi, n) * model.omega_sc
    h = H(1j * w)
    table = Table("open_loop", ["omega", "omega_norm", "magnitude_db", "phase"],
                  ["rad/s", "-", "dB", "deg"],
                  np.column_stack([w, w / model.omega_sc, 20 * np.log10(np.abs(h)),
                                   np.degrees(np.angle(h))]))
    summary = {"model": _model_summary(model), "shunt": _shunt_summary(shunt),
               "gain_crossovers": list(rep.gain_crossovers),
               "phase_margin_deg": rep.phase_margin_deg,
               "gain_margin_db": rep.gain_margin_db,
               "gain_margin_infinite": rep.gain_margin_infinite,
               "phase_crossovers": list(rep.phase_crossovers)}
    return summary, [table]


def cmd_rootlocus(cfg, ctx):
    model = build_model(cfg)
    shunt = build_shunt(cfg, model)
    rl = cfg.get("rootlocus", {})
    variant = rl.get("variant", "zoh")
    tau_max = rl.get("tau_max", math.pi) / model.omega_sc
    steps, stride = rl.get("steps", 2000), rl.get("stride", 1)
    loc = root_locus(model, shunt, variant, tau_max=tau_max, dtau=tau_max / steps)
    keep = np.unique(np.r_[np.arange(0, loc.taus.size, stride), loc.taus.size - 1])
    rows = [[loc.taus[i], b, p.real, p.imag] for i in keep for b, p in enumerate(loc.poles[i])]
    table = Table("root_locus", ["tau", "branch", "re", "im"], ["s", "-", "rad/s", "rad/s"], rows)
    crit = critical_delay_numeric(model, shunt, "zoh" if variant == "zoh" else "pure_delay")
    summary = {"model": _model_summary(model), "shunt": _shunt_summary(shunt), "variant": variant,
               "tau_max": tau_max, "n_steps": int(loc.taus.size - 1),
               "crossing": None if loc.crossing is None else
               {"tau": loc.crossing[0], "omega": loc.crossing[1]},
               "critical_delay": {"tau_c": crit.tau_c, "omega_c": crit.omega_c, "method": crit.method},
               "poles_at_tau0": list(loc.poles[0]), "poles_at_tau_max": list(loc.poles[-1])}
    return summary, [table]


def _critical_for(model: PiezoModel, shunt, kc: float | None = None) -> dict:
    kc = model.kc if kc is None else kc
    zoh = critical_delay_numeric(model, shunt, "zoh")
    pure = critical_delay_numeric(model, shunt, "pure_delay")
    ser = critical_delay_series(kc, model.omega_sc)
    return {"kc": kc, "omega_c_zoh": zoh.omega_c, "tau_c_zoh": zoh.tau_c,
            "omega_c_pure": pure.omega_c, "tau_c_pure": pure.tau_c, "branch_k": pure.branch_k,
            "omega_c_series": ser.omega_c, "tau_c_series": ser.tau_c,
            "max_sampling_period": max_sampling_period(kc, model.omega_sc),
            "max_sampling_period_modified": max_sampling_period(kc, model.omega_sc, True)}


def cmd_critical(cfg, ctx):
    model = build_model(cfg)
    kcs = cfg.get("critical", {}).get("kc")
    if kcs is None:
        jobs = [(model, build_shunt(cfg, model), None)]
    else:
        jobs = []
        for kc in kcs:
            m = PiezoModel.from_coupling(model.omega_sc, kc, model.cp_eps, model.mass)
            jobs.append((m, build_shunt(cfg, m), kc))
    results = list(ctx["map"](lambda job: _critical_for(*job), jobs))
    cols = ["Kc", "omega_c_zoh", "tau_c_zoh", "tau_c_pure", "tau_c_series", "omega_c_series",
            "max_sampling_period"]
    units = ["-", "rad/s", "s", "s", "s", "rad/s", "s"]
    table = Table("critical_delay", cols, units,
                  [[r["kc"], r["omega_c_zoh"], r["tau_c_zoh"], r["tau_c_pure"], r["tau_c_series"],
                    r["omega_c_series"], r["max_sampling_period"]] for r in results])
    return {"omega_sc": model.omega_sc, "results": results}, [table]


def cmd_frf(cfg, ctx):
    model = build_model(cfg)
    shunt = build_shunt(cfg, model)
    y = shunt_admittance(shunt)
    w = _frf_grid(cfg, model)
    variant = _delay_variant(cfg)
    taus = resolve_taus(cfg, model, shunt)
    nominal = closed_loop_frf(model, y, omega=w)
    curves = [closed_loop_frf(model, y, DelayModel(variant, t), w) for t in taus]
    cols = ["omega", "omega_norm", "amp_nominal"] + [f"amp_tau{i}" for i in range(len(taus))]
    table = Table("frf", cols, ["rad/s", "-"] + ["-"] * (1 + len(taus)),
                  np.column_stack([w, w / model.omega_sc, nominal.magnitude]
                                  + [c.magnitude for c in curves]),
                  {"taus": taus, "variant": variant})
    summary = {"model": _model_summary(model), "shunt": _shunt_summary(shunt), "variant": variant,
               "nominal_peaks": _peaks(nominal),
               "delayed": [{"tau": t, "peaks": _peaks(c), "warnings": list(c.warnings)}
                           for t, c in zip(taus, curves)]}
    return summary, [table]


def _sweep(cfg: dict, model: PiezoModel) -> tuple[SweepConfig, float | None, int]:
    sim = cfg.get("simulation", {})
    sweep = SweepConfig.around(model, sim.get("sweep_lo", 0.9), sim.get("sweep_hi", 1.15),
                               sim.get("periods", 600.0), sim.get("amplitude", 1.0),
                               sim.get("law", "linear"))
    rd = sim.get("ringdown_periods")
    ringdown = None if rd is None else rd * 2 * math.pi / model.omega_sc
    return sweep, ringdown, sim.get("substeps", 32)


def cmd_simulate(cfg, ctx):
    model = build_model(cfg)
    shunt = build_shunt(cfg, model)
    taus = resolve_taus(cfg, model, shunt)
    if not taus or any(t <= 0 for t in taus):
        raise ConfigError("simulate needs positive sampling periods in delay.tau")
    sim_cfg = cfg.get("simulation", {})
    sweep, ringdown, substeps = _sweep(cfg, model)
    modified = sim_cfg.get("modified", False)
    pin = cfg.get("stabilization", {}).get("pinned_index", 0)

    def run(tau):
        adm = stabilize(model, shunt, tau, pin)[0] if modified else shunt_admittance(shunt)
        return simulate_shunt(model, adm, tau, sweep, substeps=substeps, ringdown=ringdown)

    runs = list(ctx["map"](run, taus))
    env_rows = []
    for tau, r in zip(taus, runs):
        if r.envelope is not None:
            env_rows += [[tau, w, a] for w, a in zip(r.envelope.omega, r.envelope.amplitude)]
    tables = [Table("envelope", ["tau", "omega", "amplitude"], ["s", "rad/s", "-"], env_rows)]
    if sim_cfg.get("write_time_series", False):
        for i, (tau, r) in enumerate(zip(taus, runs)):
            tables.append(Table(f"time_series_{i}", ["t", "x", "v_piezo", "i_inject"],
                                ["s", "m", "V", "A"],
                                np.column_stack([r.t, r.x, r.v_piezo, r.i_inject]), {"tau": tau}))
    summary = {"model": _model_summary(model), "shunt": _shunt_summary(shunt),
               "modified_admittance": modified,
               "sweep": {"f_start": sweep.f_start, "f_end": sweep.f_end, "duration": sweep.duration,
                         "amplitude": sweep.amplitude, "law": sweep.law},
               "substeps": substeps,
               "runs": [{"tau": t, "stable": r.stable, "growth_rate": r.growth_rate,
                         "diverged_at": r.diverged_at,
                         "envelope_peaks": [] if r.envelope is None else
                         [{"omega": w, "amplitude": a} for w, a in r.envelope.peaks()]}
                        for t, r in zip(taus, runs)]}
    return summary, tables


def cmd_stabilize(cfg, ctx):
    model = build_model(cfg)
    shunt = build_shunt(cfg, model)
    taus = resolve_taus(cfg, model, shunt)
    if not taus or any(t <= 0 for t in taus):
        raise ConfigError("stabilize needs positive sampling periods in delay.tau")
    pin = cfg.get("stabilization", {}).get("pinned_index", 0)
    y = shunt_admittance(shunt)
    w = _frf_grid(cfg, model)
    nominal = closed_loop_frf(model, y, omega=w)
    runs, fac_rows, frf_cols = [], [], [nominal.magnitude]
    for tau in taus:
        y_mod, fac, poles = stabilize(model, shunt, tau, pin)
        chk = verify_pole_placement(model, y_mod, tau, poles)
        frf = closed_loop_frf(model, y_mod, DelayModel.zoh(tau), w)
        crit = critical_delay_numeric(model, y_mod, "zoh")
        frf_cols.append(frf.magnitude)
        fac_rows.append([tau, *fac.stacked, fac.residual_norm])
        runs.append({"tau": tau, "delta_b": list(fac.delta_b), "delta_a": list(fac.delta_a),
                     "pinned_index": fac.pinned, "residual_norm": fac.residual_norm,
                     "degenerate": fac.degenerate, "sign_flips": list(fac.sign_flips),
                     "modified_num": list(y_mod.num), "modified_den": list(y_mod.den),
                     "placement_residuals": list(chk.residuals),
                     "resolved_poles": list(chk.resolved_poles),
                     "max_real_resolved": chk.max_real,
                     "critical_delay_modified": crit.tau_c,
                     "frf_peaks": _peaks(frf), "warnings": list(frf.warnings)})
    n_b, n_a = len(y.num), len(y.den)
    fcols = ["tau"] + [f"delta_b{i}" for i in range(n_b)] + [f"delta_a{i}" for i in range(n_a)] \
        + ["residual_norm"]
    tables = [Table("factors", fcols, ["s"] + ["-"] * (n_b + n_a + 1), fac_rows),
              Table("frf", ["omega", "omega_norm", "amp_nominal"]
                    + [f"amp_tau{i}" for i in range(len(taus))],
                    ["rad/s", "-"] + ["-"] * (1 + len(taus)),
                    np.column_stack([w, w / model.omega_sc] + frf_cols), {"taus": taus})]
    summary = {"model": _model_summary(model), "shunt": _shunt_summary(shunt),
               "nominal_peaks": _peaks(nominal), "runs": runs}
    return summary, tables


def reproduce_tables(figure: int, cfg: dict, mapper) -> list[Table]:
    rep = cfg.get("reproduce", {})
    rd = rep.get("ringdown_periods")
    ringdown = None if rd is None else rd * 2 * math.pi
    if figure == 3:
        return [figures.zoh_signals()]
    if figure == 4:
        return [figures.block_responses()]
    if figure == 5:
        return [figures.open_loop_bode(), figures.phase_margin_curve()]
    if figure == 6:
        return [figures.admittance_plane()]
    if figure == 7:
        return [figures.critical_delays(n=rep.get("kc_points", 50), mapper=mapper)]
    if figure == 8:
        return [figures.delayed_frf(kc) for kc in (0.01, 0.1)]
    if figure == 9:
        return [t for kc in (0.01, 0.1) for t in figures.root_loci(kc)]
    if figure == 11:
        return [figures.simulated_envelopes(kc, ringdown=ringdown, mapper=mapper) for kc in (0.01, 0.1)]
    if figure == 13:
        return [figures.modified_frf(kc) for kc in (0.01, 0.1)]
    if figure == 14:
        return [figures.modified_envelopes(kc, ringdown=ringdown, mapper=mapper) for kc in (0.01, 0.1)]
    raise ConfigError(f"no reproduce target for figure {figure}; choose from {FIGURES}")


def cmd_reproduce(cfg, ctx):
    figure = ctx["figure"]
    if figure is None:
        raise ConfigError("reproduce needs --figure N")
    tables = reproduce_tables(figure, cfg, ctx["map"])
    summary = {"figure": figure, "normalization": "omega_sc = 1, k_sc = 1, cp_eps = 1",
               "tables": {t.name: {"columns": t.columns, "rows": int(t.data.shape[0]), **t.meta}
                          for t in tables}}
    return summary, tables


HANDLERS = {"tune": cmd_tune, "margins": cmd_margins, "rootlocus": cmd_rootlocus,
            "critical": cmd_critical, "frf": cmd_frf, "simulate": cmd_simulate,
            "stabilize": cmd_stabilize, "reproduce": cmd_reproduce}


# -- driver -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shuntlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--figure", type=int, help="figure number for 'reproduce'")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run(command: str, cfg: dict, out_dir: Path, figure: int | None = None) -> dict:
    """Execute one command and write its outputs; returns the summary."""
    if cfg.get("analysis", command) != command:
        raise ConfigError(f"config requests analysis {cfg['analysis']!r} but command is {command!r}")
    if figure is not None and command != "reproduce":
        raise ConfigError("--figure only applies to 'reproduce'")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"output directory {out_dir} is not writable")
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        ctx = {"map": pool.map, "figure": figure}
        summary, tables = HANDLERS[command](cfg, ctx)
    stem = f"fig{figure}" if command == "reproduce" else command
    plot = cfg.get("output", {}).get("plot_script", False)
    header = {"shuntlab_version": __version__, "command": command}
    files = []
    for table in tables:
        name = f"{stem}_{table.name}.csv"
        write_csv(out_dir / name, table, header)
        files.append(name)
        if plot:
            gp = f"{stem}_{table.name}.gp"
            write_gnuplot(out_dir / gp, name, table)
            files.append(gp)
    full = {"shuntlab_version": __version__, "command": command, **summary, "files": files}
    write_json(out_dir / f"{stem}.json", full)
    return full


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_scenario(args.config)
        out = Path(args.out or cfg.get("output", {}).get("dir", "."))
        run(args.command, cfg, out, args.figure)
    except (ConfigError, DomainError) as exc:
        print(f"shuntlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"shuntlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
