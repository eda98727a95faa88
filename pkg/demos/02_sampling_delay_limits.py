# %% [markdown]
# How long may a digital shunt wait between samples?
#
# A digital absorber samples the piezo voltage every ``tau`` seconds and
# holds the computed current in between. The hold behaves roughly like a
# delay of ``tau / 2`` and eventually destabilizes the loop. This script
# computes that limit three ways and follows the poles as ``tau`` grows.

# %%
import math

import numpy as np

import shuntlab as sl

beam = sl.PiezoModel.from_frequencies_hz(31.08, 31.29, 245e-9)
shunt = sl.tune_series_rl(beam)
zoh = sl.critical_delay_numeric(beam, shunt, "zoh")
pure = sl.critical_delay_numeric(beam, shunt, "pure_delay")
series = sl.critical_delay_series(beam.kc, beam.omega_sc)
print(f"critical sampling period: hold {zoh.tau_c * 1e3:.4f} ms, "
      f"half-period delay {pure.tau_c * 1e3:.4f} ms, series {series.tau_c * 1e3:.4f} ms")
print(f"i.e. a sampling rate of at least {1 / zoh.tau_c:.0f} Hz for a {beam.omega_sc / 2 / math.pi:.2f} Hz mode")
print(f"recommended period: {sl.max_sampling_period(beam.kc, beam.omega_sc) * 1e3:.4f} ms")

# %% [markdown]
# Weakly coupled structures are far more sensitive: the limit scales with
# Kc. Compare it with the Nyquist period ``pi / omega_sc``.

# %%
for kc in (0.001, 0.01, 0.05, 0.1, 0.3):
    m = sl.PiezoModel.normalized(kc)
    tc = sl.critical_delay_numeric(m, sl.tune_series_rl(m)).tau_c
    print(f"Kc = {kc:5.3f}: tau_c omega_sc = {tc:.5f}, Nyquist / tau_c = {math.pi / tc:8.1f}")

# %% [markdown]
# Root locus: the closed-loop poles at zero delay are continued as the
# sampling period grows. The higher-frequency pair reaches the imaginary
# axis first.

# %%
m = sl.PiezoModel.normalized(0.1)
s = sl.tune_series_rl(m)
tc = sl.critical_delay_numeric(m, s).tau_c
loc = sl.root_locus(m, s, "zoh", tau_max=1.5 * tc, dtau=tc / 500)
print(f"first crossing at tau = {loc.crossing[0]:.6f}, omega = {loc.crossing[1]:.6f}")
for frac in (0.0, 0.5, 1.0, 1.5):
    i = int(np.argmin(np.abs(loc.taus - frac * tc)))
    upper = sorted(p for p in loc.poles[i] if p.imag > 0)
    print(f"tau = {frac:.1f} tau_c: " + ", ".join(f"{p.real:+.5f}{p.imag:+.5f}j" for p in upper))
