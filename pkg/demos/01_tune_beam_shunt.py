# %% [markdown]
# Tuning a series RL shunt for a cantilever beam
#
# The beam's first mode sits at 31.08 Hz with the electrodes shorted and at
# 31.29 Hz with them open; the piezo patch has a blocked capacitance of
# 245 nF. From those three numbers we get the coupling factor, the optimal
# inductance and resistance, and the controlled frequency response.

# %%
import numpy as np

import shuntlab as sl

beam = sl.PiezoModel.from_frequencies_hz(31.08, 31.29, 245e-9)
print(f"coupling factor Kc = {beam.kc:.4f}")

shunt = sl.tune_series_rl(beam)
approx = sl.tune_series_rl_linearized(beam)
print(f"optimal shunt:    L = {shunt.inductance:8.2f} H   R = {shunt.resistance:7.1f} ohm")
print(f"first-order rule: L = {approx.inductance:8.2f} H   R = {approx.resistance:7.1f} ohm")

# %% [markdown]
# With the optimal values the two resonance peaks of the receptance have the
# same height. The normalized receptance is ``x k_sc / f``.

# %%
Y = sl.shunt_admittance(shunt)
omega = sl.resonant_grid(beam, 0.95, 1.06, 20001)
frf = sl.closed_loop_frf(beam, Y, omega=omega)
for w, a in frf.peaks():
    print(f"peak at {w / (2 * np.pi):7.3f} Hz, amplitude {a:7.3f}")

# %% [markdown]
# For comparison, a resistor of the same value without the inductor leaves
# a single, much higher peak: the inductance is what tunes the electrical
# resonance onto the mode.

# %%
resistive = sl.RationalTF([1.0], [shunt.resistance])
peak = max(a for _, a in sl.closed_loop_frf(beam, resistive, omega=omega).peaks())
print(f"resistor-only peak amplitude: {peak:.1f}")
