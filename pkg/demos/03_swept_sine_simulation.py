# %% [markdown]
# Time-domain check of the stability limit
#
# The sampled loop is simulated directly: the plant is integrated with RK4
# between samples, the admittance runs as a Tustin recurrence, and the
# structure is driven by a slow swept sine. We look at the response
# envelope and at the stability verdict on both sides of the predicted
# critical sampling period.

# %%
import shuntlab as sl

m = sl.PiezoModel.normalized(0.1)
shunt = sl.tune_series_rl(m)
Y = sl.shunt_admittance(shunt)
tau_c = sl.critical_delay_numeric(m, shunt).tau_c
sweep = sl.SweepConfig.around(m)
print(f"predicted critical period {tau_c:.5f} / omega_sc; sweep {sweep.duration:.0f} s")

# %%
for factor in (0.01, 0.5, 0.8, 0.99, 1.01, 1.2):
    run = sl.simulate_shunt(m, Y, factor * tau_c, sweep)
    if run.stable:
        peaks = run.envelope.peaks(min_separation=0.05)
        right = max(a for w, a in peaks if w > m.omega_sc)
        left = max(a for w, a in peaks if w <= m.omega_sc)
        print(f"{factor:4.2f} tau_c: stable, envelope peaks {left:6.2f} / {right:6.2f}")
    else:
        print(f"{factor:4.2f} tau_c: unstable (free-response growth rate {run.growth_rate:.3g} 1/s)")

# %% [markdown]
# Bisecting on the simulation verdict recovers the analytic limit.

# %%
boundary = sl.simulated_stability_boundary(m, Y, 0.8 * tau_c, 1.2 * tau_c)
print(f"simulated boundary: {boundary / tau_c:.4f} tau_c")
