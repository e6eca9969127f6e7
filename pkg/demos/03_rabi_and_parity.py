"""Simulated calibration data: a dephased Rabi flop and a Bell-state parity scan."""

# %%
import numpy as np

from ququart.experiments import bell_experiment, rabi_fidelity, rabi_scan, synthetic_parity_state, true_first_maximum
from ququart.fitting import fit_damped_sine
from ququart.ms import MotionState, params_for_duration
from ququart.noise import NoiseModel

OMEGA = 2 * np.pi * 25e3

# %% [markdown]
# Drive 0 -> 2 on ion 0 with laser dephasing and read out with 300 shots per point.

# %%
noise = NoiseModel(laser_dephasing_rate=3e3)
scan = rabi_scan(0, 2, np.linspace(0, 100e-6, 41), 300, noise, seed=11, omega_rabi=OMEGA)
fit = fit_damped_sine(scan, "P2", n_bootstrap=200, seed=1)
est = rabi_fidelity(fit)
for name, value in fit.params.items():
    print(f"{name:>10} = {value:.6g} +/- {fit.errors[name]:.2g}")
print(f"fitted first maximum {est.value:.4f} +/- {est.stderr:.4f}, "
      f"model value {true_first_maximum(2, OMEGA, noise)[1]:.4f}")

# %% [markdown]
# The neighbouring ion sees a weak copy of the drive through crosstalk.

# %%
print("neighbour peak population:", scan["neighbour_P2"].max().round(4))

# %% [markdown]
# Parity scan on a state with known coherence A=0.62, then the thermal gate itself.

# %%
phis = np.linspace(0, np.pi, 20, endpoint=False)
res = bell_experiment(phis, 300, NoiseModel.noiseless(), 4, state=synthetic_parity_state(0.62, 0.4), n_bootstrap=100)
print(f"A={res['fit']['A']:.3f}  F={res['fidelity'].value:.3f} +/- {res['fidelity'].stderr:.3f}")

params = params_for_duration(310e-6)
res = bell_experiment(phis, 0, params=params, motion=MotionState.thermal(0.079))
print(f"thermal gate, exact populations: F={res['fidelity'].value:.6f}")
