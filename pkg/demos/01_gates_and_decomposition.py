"""Native gate set of a four-level ion and how arbitrary unitaries reduce to it."""

# %%
import numpy as np
from scipy.stats import unitary_group

from ququart.gates import composite_rotation, decompose_single_qudit, ms_matrix, rotation_matrix, sequence_unitary, two_level_rotation

np.set_printoptions(precision=3, suppress=True)

# %% [markdown]
# Every native pulse couples level 0 to one upper level. A pi pulse on 0-2 swaps
# those two populations and leaves levels 1 and 3 alone.

# %%
R = rotation_matrix(2, 0.0, np.pi)
print(np.abs(R) ** 2)

# %% [markdown]
# Rotations between two upper levels are built from three native pulses that
# route through level 0.

# %%
pulses = composite_rotation(1, 3, 0.3, 1.1)
for p in pulses:
    print(p)
err = np.abs(sequence_unitary(pulses) - two_level_rotation(1, 3, 0.3, 1.1)).max()
print(f"composite vs direct: {err:.1e}")

# %% [markdown]
# A Haar-random 4x4 unitary decomposes into a short list of native rotations
# plus a global phase.

# %%
U = unitary_group.rvs(4, random_state=3)
seq, phase = decompose_single_qudit(U, return_phase=True)
print(f"{len(seq)} native pulses, reconstruction error "
      f"{np.abs(U - np.exp(1j * phase) * sequence_unitary(seq)).max():.1e}")

# %% [markdown]
# The entangling gate only touches the {0,1} x {0,1} block of the pair.

# %%
M = ms_matrix(np.pi / 4)
psi = M[:, 0]
print("nonzero amplitudes of MS|00>:", {i: np.round(a, 3) for i, a in enumerate(psi) if abs(a) > 1e-12})
