"""Compile a four-qubit GHZ circuit onto two ions carrying two qubits each."""

# %%
from ququart.gates import MSGate
from ququart.transpiler import QubitCircuit, simulate, transpile_circuit

circ = QubitCircuit(4).add("h", 0).add("cnot", 0, 1).add("cnot", 1, 2).add("cnot", 2, 3)
native = transpile_circuit(circ)
meta = native.metadata
print(f"{meta['native_op_count']} native ops: {meta['rotation_count']} rotations, {meta['ms_count']} MS pulses")
print("ops per source gate:", meta["ops_per_gate"])
print(f"equivalence residual {meta['residual']:.1e}, wall time {meta['wall_time'] * 1e3:.2f} ms")

# %% [markdown]
# Only the CNOT between qubits 1 and 2 crosses ions, so only it needs MS pulses.

# %%
for op in native.ops:
    tag = "MS " if isinstance(op, MSGate) else "rot"
    print(tag, op)

# %%
psi = simulate(native)
print({f"{i:04b}": round(abs(a) ** 2, 6) for i, a in enumerate(psi) if abs(a) > 1e-9})
