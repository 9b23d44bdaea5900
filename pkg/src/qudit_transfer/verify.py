"""Fast oracle and invariant checks, runnable without pytest (``qudit-transfer verify``)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import evolve_master, evolve_unitary_batch, state_fidelity
from .experiments import preset_ideal
from .hilbert import basis_ket, composite_space
from .model import cavity_coupling_hamiltonian, mhz
from .protocol import (
    cavity_swap_map,
    compile_schedule,
    ideal_evolve,
    initial_state,
    swap_time,
    target_state,
)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_coefficients(rng: np.random.Generator, d: int, real: bool = False) -> np.ndarray:
    c = rng.normal(size=d) + (0 if real else 1j * rng.normal(size=d))
    return c / np.linalg.norm(c)


def single_excitation_block(g: float, t: float) -> np.ndarray:
    """exp(-i H t) of the resonant cavity coupling, restricted to the swap basis."""
    space = composite_space(2, 1)
    p = preset_ideal(2, 1.0, 1.0, n_max=1).with_(g1=g, g2=g)
    h = cavity_coupling_hamiltonian(p, space).static.matrix
    u = expm(-1j * h * t)
    idx = [space.index(1, 0, 0), space.index(0, 0, 1), space.index(0, 1, 0)]
    return u[np.ix_(idx, idx)]


def check_swap_oracle(n: int = 20, seed: int = 7) -> Check:
    rng = np.random.default_rng(seed)
    g = mhz(3.0)
    err = 0.0
    for t in rng.uniform(0, 4 * swap_time(g), size=n):
        err = max(err, float(np.max(np.abs(cavity_swap_map(t, g) - single_excitation_block(g, t)))))
    swap = cavity_swap_map(swap_time(g), g) @ np.array([1, 0, 0])
    err_swap = float(np.max(np.abs(swap - np.array([0, 0, -1]))))
    ok = err < 1e-10 and err_swap < 1e-10
    return Check("cavity swap oracle", ok, f"max |closed form - expm| = {err:.2e}, swap error = {err_swap:.2e}")


def check_ideal_exactness(dims=(2, 3, 4, 5, 6), n_states: int = 100, seed: int = 11) -> Check:
    rng = np.random.default_rng(seed)
    worst_f, worst_diff = 1.0, 0.0
    anharm = {6: (275.0, 309.0, 358.0, 400.0)}
    for d in dims:
        p = preset_ideal(d, 2.0, 20.0, anharm_mhz=anharm.get(d))
        sched = compile_schedule(d, p.g1, p.omega)
        coeffs = [random_coefficients(rng, d) for _ in range(n_states)]
        outs = evolve_unitary_batch(sched, p, [initial_state(d, c, p.n_max) for c in coeffs])
        for c, out in zip(coeffs, outs):
            worst_f = min(worst_f, state_fidelity(out, target_state(d, c, p.n_max)))
            ref = ideal_evolve(sched, initial_state(d, c, p.n_max))
            worst_diff = max(worst_diff, float(np.max(np.abs(out.amplitudes - ref.amplitudes))))
    ok = worst_f >= 1 - 1e-8 and worst_diff < 1e-7
    return Check("ideal protocol exactness", ok, f"min fidelity {worst_f:.12f}, max |RK4 - closed form| {worst_diff:.2e}")


def check_sign_pattern(seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    d = 5
    c = random_coefficients(rng, d, real=True)
    p = preset_ideal(d, 2.0, 20.0)
    sched = compile_schedule(d, p.g1, p.omega)
    out = evolve_unitary_batch(sched, p, [initial_state(d, c, p.n_max)])[0]
    expected = target_state(d, c, p.n_max)
    err = float(np.max(np.abs(out.amplitudes - expected.amplitudes)))
    return Check("d=5 output signs", err < 1e-8, f"max amplitude error {err:.2e}")


def check_master_matches_unitary(seed: int = 5) -> Check:
    rng = np.random.default_rng(seed)
    d = 3
    c = random_coefficients(rng, d)
    p = preset_ideal(d, 4.0, 20.0, n_max=2)
    sched = compile_schedule(d, p.g1, p.omega)
    res = evolve_master(sched, p, initial_state(d, c, p.n_max), target=target_state(d, c, p.n_max))
    err = abs(res.fidelity - 1.0)
    return Check("noiseless master equation", err < 1e-7, f"|F - 1| = {err:.2e}")


def check_vacuum_input() -> Check:
    d = 4
    p = preset_ideal(d, 2.0, 20.0, n_max=1)
    sched = compile_schedule(d, p.g1, p.omega)
    out = ideal_evolve(sched, basis_ket(p.space(), 0, 0, 0))
    amp = abs(out.amplitude(0, d - 1, 0))
    return Check("ground-state input", math.isclose(amp, 1.0, abs_tol=1e-12), f"|amp on |d-1>_2| = {amp:.15f}")


ALL_CHECKS = (check_swap_oracle, check_ideal_exactness, check_sign_pattern,
              check_master_matches_unitary, check_vacuum_input)


def run_checks() -> list[Check]:
    return [fn() for fn in ALL_CHECKS]
