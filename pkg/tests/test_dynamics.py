import csv
import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from qudit_transfer.dynamics import (
    IntegrationError,
    IntegratorOptions,
    TruncationWarning,
    compiled_rhs,
    evolve_master,
    evolve_unitary,
    fidelity,
    lindblad_rhs,
    rk4_step_matrix,
    rk4_steps,
    segment_hamiltonians,
    state_fidelity,
    write_trajectory_csv,
)
from qudit_transfer.experiments import preset_ideal, preset_paper
from qudit_transfer.hilbert import QUDIT1, QUDIT2, DensityMatrix, basis_ket
from qudit_transfer.model import collapse_operators, pulse_hamiltonian
from qudit_transfer.protocol import (
    CavityInteraction,
    Decouple,
    Schedule,
    compile_schedule,
    ideal_evolve,
    initial_state,
    swap_time,
    target_state,
    uniform_coefficients,
)


def _random_c(seed, d):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=d) + 1j * rng.normal(size=d)
    return c / np.linalg.norm(c)


def _random_rho(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def test_single_swap_master():
    p = preset_ideal(2, 3.0, 10.0, n_max=2)
    sched = Schedule(2, p.g1, p.omega, (CavityInteraction(swap_time(p.g1)),))
    sp = p.space()
    res = evolve_master(sched, p, basis_ket(sp, 1, 0, 0), target=basis_ket(sp, 0, 1, 0))
    expected = basis_ket(sp, 0, 1, 0).density().matrix
    assert np.max(np.abs(res.rho_final.matrix - expected)) < 1e-8


@pytest.mark.filterwarnings("ignore::qudit_transfer.dynamics.TruncationWarning")
def test_master_ideal_d5_uniform():
    p = preset_ideal(5, 2.0, 20.0, n_max=1)
    c = uniform_coefficients(5)
    res = evolve_master(compile_schedule(5, p.g1, p.omega), p, initial_state(5, c, 1),
                        target=target_state(5, c, 1))
    assert res.fidelity == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("d", [3, 4])
def test_unitary_matches_ideal_evolve(d):
    p = preset_ideal(d, 2.5, 18.0, n_max=2)
    sched = compile_schedule(d, p.g1, p.omega)
    psi0 = initial_state(d, _random_c(d, d), 2)
    out = evolve_unitary(sched, p, psi0)
    assert np.max(np.abs(out.amplitudes - ideal_evolve(sched, psi0).amplitudes)) < 1e-8


def test_unitary_matches_master_with_realism():
    d = 3
    p = preset_paper(d, 5.4, 12.8, n_max=2).noiseless()
    c = _random_c(0, d)
    sched = compile_schedule(d, p.g1, p.omega)
    target = target_state(d, c, 2)
    psi = evolve_unitary(sched, p, initial_state(d, c, 2))
    res = evolve_master(sched, p, initial_state(d, c, 2), target=target)
    assert abs(state_fidelity(psi, target) - res.fidelity) < 1e-7
    assert state_fidelity(psi, target) < 1 - 1e-4  # realism really is on


def test_zero_duration_schedule():
    p = preset_paper(3, n_max=1)
    psi0 = initial_state(3, _random_c(4, 3), 1)
    empty = Schedule(3, p.g1, p.omega, ())
    assert np.array_equal(evolve_unitary(empty, p, psi0).amplitudes, psi0.amplitudes)
    res = evolve_master(Schedule(3, p.g1, p.omega, (Decouple(),)), p, psi0, target=psi0)
    assert res.fidelity == pytest.approx(1.0, abs=1e-14)


def test_fidelity_examples():
    p = preset_ideal(3, 1.0, 1.0, n_max=1)
    sp = p.space()
    psi = target_state(3, uniform_coefficients(3), 1)
    assert fidelity(psi.density(), psi) == pytest.approx(1.0)
    mixed = DensityMatrix.maximally_mixed(sp)
    assert fidelity(mixed, psi) == pytest.approx(1 / math.sqrt(sp.total_dim))
    ortho = basis_ket(sp, 1, 1, 1)
    assert fidelity(ortho.density(), psi) == 0.0
    assert state_fidelity(ortho, psi) == 0.0


def test_rk4_step_matrix_matches_rk4_and_expm():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = m + m.conj().T
    y0 = rng.normal(size=6) + 0j
    n, dt = 400, 1e-3
    via_matrix = np.linalg.matrix_power(rk4_step_matrix(h, dt), n) @ y0
    via_loop = rk4_steps(y0, lambda t, y: -1j * h @ y, 0.0, dt, n)
    np.testing.assert_allclose(via_matrix, via_loop, atol=1e-12)
    np.testing.assert_allclose(via_matrix, expm(-1j * h * n * dt) @ y0, atol=1e-8)


def test_compiled_rhs_matches_dense_reference():
    p = preset_paper(3, 4.0, 13.0, n_max=2).scaled_rates(1e3)
    h = pulse_hamiltonian(p, [(QUDIT1, 2, 0.5), (QUDIT2, 2, -0.5)])
    ops = collapse_operators(p)
    rho = _random_rho(3, p.space().total_dim)
    fast = compiled_rhs(h, ops)
    for t in (0.0, 3.3e-9, 1.7e-7):
        ref = lindblad_rhs(h.at(t).matrix, ops)(rho)
        np.testing.assert_allclose(fast(t, rho), ref, atol=1e-9 * np.max(np.abs(ref)))


def test_decoherence_monotone():
    d = 3
    base = preset_paper(d, 5.4, 12.8, n_max=2)
    sched = compile_schedule(d, base.g1, base.omega)
    c = uniform_coefficients(d)
    fids = []
    for alpha in (0.0, 0.5, 1.0, 2.0):
        res = evolve_master(sched, base.scaled_rates(alpha), initial_state(d, c, 2), target=target_state(d, c, 2))
        fids.append(res.fidelity)
    assert all(a > b for a, b in zip(fids, fids[1:])), fids


@pytest.mark.filterwarnings("ignore::qudit_transfer.dynamics.TruncationWarning")
def test_default_target_is_ideal_output():
    d = 3
    p = preset_ideal(d, 3.0, 15.0, n_max=1)
    sched = compile_schedule(d, p.g1, p.omega)
    res = evolve_master(sched, p, initial_state(d, _random_c(8, d), 1))
    assert res.fidelity == pytest.approx(1.0, abs=1e-7)


def test_trajectory_csv(tmp_path):
    d = 2
    p = preset_ideal(d, 3.0, 15.0, n_max=1).with_(kappa=1e5)
    sched = compile_schedule(d, p.g1, p.omega)
    opts = IntegratorOptions(record_trajectory=True, trajectory_every=500)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        res = evolve_master(sched, p, initial_state(d, [0, 1], 1), opts)
    path = write_trajectory_csv(res, p.space(), tmp_path / "traj.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0][0] == "t_s" and rows[0][-1] == "fidelity"
    assert rows[0][1] == "p_0_0_0" and len(rows[0]) == 2 + p.space().total_dim
    times = [float(r[0]) for r in rows[1:]]
    assert times[0] == 0.0 and times == sorted(times)
    assert times[-1] == pytest.approx(sched.total_duration)
    assert float(rows[-1][-1]) == pytest.approx(res.fidelity)


def test_truncation_warning():
    p = preset_ideal(2, 3.0, 15.0, n_max=1)
    sched = Schedule(2, p.g1, p.omega, (CavityInteraction(0.5 * swap_time(p.g1)),))
    with pytest.warns(TruncationWarning):
        evolve_master(sched, p, basis_ket(p.space(), 1, 0, 0))


def test_huge_step_aborts():
    p = preset_paper(3, 5.4, 12.8, n_max=1)
    sched = compile_schedule(3, p.g1, p.omega)
    with pytest.raises(IntegrationError) as err:
        evolve_master(sched, p, initial_state(3, uniform_coefficients(3), 1), IntegratorOptions(dt=1e-6))
    assert "min eigenvalue" in str(err.value)


def test_phase_reference_options():
    d = 3
    ideal = preset_ideal(d, 3.0, 15.0, n_max=1)
    sched = compile_schedule(d, ideal.g1, ideal.omega)
    psi0 = initial_state(d, _random_c(5, d), 1)
    a = evolve_unitary(sched, ideal, psi0)
    b = evolve_unitary(sched, ideal, psi0, IntegratorOptions(phase_reference="global"))
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-12)
    real = preset_paper(d, 3.0, 15.0, n_max=1).noiseless()
    a = evolve_unitary(sched, real, psi0)
    b = evolve_unitary(sched, real, psi0, IntegratorOptions(phase_reference="global"))
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) > 1e-6
    with pytest.raises(ValueError):
        IntegratorOptions(phase_reference="lab")


def test_integrator_options_steps():
    opts = IntegratorOptions()
    assert opts.n_steps(1e-6, 0.0) == 2000
    assert opts.n_steps(1e-6, 1e10) == math.ceil(1e-6 * 50 * 1e10)
    assert IntegratorOptions(dt_scale=0.5).n_steps(1e-6, 0.0) == 4000
    assert opts.n_steps(0.0, 1.0) == 0
    with pytest.raises(ValueError):
        IntegratorOptions(dt=-1.0)


def test_cavity_after_decouple_rejected():
    p = preset_ideal(2, 3.0, 15.0, n_max=1)
    sched = Schedule(2, p.g1, p.omega, (Decouple(), CavityInteraction(1e-9)))
    with pytest.raises(ValueError):
        list(segment_hamiltonians(sched, p))


def test_space_mismatch():
    p = preset_ideal(3, 3.0, 15.0, n_max=2)
    sched = compile_schedule(3, p.g1, p.omega)
    with pytest.raises(ValueError):
        evolve_unitary(sched, p, initial_state(3, uniform_coefficients(3), 1))


def test_master_result_is_physical():
    d = 3
    p = preset_paper(d, 5.4, 12.8, n_max=2)
    sched = compile_schedule(d, p.g1, p.omega)
    res = evolve_master(sched, p, initial_state(d, uniform_coefficients(d), 2))
    rho = res.rho_final
    rho.validate(trace_tol=1e-7, eig_tol=1e-7)
    assert res.diagnostics.trace_drift < 1e-7
    assert res.diagnostics.min_eigenvalue >= -1e-7
    assert res.diagnostics.hermiticity_error < 1e-9
    assert 0.97 < res.fidelity < 1.0


@pytest.mark.filterwarnings("ignore::qudit_transfer.dynamics.TruncationWarning")
@pytest.mark.parametrize("d", [3, 4, 5])
def test_three_paths_agree_without_realism(d):
    p = preset_ideal(d, 2.0, 16.0, n_max=1)
    sched = compile_schedule(d, p.g1, p.omega)
    c = _random_c(100 + d, d)
    psi0, target = initial_state(d, c, 1), target_state(d, c, 1)
    f_ideal = state_fidelity(ideal_evolve(sched, psi0), target)
    f_unitary = state_fidelity(evolve_unitary(sched, p, psi0), target)
    res = evolve_master(sched, p, psi0, target=target)
    assert abs(f_ideal - f_unitary) < 1e-7
    assert abs(f_unitary - res.fidelity) < 1e-7
    assert abs(f_ideal - res.fidelity) < 1e-7
    assert res.diagnostics.hermiticity_error < 1e-9
