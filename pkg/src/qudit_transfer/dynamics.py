"""Fixed-step RK4 integration of the schedule, pure-state and Lindblad.

Pure states use a Python RK4 loop (or, for static segments, the exact RK4
step matrix raised to the step count). The Lindblad equation runs in the
compiled loop of :mod:`kernels` on the matrix form of rho.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import kernels
from .hilbert import (
    QUDIT1,
    QUDIT2,
    DensityMatrix,
    HilbertSpace,
    Operator,
    StateVector,
)
from .model import (
    ModelParams,
    SegmentHamiltonian,
    cavity_coupling_hamiltonian,
    collapse_operators,
    pulse_hamiltonian,
)
from .protocol import CavityInteraction, Decouple, PulsePair, Schedule, SinglePulse, ideal_evolve

TRACE_ABORT = 1e-6
EIG_ABORT = -1e-6
TRUNCATION_WARN = 1e-3


class IntegrationError(RuntimeError):
    def __init__(self, message: str, diagnostics: "Diagnostics"):
        super().__init__(f"{message}\n{diagnostics.report()}")
        self.diagnostics = diagnostics


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    """RK4 step control.

    By default each segment of length T is split into steps no longer than
    ``min(T / min_steps, 1 / (steps_per_radian * f_max))``, where ``f_max`` is
    the largest coupling or detuning (rad/s) active in that segment.
    ``dt_scale`` shrinks that step uniformly (0.5 halves it); ``dt`` overrides
    the rule with a fixed upper bound.
    """

    dt: float | None = None
    dt_scale: float = 1.0
    min_steps: int = 2000
    steps_per_radian: float = 50.0
    record_trajectory: bool = False
    trajectory_every: int = 100
    phase_reference: str = "segment"
    check_eigenvalues: bool = True

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt_scale <= 0:
            raise ValueError("dt_scale must be positive")
        if self.phase_reference not in ("segment", "global"):
            raise ValueError("phase_reference must be 'segment' or 'global'")

    def n_steps(self, duration: float, f_max: float) -> int:
        if duration <= 0:
            return 0
        if self.dt is not None:
            dt = self.dt
        else:
            dt = duration / self.min_steps
            if f_max > 0:
                dt = min(dt, 1.0 / (self.steps_per_radian * f_max))
        return max(1, math.ceil(duration / (dt * self.dt_scale) - 1e-9))


@dataclass
class Diagnostics:
    trace_drift: float = 0.0
    hermiticity_error: float = 0.0
    min_eigenvalue: float = 1.0
    peak_two_photon_population: float = 0.0
    peak_top_fock_population: float = 0.0
    norm_drift: float = 0.0
    steps: int = 0

    def report(self) -> str:
        return (
            f"trace drift {self.trace_drift:.3e}, hermiticity error {self.hermiticity_error:.3e}, "
            f"min eigenvalue {self.min_eigenvalue:.3e}, peak n>=2 population "
            f"{self.peak_two_photon_population:.3e}, peak top-Fock population "
            f"{self.peak_top_fock_population:.3e}, norm drift {self.norm_drift:.3e}, steps {self.steps}"
        )


@dataclass
class TrajectorySample:
    t: float
    populations: np.ndarray
    fidelity: float


@dataclass
class EvolutionResult:
    rho_final: DensityMatrix
    fidelity: float
    diagnostics: Diagnostics
    trajectory: list[TrajectorySample] = field(default_factory=list)


# --------------------------------------------------------------------------
# Segment -> Hamiltonian


def segment_hamiltonians(schedule: Schedule, p: ModelParams) -> Iterator[tuple[float, SegmentHamiltonian | None]]:
    """Yield ``(duration, H)`` per segment; ``H`` is None for zero-length markers."""
    if schedule.d != p.d:
        raise ValueError(f"schedule d={schedule.d} does not match params d={p.d}")
    space = p.space()
    coupled = True
    after_decouple = p.with_(include_cavity_during_pulse=False)
    for seg in schedule.segments:
        if isinstance(seg, Decouple):
            coupled = False
            yield seg.duration, None
        elif isinstance(seg, CavityInteraction):
            if not coupled:
                raise ValueError("cavity interaction after the cavity was decoupled")
            yield seg.duration, cavity_coupling_hamiltonian(p, space).merged()
        elif isinstance(seg, PulsePair):
            targets = [(QUDIT1, seg.level, seg.phase1), (QUDIT2, seg.level, seg.phase2)]
            yield seg.duration, pulse_hamiltonian(p if coupled else after_decouple, targets, space).merged()
        elif isinstance(seg, SinglePulse):
            targets = [(seg.qudit, seg.level, seg.phase)]
            yield seg.duration, pulse_hamiltonian(p if coupled else after_decouple, targets, space).merged()
        else:
            raise TypeError(f"unknown segment {seg!r}")


# --------------------------------------------------------------------------
# RK4 core


def rk4_steps(y: np.ndarray, rhs: Callable[[float, np.ndarray], np.ndarray], t0: float, dt: float,
              n: int, callback: Callable[[int, float, np.ndarray], None] | None = None) -> np.ndarray:
    """Advance ``y`` by ``n`` classical RK4 steps of size ``dt`` starting at ``t0``."""
    half = 0.5 * dt
    for i in range(n):
        t = t0 + i * dt
        k1 = rhs(t, y)
        k2 = rhs(t + half, y + half * k1)
        k3 = rhs(t + half, y + half * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if callback is not None:
            callback(i + 1, t + dt, y)
    return y


def _generator(terms_static, terms_rot):
    """Return rhs(t, y) = (S0 + sum_k e^{i D_k t} A_k + e^{-i D_k t} B_k) y."""
    if not terms_rot:
        return lambda t, y: terms_static @ y

    def rhs(t, y):
        out = terms_static @ y
        for a, b, delta in terms_rot:
            ph = complex(math.cos(delta * t), math.sin(delta * t))
            out += ph * (a @ y) + ph.conjugate() * (b @ y)
        return out

    return rhs


# --------------------------------------------------------------------------
# Pure states


def _schrodinger_generator(h: SegmentHamiltonian):
    static = -1j * h.static.matrix
    rot = [(-1j * op.matrix, -1j * op.matrix.conj().T, delta) for op, delta in h.rotating_terms]
    return _generator(static, rot)


def rk4_step_matrix(h: np.ndarray, dt: float) -> np.ndarray:
    """One RK4 step of dpsi/dt = -i H psi for static H: sum_{k<=4} (-i H dt)^k / k!."""
    a = -1j * dt * h
    step = np.eye(h.shape[0], dtype=complex)
    term = step
    for k in range(1, 5):
        term = term @ a / k
        step = step + term
    return step


def _propagate_pure(schedule: Schedule, p: ModelParams, y: np.ndarray, opts: IntegratorOptions) -> np.ndarray:
    t_abs = 0.0
    for duration, h in segment_hamiltonians(schedule, p):
        n = opts.n_steps(duration, h.max_frequency() if h is not None else 0.0)
        if h is not None and n:
            if h.rotating_terms:
                rhs = _schrodinger_generator(h)
                t0 = t_abs if opts.phase_reference == "global" else 0.0
                y = rk4_steps(y, rhs, t0, duration / n, n)
            else:
                # n identical RK4 steps of a static generator
                y = np.linalg.matrix_power(rk4_step_matrix(h.static.matrix, duration / n), n) @ y
        t_abs += duration
    return y


def evolve_unitary(schedule: Schedule, p: ModelParams, psi0: StateVector,
                   opts: IntegratorOptions = IntegratorOptions()) -> StateVector:
    """Schrodinger propagation of ``psi0`` through the schedule."""
    if psi0.space != p.space():
        raise ValueError(f"state space {psi0.space.dims} inconsistent with params")
    y = _propagate_pure(schedule, p, np.array(psi0.amplitudes), opts)
    drift = abs(np.linalg.norm(y) - 1.0)
    if drift > 1e-8:
        raise IntegrationError("norm not preserved", Diagnostics(norm_drift=drift))
    return StateVector(psi0.space, y, normalize=False)


def evolve_unitary_batch(schedule: Schedule, p: ModelParams, states: Sequence[StateVector],
                         opts: IntegratorOptions = IntegratorOptions()) -> list[StateVector]:
    """Propagate many states at once (one RK4 pass over a column matrix)."""
    space = p.space()
    cols = np.stack([s.amplitudes for s in states], axis=1)
    out = _propagate_pure(schedule, p, cols, opts)
    drift = float(np.max(np.abs(np.linalg.norm(out, axis=0) - 1.0)))
    if drift > 1e-8:
        raise IntegrationError("norm not preserved", Diagnostics(norm_drift=drift))
    return [StateVector(space, out[:, k], normalize=False) for k in range(out.shape[1])]


# --------------------------------------------------------------------------
# Master equation


@dataclass(frozen=True)
class PackedHamiltonian:
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    term: np.ndarray
    conj: np.ndarray
    detunings: np.ndarray


def pack_hamiltonian(h: SegmentHamiltonian) -> PackedHamiltonian:
    """COO triplets of H(t), each tagged with its rotating term and conjugation."""
    rows, cols, vals, term, conj = [], [], [], [], []

    def add(m, k, c):
        r, cc = np.nonzero(m)
        rows.append(r)
        cols.append(cc)
        vals.append(m[r, cc])
        term.append(np.full(r.size, k))
        conj.append(np.full(r.size, c))

    add(h.static.matrix, -1, 0)
    for k, (op, _) in enumerate(h.rotating_terms):
        add(op.matrix, k, 0)
        add(op.matrix.conj().T, k, 1)
    return PackedHamiltonian(
        np.concatenate(rows).astype(np.int64),
        np.concatenate(cols).astype(np.int64),
        np.concatenate(vals).astype(complex),
        np.concatenate(term).astype(np.int64),
        np.concatenate(conj).astype(np.int64),
        np.array([delta for _, delta in h.rotating_terms], dtype=float),
    )


@dataclass(frozen=True)
class PackedJumps:
    dst_r: np.ndarray
    dst_c: np.ndarray
    src_r: np.ndarray
    src_c: np.ndarray
    values: np.ndarray
    kdiag: np.ndarray


def pack_jumps(ops: Sequence[Operator], n: int) -> PackedJumps:
    """Flatten sum_m L rho L^dag into elementwise contributions.

    Requires every ``L^dag L`` to be diagonal (true for ladder, number and
    projector operators).
    """
    parts = [[] for _ in range(5)]
    kdiag = np.zeros(n, dtype=complex)
    for op in ops:
        l = op.matrix
        if not np.any(l):
            continue
        ldl = l.conj().T @ l
        if np.any(np.abs(ldl - np.diag(np.diag(ldl))) > 1e-14):
            raise ValueError("collapse operator with non-diagonal L^dag L is not supported")
        kdiag += np.diag(ldl)
        dst, src = np.nonzero(l)
        coef = l[dst, src]
        i, j = np.meshgrid(np.arange(dst.size), np.arange(dst.size), indexing="ij")
        i, j = i.ravel(), j.ravel()
        for bucket, arr in zip(parts, (dst[i], dst[j], src[i], src[j], coef[i] * coef[j].conj())):
            bucket.append(arr)
    if not parts[0]:
        empty = np.zeros(0, dtype=np.int64)
        return PackedJumps(empty, empty, empty, empty, np.zeros(0, dtype=complex), kdiag)
    dr, dc, sr, sc, v = (np.concatenate(b) for b in parts)
    return PackedJumps(dr.astype(np.int64), dc.astype(np.int64), sr.astype(np.int64),
                       sc.astype(np.int64), v.astype(complex), kdiag)


def lindblad_rhs(h: np.ndarray, ops: Sequence[Operator]) -> Callable[[np.ndarray], np.ndarray]:
    """Dense reference right-hand side for a fixed Hamiltonian matrix."""

    def rhs(rho):
        out = -1j * (h @ rho - rho @ h)
        for op in ops:
            l = op.matrix
            ldl = l.conj().T @ l
            out = out + l @ rho @ l.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
        return out

    return rhs


def compiled_rhs(h: SegmentHamiltonian, ops: Sequence[Operator]) -> Callable[[float, np.ndarray], np.ndarray]:
    """The compiled kernel's right-hand side as a plain function of (t, rho)."""
    n = h.space.total_dim
    ph, jp = pack_hamiltonian(h), pack_jumps(ops, n)

    def rhs(t, rho):
        rho = np.ascontiguousarray(rho, dtype=complex)
        out, x = np.empty_like(rho), np.empty_like(rho)
        kernels.lindblad_rhs(t, rho, out, x, ph.rows, ph.cols, ph.values, ph.term, ph.conj,
                             ph.detunings, np.empty(ph.detunings.size, dtype=complex), jp.kdiag,
                             jp.dst_r, jp.dst_c, jp.src_r, jp.src_c, jp.values)
        return out

    return rhs


def _boundary_check(rho: np.ndarray, diag: Diagnostics, opts: IntegratorOptions):
    diag.hermiticity_error = max(diag.hermiticity_error, float(np.max(np.abs(rho - rho.conj().T))))
    if opts.check_eigenvalues:
        ev = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        diag.min_eigenvalue = min(diag.min_eigenvalue, ev)
        if ev < EIG_ABORT:
            raise IntegrationError(f"minimum eigenvalue {ev:.3e} below {EIG_ABORT}", diag)


def _sample(t: float, rho: np.ndarray, psi_id: np.ndarray) -> TrajectorySample:
    val = float(np.real(np.vdot(psi_id, rho @ psi_id)))
    return TrajectorySample(t, np.real(np.diag(rho)).copy(), math.sqrt(min(max(val, 0.0), 1.0)))


def evolve_master(schedule: Schedule, p: ModelParams, rho0: DensityMatrix | StateVector,
                  opts: IntegratorOptions = IntegratorOptions(),
                  target: StateVector | None = None) -> EvolutionResult:
    """Integrate the Lindblad equation through every segment of ``schedule``.

    Collapse operators act during all segments. The fidelity is measured
    against ``target``; when omitted, the target is the closed-form ideal
    output of the dominant eigenvector of ``rho0``.
    """
    space = p.space()
    if isinstance(rho0, StateVector):
        rho0 = rho0.density()
    if rho0.space != space:
        raise ValueError(f"initial state space {rho0.space.dims} inconsistent with params")
    rho0.validate()
    if target is None:
        _, v = np.linalg.eigh(rho0.matrix)
        target = ideal_evolve(schedule, StateVector(space, v[:, -1]))
    psi_id = np.array(target.amplitudes)

    labels = np.array(space.labels())
    two_idx = np.flatnonzero(labels[:, -1] >= 2).astype(np.int64)
    top_idx = np.flatnonzero(labels[:, -1] == space.n_max).astype(np.int64)
    jumps = pack_jumps(collapse_operators(p, space), space.total_dim)
    stats = np.zeros(4)
    diag = Diagnostics()
    trajectory: list[TrajectorySample] = []

    rho = np.array(rho0.matrix, dtype=complex)
    if opts.record_trajectory:
        trajectory.append(_sample(0.0, rho, psi_id))
    _boundary_check(rho, diag, opts)

    t_abs = 0.0
    for duration, h in segment_hamiltonians(schedule, p):
        if h is None or duration <= 0:
            t_abs += max(duration, 0.0)
            continue
        nsteps = opts.n_steps(duration, h.max_frequency())
        dt = duration / nsteps
        packed = pack_hamiltonian(h)
        t_seg0 = t_abs if opts.phase_reference == "global" else 0.0
        chunk = opts.trajectory_every if opts.record_trajectory else nsteps
        done = 0
        while done < nsteps:
            todo = min(chunk, nsteps - done)
            ran = kernels.rk4_lindblad(
                rho, t_seg0 + done * dt, dt, todo, packed.rows, packed.cols, packed.values, packed.term,
                packed.conj, packed.detunings, jumps.kdiag, jumps.dst_r, jumps.dst_c, jumps.src_r,
                jumps.src_c, jumps.values, two_idx, top_idx, TRACE_ABORT, stats,
            )
            done += ran
            _copy_stats(stats, diag)
            if ran < todo:
                raise IntegrationError(f"trace drift {diag.trace_drift:.3e} exceeds {TRACE_ABORT}", diag)
            if opts.record_trajectory:
                trajectory.append(_sample(t_abs + done * dt, rho, psi_id))
        _boundary_check(rho, diag, opts)
        t_abs += duration

    if diag.peak_top_fock_population > TRUNCATION_WARN:
        warnings.warn(
            f"top Fock level population {diag.peak_top_fock_population:.2e} exceeds {TRUNCATION_WARN}; "
            "increase n_max",
            TruncationWarning,
            stacklevel=2,
        )
    rho_final = DensityMatrix(space, 0.5 * (rho + rho.conj().T))
    return EvolutionResult(rho_final, fidelity(rho_final, target), diag, trajectory)


def _copy_stats(stats: np.ndarray, diag: Diagnostics):
    diag.trace_drift = float(stats[kernels.STAT_TRACE])
    diag.peak_two_photon_population = float(stats[kernels.STAT_TWO_PHOTON])
    diag.peak_top_fock_population = float(stats[kernels.STAT_TOP])
    diag.steps = int(stats[kernels.STAT_STEPS])


def fidelity(rho: DensityMatrix, psi_id: StateVector) -> float:
    """sqrt(<psi_id|rho|psi_id>)."""
    if rho.space != psi_id.space:
        raise ValueError("density matrix and target live in different spaces")
    psi = psi_id.amplitudes
    val = float(np.real(np.vdot(psi, rho.matrix @ psi)))
    if val < -1e-8:
        raise ValueError(f"negative expectation {val:.3e}; rho is not a valid state")
    return math.sqrt(min(max(val, 0.0), 1.0))


def state_fidelity(psi: StateVector, psi_id: StateVector) -> float:
    """Pure-state specialization: |<psi_id|psi>|."""
    return min(abs(psi_id.overlap(psi)), 1.0)


def write_trajectory_csv(result: EvolutionResult, space: HilbertSpace, path) -> Path:
    """Dump ``t_s``, one population column per basis label, then ``fidelity``."""
    path = Path(path)
    labels = ["p_" + "_".join(str(x) for x in lab) for lab in space.labels()]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", *labels, "fidelity"])
        for s in result.trajectory:
            w.writerow([repr(s.t), *(repr(float(x)) for x in s.populations), repr(s.fidelity)])
    return path
