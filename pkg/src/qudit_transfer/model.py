"""Segment Hamiltonians and collapse operators in the interaction picture.

Every time-dependent Hamiltonian used by the protocol has the form

    H(t) = H_static + sum_k (A_k exp(i * Delta_k * t) + h.c.)

where each ``A_k`` is stored as its non-Hermitian half. Off-resonant
couplings are stored as *raising* halves (qudit |upper><lower| component),
so that ``Delta_k`` is the upper-minus-lower transition frequency minus the
carrier frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable

import numpy as np

from .hilbert import (
    CAVITY,
    QUDIT1,
    QUDIT2,
    HilbertSpace,
    Operator,
    annihilation,
    composite_space,
    embed,
    projector,
    transition_raise,
)

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)

QUDITS = (QUDIT1, QUDIT2)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-qudit + cavity device.

    Frequencies and rates are angular (rad/s) or inverse seconds. ``anharm[k]``
    is the step omega_{k,k+1} - omega_{k+1,k+2} between consecutive transition
    frequencies, so ``anharm[0]`` detunes the |1>-|2> transition from the
    |0>-|1> transition.
    """

    d: int
    g1: float
    g2: float
    omega: float
    anharm: tuple[float, ...] = ()
    kappa: float = 0.0
    gamma_relax: tuple[float, ...] = ()
    gamma_phi: tuple[float, ...] = ()
    omega_c: float = 0.0
    n_max: int = 3
    include_eps1: bool = False
    include_eps_l: bool = False
    include_cavity_during_pulse: bool = False
    rotating_phases: bool = True

    def __post_init__(self):
        object.__setattr__(self, "anharm", tuple(float(x) for x in self.anharm))
        rel = tuple(float(x) for x in self.gamma_relax) or (0.0,) * (self.d - 1)
        phi = tuple(float(x) for x in self.gamma_phi) or (0.0,) * (self.d - 1)
        object.__setattr__(self, "gamma_relax", rel)
        object.__setattr__(self, "gamma_phi", phi)
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if len(rel) != self.d - 1 or len(phi) != self.d - 1:
            raise ValueError(f"gamma_relax and gamma_phi need {self.d - 1} entries each")
        rates = (self.kappa, self.g1, self.g2, self.omega, self.omega_c) + rel + phi
        if any(r < 0 for r in rates):
            raise ValueError("couplings, Rabi frequency and rates must be non-negative")
        if len(self.anharm) not in (0, self.d - 2) or (self.needs_anharm and len(self.anharm) != self.d - 2):
            raise ValueError(
                f"anharm needs exactly {self.d - 2} entries for d={self.d} when spurious couplings "
                "are enabled; values beyond the known transmon steps are not extrapolated"
            )
        if any(a <= 0 for a in self.anharm):
            raise ValueError("anharmonicity steps must be positive for a narrowing ladder")

    @property
    def needs_anharm(self) -> bool:
        return self.include_eps1 or self.include_eps_l

    @property
    def couplings(self) -> tuple[float, float]:
        return (self.g1, self.g2)

    @property
    def realism(self) -> bool:
        return self.include_eps1 or self.include_eps_l or self.include_cavity_during_pulse

    @property
    def quality_factor(self) -> float:
        """Cavity Q = omega_c / kappa (diagnostic only)."""
        return self.omega_c / self.kappa if self.kappa > 0 else math.inf

    def space(self) -> HilbertSpace:
        return composite_space(self.d, self.n_max)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def ideal(self) -> "ModelParams":
        return replace(self, include_eps1=False, include_eps_l=False, include_cavity_during_pulse=False)

    def noiseless(self) -> "ModelParams":
        return replace(self, kappa=0.0, gamma_relax=(0.0,) * (self.d - 1), gamma_phi=(0.0,) * (self.d - 1))

    def scaled_rates(self, factor: float) -> "ModelParams":
        return replace(
            self,
            kappa=self.kappa * factor,
            gamma_relax=tuple(g * factor for g in self.gamma_relax),
            gamma_phi=tuple(g * factor for g in self.gamma_phi),
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown ModelParams fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class SegmentHamiltonian:
    """``static + sum_k (op_k e^{i detuning_k t} + h.c.)``, t = 0 at segment start."""

    static: Operator
    rotating_terms: tuple[tuple[Operator, float], ...] = field(default=())

    @property
    def space(self) -> HilbertSpace:
        return self.static.space

    def __add__(self, other: "SegmentHamiltonian") -> "SegmentHamiltonian":
        return SegmentHamiltonian(self.static + other.static, self.rotating_terms + other.rotating_terms)

    def at(self, t: float) -> Operator:
        m = self.static.matrix.copy()
        for op, delta in self.rotating_terms:
            half = op.matrix * np.exp(1j * delta * t)
            m += half + half.conj().T
        return Operator(self.space, m)

    def max_frequency(self) -> float:
        """Largest angular frequency scale: matrix-element magnitudes and detunings."""
        scales = [float(np.max(np.abs(self.static.matrix), initial=0.0))]
        for op, delta in self.rotating_terms:
            scales.append(float(np.max(np.abs(op.matrix), initial=0.0)))
            scales.append(abs(delta))
        return max(scales)

    def merged(self) -> "SegmentHamiltonian":
        """Combine rotating terms sharing a detuning."""
        grouped: dict[float, np.ndarray] = {}
        for op, delta in self.rotating_terms:
            grouped[delta] = grouped.get(delta, 0) + op.matrix
        terms = tuple((Operator(self.space, m), delta) for delta, m in grouped.items())
        return SegmentHamiltonian(self.static, terms)


def _zero(space: HilbertSpace) -> Operator:
    return Operator(space, np.zeros((space.total_dim,) * 2))


def _check_space(p: ModelParams, space: HilbertSpace):
    if space.dims != (p.d, p.d, p.n_max + 1):
        raise ValueError(f"space {space.dims} inconsistent with d={p.d}, n_max={p.n_max}")


def cavity_coupling_hamiltonian(p: ModelParams, space: HilbertSpace | None = None) -> SegmentHamiltonian:
    """Resonant cavity coupling to |0>-|1> of both qudits, plus the |1>-|2> leak."""
    space = space or p.space()
    _check_space(p, space)
    a = embed(annihilation(p.n_max), CAVITY, space)
    static = _zero(space)
    for site, g in zip(QUDITS, p.couplings):
        half = g * (a @ embed(transition_raise(p.d, 1), site, space))
        static = static + half + half.adjoint()

    rotating = []
    if p.include_eps1 and p.d >= 3:
        leak = _zero(space)
        for site, g in zip(QUDITS, p.couplings):
            leak = leak + (SQRT2 * g) * (a @ embed(transition_raise(p.d, 2), site, space))
        if p.rotating_phases:
            rotating.append((leak, -p.anharm[0]))
        else:
            static = static + leak + leak.adjoint()
    return SegmentHamiltonian(static, tuple(rotating))


def pulse_hamiltonian(p: ModelParams, targets: Iterable[tuple[int, int, float]],
                      space: HilbertSpace | None = None) -> SegmentHamiltonian:
    """Resonant drive of |l-1>-|l> on each target ``(qudit site, l, phase)``.

    With ``include_eps_l`` the same carrier also drives |l-2>-|l-1> (matrix
    element Omega/sqrt2) and |l>-|l+1> (matrix element sqrt2*Omega) off
    resonance; with ``include_cavity_during_pulse`` the full cavity coupling
    is superposed.
    """
    space = space or p.space()
    _check_space(p, space)
    targets = list(targets)
    sites = [t[0] for t in targets]
    if len(set(sites)) != len(sites):
        raise ValueError(f"at most one pulse per qudit per segment, got sites {sites}")

    static = _zero(space)
    rotating = []
    for site, l, phase in targets:
        if site not in QUDITS:
            raise ValueError(f"pulse target must be a qudit site (0 or 1), got {site}")
        if not 1 <= l <= p.d - 1:
            raise ValueError(f"pulse level l={l} out of range 1..{p.d - 1}")
        lower = np.exp(1j * phase) * embed(transition_raise(p.d, l).adjoint(), site, space)
        static = static + p.omega * (lower + lower.adjoint())
        if not p.include_eps_l:
            continue
        # raising halves carry e^{-i phase}
        spurious = []
        if l >= 2:
            up = embed(transition_raise(p.d, l - 1), site, space)
            spurious.append(((p.omega / SQRT2) * np.exp(-1j * phase) * up, p.anharm[l - 2]))
        if l + 1 <= p.d - 1:
            up = embed(transition_raise(p.d, l + 1), site, space)
            spurious.append(((SQRT2 * p.omega) * np.exp(-1j * phase) * up, -p.anharm[l - 1]))
        for op, delta in spurious:
            if p.rotating_phases:
                rotating.append((op, delta))
            else:
                static = static + op + op.adjoint()

    h = SegmentHamiltonian(static, tuple(rotating))
    if p.include_cavity_during_pulse:
        h = h + cavity_coupling_hamiltonian(p, space)
    return h


def collapse_operators(p: ModelParams, space: HilbertSpace | None = None) -> list[Operator]:
    """sqrt(kappa) a, then per qudit sqrt(gamma_relax) |l-1><l| and sqrt(gamma_phi) |l><l|."""
    space = space or p.space()
    _check_space(p, space)
    ops = [math.sqrt(p.kappa) * embed(annihilation(p.n_max), CAVITY, space)]
    for site in QUDITS:
        for l in range(1, p.d):
            ops.append(math.sqrt(p.gamma_relax[l - 1]) * embed(transition_raise(p.d, l).adjoint(), site, space))
            ops.append(math.sqrt(p.gamma_phi[l - 1]) * embed(projector(p.d, l), site, space))
    return ops


def excitation_number(space: HilbertSpace) -> Operator:
    """a^dag a + sum_j sum_l l |l><l|_j."""
    a = embed(annihilation(space.n_max), CAVITY, space)
    n = a.adjoint() @ a
    levels = np.diag(np.arange(space.d, dtype=float))
    for site in QUDITS:
        n = n + embed(Operator(HilbertSpace((space.d,)), levels), site, space)
    return n


def mhz(value_over_2pi: float) -> float:
    """Convert a frequency quoted as X/2pi in MHz to rad/s."""
    return TWO_PI * value_over_2pi * 1e6


def to_mhz(angular: float) -> float:
    return angular / (TWO_PI * 1e6)


def per_us(lifetime_us: float) -> float:
    return 1.0 / (lifetime_us * 1e-6)
