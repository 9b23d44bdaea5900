"""Pulse/cavity schedule for moving a d-level state from qudit 1 to qudit 2.

The compiled schedule is d - 1 rounds of "ladder pulses, then a cavity swap"
followed by a chain of pulses on qudit 2 that undoes the level reversal
signs. ``ideal_evolve`` propagates a state through a schedule using only the
closed-form cavity and pulse maps, and serves as the analytic reference for
the numerical integrators.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .hilbert import QUDIT1, QUDIT2, HilbertSpace, StateVector, composite_space

SQRT2 = math.sqrt(2.0)
MANIFOLD_TOL = 1e-12


@dataclass(frozen=True)
class CavityInteraction:
    duration: float


@dataclass(frozen=True)
class PulsePair:
    """Simultaneous resonant pulses on |l-1>-|l> of both qudits."""

    level: int
    phase1: float
    phase2: float
    duration: float


@dataclass(frozen=True)
class SinglePulse:
    qudit: int  # site index: 0 = qudit 1, 1 = qudit 2
    level: int
    phase: float
    duration: float


@dataclass(frozen=True)
class Decouple:
    duration: float = 0.0


Segment = Union[CavityInteraction, PulsePair, SinglePulse, Decouple]

_KINDS = {
    "cavity": CavityInteraction,
    "pulse_pair": PulsePair,
    "single_pulse": SinglePulse,
    "decouple": Decouple,
}
_NAMES = {cls: name for name, cls in _KINDS.items()}


@dataclass(frozen=True)
class Schedule:
    d: int
    g: float
    omega: float
    segments: tuple[Segment, ...]

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def count(self, kind: type) -> int:
        return sum(isinstance(s, kind) for s in self.segments)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "g_rad_per_s": self.g,
            "omega_rad_per_s": self.omega,
            "segments": [{"kind": _NAMES[type(s)], **asdict(s)} for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        segs = []
        for rec in data["segments"]:
            rec = dict(rec)
            kind = rec.pop("kind")
            if kind not in _KINDS:
                raise ValueError(f"unknown segment kind {kind!r}")
            segs.append(_KINDS[kind](**rec))
        return cls(int(data["d"]), float(data["g_rad_per_s"]), float(data["omega_rad_per_s"]), tuple(segs))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "Schedule":
        return cls.loads(Path(path).read_text())


def swap_time(g: float) -> float:
    return math.pi / (SQRT2 * g)


def pulse_time(omega: float) -> float:
    return math.pi / (2.0 * omega)


def compile_schedule(d: int, g: float, omega: float) -> Schedule:
    """Compile the d-step transfer protocol.

    Step 1 is a bare cavity swap. Step l (1 < l < d) applies pulse pairs on
    the transitions omega_{(l-1)l}, ..., omega_{12} (highest first; phase
    +pi/2 on qudit 1, -pi/2 on qudit 2) and then a cavity swap. After the
    cavity is decoupled, qudit 2 receives -pi/2 pulses on omega_{01},
    omega_{12}, ..., omega_{(d-2)(d-1)} in that order.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if g <= 0 or omega <= 0:
        raise ValueError("g and omega must be positive")
    t_swap, t_pulse = swap_time(g), pulse_time(omega)
    half_pi = math.pi / 2

    segs: list[Segment] = [CavityInteraction(t_swap)]
    for step in range(2, d):
        for level in range(step, 1, -1):
            segs.append(PulsePair(level, half_pi, -half_pi, t_pulse))
        segs.append(CavityInteraction(t_swap))
    segs.append(Decouple())
    for level in range(1, d):
        segs.append(SinglePulse(QUDIT2, level, -half_pi, t_pulse))
    return Schedule(d, g, omega, tuple(segs))


def pulse_rotation(phase: float, theta: float) -> np.ndarray:
    """2x2 propagator of Omega(e^{i phase}|l-1><l| + h.c.) with theta = Omega t.

    Basis order is (|l-1>, |l>); the result does not depend on ``l``.
    """
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[c, -1j * np.exp(1j * phase) * s], [-1j * np.exp(-1j * phase) * s, c]],
        dtype=complex,
    )


def cavity_swap_map(t: float, g: float) -> np.ndarray:
    """Closed-form propagator on (|1,0_c,0>, |0,1_c,0>, |0,0_c,1>) for g1 = g2 = g.

    Paper ordering (qudit 1, cavity, qudit 2) for the basis labels.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    c = math.cos(SQRT2 * g * t)
    s = math.sin(SQRT2 * g * t)
    p, m, x = 0.5 * (1 + c), -0.5 * (1 - c), -1j * s / SQRT2
    return np.array([[p, x, m], [x, c, x], [m, x, p]], dtype=complex)


class ManifoldError(RuntimeError):
    """State left the subspace where the closed-form maps are exact."""


def _swap_indices(space: HilbertSpace) -> list[int]:
    # (|1>_1 |0>_c |0>_2, |0>_1 |1>_c |0>_2, |0>_1 |0>_c |1>_2) in (q1, q2, cavity) order
    return [space.index(1, 0, 0), space.index(0, 0, 1), space.index(0, 1, 0)]


def _check_cavity_manifold(psi: np.ndarray, d: int):
    # psi has shape (d, d, n_max + 1)
    bad = np.abs(psi[:, :, 2:]).max(initial=0.0)
    photon = psi[:, :, 1].copy()
    photon[0, 0] = 0
    bad = max(bad, np.abs(photon).max(initial=0.0))
    vac = psi[:, :, 0]
    mask = np.zeros((d, d), dtype=bool)
    mask[1, :] = True
    mask[:, 1] = True
    mask[1, 0] = mask[0, 1] = False
    bad = max(bad, np.abs(vac[mask]).max(initial=0.0))
    if bad > MANIFOLD_TOL:
        raise ManifoldError(
            f"amplitude {bad:.3g} outside the zero/one-excitation manifold covered by the closed-form swap"
        )


def _apply_pulse(psi: np.ndarray, site: int, level: int, phase: float, theta: float) -> np.ndarray:
    u = pulse_rotation(phase, theta)
    out = psi.copy()
    lo, hi = level - 1, level
    if site == QUDIT1:
        a, b = psi[lo], psi[hi]
        out[lo] = u[0, 0] * a + u[0, 1] * b
        out[hi] = u[1, 0] * a + u[1, 1] * b
    else:
        a, b = psi[:, lo], psi[:, hi]
        out[:, lo] = u[0, 0] * a + u[0, 1] * b
        out[:, hi] = u[1, 0] * a + u[1, 1] * b
    return out


def ideal_evolve(schedule: Schedule, psi0: StateVector) -> StateVector:
    """Propagate ``psi0`` with the closed-form cavity swap and pulse rotations."""
    space = psi0.space
    d = schedule.d
    if space.dims[:2] != (d, d):
        raise ValueError(f"state space {space.dims} does not match schedule d={d}")
    idx = _swap_indices(space)
    psi = np.array(psi0.amplitudes).reshape(space.dims)
    omega = schedule.omega
    for seg in schedule.segments:
        if isinstance(seg, CavityInteraction):
            _check_cavity_manifold(psi, d)
            flat = psi.reshape(-1)
            flat[idx] = cavity_swap_map(seg.duration, schedule.g) @ flat[idx]
            psi = flat.reshape(space.dims)
        elif isinstance(seg, PulsePair):
            theta = omega * seg.duration
            psi = _apply_pulse(psi, QUDIT1, seg.level, seg.phase1, theta)
            psi = _apply_pulse(psi, QUDIT2, seg.level, seg.phase2, theta)
        elif isinstance(seg, SinglePulse):
            psi = _apply_pulse(psi, seg.qudit, seg.level, seg.phase, omega * seg.duration)
    return StateVector(space, psi.reshape(-1), normalize=False)


def _coefficients(c: Sequence[complex], d: int) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if c.shape != (d,):
        raise ValueError(f"need {d} coefficients, got shape {c.shape}")
    if abs(np.linalg.norm(c) - 1) > 1e-10:
        raise ValueError(f"coefficients are not normalized (norm {np.linalg.norm(c)})")
    return c


def initial_state(d: int, c: Sequence[complex], n_max: int = 3) -> StateVector:
    """sum_l c_l |l>_1 |0>_2 |0>_c."""
    c = _coefficients(c, d)
    space = composite_space(d, n_max)
    psi = np.zeros(space.dims, dtype=complex)
    psi[:, 0, 0] = c
    return StateVector(space, psi.reshape(-1), normalize=False)


def target_state(d: int, c: Sequence[complex], n_max: int = 3) -> StateVector:
    """|0>_1 |0>_c (x) sum_l c_l |d-1-l>_2."""
    c = _coefficients(c, d)
    space = composite_space(d, n_max)
    psi = np.zeros(space.dims, dtype=complex)
    psi[0, ::-1, 0] = c
    return StateVector(space, psi.reshape(-1), normalize=False)


def uniform_coefficients(d: int) -> np.ndarray:
    return np.full(d, 1 / math.sqrt(d), dtype=complex)
