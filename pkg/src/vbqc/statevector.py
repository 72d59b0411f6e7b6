"""Labelled state-vector simulator for the handful of operations the protocol uses.

Qubits are attached when first touched and dropped as soon as they are
measured, so the active width follows the causal width of a pattern rather
than its size. Channels are simulated as quantum trajectories: one Kraus
branch is sampled per application.
"""

from __future__ import annotations

from collections.abc import Hashable, Sequence
from dataclasses import dataclass

import numpy as np

from .pattern import to_radians

DEFAULT_CAP = 16
ATOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

_SQRT_HALF = 1 / np.sqrt(2)


class SimulatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlusTheta:
    """``|+_theta> = (|0> + e^{i theta}|1>) / sqrt(2)`` with ``theta`` in units of pi/4."""

    theta: int

    def amplitudes(self) -> np.ndarray:
        return np.array([_SQRT_HALF, _SQRT_HALF * np.exp(1j * to_radians(self.theta))])


@dataclass(frozen=True)
class Dummy:
    """Computational basis state ``|bit>``."""

    bit: int

    def amplitudes(self) -> np.ndarray:
        amps = np.zeros(2, dtype=complex)
        amps[self.bit] = 1.0
        return amps


PreparedQubit = PlusTheta | Dummy


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        if any(k.shape != (dim, dim) for k in ops) or dim & (dim - 1):
            raise ValueError("Kraus operators must be square with power-of-two size")
        total = sum(k.conj().T @ k for k in ops)
        if not np.allclose(total, np.eye(dim), atol=ATOL):
            raise ValueError("Kraus operators are not complete (sum K^dag K != I)")
        object.__setattr__(self, "operators", ops)

    @property
    def n_qubits(self) -> int:
        return self.operators[0].shape[0].bit_length() - 1


def pauli_channel(px: float, py: float, pz: float) -> KrausChannel:
    pi = 1.0 - px - py - pz
    if min(px, py, pz, pi) < -ATOL:
        raise ValueError("Pauli probabilities must be non-negative and sum to at most 1")
    probs = [max(pi, 0.0), px, py, pz]
    ops = [np.sqrt(p) * m for p, m in zip(probs, (I2, X, Y, Z)) if p > 0]
    return KrausChannel(tuple(ops))


def depolarizing_channel(p: float) -> KrausChannel:
    """``rho -> (1 - p) rho + p I/2``; ``p = 1`` is the fully mixing channel."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing parameter must lie in [0, 1]")
    return pauli_channel(p / 4, p / 4, p / 4)


def dephasing_channel(q: float) -> KrausChannel:
    if not 0.0 <= q <= 1.0:
        raise ValueError("dephasing probability must lie in [0, 1]")
    return pauli_channel(0.0, 0.0, q)


class StateVector:
    """Pure state over an ordered list of active qubit labels.

    The amplitude array has one axis of length 2 per active label, in the
    order of :attr:`active`.
    """

    def __init__(self, cap: int = DEFAULT_CAP):
        self.cap = cap
        self.active: list[Hashable] = []
        self.amplitudes = np.ones((), dtype=complex)

    def __len__(self) -> int:
        return len(self.active)

    def _axis(self, label: Hashable) -> int:
        try:
            return self.active.index(label)
        except ValueError:
            raise SimulatorError(f"qubit {label!r} is not active") from None

    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def attach_qubit(self, label: Hashable, q: PreparedQubit | np.ndarray) -> StateVector:
        if label in self.active:
            raise SimulatorError(f"qubit {label!r} already active")
        if len(self.active) >= self.cap:
            raise SimulatorError(f"active-qubit cap of {self.cap} exceeded")
        amps = q if isinstance(q, np.ndarray) else q.amplitudes()
        self.amplitudes = np.multiply.outer(self.amplitudes, amps)
        self.active.append(label)
        return self

    def apply_cz(self, a: Hashable, b: Hashable) -> StateVector:
        if a == b:
            raise SimulatorError("CZ needs two distinct qubits")
        ia, ib = self._axis(a), self._axis(b)
        idx = [slice(None)] * len(self.active)
        idx[ia] = 1
        idx[ib] = 1
        self.amplitudes[tuple(idx)] *= -1
        return self

    def apply_matrix(self, labels: Sequence[Hashable], m: np.ndarray) -> StateVector:
        axes = [self._axis(lab) for lab in labels]
        k = len(axes)
        t = np.asarray(m, dtype=complex).reshape((2,) * (2 * k))
        out = np.tensordot(t, self.amplitudes, axes=(list(range(k, 2 * k)), axes))
        self.amplitudes = np.moveaxis(out, list(range(k)), axes)
        return self

    def apply_pauli(self, label: Hashable, p: str) -> StateVector:
        if p not in PAULIS:
            raise ValueError(f"unknown Pauli {p!r}")
        if p != "I":
            self.apply_matrix([label], PAULIS[p])
        return self

    def apply_channel(
        self, labels: Sequence[Hashable], ch: KrausChannel, rng: np.random.Generator
    ) -> StateVector:
        if ch.n_qubits != len(labels):
            raise SimulatorError("channel arity does not match the number of labels")
        if len(ch.operators) == 1:
            return self.apply_matrix(labels, ch.operators[0])
        branches = []
        weights = np.empty(len(ch.operators))
        saved = self.amplitudes
        for i, k in enumerate(ch.operators):
            self.amplitudes = saved
            self.apply_matrix(labels, k)
            branches.append(self.amplitudes)
            weights[i] = np.vdot(self.amplitudes, self.amplitudes).real
        pick = rng.choice(len(branches), p=weights / weights.sum())
        self.amplitudes = branches[pick] / np.sqrt(weights[pick])
        return self

    def outcome_probabilities(self, label: Hashable, delta: int) -> tuple[float, float]:
        b0, b1 = self._branches(self._axis(label), delta)
        p0 = float(np.vdot(b0, b0).real)
        p1 = float(np.vdot(b1, b1).real)
        return p0, p1

    def _branches(self, axis: int, delta: int) -> tuple[np.ndarray, np.ndarray]:
        psi0 = np.take(self.amplitudes, 0, axis=axis)
        psi1 = np.take(self.amplitudes, 1, axis=axis) * np.exp(-1j * to_radians(delta))
        return (psi0 + psi1) * _SQRT_HALF, (psi0 - psi1) * _SQRT_HALF

    def measure_rotated(
        self, label: Hashable, delta: int, rng: np.random.Generator
    ) -> tuple[int, StateVector]:
        """Measure in ``{|+_delta>, |-_delta>}``; outcome 0 means ``|+_delta>``.

        The measured qubit is removed from the active set.
        """
        axis = self._axis(label)
        b0, b1 = self._branches(axis, delta)
        p0 = float(np.vdot(b0, b0).real)
        p1 = float(np.vdot(b1, b1).real)
        p0 = p0 / (p0 + p1)
        bit = 0 if rng.random() < p0 else 1
        kept = b0 if bit == 0 else b1
        self.amplitudes = kept / np.linalg.norm(kept)
        del self.active[axis]
        return bit, self

    def project_rotated(self, label: Hashable, delta: int, bit: int) -> float:
        """Post-select outcome ``bit``; returns its probability (state renormalised)."""
        axis = self._axis(label)
        kept = self._branches(axis, delta)[bit]
        prob = float(np.vdot(kept, kept).real)
        if prob > 0:
            kept = kept / np.sqrt(prob)
        self.amplitudes = kept
        del self.active[axis]
        return prob

    def copy(self) -> StateVector:
        out = StateVector(self.cap)
        out.active = list(self.active)
        out.amplitudes = self.amplitudes.copy()
        return out
