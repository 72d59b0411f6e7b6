"""One blind run of a measurement pattern: computation run or test run.

The Client side owns :class:`RunSecrets` and computes every measurement
angle; the Server side only ever sees opaque qubit handles, the public graph
and the angles it is asked to measure at. Both roles run in-process on the
same simulator, which the Server owns.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .adversary import Honest, Malicious, Noisy, ServerBehaviour, frame_pauli_matrix
from .graph import Colouring, Graph
from .pattern import (
    PI,
    MeasurementPattern,
    add_angles,
    correction_exponents,
    negate_angle,
)
from .statevector import DEFAULT_CAP, Dummy, PlusTheta, PreparedQubit, StateVector

COMPUTATION = "computation"
TEST = "test"


class RedoRequested(Exception):
    """Raised by the Server side to abandon the current attempt of a run."""


@dataclass(frozen=True)
class RunSecrets:
    kind: str
    theta: Mapping[int, int]
    r: Mapping[int, int]
    dummies: Mapping[int, int] = field(default_factory=dict)
    colour: int | None = None

    @property
    def is_test(self) -> bool:
        return self.kind == TEST

    @property
    def traps(self) -> tuple[int, ...]:
        return tuple(self.theta) if self.is_test else ()

    def prepared(self, v: int) -> PreparedQubit:
        if v in self.dummies:
            return Dummy(self.dummies[v])
        return PlusTheta(self.theta[v])


@dataclass
class RunTranscript:
    deltas: dict[int, int] = field(default_factory=dict)
    outcomes: dict[int, int] = field(default_factory=dict)
    redo_count: int = 0


def sample_computation_secrets(p: MeasurementPattern, rng: np.random.Generator) -> RunSecrets:
    vs = p.graph.vertices
    theta = rng.integers(0, 8, size=len(vs))
    r = rng.integers(0, 2, size=len(vs))
    return RunSecrets(
        kind=COMPUTATION,
        theta=dict(zip(vs, theta.tolist())),
        r=dict(zip(vs, r.tolist())),
    )


def sample_test_secrets(
    p: MeasurementPattern, c: Colouring, colour: int, rng: np.random.Generator
) -> RunSecrets:
    if not 0 <= colour < c.k:
        raise ValueError(f"colour {colour} outside 0..{c.k - 1}")
    vs = p.graph.vertices
    traps = [v for v in vs if c.assignment[v] == colour]
    others = [v for v in vs if c.assignment[v] != colour]
    theta = rng.integers(0, 8, size=len(traps)).tolist()
    r = rng.integers(0, 2, size=len(traps)).tolist()
    dummies = rng.integers(0, 2, size=len(others)).tolist()
    return RunSecrets(
        kind=TEST,
        theta=dict(zip(traps, theta)),
        r=dict(zip(traps, r)),
        dummies=dict(zip(others, dummies)),
        colour=colour,
    )


def delta_computation(
    p: MeasurementPattern,
    v: int,
    secrets: RunSecrets,
    outcomes: Mapping[int, int],
    x: Mapping[int, int] | Sequence[int],
) -> int:
    """Blinded angle ``(-1)^sX phi + sZ pi + theta~ + r pi`` (mod 8).

    ``outcomes`` holds decoded outcomes ``s_u = b_u xor r_u``; ``x`` maps
    input vertices to bits (or lists them in ``graph.inputs`` order).
    """
    if secrets.is_test:
        raise ValueError("delta_computation called on a test run")
    sx, sz = correction_exponents(p.flow, outcomes, v)
    phi = p.angles[v]
    if sx:
        phi = negate_angle(phi)
    theta = secrets.theta[v]
    if v in p.graph.inputs:
        theta = add_angles(theta, PI * _input_bit(p, x, v))
    return add_angles(phi, PI * sz, theta, PI * secrets.r[v])


def _input_bit(p: MeasurementPattern, x, v: int) -> int:
    if isinstance(x, Mapping):
        return int(x[v])
    return int(x[p.graph.inputs.index(v)])


def delta_test(v: int, secrets: RunSecrets, rng: np.random.Generator) -> int:
    """Trap: ``theta + r pi``. Dummy: a fresh uniform angle."""
    if v in secrets.dummies:
        return int(rng.integers(0, 8))
    return add_angles(secrets.theta[v], PI * secrets.r[v])


def decode_outcome(b: int, r: int) -> int:
    return b ^ r


def expected_trap_outcome(v: int, secrets: RunSecrets, g: Graph) -> int:
    """``r_v`` XORed with the dummy bits of all neighbours of trap ``v``."""
    if not secrets.is_test or v not in secrets.theta:
        raise ValueError(f"vertex {v} is not a trap of this run")
    bit = secrets.r[v]
    for u in g.neighbours(v):
        bit ^= secrets.dummies[u]
    return bit


def failed_traps(secrets: RunSecrets, transcript: RunTranscript, g: Graph) -> list[int]:
    return [
        v
        for v in secrets.traps
        if transcript.outcomes[v] != expected_trap_outcome(v, secrets, g)
    ]


def decoded_output(p: MeasurementPattern, secrets: RunSecrets, transcript: RunTranscript) -> tuple[int, ...]:
    return tuple(decode_outcome(transcript.outcomes[o], secrets.r[o]) for o in p.graph.outputs)


# --- the Server role ---------------------------------------------------------


class QubitHandle:
    """What travels from Client to Server: an opaque reference to a qubit.

    Only the simulator backend may read the preparation; Server code treats
    handles as tokens.
    """

    __slots__ = ("_prep",)

    def __init__(self, prep: PreparedQubit):
        self._prep = prep

    def __repr__(self) -> str:
        return "QubitHandle(<opaque>)"


def _materialise(handle: QubitHandle) -> PreparedQubit:
    return handle._prep


@dataclass
class ServerOptions:
    """Server-side knobs that are not deviations: simulator cap and forced redos."""

    cap: int = DEFAULT_CAP
    redo_rate: float = 0.0


class Server:
    """The Server role for one run at a time.

    ``begin_run`` receives the handles (step 2b) and entangles (step 2c);
    ``measure`` answers one angle (step 2d). Entangling is lazy: a CZ is
    applied right before the first measurement of either endpoint, which
    commutes with everything the Server would have done in between.
    """

    def __init__(
        self,
        graph: Graph,
        behaviour: ServerBehaviour | None = None,
        options: ServerOptions | None = None,
    ):
        self.graph = graph
        self.behaviour = behaviour or Honest()
        self.options = options or ServerOptions()
        self._state: StateVector | None = None

    def begin_run(self, j: int, handles: Mapping[int, QubitHandle], rng: np.random.Generator) -> None:
        self.run_index = j
        self.rng = rng
        self._handles = dict(handles)
        self._state = StateVector(self.options.cap)
        self._pending = {v: set(self.graph.neighbours(v)) for v in self.graph.vertices}
        self._noise_done: set[int] = set()
        self._redo_at = None
        if self.options.redo_rate > 0 and rng.random() < self.options.redo_rate:
            self._redo_at = int(rng.integers(0, len(self.graph.vertices)))
        self._measured = 0
        beh = self.behaviour
        self._channel = beh.noise.channel_for_run(j) if isinstance(beh, Noisy) else None
        self._early_noise = isinstance(beh, Noisy) and beh.noise.schedule == "before_entangle"
        self._deviations: dict[int, list[str]] = {}
        if isinstance(beh, Malicious):
            for v, pauli in beh.attack.for_run(j):
                self._deviations.setdefault(v, []).append(pauli)

    @property
    def width(self) -> int:
        return 0 if self._state is None else len(self._state)

    def _touch(self, v: int) -> None:
        st = self._state
        if v in st.active:
            return
        st.attach_qubit(v, _materialise(self._handles[v]))
        if self._early_noise:
            st.apply_channel([v], self._channel, self.rng)

    def measure(self, v: int, delta: int) -> int:
        if self._redo_at is not None and self._measured == self._redo_at:
            self.abandon()
            raise RedoRequested(self.run_index)
        st = self._state
        self._touch(v)
        for u in sorted(self._pending[v]):
            self._touch(u)
            st.apply_cz(v, u)
            self._pending[u].discard(v)
        self._pending[v].clear()
        if self._channel is not None and not self._early_noise:
            st.apply_channel([v], self._channel, self.rng)
        for pauli in self._deviations.get(v, ()):
            if pauli != "I":
                st.apply_matrix([v], frame_pauli_matrix(pauli, delta))
        bit, _ = st.measure_rotated(v, delta, self.rng)
        self._measured += 1
        return bit

    def abandon(self) -> None:
        self._state = None


# --- the Client side of one run -----------------------------------------------


def run_with_server(
    p: MeasurementPattern,
    secrets: RunSecrets,
    x,
    server,
    j: int,
    client_rng: np.random.Generator,
    server_rng: np.random.Generator,
    on_prepared: Callable[[], None] | None = None,
) -> RunTranscript:
    """Drive steps 2b-2d of one attempt against ``server``.

    ``on_prepared`` runs after the qubits are handed over and before the
    Server entangles; it is the last point where a Client redo is allowed.
    Raises :class:`RedoRequested` if the Server abandons the attempt.
    """
    handles = {v: QubitHandle(secrets.prepared(v)) for v in p.graph.vertices}
    if on_prepared is not None:
        on_prepared()
    server.begin_run(j, handles, server_rng)
    tr = RunTranscript()
    decoded: dict[int, int] = {}
    for v in p.order:
        if secrets.is_test:
            delta = delta_test(v, secrets, client_rng)
        else:
            delta = delta_computation(p, v, secrets, decoded, x)
        b = server.measure(v, delta)
        tr.deltas[v] = delta
        tr.outcomes[v] = b
        if not secrets.is_test:
            decoded[v] = decode_outcome(b, secrets.r[v])
    return tr


def execute_run(
    p: MeasurementPattern,
    secrets: RunSecrets,
    x,
    behaviour: ServerBehaviour | None,
    rng: np.random.Generator,
    run_index: int = 0,
    cap: int = DEFAULT_CAP,
) -> RunTranscript:
    """One complete run against an in-process Server with the given behaviour."""
    server = Server(p.graph, behaviour, ServerOptions(cap=cap))
    return run_with_server(p, secrets, x, server, run_index, rng, rng)


# --- reference semantics --------------------------------------------------------


def output_distribution(
    p: MeasurementPattern,
    x,
    flips: Mapping[int, int] | None = None,
    tol: float = 1e-12,
) -> dict[tuple[int, ...], float]:
    """Exact output distribution of the unblinded pattern by branch enumeration.

    ``flips`` marks vertices whose reported outcome is flipped (an ``X``
    deviation in the measurement frame), used to derive output sensitivities.
    """
    flips = flips or {}
    dist: dict[tuple[int, ...], float] = {}
    inputs = p.graph.inputs

    def prep(v):
        if v in inputs:
            return PlusTheta(PI * _input_bit(p, x, v))
        return PlusTheta(0)

    def recurse(state: StateVector, pending, i: int, decoded: dict, prob: float):
        if prob < tol:
            return
        if i == len(p.order):
            y = tuple(decoded[o] for o in p.graph.outputs)
            dist[y] = dist.get(y, 0.0) + prob
            return
        v = p.order[i]
        if v not in state.active:
            state.attach_qubit(v, prep(v))
        for u in sorted(pending[v]):
            if u not in state.active:
                state.attach_qubit(u, prep(u))
            state.apply_cz(v, u)
        new_pending = {a: set(b) for a, b in pending.items()}
        for u in pending[v]:
            new_pending[u].discard(v)
        new_pending[v] = set()
        sx, sz = correction_exponents(p.flow, decoded, v)
        phi = negate_angle(p.angles[v]) if sx else p.angles[v]
        delta = add_angles(phi, PI * sz)
        for bit in (0, 1):
            branch = state.copy()
            pb = branch.project_rotated(v, delta, bit)
            s = bit ^ flips.get(v, 0)
            recurse(branch, new_pending, i + 1, {**decoded, v: s}, prob * pb)

    pending = {v: set(p.graph.neighbours(v)) for v in p.graph.vertices}
    recurse(StateVector(), pending, 0, {}, 1.0)
    return dist


def reference_output(p: MeasurementPattern, x) -> tuple[int, ...]:
    """The deterministic output of ``p`` on ``x``; raises if it is not deterministic."""
    dist = output_distribution(p, x)
    y, prob = max(dist.items(), key=lambda kv: kv[1])
    if prob < 1 - 1e-9:
        raise ValueError(f"pattern {p.name!r} is not deterministic on input {x}: {dist}")
    return y


def all_inputs(p: MeasurementPattern) -> list[tuple[int, ...]]:
    return list(itertools.product((0, 1), repeat=len(p.graph.inputs)))


def output_sensitivity(p: MeasurementPattern, x=None) -> dict[int, tuple[int, ...]]:
    """For each vertex, the output bits flipped when its outcome is flipped.

    Only defined when the effect is deterministic (e.g. Pauli-angle
    patterns); raises otherwise.
    """
    if x is None:
        x = (0,) * len(p.graph.inputs)
    ref = reference_output(p, x)
    out = {}
    for v in p.graph.vertices:
        dist = output_distribution(p, x, flips={v: 1})
        y, prob = max(dist.items(), key=lambda kv: kv[1])
        if prob < 1 - 1e-9:
            raise ValueError(f"flipping vertex {v} does not act deterministically on the output")
        out[v] = tuple(i for i, (a, b) in enumerate(zip(y, ref)) if a != b)
    return out
