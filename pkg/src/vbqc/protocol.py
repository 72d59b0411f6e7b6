"""The full verification protocol: partition, interleaved runs, Redo, tests, majority.

Two engines share every random choice the Client makes (partition, test
colours, secrets):

* ``"quantum"`` drives the state-vector Server run by run;
* ``"classical"`` skips the simulator and applies outcome flips directly.
  It is exact for measurement-frame ``X``/``Y`` attacks and, for Pauli
  noise injected just before measurement, samples the same distribution.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .adversary import (
    Honest,
    Malicious,
    Noisy,
    ServerBehaviour,
    outcome_flip_probability,
)
from .graph import Colouring, validate_colouring
from .pattern import MeasurementPattern
from .statevector import DEFAULT_CAP
from .ubqc import (
    COMPUTATION,
    TEST,
    RedoRequested,
    RunSecrets,
    RunTranscript,
    Server,
    ServerOptions,
    decoded_output,
    failed_traps,
    reference_output,
    run_with_server,
    sample_computation_secrets,
    sample_test_secrets,
)

TRACE_SCHEMA = "vbqc.trace/1"


@dataclass(frozen=True)
class ProtocolParams:
    """``n = d + t`` runs, abort threshold ``w`` and colour count ``k``."""

    n: int
    d: int
    t: int
    w: int
    k: int

    def __post_init__(self) -> None:
        if self.n != self.d + self.t:
            raise ValueError(f"n = {self.n} differs from d + t = {self.d + self.t}")
        if not 0 < self.d < self.n:
            raise ValueError("need 0 < d < n")
        if not 0 <= self.w <= self.t:
            raise ValueError("need 0 <= w <= t")
        if self.k < 1:
            raise ValueError("need k >= 1")

    @classmethod
    def from_ratios(cls, n: int, delta_ratio: float, omega: float, k: int) -> ProtocolParams:
        """``d = round(delta_ratio * n)`` and ``w = ceil(omega * t)``."""
        d = int(round(delta_ratio * n))
        d = min(max(d, 1), n - 1)
        t = n - d
        return cls(n=n, d=d, t=t, w=int(math.ceil(omega * t - 1e-12)), k=k)

    @property
    def delta_ratio(self) -> float:
        return self.d / self.n

    @property
    def tau(self) -> float:
        return self.t / self.n

    @property
    def omega(self) -> float:
        return self.w / self.t

    @property
    def secure_regime(self) -> bool:
        return self.omega < 1 / (2 * self.k)

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "t": self.t, "w": self.w, "k": self.k}


@dataclass(frozen=True)
class Accept:
    y: tuple[int, ...]


@dataclass(frozen=True)
class Abort:
    reason: str = ""


Verdict = Accept | Abort


class Requester(enum.Enum):
    CLIENT = "client"
    SERVER = "server"


class Phase(enum.IntEnum):
    SAMPLED = 0  # step 2a
    PREPARED = 1  # step 2b: qubits handed over
    ENTANGLED = 2  # step 2c
    MEASURING = 3  # step 2d
    DONE = 4


class RedoRejected(RuntimeError):
    pass


@dataclass
class RunState:
    j: int
    kind: str
    attempt: int
    phase: Phase
    secrets: RunSecrets
    redo_count: int = 0


@dataclass(frozen=True)
class RedoEvent:
    run: int
    attempt: int
    requester: str
    phase: str


@dataclass
class RunRecord:
    j: int
    kind: str
    colour: int | None
    secrets: RunSecrets | None
    transcript: RunTranscript | None
    redo_count: int
    failed_traps: tuple[int, ...] = ()
    output: tuple[int, ...] | None = None

    @property
    def failed(self) -> bool:
        return bool(self.failed_traps)


@dataclass
class ProtocolTrace:
    seed: object
    params: ProtocolParams
    computation_runs: tuple[int, ...]
    test_runs: tuple[int, ...]
    runs: list[RunRecord] = field(default_factory=list)
    redo_log: list[RedoEvent] = field(default_factory=list)
    c_fail: int = 0
    verdict: Verdict | None = None
    presampled: int = 0

    @property
    def colours(self) -> dict[int, int]:
        return {r.j: r.colour for r in self.runs if r.kind == TEST}

    @property
    def outputs(self) -> list[tuple[int, ...]]:
        return [r.output for r in self.runs if r.kind == COMPUTATION]

    @property
    def redo_counts(self) -> list[int]:
        return [r.redo_count for r in self.runs]

    def to_record(self) -> dict:
        """One JSON-ready line; run indices are 0-based."""
        v = self.verdict
        return {
            "schema": TRACE_SCHEMA,
            "seed": _seed_repr(self.seed),
            "params": self.params.to_dict(),
            "partition": {"C": list(self.computation_runs), "T": list(self.test_runs)},
            "colours": {str(j): c for j, c in sorted(self.colours.items())},
            "c_fail": self.c_fail,
            "verdict": {"accept": list(v.y)} if isinstance(v, Accept) else {"abort": v.reason},
            "outputs": [list(y) for y in self.outputs],
            "redo_counts": self.redo_counts,
        }


def _seed_repr(seed) -> object:
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": str(seed.entropy), "spawn_key": list(seed.spawn_key)}
    return seed


# --- step 1 ---------------------------------------------------------------------


def sample_partition(n: int, d: int, rng: np.random.Generator) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Uniform size-``d`` subset ``C`` of ``range(n)`` and its complement ``T``."""
    if not 0 < d < n:
        raise ValueError(f"need 0 < d < n, got d={d}, n={n}")
    comp = np.sort(rng.choice(n, size=d, replace=False))
    cset = set(comp.tolist())
    return tuple(comp.tolist()), tuple(j for j in range(n) if j not in cset)


def presample_count(n: int, p_succ: float) -> int:
    """Runs the Client pre-samples when each attempt succeeds with ``p_succ``."""
    if not 0 < p_succ <= 1:
        raise ValueError("p_succ must lie in (0, 1]")
    return math.ceil(n / p_succ - 1e-12)


# --- steps 3 and 4 --------------------------------------------------------------


def evaluate_tests(trace: ProtocolTrace) -> int:
    """Number of test runs with at least one failed trap."""
    return sum(1 for r in trace.runs if r.kind == TEST and r.failed)


def majority_output(ys: Sequence[Sequence[int]]) -> Verdict:
    """``Accept(y)`` iff ``y`` occurs strictly more than ``len(ys) / 2`` times."""
    if not ys:
        raise ValueError("majority needs at least one output")
    counts: dict[tuple[int, ...], int] = {}
    for y in ys:
        key = tuple(y)
        counts[key] = counts.get(key, 0) + 1
    y, c = max(counts.items(), key=lambda kv: kv[1])
    if 2 * c > len(ys):
        return Accept(y)
    return Abort("no majority")


def decide(c_fail: int, w: int, ys: Sequence[Sequence[int]]) -> Verdict:
    if c_fail >= w:
        return Abort("tests")
    return majority_output(ys)


# --- Redo ------------------------------------------------------------------------


def handle_redo(state: RunState, requester: Requester, fresh: RunSecrets) -> RunState:
    """Restart run ``state.j`` with the freshly sampled secrets ``fresh``.

    The Client may only ask before the Server entangles; the Server at any time.
    """
    if requester is Requester.CLIENT and state.phase >= Phase.ENTANGLED:
        raise RedoRejected(f"Client redo of run {state.j} after entangling")
    if state.phase is Phase.DONE:
        raise RedoRejected(f"run {state.j} is already complete")
    return RunState(
        j=state.j,
        kind=state.kind,
        attempt=state.attempt + 1,
        phase=Phase.SAMPLED,
        secrets=fresh,
        redo_count=state.redo_count + 1,
    )


class _ClientRedo(Exception):
    pass


@dataclass(frozen=True)
class RedoSettings:
    """Simulated Redo traffic: forced Server redos and voluntary Client redos."""

    server_rate: float = 0.0
    client_rate: float = 0.0
    p_succ: float | None = None
    max_attempts: int = 1000


# --- the run loop ---------------------------------------------------------------


def _sample_secrets(p, c, kind, seed, j, attempt) -> RunSecrets:
    rng = rngmod.substream(seed, j, attempt, rngmod.CLIENT)
    if kind == TEST:
        colour = int(rng.integers(0, c.k))
        return sample_test_secrets(p, c, colour, rng)
    return sample_computation_secrets(p, rng)


def _execute_quantum(p, c, kind, j, x, behaviour, seed, redo, cap, log, server_factory=None):
    state = RunState(j, kind, 0, Phase.SAMPLED, _sample_secrets(p, c, kind, seed, j, 0))
    while True:
        if state.attempt >= redo.max_attempts:
            raise RuntimeError(f"run {j} exceeded {redo.max_attempts} attempts")
        client_rng = rngmod.substream(seed, j, state.attempt, rngmod.CLIENT, 1)
        server_rng = rngmod.substream(seed, j, state.attempt, rngmod.SERVER)
        if server_factory is None:
            server = Server(p.graph, behaviour, ServerOptions(cap=cap, redo_rate=redo.server_rate))
        else:
            server = server_factory(j, state.attempt)

        def prepared():
            state.phase = Phase.PREPARED
            if redo.client_rate > 0 and client_rng.random() < redo.client_rate:
                raise _ClientRedo

        try:
            tr = run_with_server(p, state.secrets, x, server, j, client_rng, server_rng, prepared)
        except (_ClientRedo, RedoRequested) as exc:
            who = Requester.CLIENT if isinstance(exc, _ClientRedo) else Requester.SERVER
            if who is Requester.SERVER:
                state.phase = Phase.MEASURING
            log.append(RedoEvent(j, state.attempt, who.value, state.phase.name.lower()))
            fresh = _sample_secrets(p, c, kind, seed, j, state.attempt + 1)
            state = handle_redo(state, who, fresh)
            continue
        state.phase = Phase.DONE
        tr.redo_count = state.redo_count
        rec = RunRecord(j, kind, state.secrets.colour, state.secrets, tr, state.redo_count)
        if kind == TEST:
            rec.failed_traps = tuple(failed_traps(state.secrets, tr, p.graph))
        else:
            rec.output = decoded_output(p, state.secrets, tr)
        return rec


@dataclass(frozen=True)
class ClassicalModel:
    """What the classical engine needs about the pattern: reference output and flip map."""

    reference: tuple[int, ...]
    sensitivity: Mapping[int, tuple[int, ...]]


def classical_model(p: MeasurementPattern, x) -> ClassicalModel:
    from .ubqc import output_sensitivity

    return ClassicalModel(reference_output(p, x), output_sensitivity(p, x))


class _FlipCache:
    """Per-channel outcome-flip probabilities, computed once per protocol execution."""

    def __init__(self, noise):
        self.noise = noise
        self.cache: dict[int, float] = {}

    def __call__(self, j: int) -> float:
        ch = self.noise.channel_for_run(j)
        key = id(ch)
        if key not in self.cache:
            self.cache[key] = outcome_flip_probability(self.noise, j)
        return self.cache[key]


def _flips_for_run(p, behaviour, j, rng, flip_prob=None) -> set[int]:
    if isinstance(behaviour, Honest) or behaviour is None:
        return set()
    if isinstance(behaviour, Malicious):
        flipped: set[int] = set()
        for v, pauli in behaviour.attack.for_run(j):
            if pauli in ("X", "Y"):
                flipped ^= {v}
        return flipped
    q = flip_prob(j) if flip_prob is not None else outcome_flip_probability(behaviour.noise, j)
    hits = rng.random(len(p.graph.vertices)) < q
    return {v for v, h in zip(p.graph.vertices, hits) if h}


def _execute_classical(p, c, kind, j, behaviour, seed, model, redo, log, flip_prob=None):
    attempt = 0
    redo_count = 0
    server_rng = None
    needs_server_rng = redo.server_rate > 0 or isinstance(behaviour, Noisy)
    while needs_server_rng:
        server_rng = rngmod.substream(seed, j, attempt, rngmod.SERVER)
        if redo.server_rate > 0 and server_rng.random() < redo.server_rate:
            log.append(RedoEvent(j, attempt, Requester.SERVER.value, Phase.MEASURING.name.lower()))
            attempt += 1
            redo_count += 1
            continue
        break
    flipped = _flips_for_run(p, behaviour, j, server_rng, flip_prob)
    if kind == TEST:
        # same first draw as the quantum engine's secret sampling
        colour = int(rngmod.substream(seed, j, attempt, rngmod.CLIENT).integers(0, c.k))
        traps = c.colour_class(colour)
        return RunRecord(j, kind, colour, None, None, redo_count, tuple(v for v in traps if v in flipped))
    y = list(model.reference)
    for v in flipped:
        for i in model.sensitivity[v]:
            y[i] ^= 1
    return RunRecord(j, kind, None, None, None, redo_count, output=tuple(y))


def run_protocol(
    p: MeasurementPattern,
    c: Colouring,
    params: ProtocolParams,
    x,
    behaviour: ServerBehaviour | None = None,
    seed: rngmod.Seed = 0,
    *,
    engine: str = "quantum",
    redo: RedoSettings | None = None,
    jobs: int = 1,
    cap: int = DEFAULT_CAP,
    model: ClassicalModel | None = None,
    server_factory=None,
) -> tuple[Verdict, ProtocolTrace]:
    """Execute the protocol once and return the verdict with its full trace.

    ``seed`` fixes every random choice: partition, colours, secrets, Server
    randomness. ``jobs > 1`` runs the ``n`` runs concurrently with identical
    results. ``server_factory(j, attempt)`` replaces the in-process Server
    (quantum engine only), e.g. with a proxy over a transport.
    """
    if not validate_colouring(p.graph, c):
        raise ValueError("invalid colouring for this pattern")
    if c.k != params.k:
        raise ValueError(f"params.k = {params.k} but the colouring uses {c.k} colours")
    behaviour = behaviour or Honest()
    redo = redo or RedoSettings()
    seed = rngmod.seed_sequence(seed)
    comp, tests = sample_partition(params.n, params.d, rngmod.substream(seed, rngmod.PARTITION))
    trace = ProtocolTrace(seed, params, comp, tests)
    if redo.p_succ is not None:
        trace.presampled = presample_count(params.n, redo.p_succ)
    kinds = {j: COMPUTATION for j in comp} | {j: TEST for j in tests}

    if engine == "classical":
        if model is None:
            model = classical_model(p, x)
        flip_prob = _FlipCache(behaviour.noise) if isinstance(behaviour, Noisy) else None
        if flip_prob is not None:
            flip_prob(0)

        def one(j, log):
            return _execute_classical(p, c, kinds[j], j, behaviour, seed, model, redo, log, flip_prob)

    elif engine == "quantum":

        def one(j, log):
            return _execute_quantum(p, c, kinds[j], j, x, behaviour, seed, redo, cap, log, server_factory)

    else:
        raise ValueError(f"unknown engine {engine!r}")

    logs: list[list[RedoEvent]] = [[] for _ in range(params.n)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trace.runs = list(pool.map(lambda j: one(j, logs[j]), range(params.n)))
    else:
        trace.runs = [one(j, logs[j]) for j in range(params.n)]
    trace.redo_log = [e for log in logs for e in log]

    trace.c_fail = evaluate_tests(trace)
    trace.verdict = decide(trace.c_fail, params.w, trace.outputs)
    return trace.verdict, trace
